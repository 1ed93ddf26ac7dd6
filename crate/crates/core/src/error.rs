use thiserror::Error;

/// Errors raised anywhere in the engine.
///
/// Variants whose [`Error::is_verification_failure`] is true describe a
/// checked property that failed (with a witness), as opposed to bad input.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable x{index} out of range for arity {arity}")]
    VariableOutOfRange { index: usize, arity: usize },
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid group: {0}")]
    Group(String),
    #[error("invalid parameter domain: {0}")]
    ParamDomain(String),
    #[error("invalid branch: {0}")]
    Branch(String),
    #[error("invalid branching structure: {0}")]
    Structure(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("point {point:?} is not on the support")]
    NotOnSupport { point: Vec<f64> },
    #[error("weight functions disagree at {point:?}: {left} vs {right}")]
    ThetaMismatch { point: Vec<f64>, left: String, right: String },
    #[error("region is not group-saturated: element {element} maps {point:?} outside")]
    NotSaturated { element: usize, point: Vec<f64> },
    #[error("restriction neighborhood overlaps its image under element {element} at {point:?}")]
    RestrictionOverlap { element: usize, point: Vec<f64> },
    #[error("cover gap: no cover function is positive at {point:?}")]
    CoverGap { point: Vec<f64> },
    #[error("not in good position: {0}")]
    GoodPosition(String),
    #[error("properness violated at t = {t}: zero at {point:?} leaves the compact box")]
    Properness { t: f64, point: Vec<f64> },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// True for failed checks that carry a witness rather than malformed input.
    pub fn is_verification_failure(&self) -> bool {
        matches!(
            self,
            Error::ThetaMismatch { .. }
                | Error::NotSaturated { .. }
                | Error::RestrictionOverlap { .. }
                | Error::CoverGap { .. }
                | Error::GoodPosition(_)
                | Error::Properness { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
