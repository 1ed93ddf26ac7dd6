//! Integration of differential forms over weighted, oriented, group-symmetric
//! branched submanifolds of a chart.
//!
//! A [`geometry::Chart`] is an open set of `ℝᴺ` with a finite group acting by
//! diffeomorphisms. A [`branched::BranchingStructure`] is a finite family of
//! parametrized `n`-dimensional branches (manifolds with corners) carrying
//! positive rational weights; it induces the weight function `Θ`. The
//! canonical measure of an `n`-form over a region is
//! `(1/#G_e) Σᵢ σᵢ ∫ ω|Mᵢ` where `#G_e` is the order of the effectively
//! acting quotient of the group; see [`measure`].
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`). Weights, group
//! orders and prefactors are exact [`Rational`]s. The aliases at the crate
//! root fix the scalar to `f64`.

pub mod branched;
pub mod error;
pub mod expr;
pub mod forms;
pub mod geometry;
pub mod jet;
pub mod linalg;
pub mod measure;
pub mod multisection;
pub mod quadrature;
pub mod rational;
pub mod report;
pub mod sampling;
pub mod scalar;

pub use error::{Error, Result};
pub use rational::{format_rational, parse_rational, Rational};
pub use scalar::Real;

pub type Chart = geometry::Chart<f64>;
pub type ChartDomain = geometry::ChartDomain<f64>;
pub type ParamDomain = geometry::ParamDomain<f64>;
pub type Branch = geometry::Branch<f64>;
pub type BranchingStructure = branched::BranchingStructure<f64>;
pub type PartitionOfUnity = measure::PartitionOfUnity<f64>;
pub type MeasureResult = measure::MeasureResult<f64>;
pub type Region = measure::Region<f64>;
pub type Integrator = measure::Integrator<f64>;
pub type ToySection = multisection::ToySection<f64>;
pub type SolutionSet = multisection::SolutionSet<f64>;
