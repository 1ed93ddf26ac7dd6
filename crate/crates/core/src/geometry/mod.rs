//! Charts with finite group actions, parameter domains with corners, meshes
//! and parametrized branches.

mod branch;
mod chart;
mod domain;

pub use branch::{branch_from_graph, check_group_invariance, BoundaryFace, Branch, Orientation, Parametrization, Projection};
pub use chart::{Chart, ChartDomain, EffectiveQuotient, GroupAction, GROUP_SAMPLES};
pub use domain::{Cell, Factor, Mesh, ParamDomain};

use crate::scalar::Real;

/// `max(nominal, 1000·ε)`: tolerances stated for `f64` that stay meaningful in `f32`.
pub(crate) fn tol<T: Real>(nominal: f64) -> T {
    T::lit(nominal).max(T::epsilon() * T::lit(1e3))
}
