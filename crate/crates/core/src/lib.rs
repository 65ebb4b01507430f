//! Numerical tools for sprays: evaluation, curvature, geodesics, projective
//! factors, path-space reconstruction and projective completion.

pub mod catalog;
pub mod completeness;
pub mod diffops;
pub mod domain;
pub mod dual;
pub mod error;
pub mod fd;
pub mod field;
pub mod geodesics;
pub mod localdiff;
pub mod lsq;
pub mod newton;
pub mod ode;
pub mod pathspace;
pub mod projective;
pub mod quadrature;
pub mod sampling;
pub mod state;

pub use completeness::ReparamStrategy;
pub use domain::{ConicalDomain, Constraint};
pub use error::{Result, SprayError};
pub use field::{
    check_factor_homogeneity, check_homogeneity, eval_spray, projective_deform, FinslerNorm,
    HomogeneityReport, Params, ProjectiveFactor, SprayField,
};
pub use geodesics::{IntegratorSettings, ProbeSettings, Trajectory};
pub use pathspace::PathFamily;
pub use state::TangentState;
