//! Halpern-accelerated inexact proximal point method (HiPPM) for maximal
//! monotone inclusions `0 ∈ T(z)`, the accelerated inexact augmented Lagrangian
//! method it induces on convex QPs, and a layer that evaluates the computable
//! convergence bounds of both against recorded iterate traces.

pub mod alm;
pub mod cli;
pub mod error;
mod inner;
pub mod instance;
pub mod linalg;
pub mod operator;
pub mod rates;
pub mod solver;
pub mod trace_csv;

pub use error::{HippmError, Result};
pub use linalg::{Matrix, Vector};
pub use operator::{
    fixed_point_residual, AffineOperator, BoxNormalCone, MonotoneOperator,
    QuadraticBoxSubdifferential, ResolventResult, ScaledIdentityPlusSkew,
};
