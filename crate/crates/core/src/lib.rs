//! Resolvent splitting with minimal lifting for monotone inclusions
//! `0 ∈ A₁x + … + A_nx`, the primal-dual method it induces, and its
//! application to total-variation image denoising.
//!
//! The crate also ships machine checks of the contraction estimates behind
//! the method's linear convergence: the descent inequality, the ε/α chains
//! and the resulting contraction factors, empirical rate fitting, and the
//! primal-dual gap.

pub mod diagnostics;
pub mod error;
pub mod families;
pub mod hvector;
pub mod imaging;
pub mod linear;
pub mod operators;
pub mod primal_dual;
pub mod splitting;
pub mod verify;

mod random;

pub use error::{Error, Result};
pub use hvector::HVector;
pub use linear::{DenseMatrix, LinearMap};
pub use operators::{Cone, OperatorDesc, ProxSpec};
pub use splitting::{LiftedPoint, SplitProblem};
