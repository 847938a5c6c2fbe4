//! Finite-difference optimization of noisy zeroth-order objectives.
//!
//! The crate computes forward and central difference gradients and Jacobians
//! whose intervals balance truncation error against the noise level of the
//! function, and drives two solvers with them:
//!
//! * [`lbfgs`]: limited-memory BFGS with a noise-tolerant Armijo–Wolfe
//!   bisection line search and adaptive curvature re-estimation;
//! * [`leastsq`]: a Levenberg–Marquardt trust-region method for nonlinear
//!   least squares using per-residual differencing intervals.
//!
//! Function values are only ever read through a [`noise::NoisyOracle`] or
//! [`noise::ResidualOracle`], which inject seeded noise and count
//! evaluations. The [`bench`] module turns solver traces into log-ratio
//! profiles and CSV/SVG artifacts.
// `!(x > 0.0)` rejects NaN along with nonpositive values; that is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod fdiff;
pub mod leastsq;
pub mod lbfgs;
pub mod lipschitz;
mod linalg;
pub mod noise;
pub mod problem;
mod solver;

pub use error::{Error, Result};
pub use solver::{
    GapMonitor, IterationRecord, Monitor, NullMonitor, Observation, SolverResult, Termination,
};

/// Unit roundoff of binary64, 2⁻⁵².
pub const EPS_M: f64 = f64::EPSILON;
