//! Numerics for dynamic equations on time scales.
//!
//! The crate is organised bottom-up:
//!
//! - [`timescale`]: time scales as finite unions of closed intervals (with an
//!   optional rule that continues them to infinity), jump operators,
//!   graininess, and [`Grid`] sampling with Δ-integration and Δ-differentiation.
//! - [`hilger`]: the cylinder transform, circle-plus/minus algebra,
//!   regressivity classes, and the Hilger exponential `e_p(t, s)`.
//! - [`linsys`]: linear systems `x^Δ = A(t)x + f(t)`: stepping, Cauchy
//!   matrices, variation of constants, residuals.
//! - [`dichotomy`]: projection families and the Green-type operator built from
//!   them, with operator-norm estimates and truncation certificates.
//! - [`solver`]: contraction solvers for bounded solutions of almost linear
//!   systems and the weighted-space solver for exponentially decaying ones.
//! - [`lyapunov`]: classical and time-scale Lyapunov exponents and the
//!   trace-inequality defect.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dichotomy;
pub mod error;
pub mod hilger;
pub mod linalg;
pub mod linsys;
pub mod lyapunov;
pub mod solver;
pub mod timescale;

pub use dichotomy::{GreenOperator, GreenOptions, GreenSolution, ProjectionFamily};
pub use error::{Error, Result};
pub use hilger::{Regressivity, RegressivityClass, ScalarCoefficient};
pub use linsys::{Forcing, MatrixFunction, Propagator, Trajectory};
pub use lyapunov::ExponentEstimate;
pub use solver::{ContractionReport, NonlinearityModel};
pub use timescale::{Grid, GridPoint, PointKind, Quadrature, Segment, TimeScale};

/// Default tolerance for membership and endpoint comparisons, scaled by
/// `max(1, |t|)`.
pub const TIME_TOL: f64 = 1e-12;

pub(crate) fn time_tol(t: f64) -> f64 {
    TIME_TOL * t.abs().max(1.0)
}
