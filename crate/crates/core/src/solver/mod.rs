//! Bounded and exponentially decaying solutions of almost linear systems
//! `x^Δ = A(t)x + a(t, x)`.

mod contraction;
mod decay;
mod regular;

pub use contraction::{
    constants_from_norms, contraction_constants, fixed_point_solve, hyperbolic_bounded_solve, ContractionReport,
    HyperbolicReport, NonlinearityModel, SolveOptions,
};
pub use decay::{
    extend_forcing_hat, lambda_select, regular_decay_solve, scalar_green_gamma, DecayModel, DecayOptions, DecayReport,
    ForcingHat, ScalarGreen,
};
pub use regular::{bhat, reduce_regular_check, regular_system, RegularityReport};

use nalgebra::DVector;

/// `sup_t |v(t)| e^{λ t}`.
pub fn weighted_sup(times: &[f64], values: &[DVector<f64>], lambda: f64) -> f64 {
    times
        .iter()
        .zip(values)
        .map(|(&t, v)| {
            let n = v.norm();
            if n == 0.0 {
                0.0
            } else {
                (n.ln() + lambda * t).exp()
            }
        })
        .fold(0.0, f64::max)
}
