//! Benchmark fixtures.

use chronoscale::{
    Forcing, GreenOperator, GreenOptions, Grid, MatrixFunction, NonlinearityModel, ProjectionFamily, TimeScale,
};
use nalgebra::{DMatrix, DVector};

/// Scales the kernels are timed on, with a dense step suited to each.
pub fn scales() -> Vec<(&'static str, TimeScale, f64)> {
    vec![
        ("real", TimeScale::real(), 0.01),
        ("integers", TimeScale::integers(1.0).unwrap(), 1.0),
        ("union", TimeScale::union(), 0.01),
        ("random-syndetic", TimeScale::random_syndetic(42, 1.0).unwrap(), 0.01),
    ]
}

pub fn grid(scale: &TimeScale, end: f64, h: f64) -> Grid {
    scale.grid((0.0, end), h).unwrap()
}

/// A hyperbolic 2x2 system with one decaying and one growing direction.
pub fn hyperbolic_system() -> MatrixFunction {
    MatrixFunction::constant(DMatrix::from_row_slice(2, 2, &[-0.5, 0.1, 0.0, 0.4]))
}

pub fn oscillating_forcing(dim: usize) -> Forcing {
    Forcing::from_fn(dim, move |t| DVector::from_fn(dim, |k, _| (t * (1.0 + k as f64)).sin()))
}

/// Green operator of the stable scalar system `x^Δ = -0.5 x` on `[0, end]`.
pub fn scalar_green(scale: &TimeScale, end: f64, h: f64) -> GreenOperator {
    GreenOperator::new(
        MatrixFunction::scalar(-0.5),
        ProjectionFamily::identity(1),
        scale,
        (0.0, end),
        h,
        GreenOptions::default(),
    )
    .unwrap()
}

/// `g(t, x) = 0.1 sin x + 0.5 cos t`, so `h = 0.6` and `c = 0.1`.
pub fn sine_model() -> NonlinearityModel {
    NonlinearityModel::new(1)
        .with_component(0.6, 0.1, |t, x| DVector::from_element(1, 0.1 * x[0].sin() + 0.5 * t.cos()))
}
