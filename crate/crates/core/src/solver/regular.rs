use crate::linalg::op_norm;
use crate::linsys::{MatrixFunction, Propagator};
use crate::lyapunov::classic_exponent;
use crate::timescale::{Grid, TimeScale};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// `B̂ = (e^{Bμ} - E)/μ` for `μ > 0`, `B` for `μ = 0`, with `B = diag(b)`.
pub fn bhat(b: &[f64], mu: f64) -> DMatrix<f64> {
    let d: Vec<f64> = b.iter().map(|&bk| if mu > 0.0 { (bk * mu).exp_m1() / mu } else { bk }).collect();
    DMatrix::from_diagonal(&DVector::from_vec(d))
}

/// Fourth-order central difference of a matrix function.
fn derivative(l: &MatrixFunction, t: f64) -> DMatrix<f64> {
    let d = 1e-3 * t.abs().max(1.0);
    (l.eval(t - 2.0 * d) - l.eval(t - d) * 8.0 + l.eval(t + d) * 8.0 - l.eval(t + 2.0 * d)) / (12.0 * d)
}

/// `L^Δ(t)`: forward quotient where `μ > 0`, derivative where `μ = 0`.
fn delta_l(l: &MatrixFunction, t: f64, mu: f64) -> DMatrix<f64> {
    if mu > 0.0 {
        (l.eval(t + mu) - l.eval(t)) / mu
    } else {
        derivative(l, t)
    }
}

/// The system `x^Δ = A(t)x` that `x = L(t)y` reduces to `y^Δ = B̂(t)y`:
/// `A = (L^σ B̂ + L^Δ) L^{-1}` (`A = B̂` when `L` is absent).
pub fn regular_system(b: &[f64], l: Option<MatrixFunction>, scale: &TimeScale) -> MatrixFunction {
    let b = b.to_vec();
    let n = b.len();
    let scale = scale.clone();
    let bound = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mu = move |t: f64| scale.graininess(t).unwrap_or(0.0);
    match l {
        None => MatrixFunction::from_fn(n, bound, move |t| bhat(&b, mu(t))),
        Some(l) => MatrixFunction::from_fn(n, f64::INFINITY, move |t| {
            let m = mu(t);
            let linv = l.eval(t).try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
            (l.eval(t + m) * bhat(&b, m) + delta_l(&l, t, m)) * linv
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    /// Largest relative deviation of `L(t)^{-1}Φ_A(t,τ)L(τ)` from `e^{B(t-τ)}`.
    pub cauchy_error: f64,
    /// Largest `||L(σ)^{-1}(A L - L^Δ) - B̂||` at the grid points.
    pub coefficient_defect: f64,
    /// Classical exponents of `||L(t)||` and `||L(t)^{-1}||`.
    pub l_exponent: f64,
    pub l_inv_exponent: f64,
    pub pass: bool,
}

/// Check that `x = L(t)y` reduces `x^Δ = A(t)x` to `y^Δ = B̂(t)y`: the
/// reduced Cauchy matrix must match `e^{B(t-τ)}` to `tol` and `L`, `L^{-1}`
/// must have zero exponent to within `eps_exp`.
pub fn reduce_regular_check(
    a: &MatrixFunction,
    l: Option<&MatrixFunction>,
    b: &[f64],
    grid: &Grid,
    tol: f64,
    eps_exp: f64,
) -> Result<RegularityReport> {
    let n = b.len();
    if a.dim() != n {
        return Err(Error::Dimension { expected: n, got: a.dim() });
    }
    let identity = MatrixFunction::constant(DMatrix::identity(n, n));
    let l = l.unwrap_or(&identity);
    let ls: Vec<DMatrix<f64>> = grid.points().iter().map(|p| l.eval(p.t)).collect();
    let linv = ls
        .iter()
        .zip(grid.points())
        .map(|(m, p)| {
            if m.determinant().abs() <= 1e-12 {
                return Err(Error::Singular(p.t));
            }
            m.clone().try_inverse().ok_or(Error::Singular(p.t))
        })
        .collect::<Result<Vec<_>>>()?;

    let prop = Propagator::new(a, grid);
    let stride = (grid.len() / 50).max(1);
    let mut cauchy_error: f64 = 0.0;
    for j in (0..grid.len()).step_by(stride) {
        let mut phi = DMatrix::identity(n, n);
        for (i, li) in linv.iter().enumerate().skip(j) {
            if i > j {
                phi = prop.step(i - 1) * phi;
            }
            let reduced = li * &phi * &ls[j];
            let dt = grid.t(i) - grid.t(j);
            let exact = DMatrix::from_diagonal(&DVector::from_iterator(n, b.iter().map(|bk| (bk * dt).exp())));
            cauchy_error = cauchy_error.max((reduced - &exact).norm() / exact.norm());
        }
    }

    let mut coefficient_defect: f64 = 0.0;
    for (i, p) in grid.points().iter().enumerate() {
        let ls_inv = l.eval(p.t + p.mu).try_inverse().ok_or(Error::Singular(p.t + p.mu))?;
        let reduced = ls_inv * (a.eval(p.t) * &ls[i] - delta_l(l, p.t, p.mu));
        coefficient_defect = coefficient_defect.max((reduced - bhat(b, p.mu)).norm());
    }

    let times = grid.times();
    let l_norms: Vec<f64> = ls.iter().map(op_norm).collect();
    let l_inv_norms: Vec<f64> = linv.iter().map(op_norm).collect();
    let l_exponent = classic_exponent(&times, &l_norms)?.value;
    let l_inv_exponent = classic_exponent(&times, &l_inv_norms)?.value;
    if l_exponent.abs() > eps_exp || l_inv_exponent.abs() > eps_exp {
        return Err(Error::ConstantViolated(format!(
            "transformation exponents {l_exponent:e}, {l_inv_exponent:e} exceed {eps_exp:e}"
        )));
    }
    Ok(RegularityReport { cauchy_error, coefficient_defect, l_exponent, l_inv_exponent, pass: cauchy_error <= tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bhat_branches() {
        let b = [-(2f64.ln())];
        assert!((bhat(&b, 1.0)[(0, 0)] + 0.5).abs() < 1e-15);
        assert_eq!(bhat(&b, 0.0)[(0, 0)], b[0]);
        // continuity in mu
        assert!((bhat(&b, 1e-9)[(0, 0)] - b[0]).abs() < 1e-9);
    }

    #[test]
    fn identity_reduction_on_integers() {
        let z = TimeScale::integers(1.0).unwrap();
        let grid = z.grid((0.0, 30.0), 1.0).unwrap();
        let b = [-(2f64.ln())];
        let a = regular_system(&b, None, &z);
        let r = reduce_regular_check(&a, None, &b, &grid, 1e-10, 1e-6).unwrap();
        assert!(r.pass && r.cauchy_error < 1e-12, "{r:?}");
    }

    #[test]
    fn trivial_on_the_line() {
        let line = TimeScale::real();
        let grid = line.grid((0.0, 5.0), 0.01).unwrap();
        let b = [-1.0, 0.5];
        let a = regular_system(&b, None, &line);
        assert_eq!(a.eval(1.0), DMatrix::from_diagonal(&DVector::from_column_slice(&b)));
        let r = reduce_regular_check(&a, None, &b, &grid, 1e-8, 1e-6).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn rotation_round_trip() {
        let z = TimeScale::integers(1.0).unwrap();
        let grid = z.grid((0.0, 30.0), 1.0).unwrap();
        let rot = MatrixFunction::from_fn(2, 1.0, |t| {
            let (s, c) = (0.5 * t.sin()).sin_cos();
            DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
        });
        let b = [-0.3, 0.2];
        let a = regular_system(&b, Some(rot.clone()), &z);
        let r = reduce_regular_check(&a, Some(&rot), &b, &grid, 1e-10, 0.05).unwrap();
        assert!(r.pass && r.coefficient_defect < 1e-12, "{r:?}");
        // a wrong B is detected
        let r = reduce_regular_check(&a, Some(&rot), &[-0.3, 0.25], &grid, 1e-10, 0.05).unwrap();
        assert!(!r.pass);
    }
}
