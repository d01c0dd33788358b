//! Lyapunov exponents: the classical `Υ(f) = limsup (1/t) ln|f(t)|` and the
//! time-scale exponent `Υ_T(f)`, the threshold `a` at which `f / e_a(·, t₀)`
//! stops growing.
//!
//! Limits cannot be evaluated on a finite window; the estimators compare the
//! last quarter (or third) of the window with the one before it.

use crate::linalg::op_norm;
use crate::linsys::{regressive_check, step_ivp, Forcing, MatrixFunction, Trajectory};
use crate::timescale::{Grid, TimeScale};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    LogRatio,
    BisectionOnA,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub value: f64,
    pub method: Method,
    pub window: (f64, f64),
    /// Half-width of the estimator's oscillation over the tail.
    pub band: f64,
}

fn max_over(times: &[f64], vals: &[f64], lo: f64, hi: f64) -> Option<f64> {
    times.iter().zip(vals).filter(|(t, v)| **t >= lo && **t <= hi && v.is_finite()).map(|(_, v)| *v).reduce(f64::max)
}

/// Classical exponent from `ln|f|` samples.
pub fn classic_exponent_log(times: &[f64], log_abs: &[f64]) -> Result<ExponentEstimate> {
    if times.len() != log_abs.len() {
        return Err(Error::Dimension { expected: times.len(), got: log_abs.len() });
    }
    let (Some(&t0), Some(&t1)) = (times.first(), times.last()) else {
        return Err(Error::Degenerate("empty sample".into()));
    };
    let q: Vec<f64> = times.iter().zip(log_abs).map(|(&t, &l)| if t > 0.0 { l / t } else { f64::NAN }).collect();
    let third = (t1 - t0) / 3.0;
    let last = max_over(times, &q, t0 + 2.0 * third, t1)
        .ok_or_else(|| Error::Degenerate("function vanishes on the tail window".into()))?;
    let middle = max_over(times, &q, t0 + third, t0 + 2.0 * third).unwrap_or(last);
    Ok(ExponentEstimate { value: last, method: Method::LogRatio, window: (t0, t1), band: 0.5 * (last - middle).abs() })
}

/// `max (1/t) ln|f(t)|` over the last third of the window; the band is half
/// the change from the middle third.
pub fn classic_exponent(times: &[f64], values: &[f64]) -> Result<ExponentEstimate> {
    let logs: Vec<f64> = values.iter().map(|v| v.abs().ln()).collect();
    classic_exponent_log(times, &logs)
}

/// `ln|e_a(t_k, t_0)|` along the grid for constant `a` (`None` once a factor
/// `1 + μa` vanishes or changes sign).
pub fn log_hilger_constant(a: f64, grid: &Grid) -> Option<Vec<f64>> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    out.push(0.0);
    for i in 0..grid.len() - 1 {
        if grid.is_scattered(i) {
            let f = 1.0 + grid.mu(i) * a;
            if f <= 0.0 {
                return None;
            }
            acc += f.ln();
        } else {
            acc += a * (grid.t(i + 1) - grid.t(i));
        }
        out.push(acc);
    }
    Some(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExponentOptions {
    /// Upper end of the search.
    pub a_max: f64,
    /// The search never goes below this, even on dense scales.
    pub a_floor: f64,
    /// Bisection stops once the bracket is this narrow.
    pub resolution: f64,
    /// Optional extra requirement that the ratio fall below this fraction of
    /// its window maximum.
    pub threshold: Option<f64>,
    /// Form of `α(t)` used by [`regularity_defect`].
    pub alpha_form: AlphaForm,
}

impl Default for ExponentOptions {
    fn default() -> Self {
        ExponentOptions { a_max: 50.0, a_floor: -50.0, resolution: 1e-4, threshold: None, alpha_form: AlphaForm::Limit }
    }
}

/// `true` if `exp(log_ratio)` tends to zero on the window: its maximum over
/// the last quarter is below its maximum over the third quarter.
fn decays(times: &[f64], log_ratio: &[f64], threshold: Option<f64>) -> bool {
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let q = (t1 - t0) / 4.0;
    let (Some(q3), Some(q4)) =
        (max_over(times, log_ratio, t0 + 2.0 * q, t0 + 3.0 * q), max_over(times, log_ratio, t0 + 3.0 * q, t1))
    else {
        return false;
    };
    let falling = q4 < q3;
    match threshold {
        None => falling,
        Some(th) => {
            let peak = log_ratio.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
            falling && log_ratio[log_ratio.len() - 1] <= peak + th.ln()
        }
    }
}

fn lower_bound(scale: &TimeScale, options: &ExponentOptions) -> f64 {
    let nu = scale.nu_star();
    if nu.is_finite() {
        (-nu + 1e-6 * nu.max(1.0)).max(options.a_floor)
    } else {
        options.a_floor
    }
}

fn ts_search(grid: &Grid, log_abs: &[f64], scale: &TimeScale, options: &ExponentOptions) -> Result<f64> {
    let times = grid.times();
    let test = |a: f64| -> bool {
        match log_hilger_constant(a, grid) {
            Some(e) => {
                let r: Vec<f64> = log_abs.iter().zip(&e).map(|(l, e)| l - e).collect();
                decays(&times, &r, options.threshold)
            }
            None => false,
        }
    };
    let mut lo = lower_bound(scale, options);
    let mut hi = options.a_max;
    if !test(hi) {
        return Err(Error::Search(format!("f grows faster than e_a for a = {hi}")));
    }
    if test(lo) {
        let nu = scale.nu_star();
        return Ok(if nu.is_finite() { -nu } else { lo });
    }
    while hi - lo > options.resolution {
        let mid = 0.5 * (lo + hi);
        if test(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Time-scale exponent `inf{a : f/e_a(·, t₀) → 0}` of a scalar profile, by
/// bisection on `a`. `t₀` is the first grid point.
pub fn ts_exponent_log(
    grid: &Grid,
    log_abs: &[f64],
    scale: &TimeScale,
    options: &ExponentOptions,
) -> Result<ExponentEstimate> {
    if !scale.is_syndetic() {
        return Err(Error::NonSyndetic);
    }
    if log_abs.len() != grid.len() {
        return Err(Error::Dimension { expected: grid.len(), got: log_abs.len() });
    }
    if grid.len() < 8 {
        return Err(Error::Degenerate("too few grid points for a tail test".into()));
    }
    let value = ts_search(grid, log_abs, scale, options)?;
    let m = grid.len() * 3 / 4;
    let shorter = ts_search(&grid.truncated(m), &log_abs[..m], scale, options).unwrap_or(value);
    Ok(ExponentEstimate {
        value,
        method: Method::BisectionOnA,
        window: (grid.first(), grid.last()),
        band: (value - shorter).abs().max(1e-3),
    })
}

/// [`ts_exponent_log`] for the norm of a trajectory.
pub fn ts_exponent(f: &Trajectory, scale: &TimeScale, options: &ExponentOptions) -> Result<ExponentEstimate> {
    let logs: Vec<f64> = f.norms().iter().map(|v| v.ln()).collect();
    ts_exponent_log(f.grid(), &logs, scale, options)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    True,
    False,
    Indeterminate,
}

/// Whether `α` is the exact exponent of `f` at margin `ε`: `f/e_{α⊕ε} → 0`
/// and `f/e_{α⊖ε} → ∞` on the window.
pub fn exact_exponent_check(f: &Trajectory, alpha: f64, eps: f64) -> Result<Verdict> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive (got {eps})")));
    }
    let grid = f.grid();
    let times = grid.times();
    let (Some(ea), Some(ee)) = (log_hilger_constant(alpha, grid), log_hilger_constant(eps, grid)) else {
        return Ok(Verdict::Indeterminate);
    };
    let lf: Vec<f64> = f.norms().iter().map(|v| v.ln()).collect();
    // e_{α⊕ε} = e_α e_ε and e_{α⊖ε} = e_α / e_ε
    let upper: Vec<f64> = (0..grid.len()).map(|i| lf[i] - ea[i] - ee[i]).collect();
    let lower: Vec<f64> = (0..grid.len()).map(|i| ea[i] - ee[i] - lf[i]).collect();
    let trend = |r: &[f64]| -> Option<bool> {
        let (t0, t1) = (times[0], times[times.len() - 1]);
        let q = (t1 - t0) / 4.0;
        let q3 = max_over(&times, r, t0 + 2.0 * q, t0 + 3.0 * q)?;
        let q4 = max_over(&times, r, t0 + 3.0 * q, t1)?;
        if (q4 - q3).abs() <= 1e-9 * (1.0 + q3.abs()) {
            None
        } else {
            Some(q4 < q3)
        }
    };
    Ok(match (trend(&upper), trend(&lower)) {
        (Some(true), Some(true)) => Verdict::True,
        (Some(false), _) | (_, Some(false)) => Verdict::False,
        _ => Verdict::Indeterminate,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaForm {
    /// `(det(I + μA) - 1)/μ`, continuous as `μ → 0`.
    #[default]
    Limit,
    /// `det(I + μA)/μ`, which diverges as `μ → 0`.
    Literal,
}

/// `α` for a matrix at graininess `μ`; `Tr A` when `μ = 0`.
pub fn alpha_value(a: &DMatrix<f64>, mu: f64, form: AlphaForm) -> f64 {
    if mu == 0.0 {
        return a.trace();
    }
    let n = a.nrows();
    match form {
        AlphaForm::Limit if mu * a.norm() < 0.5 => det_minus_one_over_mu(a, mu),
        AlphaForm::Limit => ((DMatrix::identity(n, n) + a * mu).determinant() - 1.0) / mu,
        AlphaForm::Literal => (DMatrix::identity(n, n) + a * mu).determinant() / mu,
    }
}

/// `(det(E + μA) - 1)/μ = Σ_k μ^{k-1} e_k(A)` with the elementary symmetric
/// functions `e_k` from the Faddeev–LeVerrier recursion.
fn det_minus_one_over_mu(a: &DMatrix<f64>, mu: f64) -> f64 {
    let n = a.nrows();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut c = 1.0;
    let mut sum = 0.0;
    let mut pow = 1.0;
    for k in 1..=n {
        m = a * &m + DMatrix::identity(n, n) * c;
        c = -(a * &m).trace() / k as f64;
        let e = if k % 2 == 0 { c } else { -c };
        sum += pow * e;
        pow *= mu;
    }
    sum
}

/// `α(t)` for `A(t)` at a grid point.
pub fn alpha_function(a: &MatrixFunction, t: f64, grid: &Grid, form: AlphaForm) -> Result<f64> {
    let i = grid.require_index(t)?;
    Ok(alpha_value(&a.eval(t), grid.mu(i), form))
}

/// Columns of the Cauchy matrix `Φ(·, t₀)`, `t₀` the first grid point.
pub fn fundamental_system(a: &MatrixFunction, grid: &Grid) -> Result<Vec<Trajectory>> {
    let n = a.dim();
    (0..n)
        .map(|k| {
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            step_ivp(a, &Forcing::zero(n), grid.first(), &e, grid)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FundamentalExponents {
    /// Sorted ascending.
    pub exponents: Vec<f64>,
    pub bands: Vec<f64>,
    /// `S(Φ)`, the sum of the exponents.
    pub sum: f64,
}

/// Time-scale exponents of the columns of a fundamental system.
pub fn fundamental_exponents(
    phi: &[Trajectory],
    scale: &TimeScale,
    options: &ExponentOptions,
) -> Result<FundamentalExponents> {
    let mut est = phi.iter().map(|c| ts_exponent(c, scale, options)).collect::<Result<Vec<_>>>()?;
    est.sort_by(|a, b| a.value.total_cmp(&b.value));
    let exponents: Vec<f64> = est.iter().map(|e| e.value).collect();
    Ok(FundamentalExponents { sum: exponents.iter().sum(), bands: est.iter().map(|e| e.band).collect(), exponents })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityDefect {
    /// `Υ[e_{α₁⊕…⊕αₙ}] - Υ[e_α]`.
    pub defect: f64,
    pub band: f64,
    /// `Υ[e_{α₁⊕…⊕αₙ}]`.
    pub lhs: f64,
    /// `Υ[e_α]`.
    pub rhs: f64,
    pub exponents: FundamentalExponents,
}

/// Defect of the Lyapunov inequality `Υ[e_{α₁⊕…⊕αₙ}] >= Υ[e_α]` for the
/// fundamental system `phi` of `x^Δ = A(t)x` on the grid.
pub fn regularity_defect(
    a: &MatrixFunction,
    phi: &[Trajectory],
    scale: &TimeScale,
    options: &ExponentOptions,
) -> Result<RegularityDefect> {
    let Some(first) = phi.first() else {
        return Err(Error::Degenerate("empty fundamental system".into()));
    };
    let grid = first.grid();
    let n = a.dim();
    if phi.len() != n {
        return Err(Error::Dimension { expected: n, got: phi.len() });
    }
    if let Some(t) = regressive_check(a, grid).first_failure {
        let mu = grid.mu(grid.index_of(t).unwrap_or(0));
        return Err(Error::NotRegressive { t, value: (DMatrix::identity(n, n) + mu * a.eval(t)).determinant() });
    }
    let cols: Vec<DVector<f64>> = (0..n).map(|k| phi[k].samples()[grid.len() - 1].clone()).collect();
    let last = DMatrix::from_columns(&cols);
    if last.determinant() == 0.0 || op_norm(&last) == 0.0 {
        return Err(Error::Degenerate("fundamental system is singular at the window end".into()));
    }
    let exps = fundamental_exponents(phi, scale, options)?;
    let times = grid.times();

    let mut lhs_log = vec![0.0; grid.len()];
    let mut sensitivity_band = 0.0;
    for (alpha, band) in exps.exponents.iter().zip(&exps.bands) {
        let e = log_hilger_constant(*alpha, grid)
            .ok_or_else(|| Error::Degenerate(format!("e_a vanishes for a = {alpha}")))?;
        for (acc, v) in lhs_log.iter_mut().zip(e) {
            *acc += v;
        }
        let worst = (0..grid.len()).map(|i| 1.0 / (1.0 + grid.mu(i) * alpha)).fold(1.0f64, f64::max);
        sensitivity_band += band * worst;
    }
    let mut rhs_log = vec![0.0; grid.len()];
    let mut acc = 0.0;
    for i in 0..grid.len() - 1 {
        let t = grid.t(i);
        if grid.is_scattered(i) {
            let mu = grid.mu(i);
            let factor = 1.0 + mu * alpha_value(&a.eval(t), mu, options.alpha_form);
            if factor == 0.0 {
                return Err(Error::Degenerate(format!("e_alpha vanishes at t = {t}")));
            }
            acc += factor.abs().ln();
        } else {
            let d = grid.t(i + 1) - t;
            acc += 0.5 * d * (a.eval(t).trace() + a.eval(grid.t(i + 1)).trace());
        }
        rhs_log[i + 1] = acc;
    }
    let lhs = classic_exponent_log(&times, &lhs_log)?;
    let rhs = classic_exponent_log(&times, &rhs_log)?;
    Ok(RegularityDefect {
        defect: lhs.value - rhs.value,
        band: sensitivity_band + lhs.band + rhs.band,
        lhs: lhs.value,
        rhs: rhs.value,
        exponents: exps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilger::{hilger_log_profile, ScalarCoefficient};

    fn z(n: f64) -> (TimeScale, Grid) {
        let s = TimeScale::integers(1.0).unwrap();
        let g = s.grid((0.0, n), 1.0).unwrap();
        (s, g)
    }

    #[test]
    fn classic_examples() {
        let t: Vec<f64> = (0..=4000).map(|k| k as f64 * 0.01).collect();
        let e = classic_exponent(&t, &t.iter().map(|t| (2.0 * t).exp()).collect::<Vec<_>>()).unwrap();
        assert!((e.value - 2.0).abs() < 0.01);
        let t: Vec<f64> = (0..=2000).map(|k| k as f64).collect();
        let e = classic_exponent(&t, &t.iter().map(|t| t * t).collect::<Vec<_>>()).unwrap();
        assert!(e.value.abs() < 0.05);
        let t: Vec<f64> = (0..=60).map(|k| k as f64).collect();
        let e = classic_exponent(&t, &t.iter().map(|t| 2f64.powf(-t)).collect::<Vec<_>>()).unwrap();
        assert!((e.value + 2f64.ln()).abs() < 0.01);
        assert!(classic_exponent(&t, &vec![0.0; t.len()]).is_err());
    }

    #[test]
    fn ts_examples() {
        let (s, g) = z(60.0);
        let logs: Vec<f64> = g.times().iter().map(|t| t * 2f64.ln()).collect();
        let e = ts_exponent_log(&g, &logs, &s, &ExponentOptions::default()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-3, "{e:?}");
        let bounded: Vec<f64> = g.times().iter().map(|t| (1.0 + t.sin().abs()).ln()).collect();
        let e = ts_exponent_log(&g, &bounded, &s, &ExponentOptions::default()).unwrap();
        assert!(e.value <= e.band);
        let line = TimeScale::real();
        let lg = line.grid((0.0, 40.0), 0.01).unwrap();
        let logs: Vec<f64> = lg.times().iter().map(|t| 0.7 * t).collect();
        let e = ts_exponent_log(&lg, &logs, &line, &ExponentOptions::default()).unwrap();
        assert!((e.value - 0.7).abs() < 1e-3);
        let tower = TimeScale::tower3(None).unwrap();
        let tg = tower.grid((3.0, 20000.0), 1.0).unwrap();
        assert!(matches!(
            ts_exponent_log(&tg, &vec![0.0; tg.len()], &tower, &ExponentOptions::default()),
            Err(Error::NonSyndetic)
        ));
    }

    #[test]
    fn saturation_and_search_failure() {
        let (s, g) = z(40.0);
        // f decays faster than every e_a the search can represent
        let logs: Vec<f64> = g.times().iter().map(|t| -20.0 * t).collect();
        let e = ts_exponent_log(&g, &logs, &s, &ExponentOptions::default()).unwrap();
        assert_eq!(e.value, -1.0);
        let fast: Vec<f64> = g.times().iter().map(|t| t * t).collect();
        assert!(matches!(ts_exponent_log(&g, &fast, &s, &ExponentOptions::default()), Err(Error::Search(_))));
    }

    #[test]
    fn exact_checks() {
        let (_, g) = z(40.0);
        let two =
            Trajectory::from_scalars(g.clone(), &g.times().iter().map(|t| 2f64.powf(*t)).collect::<Vec<_>>()).unwrap();
        assert_eq!(exact_exponent_check(&two, 1.0, 0.1).unwrap(), Verdict::True);
        assert_eq!(exact_exponent_check(&two, 0.5, 0.1).unwrap(), Verdict::False);
        let mixed = Trajectory::from_scalars(
            g.clone(),
            &g.times().iter().map(|t| 2f64.powf(*t) + 2f64.powf(-t)).collect::<Vec<_>>(),
        )
        .unwrap();
        assert_eq!(exact_exponent_check(&mixed, 1.0, 0.1).unwrap(), Verdict::True);
    }

    #[test]
    fn alpha_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&[0.3, -1.2]));
        assert!((alpha_value(&d, 0.0, AlphaForm::Limit) + 0.9).abs() < 1e-15);
        let one = DMatrix::identity(2, 2);
        assert_eq!(alpha_value(&one, 1.0, AlphaForm::Limit), 3.0);
        assert_eq!(alpha_value(&one, 1.0, AlphaForm::Literal), 4.0);
        assert_eq!(alpha_value(&DMatrix::zeros(2, 2), 1.0, AlphaForm::Limit), 0.0);
        let mut prev = f64::INFINITY;
        for k in 1..12 {
            let mu = 10f64.powi(-k);
            let err = (alpha_value(&d, mu, AlphaForm::Limit) - d.trace()).abs();
            assert!(err <= prev + 1e-12);
            prev = err;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn fundamental_examples() {
        let (s, g) = z(40.0);
        let phi = fundamental_system(&MatrixFunction::diagonal(&[-0.5, 1.0]), &g).unwrap();
        let fe = fundamental_exponents(&phi, &s, &ExponentOptions::default()).unwrap();
        assert!((fe.exponents[0] + 0.5).abs() < 1e-3 && (fe.exponents[1] - 1.0).abs() < 1e-3);
        let phi = fundamental_system(&MatrixFunction::diagonal(&[0.0, 0.0]), &g).unwrap();
        let fe = fundamental_exponents(&phi, &s, &ExponentOptions::default()).unwrap();
        assert!(fe.exponents.iter().all(|e| e.abs() <= 1e-3) && fe.sum.abs() <= 2e-3, "{fe:?}");
    }

    #[test]
    fn defect_examples() {
        let (s, g) = z(40.0);
        let a = MatrixFunction::diagonal(&[-0.5, 1.0]);
        let phi = fundamental_system(&a, &g).unwrap();
        let d = regularity_defect(&a, &phi, &s, &ExponentOptions::default()).unwrap();
        assert!(d.defect.abs() < 0.05, "{d:?}");

        let line = TimeScale::real();
        let lg = line.grid((0.0, 40.0), 0.01).unwrap();
        let a = MatrixFunction::diagonal(&[-1.0, 2.0]);
        let phi = fundamental_system(&a, &lg).unwrap();
        let d = regularity_defect(&a, &phi, &line, &ExponentOptions::default()).unwrap();
        assert!(d.defect.abs() < 0.05, "{d:?}");
    }

    #[test]
    fn hilger_profiles_have_their_rate() {
        let s = TimeScale::union();
        let g = s.grid((0.0, 60.0), 0.01).unwrap();
        let p = ScalarCoefficient::constant(&g, 0.4);
        let prof = hilger_log_profile(&p, 0, &g).unwrap();
        let logs: Vec<f64> = prof.iter().map(|l| l.log_abs()).collect();
        let e = ts_exponent_log(&g, &logs, &s, &ExponentOptions::default()).unwrap();
        assert!((e.value - 0.4).abs() < 1e-3, "{e:?}");
    }
}
