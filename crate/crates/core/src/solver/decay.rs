use super::regular::regular_system;
use super::weighted_sup;
use crate::linsys::{dense_midpoints, residual_on, MatrixFunction, Trajectory};
use crate::timescale::{Grid, TimeScale};
use crate::{time_tol, Error, Result};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Midpoint of `(max(γ/(1+α), γ-β), γ)`, so that `λ(1+α) > γ` and
/// `λ + β > γ`.
pub fn lambda_select(alpha: f64, beta: f64, gamma: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha, beta, gamma must be positive (got {alpha}, {beta}, {gamma})"
        )));
    }
    let lo = (gamma / (1.0 + alpha)).max(gamma - beta);
    if lo >= gamma {
        return Err(Error::InvalidParameter("empty interval for lambda".into()));
    }
    Ok(0.5 * (lo + gamma))
}

/// `x / (1 - e^{-x})`, continuous at 0.
fn phi(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x / -(-x).exp_m1()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HatGap {
    /// Right-scattered point `t̂`.
    pub start: f64,
    pub mu: f64,
    pub f_start: f64,
    /// Constant value of `f̂` on `(t̂, σ(t̂))`.
    pub value: f64,
}

/// Extension of a function on `T` to the real window, constant on each gap.
#[derive(Clone)]
pub struct ForcingHat {
    b: f64,
    gaps: Vec<HatGap>,
    constant: f64,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for ForcingHat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForcingHat")
            .field("b", &self.b)
            .field("gaps", &self.gaps)
            .field("constant", &self.constant)
            .finish()
    }
}

impl ForcingHat {
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.gaps.partition_point(|g| g.start < t);
        if k > 0 {
            let g = &self.gaps[k - 1];
            if t < g.start + g.mu - time_tol(t) {
                return g.value;
            }
        }
        (self.f)(t)
    }

    pub fn gaps(&self) -> &[HatGap] {
        &self.gaps
    }

    /// `K` with `||f̂||_{λ,ℝ} <= K ||f||_{λ,T}`; depends only on `b`, `λ` and the gaps.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

/// `f̂ = f` on `T`, and on each gap `(t̂, σ(t̂))` the constant
/// `μ b f(t̂) / (1 - e^{-bμ})` (the limit `f(t̂)` for `b = 0`), so that
/// `∫_{t̂}^{σ(t̂)} e^{-bs} f̂(s) ds = ∫_{t̂}^{σ(t̂)} e^{-bs} f(s) Δs`.
pub fn extend_forcing_hat(
    f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    b: f64,
    scale: &TimeScale,
    window: (f64, f64),
    lambda: f64,
) -> Result<ForcingHat> {
    let grid = scale.grid(window, (window.1 - window.0).max(1.0))?;
    let mut gaps = Vec::new();
    let mut constant: f64 = 1.0;
    for p in grid.points().iter().filter(|p| p.mu > 0.0) {
        let f_start = f(p.t);
        let factor = phi(b * p.mu);
        constant = constant.max((lambda * p.mu).exp() * factor);
        gaps.push(HatGap { start: p.t, mu: p.mu, f_start, value: f_start * factor });
    }
    Ok(ForcingHat { b, gaps, constant, f: Arc::new(f) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `h(t) = ∫_{t₋}^t e^{b(t-σ(s))} f(s) Δs`
    Forward,
    /// `h(t) = -∫_t^∞ e^{b(t-σ(s))} f(s) Δs`
    Backward,
}

/// The bounded solution operator of `u^Δ = b̂(t)u + f(t)` on `𝒞_γ`, with
/// `b̂ = (e^{bμ} - 1)/μ` (`b` where `μ = 0`).
#[derive(Clone, Debug)]
pub struct ScalarGreen {
    b: f64,
    gamma: f64,
    lambda: f64,
    branch: Branch,
    grid: Grid,
    output_len: usize,
    /// Bound on the λ-weighted truncated tail per unit `||f||_γ`.
    tail_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalarSolution {
    pub values: Vec<f64>,
    /// Bound on the λ-weighted contribution of the truncated tail.
    pub tail_bound: f64,
}

impl ScalarGreen {
    pub fn new(b: f64, gamma: f64, lambda: f64, scale: &TimeScale, window: (f64, f64), h: f64) -> Result<Self> {
        let base = scale.grid(window, h)?;
        let grid = if b >= 0.0 && !base.reaches_sup() {
            let margin = (window.1 - window.0).max(40.0);
            scale.grid((window.0, window.1 + margin), h)?
        } else {
            base
        };
        let output_len = grid.points().iter().filter(|p| p.t <= window.1 + time_tol(window.1)).count();
        Self::with_grid(b, gamma, lambda, grid, output_len, scale.mu_star(None))
    }

    /// Operator on a prepared grid; `mu_star` bounds the graininess beyond it.
    pub fn with_grid(b: f64, gamma: f64, lambda: f64, grid: Grid, output_len: usize, mu_star: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be positive (got {gamma})")));
        }
        if -gamma < b && b < 0.0 {
            return Err(Error::InvalidParameter(format!("b = {b} lies in (-gamma, 0) = ({}, 0)", -gamma)));
        }
        let branch = if b <= -gamma { Branch::Forward } else { Branch::Backward };
        let tail_factor = if branch == Branch::Backward && !grid.reaches_sup() {
            let t_out = grid.t(output_len - 1);
            let t_n = grid.last();
            ((lambda + b) * t_out - (b + gamma) * t_n).exp() * (mu_star + 1.0 / (b + gamma))
        } else {
            0.0
        };
        Ok(ScalarGreen { b, gamma, lambda, branch, grid, output_len, tail_factor })
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Result<ScalarSolution> {
        let samples: Vec<f64> = self.grid.points().iter().map(|p| f(p.t)).collect();
        let mids = (0..self.grid.len() - 1)
            .map(|i| (!self.grid.is_scattered(i)).then(|| f(0.5 * (self.grid.t(i) + self.grid.t(i + 1)))))
            .collect::<Vec<_>>();
        self.apply_inner(&samples, &mids)
    }

    /// As [`ScalarGreen::apply`] for values at the grid points only.
    pub fn apply_samples(&self, f: &[f64]) -> Result<ScalarSolution> {
        if f.len() != self.grid.len() {
            return Err(Error::Dimension { expected: self.grid.len(), got: f.len() });
        }
        let vecs: Vec<DVector<f64>> = f.iter().map(|&v| DVector::from_element(1, v)).collect();
        let mids: Vec<Option<f64>> = dense_midpoints(&self.grid, &vecs).into_iter().map(|m| m.map(|v| v[0])).collect();
        self.apply_inner(f, &mids)
    }

    fn apply_inner(&self, f: &[f64], mids: &[Option<f64>]) -> Result<ScalarSolution> {
        let grid = &self.grid;
        let b = self.b;
        let n = grid.len();
        let mut h = vec![0.0; n];
        match self.branch {
            Branch::Forward => {
                for i in 0..n - 1 {
                    h[i + 1] = if grid.is_scattered(i) {
                        (b * grid.mu(i)).exp() * h[i] + grid.mu(i) * f[i]
                    } else {
                        let d = grid.t(i + 1) - grid.t(i);
                        let fm = mids[i].unwrap_or(0.5 * (f[i] + f[i + 1]));
                        (b * d).exp() * h[i]
                            + d / 6.0 * ((b * d).exp() * f[i] + 4.0 * (0.5 * b * d).exp() * fm + f[i + 1])
                    };
                }
            }
            Branch::Backward => {
                let mut z = 0.0;
                for i in (0..n - 1).rev() {
                    z = if grid.is_scattered(i) {
                        (-b * grid.mu(i)).exp() * (z + grid.mu(i) * f[i])
                    } else {
                        let d = grid.t(i + 1) - grid.t(i);
                        let fm = mids[i].unwrap_or(0.5 * (f[i] + f[i + 1]));
                        (-b * d).exp() * z
                            + d / 6.0 * (f[i] + 4.0 * (-0.5 * b * d).exp() * fm + (-b * d).exp() * f[i + 1])
                    };
                    h[i] = -z;
                }
            }
        }
        let f_gamma = grid
            .points()
            .iter()
            .zip(f)
            .map(|(p, v)| if *v == 0.0 { 0.0 } else { (v.abs().ln() + self.gamma * p.t).exp() })
            .fold(0.0, f64::max);
        let tail_bound = if f_gamma == 0.0 { 0.0 } else { self.tail_factor * f_gamma };
        Ok(ScalarSolution { values: h, tail_bound })
    }

    /// `C_{γ,λ} = ||𝓛_γ(e^{-γ·})||_λ`, the `𝒞_γ → 𝒞_λ` operator norm (the
    /// kernel is positive).
    pub fn norm_constant(&self) -> Result<f64> {
        let gamma = self.gamma;
        let sol = self.apply(|t| (-gamma * t).exp())?;
        let times: Vec<f64> = self.grid.times()[..self.output_len].to_vec();
        let vals: Vec<DVector<f64>> =
            sol.values[..self.output_len].iter().map(|&v| DVector::from_element(1, v)).collect();
        Ok(weighted_sup(&times, &vals, self.lambda) + sol.tail_bound)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalarGreenResult {
    pub branch: Branch,
    pub values: Vec<f64>,
    pub times: Vec<f64>,
    /// `||h||_λ` over the window.
    pub weighted_norm: f64,
    pub tail_bound: f64,
    /// `C_{γ,λ}`.
    pub norm_constant: f64,
}

/// Bounded solution `h` of `u^Δ = b̂(t)u + f(t)` for `f ∈ 𝒞_γ`: the forward
/// integral when `b <= -γ`, the backward one when `b >= 0`.
#[allow(clippy::too_many_arguments)]
pub fn scalar_green_gamma(
    b: f64,
    f: impl Fn(f64) -> f64,
    gamma: f64,
    lambda: f64,
    scale: &TimeScale,
    window: (f64, f64),
    h: f64,
    tail_tol: f64,
) -> Result<ScalarGreenResult> {
    let op = ScalarGreen::new(b, gamma, lambda, scale, window, h)?;
    let sol = op.apply(f)?;
    if !(sol.tail_bound <= tail_tol) {
        return Err(Error::TailNotNegligible { bound: sol.tail_bound, tol: tail_tol });
    }
    let m = op.output_len();
    let times = op.grid().times()[..m].to_vec();
    let values = sol.values[..m].to_vec();
    let vecs: Vec<DVector<f64>> = values.iter().map(|&v| DVector::from_element(1, v)).collect();
    Ok(ScalarGreenResult {
        branch: op.branch(),
        weighted_norm: weighted_sup(&times, &vecs, lambda),
        values,
        times,
        tail_bound: sol.tail_bound,
        norm_constant: op.norm_constant()?,
    })
}

type DecayRule = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Nonlinearity with `||a(t, x)|| <= c₁||x||^{1+α} + c₂e^{-βt}||x|| + h e^{-γt}`.
///
/// Without an explicit rule the bound itself is used, spread evenly over the
/// components: `a(t, x) = bound · (1, …, 1)/√n`.
#[derive(Clone)]
pub struct DecayModel {
    pub c1: f64,
    pub c2: f64,
    pub h: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    rule: Option<DecayRule>,
}

impl fmt::Debug for DecayModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DecayModel")
            .field("c1", &self.c1)
            .field("c2", &self.c2)
            .field("h", &self.h)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("gamma", &self.gamma)
            .field("custom_rule", &self.rule.is_some())
            .finish()
    }
}

impl DecayModel {
    pub fn new(c1: f64, c2: f64, h: f64, alpha: f64, beta: f64, gamma: f64) -> Self {
        DecayModel { c1, c2, h, alpha, beta, gamma, rule: None }
    }

    pub fn with_rule(mut self, rule: impl Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static) -> Self {
        self.rule = Some(Arc::new(rule));
        self
    }

    pub fn bound(&self, t: f64, x: &DVector<f64>) -> f64 {
        let n = x.norm();
        self.c1 * n.powf(1.0 + self.alpha) + self.c2 * (-self.beta * t).exp() * n + self.h * (-self.gamma * t).exp()
    }

    pub fn eval(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        match &self.rule {
            Some(r) => r(t, x),
            None => {
                let n = x.len() as f64;
                DVector::from_element(x.len(), self.bound(t, x) / n.sqrt())
            }
        }
    }

    /// Check the growth bound on random points of `T × ball`.
    pub fn spot_check(&self, times: &[f64], dim: usize, radius: f64, samples: usize, seed: u64) -> Result<()> {
        if times.is_empty() {
            return Ok(());
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let scale = radius / (dim as f64).sqrt();
        for _ in 0..samples {
            let t = times[rng.random_range(0..times.len())];
            let x = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..=1.0) * scale);
            let a = self.eval(t, &x);
            if a.len() != dim {
                return Err(Error::Dimension { expected: dim, got: a.len() });
            }
            let bound = self.bound(t, &x);
            if a.norm() > bound * (1.0 + 1e-9) + 1e-15 {
                return Err(Error::ConstantViolated(format!(
                    "|a(t, x)| = {} exceeds the declared bound {bound} at t = {t}",
                    a.norm()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecayOptions {
    /// Stop when successive iterates differ by at most this in `||·||_λ`.
    pub tol: f64,
    pub max_iter: usize,
    pub tail_tol: f64,
    pub spot_checks: usize,
    pub seed: u64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions { tol: 1e-10, max_iter: 200, tail_tol: 1e-8, spot_checks: 64, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub lambda: f64,
    /// `C_{γ,λ}` (largest over the diagonal entries of `B`).
    pub norm_constant: f64,
    /// Radius of the invariant ball; `None` if the smallness condition fails.
    pub kappa: Option<f64>,
    /// `sup_t |x(t)| e^{λt}` over the window.
    pub decay_constant: f64,
    /// Least-squares rate of `-ln|x(t)|` over the second half of the window.
    pub decay_exponent: f64,
    pub iterations: usize,
    pub update: f64,
    pub residual: f64,
    pub tail_bound: f64,
    pub converged: bool,
}

/// `κ = h C / (1 - C(c₁κ^α + c₂))` by fixed-point iteration.
fn invariant_radius(model: &DecayModel, c: f64) -> Option<f64> {
    let mut kappa = model.h * c;
    for _ in 0..500 {
        let denom = 1.0 - c * (model.c1 * kappa.powf(model.alpha) + model.c2);
        if denom <= 0.0 {
            return None;
        }
        let next = model.h * c / denom;
        if (next - kappa).abs() <= 1e-15 * next.max(1e-300) {
            return Some(next);
        }
        kappa = next;
    }
    None
}

fn decay_rate(times: &[f64], norms: &[f64]) -> f64 {
    let half = times.len() / 2;
    let pts: Vec<(f64, f64)> =
        times[half..].iter().zip(&norms[half..]).filter(|(_, n)| **n > 0.0).map(|(&t, &n)| (t, n.ln())).collect();
    if pts.len() < 2 {
        return f64::INFINITY;
    }
    let m = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
    let (tm, ym) = (st / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + (t - tm) * (y - ym), b + (t - tm).powi(2)));
    if den == 0.0 {
        f64::INFINITY
    } else {
        -num / den
    }
}

/// Exponentially decaying solution of `x^Δ = A(t)x + a(t, x)` for a regular
/// linear part reduced by `x = L(t)y` to `y^Δ = B̂(t)y`, `B = diag(b)`.
///
/// Iterates `y ← 𝓛_γ (L^σ)^{-1} a(·, L y)` in `𝒞_λ` from `y ≡ 0`.
#[allow(clippy::too_many_arguments)]
pub fn regular_decay_solve(
    b: &[f64],
    l: Option<&MatrixFunction>,
    model: &DecayModel,
    scale: &TimeScale,
    window: (f64, f64),
    h: f64,
    options: &DecayOptions,
) -> Result<(Trajectory, DecayReport)> {
    let n = b.len();
    if n == 0 {
        return Err(Error::InvalidParameter("B must have at least one entry".into()));
    }
    if let Some(l) = l {
        if l.dim() != n {
            return Err(Error::Dimension { expected: n, got: l.dim() });
        }
    }
    if !scale.is_syndetic() {
        return Err(Error::NonSyndetic);
    }
    let lambda = lambda_select(model.alpha, model.beta, model.gamma)?;
    let base = scale.grid(window, h)?;
    let grid = if b.iter().any(|&bk| bk >= 0.0) && !base.reaches_sup() {
        scale.grid((window.0, window.1 + (window.1 - window.0).max(40.0)), h)?
    } else {
        base
    };
    let output_len = grid.points().iter().filter(|p| p.t <= window.1 + time_tol(window.1)).count();
    let mu_star = scale.mu_star(None);
    let ops = b
        .iter()
        .map(|&bk| ScalarGreen::with_grid(bk, model.gamma, lambda, grid.clone(), output_len, mu_star))
        .collect::<Result<Vec<_>>>()?;
    let norm_constant =
        ops.iter().map(ScalarGreen::norm_constant).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    let kappa = invariant_radius(model, norm_constant);
    let times = grid.times();
    if options.spot_checks > 0 {
        model.spot_check(&times, n, kappa.unwrap_or(1.0).max(1e-6), options.spot_checks, options.seed)?;
    }

    let l_at: Option<Vec<_>> = l.map(|l| grid.points().iter().map(|p| l.eval(p.t)).collect());
    let l_sigma_inv: Option<Vec<_>> = match l {
        Some(l) => Some(
            grid.points()
                .iter()
                .map(|p| {
                    let m = l.eval(p.t + p.mu);
                    m.try_inverse().ok_or(Error::Singular(p.t + p.mu))
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let to_x = |y: &[DVector<f64>]| -> Vec<DVector<f64>> {
        match &l_at {
            Some(ls) => ls.iter().zip(y).map(|(m, v)| m * v).collect(),
            None => y.to_vec(),
        }
    };

    let mut y = vec![DVector::zeros(n); grid.len()];
    let mut update = f64::INFINITY;
    let mut tail_bound: f64 = 0.0;
    let mut iterations = 0;
    while iterations < options.max_iter {
        let x = to_x(&y);
        let forcing: Vec<DVector<f64>> = grid
            .points()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let a = model.eval(p.t, &x[i]);
                match &l_sigma_inv {
                    Some(li) => &li[i] * a,
                    None => a,
                }
            })
            .collect();
        let mut next = vec![DVector::zeros(n); grid.len()];
        for (k, op) in ops.iter().enumerate() {
            let fk: Vec<f64> = forcing.iter().map(|v| v[k]).collect();
            let sol = op.apply_samples(&fk)?;
            if !(sol.tail_bound <= options.tail_tol) {
                return Err(Error::TailNotNegligible { bound: sol.tail_bound, tol: options.tail_tol });
            }
            tail_bound = tail_bound.max(sol.tail_bound);
            for (v, hk) in next.iter_mut().zip(&sol.values) {
                v[k] = *hk;
            }
        }
        let diff: Vec<DVector<f64>> = next.iter().zip(&y).map(|(a, b)| a - b).collect();
        update = weighted_sup(&times, &diff, lambda);
        y = next;
        iterations += 1;
        if let Some(k) = kappa {
            let norm = weighted_sup(&times[..output_len], &y[..output_len], lambda);
            if norm > k * (1.0 + 1e-6) + 1e-12 {
                return Err(Error::BallEscape { norm, radius: k });
            }
        }
        if update <= options.tol {
            break;
        }
    }
    if update > options.tol {
        return Err(Error::NotConverged { iterations, update });
    }
    let x = to_x(&y);
    let a_samples: Vec<DVector<f64>> = grid.points().iter().zip(&x).map(|(p, xi)| model.eval(p.t, xi)).collect();
    let system = regular_system(b, l.cloned(), scale);
    let full = Trajectory::new(grid, x)?;
    let residual = residual_on(&full, &system, &a_samples, output_len)?;
    let solution = full.truncated(output_len);
    let out_times = solution.grid().times();
    let report = DecayReport {
        lambda,
        norm_constant,
        kappa,
        decay_constant: weighted_sup(&out_times, solution.samples(), lambda),
        decay_exponent: decay_rate(&out_times, &solution.norms()),
        iterations,
        update,
        residual,
        tail_bound,
        converged: true,
    };
    Ok((solution, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_midpoints() {
        assert_eq!(lambda_select(1.0, 10.0, 0.5).unwrap(), 0.375);
        assert!((lambda_select(1.0, 0.2, 1.0).unwrap() - 0.9).abs() < 1e-15);
        let l = lambda_select(0.5, 0.1, 1.0).unwrap();
        assert!((l - 0.95).abs() < 1e-15 && l * 1.5 > 1.0);
        assert!(lambda_select(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn hat_values() {
        let z = TimeScale::integers(1.0).unwrap();
        let hat = extend_forcing_hat(|_| 1.0, 2f64.ln(), &z, (0.0, 5.0), 0.0).unwrap();
        assert!((hat.eval(0.5) - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(hat.eval(1.0), 1.0);
        let near_zero = extend_forcing_hat(|t| t + 1.0, 1e-12, &z, (0.0, 5.0), 0.0).unwrap();
        assert!((near_zero.eval(2.5) - 3.0).abs() < 1e-11);
        let line = extend_forcing_hat(f64::sin, 1.0, &TimeScale::real(), (0.0, 5.0), 0.5).unwrap();
        assert!(line.gaps().is_empty());
        assert_eq!(line.eval(1.3), 1.3f64.sin());
        assert_eq!(line.constant(), 1.0);
    }

    #[test]
    fn forward_on_the_line() {
        let r = scalar_green_gamma(-3.0, |t| (-2.0 * t).exp(), 2.0, 1.5, &TimeScale::real(), (0.0, 10.0), 0.01, 1e-8)
            .unwrap();
        assert_eq!(r.branch, Branch::Forward);
        for (t, v) in r.times.iter().zip(&r.values) {
            assert!((v - ((-2.0 * t).exp() - (-3.0 * t).exp())).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_on_integers() {
        let z = TimeScale::integers(1.0).unwrap();
        let r = scalar_green_gamma(-(2f64.ln()), |t| 2f64.powf(-t), 0.6, 0.5, &z, (0.0, 30.0), 1.0, 1e-8).unwrap();
        let mut u = 0.0;
        for (t, v) in r.times.iter().zip(&r.values) {
            assert!((v - u).abs() < 1e-12);
            u = u / 2.0 + 2f64.powf(-t);
        }
    }

    #[test]
    fn backward_on_integers() {
        let z = TimeScale::integers(1.0).unwrap();
        let r = scalar_green_gamma(2f64.ln(), |t| (-t).exp(), 1.0, 0.5, &z, (0.0, 30.0), 1.0, 1e-8).unwrap();
        assert_eq!(r.branch, Branch::Backward);
        for k in 0..30 {
            let (u0, u1) = (r.values[k], r.values[k + 1]);
            let defect = (u1 - u0) - (u0 + (-(k as f64)).exp());
            assert!(defect.abs() < 1e-12);
        }
        assert!(r.weighted_norm.is_finite());
        assert!(scalar_green_gamma(-0.1, |t| (-t).exp(), 1.0, 0.5, &z, (0.0, 30.0), 1.0, 1e-8).is_err());
    }

    #[test]
    fn decay_on_integers() {
        let z = TimeScale::integers(1.0).unwrap();
        let model = DecayModel::new(0.05, 0.0, 0.1, 1.0, 10.0, 0.5)
            .with_rule(|t, x| DVector::from_element(1, 0.05 * x[0] * x[0] + 0.1 * (-0.5 * t).exp()));
        let (x, r) =
            regular_decay_solve(&[-(2f64.ln())], None, &model, &z, (0.0, 60.0), 1.0, &DecayOptions::default()).unwrap();
        assert_eq!(r.lambda, 0.375);
        assert!(r.residual <= 1e-8, "{r:?}");
        assert!(r.decay_exponent >= 0.365, "{r:?}");
        let mut u = 0.0;
        for (p, v) in x.grid().points().iter().zip(x.samples()) {
            assert!((v[0] - u).abs() < 1e-9);
            u = u / 2.0 + 0.05 * u * u + 0.1 * (-0.5 * p.t).exp();
        }
        let zero = DecayModel::new(0.05, 0.0, 0.0, 1.0, 10.0, 0.5);
        let (x, _) =
            regular_decay_solve(&[-(2f64.ln())], None, &zero, &z, (0.0, 20.0), 1.0, &DecayOptions::default()).unwrap();
        assert_eq!(x.sup_norm(), 0.0);
        let tower = TimeScale::tower3(None).unwrap();
        assert!(matches!(
            regular_decay_solve(&[-1.0], None, &model, &tower, (3.0, 30.0), 1.0, &DecayOptions::default()),
            Err(Error::NonSyndetic)
        ));
    }
}
