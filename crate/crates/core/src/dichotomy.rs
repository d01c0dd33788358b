//! Projection families and the Green-type operator
//!
//! `(𝓛f)(t) = ∫_{t₋}^t Φ(t,σ(s))P(s)f(s)Δs − ∫_t^{t₊} Φ(t,σ(s))Q(s)f(s)Δs`.
//!
//! Infinite windows are truncated: the operator is computed on the window
//! extended by a margin, and the part of the `Q`-integral beyond the margin is
//! bounded by extrapolating the decay observed across it.

use crate::linalg::op_norm;
use crate::linsys::{dense_midpoints, residual_on, rk4_matrix_step, Forcing, MatrixFunction, Propagator, Trajectory};
use crate::timescale::{Grid, Quadrature, TimeScale};
use crate::{time_tol, Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

pub const IDEMPOTENCE_TOL: f64 = 1e-10;
pub const DEFAULT_GAP_TOL: f64 = 1e-6;

type MatrixRule = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// `t -> P(t)` with `P² = P`; the complementary projection is `Q = E - P`.
#[derive(Clone)]
pub struct ProjectionFamily {
    dim: usize,
    bound: f64,
    rule: MatrixRule,
    constant: Option<DMatrix<f64>>,
}

impl fmt::Debug for ProjectionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProjectionFamily")
            .field("dim", &self.dim)
            .field("bound", &self.bound)
            .field("constant", &self.constant)
            .finish()
    }
}

fn idempotence_defect(p: &DMatrix<f64>) -> f64 {
    (p * p - p).amax()
}

impl ProjectionFamily {
    pub fn constant(p: DMatrix<f64>) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::Dimension { expected: p.nrows(), got: p.ncols() });
        }
        let defect = idempotence_defect(&p);
        if defect > IDEMPOTENCE_TOL {
            return Err(Error::InvalidParameter(format!("P is not a projection (|P² - P| = {defect:e})")));
        }
        let held = p.clone();
        Ok(ProjectionFamily {
            dim: p.nrows(),
            bound: op_norm(&p),
            rule: Arc::new(move |_| held.clone()),
            constant: Some(p),
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(DMatrix::identity(n, n)).expect("identity is a projection")
    }

    pub fn zero(n: usize) -> Self {
        Self::constant(DMatrix::zeros(n, n)).expect("zero is a projection")
    }

    pub fn from_fn(dim: usize, bound: f64, f: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        ProjectionFamily { dim, bound, rule: Arc::new(f), constant: None }
    }

    pub fn p(&self, t: f64) -> DMatrix<f64> {
        (self.rule)(t)
    }

    pub fn q(&self, t: f64) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) - self.p(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn as_constant(&self) -> Option<&DMatrix<f64>> {
        self.constant.as_ref()
    }

    /// Idempotence at every grid point.
    pub fn check(&self, grid: &Grid) -> Result<()> {
        for p in grid.points() {
            let m = self.p(p.t);
            if m.nrows() != self.dim || m.ncols() != self.dim {
                return Err(Error::Dimension { expected: self.dim, got: m.nrows() });
            }
            let defect = idempotence_defect(&m);
            if defect > IDEMPOTENCE_TOL {
                return Err(Error::InvalidParameter(format!("P({}) is not a projection (|P² - P| = {defect:e})", p.t)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreenOptions {
    /// Largest admissible bound on the truncated `Q`-tail.
    pub tail_tol: f64,
    /// Partial kernel sums above this are treated as divergence.
    pub overflow_guard: f64,
    /// On a truncated window the `P`-kernel across the whole window must fall
    /// below this.
    pub non_decay_threshold: f64,
    /// Extra length computed past the window end when a `Q`-part is present;
    /// defaults to `max(b - a, 40)`.
    pub margin: Option<f64>,
    pub quadrature: Quadrature,
}

impl Default for GreenOptions {
    fn default() -> Self {
        GreenOptions {
            tail_tol: 1e-8,
            overflow_guard: 1e12,
            non_decay_threshold: 1.0,
            margin: None,
            quadrature: Quadrature::Simpson,
        }
    }
}

/// Output of [`GreenOperator::apply`].
#[derive(Clone, Debug)]
pub struct GreenSolution {
    full: Trajectory,
    output_len: usize,
    tail_bound: f64,
}

impl GreenSolution {
    /// `𝓛f` on the requested window.
    pub fn trajectory(&self) -> Trajectory {
        self.full.truncated(self.output_len)
    }

    /// `𝓛f` on the whole computation grid, margin included.
    pub fn full(&self) -> &Trajectory {
        &self.full
    }

    /// Certified bound on the omitted part of the `Q`-integral.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GreenReport {
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub tail_bound: f64,
}

/// Kernel data across the truncation margin, used for tail bounds.
#[derive(Clone, Copy, Debug)]
struct TailBlock {
    /// `∫ ||Φ(t_out, σ(s))Q(s)|| e^{-γ(s - t_out)} Δs` over the margin.
    integral: f64,
    /// `e^{-γ(t_N - t_out)} ||Φ(t_out, t_N)Q(t_N)||`.
    ratio: f64,
}

impl TailBlock {
    /// Extrapolated `∫_{t_N}^∞ ||Φ(t_N, σ(s))Q(s)|| e^{-γ(s - t_N)} Δs`.
    fn extrapolated(&self) -> f64 {
        if self.ratio < 1.0 {
            self.integral / (1.0 - self.ratio)
        } else {
            f64::INFINITY
        }
    }
}

/// The Green-type operator of a linear system and a projection family on a
/// window of a time scale.
#[derive(Clone, Debug)]
pub struct GreenOperator {
    system: MatrixFunction,
    projections: ProjectionFamily,
    window: (f64, f64),
    grid: Grid,
    output_len: usize,
    propagator: Propagator,
    half_steps: Vec<Option<DMatrix<f64>>>,
    p_at: Vec<DMatrix<f64>>,
    q_at: Vec<DMatrix<f64>>,
    p_mid: Vec<Option<DMatrix<f64>>>,
    p_active: bool,
    q_active: bool,
    tail: Option<TailBlock>,
    tail_factor: f64,
    options: GreenOptions,
}

impl GreenOperator {
    /// Operator on `T ∩ [a, b]`, sampled with dense step `h`.
    pub fn new(
        system: MatrixFunction,
        projections: ProjectionFamily,
        scale: &TimeScale,
        window: (f64, f64),
        h: f64,
        options: GreenOptions,
    ) -> Result<Self> {
        let (a, b) = window;
        if a < scale.inf() - time_tol(scale.inf()) {
            return Err(Error::InvalidParameter(format!("window start {a} lies before the time scale")));
        }
        let base = scale.grid(window, h)?;
        projections.check(&base)?;
        let q_active = base.points().iter().any(|p| projections.q(p.t).amax() > 0.0);
        let grid = if q_active && !base.reaches_sup() {
            let margin = options.margin.unwrap_or((b - a).max(40.0));
            scale.grid((a, b + margin), h)?
        } else {
            base
        };
        Self::from_grid(system, projections, grid, b, options)
    }

    /// Operator on a prepared grid whose points up to `output_end` form the
    /// window; later points serve as truncation margin.
    pub fn from_grid(
        system: MatrixFunction,
        projections: ProjectionFamily,
        grid: Grid,
        output_end: f64,
        options: GreenOptions,
    ) -> Result<Self> {
        let n = system.dim();
        if projections.dim() != n {
            return Err(Error::Dimension { expected: n, got: projections.dim() });
        }
        projections.check(&grid)?;
        let output_len = grid.points().iter().filter(|p| p.t <= output_end + time_tol(output_end)).count();
        if output_len == 0 {
            return Err(Error::EmptyWindow(grid.first(), output_end));
        }
        let p_at: Vec<DMatrix<f64>> = grid.points().iter().map(|p| projections.p(p.t)).collect();
        let q_at: Vec<DMatrix<f64>> = p_at.iter().map(|p| DMatrix::identity(n, n) - p).collect();
        let p_active = p_at.iter().any(|p| p.amax() > 0.0);
        let q_active = q_at.iter().any(|q| q.amax() > 0.0);
        let mut propagator = Propagator::new(&system, &grid);
        if q_active {
            propagator = propagator.with_inverses(&grid)?;
        }
        let simpson = options.quadrature == Quadrature::Simpson;
        let mids = |i: usize| 0.5 * (grid.t(i) + grid.t(i + 1));
        let steps = grid.len() - 1;
        let half_steps = (0..steps)
            .map(|i| {
                (simpson && !grid.is_scattered(i))
                    .then(|| rk4_matrix_step(&system, mids(i), 0.5 * (grid.t(i + 1) - grid.t(i))))
            })
            .collect();
        let p_mid = (0..steps).map(|i| (simpson && !grid.is_scattered(i)).then(|| projections.p(mids(i)))).collect();
        let window = (grid.first(), output_end);
        let mut op = GreenOperator {
            system,
            projections,
            window,
            grid,
            output_len,
            propagator,
            half_steps,
            p_at,
            q_at,
            p_mid,
            p_active,
            q_active,
            tail: None,
            tail_factor: 0.0,
            options,
        };
        if op.needs_tail() {
            let block = op.tail_block(0.0);
            op.tail_factor = op.tail_weights().into_iter().fold(0.0, f64::max) * block.extrapolated();
            op.tail = Some(block);
        }
        Ok(op)
    }

    pub fn system(&self) -> &MatrixFunction {
        &self.system
    }

    pub fn projections(&self) -> &ProjectionFamily {
        &self.projections
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// Computation grid, margin included.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn output_grid(&self) -> Grid {
        self.grid.truncated(self.output_len)
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn options(&self) -> &GreenOptions {
        &self.options
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    fn needs_tail(&self) -> bool {
        self.q_active && !self.grid.reaches_sup()
    }

    fn last(&self) -> usize {
        self.grid.len() - 1
    }

    fn out(&self) -> usize {
        self.output_len - 1
    }

    fn inv(&self, i: usize) -> &DMatrix<f64> {
        self.propagator.inverse_step(i).expect("inverse steps cached when Q is active")
    }

    fn tail_block(&self, gamma: f64) -> TailBlock {
        let (out, last) = (self.out(), self.last());
        if last == out {
            return TailBlock { integral: 0.0, ratio: f64::INFINITY };
        }
        let t_out = self.grid.t(out);
        let w = |k: usize| (-gamma * (self.grid.t(k) - t_out)).exp();
        let n = self.system.dim();
        let mut m = DMatrix::identity(n, n);
        let mut integral = 0.0;
        for k in out..last {
            let next = &m * self.inv(k);
            integral += if self.grid.is_scattered(k) {
                self.grid.mu(k) * op_norm(&(&next * &self.q_at[k])) * w(k)
            } else {
                let d = self.grid.t(k + 1) - self.grid.t(k);
                0.5 * d * (op_norm(&(&m * &self.q_at[k])) * w(k) + op_norm(&(&next * &self.q_at[k + 1])) * w(k + 1))
            };
            m = next;
        }
        let ratio = w(last) * op_norm(&(&m * &self.q_at[last]));
        TailBlock { integral, ratio }
    }

    /// `||Φ(t_i, t_N)Q(t_N)||` for every output index.
    fn tail_weights(&self) -> Vec<f64> {
        let (out, last) = (self.out(), self.last());
        let mut v = self.q_at[last].clone();
        for k in (out..last).rev() {
            v = self.inv(k) * v;
        }
        let mut w = vec![0.0; self.output_len];
        w[out] = op_norm(&v);
        for i in (0..out).rev() {
            v = self.inv(i) * v;
            w[i] = op_norm(&v);
        }
        w
    }

    /// `𝓛f` for a forcing given as a function.
    pub fn apply(&self, f: &Forcing) -> Result<GreenSolution> {
        if f.dim() != self.system.dim() {
            return Err(Error::Dimension { expected: self.system.dim(), got: f.dim() });
        }
        let samples = f.sample(&self.grid);
        let mids = (0..self.grid.len() - 1)
            .map(|i| self.half_steps[i].is_some().then(|| f.eval(0.5 * (self.grid.t(i) + self.grid.t(i + 1)))))
            .collect();
        self.apply_inner(&samples, mids)
    }

    /// `𝓛f` for a forcing known only at the computation grid points (for
    /// instance `a(t, x(t))` along an iterate). Midpoint values needed by
    /// Simpson's rule are interpolated.
    pub fn apply_samples(&self, samples: &[DVector<f64>]) -> Result<GreenSolution> {
        if samples.len() != self.grid.len() {
            return Err(Error::Dimension { expected: self.grid.len(), got: samples.len() });
        }
        let mids = if self.options.quadrature == Quadrature::Simpson {
            dense_midpoints(&self.grid, samples)
        } else {
            vec![None; self.grid.len() - 1]
        };
        self.apply_inner(samples, mids)
    }

    fn step_integral(
        &self,
        i: usize,
        proj: &dyn Fn(usize) -> DMatrix<f64>,
        proj_mid: &dyn Fn(usize) -> DMatrix<f64>,
        g: &[DVector<f64>],
        mids: &[Option<DVector<f64>>],
    ) -> DVector<f64> {
        let grid = &self.grid;
        if grid.is_scattered(i) {
            return proj(i) * &g[i] * grid.mu(i);
        }
        let d = grid.t(i + 1) - grid.t(i);
        let s = self.propagator.step(i);
        match (&self.half_steps[i], &mids[i]) {
            (Some(half), Some(gm)) => {
                (s * (proj(i) * &g[i]) + half * (proj_mid(i) * gm) * 4.0 + proj(i + 1) * &g[i + 1]) * (d / 6.0)
            }
            _ => (s * (proj(i) * &g[i]) + proj(i + 1) * &g[i + 1]) * (0.5 * d),
        }
    }

    fn apply_inner(&self, g: &[DVector<f64>], mids: Vec<Option<DVector<f64>>>) -> Result<GreenSolution> {
        let n = self.system.dim();
        let len = self.grid.len();
        let fnorm = crate::linalg::sup_norm(g);
        let tail_bound = if self.needs_tail() && fnorm > 0.0 { self.tail_factor * fnorm } else { 0.0 };
        if !(tail_bound <= self.options.tail_tol) {
            return Err(Error::TailNotNegligible { bound: tail_bound, tol: self.options.tail_tol });
        }
        let mut x = vec![DVector::zeros(n); len];
        if self.p_active {
            let p = |k: usize| self.p_at[k].clone();
            let pm = |k: usize| self.p_mid[k].clone().unwrap_or_else(|| self.p_at[k].clone());
            let mut y = DVector::zeros(n);
            for i in 0..len - 1 {
                y = self.propagator.step(i) * y + self.step_integral(i, &p, &pm, g, &mids);
                x[i + 1] += &y;
            }
        }
        if self.q_active {
            let q = |k: usize| self.q_at[k].clone();
            let qm = |k: usize| {
                self.p_mid[k].as_ref().map(|p| DMatrix::identity(n, n) - p).unwrap_or_else(|| self.q_at[k].clone())
            };
            let mut z = DVector::zeros(n);
            for i in (0..len - 1).rev() {
                z = self.inv(i) * (z + self.step_integral(i, &q, &qm, g, &mids));
                x[i] -= &z;
            }
        }
        Ok(GreenSolution { full: Trajectory::new(self.grid.clone(), x)?, output_len: self.output_len, tail_bound })
    }

    /// Upper bound for the sup-norm operator norm:
    /// `sup_t ∫_{t₋}^t ||Φ(t,σ(s))P(s)|| Δs + ∫_t^{t₊} ||Φ(t,σ(s))Q(s)|| Δs`
    /// over the window, including the extrapolated tail.
    pub fn norm_estimate(&self) -> Result<f64> {
        self.kernel_sup(None)
    }

    /// Norm from the `γ`-weighted space to the `λ`-weighted space:
    /// `sup_t ∫ ||K(t, s)|| e^{λt - γs} Δs`.
    pub fn weighted_norm_estimate(&self, gamma: f64, lambda: f64) -> Result<f64> {
        self.kernel_sup(Some((gamma, lambda)))
    }

    fn kernel_sup(&self, weight: Option<(f64, f64)>) -> Result<f64> {
        let guard = self.options.overflow_guard;
        if self.p_active && !self.grid.reaches_sup() && self.out() > 0 {
            let across = op_norm(&(self.propagator.cauchy(self.out(), 0) * &self.p_at[0]));
            if across >= self.options.non_decay_threshold {
                return Err(Error::Divergent(format!(
                    "P-kernel does not decay across the window (||Φ(t₊, t₋)P|| = {across:e})"
                )));
            }
        }
        let (gamma, lambda) = weight.unwrap_or((0.0, 0.0));
        let tail = if self.needs_tail() {
            let block = self.tail_block(gamma);
            if block.ratio >= 1.0 {
                return Err(Error::Divergent(format!(
                    "Q-kernel does not decay across the truncation margin (ratio {:e})",
                    block.ratio
                )));
            }
            Some(block.extrapolated())
        } else {
            None
        };
        let sums: Vec<f64> =
            (0..self.output_len).into_par_iter().map(|i| self.kernel_integral(i, gamma, lambda, tail)).collect();
        let mut best: f64 = 0.0;
        for s in sums {
            if !(s <= guard) {
                return Err(Error::Divergent(format!("kernel integral {s:e} exceeds the overflow guard {guard:e}")));
            }
            best = best.max(s);
        }
        Ok(best)
    }

    fn kernel_integral(&self, i: usize, gamma: f64, lambda: f64, tail: Option<f64>) -> f64 {
        let grid = &self.grid;
        let n = self.system.dim();
        let ti = grid.t(i);
        let w = |k: usize| (lambda * ti - gamma * grid.t(k)).exp();
        let mut total = 0.0;
        if self.p_active {
            let mut m = DMatrix::identity(n, n);
            for k in (0..i).rev() {
                let prev = &m * self.propagator.step(k);
                total += if grid.is_scattered(k) {
                    grid.mu(k) * op_norm(&(&m * &self.p_at[k])) * w(k)
                } else {
                    let d = grid.t(k + 1) - grid.t(k);
                    0.5 * d * (op_norm(&(&prev * &self.p_at[k])) * w(k) + op_norm(&(&m * &self.p_at[k + 1])) * w(k + 1))
                };
                m = prev;
                if m.norm() * w(k) < 1e-16 {
                    break;
                }
            }
        }
        if self.q_active {
            let mut m = DMatrix::identity(n, n);
            let mut decayed = false;
            for k in i..self.last() {
                let next = &m * self.inv(k);
                total += if grid.is_scattered(k) {
                    grid.mu(k) * op_norm(&(&next * &self.q_at[k])) * w(k)
                } else {
                    let d = grid.t(k + 1) - grid.t(k);
                    0.5 * d * (op_norm(&(&m * &self.q_at[k])) * w(k) + op_norm(&(&next * &self.q_at[k + 1])) * w(k + 1))
                };
                m = next;
                if m.norm() * w(k + 1) < 1e-16 {
                    decayed = true;
                    break;
                }
            }
            if let (Some(extra), false) = (tail, decayed) {
                total += w(self.last()) * op_norm(&(&m * &self.q_at[self.last()])) * extra;
            }
        }
        total
    }

    /// Pointwise residual of a solution over the window (`None` where no
    /// difference stencil exists).
    pub fn residual(&self, solution: &GreenSolution, f: &Forcing) -> Result<f64> {
        residual_on(solution.full(), &self.system, &f.sample(&self.grid), self.output_len)
    }
}

/// Apply `G` to `f` and check the result solves `x^Δ = A x + f` on the
/// window to within `tol`.
pub fn verify_green(g: &GreenOperator, f: &Forcing, tol: f64) -> Result<GreenReport> {
    let solution = g.apply(f)?;
    let residual = g.residual(&solution, f)?;
    Ok(GreenReport { residual, tol, pass: residual <= tol, tail_bound: solution.tail_bound() })
}

/// Growth rate `ln|e_λ(t_N, t_0)| / (t_N - t_0)` of the Hilger exponential of
/// a complex constant over the grid (`-inf` if it vanishes).
pub fn exponential_rate(lambda: Complex64, grid: &Grid) -> f64 {
    let mut log = 0.0;
    for i in 0..grid.len() - 1 {
        if grid.is_scattered(i) {
            let f = (Complex64::new(1.0, 0.0) + lambda * grid.mu(i)).norm();
            if f <= crate::hilger::REGRESSIVITY_TOL {
                return f64::NEG_INFINITY;
            }
            log += f.ln();
        } else {
            log += lambda.re * (grid.t(i + 1) - grid.t(i));
        }
    }
    log / (grid.last() - grid.first())
}

/// Spectral projection of a constant matrix onto the eigenvectors whose
/// Hilger exponentials decay over the grid.
pub fn spectral_projections(a: &DMatrix<f64>, grid: &Grid, gap_tol: f64) -> Result<ProjectionFamily> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::Dimension { expected: n, got: a.ncols() });
    }
    if grid.last() <= grid.first() {
        return Err(Error::Degenerate("grid spans no time".into()));
    }
    let eig = a.complex_eigenvalues();
    let mut distinct: Vec<(Complex64, bool)> = Vec::new();
    for &l in eig.iter() {
        let rate = exponential_rate(l, grid);
        if rate.abs() <= gap_tol {
            return Err(Error::NoSplitting(format!("eigenvalue {l} has growth rate {rate:e}")));
        }
        if !distinct.iter().any(|(m, _)| (m - l).norm() <= 1e-8 * l.norm().max(1.0)) {
            distinct.push((l, rate < 0.0));
        }
    }
    if distinct.iter().all(|d| d.1) {
        return Ok(ProjectionFamily::identity(n));
    }
    if distinct.iter().all(|d| !d.1) {
        return Ok(ProjectionFamily::zero(n));
    }
    let ac = a.map(|x| Complex64::new(x, 0.0));
    let e = DMatrix::<Complex64>::identity(n, n);
    let mut p = DMatrix::<Complex64>::zeros(n, n);
    for (j, &(lj, stable)) in distinct.iter().enumerate() {
        if !stable {
            continue;
        }
        let mut term = e.clone();
        for (k, &(lk, _)) in distinct.iter().enumerate() {
            if k != j {
                term = term * (&ac - &e * lk) / (lj - lk);
            }
        }
        p += term;
    }
    if p.iter().any(|z| z.im.abs() > 1e-8) {
        return Err(Error::NoSplitting("stable projection is not real".into()));
    }
    ProjectionFamily::constant(p.map(|z| z.re)).map_err(|_| Error::NoSplitting("matrix is not diagonalizable".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn op(a: MatrixFunction, p: ProjectionFamily, ts: &TimeScale, window: (f64, f64), h: f64) -> GreenOperator {
        GreenOperator::new(a, p, ts, window, h, GreenOptions::default()).unwrap()
    }

    #[test]
    fn forward_geometric_series() {
        let z = TimeScale::integers(1.0).unwrap();
        let g = op(MatrixFunction::scalar(-0.5), ProjectionFamily::identity(1), &z, (0.0, 40.0), 1.0);
        let x = g.apply(&Forcing::constant(DVector::from_element(1, 1.0))).unwrap().trajectory();
        for (p, v) in x.grid().points().iter().zip(x.samples()) {
            let exact = 2.0 * (1.0 - 2f64.powf(-p.t));
            assert!((v[0] - exact).abs() < 1e-12);
        }
        assert!((g.norm_estimate().unwrap() - 2.0).abs() < 0.02);
    }

    #[test]
    fn backward_geometric_series() {
        let z = TimeScale::integers(1.0).unwrap();
        let g = op(MatrixFunction::scalar(1.0), ProjectionFamily::zero(1), &z, (0.0, 20.0), 1.0);
        let sol = g.apply(&Forcing::constant(DVector::from_element(1, 1.0))).unwrap();
        assert!(sol.tail_bound() < 1e-8);
        for v in sol.trajectory().samples() {
            assert!((v[0] + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_forcing() {
        let z = TimeScale::integers(1.0).unwrap();
        let g = op(MatrixFunction::scalar(1.0), ProjectionFamily::zero(1), &z, (0.0, 10.0), 1.0);
        let x = g.apply(&Forcing::zero(1)).unwrap().trajectory();
        assert!(x.samples().iter().all(|v| v[0] == 0.0));
    }

    #[test]
    fn norm_on_the_line() {
        let g = op(MatrixFunction::scalar(-1.0), ProjectionFamily::identity(1), &TimeScale::real(), (0.0, 40.0), 0.01);
        assert!((g.norm_estimate().unwrap() - 1.0).abs() < 0.02);
    }

    #[test]
    fn no_dichotomy_diverges() {
        let g = op(MatrixFunction::scalar(0.0), ProjectionFamily::identity(1), &TimeScale::real(), (0.0, 50.0), 0.1);
        assert!(matches!(g.norm_estimate(), Err(Error::Divergent(_))));
    }

    #[test]
    fn spectral_examples() {
        let z = TimeScale::integers(1.0).unwrap().grid((0.0, 30.0), 1.0).unwrap();
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(&[-0.5, 1.0]));
        let p = spectral_projections(&a, &z, DEFAULT_GAP_TOL).unwrap();
        assert!((p.p(0.0) - DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 0.0]))).amax() < 1e-12);
        let r = TimeScale::real().grid((0.0, 10.0), 0.1).unwrap();
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(&[-1.0, 2.0]));
        let p = spectral_projections(&a, &r, DEFAULT_GAP_TOL).unwrap();
        assert!((p.p(0.0) - DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 0.0]))).amax() < 1e-12);
        assert!(matches!(spectral_projections(&scalar(0.0), &z, DEFAULT_GAP_TOL), Err(Error::NoSplitting(_))));
        // non-normal matrix with distinct eigenvalues
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 3.0, 0.0, 2.0]);
        let p = spectral_projections(&a, &r, DEFAULT_GAP_TOL).unwrap().p(0.0);
        assert!((&p * &p - &p).amax() < 1e-12);
        assert!((&a * &p - &p * &a).amax() < 1e-12);
    }

    #[test]
    fn swapped_projections_fail() {
        let z = TimeScale::integers(1.0).unwrap();
        let a = MatrixFunction::diagonal(&[-0.5, 1.0]);
        let p = ProjectionFamily::constant(DMatrix::from_diagonal(&DVector::from_column_slice(&[0.0, 1.0]))).unwrap();
        let g = op(a, p, &z, (0.0, 30.0), 1.0);
        let f = Forcing::constant(DVector::from_column_slice(&[1.0, 1.0]));
        assert!(g.norm_estimate().is_err() || g.apply(&f).is_err());
    }

    #[test]
    fn hyperbolic_two_by_two() {
        let z = TimeScale::integers(1.0).unwrap();
        let grid = z.grid((0.0, 30.0), 1.0).unwrap();
        let am = DMatrix::from_diagonal(&DVector::from_column_slice(&[-0.5, 1.0]));
        let p = spectral_projections(&am, &grid, DEFAULT_GAP_TOL).unwrap();
        let g = op(MatrixFunction::constant(am), p, &z, (0.0, 30.0), 1.0);
        let f = Forcing::from_fn(2, |t| DVector::from_column_slice(&[t.sin(), (0.5 * t).cos()]));
        let report = verify_green(&g, &f, 1e-6).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.residual < 1e-12);
    }

    #[test]
    fn projection_check() {
        assert!(ProjectionFamily::constant(scalar(0.5)).is_err());
        let rot = ProjectionFamily::from_fn(2, 1.0, |t| {
            let (s, c) = t.sin_cos();
            let v = DVector::from_column_slice(&[c, s]);
            &v * v.transpose()
        });
        let grid = TimeScale::real().grid((0.0, 3.0), 0.1).unwrap();
        rot.check(&grid).unwrap();
        let bad = ProjectionFamily::from_fn(1, 1.0, |t| DMatrix::from_element(1, 1, t));
        assert!(bad.check(&grid).is_err());
    }
}
