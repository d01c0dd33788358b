//! Linear dynamic systems `x^Δ = A(t)x + f(t)`.

use crate::linalg::op_norm;
use crate::timescale::{Grid, Quadrature};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

type MatrixRule = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;
type VectorRule = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// `t -> A(t)`, an `n x n` matrix with declared bound `sup ||A(t)||`.
#[derive(Clone)]
pub struct MatrixFunction {
    dim: usize,
    bound: f64,
    rule: MatrixRule,
    constant: Option<DMatrix<f64>>,
}

impl fmt::Debug for MatrixFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixFunction")
            .field("dim", &self.dim)
            .field("bound", &self.bound)
            .field("constant", &self.constant)
            .finish()
    }
}

impl MatrixFunction {
    pub fn constant(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "system matrix must be square");
        let held = m.clone();
        MatrixFunction { dim: m.nrows(), bound: op_norm(&m), rule: Arc::new(move |_| held.clone()), constant: Some(m) }
    }

    pub fn scalar(a: f64) -> Self {
        Self::constant(DMatrix::from_element(1, 1, a))
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self::constant(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn from_fn(dim: usize, bound: f64, f: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        MatrixFunction { dim, bound, rule: Arc::new(f), constant: None }
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        (self.rule)(t)
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
}

/// `t -> f(t)`.
#[derive(Clone)]
pub struct Forcing {
    dim: usize,
    rule: VectorRule,
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Forcing").field("dim", &self.dim).finish()
    }
}

impl Forcing {
    pub fn zero(dim: usize) -> Self {
        Self::from_fn(dim, move |_| DVector::zeros(dim))
    }

    pub fn constant(v: DVector<f64>) -> Self {
        Self::from_fn(v.len(), move |_| v.clone())
    }

    pub fn from_fn(dim: usize, f: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Forcing { dim, rule: Arc::new(f) }
    }

    pub fn scalar(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::from_fn(1, move |t| DVector::from_element(1, f(t)))
    }

    /// `alpha f + beta g`.
    pub fn combine(alpha: f64, f: &Forcing, beta: f64, g: &Forcing) -> Self {
        let (f, g) = (f.clone(), g.clone());
        Self::from_fn(f.dim, move |t| f.eval(t) * alpha + g.eval(t) * beta)
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        (self.rule)(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&self, grid: &Grid) -> Vec<DVector<f64>> {
        grid.points().iter().map(|p| self.eval(p.t)).collect()
    }
}

/// A vector function sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    grid: Grid,
    samples: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(grid: Grid, samples: Vec<DVector<f64>>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), got: samples.len() });
        }
        Ok(Trajectory { grid, samples })
    }

    pub fn from_scalars(grid: Grid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| DVector::from_element(1, v)).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<DVector<f64>> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |v| v.len())
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|v| v[k]).collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.samples.iter().map(|v| v.norm()).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        crate::linalg::sup_norm(&self.samples)
    }

    pub fn at(&self, t: f64) -> Option<&DVector<f64>> {
        self.grid.index_of(t).map(|i| &self.samples[i])
    }

    pub fn truncated(&self, n: usize) -> Trajectory {
        let grid = self.grid.truncated(n);
        let samples = self.samples[..grid.len()].to_vec();
        Trajectory { grid, samples }
    }
}

pub(crate) fn rk4_matrix_step(a: &MatrixFunction, t: f64, d: f64) -> DMatrix<f64> {
    let e = DMatrix::identity(a.dim(), a.dim());
    let am = a.eval(t + 0.5 * d);
    let k1 = a.eval(t);
    let k2 = &am * (&e + &k1 * (0.5 * d));
    let k3 = &am * (&e + &k2 * (0.5 * d));
    let k4 = a.eval(t + d) * (&e + &k3 * d);
    e + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (d / 6.0)
}

fn rk4_affine_step(a: &MatrixFunction, f: &Forcing, t: f64, x: &DVector<f64>, d: f64) -> DVector<f64> {
    let tm = t + 0.5 * d;
    let k1 = a.eval(t) * x + f.eval(t);
    let k2 = a.eval(tm) * (x + &k1 * (0.5 * d)) + f.eval(tm);
    let k3 = a.eval(tm) * (x + &k2 * (0.5 * d)) + f.eval(tm);
    let k4 = a.eval(t + d) * (x + &k3 * d) + f.eval(t + d);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (d / 6.0)
}

/// Values of `samples` at the midpoints of dense steps, by Lagrange
/// interpolation on up to four nodes of the same dense run. Entry `i` refers
/// to the step `t_i -> t_{i+1}`; scattered steps get `None`.
pub(crate) fn dense_midpoints(grid: &Grid, samples: &[DVector<f64>]) -> Vec<Option<DVector<f64>>> {
    (0..grid.len().saturating_sub(1))
        .map(|i| {
            if grid.is_scattered(i) {
                return None;
            }
            let (lo, hi) = grid.dense_run(i);
            let start = lo.max(i.saturating_sub(1));
            let end = hi.min(i + 2);
            let nodes: Vec<f64> = (start..=end).map(|k| grid.t(k)).collect();
            let mid = 0.5 * (grid.t(i) + grid.t(i + 1));
            let w = &crate::timescale::fornberg_weights(mid, &nodes, 0)[0];
            let mut out = DVector::zeros(samples[i].len());
            for (k, wk) in (start..=end).zip(w) {
                out.axpy(*wk, &samples[k], 1.0);
            }
            Some(out)
        })
        .collect()
}

/// One-step transition `Φ(t_{i+1}, t_i)` of `x^Δ = A(t)x` on a grid: the
/// exact map `E + mu A` at scattered points, one RK4 step on dense steps.
pub fn step_transition(a: &MatrixFunction, grid: &Grid, i: usize) -> DMatrix<f64> {
    if grid.is_scattered(i) {
        DMatrix::identity(a.dim(), a.dim()) + a.eval(grid.t(i)) * grid.mu(i)
    } else {
        rk4_matrix_step(a, grid.t(i), grid.t(i + 1) - grid.t(i))
    }
}

/// Cached one-step transitions of a linear system on a grid. Cauchy matrices
/// between any two grid points are products of these (cocycle property).
#[derive(Clone, Debug)]
pub struct Propagator {
    steps: Vec<DMatrix<f64>>,
    inverses: Option<Vec<DMatrix<f64>>>,
    dim: usize,
}

impl Propagator {
    pub fn new(a: &MatrixFunction, grid: &Grid) -> Self {
        let steps = (0..grid.len().saturating_sub(1)).map(|i| step_transition(a, grid, i)).collect();
        Propagator { steps, inverses: None, dim: a.dim() }
    }

    /// Also cache inverse steps; fails at the first singular step.
    pub fn with_inverses(mut self, grid: &Grid) -> Result<Self> {
        let inv = self
            .steps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if s.determinant().abs() <= 1e-12 {
                    return Err(Error::Singular(grid.t(i)));
                }
                s.clone().try_inverse().ok_or(Error::Singular(grid.t(i)))
            })
            .collect::<Result<Vec<_>>>()?;
        self.inverses = Some(inv);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self, i: usize) -> &DMatrix<f64> {
        &self.steps[i]
    }

    pub fn inverse_step(&self, i: usize) -> Option<&DMatrix<f64>> {
        self.inverses.as_ref().map(|v| &v[i])
    }

    pub fn has_inverses(&self) -> bool {
        self.inverses.is_some()
    }

    /// `Φ(t_it, t_is)` for `it >= is`.
    pub fn cauchy(&self, it: usize, is: usize) -> DMatrix<f64> {
        assert!(it >= is, "forward Cauchy matrix needs it >= is");
        let mut m = DMatrix::identity(self.dim, self.dim);
        for i in is..it {
            m = &self.steps[i] * m;
        }
        m
    }
}

fn check_dims(a: &MatrixFunction, f: &Forcing, x0: &DVector<f64>) -> Result<()> {
    if f.dim() != a.dim() {
        return Err(Error::Dimension { expected: a.dim(), got: f.dim() });
    }
    if x0.len() != a.dim() {
        return Err(Error::Dimension { expected: a.dim(), got: x0.len() });
    }
    Ok(())
}

/// Forward solution of `x^Δ = A x + f`, `x(t0) = x0`, on the grid from `t0`.
///
/// Scattered points use the exact update `x(σ) = (E + μA)x + μf`; dense
/// steps use classical RK4.
pub fn step_ivp(a: &MatrixFunction, f: &Forcing, t0: f64, x0: &DVector<f64>, grid: &Grid) -> Result<Trajectory> {
    check_dims(a, f, x0)?;
    let start = grid.require_index(t0)?;
    let grid = grid.suffix(start);
    let mut samples = Vec::with_capacity(grid.len());
    let mut x = x0.clone();
    samples.push(x.clone());
    for i in 0..grid.len() - 1 {
        let t = grid.t(i);
        x = if grid.is_scattered(i) {
            let mu = grid.mu(i);
            &x + (a.eval(t) * &x + f.eval(t)) * mu
        } else {
            rk4_affine_step(a, f, t, &x, grid.t(i + 1) - t)
        };
        samples.push(x.clone());
    }
    Trajectory::new(grid, samples)
}

/// Cauchy matrix `Φ(t, s)` with `Φ(s, s) = E`. For `t < s` the backward
/// matrix exists only if every one-step map on `[t, s)` is invertible.
pub fn cauchy_matrix(a: &MatrixFunction, t: f64, s: f64, grid: &Grid) -> Result<DMatrix<f64>> {
    let it = grid.require_index(t)?;
    let is = grid.require_index(s)?;
    let n = a.dim();
    let mut m = DMatrix::identity(n, n);
    if it >= is {
        for i in is..it {
            m = step_transition(a, grid, i) * m;
        }
        return Ok(m);
    }
    for i in it..is {
        let step = step_transition(a, grid, i);
        if step.determinant().abs() <= 1e-12 {
            return Err(Error::Singular(grid.t(i)));
        }
        m *= step.try_inverse().ok_or(Error::Singular(grid.t(i)))?;
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegressiveCheck {
    pub regressive: bool,
    pub first_failure: Option<f64>,
}

/// `E + μ(t)A(t)` invertible (`|det| > 1e-12`) at every scattered grid point.
pub fn regressive_check(a: &MatrixFunction, grid: &Grid) -> RegressiveCheck {
    let n = a.dim();
    let first_failure = (0..grid.len()).filter(|&i| grid.is_scattered(i)).find_map(|i| {
        let m = DMatrix::identity(n, n) + a.eval(grid.t(i)) * grid.mu(i);
        (m.determinant().abs() <= 1e-12).then(|| grid.t(i))
    });
    RegressiveCheck { regressive: first_failure.is_none(), first_failure }
}

/// `x(t) = Φ(t, t0)x0 + ∫_{t0}^t Φ(t, σ(s)) f(s) Δs`.
///
/// Evaluated stepwise through the cocycle property, so no inverse of `Φ` is
/// ever formed and non-regressive systems are admissible. Dense steps use
/// the chosen quadrature for the integral term.
pub fn variation_of_constants(
    a: &MatrixFunction,
    f: &Forcing,
    t0: f64,
    x0: &DVector<f64>,
    grid: &Grid,
    quadrature: Quadrature,
) -> Result<Trajectory> {
    check_dims(a, f, x0)?;
    let start = grid.require_index(t0)?;
    let grid = grid.suffix(start);
    let mut samples = Vec::with_capacity(grid.len());
    let mut x = x0.clone();
    samples.push(x.clone());
    for i in 0..grid.len() - 1 {
        let t = grid.t(i);
        let step = step_transition(a, &grid, i);
        let integral = if grid.is_scattered(i) {
            f.eval(t) * grid.mu(i)
        } else {
            let t1 = grid.t(i + 1);
            let d = t1 - t;
            match quadrature {
                Quadrature::Trapezoid => (&step * f.eval(t) + f.eval(t1)) * (0.5 * d),
                Quadrature::Simpson => {
                    let mid = t + 0.5 * d;
                    let half = rk4_matrix_step(a, mid, 0.5 * d);
                    (&step * f.eval(t) + half * f.eval(mid) * 4.0 + f.eval(t1)) * (d / 6.0)
                }
            }
        };
        x = step * x + integral;
        samples.push(x.clone());
    }
    Trajectory::new(grid, samples)
}

/// Pointwise defect `||x^Δ - A x - f||` wherever a difference stencil exists.
pub fn residual_profile(traj: &Trajectory, a: &MatrixFunction, f: &[DVector<f64>]) -> Result<Vec<Option<f64>>> {
    let grid = traj.grid();
    if f.len() != grid.len() {
        return Err(Error::Dimension { expected: grid.len(), got: f.len() });
    }
    let x = traj.samples();
    Ok((0..grid.len())
        .map(|i| {
            let d = grid.delta_derivative_vec(x, i).ok()?;
            Some((d - a.eval(grid.t(i)) * &x[i] - &f[i]).norm())
        })
        .collect())
}

/// Sup over the grid of the pointwise defect (points without a stencil are
/// skipped).
pub fn residual(traj: &Trajectory, a: &MatrixFunction, f: &[DVector<f64>]) -> Result<f64> {
    residual_on(traj, a, f, traj.len())
}

/// As [`residual`], restricted to the first `upto` grid points.
pub fn residual_on(traj: &Trajectory, a: &MatrixFunction, f: &[DVector<f64>], upto: usize) -> Result<f64> {
    Ok(residual_profile(traj, a, f)?.into_iter().take(upto).flatten().fold(0.0, f64::max))
}
