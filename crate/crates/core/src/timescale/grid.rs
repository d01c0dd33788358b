use super::TimeScale;
use crate::{time_tol, Error, Result};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointKind {
    /// Sample inside (or at the end of) a dense interval; `mu = 0`.
    Dense,
    /// `mu > 0`; the next point of the scale is `t + mu`.
    Scattered,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub t: f64,
    pub mu: f64,
    pub kind: PointKind,
}

/// Quadrature rule used on dense steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    #[default]
    Trapezoid,
    Simpson,
}

/// Finite ordered sample of `T ∩ [a, b]`.
///
/// Every right-scattered point of the window appears once; consecutive dense
/// samples are at most `h` apart.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    points: Vec<GridPoint>,
    h: f64,
    window: (f64, f64),
    reaches_sup: bool,
}

/// Upper bound on the number of grid points a single window may produce.
pub const MAX_GRID_POINTS: usize = 20_000_000;

/// Dense pieces shorter than this many steps of `h` are subdivided more finely
/// so every dense run carries a full derivative stencil.
pub const MIN_DENSE_STEPS: usize = 4;

impl Grid {
    pub(super) fn build(scale: &TimeScale, window: (f64, f64), h: f64) -> Result<Self> {
        let (a, b) = window;
        if !(h > 0.0) || !(a <= b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("grid window ({a}, {b}) with h = {h}")));
        }
        let mut points = Vec::new();
        for (idx, seg) in scale.segments_iter(a, b) {
            let l = seg.left.max(a);
            let r = seg.right.min(b);
            if r < l - time_tol(l) {
                continue;
            }
            let count = if r - l <= time_tol(l) { 1.0 } else { ((r - l) / h).ceil().max(MIN_DENSE_STEPS as f64) + 1.0 };
            if points.len() as f64 + count > MAX_GRID_POINTS as f64 {
                return Err(Error::InvalidParameter(format!(
                    "grid on ({a}, {b}) with h = {h} exceeds {MAX_GRID_POINTS} points"
                )));
            }
            let end_mu = |p: f64| {
                if p >= seg.right - time_tol(p) {
                    scale.nth_segment(idx + 1).map_or(0.0, |next| next.left - p)
                } else {
                    0.0
                }
            };
            let mut push = |t: f64| {
                let mu = end_mu(t);
                let kind = if mu > 0.0 { PointKind::Scattered } else { PointKind::Dense };
                points.push(GridPoint { t, mu, kind });
            };
            if r - l <= time_tol(l) {
                push(if seg.is_point() { seg.left } else { l });
            } else {
                let n = ((r - l) / h - 1e-9).ceil().max(MIN_DENSE_STEPS as f64) as usize;
                for k in 0..n {
                    push(l + (r - l) * k as f64 / n as f64);
                }
                push(r);
            }
        }
        if points.is_empty() {
            return Err(Error::EmptyWindow(a, b));
        }
        let last = points[points.len() - 1].t;
        let reaches_sup = scale.sup() <= last + time_tol(last);
        Ok(Grid { points, h, window, reaches_sup })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn t(&self, i: usize) -> f64 {
        self.points[i].t
    }

    pub fn mu(&self, i: usize) -> f64 {
        self.points[i].mu
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.points[i].t + self.points[i].mu
    }

    pub fn is_scattered(&self, i: usize) -> bool {
        self.points[i].kind == PointKind::Scattered
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// True when the last grid point is `sup T`.
    pub fn reaches_sup(&self) -> bool {
        self.reaches_sup
    }

    pub fn first(&self) -> f64 {
        self.points[0].t
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1].t
    }

    /// Largest step between consecutive grid points' time scale jumps.
    pub fn mu_max(&self) -> f64 {
        self.points.iter().map(|p| p.mu).fold(0.0, f64::max)
    }

    /// Whether the step `i -> i+1` exists and is a jump `t_{i+1} = sigma(t_i)`.
    pub fn jumps_to_next(&self, i: usize) -> bool {
        i + 1 < self.len() && self.is_scattered(i) && (self.t(i + 1) - self.sigma(i)).abs() <= time_tol(self.sigma(i))
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = time_tol(t);
        let i = self.points.partition_point(|p| p.t < t - tol);
        (i < self.len() && (self.points[i].t - t).abs() <= tol).then_some(i)
    }

    pub fn require_index(&self, t: f64) -> Result<usize> {
        self.index_of(t).ok_or(Error::NotInScale(t))
    }

    /// Largest index with `t_i <= t`.
    pub fn index_at_or_before(&self, t: f64) -> Option<usize> {
        let i = self.points.partition_point(|p| p.t <= t + time_tol(t));
        i.checked_sub(1)
    }

    /// Restrict to the first `n` points.
    pub fn truncated(&self, n: usize) -> Grid {
        let n = n.clamp(1, self.len());
        let points = self.points[..n].to_vec();
        let last = points[n - 1].t;
        Grid { reaches_sup: self.reaches_sup && n == self.len(), window: (self.window.0, last), points, h: self.h }
    }

    /// Drop the first `start` points.
    pub fn suffix(&self, start: usize) -> Grid {
        let start = start.min(self.len() - 1);
        let points = self.points[start..].to_vec();
        Grid { window: (points[0].t, self.window.1), points, h: self.h, reaches_sup: self.reaches_sup }
    }

    /// Weights `w` with `∫_{t_ia}^{t_ib} f Δt = Σ w_k f(t_k)`: exact jump terms
    /// at scattered points, composite trapezoid on dense steps.
    pub fn integral_weights(&self, ia: usize, ib: usize) -> Vec<(usize, f64)> {
        let mut w = Vec::with_capacity(2 * (ib.saturating_sub(ia)));
        for i in ia..ib {
            if self.is_scattered(i) {
                w.push((i, self.mu(i)));
            } else {
                let d = self.t(i + 1) - self.t(i);
                w.push((i, 0.5 * d));
                w.push((i + 1, 0.5 * d));
            }
        }
        w
    }

    fn integrate<T>(&self, f: &[T], a: f64, b: f64, zero: T) -> Result<T>
    where
        T: Clone + Add<Output = T> + Mul<f64, Output = T>,
    {
        if f.len() != self.len() {
            return Err(Error::Dimension { expected: self.len(), got: f.len() });
        }
        if a > b {
            return Err(Error::InvalidParameter(format!("integration bounds {a} > {b}")));
        }
        let ia = self.require_index(a)?;
        let ib = self.require_index(b)?;
        Ok(self.integral_weights(ia, ib).into_iter().fold(zero, |acc, (k, w)| acc + f[k].clone() * w))
    }

    /// `∫_a^b f Δt` for samples `f` on this grid.
    pub fn delta_integral(&self, f: &[f64], a: f64, b: f64) -> Result<f64> {
        self.integrate(f, a, b, 0.0)
    }

    pub fn delta_integral_vec(&self, f: &[DVector<f64>], a: f64, b: f64) -> Result<DVector<f64>> {
        let n = f.first().map_or(0, |v| v.len());
        self.integrate(f, a, b, DVector::zeros(n))
    }

    /// Contiguous index run of dense steps containing `i`, clipped to four
    /// points on either side.
    pub(crate) fn dense_run(&self, i: usize) -> (usize, usize) {
        let mut lo = i;
        while lo > 0 && lo + 4 > i && !self.is_scattered(lo - 1) {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < self.len() && hi < i + 4 && !self.is_scattered(hi) {
            hi += 1;
        }
        (lo, hi)
    }

    /// Linear combination `(index, weight)` giving `f^Δ(t_i)`.
    ///
    /// Scattered points use `(f(σ(t)) - f(t)) / μ(t)`; dense points use a
    /// finite-difference stencil of up to five neighbours within the same
    /// dense run (fourth order when five are available).
    pub fn derivative_stencil(&self, i: usize) -> Result<Vec<(usize, f64)>> {
        if self.is_scattered(i) {
            if !self.jumps_to_next(i) {
                return Err(Error::NoStencil(self.t(i)));
            }
            let mu = self.mu(i);
            return Ok(vec![(i, -1.0 / mu), (i + 1, 1.0 / mu)]);
        }
        let (lo, hi) = self.dense_run(i);
        if hi == lo {
            return Err(Error::NoStencil(self.t(i)));
        }
        let width = (hi - lo + 1).min(5);
        let start = i.saturating_sub(width / 2).max(lo).min(hi + 1 - width);
        let nodes: Vec<f64> = (start..start + width).map(|k| self.t(k)).collect();
        let c = fornberg_weights(self.t(i), &nodes, 1);
        Ok((start..start + width).zip(c[1].iter().copied()).collect())
    }

    pub fn delta_derivative(&self, f: &[f64], i: usize) -> Result<f64> {
        Ok(self.derivative_stencil(i)?.into_iter().map(|(k, w)| w * f[k]).sum())
    }

    pub fn delta_derivative_vec(&self, f: &[DVector<f64>], i: usize) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(f[i].len());
        for (k, w) in self.derivative_stencil(i)? {
            out.axpy(w, &f[k], 1.0);
        }
        Ok(out)
    }
}

/// Finite-difference weights for derivatives `0..=m` at `z` on arbitrary
/// nodes (Fornberg's recursion). `c[k][j]` multiplies `f(x_j)` for the k-th
/// derivative.
pub(crate) fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}
