//! Hilger exponentials and the circle-plus group on regressive coefficients.

use crate::timescale::Grid;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// `|1 + mu p|` at or below this is treated as zero (not regressive).
pub const REGRESSIVITY_TOL: f64 = 1e-12;

/// Default lower bound on `inf (1 + mu p)` for the uniformly positive class.
pub const UNIFORM_BOUND: f64 = 1e-8;

/// A scalar coefficient `p(t)` sampled on a grid.
///
/// Coefficients built with `⊕`/`⊖` also keep their left limits, which differ
/// from the point values at left-dense, right-scattered points.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarCoefficient {
    values: Vec<f64>,
    left: Option<Vec<f64>>,
}

impl ScalarCoefficient {
    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self::from_values(vec![c; grid.len()])
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values(grid.points().iter().map(|p| f(p.t)).collect())
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        ScalarCoefficient { values, left: None }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `p(t_i-)`, the value a dense step ending at `t_i` integrates against.
    pub fn left_value(&self, i: usize) -> f64 {
        self.left.as_ref().map_or(self.values[i], |l| l[i])
    }

    /// Trapezoid integral over the dense step `[t_i, t_{i+1}]`.
    fn dense_step(&self, i: usize, grid: &Grid) -> f64 {
        0.5 * (grid.t(i + 1) - grid.t(i)) * (self.values[i] + self.left_value(i + 1))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        if self.values.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), got: self.values.len() });
        }
        Ok(())
    }
}

/// Cylinder transform `ξ_h(z) = ln(1 + z h)/h`, `ξ_0(z) = z` (real branch).
pub fn cylinder(z: f64, h: f64) -> Result<f64> {
    if h < 0.0 {
        return Err(Error::InvalidParameter(format!("negative graininess {h}")));
    }
    if h == 0.0 {
        return Ok(z);
    }
    let arg = 1.0 + z * h;
    if arg <= 0.0 {
        return Err(Error::NotRegressive { t: f64::NAN, value: arg });
    }
    Ok((z * h).ln_1p() / h)
}

/// `(p ⊕ q)(t) = p + q + mu p q`.
pub fn oplus(p: &ScalarCoefficient, q: &ScalarCoefficient, grid: &Grid) -> Result<ScalarCoefficient> {
    p.check(grid)?;
    q.check(grid)?;
    let values = (0..grid.len())
        .map(|i| {
            let (a, b, mu) = (p.values[i], q.values[i], grid.mu(i));
            a + b + mu * a * b
        })
        .collect();
    let left = (0..grid.len()).map(|i| p.left_value(i) + q.left_value(i)).collect();
    Ok(ScalarCoefficient { values, left: Some(left) })
}

/// `(p ⊖ q)(t) = (p - q)/(1 + mu q)`.
pub fn ominus(p: &ScalarCoefficient, q: &ScalarCoefficient, grid: &Grid) -> Result<ScalarCoefficient> {
    p.check(grid)?;
    q.check(grid)?;
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let d = 1.0 + grid.mu(i) * q.values[i];
        if d.abs() <= REGRESSIVITY_TOL {
            return Err(Error::NotRegressive { t: grid.t(i), value: d });
        }
        values.push((p.values[i] - q.values[i]) / d);
    }
    let left = (0..grid.len()).map(|i| p.left_value(i) - q.left_value(i)).collect();
    Ok(ScalarCoefficient { values, left: Some(left) })
}

/// `(⊖q)(t) = -q/(1 + mu q)`.
pub fn neg(q: &ScalarCoefficient, grid: &Grid) -> Result<ScalarCoefficient> {
    ominus(&ScalarCoefficient::constant(grid, 0.0), q, grid)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regressivity {
    NotRegressive,
    Regressive,
    PositivelyRegressive,
    UniformlyPositivelyRegressive,
}

/// Regressivity class with witness `inf (1 + mu p)` over the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressivityClass {
    pub class: Regressivity,
    pub witness: f64,
}

pub fn regressivity_class(p: &ScalarCoefficient, grid: &Grid) -> RegressivityClass {
    regressivity_class_with_bound(p, grid, UNIFORM_BOUND)
}

pub fn regressivity_class_with_bound(p: &ScalarCoefficient, grid: &Grid, bound: f64) -> RegressivityClass {
    let mut witness = f64::INFINITY;
    let mut any_zero = false;
    for (i, &v) in p.values.iter().enumerate() {
        let f = 1.0 + grid.mu(i) * v;
        witness = witness.min(f);
        any_zero |= f.abs() <= REGRESSIVITY_TOL;
    }
    let class = if any_zero {
        Regressivity::NotRegressive
    } else if witness >= bound {
        Regressivity::UniformlyPositivelyRegressive
    } else if witness > 0.0 {
        Regressivity::PositivelyRegressive
    } else {
        Regressivity::Regressive
    };
    RegressivityClass { class, witness }
}

/// `e_p` as a signed mantissa times a power of two, so long products
/// neither overflow nor lose the exactness of scattered factors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedLog {
    mantissa: f64,
    exp2: i64,
}

impl SignedLog {
    pub const ONE: SignedLog = SignedLog { mantissa: 1.0, exp2: 0 };
    pub const ZERO: SignedLog = SignedLog { mantissa: 0.0, exp2: 0 };

    fn normalized(mantissa: f64, exp2: i64) -> Self {
        if mantissa == 0.0 {
            return Self::ZERO;
        }
        let e = mantissa.abs().log2().floor() as i32;
        SignedLog { mantissa: mantissa * 2f64.powi(-e), exp2: exp2 + e as i64 }
    }

    /// `ln |e_p|` (`-inf` for zero).
    pub fn log_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.mantissa.abs().ln() + self.exp2 as f64 * std::f64::consts::LN_2
        }
    }

    pub fn sign(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.mantissa.signum()
        }
    }

    pub fn value(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else if self.exp2.abs() > 2000 {
            if self.exp2 > 0 {
                self.mantissa.signum() * f64::INFINITY
            } else {
                0.0
            }
        } else {
            let half = (self.exp2 / 2) as i32;
            self.mantissa * 2f64.powi(half) * 2f64.powi(self.exp2 as i32 - half)
        }
    }

    pub fn recip(&self) -> Self {
        Self::normalized(1.0 / self.mantissa, -self.exp2)
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    pub fn times(&self, other: &SignedLog) -> Self {
        Self::normalized(self.mantissa * other.mantissa, self.exp2 + other.exp2)
    }

    fn mul(&mut self, factor: f64) {
        *self = Self::normalized(self.mantissa * factor, self.exp2);
    }

    fn mul_exp(&mut self, x: f64) {
        if self.is_zero() {
            return;
        }
        let k = (x / std::f64::consts::LN_2).round();
        let r = x - k * std::f64::consts::LN_2;
        *self = Self::normalized(self.mantissa * r.exp(), self.exp2 + k as i64);
    }
}

/// Log-form profile of `e_p(t_k, t_start)` for every `k >= start`.
///
/// Scattered steps multiply by `1 + mu p` (the product form, which also
/// covers sign-alternating exponentials); dense steps add the trapezoid
/// integral of `p`. A zero factor makes the exponential vanish from then on.
pub fn hilger_log_profile(p: &ScalarCoefficient, start: usize, grid: &Grid) -> Result<Vec<SignedLog>> {
    p.check(grid)?;
    let mut out = Vec::with_capacity(grid.len() - start);
    let mut acc = SignedLog::ONE;
    out.push(acc);
    for i in start..grid.len() - 1 {
        if grid.is_scattered(i) {
            let f = 1.0 + grid.mu(i) * p.values[i];
            acc.mul(if f.abs() <= REGRESSIVITY_TOL { 0.0 } else { f });
        } else {
            acc.mul_exp(p.dense_step(i, grid));
        }
        out.push(acc);
    }
    Ok(out)
}

fn forward_log(p: &ScalarCoefficient, is: usize, it: usize, grid: &Grid) -> Result<SignedLog> {
    p.check(grid)?;
    let mut acc = SignedLog::ONE;
    for i in is..it {
        if grid.is_scattered(i) {
            let f = 1.0 + grid.mu(i) * p.values[i];
            if f.abs() <= REGRESSIVITY_TOL {
                return Ok(SignedLog::ZERO);
            }
            acc.mul(f);
        } else {
            acc.mul_exp(p.dense_step(i, grid));
        }
    }
    Ok(acc)
}

/// Hilger exponential `e_p(t, s)` for grid points `t`, `s`.
///
/// For `t < s` this is `1/e_p(s, t)`, defined only when `p` is regressive
/// on `[t, s)`.
pub fn hilger_exp(p: &ScalarCoefficient, t: f64, s: f64, grid: &Grid) -> Result<f64> {
    let it = grid.require_index(t)?;
    let is = grid.require_index(s)?;
    if it >= is {
        return Ok(forward_log(p, is, it, grid)?.value());
    }
    let back = forward_log(p, it, is, grid)?;
    if back.is_zero() {
        let bad = (it..is).find(|&i| (1.0 + grid.mu(i) * p.values[i]).abs() <= REGRESSIVITY_TOL).unwrap_or(it);
        return Err(Error::NotRegressive { t: grid.t(bad), value: 1.0 + grid.mu(bad) * p.values[bad] });
    }
    Ok(back.recip().value())
}

/// `e_p(t, s)` through the cylinder transform `exp(∫ ξ_mu(p) Δτ)`; fails when
/// `1 + mu p <= 0` at a scattered point, where the real branch does not exist.
pub fn hilger_exp_positive(p: &ScalarCoefficient, t: f64, s: f64, grid: &Grid) -> Result<f64> {
    p.check(grid)?;
    let it = grid.require_index(t)?;
    let is = grid.require_index(s)?;
    let (lo, hi, dir) = if it >= is { (is, it, 1.0) } else { (it, is, -1.0) };
    let mut integral = 0.0;
    for i in lo..hi {
        if grid.is_scattered(i) {
            let mu = grid.mu(i);
            let xi = cylinder(p.values[i], mu)
                .map_err(|_| Error::NotRegressive { t: grid.t(i), value: 1.0 + mu * p.values[i] })?;
            integral += mu * xi;
        } else {
            integral += p.dense_step(i, grid);
        }
    }
    Ok((dir * integral).exp())
}
