//! JSON schemas for systems, forcings, nonlinearities and decay models.

use chronoscale::linalg::op_norm;
use chronoscale::solver::{regular_system, DecayModel};
use chronoscale::{Forcing, MatrixFunction, NonlinearityModel, ProjectionFamily, TimeScale};
use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug)]
pub struct SchemaError(pub String);

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type Schema<T> = Result<T, SchemaError>;

fn schema<T>(msg: impl Into<String>) -> Schema<T> {
    Err(SchemaError(msg.into()))
}

/// A JSON argument given inline or as `@path`.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(transparent)]
pub struct Json(pub serde_json::Value);

impl FromStr for Json {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let text = match s.strip_prefix('@') {
            Some(path) => std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?,
            None => s.to_string(),
        };
        serde_json::from_str(&text).map(Json).map_err(|e| e.to_string())
    }
}

impl Json {
    pub fn parse<T: DeserializeOwned>(&self, what: &str) -> Schema<T> {
        serde_json::from_value(self.0.clone()).map_err(|e| SchemaError(format!("{what}: {e}")))
    }
}

/// `a,b` on the command line, `[a, b]` in a scenario file.
#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Window(pub f64, pub f64);

impl From<(f64, f64)> for Window {
    fn from((a, b): (f64, f64)) -> Self {
        Window(a, b)
    }
}

impl From<Window> for (f64, f64) {
    fn from(w: Window) -> Self {
        (w.0, w.1)
    }
}

impl FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or("expected `a,b`")?;
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("bad number `{v}`"));
        let (a, b) = (num(a)?, num(b)?);
        if !(a < b) {
            return Err(format!("window start {a} must be below its end {b}"));
        }
        Ok(Window(a, b))
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Schema<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return schema(format!("{what} must be a non-empty square matrix"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rotation(angle: f64) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// `{"A": [[...]]}`, `{"diag": [...]}` or `{"regular": {"B": [...], "rotation": θ}}`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default, rename = "A")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub diag: Option<Vec<f64>>,
    #[serde(default)]
    pub regular: Option<RegularSpec>,
}

/// `x = L(t) y` with `L(t)` a rotation by `θ sin t` (2×2 only; `θ = 0` gives `L = E`).
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RegularSpec {
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(default)]
    pub rotation: f64,
}

impl RegularSpec {
    pub fn transformation(&self) -> Schema<Option<MatrixFunction>> {
        if self.rotation == 0.0 {
            return Ok(None);
        }
        if self.b.len() != 2 {
            return schema("a rotation transformation needs B of length 2");
        }
        let theta = self.rotation;
        Ok(Some(MatrixFunction::from_fn(2, 1.0, move |t| rotation(theta * t.sin()))))
    }
}

impl SystemSpec {
    pub fn build(&self, scale: &TimeScale) -> Schema<MatrixFunction> {
        match (&self.a, &self.diag, &self.regular) {
            (Some(a), None, None) => Ok(MatrixFunction::constant(matrix(a, "A")?)),
            (None, Some(d), None) if !d.is_empty() => Ok(MatrixFunction::diagonal(d)),
            (None, None, Some(r)) if !r.b.is_empty() => Ok(regular_system(&r.b, r.transformation()?, scale)),
            _ => schema("system needs exactly one of `A`, `diag`, `regular`"),
        }
    }

    /// The constant matrix, when the system has one.
    pub fn constant(&self) -> Schema<DMatrix<f64>> {
        match (&self.a, &self.diag) {
            (Some(a), None) => matrix(a, "A"),
            (None, Some(d)) if !d.is_empty() => Ok(DMatrix::from_diagonal(&DVector::from_column_slice(d))),
            _ => schema("this command needs a constant system (`A` or `diag`)"),
        }
    }
}

/// A forcing term; a list of terms is their sum.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ForcingTerm {
    /// `v`
    Constant(Vec<f64>),
    /// `a sin(ωt)`
    Sine { amplitude: Vec<f64>, omega: f64 },
    /// `a e^{-rt}`
    Exp { amplitude: Vec<f64>, rate: f64 },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ForcingSpec {
    One(ForcingTerm),
    Sum(Vec<ForcingTerm>),
}

impl ForcingTerm {
    fn values(&self) -> &[f64] {
        match self {
            ForcingTerm::Constant(v) => v,
            ForcingTerm::Sine { amplitude, .. } | ForcingTerm::Exp { amplitude, .. } => amplitude,
        }
    }

    fn eval(&self, t: f64) -> DVector<f64> {
        let v = DVector::from_column_slice(self.values());
        match self {
            ForcingTerm::Constant(_) => v,
            ForcingTerm::Sine { omega, .. } => v * (omega * t).sin(),
            ForcingTerm::Exp { rate, .. } => v * (-rate * t).exp(),
        }
    }

    /// `sup_{t >= t0} ||term(t)||`.
    fn bound(&self, t0: f64) -> f64 {
        let norm = DVector::from_column_slice(self.values()).norm();
        match self {
            ForcingTerm::Exp { rate, .. } if *rate < 0.0 => f64::INFINITY,
            ForcingTerm::Exp { rate, .. } => norm * (-rate * t0).exp(),
            _ => norm,
        }
    }
}

impl ForcingSpec {
    fn terms(&self) -> &[ForcingTerm] {
        match self {
            ForcingSpec::One(t) => std::slice::from_ref(t),
            ForcingSpec::Sum(v) => v,
        }
    }

    pub fn build(&self, dim: usize) -> Schema<Forcing> {
        let terms = self.terms().to_vec();
        if terms.iter().any(|t| t.values().len() != dim) {
            return schema(format!("forcing vectors must have length {dim}"));
        }
        Ok(Forcing::from_fn(dim, move |t| terms.iter().fold(DVector::zeros(dim), |acc, term| acc + term.eval(t))))
    }

    pub fn bound(&self, t0: f64) -> f64 {
        self.terms().iter().map(|t| t.bound(t0)).sum()
    }
}

/// One summand `g_j(t, x)` of the nonlinearity, with its constants derived
/// from the parameters.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum NonlinTerm {
    /// `g = v`
    Constant(Vec<f64>),
    /// `g = M x`
    Linear(Vec<Vec<f64>>),
    /// `g_k = c sin(x_k) + o_k`
    Sine { scale: f64, offset: Vec<f64> },
    /// `g_k = c x_k²`, Lipschitz only inside the declared ball
    Square { scale: f64 },
    /// `g = f(t)`
    Forcing(ForcingSpec),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum NonlinSpec {
    Terms(Vec<NonlinTerm>),
    Model {
        components: Vec<NonlinTerm>,
        #[serde(default)]
        ball: Option<f64>,
    },
}

impl NonlinSpec {
    pub fn build(&self, dim: usize, t0: f64) -> Schema<NonlinearityModel> {
        let (terms, ball) = match self {
            NonlinSpec::Terms(t) => (t, None),
            NonlinSpec::Model { components, ball } => (components, *ball),
        };
        if terms.is_empty() {
            return schema("nonlinearity needs at least one component");
        }
        let mut model = NonlinearityModel::new(dim);
        let check = |len: usize| {
            if len == dim {
                Ok(())
            } else {
                schema(format!("nonlinearity vectors must have length {dim} (got {len})"))
            }
        };
        for term in terms {
            model = match term.clone() {
                NonlinTerm::Constant(v) => {
                    check(v.len())?;
                    let v = DVector::from_vec(v);
                    model.with_component(v.norm(), 0.0, move |_, _| v.clone())
                }
                NonlinTerm::Linear(rows) => {
                    let m = matrix(&rows, "linear")?;
                    check(m.nrows())?;
                    model.with_component(0.0, op_norm(&m), move |_, x| &m * x)
                }
                NonlinTerm::Sine { scale, offset } => {
                    check(offset.len())?;
                    let o = DVector::from_vec(offset);
                    model.with_component(o.norm(), scale.abs(), move |_, x| x.map(|v| scale * v.sin()) + &o)
                }
                NonlinTerm::Square { scale } => {
                    let Some(r) = ball else {
                        return schema("`square` needs a `ball` radius");
                    };
                    model.with_component(0.0, 2.0 * scale.abs() * r, move |_, x| x.map(|v| scale * v * v))
                }
                NonlinTerm::Forcing(f) => {
                    let bound = f.bound(t0);
                    let f = f.build(dim)?;
                    model.with_component(bound, 0.0, move |t, _| f.eval(t))
                }
            };
        }
        Ok(match ball {
            Some(r) => model.with_ball(r),
            None => model,
        })
    }
}

/// Projection family for the Green operator: `"spectral"` (from a constant
/// `A`), `"identity"`, `"zero"`, or a constant matrix.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ProjectionSpec {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

impl ProjectionSpec {
    pub fn is_spectral(&self) -> bool {
        matches!(self, ProjectionSpec::Named(n) if n == "spectral")
    }

    pub fn build(&self, dim: usize) -> Schema<ProjectionFamily> {
        match self {
            ProjectionSpec::Named(n) if n == "identity" => Ok(ProjectionFamily::identity(dim)),
            ProjectionSpec::Named(n) if n == "zero" => Ok(ProjectionFamily::zero(dim)),
            ProjectionSpec::Named(n) => schema(format!("unknown projection `{n}`")),
            ProjectionSpec::Matrix(rows) => {
                let m = matrix(rows, "projection")?;
                if m.nrows() != dim {
                    return schema(format!("projection must be {dim}×{dim}"));
                }
                ProjectionFamily::constant(m).map_err(|e| SchemaError(e.to_string()))
            }
        }
    }
}

/// `{"B": [...], "alpha", "beta", "gamma", "c1", "c2", "h"}`, optionally with
/// a rotation transformation as in [`RegularSpec`].
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySpec {
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub c1: f64,
    #[serde(default)]
    pub c2: f64,
    pub h: f64,
    #[serde(default)]
    pub rotation: f64,
}

impl DecaySpec {
    pub fn model(&self) -> DecayModel {
        DecayModel::new(self.c1, self.c2, self.h, self.alpha, self.beta, self.gamma)
    }

    pub fn transformation(&self) -> Schema<Option<MatrixFunction>> {
        RegularSpec { b: self.b.clone(), rotation: self.rotation }.transformation()
    }
}
