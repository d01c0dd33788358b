use crate::inputs::{DecaySpec, ForcingSpec, Json, NonlinSpec, ProjectionSpec, SchemaError, SystemSpec, Window};
use chronoscale::dichotomy::{spectral_projections, verify_green, DEFAULT_GAP_TOL};
use chronoscale::hilger::{hilger_exp, hilger_log_profile};
use chronoscale::linsys::{
    regressive_check, residual, residual_profile, step_ivp, variation_of_constants, RegressiveCheck,
};
use chronoscale::lyapunov::{fundamental_system, regularity_defect, AlphaForm, ExponentOptions};
use chronoscale::solver::{
    fixed_point_solve, regular_decay_solve, ContractionReport, DecayOptions, DecayReport, SolveOptions,
};
use chronoscale::timescale::ScaleDescriptor;
use chronoscale::{
    Forcing, GreenOperator, GreenOptions, Grid, MatrixFunction, ProjectionFamily, Quadrature, ScalarCoefficient,
    TimeScale, Trajectory,
};
use clap::{Args, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::PathBuf;

/// Everything a command can fail with.
#[derive(Debug)]
pub enum Failure {
    Schema(String),
    Solver(chronoscale::Error),
    Io(std::io::Error),
    /// A solution whose residual exceeds the declared gate.
    Gate(String),
}

impl From<SchemaError> for Failure {
    fn from(e: SchemaError) -> Self {
        Failure::Schema(e.0)
    }
}

impl From<chronoscale::Error> for Failure {
    fn from(e: chronoscale::Error) -> Self {
        Failure::Solver(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

/// The artifacts of one command.
pub struct Artifacts {
    pub name: &'static str,
    pub csv: Option<String>,
    pub report: serde_json::Value,
    /// Print the CSV rather than the report when no output directory is set.
    pub csv_primary: bool,
}

fn artifacts(
    name: &'static str,
    csv: Option<String>,
    report: &impl Serialize,
    csv_primary: bool,
) -> Result<Artifacts, Failure> {
    let report = serde_json::to_value(report).map_err(|e| Failure::Schema(e.to_string()))?;
    Ok(Artifacts { name, csv, report, csv_primary })
}

/// Declared residual gate for solution CSVs.
#[derive(Args, Clone, Copy, Debug, Deserialize, Serialize)]
pub struct Gate {
    /// Largest admissible pointwise residual of an emitted solution.
    #[arg(long = "gate", default_value_t = default_gate())]
    #[serde(default = "default_gate")]
    pub gate: f64,
}

fn default_gate() -> f64 {
    1e-6
}

/// Record the gate in the report and refuse to emit a solution that fails it.
fn gated(
    name: &'static str,
    csv: String,
    report: &impl Serialize,
    residual: f64,
    gate: f64,
    csv_primary: bool,
) -> Result<Artifacts, Failure> {
    if !(residual <= gate) {
        return Err(Failure::Gate(format!("{name}: residual {residual:e} exceeds gate {gate:e}")));
    }
    let mut art = artifacts(name, Some(csv), report, csv_primary)?;
    if let serde_json::Value::Object(map) = &mut art.report {
        map.insert("gate".into(), gate.into());
        map.insert("gate_pass".into(), true.into());
    }
    Ok(art)
}

fn default_h() -> f64 {
    0.01
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    200
}

fn default_spot_checks() -> usize {
    64
}

#[derive(Args, Clone, Debug, Deserialize, Serialize)]
pub struct Common {
    /// Builtin name or JSON descriptor (see `chronoscale list`).
    #[arg(long)]
    pub scale: String,
    /// Window `a,b`.
    #[arg(long)]
    pub window: Window,
    /// Step on dense intervals.
    #[arg(long, default_value_t = default_h())]
    #[serde(default = "default_h")]
    pub h: f64,
    /// Directory for CSV and JSON artifacts.
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Common {
    fn scale(&self) -> Result<TimeScale, Failure> {
        TimeScale::parse(&self.scale).map_err(|e| Failure::Schema(e.to_string()))
    }

    fn grid(&self, scale: &TimeScale) -> Result<Grid, Failure> {
        Ok(scale.grid(self.window.into(), self.h)?)
    }
}

/// Append a `residual` column; points without a derivative stencil are left
/// empty.
fn with_residual_column(csv: &str, defects: &[Option<f64>]) -> String {
    let mut out = String::with_capacity(csv.len() + 24 * defects.len());
    for (k, line) in csv.lines().enumerate() {
        out.push_str(line);
        match k {
            0 => out.push_str(",residual"),
            _ => {
                out.push(',');
                if let Some(r) = defects[k - 1] {
                    let _ = write!(out, "{r:.16e}");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Solution CSV: header row, `t` first, 17 significant digits.
pub fn trajectory_csv(x: &Trajectory) -> String {
    let mut out = String::from("t");
    if x.dim() == 1 {
        out.push_str(",x");
    } else {
        for k in 0..x.dim() {
            let _ = write!(out, ",x{k}");
        }
    }
    out.push('\n');
    for (p, v) in x.grid().points().iter().zip(x.samples()) {
        let _ = write!(out, "{:.16e}", p.t);
        for c in v.iter() {
            let _ = write!(out, ",{c:.16e}");
        }
        out.push('\n');
    }
    out
}

#[derive(Args, Clone, Debug, Deserialize, Serialize)]
pub struct ScaleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Serialize)]
struct ScaleReport {
    descriptor: ScaleDescriptor,
    syndetic: bool,
    mu_star: f64,
    nu_star: f64,
    window_mu_star: f64,
    points: usize,
}

pub fn scale(args: &ScaleArgs) -> Result<Artifacts, Failure> {
    let s = args.common.scale()?;
    let grid = args.common.grid(&s)?;
    let mut csv = String::from("t,mu,right_scattered\n");
    for p in grid.points() {
        let _ = writeln!(csv, "{:.16e},{:.16e},{}", p.t, p.mu, u8::from(p.mu > 0.0));
    }
    let report = ScaleReport {
        descriptor: s.descriptor(),
        syndetic: s.is_syndetic(),
        mu_star: s.mu_star(None),
        nu_star: s.nu_star(),
        window_mu_star: s.mu_star(Some(args.common.window.into())),
        points: grid.len(),
    };
    artifacts("scale", Some(csv), &report, true)
}

#[derive(Args, Clone, Debug, Deserialize, Serialize)]
pub struct ExpArgs {
    #[arg(long)]
    pub scale: String,
    /// Constant coefficient `p`.
    #[arg(long, allow_hyphen_values = true)]
    pub p: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long, default_value_t = default_h())]
    #[serde(default = "default_h")]
    pub h: f64,
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ExpReport {
    p: f64,
    from: f64,
    to: f64,
    value: f64,
}

pub fn exp(args: &ExpArgs) -> Result<Artifacts, Failure> {
    let s = TimeScale::parse(&args.scale).map_err(|e| Failure::Schema(e.to_string()))?;
    let (lo, hi) = (args.from.min(args.to), args.from.max(args.to));
    let grid = if lo == hi { s.grid((lo, lo + args.h), args.h)? } else { s.grid((lo, hi), args.h)? };
    let p = ScalarCoefficient::constant(&grid, args.p);
    let value = hilger_exp(&p, args.to, args.from, &grid)?;
    // e_p(t, from) = e_p(t, lo) / e_p(from, lo) along the grid
    let start = grid.require_index(lo)?;
    let stop = grid.require_index(hi)?;
    let profile = hilger_log_profile(&p, start, &grid)?;
    let base = profile[grid.require_index(args.from)? - start].recip();
    let mut csv = String::from("t,e\n");
    for (k, e) in profile.iter().enumerate().take(stop - start + 1) {
        let _ = writeln!(csv, "{:.16e},{:.16e}", grid.t(start + k), e.times(&base).value());
    }
    artifacts("exp", Some(csv), &ExpReport { p: args.p, from: args.from, to: args.to, value }, false)
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, ValueEnum, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// One-step transitions.
    #[default]
    Step,
    /// Variation of constants with Simpson quadrature.
    Voc,
}

#[derive(Args, Clone, Debug, Deserialize, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub gate: Gate,
    /// System JSON, inline or `@file`.
    #[arg(long)]
    pub system: Json,
    /// Initial vector at the window start.
    #[arg(long)]
    pub x0: Json,
    #[arg(long)]
    #[serde(default)]
    pub forcing: Option<Json>,
    #[arg(long, value_enum, default_value_t = Method::Step)]
    #[serde(default)]
    pub method: Method,
}

#[derive(Serialize)]
struct SolveReport {
    method: Method,
    regressive: RegressiveCheck,
    residual: f64,
    sup_norm: f64,
}

fn forcing(spec: &Option<Json>, dim: usize) -> Result<Forcing, Failure> {
    match spec {
        None => Ok(Forcing::zero(dim)),
        Some(j) => Ok(j.parse::<ForcingSpec>("forcing")?.build(dim)?),
    }
}

pub fn solve(args: &SolveArgs) -> Result<Artifacts, Failure> {
    let s = args.common.scale()?;
    let grid = args.common.grid(&s)?;
    let a = args.system.parse::<SystemSpec>("system")?.build(&s)?;
    let x0 = DVector::from_vec(args.x0.parse::<Vec<f64>>("x0")?);
    if x0.len() != a.dim() {
        return Err(Failure::Schema(format!("x0 must have length {}", a.dim())));
    }
    let f = forcing(&args.forcing, a.dim())?;
    let t0 = grid.first();
    let x = match args.method {
        Method::Step => step_ivp(&a, &f, t0, &x0, &grid)?,
        Method::Voc => variation_of_constants(&a, &f, t0, &x0, &grid, Quadrature::Simpson)?,
    };
    let report = SolveReport {
        method: args.method,
        regressive: regressive_check(&a, &grid),
        residual: residual(&x, &a, &f.sample(x.grid()))?,
        sup_norm: x.sup_norm(),
    };
    gated("solve", trajectory_csv(&x), &report, report.residual, args.gate.gate, true)
}

/// `γ,λ` for the weighted estimate.
#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
pub struct Weight {
    pub gamma: f64,
    pub lambda: f64,
}

impl std::str::FromStr for Weight {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (g, l) = s.split_once(',').ok_or("expected `gamma,lambda`")?;
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("bad number `{v}`"));
        Ok(Weight { gamma: num(g)?, lambda: num(l)? })
    }
}

fn default_projection() -> Json {
    Json(serde_json::Value::String("spectral".into()))
}

fn default_green_tol() -> f64 {
    1e-9
}

#[derive(Args, Clone, Debug, Deserialize, Serialize)]
pub struct GreenArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub system: Json,
    /// `"spectral"`, `"identity"`, `"zero"` or a constant matrix.
    #[arg(long, default_value = "\"spectral\"")]
    #[serde(default = "default_projection")]
    pub projection: Json,
    #[arg(long)]
    #[serde(default)]
    pub forcing: Option<Json>,
    /// Also estimate the `γ`-to-`λ` weighted norm (`gamma,lambda`); failures
    /// of the unweighted computations are then reported instead of fatal.
    #[arg(long)]
    #[serde(default)]
    pub weight: Option<Weight>,
    /// Residual gate for `verify_green`.
    #[arg(long, default_value_t = default_green_tol())]
    #[serde(default = "default_green_tol")]
    pub tol: f64,
}

#[derive(Serialize, Default)]
struct GreenReportOut {
    norm_estimate: Option<f64>,
    residual: Option<f64>,
    pass: Option<bool>,
    tail_bound: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    errors: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weighted: Option<WeightedOut>,
}

#[derive(Serialize)]
struct WeightedOut {
    gamma: f64,
    lambda: f64,
    syndetic: bool,
    /// Weighted estimates on growing windows `[a, end]`.
    prefixes: Vec<PrefixEstimate>,
    /// `∫ ||f|| Δs` over the window, the size of the backward solution of
    /// `x^Δ = f` at the window start.
    forcing_delta_integral: Option<f64>,
}

#[derive(Serialize)]
struct PrefixEstimate {
    end: f64,
    estimate: Option<f64>,
    error: Option<String>,
}

fn projections(
    spec: &ProjectionSpec,
    system: &SystemSpec,
    grid: &Grid,
    dim: usize,
) -> Result<ProjectionFamily, Failure> {
    if spec.is_spectral() {
        Ok(spectral_projections(&system.constant()?, grid, DEFAULT_GAP_TOL)?)
    } else {
        Ok(spec.build(dim)?)
    }
}

fn prefix_ends(grid: &Grid) -> Vec<f64> {
    let n = grid.len();
    let count = (n - 1).min(12);
    let mut ends: Vec<f64> = (1..=count).map(|k| grid.t(k * (n - 1) / count)).collect();
    ends.dedup();
    ends
}

pub fn green(args: &GreenArgs) -> Result<Artifacts, Failure> {
    let s = args.common.scale()?;
    let grid = args.common.grid(&s)?;
    let spec = args.system.parse::<SystemSpec>("system")?;
    let a = spec.build(&s)?;
    let proj_spec = args.projection.parse::<ProjectionSpec>("projection")?;
    let p = projections(&proj_spec, &spec, &grid, a.dim())?;
    let diagnostic = args.weight.is_some();
    let options = if diagnostic {
        GreenOptions { overflow_guard: f64::INFINITY, ..GreenOptions::default() }
    } else {
        GreenOptions::default()
    };
    let window: (f64, f64) = args.common.window.into();
    let g = GreenOperator::new(a.clone(), p.clone(), &s, window, args.common.h, options)?;
    let f = match &args.forcing {
        Some(j) => Some(j.parse::<ForcingSpec>("forcing")?.build(a.dim())?),
        None => None,
    };

    let mut report = GreenReportOut::default();
    let mut csv = None;
    let mut unweighted = || -> Result<(), chronoscale::Error> {
        report.norm_estimate = Some(g.norm_estimate()?);
        if let Some(f) = &f {
            let sol = g.apply(f)?;
            let check = verify_green(&g, f, args.tol)?;
            report.residual = Some(check.residual);
            report.pass = Some(check.pass);
            report.tail_bound = Some(sol.tail_bound());
            let x = sol.trajectory();
            let defects = residual_profile(sol.full(), g.system(), &f.sample(g.grid()))?;
            csv = Some(with_residual_column(&trajectory_csv(&x), &defects[..x.len()]));
        }
        Ok(())
    };
    match unweighted() {
        Ok(()) => {}
        Err(e) if diagnostic => report.errors.push(e.to_string()),
        Err(e) => return Err(e.into()),
    }
    if report.pass == Some(false) {
        let message = format!("green: residual {:e} exceeds gate {:e}", report.residual.unwrap_or(f64::NAN), args.tol);
        if !diagnostic {
            return Err(Failure::Gate(message));
        }
        csv = None;
        report.errors.push(message);
    }

    if let Some(w) = args.weight {
        let prefixes = prefix_ends(&grid)
            .into_iter()
            .map(|end| {
                let prefix = s.truncated(end).and_then(|t| {
                    GreenOperator::new(a.clone(), p.clone(), &t, (window.0, end), args.common.h, options)
                });
                match prefix.and_then(|g| g.weighted_norm_estimate(w.gamma, w.lambda)) {
                    Ok(v) => PrefixEstimate { end, estimate: Some(v), error: None },
                    Err(e) => PrefixEstimate { end, estimate: None, error: Some(e.to_string()) },
                }
            })
            .collect();
        let forcing_delta_integral = match &f {
            Some(f) => {
                let norms: Vec<f64> = f.sample(&grid).iter().map(|v| v.norm()).collect();
                Some(grid.delta_integral(&norms, grid.first(), grid.last())?)
            }
            None => None,
        };
        report.weighted = Some(WeightedOut {
            gamma: w.gamma,
            lambda: w.lambda,
            syndetic: s.is_syndetic(),
            prefixes,
            forcing_delta_integral,
        });
    }
    artifacts("green", csv, &report, false)
}

#[derive(Args, Clone, Debug, Deserialize, Serialize)]
pub struct BoundedArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub gate: Gate,
    /// Constant system `{"A": ...}` or `{"diag": ...}`.
    #[arg(long)]
    pub system: Json,
    /// Nonlinearity components (see `chronoscale list`).
    #[arg(long)]
    pub nonlin: Json,
    #[arg(long, default_value_t = default_tol())]
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[arg(long, default_value_t = default_max_iter())]
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Random probes per component when checking the declared constants.
    #[arg(long, default_value_t = default_spot_checks())]
    #[serde(default = "default_spot_checks")]
    pub spot_checks: usize,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
}

pub fn bounded(args: &BoundedArgs) -> Result<Artifacts, Failure> {
    let s = args.common.scale()?;
    let grid = args.common.grid(&s)?;
    let spec = args.system.parse::<SystemSpec>("system")?;
    let a = spec.constant()?;
    let model = args.nonlin.parse::<NonlinSpec>("nonlin")?.build(a.nrows(), grid.first())?;
    let p = spectral_projections(&a, &grid, DEFAULT_GAP_TOL)?;
    let g = GreenOperator::new(
        MatrixFunction::constant(a),
        p,
        &s,
        args.common.window.into(),
        args.common.h,
        GreenOptions::default(),
    )?;
    let greens = vec![g; model.len()];
    let options =
        SolveOptions { tol: args.tol, max_iter: args.max_iter, spot_checks: args.spot_checks, seed: args.seed };
    let (x, report): (Trajectory, ContractionReport) = fixed_point_solve(&greens, &model, &options)?;
    gated("bounded", trajectory_csv(&x), &report, report.residual, args.gate.gate, false)
}

#[derive(Args, Clone, Debug, Deserialize, Serialize)]
pub struct DecayArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub gate: Gate,
    /// `{"B": [...], "alpha", "beta", "gamma", "c1", "c2", "h"}`.
    #[arg(long)]
    pub model: Json,
    #[arg(long, default_value_t = default_tol())]
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[arg(long, default_value_t = default_max_iter())]
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
}

pub fn decay(args: &DecayArgs) -> Result<Artifacts, Failure> {
    let s = args.common.scale()?;
    let spec = args.model.parse::<DecaySpec>("model")?;
    let l = spec.transformation()?;
    let options = DecayOptions { tol: args.tol, max_iter: args.max_iter, seed: args.seed, ..DecayOptions::default() };
    let (x, report): (Trajectory, DecayReport) = regular_decay_solve(
        &spec.b,
        l.as_ref(),
        &spec.model(),
        &s,
        args.common.window.into(),
        args.common.h,
        &options,
    )?;
    gated("decay", trajectory_csv(&x), &report, report.residual, args.gate.gate, false)
}

#[derive(Args, Clone, Debug, Deserialize, Serialize)]
pub struct LyapArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub system: Json,
    /// Use `det(I + μA)/μ` for `α(t)` instead of `(det(I + μA) - 1)/μ`.
    #[arg(long)]
    #[serde(default)]
    pub literal_alpha: bool,
}

#[derive(Serialize)]
struct LyapReport {
    exponents: Vec<f64>,
    bands: Vec<f64>,
    #[serde(rename = "S")]
    s: f64,
    /// `Υ[e_{α₁⊕…⊕αₙ}]`.
    sum_exponent: f64,
    /// `Υ[e_α]`.
    alpha_exponent: f64,
    defect: f64,
    band: f64,
    alpha_form: AlphaForm,
}

pub fn lyap(args: &LyapArgs) -> Result<Artifacts, Failure> {
    let s = args.common.scale()?;
    let grid = args.common.grid(&s)?;
    let a = args.system.parse::<SystemSpec>("system")?.build(&s)?;
    let alpha_form = if args.literal_alpha { AlphaForm::Literal } else { AlphaForm::Limit };
    let options = ExponentOptions { alpha_form, ..ExponentOptions::default() };
    let phi = fundamental_system(&a, &grid)?;
    let d = regularity_defect(&a, &phi, &s, &options)?;
    let report = LyapReport {
        exponents: d.exponents.exponents.clone(),
        bands: d.exponents.bands.clone(),
        s: d.exponents.sum,
        sum_exponent: d.lhs,
        alpha_exponent: d.rhs,
        defect: d.defect,
        band: d.band,
        alpha_form,
    };
    artifacts("lyap", None, &report, false)
}

pub fn list() -> Result<Artifacts, Failure> {
    artifacts("list", None, &crate::catalog::catalog(), false)
}
