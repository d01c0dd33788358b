use crate::dichotomy::{spectral_projections, GreenOperator, GreenOptions, DEFAULT_GAP_TOL};
use crate::linalg::sup_norm;
use crate::linsys::{residual_on, MatrixFunction, Trajectory};
use crate::timescale::TimeScale;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

type Rule = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;

#[derive(Clone)]
struct Component {
    rule: Rule,
    h: f64,
    c: f64,
}

/// `a(t, x) = Σ_j g_j(t, x)` with declared `||g_j(·, 0)|| <= h_j` and
/// Lipschitz constants `c_j`.
#[derive(Clone)]
pub struct NonlinearityModel {
    dim: usize,
    components: Vec<Component>,
    ball_radius: Option<f64>,
}

impl fmt::Debug for NonlinearityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let constants: Vec<(f64, f64)> = self.components.iter().map(|c| (c.h, c.c)).collect();
        f.debug_struct("NonlinearityModel")
            .field("dim", &self.dim)
            .field("constants", &constants)
            .field("ball_radius", &self.ball_radius)
            .finish()
    }
}

impl NonlinearityModel {
    /// The model `a ≡ 0`.
    pub fn new(dim: usize) -> Self {
        NonlinearityModel { dim, components: Vec::new(), ball_radius: None }
    }

    pub fn with_component(
        mut self,
        h: f64,
        c: f64,
        g: impl Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.components.push(Component { rule: Arc::new(g), h, c });
        self
    }

    /// Constants are only claimed inside `||x|| <= r`; iterates leaving the
    /// ball are an error.
    pub fn with_ball(mut self, r: f64) -> Self {
        self.ball_radius = Some(r);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn ball_radius(&self) -> Option<f64> {
        self.ball_radius
    }

    pub fn h(&self, j: usize) -> f64 {
        self.components[j].h
    }

    pub fn c(&self, j: usize) -> f64 {
        self.components[j].c
    }

    pub fn component(&self, j: usize, t: f64, x: &DVector<f64>) -> DVector<f64> {
        (self.components[j].rule)(t, x)
    }

    pub fn eval(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for c in &self.components {
            out += (c.rule)(t, x);
        }
        out
    }

    /// Check the declared `h_j` and `c_j` on random points of `T × ball`.
    pub fn spot_check(&self, times: &[f64], radius: f64, samples: usize, seed: u64) -> Result<()> {
        if times.is_empty() {
            return Ok(());
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let scale = radius / (self.dim as f64).sqrt();
        let point =
            |rng: &mut rand_chacha::ChaCha8Rng| DVector::from_fn(self.dim, |_, _| rng.random_range(-1.0..=1.0) * scale);
        let zero = DVector::zeros(self.dim);
        for (j, c) in self.components.iter().enumerate() {
            for _ in 0..samples {
                let t = times[rng.random_range(0..times.len())];
                let g0 = (c.rule)(t, &zero);
                if g0.len() != self.dim {
                    return Err(Error::Dimension { expected: self.dim, got: g0.len() });
                }
                if g0.norm() > c.h * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::ConstantViolated(format!(
                        "component {j}: |g(t, 0)| = {} exceeds h = {} at t = {t}",
                        g0.norm(),
                        c.h
                    )));
                }
                let (x, y) = (point(&mut rng), point(&mut rng));
                let lhs = ((c.rule)(t, &x) - (c.rule)(t, &y)).norm();
                let rhs = c.c * (x - y).norm();
                if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::ConstantViolated(format!(
                        "component {j}: Lipschitz quotient {} exceeds c = {} at t = {t}",
                        lhs / (rhs / c.c),
                        c.c
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Stop when successive iterates differ by at most this (sup-norm).
    pub tol: f64,
    pub max_iter: usize,
    /// Random probes per component when spot-checking constants (0 skips).
    pub spot_checks: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 200, spot_checks: 64, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionReport {
    /// `L_j`, the Green-operator norm estimates.
    pub norms: Vec<f64>,
    pub beta: f64,
    pub lambda: f64,
    /// `β / (1 - λ)`.
    pub a_priori_bound: f64,
    pub iterations: usize,
    /// Sup-norm of the last update.
    pub update: f64,
    /// Successive update ratios.
    pub ratios: Vec<f64>,
    /// `tol · λ / (1 - λ)`.
    pub a_posteriori_error: f64,
    pub sup_norm: f64,
    pub residual: f64,
    pub tail_bound: f64,
    pub converged: bool,
}

/// `β = Σ L_j h_j`, `λ = Σ L_j c_j`.
pub fn constants_from_norms(norms: &[f64], model: &NonlinearityModel) -> Result<(f64, f64)> {
    if norms.len() != model.len() {
        return Err(Error::Dimension { expected: model.len(), got: norms.len() });
    }
    let beta = norms.iter().enumerate().map(|(j, l)| l * model.h(j)).sum();
    let lambda = norms.iter().enumerate().map(|(j, l)| l * model.c(j)).sum();
    Ok((beta, lambda))
}

/// `(β, λ)` with `L_j` from the operators' norm estimates.
pub fn contraction_constants(greens: &[GreenOperator], model: &NonlinearityModel) -> Result<(f64, f64)> {
    let norms = greens.iter().map(GreenOperator::norm_estimate).collect::<Result<Vec<_>>>()?;
    constants_from_norms(&norms, model)
}

/// Banach iteration `x ← Σ_j 𝓛_j g_j(·, x)` from `x⁰ ≡ 0`.
///
/// Operator `j` acts on component `j`; all operators must belong to the same
/// linear system and share one computation grid.
pub fn fixed_point_solve(
    greens: &[GreenOperator],
    model: &NonlinearityModel,
    options: &SolveOptions,
) -> Result<(Trajectory, ContractionReport)> {
    if greens.len() != model.len() {
        return Err(Error::Dimension { expected: model.len(), got: greens.len() });
    }
    let n = model.dim();
    let Some(first) = greens.first() else {
        return Err(Error::InvalidParameter("at least one Green operator is needed".into()));
    };
    if first.system().dim() != n {
        return Err(Error::Dimension { expected: n, got: first.system().dim() });
    }
    if greens.iter().any(|g| g.grid() != first.grid() || g.output_len() != first.output_len()) {
        return Err(Error::InvalidParameter("Green operators must share one grid".into()));
    }
    let norms = greens.iter().map(GreenOperator::norm_estimate).collect::<Result<Vec<_>>>()?;
    let (beta, lambda) = constants_from_norms(&norms, model)?;
    if lambda >= 1.0 {
        return Err(Error::NotContraction(lambda));
    }
    let a_priori_bound = beta / (1.0 - lambda);
    let grid = first.grid();
    if options.spot_checks > 0 {
        let radius = model.ball_radius().unwrap_or(a_priori_bound + 1.0).max(1e-6);
        model.spot_check(&grid.times(), radius, options.spot_checks, options.seed)?;
    }

    let forcing = |x: &[DVector<f64>], j: usize| -> Vec<DVector<f64>> {
        grid.points().iter().zip(x).map(|(p, xi)| model.component(j, p.t, xi)).collect()
    };
    let mut x = vec![DVector::zeros(n); grid.len()];
    let mut ratios = Vec::new();
    let mut update = f64::INFINITY;
    let mut tail_bound: f64 = 0.0;
    let mut iterations = 0;
    while iterations < options.max_iter {
        let mut next = vec![DVector::zeros(n); grid.len()];
        for (j, g) in greens.iter().enumerate() {
            let sol = g.apply_samples(&forcing(&x, j))?;
            tail_bound = tail_bound.max(sol.tail_bound());
            for (acc, v) in next.iter_mut().zip(sol.full().samples()) {
                *acc += v;
            }
        }
        let diff: Vec<DVector<f64>> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let step = sup_norm(&diff);
        if update.is_finite() && update > 0.0 {
            ratios.push(step / update);
        }
        update = step;
        x = next;
        iterations += 1;
        if let Some(r) = model.ball_radius() {
            let norm = sup_norm(&x);
            if norm > r {
                return Err(Error::BallEscape { norm, radius: r });
            }
        }
        if update <= options.tol {
            break;
        }
    }
    if update > options.tol {
        return Err(Error::NotConverged { iterations, update });
    }
    let a_samples: Vec<DVector<f64>> = grid.points().iter().zip(&x).map(|(p, xi)| model.eval(p.t, xi)).collect();
    let full = Trajectory::new(grid.clone(), x)?;
    let residual = residual_on(&full, first.system(), &a_samples, first.output_len())?;
    let solution = full.truncated(first.output_len());
    let report = ContractionReport {
        norms,
        beta,
        lambda,
        a_priori_bound,
        iterations,
        update,
        ratios,
        a_posteriori_error: options.tol * lambda / (1.0 - lambda),
        sup_norm: solution.sup_norm(),
        residual,
        tail_bound,
        converged: true,
    };
    Ok((solution, report))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HyperbolicReport {
    /// `||𝓛||` for the spectral splitting.
    pub green_norm: f64,
    pub lambda0: f64,
    pub beta0: f64,
    /// `β₀||𝓛|| / (1 - λ₀||𝓛||)`.
    pub bound: f64,
    pub contraction: ContractionReport,
}

/// Bounded solution of `x^Δ = A x + a(t, x)` for constant hyperbolic `A` and
/// `||a(t, x)|| <= λ₀||x|| + β₀`, with `λ₀` also serving as the Lipschitz
/// constant of `a`. Only the contraction regime `λ₀||𝓛|| < 1` is attempted.
#[allow(clippy::too_many_arguments)]
pub fn hyperbolic_bounded_solve(
    a: &DMatrix<f64>,
    scale: &TimeScale,
    window: (f64, f64),
    h: f64,
    nonlinearity: impl Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    lambda0: f64,
    beta0: f64,
    options: &SolveOptions,
) -> Result<(Trajectory, HyperbolicReport)> {
    let base = scale.grid(window, h)?;
    let projections = spectral_projections(a, &base, DEFAULT_GAP_TOL)?;
    let green = GreenOperator::new(
        MatrixFunction::constant(a.clone()),
        projections,
        scale,
        window,
        h,
        GreenOptions::default(),
    )?;
    let green_norm = green.norm_estimate()?;
    let lambda = lambda0 * green_norm;
    if lambda >= 1.0 {
        return Err(Error::NotContraction(lambda));
    }
    let model = NonlinearityModel::new(a.nrows()).with_component(beta0, lambda0, nonlinearity);
    let (x, contraction) = fixed_point_solve(std::slice::from_ref(&green), &model, options)?;
    let report =
        HyperbolicReport { green_norm, lambda0, beta0, bound: beta0 * green_norm / (1.0 - lambda), contraction };
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dichotomy::ProjectionFamily;

    fn scalar_model() -> NonlinearityModel {
        NonlinearityModel::new(1).with_component(0.5, 0.1, |_, x| DVector::from_element(1, 0.1 * x[0].sin() + 0.5))
    }

    #[test]
    fn constants_arithmetic() {
        let m = scalar_model();
        assert_eq!(constants_from_norms(&[2.0], &m).unwrap(), (1.0, 0.2));
        assert_eq!(constants_from_norms(&[], &NonlinearityModel::new(1)).unwrap(), (0.0, 0.0));
        let two =
            NonlinearityModel::new(1).with_component(0.5, 0.1, |_, x| x * 0.0).with_component(0.3, 0.2, |_, x| x * 0.0);
        let (b, l) = constants_from_norms(&[2.0, 1.0], &two).unwrap();
        assert!((b - 1.3).abs() < 1e-15 && (l - 0.4).abs() < 1e-15);
    }

    #[test]
    fn scalar_contraction_on_integers() {
        let z = TimeScale::integers(1.0).unwrap();
        let g = GreenOperator::new(
            MatrixFunction::scalar(-0.5),
            ProjectionFamily::identity(1),
            &z,
            (0.0, 60.0),
            1.0,
            GreenOptions::default(),
        )
        .unwrap();
        let (x, r) = fixed_point_solve(&[g], &scalar_model(), &SolveOptions::default()).unwrap();
        assert!((r.lambda - 0.2).abs() < 1e-6 && (r.beta - 1.0).abs() < 1e-6);
        assert!(r.residual <= 1e-9, "{r:?}");
        assert!(r.sup_norm <= r.a_priori_bound * (1.0 + 1e-6));
        assert!(r.ratios.iter().skip(3).all(|&q| q <= r.lambda + 0.05), "{:?}", r.ratios);
        // level solves x = 2(0.1 sin x + 0.5)
        let mut level: f64 = 1.0;
        for _ in 0..200 {
            level = 2.0 * (0.1 * level.sin() + 0.5);
        }
        assert!((x.samples().last().unwrap()[0] - level).abs() < 1e-9);
    }

    #[test]
    fn zero_nonlinearity_gives_zero() {
        let z = TimeScale::integers(1.0).unwrap();
        let g = GreenOperator::new(
            MatrixFunction::scalar(-0.5),
            ProjectionFamily::identity(1),
            &z,
            (0.0, 20.0),
            1.0,
            GreenOptions::default(),
        )
        .unwrap();
        let model = NonlinearityModel::new(1).with_component(0.0, 0.0, |_, _| DVector::zeros(1));
        let (x, r) = fixed_point_solve(&[g], &model, &SolveOptions::default()).unwrap();
        assert_eq!(x.sup_norm(), 0.0);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn equilibrium_on_the_line() {
        let g = GreenOperator::new(
            MatrixFunction::scalar(-1.0),
            ProjectionFamily::identity(1),
            &TimeScale::real(),
            (0.0, 40.0),
            0.01,
            GreenOptions::default(),
        )
        .unwrap();
        let model = NonlinearityModel::new(1).with_component(0.5, 0.0, |_, _| DVector::from_element(1, 0.5));
        let (x, r) = fixed_point_solve(&[g], &model, &SolveOptions::default()).unwrap();
        assert!((x.samples().last().unwrap()[0] - 0.5).abs() < 1e-9);
        assert!(r.residual < 1e-6);
    }

    #[test]
    fn refusals() {
        let z = TimeScale::integers(1.0).unwrap();
        let g = GreenOperator::new(
            MatrixFunction::scalar(-0.5),
            ProjectionFamily::identity(1),
            &z,
            (0.0, 20.0),
            1.0,
            GreenOptions::default(),
        )
        .unwrap();
        let strong = NonlinearityModel::new(1).with_component(0.0, 0.6, |_, x| x * 0.6);
        assert!(matches!(
            fixed_point_solve(std::slice::from_ref(&g), &strong, &SolveOptions::default()),
            Err(Error::NotContraction(_))
        ));
        let lying = NonlinearityModel::new(1).with_component(0.0, 0.1, |_, x| x * 0.3);
        assert!(matches!(
            fixed_point_solve(std::slice::from_ref(&g), &lying, &SolveOptions::default()),
            Err(Error::ConstantViolated(_))
        ));
        let few = SolveOptions { max_iter: 2, ..Default::default() };
        assert!(matches!(
            fixed_point_solve(std::slice::from_ref(&g), &scalar_model(), &few),
            Err(Error::NotConverged { .. })
        ));
        let tight = scalar_model().with_ball(0.5);
        assert!(matches!(fixed_point_solve(&[g], &tight, &SolveOptions::default()), Err(Error::BallEscape { .. })));
    }

    #[test]
    fn hyperbolic_examples() {
        let z = TimeScale::integers(1.0).unwrap();
        let (x, r) = hyperbolic_bounded_solve(
            &DMatrix::from_element(1, 1, -0.5),
            &z,
            (0.0, 60.0),
            1.0,
            |_, x| DVector::from_element(1, 0.1 * x[0].sin() + 0.5),
            0.1,
            0.5,
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(r.contraction.residual < 1e-9);
        assert!(x.sup_norm() <= r.bound);

        let a = DMatrix::from_diagonal(&DVector::from_column_slice(&[-0.5, 1.0]));
        let (x, r) = hyperbolic_bounded_solve(
            &a,
            &z,
            (0.0, 40.0),
            1.0,
            |_, x| DVector::from_column_slice(&[0.05 * x[1].cos() + 0.2, 0.05 * x[0].sin() + 0.2]),
            0.05,
            0.33,
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(r.contraction.residual <= 1e-8, "{r:?}");
        assert!(x.sup_norm() <= r.bound);

        let refused =
            hyperbolic_bounded_solve(&a, &z, (0.0, 40.0), 1.0, |_, x| x.clone(), 1.0, 0.0, &SolveOptions::default());
        assert!(matches!(refused, Err(Error::NotContraction(_))));
    }
}
