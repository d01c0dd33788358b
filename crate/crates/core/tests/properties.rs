use chronoscale::dichotomy::verify_green;
use chronoscale::hilger::{hilger_exp, neg, oplus, regressivity_class, Regressivity};
use chronoscale::linsys::{cauchy_matrix, step_ivp, variation_of_constants};
use chronoscale::lyapunov::{alpha_value, exact_exponent_check, ts_exponent, AlphaForm, ExponentOptions, Verdict};
use chronoscale::solver::{extend_forcing_hat, fixed_point_solve, scalar_green_gamma, SolveOptions};
use chronoscale::timescale::RightKind;
use chronoscale::{
    Forcing, GreenOperator, GreenOptions, Grid, MatrixFunction, NonlinearityModel, ProjectionFamily, Quadrature,
    ScalarCoefficient, TimeScale, Trajectory,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn scale_from(kind: u8, seed: u64) -> (TimeScale, f64) {
    match kind % 5 {
        0 => (TimeScale::integers(1.0).unwrap(), 1.0),
        1 => (TimeScale::integers(0.5).unwrap(), 0.5),
        2 => (TimeScale::union(), 0.05),
        3 => (TimeScale::random_syndetic(seed, 1.0).unwrap(), 0.05),
        _ => (TimeScale::real(), 0.05),
    }
}

fn scale() -> impl Strategy<Value = (TimeScale, f64)> {
    (0u8..5, 0u64..1000).prop_map(|(k, s)| scale_from(k, s))
}

fn rel(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

fn forcing(c: [f64; 3]) -> Forcing {
    Forcing::scalar(move |t| c[0] + c[1] * (c[2] * t).sin())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jumps_and_classification((s, h) in scale(), t0 in 0.0f64..15.0) {
        let grid = s.grid((0.0, 20.0), h).unwrap();
        for p in grid.points().iter().filter(|p| p.t >= t0).take(50) {
            let sigma = s.forward_jump(p.t).unwrap();
            prop_assert!(sigma >= p.t);
            let (right, _) = s.classify(p.t).unwrap();
            prop_assert_eq!(right == RightKind::RightScattered, s.graininess(p.t).unwrap() > 0.0);
            prop_assert!(s.backward_jump(p.t).unwrap() <= p.t);
        }
    }

    #[test]
    fn integral_additivity((s, h) in scale(), split in 0.1f64..0.9, c in prop::array::uniform3(-2.0f64..2.0)) {
        let grid = s.grid((0.0, 20.0), h).unwrap();
        let f: Vec<f64> = grid.times().iter().map(|t| c[0] + c[1] * t + c[2] * t * t).collect();
        let mid = grid.t(((grid.len() - 1) as f64 * split) as usize);
        let (a, b) = (grid.first(), grid.last());
        let whole = grid.delta_integral(&f, a, b).unwrap();
        let parts = grid.delta_integral(&f, a, mid).unwrap() + grid.delta_integral(&f, mid, b).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-12 * whole.abs().max(1.0));
    }

    #[test]
    fn sigma_identity_at_scattered_points(step in prop::sample::select(vec![0.5, 1.0, 2.0]), c in prop::array::uniform3(-2.0f64..2.0)) {
        let s = TimeScale::integers(step).unwrap();
        let grid = s.grid((0.0, 20.0), step).unwrap();
        let f: Vec<f64> = grid.times().iter().map(|t| c[0] + c[1] * t + c[2] * t * t).collect();
        for i in 0..grid.len() - 1 {
            let d = grid.delta_derivative(&f, i).unwrap();
            prop_assert!((f[i + 1] - (f[i] + grid.mu(i) * d)).abs() <= 1e-12 * f[i + 1].abs().max(1.0));
        }
        let total: f64 = (0..grid.len() - 1).map(|i| grid.mu(i) * grid.delta_derivative(&f, i).unwrap()).sum();
        prop_assert!((total - (f[grid.len() - 1] - f[0])).abs() <= 1e-10 * f[grid.len() - 1].abs().max(1.0));
    }

    #[test]
    fn hilger_identities((s, h) in scale(), a in -0.6f64..1.5, b in -0.6f64..1.5, i in 0usize..1000, j in 0usize..1000) {
        let grid = s.grid((0.0, 15.0), h).unwrap();
        let (it, is) = (i % grid.len(), j % grid.len());
        let (t, u) = (grid.t(it), grid.t(is));
        let p = ScalarCoefficient::from_fn(&grid, move |t| a + 0.1 * t.sin());
        let q = ScalarCoefficient::constant(&grid, b);
        prop_assert_eq!(hilger_exp(&p, t, t, &grid).unwrap(), 1.0);
        prop_assert_eq!(hilger_exp(&ScalarCoefficient::constant(&grid, 0.0), t, u, &grid).unwrap(), 1.0);
        let nq = neg(&q, &grid).unwrap();
        prop_assert!(rel(1.0 / hilger_exp(&q, t, u, &grid).unwrap(), hilger_exp(&nq, t, u, &grid).unwrap()) <= 1e-9);
        // monotonicity for p <= q in the positively regressive class
        let lo = ScalarCoefficient::constant(&grid, a.min(b));
        let hi = ScalarCoefficient::constant(&grid, a.max(b));
        let (t1, t0) = if t >= u { (t, u) } else { (u, t) };
        let (el, eh) = (hilger_exp(&lo, t1, t0, &grid).unwrap(), hilger_exp(&hi, t1, t0, &grid).unwrap());
        prop_assert!(0.0 < el && el <= eh * (1.0 + 1e-12));
    }

    #[test]
    fn uniform_separation((s, h) in scale(), a in -0.5f64..1.0, eps in 0.01f64..1.0) {
        let grid = s.grid((0.0, 15.0), h).unwrap();
        let p = ScalarCoefficient::from_fn(&grid, move |t| a + 0.2 * t.cos());
        let class = regressivity_class(&p, &grid);
        prop_assert_eq!(class.class, Regressivity::UniformlyPositivelyRegressive);
        let pe = oplus(&p, &ScalarCoefficient::constant(&grid, eps), &grid).unwrap();
        for (x, y) in p.values().iter().zip(pe.values()) {
            prop_assert!(*y >= x + eps * class.witness - 1e-12);
        }
    }

    #[test]
    fn cocycle_and_scalar_consistency((s, h) in scale(), a in -0.5f64..0.8, i in 0usize..1000, j in 0usize..1000, k in 0usize..1000) {
        let grid = s.grid((0.0, 12.0), h).unwrap();
        let mut idx = [i % grid.len(), j % grid.len(), k % grid.len()];
        idx.sort_unstable();
        let [tau, sm, t] = idx.map(|i| grid.t(i));
        let am = MatrixFunction::from_fn(2, 2.0, move |t| DMatrix::from_row_slice(2, 2, &[a, (0.5 * t).sin(), -0.3, a - 0.2]));
        let lhs = cauchy_matrix(&am, t, sm, &grid).unwrap() * cauchy_matrix(&am, sm, tau, &grid).unwrap();
        let rhs = cauchy_matrix(&am, t, tau, &grid).unwrap();
        prop_assert!((&lhs - &rhs).norm() <= 1e-8 * rhs.norm().max(1.0));
        // on scattered-only grids the product form is exact in both
        if !grid.points().iter().any(|p| p.mu == 0.0 && p.t < grid.last()) {
            let p = ScalarCoefficient::constant(&grid, a);
            let phi = cauchy_matrix(&MatrixFunction::scalar(a), t, tau, &grid).unwrap()[(0, 0)];
            prop_assert!(rel(phi, hilger_exp(&p, t, tau, &grid).unwrap()) <= 1e-9);
        }
    }

    #[test]
    fn stepping_is_linear_and_deterministic((s, h) in scale(), c in prop::array::uniform3(-1.0f64..1.0), d in prop::array::uniform3(-1.0f64..1.0), al in -2.0f64..2.0, be in -2.0f64..2.0) {
        let grid = s.grid((0.0, 10.0), h).unwrap();
        let a = MatrixFunction::scalar(-0.4);
        let zero = DVector::zeros(1);
        let (f, g) = (forcing(c), forcing(d));
        let xf = step_ivp(&a, &f, 0.0, &zero, &grid).unwrap();
        let xg = step_ivp(&a, &g, 0.0, &zero, &grid).unwrap();
        let xc = step_ivp(&a, &Forcing::combine(al, &f, be, &g), 0.0, &zero, &grid).unwrap();
        for k in 0..grid.len() {
            let lin = al * xf.samples()[k][0] + be * xg.samples()[k][0];
            prop_assert!((xc.samples()[k][0] - lin).abs() <= 1e-9 * lin.abs().max(1.0));
        }
        let again = step_ivp(&a, &f, 0.0, &zero, &grid).unwrap();
        prop_assert_eq!(xf.samples(), again.samples());
    }

    #[test]
    fn green_linearity_and_norm_bound((s, h) in scale(), c in prop::array::uniform3(-1.0f64..1.0), d in prop::array::uniform3(-1.0f64..1.0)) {
        let g = GreenOperator::new(MatrixFunction::scalar(-0.7), ProjectionFamily::identity(1), &s, (0.0, 30.0), h, GreenOptions::default()).unwrap();
        let (f, k) = (forcing(c), forcing(d));
        let xf = g.apply(&f).unwrap().trajectory();
        let xk = g.apply(&k).unwrap().trajectory();
        let xs = g.apply(&Forcing::combine(0.5, &f, -1.5, &k)).unwrap().trajectory();
        for i in 0..xs.len() {
            let lin = 0.5 * xf.samples()[i][0] - 1.5 * xk.samples()[i][0];
            prop_assert!((xs.samples()[i][0] - lin).abs() <= 1e-9 * lin.abs().max(1.0));
        }
        let norm = g.norm_estimate().unwrap();
        let fsup = f.sample(g.grid()).iter().map(|v| v.amax()).fold(0.0, f64::max);
        prop_assert!(xf.sup_norm() <= norm * fsup * (1.0 + 1e-9));
        prop_assert!(verify_green(&g, &f, 1e-5).unwrap().pass);
        // with P = E the operator is variation of constants from the left end
        let voc = variation_of_constants(g.system(), &f, 0.0, &DVector::zeros(1), &g.output_grid(), Quadrature::Simpson).unwrap();
        for (u, v) in xf.samples().iter().zip(voc.samples()) {
            prop_assert!((u[0] - v[0]).abs() <= 1e-9);
        }
    }

    #[test]
    fn contraction_bounds(h0 in 0.0f64..1.0, c0 in 0.0f64..0.4) {
        let z = TimeScale::integers(1.0).unwrap();
        let g = GreenOperator::new(MatrixFunction::scalar(-0.5), ProjectionFamily::identity(1), &z, (0.0, 60.0), 1.0, GreenOptions::default()).unwrap();
        let model = NonlinearityModel::new(1).with_component(h0 + c0, c0, move |t, x| DVector::from_element(1, c0 * x[0].sin() + h0 * t.cos()));
        let (x, r) = fixed_point_solve(&[g], &model, &SolveOptions::default()).unwrap();
        prop_assert!(r.converged && r.residual <= 1e-9);
        prop_assert!(x.sup_norm() <= r.a_priori_bound * (1.0 + 1e-6));
        prop_assert!(r.ratios.iter().skip(3).all(|&q| q <= r.lambda + 0.05));
    }

    #[test]
    fn forcing_hat_constant_ignores_f(kind in 0u8..4, seed in 0u64..100, c in prop::array::uniform3(-1.0f64..1.0), b in -1.0f64..1.0) {
        let (s, _) = scale_from(kind, seed);
        let base = extend_forcing_hat(|_| 1.0, b, &s, (0.0, 20.0), 0.3).unwrap();
        let hat = extend_forcing_hat(move |t| c[0] + c[1] * (c[2] * t).sin(), b, &s, (0.0, 20.0), 0.3).unwrap();
        prop_assert_eq!(base.constant(), hat.constant());
        for g in hat.gaps() {
            let exact = g.f_start * g.mu * (b * g.mu).exp();
            let integral = if b == 0.0 { g.value * g.mu } else { g.value * (b * g.mu).exp_m1() / b };
            prop_assert!((exact - integral).abs() <= 1e-10 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn scalar_green_is_linear(c in prop::array::uniform3(-1.0f64..1.0), d in prop::array::uniform3(-1.0f64..1.0)) {
        let z = TimeScale::integers(1.0).unwrap();
        let run = |k: [f64; 3], w: f64| {
            scalar_green_gamma(-(2f64.ln()), move |t| w * (k[0] + k[1] * (k[2] * t).sin()) * (-0.5 * t).exp(), 0.5, 0.3, &z, (0.0, 30.0), 1.0, 1e-8)
                .unwrap()
                .values
        };
        let (u, v) = (run(c, 1.0), run(d, 1.0));
        let w = scalar_green_gamma(
            -(2f64.ln()),
            move |t| (2.0 * (c[0] + c[1] * (c[2] * t).sin()) - (d[0] + d[1] * (d[2] * t).sin())) * (-0.5 * t).exp(),
            0.5, 0.3, &z, (0.0, 30.0), 1.0, 1e-8,
        ).unwrap().values;
        for k in 0..w.len() {
            prop_assert!((w[k] - (2.0 * u[k] - v[k])).abs() <= 1e-9);
        }
    }

    #[test]
    fn exponent_shift_invariance(seed in 0u64..50, c in -0.5f64..1.0, k in prop::sample::select(vec![-3.0, 0.01, 7.5, 1e4])) {
        let s = TimeScale::random_syndetic(seed, 1.0).unwrap();
        let grid = s.grid((0.0, 50.0), 0.05).unwrap();
        let p = ScalarCoefficient::constant(&grid, c);
        let e: Vec<f64> = grid.times().iter().map(|&t| hilger_exp(&p, t, 0.0, &grid).unwrap()).collect();
        let opts = ExponentOptions::default();
        let base = ts_exponent(&Trajectory::from_scalars(grid.clone(), &e).unwrap(), &s, &opts).unwrap();
        let scaled: Vec<f64> = e.iter().map(|v| k * v).collect();
        let shifted = ts_exponent(&Trajectory::from_scalars(grid.clone(), &scaled).unwrap(), &s, &opts).unwrap();
        prop_assert!((base.value - shifted.value).abs() <= base.band.max(shifted.band));
        for eps in [0.05, 0.1, 0.2] {
            let f = Trajectory::from_scalars(grid.clone(), &e).unwrap();
            prop_assert_eq!(exact_exponent_check(&f, base.value, eps).unwrap(), Verdict::True);
        }
    }
}

#[test]
fn alpha_tends_to_trace_on_shrinking_gaps() {
    let a = DMatrix::from_row_slice(3, 3, &[0.3, 1.0, -0.2, 0.0, -1.1, 0.5, 0.4, 0.0, 0.7]);
    let mut last = f64::INFINITY;
    for k in 0..14 {
        let s = TimeScale::integers(2f64.powi(-k)).unwrap();
        let grid: Grid = s.grid((0.0, 1.0), 2f64.powi(-k)).unwrap();
        let alpha = alpha_value(&a, grid.mu(0), AlphaForm::Limit);
        let err = (alpha - a.trace()).abs();
        assert!(err <= last + 1e-14, "k = {k}: {err} after {last}");
        last = err;
    }
    assert!(last < 1e-3);
}
