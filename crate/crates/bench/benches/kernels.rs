use chronoscale::hilger::hilger_exp;
use chronoscale::linsys::step_ivp;
use chronoscale::solver::{fixed_point_solve, SolveOptions};
use chronoscale::ScalarCoefficient;
use chronoscale_bench::{grid, hyperbolic_system, oscillating_forcing, scalar_green, scales, sine_model};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;
use std::hint::black_box;

fn bench_hilger_exp(c: &mut Criterion) {
    let mut group = c.benchmark_group("hilger_exp");
    for (name, scale, h) in scales() {
        let g = grid(&scale, 100.0, h);
        let p = ScalarCoefficient::from_fn(&g, |t| -0.3 + 0.1 * t.sin());
        let end = g.last();
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| hilger_exp(black_box(&p), end, 0.0, &g).unwrap())
        });
    }
    group.finish();
}

fn bench_step_ivp(c: &mut Criterion) {
    let mut group = c.benchmark_group("step_ivp");
    let a = hyperbolic_system();
    let f = oscillating_forcing(2);
    let x0 = DVector::from_element(2, 1.0);
    for (name, scale, h) in scales() {
        let g = grid(&scale, 50.0, h);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| step_ivp(&a, &f, 0.0, black_box(&x0), &g).unwrap())
        });
    }
    group.finish();
}

fn bench_green_norm(c: &mut Criterion) {
    let mut group = c.benchmark_group("green_norm_estimate");
    group.sample_size(10);
    for (name, scale, h) in scales() {
        let step = h.max(0.05);
        let op = scalar_green(&scale, 40.0, step);
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| op.norm_estimate().unwrap()));
    }
    group.finish();
}

fn bench_fixed_point(c: &mut Criterion) {
    let mut group = c.benchmark_group("fixed_point_solve");
    group.sample_size(10);
    let model = sine_model();
    let options = SolveOptions::default();
    for (name, scale, h) in scales() {
        let greens = [scalar_green(&scale, 40.0, h.max(0.05))];
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fixed_point_solve(&greens, &model, &options).unwrap())
        });
    }
    group.finish();
}

criterion_group!(kernels, bench_hilger_exp, bench_step_ivp, bench_green_norm, bench_fixed_point);
criterion_main!(kernels);
