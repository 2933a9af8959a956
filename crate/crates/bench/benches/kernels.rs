use std::hint::black_box;

use blowup_core::mode_ode::{integrate_bounded, ModeOde, StepControl};
use blowup_core::pde::{build_initial_data, perturbation, SolverConfig};
use blowup_core::similarity::{decompose, residual_r};
use blowup_core::{project_modes, HermiteBasis, Params, ProfileConstants, QuadratureRule};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

fn constants() -> ProfileConstants {
    ProfileConstants::derive(&Params::new(5.0, 1.0).unwrap()).unwrap()
}

fn bench_constants(cr: &mut Criterion) {
    let params = Params::new(5.0, 1.0).unwrap();
    cr.bench_function("derive_constants", |b| {
        b.iter(|| ProfileConstants::derive(black_box(&params)).unwrap())
    });
}

fn bench_imex(cr: &mut Criterion) {
    let c = constants();
    let cfg = SolverConfig::for_horizon(&c, 50.0, 500.0);
    let w = build_initial_data(&c, 50.0, 0.3, -0.2, 20.0, cfg.k, cfg.y_max, cfg.n).unwrap();
    let mut stepper = blowup_core::pde::ImexStepper::new(&c, cfg.y_max, cfg.n, cfg.boundary).unwrap();
    let mut group = cr.benchmark_group("imex");
    group.sample_size(20);
    group.bench_function(format!("step_n{}", cfg.n), |b| {
        b.iter_batched_ref(
            || w.values().to_vec(),
            |v| stepper.step(v, 50.0, 1e-3).unwrap(),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

fn bench_decompose(cr: &mut Criterion) {
    let c = constants();
    let cfg = SolverConfig::for_horizon(&c, 50.0, 500.0);
    let w = build_initial_data(&c, 50.0, 0.3, -0.2, 20.0, cfg.k, cfg.y_max, cfg.n).unwrap();
    let v = perturbation(&w, &c).unwrap();
    let basis = HermiteBasis::new(2).unwrap();
    let quad = QuadratureRule::standard();
    cr.bench_function("decompose", |b| {
        b.iter(|| decompose(black_box(&v), &c, cfg.k, &basis, &quad).unwrap())
    });
    let basis6 = HermiteBasis::new(6).unwrap();
    cr.bench_function("project_modes_deg6", |b| {
        b.iter(|| project_modes(black_box(&v), &basis6, &quad).unwrap())
    });
}

fn bench_residual(cr: &mut Criterion) {
    let c = constants();
    cr.bench_function("residual_r_20001", |b| {
        b.iter(|| residual_r(&c, black_box(200.0), 20.0 * 200f64.powf(c.beta), 20001).unwrap())
    });
}

fn bench_ode(cr: &mut Criterion) {
    let c = constants();
    let ode = ModeOde::new(&c);
    let control = StepControl::default();
    let w2 = -c.big_b * 100f64.powf(-1.0 / (c.q - 1.0));
    let mut group = cr.benchmark_group("mode_ode");
    group.sample_size(10);
    group.bench_function("integrate_bounded_1e2_1e4", |b| {
        b.iter(|| integrate_bounded(&c, &ode, 100.0, black_box(w2), 1e4, &control).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_constants, bench_imex, bench_decompose, bench_residual, bench_ode);
criterion_main!(benches);
