//! Hot-path benchmarks: the RHS kernel, a one-day integration, a full Bode
//! sweep, and water-filling on a dense grid. Run with `cargo bench`.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use gutbrain_core::capacity::{water_fill_on_grid, NoiseModel};
use gutbrain_core::equilibrium::analyze_operating_point;
use gutbrain_core::input::InputProfile;
use gutbrain_core::model::{default_initial_state, rhs_generic, CircadianDrive};
use gutbrain_core::{freq, integrator, IntegratorConfig, ModelParameters};

fn bench_rhs(c: &mut Criterion) {
    let p = ModelParameters::default();
    let x = default_initial_state().as_array();
    c.bench_function("rhs_eval", |b| {
        b.iter(|| {
            rhs_generic(
                black_box(&x),
                black_box(&x),
                black_box(&x),
                black_box(0.1),
                black_box(1.2),
                &p,
            )
        })
    });
}

fn bench_integrate_day(c: &mut Criterion) {
    let p = ModelParameters::default();
    let drive = CircadianDrive::default();
    let input = InputProfile::Constant { baseline: 0.1 };
    let history = integrator::HistoryInit::Constant(default_initial_state().as_array());
    let cfg = IntegratorConfig {
        horizon: 1440.0,
        ..IntegratorConfig::default()
    };
    c.bench_function("integrate_one_day", |b| {
        b.iter(|| integrator::integrate(&p, &drive, &input, &history, black_box(&cfg)).unwrap())
    });
}

fn bench_bode(c: &mut Criterion) {
    let p = ModelParameters::default();
    let drive = CircadianDrive::default();
    let sys = analyze_operating_point(&p, &drive, 0.1).unwrap();
    c.bench_function("bode_400_points", |b| {
        b.iter(|| freq::bode(black_box(&sys), 1e-6, 1.0, 400).unwrap())
    });
}

fn bench_water_fill(c: &mut Criterion) {
    let n = 512;
    let grid: Vec<f64> = (0..n).map(|i| 1e-4 + i as f64 * (1.0 - 1e-4) / (n - 1) as f64).collect();
    let mut gains: Vec<f64> = (0..n).map(|i| 9.0 / (1.0 + 0.02 * i as f64)).collect();
    // Flat tail: a deliberate band edge rather than a truncated roll-off.
    gains[n - 1] = gains[n - 2];
    let noise = NoiseModel::default();
    c.bench_function("water_fill_512_bins", |b| {
        b.iter(|| water_fill_on_grid(black_box(&grid), black_box(&gains), &noise, 1e-2).unwrap())
    });
}

criterion_group!(
    benches,
    bench_rhs,
    bench_integrate_day,
    bench_bode,
    bench_water_fill
);
criterion_main!(benches);
