use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gpsfilt::{kalman, mlp, parfir, wiener};
use gpsfilt_bench::{filter, kalman_model, trained_mlp, trajectory};

fn fir_parallelism(c: &mut Criterion) {
    let traj = trajectory();
    let mut group = c.benchmark_group("fir_apply");
    for m in wiener::REDUCED_LENGTHS.iter().copied().chain([wiener::FULL_LENGTH]) {
        let f = filter(&traj, m);
        group.bench_with_input(BenchmarkId::new("serial", m), &f, |b, f| {
            b.iter(|| wiener::apply(f, black_box(traj.measured())))
        });
        for order in [2, 3] {
            let mut engine = parfir::BlockFirEngine::new(&f, order).unwrap();
            group.bench_function(BenchmarkId::new(format!("par{order}"), m), |b| {
                b.iter(|| engine.run(black_box(traj.measured())))
            });
        }
    }
    group.finish();
}

fn wiener_design(c: &mut Criterion) {
    let traj = trajectory();
    let mut group = c.benchmark_group("wiener_design");
    for m in [wiener::FULL_LENGTH, 135, 90] {
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| {
            b.iter(|| wiener::design_from_trajectory(black_box(&traj), m).unwrap())
        });
    }
    group.finish();
}

fn kalman_run(c: &mut Criterion) {
    let traj = trajectory();
    let model = kalman_model(&traj);
    c.bench_function("kalman_run", |b| {
        b.iter(|| kalman::run(black_box(&traj), &model).unwrap())
    });
}

fn mlp_eval(c: &mut Criterion) {
    let traj = trajectory();
    let params = trained_mlp(&traj);
    c.bench_function("mlp_second_half", |b| {
        b.iter(|| mlp::predict_second_half(&params, black_box(traj.measured())))
    });
}

criterion_group!(benches, fir_parallelism, wiener_design, kalman_run, mlp_eval);
criterion_main!(benches);
