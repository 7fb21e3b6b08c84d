use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use frechet_core::length::gromov_length_with;
use frechet_core::models::CurveSpec;
use frechet_core::operators::{dyadic_standard, rbound_estimate, LinearMapModel, ProbePlan};
use frechet_core::{Execution, GradedPoint};
use std::f64::consts::TAU;
use std::hint::black_box;

const MODES: [(&str, Execution); 2] =
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn rbound(c: &mut Criterion) {
    let cfg = dyadic_standard(32);
    let plan = ProbePlan::sequences(32, 7, 4000);
    let op = LinearMapModel::identity_plus(-0.5, LinearMapModel::DownShift);
    let mut group = c.benchmark_group("rbound_estimate");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| rbound_estimate(&op, &cfg, 0.5, black_box(&plan), exec).unwrap())
        });
    }
    group.finish();
}

fn gromov(c: &mut Criterion) {
    let cfg = dyadic_standard(16);
    let u = GradedPoint::sequence((0..16).map(|i| 1.0 / (i as f64 + 1.0)).collect());
    let w = GradedPoint::sequence((0..16).map(|i| if i % 3 == 0 { 0.5 } else { 0.0 }).collect());
    let (u2, w2) = (u.clone(), w.clone());
    let curve = CurveSpec::closed(
        move |t| w.scaled(t).axpy((TAU * t).cos(), &u).unwrap(),
        move |t| w2.axpy(-TAU * (TAU * t).sin(), &u2).unwrap(),
        (0.0, 1.0),
    );
    let mut group = c.benchmark_group("gromov_refinement");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| gromov_length_with(black_box(&curve), &cfg, 1e-12, 16, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, rbound, gromov);
criterion_main!(benches);
