use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use orderfx::predictors::{empirical_best_from_laws, predict_shen_louis_laws};
use orderfx::risk::{evaluate, search_gamma_opt};
use orderfx::stream::{Purpose, StreamKey};
use orderfx::{theory, DistKind, Metric, MonteCarlo, PredictorSpec};
use orderfx_bench::{laws, model};

fn closed_form(c: &mut Criterion) {
    c.bench_function("psi", |b| b.iter(|| theory::psi(black_box(0.8)).unwrap()));
    c.bench_function("threshold_c", |b| b.iter(|| theory::threshold_c().unwrap()));
}

fn predictors(c: &mut Criterion) {
    let config = model(100, 0.5);
    let normal = laws(&config, DistKind::Normal, 1);
    let laplace = laws(&config, DistKind::Laplace, 1);
    let mut group = c.benchmark_group("predict_m100");
    group.bench_function("shen_louis_normal", |b| b.iter(|| predict_shen_louis_laws(black_box(&normal)).unwrap()));
    group.bench_function("shen_louis_laplace", |b| b.iter(|| predict_shen_louis_laws(black_box(&laplace)).unwrap()));
    group.bench_function("empirical_best_k1000", |b| {
        b.iter_batched(
            || StreamKey::new(2, 0).rng(Purpose::Posterior, 0),
            |mut rng| empirical_best_from_laws(&normal, 1000, &mut rng).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn risk(c: &mut Criterion) {
    let config = model(100, 0.5);
    let mut group = c.benchmark_group("risk_m100");
    group.sample_size(10);
    group.bench_function("search_1000_reps", |b| {
        b.iter(|| search_gamma_opt(&config, 0.001, &MonteCarlo::new(1000, 3)).unwrap())
    });
    group.bench_function("evaluate_direct_1000_reps", |b| {
        b.iter(|| {
            evaluate(&config, &[PredictorSpec::Direct], &[Metric::TotalOrderedLoss], &MonteCarlo::new(1000, 3)).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, closed_form, predictors, risk);
criterion_main!(benches);
