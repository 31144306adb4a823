use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use swr_core::objective::{ParamLayout, SwrObjective};
use swr_core::*;

fn simulated(k: usize, length: usize) -> (SwrModel, TimeSeriesPair) {
    let truth = sample_truth(k, 7).unwrap();
    let sim = generate(&SimSetup {
        truth: truth.clone(),
        alpha: 0.5,
        error_process: ErrorProcess::Iid,
        seed: 1,
        input: InputSpec::synthetic(length, 2),
    })
    .unwrap();
    (truth, sim.data)
}

fn bench_kernel(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_kernel");
    for sigma in [0.5, 2.0, 8.0] {
        let params = WindowParams::new(10.0, sigma).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(sigma), &params, |b, p| {
            b.iter(|| build_kernel(black_box(*p)).unwrap())
        });
    }
    group.finish();
}

fn bench_predict(c: &mut Criterion) {
    let mut group = c.benchmark_group("predict");
    for length in [1_000, 10_000] {
        let (truth, data) = simulated(3, length);
        group.bench_with_input(BenchmarkId::from_parameter(length), &data, |b, d| {
            b.iter(|| truth.predict(black_box(d.x())).unwrap())
        });
    }
    group.finish();
}

fn bench_objective(c: &mut Criterion) {
    let (truth, data) = simulated(2, 3_000);
    let layout = ParamLayout::new(2, false);
    let objective = SwrObjective::new(data.x(), data.y(), layout, Loss::Nll);
    let theta = layout.pack(&truth.windows(), None);
    c.bench_function("objective_nll_k2_n3000", |b| b.iter(|| objective.eval(black_box(&theta))));
}

fn bench_fit(c: &mut Criterion) {
    let (_, data) = simulated(1, 1_000);
    let config = TrainConfig { k_max: 2, ..TrainConfig::default() };
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("k_max2_n1000", |b| b.iter(|| fit(black_box(&data), &config).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_kernel, bench_predict, bench_objective, bench_fit);
criterion_main!(benches);
