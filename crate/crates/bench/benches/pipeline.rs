use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use hci_bench::{base_date, linear_predictor, snapshot};
use hci_core::domain::{read_snapshot, write_snapshot, IngestOptions};
use hci_core::forecast::{fit_holt, forecast_holt};
use hci_core::index::{compute_ratios, group_stats, index_point, GroupingScheme, IndexOptions, Statistic};
use hci_core::inference::{bootstrap_intervals, GroupedRatios};
use hci_core::predictor::{ForestParams, LinearHedonicModel};
use hci_core::{BaselinePredictor, PredictorSpec};

fn bench_ingest(c: &mut Criterion) {
    let snap = snapshot(100_000, 1);
    let mut csv = Vec::new();
    write_snapshot(&snap, &mut csv).unwrap();
    let mut g = c.benchmark_group("ingest");
    g.throughput(Throughput::Elements(snap.len() as u64));
    g.sample_size(10);
    g.bench_function("parse_100k", |b| {
        b.iter(|| read_snapshot(black_box(csv.as_slice()), base_date(), IngestOptions::default()).unwrap())
    });
    g.finish();
}

fn bench_fit(c: &mut Criterion) {
    let snap = snapshot(50_000, 2);
    let mut g = c.benchmark_group("fit");
    g.sample_size(10);
    g.bench_function("linear_50k", |b| b.iter(|| LinearHedonicModel::fit(black_box(&snap)).unwrap()));
    let small = snapshot(10_000, 3);
    let params = ForestParams {
        n_trees: 20,
        ..Default::default()
    };
    g.bench_function("forest_20_trees_10k", |b| {
        b.iter(|| BaselinePredictor::fit(black_box(&small), &PredictorSpec::Forest(params.clone())).unwrap())
    });
    g.finish();
}

fn bench_index(c: &mut Criterion) {
    let (_, model) = linear_predictor(50_000, 4);
    let snap = snapshot(200_000, 5);
    let mut g = c.benchmark_group("index");
    g.throughput(Throughput::Elements(snap.len() as u64));
    g.sample_size(10);
    for statistic in [Statistic::Mean, Statistic::Median] {
        let opts = IndexOptions {
            statistic,
            ..Default::default()
        };
        g.bench_function(format!("point_200k_{}", statistic.name()), |b| {
            b.iter(|| index_point(&model, black_box(&snap), opts).unwrap())
        });
    }
    g.finish();
}

fn bench_inference(c: &mut Criterion) {
    let (_, model) = linear_predictor(20_000, 6);
    let snap = snapshot(10_000, 7);
    let ratios = compute_ratios(&snap, &model);
    let stats = group_stats(&ratios, GroupingScheme::CaratClass, Statistic::Mean);
    let cal = model.calibration.for_statistic(Statistic::Mean);
    let weights = hci_core::index::policy_weights(&stats, cal, Default::default()).unwrap();
    let data = GroupedRatios::new(&ratios, GroupingScheme::CaratClass, &weights, 1000.0 / cal.c0).unwrap();
    let mut g = c.benchmark_group("inference");
    g.sample_size(10);
    g.bench_function("bootstrap_500_10k", |b| {
        b.iter(|| bootstrap_intervals(black_box(&data), 0.95, 500, 11).unwrap())
    });
    g.finish();
}

fn bench_forecast(c: &mut Criterion) {
    let series: Vec<f64> = (0..400).map(|t| 1000.0 + 0.5 * t as f64 + (t as f64 * 0.7).sin() * 3.0).collect();
    c.bench_function("forecast/holt_fit_400", |b| {
        b.iter_batched(
            || series.clone(),
            |s| forecast_holt(&fit_holt(&s, None).unwrap(), 4, 0.8).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_ingest, bench_fit, bench_index, bench_inference, bench_forecast);
criterion_main!(benches);
