use std::hint::black_box;

use bundle_lab::classify::{douglas_intertwiner, similar};
use bundle_lab::frames::{build_frame, gram_bounds};
use bundle_lab::geometry::{index_map, Bounds};
use bundle_lab::monodromy::decompose;
use bundle_lab::operators::left_inverse_check;
use bundle_lab::WeightSequence;
use bundle_lab_bench::{composite, figure_polynomial, pair};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn frames(c: &mut Criterion) {
    let w = WeightSequence::bergman(1.0).unwrap();
    let mut g = c.benchmark_group("gram_bounds");
    for (k, n) in [(256, 50), (512, 100)] {
        g.bench_with_input(BenchmarkId::from_parameter(k), &(k, n), |b, &(k, n)| {
            b.iter(|| gram_bounds(&build_frame(&pair(), &w, n, k).unwrap()).unwrap())
        });
    }
    g.finish();
    c.bench_function("douglas_256", |b| b.iter(|| douglas_intertwiner(&pair(), &w, 256, 50).unwrap()));
}

fn operators(c: &mut Criterion) {
    let w = WeightSequence::nln();
    c.bench_function("left_inverse_256", |b| b.iter(|| left_inverse_check(&pair(), &w, 256).unwrap()));
}

fn geometry(c: &mut Criterion) {
    let bounds = Bounds::new(-1.0, 5.0, -3.0, 3.0).unwrap();
    let h = figure_polynomial();
    let mut g = c.benchmark_group("index_map");
    g.sample_size(10);
    g.bench_function("res_400", |b| b.iter(|| index_map(&h, bounds, black_box(400)).unwrap()));
    g.finish();
}

fn classify(c: &mut Criterion) {
    let f = composite();
    let w = WeightSequence::bergman(1.0).unwrap();
    let mut g = c.benchmark_group("classify");
    g.sample_size(10);
    g.bench_function("decompose", |b| b.iter(|| decompose(&f, None).unwrap()));
    g.bench_function("similar_self", |b| b.iter(|| similar(&f, &f, &w).unwrap()));
    g.finish();
}

criterion_group!(benches, frames, operators, geometry, classify);
criterion_main!(benches);
