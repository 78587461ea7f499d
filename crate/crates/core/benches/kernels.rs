//! Parallel against sequential execution of the hot kernels and of one
//! training epoch.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hmge::model::{Encoder, HmgeConfig, HmgeParams};
use hmge::par;
use hmge::sbm::{generate_multiplex, SbmConfig};
use hmge::sparse::{self, SparseAdjacency};
use hmge::train::{train, TrainConfig};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, bool); 2] = [("parallel", false), ("sequential", true)];

/// Union of eight block-model dimensions on 1000 nodes, roughly the
/// density of a latent graph.
fn union_graph() -> SparseAdjacency {
    let ds = generate_multiplex(&SbmConfig::new(1000, 8, 3)).unwrap();
    let mut edges: Vec<_> = ds
        .graph
        .dimensions()
        .iter()
        .flat_map(|a| a.upper_edges())
        .collect();
    edges.sort_unstable();
    edges.dedup();
    SparseAdjacency::from_undirected_edges(1000, &edges).unwrap()
}

fn sparse_kernels(c: &mut Criterion) {
    let a = union_graph();
    let pattern = a.pattern().clone();
    let values = a.values().to_vec();
    let x = Array2::from_shape_fn((1000, 64), |(i, j)| ((i * 31 + j * 17) % 13) as f64 / 13.0);
    let mut group = c.benchmark_group("sparse");
    group.sample_size(20);
    for (name, sequential) in MODES {
        group.bench_function(BenchmarkId::new("spmm", name), |b| {
            par::with_sequential(sequential, || {
                b.iter(|| black_box(sparse::spmm(&pattern, &values, x.view())))
            })
        });
        group.bench_function(BenchmarkId::new("spmm_transpose", name), |b| {
            par::with_sequential(sequential, || {
                b.iter(|| black_box(sparse::spmm_transpose(&pattern, &values, x.view())))
            })
        });
        group.bench_function(BenchmarkId::new("spmm_value_grad", name), |b| {
            par::with_sequential(sequential, || {
                b.iter(|| black_box(sparse::spmm_value_grad(&pattern, x.view(), x.view())))
            })
        });
        group.bench_function(BenchmarkId::new("spmm_backward", name), |b| {
            par::with_sequential(sequential, || {
                b.iter(|| black_box(sparse::spmm_backward(&pattern, &values, x.view(), x.view())))
            })
        });
    }
    group.finish();
}

fn model(c: &mut Criterion) {
    let ds = generate_multiplex(&SbmConfig::new(500, 6, 1)).unwrap();
    let config = HmgeConfig::new(6, 32, 2);
    let encoder = Encoder::new(&ds.graph, &config).unwrap();
    let params = HmgeParams::init(
        &config,
        ds.graph.num_features(),
        &mut ChaCha8Rng::seed_from_u64(0),
    );
    let one_epoch = TrainConfig {
        epochs: 1,
        patience: 1,
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("model");
    group.sample_size(10);
    for (name, sequential) in MODES {
        group.bench_function(BenchmarkId::new("forward", name), |b| {
            par::with_sequential(sequential, || {
                b.iter(|| black_box(encoder.embeddings(&params).unwrap()))
            })
        });
        group.bench_function(BenchmarkId::new("train_epoch", name), |b| {
            par::with_sequential(sequential, || {
                b.iter(|| black_box(train(&ds.graph, &config, &one_epoch).unwrap()))
            })
        });
    }
    group.finish();
}

criterion_group!(benches, sparse_kernels, model);
criterion_main!(benches);
