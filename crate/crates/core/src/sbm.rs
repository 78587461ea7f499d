//! Synthetic multiplex graphs: one stochastic block model per dimension,
//! with a global label voted across dimensions.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MultiplexGraph;
use crate::io;
use crate::par;
use crate::sparse::SparseAdjacency;

/// Node features attached to a synthetic graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FeatureKind {
    /// Per-dimension degree divided by the largest degree in that dimension.
    #[default]
    Degree,
    /// I.i.d. standard normal columns, independent of the graph.
    Gaussian { width: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SbmConfig {
    pub num_nodes: usize,
    pub num_dims: usize,
    pub num_classes: usize,
    /// Class probabilities; empty means uniform.
    pub class_probs: Vec<f64>,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
    pub features: FeatureKind,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            num_nodes: 1000,
            num_dims: 3,
            num_classes: 2,
            class_probs: Vec::new(),
            p_in: 0.05,
            p_out: 0.01,
            seed: 0,
            features: FeatureKind::Degree,
        }
    }
}

impl SbmConfig {
    pub fn new(num_nodes: usize, num_dims: usize, seed: u64) -> Self {
        Self {
            num_nodes,
            num_dims,
            seed,
            ..Self::default()
        }
    }

    /// Class probabilities with the uniform default filled in.
    pub fn probabilities(&self) -> Vec<f64> {
        if self.class_probs.is_empty() {
            vec![1.0 / self.num_classes as f64; self.num_classes]
        } else {
            self.class_probs.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_nodes == 0 || self.num_dims == 0 || self.num_classes == 0 {
            return Err(Error::Config(
                "nodes, dimensions and classes must all be positive".into(),
            ));
        }
        let probs = self.probabilities();
        if probs.len() != self.num_classes {
            return Err(Error::Config(format!(
                "{} class probabilities for {} classes",
                probs.len(),
                self.num_classes
            )));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0))
            || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(format!(
                "class probabilities must be non-negative and sum to 1, got {probs:?}"
            )));
        }
        if !(0.0 <= self.p_out && self.p_out <= self.p_in && self.p_in <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= p_out <= p_in <= 1, got p_in {} and p_out {}",
                self.p_in, self.p_out
            )));
        }
        if self.features == (FeatureKind::Gaussian { width: 0 }) {
            return Err(Error::Config(
                "gaussian features need a positive width".into(),
            ));
        }
        Ok(())
    }
}

/// A generated multiplex graph with its per-dimension and global labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    /// Carries the global labels.
    pub graph: MultiplexGraph,
    /// `dim_labels[d][v]` is the class of node `v` in dimension `d`.
    pub dim_labels: Vec<Vec<usize>>,
    pub labels: Vec<usize>,
}

fn sample_class<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (c, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return c;
        }
    }
    // Rounding can leave `acc` just below 1; fall back to the last class
    // with non-zero probability.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// One block-model graph: classes drawn independently per node, then every
/// unordered pair linked with `p_in` (same class) or `p_out`.
pub fn generate_dimension<R: Rng>(
    num_nodes: usize,
    class_probs: &[f64],
    p_in: f64,
    p_out: f64,
    rng: &mut R,
) -> Result<(SparseAdjacency, Vec<usize>)> {
    let labels: Vec<usize> = (0..num_nodes)
        .map(|_| sample_class(class_probs, rng))
        .collect();
    let mut edges = Vec::new();
    for u in 0..num_nodes {
        for v in u + 1..num_nodes {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Ok((
        SparseAdjacency::from_undirected_edges(num_nodes, &edges)?,
        labels,
    ))
}

/// Most frequent label per node; ties are broken uniformly at random.
///
/// `per_dim[d][v]` is the label of node `v` in dimension `d`.
pub fn vote<R: Rng>(per_dim: &[Vec<usize>], num_classes: usize, rng: &mut R) -> Vec<usize> {
    let n = per_dim.first().map_or(0, Vec::len);
    (0..n)
        .map(|v| {
            let mut counts = vec![0usize; num_classes];
            for labels in per_dim {
                counts[labels[v]] += 1;
            }
            let best = counts.iter().copied().max().unwrap_or(0);
            let tied: Vec<usize> = (0..num_classes).filter(|&c| counts[c] == best).collect();
            if tied.len() == 1 {
                tied[0]
            } else {
                tied[rng.random_range(0..tied.len())]
            }
        })
        .collect()
}

/// Degree of every node in every dimension divided by that dimension's
/// maximum degree (zero for edgeless dimensions).
pub fn degree_features(dimensions: &[SparseAdjacency], num_nodes: usize) -> Array2<f64> {
    let mut x = Array2::zeros((num_nodes, dimensions.len()));
    for (d, a) in dimensions.iter().enumerate() {
        let ptr = a.pattern().indptr();
        let max = (0..num_nodes)
            .map(|v| ptr[v + 1] - ptr[v])
            .max()
            .unwrap_or(0);
        if max == 0 {
            continue;
        }
        for v in 0..num_nodes {
            x[[v, d]] = (ptr[v + 1] - ptr[v]) as f64 / max as f64;
        }
    }
    x
}

/// Stream for feature draws, clear of the per-dimension streams.
const FEATURE_STREAM: u64 = 1 << 40;

pub fn gaussian_features<R: Rng>(num_nodes: usize, width: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((num_nodes, width), || rng.sample(StandardNormal))
}

/// Random stream for dimension `d` (or for voting when `d` is `None`).
fn stream(seed: u64, d: Option<usize>) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(d.map_or(0, |d| d as u64 + 1));
    rng
}

pub fn generate_multiplex(config: &SbmConfig) -> Result<SynthDataset> {
    config.validate()?;
    let probs = config.probabilities();
    let dims: Vec<usize> = (0..config.num_dims).collect();
    let generated = par::map(&dims, |&d| {
        generate_dimension(
            config.num_nodes,
            &probs,
            config.p_in,
            config.p_out,
            &mut stream(config.seed, Some(d)),
        )
    });
    let mut dimensions = Vec::with_capacity(config.num_dims);
    let mut dim_labels = Vec::with_capacity(config.num_dims);
    for g in generated {
        let (a, l) = g?;
        dimensions.push(a);
        dim_labels.push(l);
    }
    let labels = vote(
        &dim_labels,
        config.num_classes,
        &mut stream(config.seed, None),
    );
    let features = match config.features {
        FeatureKind::Degree => degree_features(&dimensions, config.num_nodes),
        FeatureKind::Gaussian { width } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(FEATURE_STREAM);
            gaussian_features(config.num_nodes, width, &mut rng)
        }
    };
    let graph = MultiplexGraph::new(
        dimensions,
        features,
        Some(labels.iter().map(|&c| vec![c]).collect()),
    )?;
    Ok(SynthDataset {
        graph,
        dim_labels,
        labels,
    })
}

/// Edge and pair counts inside and across classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockCounts {
    pub within_edges: usize,
    pub within_pairs: usize,
    pub cross_edges: usize,
    pub cross_pairs: usize,
}

pub fn block_counts(a: &SparseAdjacency, labels: &[usize], num_classes: usize) -> BlockCounts {
    let mut sizes = vec![0usize; num_classes];
    for &c in labels {
        sizes[c] += 1;
    }
    let n = labels.len();
    let within_pairs: usize = sizes.iter().map(|&s| s * s.saturating_sub(1) / 2).sum();
    let cross_pairs = n * n.saturating_sub(1) / 2 - within_pairs;
    let (mut within_edges, mut cross_edges) = (0, 0);
    for (u, v) in a.upper_edges() {
        if labels[u] == labels[v] {
            within_edges += 1;
        } else {
            cross_edges += 1;
        }
    }
    BlockCounts {
        within_edges,
        within_pairs,
        cross_edges,
        cross_pairs,
    }
}

/// Saves the dataset in the multiplex directory format plus
/// `labels_per_dim.csv` (one row per node, one column per dimension).
pub fn save_dataset(dataset: &SynthDataset, dir: &Path) -> Result<()> {
    io::save_multiplex(&dataset.graph, dir)?;
    let n = dataset.labels.len();
    let mut out = String::new();
    for v in 0..n {
        for (d, labels) in dataset.dim_labels.iter().enumerate() {
            if d > 0 {
                out.push(',');
            }
            write!(out, "{}", labels[v]).expect("write to string");
        }
        out.push('\n');
    }
    io::write(&dir.join("labels_per_dim.csv"), &out)
}
