use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::link::{evaluate_links, split_links};
use super::logistic::{LogisticConfig, LogisticRegression};
use super::metrics::{accuracy, f1_scores};
use crate::error::{Error, Result};
use crate::graph::MultiplexGraph;
use crate::io;
use crate::model::HmgeConfig;
use crate::par;
use crate::sbm::{generate_multiplex, FeatureKind, SbmConfig};
use crate::train::{train, TrainConfig};

/// Encoder variants compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Hierarchical encoder with trainable combination weights.
    Hmge,
    /// Per-dimension convolutions aggregated once (no hidden layers).
    LinearAggregation,
    /// Hierarchical encoder with combination weights fixed uniform.
    UniformCombination,
}

impl Method {
    pub const ALL: [Method; 3] = [
        Method::Hmge,
        Method::LinearAggregation,
        Method::UniformCombination,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hmge => "hmge",
            Method::LinearAggregation => "linear_aggregation",
            Method::UniformCombination => "uniform_combination",
        }
    }

    /// Derives this variant's configuration from the full model's. The
    /// linear variant stacks as many convolutions per dimension as the
    /// hierarchy applies in total.
    pub fn configure(self, base: &HmgeConfig) -> HmgeConfig {
        match self {
            Method::Hmge => HmgeConfig {
                freeze_alpha: false,
                ..base.clone()
            },
            Method::LinearAggregation => {
                let depth = if base.is_linear() {
                    base.linear_depth
                } else {
                    base.num_layers + 1
                };
                HmgeConfig {
                    activation: base.activation,
                    attention: base.attention,
                    normalize: base.normalize,
                    ..HmgeConfig::linear(base.input_dims(), base.embed_size, depth)
                }
            }
            Method::UniformCombination => HmgeConfig {
                freeze_alpha: true,
                ..base.clone()
            },
        }
    }
}

/// Independent random stream for one purpose of one seed.
pub fn derived_rng(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 << 32 | purpose);
    rng
}

const SPLIT_STREAM: u64 = 1;
const CLASS_STREAM: u64 = 2;

/// Stratified split of single-label nodes: a `fraction` of every class
/// (at least one node, leaving one for testing when possible) goes to
/// training. Returns sorted `(train, test)` indices.
pub fn stratified_split<R: Rng>(
    labels: &[usize],
    fraction: f64,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..k {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(rng);
        let mut take = ((fraction * members.len() as f64).round() as usize).max(1);
        if members.len() > 1 {
            take = take.min(members.len() - 1);
        }
        train.extend_from_slice(&members[..take]);
        test.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Random split for multilabel data.
pub fn random_split<R: Rng>(n: usize, fraction: f64, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let take = ((fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let (mut train, mut test) = (idx[..take].to_vec(), idx[take..].to_vec());
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_micro: f64,
}

/// Trains logistic regression on a labeled fraction of the embeddings and
/// scores the remaining nodes.
pub fn evaluate_classification(
    z: &Array2<f64>,
    graph: &MultiplexGraph,
    train_fraction: f64,
    seed: u64,
) -> Result<ClassificationMetrics> {
    let labels = graph
        .labels()
        .ok_or_else(|| Error::invalid("classification needs node labels"))?;
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "training fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let k = graph.num_classes();
    let multilabel = graph.is_multilabel();
    let mut rng = derived_rng(seed, CLASS_STREAM);
    let (train_idx, test_idx) = match graph.single_labels() {
        Some(single) if !multilabel => stratified_split(&single, train_fraction, &mut rng),
        _ => random_split(labels.len(), train_fraction, &mut rng),
    };
    if test_idx.is_empty() {
        return Err(Error::invalid("classification split left no test nodes"));
    }
    let pick = |idx: &[usize]| z.select(ndarray::Axis(0), idx);
    let pick_labels = |idx: &[usize]| idx.iter().map(|&i| labels[i].clone()).collect::<Vec<_>>();
    let clf = LogisticRegression::fit(
        &pick(&train_idx),
        &pick_labels(&train_idx),
        k,
        multilabel,
        &LogisticConfig::default(),
    )?;
    let predicted = clf.predict(&pick(&test_idx));
    let actual = pick_labels(&test_idx);
    let (f1_macro, f1_micro) = f1_scores(&predicted, &actual, k);
    Ok(ClassificationMetrics {
        accuracy: accuracy(&predicted, &actual),
        f1_macro,
        f1_micro,
    })
}

/// One cell of the synthetic experiment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub dims: usize,
    pub method: Method,
    pub seed: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticExperiment {
    pub num_nodes: usize,
    pub dims: Vec<usize>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub embed_size: usize,
    pub num_layers: usize,
    pub train: TrainConfig,
    pub train_fraction: f64,
    pub p_in: f64,
    pub p_out: f64,
    pub features: FeatureKind,
}

impl Default for SyntheticExperiment {
    fn default() -> Self {
        Self {
            num_nodes: 1000,
            dims: vec![3, 11, 21, 41],
            seeds: vec![0, 1, 2],
            methods: vec![Method::Hmge, Method::LinearAggregation],
            embed_size: 64,
            num_layers: 2,
            train: TrainConfig {
                epochs: 500,
                ..TrainConfig::default()
            },
            train_fraction: 0.1,
            p_in: 0.05,
            p_out: 0.01,
            features: FeatureKind::Degree,
        }
    }
}

/// Generates a block-model graph per `(D, seed)`, trains every method on it
/// and classifies the voted labels. Rows come back in `(D, seed, method)`
/// order.
pub fn run_synthetic_experiment(exp: &SyntheticExperiment) -> Result<Vec<AccuracyRow>> {
    let mut cells = Vec::new();
    for &d in &exp.dims {
        for &seed in &exp.seeds {
            cells.push((d, seed));
        }
    }
    let results = par::map(&cells, |&(d, seed)| -> Result<Vec<AccuracyRow>> {
        let sbm = SbmConfig {
            p_in: exp.p_in,
            p_out: exp.p_out,
            features: exp.features,
            ..SbmConfig::new(exp.num_nodes, d, seed)
        };
        let data = generate_multiplex(&sbm)?;
        let base = HmgeConfig::new(d, exp.embed_size, exp.num_layers);
        let tc = TrainConfig {
            seed,
            ..exp.train.clone()
        };
        exp.methods
            .iter()
            .map(|&method| {
                let outcome = train(&data.graph, &method.configure(&base), &tc)?;
                let m = evaluate_classification(
                    &outcome.embeddings,
                    &data.graph,
                    exp.train_fraction,
                    seed,
                )?;
                log::info!(
                    "D={d} seed={seed} {}: accuracy {:.4} after {} epochs",
                    method.name(),
                    m.accuracy,
                    outcome.history.len()
                );
                Ok(AccuracyRow {
                    dims: d,
                    method,
                    seed,
                    accuracy: m.accuracy,
                })
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Mean accuracy per `(D, method)`.
pub fn mean_accuracy(rows: &[AccuracyRow]) -> BTreeMap<(usize, Method), f64> {
    let mut acc: BTreeMap<(usize, Method), (f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry((r.dims, r.method)).or_insert((0.0, 0));
        e.0 += r.accuracy;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}

pub fn write_accuracy_csv(path: &Path, rows: &[AccuracyRow]) -> Result<()> {
    let mut out = String::from("D,method,seed,accuracy\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.dims,
            r.method.name(),
            r.seed,
            r.accuracy
        )
        .expect("string");
    }
    io::write(path, &out)
}

/// Link prediction and classification scores of one encoder variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub method: Method,
    pub link_auc: f64,
    pub link_ap: f64,
    /// Absent when the graph has no labels.
    pub f1_macro: Option<f64>,
    pub f1_micro: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub link_ratio: f64,
    pub train_fraction: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            link_ratio: 0.1,
            train_fraction: 0.1,
        }
    }
}

/// Link prediction: train on the graph with held-out links removed.
pub fn link_task(
    graph: &MultiplexGraph,
    config: &HmgeConfig,
    train_config: &TrainConfig,
    ratio: f64,
) -> Result<(f64, f64)> {
    let split = split_links(
        graph,
        ratio,
        &mut derived_rng(train_config.seed, SPLIT_STREAM),
    )?;
    let outcome = train(&split.train, config, train_config)?;
    evaluate_links(&outcome.embeddings, &split)
}

/// Node classification: train on the full graph.
pub fn classification_task(
    graph: &MultiplexGraph,
    config: &HmgeConfig,
    train_config: &TrainConfig,
    train_fraction: f64,
) -> Result<ClassificationMetrics> {
    let outcome = train(graph, config, train_config)?;
    evaluate_classification(
        &outcome.embeddings,
        graph,
        train_fraction,
        train_config.seed,
    )
}

/// Full model against both ablations, three rows in [`Method::ALL`] order.
pub fn run_ablations(
    graph: &MultiplexGraph,
    base: &HmgeConfig,
    train_config: &TrainConfig,
    settings: &EvalSettings,
) -> Result<Vec<AblationRow>> {
    Method::ALL
        .iter()
        .map(|&method| {
            let cfg = method.configure(base);
            let (auc, ap) = link_task(graph, &cfg, train_config, settings.link_ratio)?;
            let class = match graph.labels() {
                Some(_) => Some(classification_task(
                    graph,
                    &cfg,
                    train_config,
                    settings.train_fraction,
                )?),
                None => None,
            };
            Ok(AblationRow {
                method,
                link_auc: auc,
                link_ap: ap,
                f1_macro: class.map(|c| c.f1_macro),
                f1_micro: class.map(|c| c.f1_micro),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub embed_size: usize,
    pub f1_macro: f64,
    pub f1_micro: f64,
}

/// Classification scores for each embedding size.
pub fn run_embedding_sweep(
    graph: &MultiplexGraph,
    base: &HmgeConfig,
    train_config: &TrainConfig,
    sizes: &[usize],
    train_fraction: f64,
) -> Result<Vec<SweepRow>> {
    sizes
        .iter()
        .map(|&m| {
            let cfg = HmgeConfig {
                embed_size: m,
                ..base.clone()
            };
            let c = classification_task(graph, &cfg, train_config, train_fraction)?;
            Ok(SweepRow {
                embed_size: m,
                f1_macro: c.f1_macro,
                f1_micro: c.f1_micro,
            })
        })
        .collect()
}

/// Metrics of one run, serialized into `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub metrics: BTreeMap<String, f64>,
    pub seed: u64,
    pub config: serde_json::Value,
}

pub fn write_report<T: Serialize>(path: &Path, report: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::invalid(format!("cannot serialize report: {e}")))?;
    io::write(path, &(text + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stratified_split_keeps_class_shares() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i % 4 == 0)).collect();
        let (train, test) = stratified_split(&labels, 0.1, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(train.len() + test.len(), 100);
        assert_eq!(train.iter().filter(|&&i| labels[i] == 1).count(), 3);
        assert_eq!(train.iter().filter(|&&i| labels[i] == 0).count(), 8);
        let again = stratified_split(&labels, 0.1, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(again.0, train);
    }

    #[test]
    fn configure_variants() {
        let base = HmgeConfig::new(5, 8, 2);
        let lin = Method::LinearAggregation.configure(&base);
        assert!(lin.is_linear());
        assert_eq!(lin.linear_depth, 3);
        assert!(Method::UniformCombination.configure(&base).freeze_alpha);
        assert!(!Method::Hmge.configure(&base).freeze_alpha);
    }
}
