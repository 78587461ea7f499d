//! Acceptance checks, one line per criterion.
//!
//! The desk-scale synthetic trend (criterion 1) trains 24 models on up to
//! 41-dimension graphs and takes hours on one core, so it only runs when
//! `HMGE_ACCEPTANCE_FULL=1` is set. Every other criterion runs by default.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use hmge::autodiff::grad_check;
use hmge::eval::{
    auc_roc, average_precision, f1_single, mean_accuracy, run_synthetic_experiment, Method,
    SyntheticExperiment,
};
use hmge::graph::MultiplexGraph;
use hmge::model::{
    attention_aggregate, combine_adjacencies, encode, linear_aggregation_encode, softmax_columns,
    Activation, AttentionMode, AttentionParams, BoundParams, Encoder, HmgeConfig, HmgeParams,
    ParamFamily,
};
use hmge::sbm::{block_counts, generate_multiplex, vote, SbmConfig};
use hmge::sparse::SparseAdjacency;
use hmge::train::{format_train_log, objective, permute_rows, train, train_from, TrainConfig};
use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skipped(String),
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    edges
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, dims: usize, f: usize, p: f64) -> MultiplexGraph {
    let dimensions = (0..dims)
        .map(|_| SparseAdjacency::from_undirected_edges(n, &random_edges(rng, n, p)).unwrap())
        .collect();
    MultiplexGraph::new(dimensions, uniform(rng, n, f), None).unwrap()
}

/// Random parameters with non-zero combination logits, so that every
/// family carries a gradient. Weights are drawn at `scale` times the
/// default init bound.
fn random_params(config: &HmgeConfig, f: usize, scale: f64, rng: &mut ChaCha8Rng) -> HmgeParams {
    let mut params = HmgeParams::init(config, f, rng);
    params.for_each_mut(|_, family, t| {
        if family == ParamFamily::Alpha {
            t.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        } else {
            t.mapv_inplace(|v| v * scale);
        }
    });
    params
}

// Criterion 1: synthetic trend at desk scale.

fn criterion_1() -> Outcome {
    if std::env::var("HMGE_ACCEPTANCE_FULL").as_deref() != Ok("1") {
        return Outcome::Skipped(
            "24 trainings up to D=41 need hours on one core; set HMGE_ACCEPTANCE_FULL=1 to run"
                .into(),
        );
    }
    let rows = match run_synthetic_experiment(&SyntheticExperiment::default()) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("experiment failed: {e}")),
    };
    let means = mean_accuracy(&rows);
    let get = |d: usize, m: Method| means.get(&(d, m)).copied().unwrap_or(f64::NAN);
    let (h3, l3) = (get(3, Method::Hmge), get(3, Method::LinearAggregation));
    let (h41, l41) = (get(41, Method::Hmge), get(41, Method::LinearAggregation));
    let detail = format!(
        "D=3 hmge {h3:.3} linear {l3:.3}; D=41 hmge {h41:.3} linear {l41:.3} (gap {:+.1} pp)",
        100.0 * (h41 - l41)
    );
    if h3 >= 0.90 && l3 >= 0.90 && h41 - l41 >= 0.05 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

// Criterion 2: gradients of the full loss against central differences.
//
// The loss is roughly fifth order in the weights, so at the default init
// some first-layer gradients are near 1e-9, where rounding in the loss
// (about 1e-11 after dividing by 2 eps) exceeds 1e-4 of the value. Weights
// are drawn at three times the init bound to keep gradients clear of that.

/// Largest relative error per family over every `(D, L)` setting.
fn full_loss_errors(
    mode: AttentionMode,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<(ParamFamily, f64)>, usize), String> {
    let mut worst: Vec<(ParamFamily, f64)> =
        ParamFamily::ALL.iter().map(|&f| (f, f64::NAN)).collect();
    let mut checked = 0;
    for (dims, layers) in [(2, 1), (2, 2), (3, 1), (3, 2)] {
        let graph = random_graph(rng, 6, dims, 3, 0.5);
        let mut config = HmgeConfig::new(dims, 4, layers);
        config.attention = mode;
        let params = random_params(&config, 3, 3.0, rng);
        let mut perm: Vec<usize> = (0..6).collect();
        perm.shuffle(rng);
        let corrupted = permute_rows(graph.features(), &perm);
        let encoder = Encoder::new(&graph, &config).map_err(|e| e.to_string())?;
        let report = grad_check(&params.to_tensors(), 1e-5, |tape, vars| {
            let bound = BoundParams::from_vars(&params, vars);
            objective(tape, &encoder, &bound, &corrupted)
        })
        .map_err(|e| e.to_string())?;
        ensure(report.checked > 10 * report.skipped, || {
            format!(
                "D={dims} L={layers}: {} of {} entries skipped at kinks",
                report.skipped, report.checked
            )
        })?;
        checked += report.checked;
        for (family, err) in params.families().iter().zip(&report.per_parameter) {
            let slot = worst
                .iter_mut()
                .find(|(f, _)| f == family)
                .expect("known family");
            slot.1 = slot.1.max(*err);
        }
    }
    Ok((worst, checked))
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (worst, checked) = full_loss_errors(AttentionMode::Softmax, &mut rng)?;
    for &(family, err) in &worst {
        ensure(!err.is_nan(), || {
            format!("no {family:?} tensor was checked")
        })?;
        ensure(err < 1e-4, || format!("{family:?} relative error {err:e}"))?;
    }
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    // The signed-sum variant divides by row sums that can sit near zero;
    // its error is reported, not gated.
    let (signed, _) = full_loss_errors(AttentionMode::Signed, &mut rng)?;
    let signed_max = signed.iter().map(|w| w.1).fold(0.0, f64::max);
    Ok(format!(
        "max relative error {max:.1e} over {checked} entries of all five families, L=1,2, D=2,3 \
         (signed-sum attention, not gated: {signed_max:.1e})"
    ))
}

// Criterion 3: closed forms of the linearized two-dimension model.

fn dense(edges: &[(usize, usize)], n: usize) -> Array2<f64> {
    let mut a = Array2::zeros((n, n));
    for &(u, v) in edges {
        a[[u, v]] = 1.0;
        a[[v, u]] = 1.0;
    }
    a
}

fn linearized(config: HmgeConfig) -> HmgeConfig {
    HmgeConfig {
        activation: Activation::Identity,
        attention: AttentionMode::Sum,
        normalize: false,
        ..config
    }
}

struct Instance {
    a1: Array2<f64>,
    a2: Array2<f64>,
    graph: MultiplexGraph,
    w: Array2<f64>,
    logits: Array2<f64>,
}

const N3: usize = 5;
const M3: usize = 4;

fn instance(rng: &mut ChaCha8Rng, e1: Vec<(usize, usize)>, e2: Vec<(usize, usize)>) -> Instance {
    let x = uniform(rng, N3, M3);
    let dims = vec![
        SparseAdjacency::from_undirected_edges(N3, &e1).unwrap(),
        SparseAdjacency::from_undirected_edges(N3, &e2).unwrap(),
    ];
    Instance {
        a1: dense(&e1, N3),
        a2: dense(&e2, N3),
        graph: MultiplexGraph::new(dims, x, None).unwrap(),
        w: uniform(rng, M3, M3),
        logits: uniform(rng, 2, 1),
    }
}

struct Outputs {
    hierarchical: Array2<f64>,
    /// Softmaxed combination weights of the two inputs.
    weights: (f64, f64),
    linear: Array2<f64>,
}

fn run_instance(inst: &Instance) -> Result<Outputs, String> {
    let hier_cfg = linearized(HmgeConfig::new(2, M3, 1));
    let mut hier = random_params(&hier_cfg, M3, 1.0, &mut ChaCha8Rng::seed_from_u64(0));
    hier.layers[0].alpha = inst.logits.clone();
    hier.layers[0].gcn = vec![inst.w.clone(), inst.w.clone()];
    hier.final_gcn = Some(inst.w.clone());
    let z = encode(&inst.graph, &hier, &hier_cfg)
        .map_err(|e| e.to_string())?
        .z;
    let alpha = softmax_columns(&inst.logits);

    let lin_cfg = linearized(HmgeConfig::linear(2, M3, 2));
    let mut lin = random_params(&lin_cfg, M3, 1.0, &mut ChaCha8Rng::seed_from_u64(0));
    for stack in &mut lin.linear.as_mut().unwrap().gcn {
        *stack = vec![inst.w.clone(), inst.w.clone()];
    }
    let zl = linear_aggregation_encode(&inst.graph, &lin, &lin_cfg).map_err(|e| e.to_string())?;
    Ok(Outputs {
        hierarchical: z,
        weights: (alpha[[0, 0]], alpha[[1, 0]]),
        linear: zl,
    })
}

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let e1 = random_edges(&mut rng, N3, 0.5);
        let e2 = random_edges(&mut rng, N3, 0.5);
        let inst = instance(&mut rng, e1, e2);
        let Outputs {
            hierarchical: z,
            weights: (a1w, a2w),
            linear: zl,
        } = run_instance(&inst)?;
        let (a1, a2) = (&inst.a1, &inst.a2);
        let xw2 = inst.graph.features().dot(&inst.w).dot(&inst.w);
        let expanded =
            (a1.dot(a1) * a1w + a1.dot(a2) * a1w + a2.dot(a1) * a2w + a2.dot(a2) * a2w).dot(&xw2);
        let summed_squares = (a1.dot(a1) + a2.dot(a2)).dot(&xw2);
        let (d_hier, d_lin) = (
            max_abs_diff(&z, &expanded),
            max_abs_diff(&zl, &summed_squares),
        );
        ensure(d_hier < 1e-8, || {
            format!("hierarchical output off the expansion by {d_hier:e}")
        })?;
        ensure(d_lin < 1e-8, || {
            format!("linear aggregation off its closed form by {d_lin:e}")
        })?;
        worst = worst.max(d_hier).max(d_lin);
    }

    // The merged A1 A2 term needs commuting adjacencies: a relabeled
    // 5-cycle commutes with both K5 and its own complement.
    let cycle = [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)];
    for k in 0..20 {
        let mut label: Vec<usize> = (0..N3).collect();
        label.shuffle(&mut rng);
        let c: Vec<(usize, usize)> = cycle.iter().map(|&(u, v)| (label[u], label[v])).collect();
        let other: Vec<(usize, usize)> = (0..N3)
            .flat_map(|u| (u + 1..N3).map(move |v| (u, v)))
            .filter(|&(u, v)| k % 2 == 0 || !c.contains(&(u, v)) && !c.contains(&(v, u)))
            .collect();
        let inst = instance(&mut rng, other, c);
        let (a1, a2) = (&inst.a1, &inst.a2);
        ensure(max_abs_diff(&a1.dot(a2), &a2.dot(a1)) == 0.0, || {
            "pair does not commute".into()
        })?;
        let Outputs {
            hierarchical: z,
            weights: (a1w, a2w),
            ..
        } = run_instance(&inst)?;
        let xw2 = inst.graph.features().dot(&inst.w).dot(&inst.w);
        let merged = (a1.dot(a1) * a1w + a1.dot(a2) * (a1w + a2w) + a2.dot(a2) * a2w).dot(&xw2);
        let d = max_abs_diff(&z, &merged);
        ensure(d < 1e-8, || {
            format!("commuting pair off the printed closed form by {d:e}")
        })?;
        worst = worst.max(d);
    }
    Ok(format!(
        "20 random and 20 commuting 5-node instances, max deviation {worst:.1e}"
    ))
}

// Criterion 4: ranking metrics against brute force, micro-F1 against
// accuracy.

fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1;
                twice += if scores[i] > scores[j] {
                    2
                } else if scores[i] == scores[j] {
                    1
                } else {
                    0
                };
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

/// Sum over distinct thresholds, highest first, of recall gained times
/// precision at that threshold.
fn brute_ap(scores: &[f64], labels: &[bool]) -> f64 {
    let pos = labels.iter().filter(|&&l| l).count();
    let mut thresholds = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut ap = 0.0;
    for t in thresholds {
        let at = |pred: &dyn Fn(f64) -> bool, positive: Option<bool>| {
            scores
                .iter()
                .zip(labels)
                .filter(|(s, l)| pred(**s) && positive.is_none_or(|p| **l == p))
                .count()
        };
        let new_pos = at(&|s| s == t, Some(true));
        if new_pos > 0 {
            let tp = at(&|s| s >= t, Some(true));
            let selected = at(&|s| s >= t, None);
            ap += (new_pos as f64 / pos as f64) * (tp as f64 / selected as f64);
        }
    }
    ap
}

fn criterion_4() -> Check {
    let config = PropConfig {
        cases: 1000,
        failure_persistence: None,
        ..PropConfig::default()
    };
    // Scores from a small grid make ties common.
    let ranking = (2usize..=10)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0u8..6, n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
        .prop_filter("both classes present", |(_, l)| {
            l.iter().any(|&x| x) && l.iter().any(|&x| !x)
        });
    let mut runner = TestRunner::new(config.clone());
    runner
        .run(&ranking, |(grid, labels)| {
            let scores: Vec<f64> = grid.iter().map(|&g| g as f64 * 0.25).collect();
            prop_assert_eq!(
                auc_roc(&scores, &labels).unwrap(),
                brute_auc(&scores, &labels)
            );
            prop_assert_eq!(
                average_precision(&scores, &labels).unwrap(),
                brute_ap(&scores, &labels)
            );
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let single = (1usize..=6).prop_flat_map(|k| {
        (1usize..60).prop_flat_map(move |n| (Just(k), prop::collection::vec((0..k, 0..k), n)))
    });
    let mut runner = TestRunner::new(config);
    runner
        .run(&single, |(k, pairs)| {
            let (pred, actual): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let correct = pred.iter().zip(&actual).filter(|(p, a)| p == a).count();
            let (_, micro) = f1_single(&pred, &actual, k);
            prop_assert_eq!(micro, correct as f64 / actual.len() as f64);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("1000 ranking cases with ties match brute force exactly; micro-F1 equals accuracy on 1000 cases".into())
}

// Criterion 5: structural invariants.

fn permuted_graph(graph: &MultiplexGraph, perm: &[usize]) -> MultiplexGraph {
    let dims = graph
        .dimensions()
        .iter()
        .map(|a| {
            let edges: Vec<_> = a
                .upper_edges()
                .into_iter()
                .map(|(u, v)| (perm[u], perm[v]))
                .collect();
            SparseAdjacency::from_undirected_edges(graph.num_nodes(), &edges).unwrap()
        })
        .collect();
    let mut x = graph.features().clone();
    for (v, row) in graph.features().rows().into_iter().enumerate() {
        x.row_mut(perm[v]).assign(&row);
    }
    MultiplexGraph::new(dims, x, None).unwrap()
}

fn criterion_5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut attention_worst: f64 = 0.0;
    for mode in [AttentionMode::Softmax, AttentionMode::Signed] {
        for _ in 0..50 {
            let d = rng.random_range(2..6);
            let per_dim: Vec<Array2<f64>> = (0..d).map(|_| uniform(&mut rng, 10, 4)).collect();
            let att: Vec<AttentionParams> = (0..d)
                .map(|_| AttentionParams {
                    v: uniform(&mut rng, 4, 4),
                    y: uniform(&mut rng, 4, 1),
                })
                .collect();
            let (_, beta) = attention_aggregate(&per_dim, &att, mode).map_err(|e| e.to_string())?;
            for row in beta.rows() {
                let raw_sum: f64 = row.sum();
                attention_worst = attention_worst.max((raw_sum - 1.0).abs());
            }
        }
        // All-zero embeddings give zero scores, which trips the guard under
        // the signed form; the fallback must sum to one exactly.
        for d in 2..6 {
            let per_dim = vec![Array2::zeros((3, 4)); d];
            let att: Vec<AttentionParams> = (0..d)
                .map(|_| AttentionParams {
                    v: uniform(&mut rng, 4, 4),
                    y: uniform(&mut rng, 4, 1),
                })
                .collect();
            let (_, beta) = attention_aggregate(&per_dim, &att, mode).map_err(|e| e.to_string())?;
            for row in beta.rows() {
                let sum: f64 = row.iter().sum();
                ensure(mode != AttentionMode::Signed || sum == 1.0, || {
                    format!("guarded row sums to {sum}")
                })?;
            }
        }
    }
    ensure(attention_worst <= 1e-9, || {
        format!("attention row sum off by {attention_worst:e}")
    })?;

    let mut alpha_worst: f64 = 0.0;
    for _ in 0..50 {
        let (r, c) = (rng.random_range(1..8), rng.random_range(1..5));
        let logits = uniform(&mut rng, r, c) * 20.0;
        for col in softmax_columns(&logits).columns() {
            alpha_worst = alpha_worst.max((col.sum() - 1.0).abs());
        }
    }
    ensure(alpha_worst <= 1e-12, || {
        format!("softmax column sum off by {alpha_worst:e}")
    })?;

    for _ in 0..20 {
        let d = rng.random_range(1..5);
        let g = random_graph(&mut rng, 9, d, 1, 0.4);
        let logits = uniform(&mut rng, d, 3);
        for act in [Activation::Relu, Activation::Identity] {
            for out in
                combine_adjacencies(g.dimensions(), &logits, act).map_err(|e| e.to_string())?
            {
                let a = out.to_dense();
                ensure(a == a.t(), || "combined adjacency is not symmetric".into())?;
            }
        }
    }

    let mut equiv_worst: f64 = 0.0;
    for (dims, layers) in [(3, 2), (2, 1), (3, 0)] {
        for mode in [AttentionMode::Softmax, AttentionMode::Signed] {
            let g = random_graph(&mut rng, 8, dims, 3, 0.4);
            let mut config = HmgeConfig::new(dims, 5, layers);
            config.attention = mode;
            let params = random_params(&config, 3, 1.0, &mut rng);
            let mut perm: Vec<usize> = (0..8).collect();
            perm.shuffle(&mut rng);
            let trace = encode(&g, &params, &config).map_err(|e| e.to_string())?;
            let permuted =
                encode(&permuted_graph(&g, &perm), &params, &config).map_err(|e| e.to_string())?;
            for (v, &pv) in perm.iter().enumerate() {
                for k in 0..5 {
                    equiv_worst = equiv_worst.max((trace.z[[v, k]] - permuted.z[[pv, k]]).abs());
                }
            }
            for level in &trace.latent {
                for a in level {
                    let a = a.to_dense();
                    ensure(a == a.t(), || "latent graph is not symmetric".into())?;
                }
            }
        }
    }
    ensure(equiv_worst <= 1e-9, || {
        format!("permutation changes embeddings by {equiv_worst:e}")
    })?;
    Ok(format!(
        "attention rows within {attention_worst:.0e}, alpha columns within {alpha_worst:.0e}, \
         combinations symmetric, permutation error {equiv_worst:.0e}"
    ))
}

// Criterion 6: block-model statistics and voting.

fn criterion_6() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let config = SbmConfig::new(1000, 2, seed);
        let ds = generate_multiplex(&config).map_err(|e| e.to_string())?;
        for (d, a) in ds.graph.dimensions().iter().enumerate() {
            let c = block_counts(a, &ds.dim_labels[d], config.num_classes);
            for (edges, pairs, p) in [
                (c.within_edges, c.within_pairs, config.p_in),
                (c.cross_edges, c.cross_pairs, config.p_out),
            ] {
                let sigma = (p * (1.0 - p) / pairs as f64).sqrt();
                let z = (edges as f64 / pairs as f64 - p).abs() / sigma;
                ensure(z <= 3.0, || {
                    format!("seed {seed} dim {d}: density {z:.2} sigma from {p}")
                })?;
                worst = worst.max(z);
            }
        }
    }
    let voted = vote(
        &[vec![0], vec![1], vec![0]],
        2,
        &mut ChaCha8Rng::seed_from_u64(0),
    );
    ensure(voted == vec![0], || format!("c1, c2, c1 voted {voted:?}"))?;
    Ok(format!(
        "40 densities within {worst:.2} sigma over 10 seeds; c1/c2/c1 votes c1"
    ))
}

// Criterion 7: training sanity.

fn criterion_7() -> Check {
    let mut config = SbmConfig::new(20, 3, 7);
    config.p_in = 0.5;
    config.p_out = 0.1;
    let graph = generate_multiplex(&config)
        .map_err(|e| e.to_string())?
        .graph;
    let model = HmgeConfig::new(3, 16, 2);
    let tc = TrainConfig {
        epochs: 51,
        patience: 51,
        seed: 11,
        ..TrainConfig::default()
    };
    let mut params = HmgeParams::init(
        &model,
        graph.num_features(),
        &mut ChaCha8Rng::seed_from_u64(11),
    );
    params.discriminator.fill(0.0);
    let run = train_from(&graph, &model, &tc, params).map_err(|e| e.to_string())?;
    let (first, fiftieth) = (run.history[0].loss, run.history[50].loss);
    ensure(first == std::f64::consts::LN_2, || {
        format!("epoch 0 loss {first:e} is not ln 2")
    })?;
    ensure(fiftieth < std::f64::consts::LN_2, || {
        format!("epoch 50 loss {fiftieth} not below ln 2")
    })?;

    let a = train(&graph, &model, &tc).map_err(|e| e.to_string())?;
    let b = train(&graph, &model, &tc).map_err(|e| e.to_string())?;
    ensure(
        format_train_log(&a.history) == format_train_log(&b.history),
        || "logs differ".into(),
    )?;
    ensure(a.embeddings == b.embeddings, || "embeddings differ".into())?;
    Ok(format!(
        "epoch 0 loss is ln 2 exactly, epoch 50 loss {fiftieth:.4}, repeated runs bit-identical"
    ))
}

fn run(check: fn() -> Check) -> Outcome {
    match catch_unwind(AssertUnwindSafe(check)) {
        Ok(Ok(detail)) => Outcome::Pass(detail),
        Ok(Err(detail)) => Outcome::Fail(detail),
        Err(panic) => Outcome::Fail(
            panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()),
        ),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let checks: [Criterion; 7] = [
        ("synthetic trend", criterion_1),
        ("gradient correctness", || run(criterion_2)),
        ("closed-form oracle", || run(criterion_3)),
        ("metric oracles", || run(criterion_4)),
        ("structural invariants", || run(criterion_5)),
        ("block-model statistics", || run(criterion_6)),
        ("training sanity", || run(criterion_7)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let (tag, detail) = match check() {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skipped(d) => ("SKIPPED", d),
        };
        println!("criterion {}: {tag} {name}: {detail}", i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
