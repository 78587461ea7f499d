use std::collections::HashSet;

use ndarray::Array2;
use rand::seq::index;
use rand::Rng;

use super::metrics::{auc_roc, average_precision};
use crate::autodiff::sigmoid;
use crate::error::{Error, Result};
use crate::graph::MultiplexGraph;
use crate::sparse::SparseAdjacency;

/// Held-out links, each as `(dimension, u, v)` with `u < v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSplit {
    /// The input graph without the held-out positives.
    pub train: MultiplexGraph,
    pub positives: Vec<(usize, usize, usize)>,
    pub negatives: Vec<(usize, usize, usize)>,
}

/// Number of edges removed from a dimension with `edges` edges.
pub fn removal_count(edges: usize, ratio: f64) -> usize {
    if edges < 2 {
        return 0;
    }
    ((ratio * edges as f64).ceil() as usize).clamp(1, edges)
}

/// Removes `ceil(ratio * E_d)` random edges from every dimension and draws
/// as many distinct random non-edges of the original dimension.
pub fn split_links<R: Rng>(graph: &MultiplexGraph, ratio: f64, rng: &mut R) -> Result<LinkSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!(
            "link ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let n = graph.num_nodes();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    let mut dims = Vec::with_capacity(graph.num_dims());
    for (d, a) in graph.dimensions().iter().enumerate() {
        let edges = a.upper_edges();
        let k = removal_count(edges.len(), ratio);
        if k == 0 {
            log::warn!("dimension {d} has {} edges; nothing held out", edges.len());
            dims.push(a.clone());
            continue;
        }
        if total_pairs - edges.len() < k {
            return Err(Error::invalid(format!(
                "dimension {d} has {} non-edges, cannot draw {k} negatives",
                total_pairs - edges.len()
            )));
        }
        let picked: HashSet<usize> = index::sample(rng, edges.len(), k).into_iter().collect();
        let mut kept = Vec::with_capacity(edges.len() - k);
        for (i, &e) in edges.iter().enumerate() {
            if picked.contains(&i) {
                positives.push((d, e.0, e.1));
            } else {
                kept.push(e);
            }
        }
        let mut seen = HashSet::with_capacity(k);
        while seen.len() < k {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u == v {
                continue;
            }
            let (u, v) = (u.min(v), u.max(v));
            if a.pattern().position(u, v).is_none() && seen.insert((u, v)) {
                negatives.push((d, u, v));
            }
        }
        dims.push(SparseAdjacency::from_undirected_edges(n, &kept)?);
    }
    Ok(LinkSplit {
        train: graph.with_dimensions(dims)?,
        positives,
        negatives,
    })
}

/// `sigmoid(z_u . z_v)` for every pair.
pub fn link_scores(z: &Array2<f64>, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(u, v)| sigmoid(z.row(u).dot(&z.row(v))))
        .collect()
}

/// AUC-ROC and AP of the held-out positives against the negatives.
pub fn evaluate_links(z: &Array2<f64>, split: &LinkSplit) -> Result<(f64, f64)> {
    let pairs: Vec<(usize, usize)> = split
        .positives
        .iter()
        .chain(&split.negatives)
        .map(|&(_, u, v)| (u, v))
        .collect();
    let scores = link_scores(z, &pairs);
    let labels: Vec<bool> = (0..pairs.len())
        .map(|i| i < split.positives.len())
        .collect();
    Ok((
        auc_roc(&scores, &labels)?,
        average_precision(&scores, &labels)?,
    ))
}
