//! Multiplex graph data model.

use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sparse::SparseAdjacency;

/// A set of undirected graphs ("dimensions") over one node set that share a
/// feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplexGraph {
    dimensions: Arc<[SparseAdjacency]>,
    features: Array2<f64>,
    labels: Option<Vec<Vec<usize>>>,
    max_edges: usize,
}

impl MultiplexGraph {
    /// Validates and assembles a multiplex graph. Every dimension must be a
    /// symmetric 0/1 matrix without self-loops.
    pub fn new(
        dimensions: Vec<SparseAdjacency>,
        features: Array2<f64>,
        labels: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::invalid("a multiplex graph needs at least one node"));
        }
        if features.ncols() == 0 {
            return Err(Error::invalid(
                "a multiplex graph needs at least one feature",
            ));
        }
        if dimensions.is_empty() {
            return Err(Error::invalid(
                "a multiplex graph needs at least one dimension",
            ));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("features contain a non-finite value"));
        }
        for (d, a) in dimensions.iter().enumerate() {
            if a.n() != n {
                return Err(Error::invalid(format!(
                    "dimension {d} has {} nodes, features have {n}",
                    a.n()
                )));
            }
            if a.values().iter().any(|&v| v != 1.0) {
                return Err(Error::invalid(format!(
                    "dimension {d} has non-binary entries"
                )));
            }
            if a.pattern().has_diagonal_entries() {
                return Err(Error::invalid(format!(
                    "dimension {d} contains a self-loop"
                )));
            }
            if a.max_asymmetry() != 0.0 {
                return Err(Error::invalid(format!("dimension {d} is not symmetric")));
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::invalid(format!(
                    "{} label rows for {n} nodes",
                    labels.len()
                )));
            }
        }
        let max_edges = dimensions.iter().map(|a| a.nnz() / 2).max().unwrap_or(0);
        Ok(Self {
            dimensions: dimensions.into(),
            features,
            labels,
            max_edges,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_dims(&self) -> usize {
        self.dimensions.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    /// Largest undirected edge count over all dimensions.
    pub fn max_edges(&self) -> usize {
        self.max_edges
    }

    pub fn dimensions(&self) -> &[SparseAdjacency] {
        &self.dimensions
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[Vec<usize>]> {
        self.labels.as_deref()
    }

    /// One label per node, or `None` when labels are missing or multilabel.
    pub fn single_labels(&self) -> Option<Vec<usize>> {
        let labels = self.labels.as_ref()?;
        labels
            .iter()
            .map(|set| (set.len() == 1).then(|| set[0]))
            .collect()
    }

    pub fn is_multilabel(&self) -> bool {
        self.labels
            .as_ref()
            .is_some_and(|l| l.iter().any(|set| set.len() != 1))
    }

    /// Number of classes implied by the labels (largest id + 1).
    pub fn num_classes(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().flatten().max().map(|m| m + 1))
            .unwrap_or(0)
    }

    /// Same structure and labels with a different feature matrix.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Self> {
        if features.dim() != self.features.dim() {
            return Err(Error::shape(
                "with_features",
                format!("{:?} vs {:?}", features.dim(), self.features.dim()),
            ));
        }
        Ok(Self {
            dimensions: self.dimensions.clone(),
            features,
            labels: self.labels.clone(),
            max_edges: self.max_edges,
        })
    }

    /// Same nodes and features with replacement dimensions.
    pub fn with_dimensions(&self, dimensions: Vec<SparseAdjacency>) -> Result<Self> {
        Self::new(dimensions, self.features.clone(), self.labels.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparsePattern;

    fn dim(n: usize, edges: &[(usize, usize)]) -> SparseAdjacency {
        SparseAdjacency::from_undirected_edges(n, edges).unwrap()
    }

    #[test]
    fn accepts_valid_graph() {
        let g = MultiplexGraph::new(
            vec![dim(3, &[(0, 1)]), dim(3, &[(1, 2), (0, 2)])],
            Array2::ones((3, 1)),
            Some(vec![vec![0], vec![1], vec![0, 1]]),
        )
        .unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_dims(), 2);
        assert_eq!(g.max_edges(), 2);
        assert!(g.is_multilabel());
        assert!(g.single_labels().is_none());
        assert_eq!(g.num_classes(), 2);
    }

    #[test]
    fn rejects_asymmetric_dimension() {
        let p = SparsePattern::from_coords(2, 2, &[(0, 1)]).unwrap();
        let a = SparseAdjacency::new(Arc::new(p), vec![1.0]).unwrap();
        assert!(MultiplexGraph::new(vec![a], Array2::ones((2, 1)), None).is_err());
    }

    #[test]
    fn rejects_self_loop() {
        let a = dim(2, &[(1, 1)]);
        assert!(MultiplexGraph::new(vec![a], Array2::ones((2, 1)), None).is_err());
    }

    #[test]
    fn rejects_mismatched_sizes() {
        assert!(MultiplexGraph::new(vec![dim(3, &[])], Array2::ones((2, 1)), None).is_err());
        assert!(MultiplexGraph::new(vec![], Array2::ones((2, 1)), None).is_err());
        assert!(MultiplexGraph::new(vec![dim(2, &[])], Array2::ones((2, 0)), None).is_err());
    }
}
