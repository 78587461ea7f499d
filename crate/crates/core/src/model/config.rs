use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    /// Linearized model; only meaningful for closed-form checks.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionMode {
    /// Tanh scores divided by their signed row sum. Near-zero sums fall
    /// back to uniform weights, but sums just above the guard still give
    /// very large weights of either sign.
    Signed,
    /// The same tanh scores passed through a softmax over dimensions, which
    /// keeps every weight in (0, 1).
    Softmax,
    /// Plain sum over dimensions (every weight is 1).
    Sum,
}

/// Architecture of the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmgeConfig {
    /// Width of every hidden and output embedding.
    pub embed_size: usize,
    /// Number of hierarchical layers. Zero selects linear aggregation.
    pub num_layers: usize,
    /// Dimension count per level, starting with the input dimension count.
    pub dims_schedule: Vec<usize>,
    pub activation: Activation,
    pub attention: AttentionMode,
    /// GCN layers per input dimension when `num_layers == 0`.
    pub linear_depth: usize,
    /// Apply symmetric normalization before each convolution.
    pub normalize: bool,
    /// Keep combination logits at zero (uniform weights) and untrained.
    pub freeze_alpha: bool,
}

impl HmgeConfig {
    /// Hierarchical encoder with the default halving schedule.
    pub fn new(num_dims: usize, embed_size: usize, num_layers: usize) -> Self {
        Self {
            embed_size,
            num_layers,
            dims_schedule: default_schedule(num_dims, num_layers),
            activation: Activation::Relu,
            attention: AttentionMode::Softmax,
            linear_depth: num_layers + 1,
            normalize: true,
            freeze_alpha: false,
        }
    }

    /// Per-dimension GCN stacks of `depth` layers followed by one attention
    /// aggregation.
    pub fn linear(num_dims: usize, embed_size: usize, depth: usize) -> Self {
        Self {
            linear_depth: depth,
            ..Self::new(num_dims, embed_size, 0)
        }
    }

    pub fn with_schedule(mut self, schedule: Vec<usize>) -> Self {
        self.dims_schedule = schedule;
        self
    }

    pub fn is_linear(&self) -> bool {
        self.num_layers == 0
    }

    pub fn input_dims(&self) -> usize {
        self.dims_schedule[0]
    }

    pub fn validate(&self, graph_dims: usize) -> Result<()> {
        let s = &self.dims_schedule;
        if self.embed_size == 0 {
            return Err(Error::Config("embed_size must be positive".into()));
        }
        if s.len() != self.num_layers + 1 {
            return Err(Error::Config(format!(
                "schedule {s:?} has {} entries for {} layers",
                s.len(),
                self.num_layers
            )));
        }
        if s[0] != graph_dims {
            return Err(Error::Config(format!(
                "schedule starts at {} but the graph has {graph_dims} dimensions",
                s[0]
            )));
        }
        if s.contains(&0) {
            return Err(Error::Config("schedule entries must be positive".into()));
        }
        // Strictly decreasing until 1; a single dimension may repeat.
        if let Some(w) = s
            .windows(2)
            .find(|w| !(w[1] < w[0] || (w[0] == 1 && w[1] == 1)))
        {
            return Err(Error::Config(format!(
                "schedule must decrease: {} -> {}",
                w[0], w[1]
            )));
        }
        if self.num_layers >= 1 && s[self.num_layers] != 1 {
            return Err(Error::Config(format!(
                "schedule must end at a single dimension, got {s:?}"
            )));
        }
        if self.is_linear() && self.linear_depth == 0 {
            return Err(Error::Config("linear aggregation needs depth >= 1".into()));
        }
        Ok(())
    }
}

/// Halves the dimension count (rounding up) at every layer and ends at 1.
pub fn default_schedule(num_dims: usize, num_layers: usize) -> Vec<usize> {
    let mut s = vec![num_dims];
    for l in 1..=num_layers {
        let next = if l == num_layers {
            1
        } else {
            s[l - 1].div_ceil(2).max(1)
        };
        s.push(next);
    }
    s
}
