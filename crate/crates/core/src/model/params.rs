use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::HmgeConfig;

/// Groups of trainable tensors. See [`ParamFamily::decays`] for which ones
/// receive weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamFamily {
    Alpha,
    Gcn,
    AttentionV,
    AttentionY,
    Discriminator,
}

impl ParamFamily {
    pub fn decays(self) -> bool {
        matches!(
            self,
            ParamFamily::Gcn | ParamFamily::AttentionV | ParamFamily::Discriminator
        )
    }

    pub const ALL: [ParamFamily; 5] = [
        ParamFamily::Alpha,
        ParamFamily::Gcn,
        ParamFamily::AttentionV,
        ParamFamily::AttentionY,
        ParamFamily::Discriminator,
    ];
}

/// Attention parameters for one input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// `M x M`
    pub v: Array2<f64>,
    /// `M x 1`
    pub y: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// Pre-softmax combination logits, `D_{l-1} x D_l`.
    pub alpha: Array2<f64>,
    /// One convolution weight per input dimension.
    pub gcn: Vec<Array2<f64>>,
    pub attention: Vec<AttentionParams>,
}

/// Per-dimension convolution stacks used by linear aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams {
    /// `gcn[d][k]` is layer `k` of dimension `d`.
    pub gcn: Vec<Vec<Array2<f64>>>,
    pub attention: Vec<AttentionParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmgeParams {
    pub layers: Vec<LayerParams>,
    /// Convolution applied to the last latent graph.
    pub final_gcn: Option<Array2<f64>>,
    pub linear: Option<LinearParams>,
    /// Bilinear discriminator, `M x M`.
    pub discriminator: Array2<f64>,
}

impl HmgeParams {
    /// Correctly shaped parameters with every entry zero.
    pub fn zeros(config: &HmgeConfig, num_features: usize) -> Self {
        let m = config.embed_size;
        let schedule = &config.dims_schedule;
        let attention = |d: usize| -> Vec<AttentionParams> {
            (0..d)
                .map(|_| AttentionParams {
                    v: Array2::zeros((m, m)),
                    y: Array2::zeros((m, 1)),
                })
                .collect()
        };
        if config.is_linear() {
            let gcn = (0..schedule[0])
                .map(|_| {
                    (0..config.linear_depth)
                        .map(|k| Array2::zeros((if k == 0 { num_features } else { m }, m)))
                        .collect()
                })
                .collect();
            return Self {
                layers: Vec::new(),
                final_gcn: None,
                linear: Some(LinearParams {
                    gcn,
                    attention: attention(schedule[0]),
                }),
                discriminator: Array2::zeros((m, m)),
            };
        }
        let layers = (1..=config.num_layers)
            .map(|l| {
                let (d_in, d_out) = (schedule[l - 1], schedule[l]);
                let width = if l == 1 { num_features } else { m };
                LayerParams {
                    alpha: Array2::zeros((d_in, d_out)),
                    gcn: (0..d_in).map(|_| Array2::zeros((width, m))).collect(),
                    attention: attention(d_in),
                }
            })
            .collect();
        Self {
            layers,
            final_gcn: Some(Array2::zeros((m, m))),
            linear: None,
            discriminator: Array2::zeros((m, m)),
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, combination logits zero.
    pub fn init<R: Rng>(config: &HmgeConfig, num_features: usize, rng: &mut R) -> Self {
        let mut params = Self::zeros(config, num_features);
        params.for_each_mut(|_, family, t| {
            if family != ParamFamily::Alpha {
                let bound = 1.0 / (t.nrows() as f64).sqrt();
                t.mapv_inplace(|_| rng.random_range(-bound..bound));
            }
        });
        params
    }

    /// Shapes of every tensor in visiting order.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        self.for_each(|_, _, t| out.push(t.dim()));
        out
    }

    /// Visits every tensor in a fixed order with its name and family.
    pub fn for_each(&self, mut f: impl FnMut(&str, ParamFamily, &Array2<f64>)) {
        for (l, layer) in self.layers.iter().enumerate() {
            let l = l + 1;
            f(&format!("layer{l}.alpha"), ParamFamily::Alpha, &layer.alpha);
            for (d, w) in layer.gcn.iter().enumerate() {
                f(&format!("layer{l}.gcn.{d}"), ParamFamily::Gcn, w);
            }
            for (d, a) in layer.attention.iter().enumerate() {
                f(
                    &format!("layer{l}.att_v.{d}"),
                    ParamFamily::AttentionV,
                    &a.v,
                );
                f(
                    &format!("layer{l}.att_y.{d}"),
                    ParamFamily::AttentionY,
                    &a.y,
                );
            }
        }
        if let Some(w) = &self.final_gcn {
            f("final.gcn", ParamFamily::Gcn, w);
        }
        if let Some(lin) = &self.linear {
            for (d, stack) in lin.gcn.iter().enumerate() {
                for (k, w) in stack.iter().enumerate() {
                    f(&format!("linear.gcn.{d}.{k}"), ParamFamily::Gcn, w);
                }
            }
            for (d, a) in lin.attention.iter().enumerate() {
                f(&format!("linear.att_v.{d}"), ParamFamily::AttentionV, &a.v);
                f(&format!("linear.att_y.{d}"), ParamFamily::AttentionY, &a.y);
            }
        }
        f(
            "discriminator",
            ParamFamily::Discriminator,
            &self.discriminator,
        );
    }

    /// Mutable counterpart of [`HmgeParams::for_each`], same order.
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, ParamFamily, &mut Array2<f64>)) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let l = l + 1;
            f(
                &format!("layer{l}.alpha"),
                ParamFamily::Alpha,
                &mut layer.alpha,
            );
            for (d, w) in layer.gcn.iter_mut().enumerate() {
                f(&format!("layer{l}.gcn.{d}"), ParamFamily::Gcn, w);
            }
            for (d, a) in layer.attention.iter_mut().enumerate() {
                f(
                    &format!("layer{l}.att_v.{d}"),
                    ParamFamily::AttentionV,
                    &mut a.v,
                );
                f(
                    &format!("layer{l}.att_y.{d}"),
                    ParamFamily::AttentionY,
                    &mut a.y,
                );
            }
        }
        if let Some(w) = &mut self.final_gcn {
            f("final.gcn", ParamFamily::Gcn, w);
        }
        if let Some(lin) = &mut self.linear {
            for (d, stack) in lin.gcn.iter_mut().enumerate() {
                for (k, w) in stack.iter_mut().enumerate() {
                    f(&format!("linear.gcn.{d}.{k}"), ParamFamily::Gcn, w);
                }
            }
            for (d, a) in lin.attention.iter_mut().enumerate() {
                f(
                    &format!("linear.att_v.{d}"),
                    ParamFamily::AttentionV,
                    &mut a.v,
                );
                f(
                    &format!("linear.att_y.{d}"),
                    ParamFamily::AttentionY,
                    &mut a.y,
                );
            }
        }
        f(
            "discriminator",
            ParamFamily::Discriminator,
            &mut self.discriminator,
        );
    }

    /// Flattened copies of every tensor, in visiting order.
    pub fn to_tensors(&self) -> Vec<Array2<f64>> {
        let mut out = Vec::new();
        self.for_each(|_, _, t| out.push(t.clone()));
        out
    }

    /// Overwrites every tensor from a list produced by [`HmgeParams::to_tensors`].
    pub fn assign_tensors(&mut self, tensors: &[Array2<f64>]) {
        let mut it = tensors.iter();
        self.for_each_mut(|_, _, t| t.assign(it.next().expect("tensor count matches")));
    }

    pub fn families(&self) -> Vec<ParamFamily> {
        let mut out = Vec::new();
        self.for_each(|_, fam, _| out.push(fam));
        out
    }

    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.for_each(|name, _, _| out.push(name.to_string()));
        out
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(|_, _, t| ok &= t.iter().all(|v| v.is_finite()));
        ok
    }

    /// Softmax-normalized combination weights of every layer.
    pub fn combination_weights(&self) -> Vec<Array2<f64>> {
        self.layers
            .iter()
            .map(|l| softmax_columns(&l.alpha))
            .collect()
    }
}

pub fn softmax_columns(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut col in out.columns_mut() {
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in col.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        col.mapv_inplace(|v| v / total);
    }
    out
}
