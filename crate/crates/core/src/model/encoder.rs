use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};

use super::config::{Activation, AttentionMode, HmgeConfig};
use super::params::{HmgeParams, ParamFamily};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::MultiplexGraph;
use crate::sparse::{
    normalize_adjacency, SelfLoopLayout, SparseAdjacency, SparsePattern, UnionLayout,
};

/// Attention rows whose raw score sum is smaller than this fall back to
/// uniform weights.
pub const ATTENTION_GUARD: f64 = 1e-6;

/// Parameter tensors bound to tape variables, mirroring [`HmgeParams`].
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub layers: Vec<BoundLayer>,
    pub final_gcn: Option<Var>,
    pub linear: Option<BoundLinear>,
    pub discriminator: Var,
    /// Every variable in [`HmgeParams::for_each`] order.
    pub all: Vec<Var>,
}

#[derive(Debug, Clone)]
pub struct BoundLayer {
    pub alpha: Var,
    pub gcn: Vec<Var>,
    pub attention: Vec<(Var, Var)>,
}

#[derive(Debug, Clone)]
pub struct BoundLinear {
    pub gcn: Vec<Vec<Var>>,
    pub attention: Vec<(Var, Var)>,
}

impl BoundParams {
    /// Registers every tensor on the tape. Frozen combination logits become
    /// constants.
    pub fn bind(tape: &mut Tape, params: &HmgeParams, config: &HmgeConfig) -> Self {
        let mut vars = Vec::new();
        params.for_each(|_, family, t| {
            let v = if family == ParamFamily::Alpha && config.freeze_alpha {
                tape.constant(t.clone())
            } else {
                tape.parameter(t.clone(), family.decays())
            };
            vars.push(v);
        });
        Self::from_vars(params, &vars)
    }

    /// Structures a flat variable list laid out like `template`.
    pub fn from_vars(template: &HmgeParams, vars: &[Var]) -> Self {
        let mut it = vars.iter().copied();
        let mut next = || it.next().expect("one variable per tensor");
        let layers = template
            .layers
            .iter()
            .map(|l| {
                let alpha = next();
                let gcn = l.gcn.iter().map(|_| next()).collect();
                let attention = l.attention.iter().map(|_| (next(), next())).collect();
                BoundLayer {
                    alpha,
                    gcn,
                    attention,
                }
            })
            .collect();
        let final_gcn = template.final_gcn.as_ref().map(|_| next());
        let linear = template.linear.as_ref().map(|lin| BoundLinear {
            gcn: lin
                .gcn
                .iter()
                .map(|stack| stack.iter().map(|_| next()).collect())
                .collect(),
            attention: lin.attention.iter().map(|_| (next(), next())).collect(),
        });
        let discriminator = next();
        Self {
            layers,
            final_gcn,
            linear,
            discriminator,
            all: vars.to_vec(),
        }
    }
}

/// Sparse matrix on the tape: a fixed pattern plus an `nnz x 1` value node.
#[derive(Debug, Clone)]
pub struct TapeSparse {
    pub pattern: Arc<SparsePattern>,
    pub values: Var,
}

/// One graph dimension at some level of the hierarchy.
#[derive(Debug, Clone)]
pub struct LatentDim {
    /// Adjacency as combined (before normalization).
    pub raw: TapeSparse,
    /// Operator used for propagation (normalized unless disabled).
    pub prop: TapeSparse,
}

/// Every level of the hierarchy, level 0 holding the input dimensions.
#[derive(Debug, Clone)]
pub struct Latent {
    pub levels: Vec<Vec<LatentDim>>,
}

/// Per-layer record of one embedding pass.
#[derive(Debug, Clone)]
pub struct LayerVars {
    /// Dimension-specific embeddings `H_d`.
    pub per_dim: Vec<Var>,
    /// `N x D` attention weights.
    pub beta: Var,
    /// Aggregated embeddings.
    pub h: Var,
}

#[derive(Debug, Clone)]
pub struct Embedded {
    pub layers: Vec<LayerVars>,
    pub z: Var,
}

struct InputDim {
    raw_pattern: Arc<SparsePattern>,
    raw_values: Array2<f64>,
    prop_pattern: Arc<SparsePattern>,
    prop_values: Array2<f64>,
}

struct LayerLayout {
    union: Arc<SparsePattern>,
    maps: Arc<Vec<Vec<usize>>>,
    self_loops: Option<Arc<SelfLoopLayout>>,
}

/// A graph preprocessed for one encoder configuration. Input
/// normalization and all combination layouts are computed once; the
/// combined values depend on parameters and are rebuilt on each tape.
pub struct Encoder {
    config: HmgeConfig,
    num_features: usize,
    features: Array2<f64>,
    inputs: Vec<InputDim>,
    layouts: Vec<LayerLayout>,
}

fn column(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((values.len(), 1), values.to_vec()).expect("column")
}

impl Encoder {
    pub fn new(graph: &MultiplexGraph, config: &HmgeConfig) -> Result<Self> {
        config.validate(graph.num_dims())?;
        let inputs = graph
            .dimensions()
            .iter()
            .map(|a| -> Result<InputDim> {
                let (prop_pattern, prop_values) = if config.normalize {
                    let n = normalize_adjacency(a)?.into_inner();
                    (n.pattern().clone(), column(n.values()))
                } else {
                    (a.pattern().clone(), column(a.values()))
                };
                Ok(InputDim {
                    raw_pattern: a.pattern().clone(),
                    raw_values: column(a.values()),
                    prop_pattern,
                    prop_values,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut layouts: Vec<LayerLayout> = Vec::with_capacity(config.num_layers);
        for l in 0..config.num_layers {
            let union = if l == 0 {
                let patterns: Vec<&SparsePattern> =
                    inputs.iter().map(|d| &*d.raw_pattern).collect();
                UnionLayout::new(&patterns)?
            } else {
                let prev = &layouts[l - 1].union;
                let patterns = vec![&**prev; config.dims_schedule[l]];
                UnionLayout::new(&patterns)?
            };
            let self_loops = config
                .normalize
                .then(|| Arc::new(SelfLoopLayout::new(&union.pattern)));
            layouts.push(LayerLayout {
                union: union.pattern,
                maps: Arc::new(union.maps),
                self_loops,
            });
        }
        Ok(Self {
            config: config.clone(),
            num_features: graph.num_features(),
            features: graph.features().clone(),
            inputs,
            layouts,
        })
    }

    pub fn config(&self) -> &HmgeConfig {
        &self.config
    }

    pub fn num_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    /// Stored entries of the combined pattern at each hidden level.
    pub fn latent_nnz(&self) -> Vec<usize> {
        self.layouts.iter().map(|l| l.union.nnz()).collect()
    }

    pub fn check_params(&self, params: &HmgeParams) -> Result<()> {
        let expected = HmgeParams::zeros(&self.config, self.num_features).shapes();
        let got = params.shapes();
        if expected != got {
            return Err(Error::shape(
                "encoder parameters",
                format!("expected shapes {expected:?}, got {got:?}"),
            ));
        }
        if !params.is_finite() {
            return Err(Error::Numeric("parameters hold non-finite values".into()));
        }
        Ok(())
    }

    fn act(&self, tape: &mut Tape, v: Var) -> Result<Var> {
        match self.config.activation {
            Activation::Relu => tape.relu(v),
            Activation::Identity => Ok(v),
        }
    }

    /// Builds every latent adjacency of the hierarchy. The result depends
    /// only on the combination logits and can be shared by several
    /// embedding passes on the same tape.
    pub fn latent(&self, tape: &mut Tape, bound: &BoundParams) -> Result<Latent> {
        let level0: Vec<LatentDim> = self
            .inputs
            .iter()
            .map(|d| {
                let raw = tape.constant(d.raw_values.clone());
                let prop = tape.constant(d.prop_values.clone());
                LatentDim {
                    raw: TapeSparse {
                        pattern: d.raw_pattern.clone(),
                        values: raw,
                    },
                    prop: TapeSparse {
                        pattern: d.prop_pattern.clone(),
                        values: prop,
                    },
                }
            })
            .collect();
        let mut levels = vec![level0];
        for (l, layout) in self.layouts.iter().enumerate() {
            let weights = tape.softmax_cols(bound.layers[l].alpha)?;
            let inputs: Vec<Var> = levels[l].iter().map(|d| d.raw.values).collect();
            let mut next = Vec::with_capacity(self.config.dims_schedule[l + 1]);
            for j in 0..self.config.dims_schedule[l + 1] {
                let combined =
                    tape.sparse_combine(&layout.maps, layout.union.nnz(), &inputs, weights, j)?;
                let raw = self.act(tape, combined)?;
                let prop = match &layout.self_loops {
                    Some(sl) => TapeSparse {
                        pattern: sl.pattern.clone(),
                        values: tape.sparse_normalize(sl, raw)?,
                    },
                    None => TapeSparse {
                        pattern: layout.union.clone(),
                        values: raw,
                    },
                };
                next.push(LatentDim {
                    raw: TapeSparse {
                        pattern: layout.union.clone(),
                        values: raw,
                    },
                    prop,
                });
            }
            levels.push(next);
        }
        Ok(Latent { levels })
    }

    /// `act(A H W)`, multiplying in whichever order is cheaper.
    fn gcn(&self, tape: &mut Tape, a: &TapeSparse, h: Var, w: Var) -> Result<Var> {
        let width = tape.value(h).ncols();
        let out_width = tape.value(w).ncols();
        let out = if width <= out_width {
            let ah = tape.spmm(&a.pattern, a.values, h)?;
            tape.matmul(ah, w)?
        } else {
            let hw = tape.matmul(h, w)?;
            tape.spmm(&a.pattern, a.values, hw)?
        };
        self.act(tape, out)
    }

    /// Weighted sum of dimension-specific embeddings. Returns the `N x D`
    /// weights and the aggregate.
    fn attend(&self, tape: &mut Tape, per_dim: &[Var], att: &[(Var, Var)]) -> Result<(Var, Var)> {
        attention_on_tape(tape, per_dim, att, self.config.attention)
    }

    /// Runs the encoder for the given node features over prebuilt latent
    /// graphs.
    pub fn embed(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        latent: &Latent,
        features: Var,
    ) -> Result<Embedded> {
        if let Some(lin) = &bound.linear {
            let mut per_dim = Vec::with_capacity(self.inputs.len());
            for (d, dim) in latent.levels[0].iter().enumerate() {
                let mut h = features;
                for &w in &lin.gcn[d] {
                    h = self.gcn(tape, &dim.prop, h, w)?;
                }
                per_dim.push(h);
            }
            let (beta, z) = self.attend(tape, &per_dim, &lin.attention)?;
            return Ok(Embedded {
                layers: vec![LayerVars {
                    per_dim,
                    beta,
                    h: z,
                }],
                z,
            });
        }
        let mut h = features;
        let mut layers = Vec::with_capacity(self.config.num_layers);
        for (l, layer) in bound.layers.iter().enumerate() {
            let per_dim = latent.levels[l]
                .iter()
                .zip(&layer.gcn)
                .map(|(dim, &w)| self.gcn(tape, &dim.prop, h, w))
                .collect::<Result<Vec<_>>>()?;
            let (beta, agg) = self.attend(tape, &per_dim, &layer.attention)?;
            layers.push(LayerVars {
                per_dim,
                beta,
                h: agg,
            });
            h = agg;
        }
        let last = &latent.levels[self.config.num_layers][0];
        let w = bound
            .final_gcn
            .ok_or_else(|| Error::invalid("hierarchical parameters lack a final convolution"))?;
        let z = self.gcn(tape, &last.prop, h, w)?;
        Ok(Embedded { layers, z })
    }

    /// Latent graphs plus one embedding pass.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        features: Var,
    ) -> Result<(Latent, Embedded)> {
        let latent = self.latent(tape, bound)?;
        let embedded = self.embed(tape, bound, &latent, features)?;
        Ok((latent, embedded))
    }

    /// Final embeddings for the clean features.
    pub fn embeddings(&self, params: &HmgeParams) -> Result<Array2<f64>> {
        Ok(self.trace(params, None)?.z)
    }

    /// Full forward record. With `corrupted` features, also embeds them over
    /// the same latent graphs.
    pub fn trace(
        &self,
        params: &HmgeParams,
        corrupted: Option<&Array2<f64>>,
    ) -> Result<ForwardTrace> {
        self.check_params(params)?;
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, params, &self.config);
        let x = tape.constant(self.features.clone());
        let (latent, clean) = self.forward(&mut tape, &bound, x)?;
        let z_corrupted = match corrupted {
            Some(xc) => {
                if xc.dim() != self.features.dim() {
                    return Err(Error::shape(
                        "corrupted features",
                        format!("{:?} against {:?}", xc.dim(), self.features.dim()),
                    ));
                }
                let xc = tape.constant(xc.clone());
                let e = self.embed(&mut tape, &bound, &latent, xc)?;
                Some(tape.value(e.z).clone())
            }
            None => None,
        };
        let latent_graphs = latent.levels[1..]
            .iter()
            .map(|level| {
                level
                    .iter()
                    .map(|d| {
                        SparseAdjacency::new(
                            d.raw.pattern.clone(),
                            tape.value(d.raw.values).iter().copied().collect(),
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let z = tape.value(clean.z).clone();
        Ok(ForwardTrace {
            latent: latent_graphs,
            embeddings: clean
                .layers
                .iter()
                .map(|l| tape.value(l.h).clone())
                .collect(),
            attention: clean
                .layers
                .iter()
                .map(|l| tape.value(l.beta).clone())
                .collect(),
            summary: readout(&z),
            z,
            z_corrupted,
        })
    }
}

/// Record of a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Latent adjacencies per hidden layer, `latent[l - 1][j]`.
    pub latent: Vec<Vec<SparseAdjacency>>,
    /// Aggregated embeddings after each hidden layer (the linear encoder
    /// records its single aggregation here).
    pub embeddings: Vec<Array2<f64>>,
    /// Attention weights per layer, `N x D_{l-1}`.
    pub attention: Vec<Array2<f64>>,
    pub z: Array2<f64>,
    pub z_corrupted: Option<Array2<f64>>,
    pub summary: Array1<f64>,
}

pub(crate) fn attention_on_tape(
    tape: &mut Tape,
    per_dim: &[Var],
    att: &[(Var, Var)],
    mode: AttentionMode,
) -> Result<(Var, Var)> {
    let first = *per_dim
        .first()
        .ok_or_else(|| Error::invalid("attention over zero dimensions"))?;
    let n = tape.value(first).nrows();
    if per_dim.len() == 1 {
        let beta = tape.constant(Array2::ones((n, 1)));
        return Ok((beta, first));
    }
    match mode {
        AttentionMode::Sum => {
            let beta = tape.constant(Array2::ones((n, per_dim.len())));
            let mut acc = first;
            for &h in &per_dim[1..] {
                acc = tape.add(acc, h)?;
            }
            Ok((beta, acc))
        }
        AttentionMode::Signed | AttentionMode::Softmax => {
            let mut scores = Vec::with_capacity(per_dim.len());
            for (&h, &(v, y)) in per_dim.iter().zip(att) {
                let vt = tape.transpose(v)?;
                let vy = tape.matmul(vt, y)?;
                let raw = tape.matmul(h, vy)?;
                scores.push(tape.tanh(raw)?);
            }
            let stacked = tape.concat_cols(&scores)?;
            let beta = if mode == AttentionMode::Softmax {
                tape.softmax_rows(stacked)?
            } else {
                tape.normalize_rows(stacked, ATTENTION_GUARD)?
            };
            let mut acc: Option<Var> = None;
            for (d, &h) in per_dim.iter().enumerate() {
                let col = tape.select_col(beta, d)?;
                let term = tape.mul_col(col, h)?;
                acc = Some(match acc {
                    Some(a) => tape.add(a, term)?,
                    None => term,
                });
            }
            Ok((beta, acc.expect("at least two dimensions")))
        }
    }
}

/// `relu(A_norm H W)`.
pub fn gcn_forward(
    h: &Array2<f64>,
    a: &crate::sparse::NormalizedAdjacency,
    w: &Array2<f64>,
) -> Result<Array2<f64>> {
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone());
    let wv = tape.constant(w.clone());
    let av = tape.constant(column(a.values()));
    let ah = tape.spmm(a.pattern(), av, hv)?;
    let out = tape.matmul(ah, wv)?;
    let out = tape.relu(out)?;
    Ok(tape.value(out).clone())
}

/// Attention over dimension-specific embeddings. Returns the aggregate and
/// the `N x D` weights.
pub fn attention_aggregate(
    per_dim: &[Array2<f64>],
    attention: &[super::params::AttentionParams],
    mode: AttentionMode,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if per_dim.len() != attention.len() {
        return Err(Error::shape(
            "attention_aggregate",
            format!(
                "{} embeddings, {} attention blocks",
                per_dim.len(),
                attention.len()
            ),
        ));
    }
    let mut tape = Tape::new();
    let hs: Vec<Var> = per_dim.iter().map(|h| tape.constant(h.clone())).collect();
    let att: Vec<(Var, Var)> = attention
        .iter()
        .map(|a| (tape.constant(a.v.clone()), tape.constant(a.y.clone())))
        .collect();
    let (beta, h) = attention_on_tape(&mut tape, &hs, &att, mode)?;
    Ok((tape.value(h).clone(), tape.value(beta).clone()))
}

/// `act(sum_i softmax_col(alpha)_{ij} A_i)` for every output `j`, stored on
/// the union pattern of the inputs.
pub fn combine_adjacencies(
    inputs: &[SparseAdjacency],
    alpha: &Array2<f64>,
    activation: Activation,
) -> Result<Vec<SparseAdjacency>> {
    if alpha.nrows() != inputs.len() {
        return Err(Error::shape(
            "combine_adjacencies",
            format!("{} inputs, logits {:?}", inputs.len(), alpha.dim()),
        ));
    }
    let patterns: Vec<&SparsePattern> = inputs.iter().map(|a| &**a.pattern()).collect();
    let layout = UnionLayout::new(&patterns)?;
    let maps = Arc::new(layout.maps);
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|a| tape.constant(column(a.values())))
        .collect();
    let logits = tape.constant(alpha.clone());
    let weights = tape.softmax_cols(logits)?;
    (0..alpha.ncols())
        .map(|j| {
            let c = tape.sparse_combine(&maps, layout.pattern.nnz(), &vars, weights, j)?;
            let c = match activation {
                Activation::Relu => tape.relu(c)?,
                Activation::Identity => c,
            };
            SparseAdjacency::new(
                layout.pattern.clone(),
                tape.value(c).iter().copied().collect(),
            )
        })
        .collect()
}

/// Column mean of the embeddings.
pub fn readout(z: &Array2<f64>) -> Array1<f64> {
    let mut tape = Tape::new();
    let v = tape.constant(z.clone());
    match tape.mean_rows(v) {
        Ok(s) => tape.value(s).row(0).to_owned(),
        Err(_) => Array1::zeros(z.ncols()),
    }
}

/// `sigmoid(h Q s^T)`.
pub fn discriminate(h: &Array1<f64>, s: &Array1<f64>, q: &Array2<f64>) -> Result<f64> {
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone().insert_axis(Axis(0)));
    let sv = tape.constant(s.clone().insert_axis(Axis(0)));
    let qv = tape.constant(q.clone());
    let score = tape.bilinear(hv, qv, sv)?;
    let p = tape.sigmoid(score)?;
    Ok(tape.scalar(p))
}

/// Final embeddings of the hierarchical encoder (or of the linear encoder
/// when `config.num_layers == 0`).
pub fn encode(
    graph: &MultiplexGraph,
    params: &HmgeParams,
    config: &HmgeConfig,
) -> Result<ForwardTrace> {
    Encoder::new(graph, config)?.trace(params, None)
}

/// Per-dimension convolution stacks aggregated once by attention.
pub fn linear_aggregation_encode(
    graph: &MultiplexGraph,
    params: &HmgeParams,
    config: &HmgeConfig,
) -> Result<Array2<f64>> {
    if !config.is_linear() {
        return Err(Error::Config(
            "linear aggregation needs a configuration with zero layers".into(),
        ));
    }
    Ok(encode(graph, params, config)?.z)
}
