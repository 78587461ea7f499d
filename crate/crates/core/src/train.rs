//! InfoMax training with feature-shuffling corruption and a bilinear
//! discriminator, optimized by AdamW until the training loss stalls.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::MultiplexGraph;
use crate::model::{BoundParams, Encoder, HmgeConfig, HmgeParams};

/// Log arguments are clamped to `[CLAMP, 1 - CLAMP]`.
pub const CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Epochs without improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            learning_rate: 0.001,
            weight_decay: 1e-5,
            patience: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.patience == 0 || self.patience > self.epochs {
            return Err(Error::Config(format!(
                "patience must lie in 1..={}, got {}",
                self.epochs, self.patience
            )));
        }
        Ok(())
    }
}

/// Adam moments for a list of tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        Self {
            m: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            v: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One AdamW update. Weight decay is applied directly to the tensors
    /// flagged in `decay`, scaled by the learning rate.
    pub fn update(
        &mut self,
        params: &mut [Array2<f64>],
        grads: &[Array2<f64>],
        decay: &[bool],
        lr: f64,
        weight_decay: f64,
    ) -> Result<()> {
        if params.len() != self.m.len()
            || grads.len() != params.len()
            || decay.len() != params.len()
        {
            return Err(Error::shape(
                "adam",
                format!(
                    "{} tensors, {} gradients, {} decay flags, {} moments",
                    params.len(),
                    grads.len(),
                    decay.len(),
                    self.m.len()
                ),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for i in 0..params.len() {
            if params[i].dim() != grads[i].dim() || params[i].dim() != self.m[i].dim() {
                return Err(Error::shape(
                    "adam",
                    format!(
                        "tensor {i}: {:?} against gradient {:?}",
                        params[i].dim(),
                        grads[i].dim()
                    ),
                ));
            }
            let wd = if decay[i] { weight_decay } else { 0.0 };
            ndarray::Zip::from(&mut params[i])
                .and(&grads[i])
                .and(&mut self.m[i])
                .and(&mut self.v[i])
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let step = (*m / c1) / ((*v / c2).sqrt() + eps);
                    *p -= lr * (step + wd * *p);
                });
        }
        Ok(())
    }
}

/// Uniformly random permutation of `0..n`.
pub fn permutation<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Rows of `x` reordered so that row `i` becomes `x[perm[i]]`.
pub fn permute_rows(x: &Array2<f64>, perm: &[usize]) -> Array2<f64> {
    x.select(ndarray::Axis(0), perm)
}

/// Copy of the graph with feature rows shuffled; structure is shared.
pub fn corrupt<R: Rng>(graph: &MultiplexGraph, rng: &mut R) -> MultiplexGraph {
    let perm = permutation(graph.num_nodes(), rng);
    graph
        .with_features(permute_rows(graph.features(), &perm))
        .expect("a row permutation keeps the feature shape")
}

/// Random stream used for the corruption of one epoch.
pub fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    rng
}

/// Mean binary cross-entropy of the discriminator with clean rows labeled
/// 1 and corrupted rows labeled 0.
pub fn infomax_loss(tape: &mut Tape, z: Var, z_corrupted: Var, s: Var, q: Var) -> Result<Var> {
    for v in [z, z_corrupted, s, q] {
        if tape.value(v).iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("loss input holds a non-finite value".into()));
        }
    }
    let pos = tape.bilinear(z, q, s)?;
    let pos = tape.sigmoid(pos)?;
    let pos = tape.clamp(pos, CLAMP, 1.0 - CLAMP)?;
    let pos = tape.log(pos)?;
    let neg = tape.bilinear(z_corrupted, q, s)?;
    let neg = tape.sigmoid(neg)?;
    let neg = tape.scale(neg, -1.0)?;
    let neg = tape.add_scalar(neg, 1.0)?;
    let neg = tape.clamp(neg, CLAMP, 1.0 - CLAMP)?;
    let neg = tape.log(neg)?;
    let all = tape.stack_rows(&[pos, neg])?;
    let mean = tape.mean(all)?;
    tape.scale(mean, -1.0)
}

/// Full objective on an existing tape. The readout comes from the clean
/// pass and is shared by both discriminator terms.
pub fn objective(
    tape: &mut Tape,
    encoder: &Encoder,
    bound: &BoundParams,
    corrupted: &Array2<f64>,
) -> Result<Var> {
    let latent = encoder.latent(tape, bound)?;
    let x = tape.constant(encoder.features().clone());
    let clean = encoder.embed(tape, bound, &latent, x)?;
    let xc = tape.constant(corrupted.clone());
    let fake = encoder.embed(tape, bound, &latent, xc)?;
    let s = tape.mean_rows(clean.z)?;
    infomax_loss(tape, clean.z, fake.z, s, bound.discriminator)
}

/// Loss of `params` for a given corruption, without gradients.
pub fn evaluate_loss(
    encoder: &Encoder,
    params: &HmgeParams,
    corrupted: &Array2<f64>,
) -> Result<f64> {
    encoder.check_params(params)?;
    let mut tape = Tape::new();
    let bound = BoundParams::bind(&mut tape, params, encoder.config());
    let loss = objective(&mut tape, encoder, &bound, corrupted)?;
    Ok(tape.scalar(loss))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub best_loss: f64,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters that produced the lowest loss.
    pub params: HmgeParams,
    /// Embeddings of the clean graph under `params`.
    pub embeddings: Array2<f64>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainOutcome {
    pub fn best_loss(&self) -> f64 {
        self.history[self.best_epoch].best_loss
    }
}

/// Seeds parameters from `train_config.seed` and trains.
pub fn train(
    graph: &MultiplexGraph,
    config: &HmgeConfig,
    train_config: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    let params = HmgeParams::init(config, graph.num_features(), &mut rng);
    train_from(graph, config, train_config, params)
}

/// Trains starting from the given parameters.
pub fn train_from(
    graph: &MultiplexGraph,
    config: &HmgeConfig,
    train_config: &TrainConfig,
    params: HmgeParams,
) -> Result<TrainOutcome> {
    train_config.validate()?;
    let encoder = Encoder::new(graph, config)?;
    encoder.check_params(&params)?;
    let mut tensors = params.to_tensors();
    let decay: Vec<bool> = params.families().iter().map(|f| f.decays()).collect();
    let shapes = params.shapes();
    let mut adam = AdamState::new(&shapes);
    let mut current = params;

    let start = Instant::now();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, HmgeParams)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;
    for epoch in 0..train_config.epochs {
        let perm = permutation(graph.num_nodes(), &mut epoch_rng(train_config.seed, epoch));
        let corrupted = permute_rows(graph.features(), &perm);

        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, &current, config);
        let loss = objective(&mut tape, &encoder, &bound, &corrupted)?;
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "loss became {value} at epoch {epoch}"
            )));
        }
        match &best {
            Some((b, _, _)) if value >= *b => since_best += 1,
            _ => {
                best = Some((value, epoch, current.clone()));
                since_best = 0;
            }
        }
        let best_loss = best.as_ref().map(|b| b.0).unwrap_or(value);
        history.push(EpochRecord {
            epoch,
            loss: value,
            best_loss,
            elapsed_ms: start.elapsed().as_millis(),
        });
        log::debug!("epoch {epoch}: loss {value:.6} best {best_loss:.6}");
        if since_best >= train_config.patience {
            stopped_early = true;
            break;
        }

        tape.backward(loss)?;
        let grads: Vec<Array2<f64>> = bound.all.iter().map(|&v| tape.grad(v)).collect();
        drop(tape);
        adam.update(
            &mut tensors,
            &grads,
            &decay,
            train_config.learning_rate,
            train_config.weight_decay,
        )?;
        current.assign_tensors(&tensors);
        if !current.is_finite() {
            return Err(Error::Numeric(format!(
                "parameters became non-finite after epoch {epoch}"
            )));
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch ran");
    log::info!(
        "trained {} epochs, best loss {:.6} at epoch {best_epoch}",
        history.len(),
        history[best_epoch].loss
    );
    let embeddings = encoder.embeddings(&params)?;
    Ok(TrainOutcome {
        params,
        embeddings,
        history,
        best_epoch,
        stopped_early,
    })
}

/// `epoch,loss,best_loss` rows. Wall-clock time is left out so that equal
/// seeds give byte-identical logs.
pub fn format_train_log(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,loss,best_loss\n");
    for r in history {
        writeln!(out, "{},{},{}", r.epoch, r.loss, r.best_loss).expect("write to memory");
    }
    out
}

pub fn write_train_log(path: &Path, history: &[EpochRecord]) -> Result<()> {
    crate::io::write(path, &format_train_log(history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseAdjacency;
    use ndarray::array;

    fn small_graph() -> MultiplexGraph {
        let a1 = SparseAdjacency::from_undirected_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let a2 = SparseAdjacency::from_undirected_edges(4, &[(0, 2), (1, 3)]).unwrap();
        let x = array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.2, 0.9]];
        MultiplexGraph::new(vec![a1, a2], x, None).unwrap()
    }

    #[test]
    fn corruption_permutes_rows() {
        let g = small_graph();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = corrupt(&g, &mut rng);
        let mut a: Vec<Vec<u64>> = g
            .features()
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.to_bits()).collect())
            .collect();
        let mut b: Vec<Vec<u64>> = c
            .features()
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.to_bits()).collect())
            .collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_eq!(c.dimensions(), g.dimensions());
        let again = corrupt(&g, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(again.features(), c.features());
    }

    #[test]
    fn corruption_of_one_node_is_identity() {
        let a = SparseAdjacency::from_undirected_edges(1, &[]).unwrap();
        let g = MultiplexGraph::new(vec![a], array![[0.25, 4.0]], None).unwrap();
        let c = corrupt(&g, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(c, g);
    }

    fn loss_from_probabilities(pos: f64, neg: f64) -> f64 {
        // One-dimensional embeddings with Q = 1 and s = 1 give score logit(p).
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let mut tape = Tape::new();
        let z = tape.constant(array![[logit(pos)]]);
        let zc = tape.constant(array![[logit(neg)]]);
        let s = tape.constant(array![[1.0]]);
        let q = tape.constant(array![[1.0]]);
        let l = infomax_loss(&mut tape, z, zc, s, q).unwrap();
        tape.scalar(l)
    }

    #[test]
    fn loss_examples() {
        let expected = -(0.8f64.ln() + 0.7f64.ln()) / 2.0;
        assert!((loss_from_probabilities(0.8, 0.3) - expected).abs() < 1e-12);
        assert!((expected - 0.2899).abs() < 1e-4);
        assert!(loss_from_probabilities(1.0 - 1e-9, 1e-9) < 1e-8);

        let mut tape = Tape::new();
        let z = tape.constant(array![[1.0, 2.0], [3.0, -1.0]]);
        let zc = tape.constant(array![[0.0, 2.0], [1.0, 1.0]]);
        let s = tape.constant(array![[0.5, 0.5]]);
        let q = tape.constant(Array2::zeros((2, 2)));
        let l = infomax_loss(&mut tape, z, zc, s, q).unwrap();
        assert_eq!(tape.scalar(l), std::f64::consts::LN_2);
    }

    #[test]
    fn loss_rejects_non_finite_input() {
        let mut tape = Tape::new();
        let z = tape.constant(array![[f64::NAN]]);
        let one = tape.constant(array![[1.0]]);
        assert!(infomax_loss(&mut tape, z, one, one, one).is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let mut params = vec![array![[1.0, -2.0]], array![[0.5]]];
        let before = params.clone();
        let grads = vec![array![[0.3, 0.1]], array![[-4.0]]];
        let mut adam = AdamState::new(&[(1, 2), (1, 1)]);
        adam.update(&mut params, &grads, &[true, false], 0.0, 0.1)
            .unwrap();
        assert_eq!(params, before);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_adam_step_moves_by_learning_rate() {
        let mut params = vec![array![[1.0, -1.0]]];
        let grads = vec![array![[2.0, -0.5]]];
        let mut adam = AdamState::new(&[(1, 2)]);
        adam.update(&mut params, &grads, &[false], 0.01, 0.0)
            .unwrap();
        assert!((params[0][[0, 0]] - 0.99).abs() < 1e-9);
        assert!((params[0][[0, 1]] + 0.99).abs() < 1e-9);
    }

    #[test]
    fn decay_is_decoupled_and_selective() {
        let mut params = vec![array![[2.0]], array![[2.0]]];
        let grads = vec![array![[0.0]], array![[0.0]]];
        let mut adam = AdamState::new(&[(1, 1), (1, 1)]);
        adam.update(&mut params, &grads, &[true, false], 0.1, 0.5)
            .unwrap();
        assert!((params[0][[0, 0]] - 1.9).abs() < 1e-15);
        assert_eq!(params[1][[0, 0]], 2.0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let short = TrainConfig {
            epochs: 50,
            ..TrainConfig::default()
        };
        assert!(short.validate().is_err());
        let bad_lr = TrainConfig {
            learning_rate: -1.0,
            ..TrainConfig::default()
        };
        assert!(bad_lr.validate().is_err());
    }

    #[test]
    fn training_returns_best_parameters() {
        let g = small_graph();
        let cfg = HmgeConfig::new(2, 3, 1);
        let tc = TrainConfig {
            epochs: 30,
            learning_rate: 0.05,
            patience: 5,
            seed: 4,
            ..TrainConfig::default()
        };
        let out = train(&g, &cfg, &tc).unwrap();
        let min = out
            .history
            .iter()
            .map(|r| r.loss)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_loss(), min);
        let enc = Encoder::new(&g, &cfg).unwrap();
        let perm = permutation(4, &mut epoch_rng(tc.seed, out.best_epoch));
        let again = evaluate_loss(&enc, &out.params, &permute_rows(g.features(), &perm)).unwrap();
        assert_eq!(again, min);
        assert_eq!(out.embeddings, enc.embeddings(&out.params).unwrap());
        for w in out.history.windows(2) {
            assert!(w[1].best_loss <= w[0].best_loss);
        }
    }
}
