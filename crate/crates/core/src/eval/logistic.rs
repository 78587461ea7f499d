use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub l2: f64,
    pub iterations: usize,
    pub learning_rate: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            iterations: 500,
            learning_rate: 0.1,
        }
    }
}

/// Linear classifier on standardized features: softmax over classes, or
/// one sigmoid per class for multilabel data.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    mean: Array1<f64>,
    scale: Array1<f64>,
    weights: Array2<f64>,
    bias: Array1<f64>,
    multilabel: bool,
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row.mapv_inplace(|v| v / total);
    }
}

impl LogisticRegression {
    /// Fits by full-batch gradient descent on the mean cross-entropy plus
    /// `l2 / 2 * |W|^2`.
    pub fn fit(
        x: &Array2<f64>,
        labels: &[Vec<usize>],
        num_classes: usize,
        multilabel: bool,
        config: &LogisticConfig,
    ) -> Result<Self> {
        let (n, f) = x.dim();
        if labels.len() != n {
            return Err(Error::invalid(format!(
                "{} labels for {n} rows",
                labels.len()
            )));
        }
        if n == 0 || num_classes == 0 {
            return Err(Error::invalid("logistic regression needs rows and classes"));
        }
        if let Some(c) = labels.iter().flatten().find(|&&c| c >= num_classes) {
            return Err(Error::invalid(format!(
                "label {c} outside {num_classes} classes"
            )));
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let scale = x
            .std_axis(Axis(0), 0.0)
            .mapv(|s| if s > 1e-12 { s } else { 1.0 });
        let xs = (x - &mean) / &scale;

        let mut targets = Array2::<f64>::zeros((n, num_classes));
        for (i, ls) in labels.iter().enumerate() {
            for &c in ls {
                targets[[i, c]] = 1.0;
            }
        }
        let present = targets
            .sum_axis(Axis(0))
            .iter()
            .filter(|&&c| c > 0.0)
            .count();
        if present < 2 && !multilabel {
            log::warn!("training labels cover a single class; the classifier is constant");
        }

        let mut weights = Array2::<f64>::zeros((f, num_classes));
        let mut bias = Array1::<f64>::zeros(num_classes);
        let lr = config.learning_rate;
        for _ in 0..config.iterations {
            let mut probs = xs.dot(&weights) + &bias;
            if multilabel {
                probs.mapv_inplace(crate::autodiff::sigmoid);
            } else {
                softmax_rows(&mut probs);
            }
            let residual = (probs - &targets) / n as f64;
            let gw = xs.t().dot(&residual) + config.l2 * &weights;
            let gb = residual.sum_axis(Axis(0));
            weights.scaled_add(-lr, &gw);
            bias.scaled_add(-lr, &gb);
        }
        Ok(Self {
            mean,
            scale,
            weights,
            bias,
            multilabel,
        })
    }

    /// Class scores (probabilities) per row.
    pub fn probabilities(&self, x: &Array2<f64>) -> Array2<f64> {
        let xs = (x - &self.mean) / &self.scale;
        let mut p = xs.dot(&self.weights) + &self.bias;
        if self.multilabel {
            p.mapv_inplace(crate::autodiff::sigmoid);
        } else {
            softmax_rows(&mut p);
        }
        p
    }

    /// Predicted label sets: the most probable class, or every class above
    /// 0.5 in multilabel mode.
    pub fn predict(&self, x: &Array2<f64>) -> Vec<Vec<usize>> {
        self.probabilities(x)
            .rows()
            .into_iter()
            .map(|row| {
                if self.multilabel {
                    (0..row.len()).filter(|&c| row[c] > 0.5).collect()
                } else {
                    let mut best = 0;
                    for c in 1..row.len() {
                        if row[c] > row[best] {
                            best = c;
                        }
                    }
                    vec![best]
                }
            })
            .collect()
    }
}
