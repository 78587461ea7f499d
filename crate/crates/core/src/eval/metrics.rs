use std::cmp::Ordering;

use crate::error::{Error, Result};

fn class_counts(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid(
            "ranking metrics need at least one positive and one negative",
        ));
    }
    Ok((pos, neg))
}

/// Groups of equal scores in descending order, as `(positives, negatives)`.
fn tie_groups(scores: &[f64], labels: &[bool]) -> Result<Vec<(usize, usize)>> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut prev: Option<f64> = None;
    for i in order {
        if prev != Some(scores[i]) {
            groups.push((0, 0));
            prev = Some(scores[i]);
        }
        let g = groups.last_mut().expect("group pushed");
        if labels[i] {
            g.0 += 1;
        } else {
            g.1 += 1;
        }
    }
    Ok(groups)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = class_counts(labels)?;
    let groups = tie_groups(scores, labels)?;
    // Twice the Mann-Whitney statistic, kept integral.
    let mut twice_u: u64 = 0;
    let mut neg_below = neg as u64;
    for (p, n) in groups {
        neg_below -= n as u64;
        twice_u += 2 * p as u64 * neg_below + p as u64 * n as u64;
    }
    Ok(twice_u as f64 / (2 * pos as u64 * neg as u64) as f64)
}

/// Step-wise average precision: the recall gained at each distinct
/// threshold times the precision there.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = class_counts(labels)?;
    let groups = tie_groups(scores, labels)?;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut ap = 0.0;
    for (p, n) in groups {
        tp += p;
        fp += n;
        if p > 0 {
            ap += (p as f64 / pos as f64) * (tp as f64 / (tp + fp) as f64);
        }
    }
    Ok(ap)
}

/// Fraction of exactly matching predictions.
pub fn accuracy<T: PartialEq>(predicted: &[T], actual: &[T]) -> f64 {
    assert_eq!(
        predicted.len(),
        actual.len(),
        "accuracy inputs differ in length"
    );
    if actual.is_empty() {
        return 0.0;
    }
    let correct = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    correct as f64 / actual.len() as f64
}

/// Macro and micro F1 over label sets. Classes that never occur in either
/// input are left out of the macro average.
pub fn f1_scores(
    predicted: &[Vec<usize>],
    actual: &[Vec<usize>],
    num_classes: usize,
) -> (f64, f64) {
    assert_eq!(predicted.len(), actual.len(), "f1 inputs differ in length");
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (p, a) in predicted.iter().zip(actual) {
        for &c in p {
            if a.contains(&c) {
                tp[c] += 1;
            } else {
                fp[c] += 1;
            }
        }
        for &c in a {
            if !p.contains(&c) {
                fn_[c] += 1;
            }
        }
    }
    let mut sum = 0.0;
    let mut present = 0usize;
    for c in 0..num_classes {
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        if denom > 0 {
            sum += (2 * tp[c]) as f64 / denom as f64;
            present += 1;
        }
    }
    let macro_f1 = if present == 0 {
        0.0
    } else {
        sum / present as f64
    };
    let (t, f, n): (usize, usize, usize) = (tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    let micro_f1 = if 2 * t + f + n == 0 {
        0.0
    } else {
        (2 * t) as f64 / (2 * t + f + n) as f64
    };
    (macro_f1, micro_f1)
}

/// [`f1_scores`] for one label per node.
pub fn f1_single(predicted: &[usize], actual: &[usize], num_classes: usize) -> (f64, f64) {
    let wrap = |v: &[usize]| v.iter().map(|&c| vec![c]).collect::<Vec<_>>();
    f1_scores(&wrap(predicted), &wrap(actual), num_classes)
}
