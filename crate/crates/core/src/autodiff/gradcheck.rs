use ndarray::Array2;

use super::{Tape, Var};
use crate::error::{Error, Result};

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest relative error over all checked entries.
    pub max_rel_error: f64,
    /// Largest relative error per parameter, in input order.
    pub per_parameter: Vec<f64>,
    pub checked: usize,
    /// Entries whose perturbation changes a relu/clamp/guard branch.
    pub skipped: usize,
}

/// `|a - b| / max(|a|, |b|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn evaluate<F>(params: &[Array2<f64>], build: &F) -> Result<(Tape, Vec<Var>, Var)>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::with_branch_tracking();
    let vars: Vec<Var> = params
        .iter()
        .map(|p| tape.parameter(p.clone(), false))
        .collect();
    let loss = build(&mut tape, &vars)?;
    let value = tape.value(loss);
    if value.dim() != (1, 1) {
        return Err(Error::shape(
            "grad_check",
            format!("loss has shape {:?}", value.dim()),
        ));
    }
    if !value[[0, 0]].is_finite() {
        return Err(Error::Numeric(format!(
            "loss evaluated to {}",
            value[[0, 0]]
        )));
    }
    Ok((tape, vars, loss))
}

/// Checks reverse-mode gradients of the scalar built by `build` against
/// central differences with step `eps`, entry by entry.
///
/// `build` receives one tape variable per entry of `params` and must be
/// deterministic.
pub fn grad_check<F>(params: &[Array2<f64>], eps: f64, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let (mut tape, vars, loss) = evaluate(params, &build)?;
    let base_signature = tape.branch_signature();
    tape.backward(loss)?;
    let analytic: Vec<Array2<f64>> = vars.iter().map(|&v| tape.grad(v)).collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        per_parameter: vec![0.0; params.len()],
        checked: 0,
        skipped: 0,
    };
    let mut probe: Vec<Array2<f64>> = params.to_vec();
    for p in 0..params.len() {
        let (rows, cols) = params[p].dim();
        for r in 0..rows {
            for c in 0..cols {
                let original = params[p][[r, c]];
                probe[p][[r, c]] = original + eps;
                let (plus_tape, _, plus) = evaluate(&probe, &build)?;
                probe[p][[r, c]] = original - eps;
                let (minus_tape, _, minus) = evaluate(&probe, &build)?;
                probe[p][[r, c]] = original;

                if plus_tape.branch_signature() != base_signature
                    || minus_tape.branch_signature() != base_signature
                {
                    report.skipped += 1;
                    continue;
                }
                let numeric = (plus_tape.scalar(plus) - minus_tape.scalar(minus)) / (2.0 * eps);
                let err = relative_error(analytic[p][[r, c]], numeric);
                report.per_parameter[p] = report.per_parameter[p].max(err);
                report.max_rel_error = report.max_rel_error.max(err);
                report.checked += 1;
            }
        }
    }
    Ok(report)
}
