//! Central-difference verification of the analytic gradients.

use crate::autodiff::buffer::InputBatch;
use crate::autodiff::graph::{Model, ModelState};
use crate::autodiff::params::ParamStore;
use crate::autodiff::tape::{backward, forward, Mode, Tape};
use crate::error::Result;
use crate::layers::softmax;

/// Outcome of a gradient check run.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Parameters compared against finite differences.
    pub checked: usize,
    /// Parameters excluded because a perturbation crossed a non-smooth
    /// branch (rectifier tie, pooling argmax switch, phase cut).
    pub skipped: usize,
    pub max_rel_err: f64,
    /// Parameter name and flat index attaining the maximum error.
    pub worst: Option<(String, usize)>,
}

/// Mean cross-entropy over the batch and its logits adjoint (scaled 1/n).
pub(crate) fn batch_loss(logits: &[f64], labels: &[usize], classes: usize) -> (f64, Vec<f64>) {
    let n = labels.len();
    let mut total = 0.0;
    let mut adjoint = vec![0.0; logits.len()];
    for (i, &label) in labels.iter().enumerate() {
        let row = &logits[i * classes..(i + 1) * classes];
        let mut probs = softmax(row);
        total += -probs[label].max(f64::MIN_POSITIVE).ln();
        probs[label] -= 1.0;
        for (j, p) in probs.iter().enumerate() {
            adjoint[i * classes + j] = p / n as f64;
        }
    }
    (total / n as f64, adjoint)
}

/// Compare analytic parameter gradients against central differences of the
/// batch cross-entropy, one scalar parameter at a time.
///
/// `param_filter` selects parameter tensors by name; at most
/// `max_per_tensor` entries per tensor are checked (front-loaded, which is
/// deterministic). Within `10h`-style reach of a non-smooth point the check
/// is skipped: concretely, whenever the two perturbed forward passes record
/// different gate signatures.
#[allow(clippy::too_many_arguments)]
pub fn grad_check(
    model: &Model,
    params: &mut ParamStore,
    state: &ModelState,
    input: &InputBatch,
    labels: &[usize],
    param_filter: impl Fn(&str) -> bool,
    h: f64,
    max_per_tensor: usize,
) -> Result<GradCheckReport> {
    assert!((1e-6..=1e-3).contains(&h), "step must lie in [1e-6, 1e-3]");

    let mut tape = Tape::new();
    let logits = forward(model, params, state, input, Mode::Train, &mut tape)?;
    let (_, adjoint) = batch_loss(&logits, labels, model.classes);
    let mut grads = params.zero_grads();
    backward(model, params, &tape, &adjoint, &mut grads)?;

    let mut report = GradCheckReport {
        checked: 0,
        skipped: 0,
        max_rel_err: 0.0,
        worst: None,
    };

    let ids: Vec<usize> = (0..params.len())
        .filter(|&id| param_filter(params.name(id)))
        .collect();
    for id in ids {
        let count = params.get(id).len().min(max_per_tensor);
        for j in 0..count {
            let orig = params.get(id)[j];

            params.get_mut(id)[j] = orig + h;
            let logits_p = forward(model, params, state, input, Mode::Train, &mut tape)?;
            let gate_p = tape.gate_signature();
            let (loss_p, _) = batch_loss(&logits_p, labels, model.classes);

            params.get_mut(id)[j] = orig - h;
            let logits_m = forward(model, params, state, input, Mode::Train, &mut tape)?;
            let gate_m = tape.gate_signature();
            let (loss_m, _) = batch_loss(&logits_m, labels, model.classes);

            params.get_mut(id)[j] = orig;

            if gate_p != gate_m {
                report.skipped += 1;
                continue;
            }
            let numeric = (loss_p - loss_m) / (2.0 * h);
            let analytic = grads.get(id)[j];
            let denom = analytic.abs().max(numeric.abs());
            let rel = if denom < 1e-6 {
                0.0
            } else {
                (analytic - numeric).abs() / denom
            };
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((params.name(id).to_string(), j));
            }
        }
    }
    Ok(report)
}
