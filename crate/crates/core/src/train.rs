//! Training loop, per-step update, and evaluation with confusion matrices.

use crate::autodiff::gradcheck::batch_loss;
use crate::autodiff::{
    apply_bn_updates, backward, forward, forward_checked, ChartBuf, InputBatch, InputKind, Mode,
    Model, ModelState, Optimizer, ParamStore, RealBuf, Tape,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::manifold::DEFAULT_EPS;
use crate::tensor::Shape;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::time::Instant;

/// One line of the metrics stream.
#[derive(Debug, Clone, Serialize)]
pub struct MetricRecord {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub accuracy: f64,
    pub seconds: f64,
}

/// Samples converted once to the model's input domain: chart planes for the
/// manifold networks, stacked (re, im) planes for the real baseline.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    kind: InputKind,
    /// Dataset shape in the complex domain.
    pub complex_shape: Shape,
    input_shape: Shape,
    logr: Vec<f64>,
    theta: Vec<f64>,
    real: Vec<f64>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl PreparedDataset {
    pub fn from_dataset(dataset: &Dataset, kind: InputKind) -> Result<Self> {
        let complex_shape = dataset.shape();
        let n = dataset.len();
        let labels = dataset.labels.iter().map(|&l| l as usize).collect();
        match kind {
            InputKind::Complex => {
                let len = complex_shape.len();
                let mut logr = Vec::with_capacity(n * len);
                let mut theta = Vec::with_capacity(n * len);
                for i in 0..n {
                    let t = dataset.to_complex_tensor(i, DEFAULT_EPS)?;
                    for p in t.data() {
                        logr.push(p.magnitude().ln());
                        theta.push(p.phase());
                    }
                }
                Ok(PreparedDataset {
                    kind,
                    complex_shape,
                    input_shape: complex_shape,
                    logr,
                    theta,
                    real: Vec::new(),
                    labels,
                    classes: dataset.class_count as usize,
                })
            }
            InputKind::Real => {
                let input_shape = Shape::new(
                    2 * complex_shape.channels,
                    complex_shape.height,
                    complex_shape.width,
                );
                let mut real = Vec::with_capacity(n * input_shape.len());
                for i in 0..n {
                    real.extend_from_slice(dataset.to_real_tensor(i).data());
                }
                Ok(PreparedDataset {
                    kind,
                    complex_shape,
                    input_shape,
                    logr: Vec::new(),
                    theta: Vec::new(),
                    real,
                    labels,
                    classes: dataset.class_count as usize,
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Assemble a batch from sample indices, preserving their order.
    pub fn make_batch(&self, indices: &[usize]) -> (InputBatch, Vec<usize>) {
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let len = self.input_shape.len();
        let batch = match self.kind {
            InputKind::Complex => {
                let mut buf = ChartBuf::zeros(indices.len(), self.input_shape);
                for (row, &i) in indices.iter().enumerate() {
                    buf.logr[row * len..(row + 1) * len]
                        .copy_from_slice(&self.logr[i * len..(i + 1) * len]);
                    buf.theta[row * len..(row + 1) * len]
                        .copy_from_slice(&self.theta[i * len..(i + 1) * len]);
                }
                InputBatch::Complex(buf)
            }
            InputKind::Real => {
                let mut buf = RealBuf::zeros(indices.len(), self.input_shape);
                for (row, &i) in indices.iter().enumerate() {
                    buf.data[row * len..(row + 1) * len]
                        .copy_from_slice(&self.real[i * len..(i + 1) * len]);
                }
                InputBatch::Real(buf)
            }
        };
        (batch, labels)
    }
}

fn count_correct(logits: &[f64], labels: &[usize], classes: usize) -> usize {
    labels
        .iter()
        .enumerate()
        .filter(|(i, &label)| {
            let row = &logits[i * classes..(i + 1) * classes];
            let pred = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
                .map(|(j, _)| j)
                .unwrap();
            pred == label
        })
        .count()
}

/// One optimizer update from the mean cross-entropy over the batch.
/// Returns (loss, correct predictions).
pub fn train_step(
    model: &Model,
    params: &mut ParamStore,
    state: &mut ModelState,
    optimizer: &mut Optimizer,
    batch: &InputBatch,
    labels: &[usize],
) -> Result<(f64, usize)> {
    if labels.is_empty() || labels.len() != batch.batch() {
        return Err(Error::LengthMismatch {
            expected: batch.batch(),
            got: labels.len(),
        });
    }
    for &l in labels {
        if l >= model.classes {
            return Err(Error::LabelOutOfRange {
                label: l as u32,
                classes: model.classes as u32,
            });
        }
    }
    let mut tape = Tape::new();
    let logits = forward(model, params, state, batch, Mode::Train, &mut tape)?;
    let (loss, adjoint) = batch_loss(&logits, labels, model.classes);
    if !loss.is_finite() {
        // Re-run with per-layer checking to name the first offender.
        forward_checked(model, params, state, batch, Mode::Train, &mut tape)?;
        return Err(Error::Invalid("non-finite loss".into()));
    }
    let correct = count_correct(&logits, labels, model.classes);
    apply_bn_updates(model, &tape, state);
    let mut grads = params.zero_grads();
    backward(model, params, &tape, &adjoint, &mut grads)?;
    optimizer.apply(params, &grads);
    Ok((loss, correct))
}

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

/// Epoch-shuffled training with one metric record per epoch (plus one per
/// epoch on the test split when given). Epoch numbering continues from
/// `start_epoch`, so resumed runs extend the same stream.
#[allow(clippy::too_many_arguments)]
pub fn train_loop(
    model: &Model,
    params: &mut ParamStore,
    state: &mut ModelState,
    optimizer: &mut Optimizer,
    train: &PreparedDataset,
    test: Option<&PreparedDataset>,
    cfg: &TrainConfig,
    start_epoch: usize,
    mut on_metric: impl FnMut(&MetricRecord),
) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Invalid("empty training dataset".into()));
    }
    assert!(cfg.batch_size >= 1, "batch size must be at least 1");
    for epoch in start_epoch..cfg.epochs {
        let t0 = Instant::now();
        // Per-epoch shuffle stream, stable under resume.
        let mut rng = ChaCha8Rng::seed_from_u64(
            cfg.seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let (batch, labels) = train.make_batch(chunk);
            let (loss, c) = train_step(model, params, state, optimizer, &batch, &labels)?;
            loss_sum += loss * labels.len() as f64;
            correct += c;
        }
        on_metric(&MetricRecord {
            epoch,
            split: "train".into(),
            loss: loss_sum / train.len() as f64,
            accuracy: correct as f64 / train.len() as f64,
            seconds: t0.elapsed().as_secs_f64(),
        });

        if let Some(test) = test {
            let t1 = Instant::now();
            let report = evaluate(model, params, state, test, cfg.batch_size)?;
            on_metric(&MetricRecord {
                epoch,
                split: "test".into(),
                loss: report.loss,
                accuracy: report.accuracy,
                seconds: t1.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(())
}

/// Evaluation summary with a (true class x predicted class) confusion matrix.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub n: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate(
    model: &Model,
    params: &ParamStore,
    state: &ModelState,
    data: &PreparedDataset,
    batch_size: usize,
) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::Invalid("empty evaluation dataset".into()));
    }
    let classes = model.classes;
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut loss_sum = 0.0;
    let mut tape = Tape::new();
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let (batch, labels) = data.make_batch(chunk);
        let logits = forward(model, params, state, &batch, Mode::Eval, &mut tape)?;
        let (loss, _) = batch_loss(&logits, &labels, classes);
        loss_sum += loss * labels.len() as f64;
        for (i, &label) in labels.iter().enumerate() {
            let row = &logits[i * classes..(i + 1) * classes];
            let pred = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
                .map(|(j, _)| j)
                .unwrap();
            confusion[label][pred] += 1;
        }
    }
    let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
    let per_class_accuracy: Vec<f64> = (0..classes)
        .map(|c| {
            let total: usize = confusion[c].iter().sum();
            if total == 0 {
                0.0
            } else {
                confusion[c][c] as f64 / total as f64
            }
        })
        .collect();
    Ok(EvalReport {
        n: data.len(),
        loss: loss_sum / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
        per_class_accuracy,
        confusion,
    })
}
