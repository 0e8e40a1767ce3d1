//! Recorded forward pass and reverse-mode differentiation.
//!
//! The tape holds one value buffer per graph node plus whatever each op saved
//! for its backward rule. Heavy ops (wFM convolution, distance transform,
//! real convolution) parallelize over batch samples; every cross-sample
//! reduction folds in sample order, so results are independent of scheduling
//! and a second forward with the same input replays bit-for-bit.

use crate::autodiff::buffer::{Buffer, ChartBuf, InputBatch, RealBuf};
use crate::autodiff::graph::{InputKind, Model, ModelState, Node, OpKind};
use crate::autodiff::params::{Gradients, ParamStore};
use crate::error::{Error, Result};
use crate::gate::GateHash;
use crate::layers::distance::{
    distance_transform_backward_chart, distance_transform_forward_chart,
};
use crate::layers::real::{real_conv_backward, real_conv_forward, BATCH_NORM_EPS, BATCH_NORM_MOMENTUM};
use crate::layers::wfm_conv::{
    wfm_conv_backward_chart, wfm_conv_forward_chart, wfm_conv_logit_grads,
};
use crate::manifold::wrap_phase;
use rayon::prelude::*;

/// Whether batch statistics (training) or running statistics (evaluation)
/// drive batch normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
enum Saved {
    None,
    WfmConv {
        weights: Vec<f64>,
    },
    Dist {
        weights: Vec<f64>,
        /// Per sample, per set: the chart mean.
        means: Vec<(f64, f64)>,
    },
    BatchNorm {
        mean: Vec<f64>,
        invstd: Vec<f64>,
        batch_var: Vec<f64>,
        train: bool,
    },
    MaxPool {
        /// Per sample, per output element: flat input index within the sample.
        argmax: Vec<usize>,
    },
}

/// Value and context storage for one forward/backward cycle.
#[derive(Debug, Default)]
pub struct Tape {
    values: Vec<Option<Buffer>>,
    saved: Vec<Saved>,
    batch: usize,
    gate: GateHash,
    done: bool,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn reset(&mut self, nodes: usize) {
        self.values.clear();
        self.values.resize_with(nodes, || None);
        self.saved.clear();
        self.saved.resize_with(nodes, || Saved::None);
        self.gate = GateHash::new();
        self.done = false;
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Hash of all non-smooth branch decisions taken during the forward pass.
    pub fn gate_signature(&self) -> u64 {
        self.gate.value()
    }

    pub fn value(&self, node: usize) -> &Buffer {
        self.values[node].as_ref().expect("forward has run")
    }
}

/// Run the model on a batch, recording values on `tape`; returns the logits
/// as a row-major (batch, classes) vector.
pub fn forward(
    model: &Model,
    params: &ParamStore,
    state: &ModelState,
    input: &InputBatch,
    mode: Mode,
    tape: &mut Tape,
) -> Result<Vec<f64>> {
    forward_impl(model, params, state, input, mode, tape, false)
}

/// [`forward`] that validates every intermediate buffer and names the first
/// layer producing a non-finite value.
pub fn forward_checked(
    model: &Model,
    params: &ParamStore,
    state: &ModelState,
    input: &InputBatch,
    mode: Mode,
    tape: &mut Tape,
) -> Result<Vec<f64>> {
    forward_impl(model, params, state, input, mode, tape, true)
}

/// Wall time spent in each node during one forward and one backward pass.
#[derive(Debug, Clone)]
pub struct LayerTiming {
    pub name: String,
    pub forward_seconds: f64,
    pub backward_seconds: f64,
}

/// Run forward and backward once, timing each node.
pub fn profile_pass(
    model: &Model,
    params: &ParamStore,
    state: &ModelState,
    input: &InputBatch,
    loss_adjoint: &[f64],
) -> Result<Vec<LayerTiming>> {
    let mut tape = Tape::new();
    let mut timings: Vec<LayerTiming> = model
        .nodes
        .iter()
        .map(|n| LayerTiming {
            name: n.name.clone(),
            forward_seconds: 0.0,
            backward_seconds: 0.0,
        })
        .collect();

    tape.reset(model.nodes.len());
    tape.batch = input.batch();
    if input.shape() != model.input_shape {
        return Err(Error::shape(
            "input",
            format!(
                "model expects {}, batch has {}",
                model.input_shape,
                input.shape()
            ),
        ));
    }
    let input_buffer = match (model.input_kind, input) {
        (InputKind::Complex, InputBatch::Complex(b)) => Buffer::Chart(b.clone()),
        (InputKind::Real, InputBatch::Real(b)) => Buffer::Real(b.clone()),
        _ => {
            return Err(Error::shape(
                "input",
                "model input domain does not match the batch".to_string(),
            ))
        }
    };
    tape.values[0] = Some(input_buffer);
    for idx in 1..model.nodes.len() {
        let t0 = std::time::Instant::now();
        exec_forward(&model.nodes[idx], idx, params, state, Mode::Eval, &mut tape)?;
        timings[idx].forward_seconds = t0.elapsed().as_secs_f64();
    }
    tape.done = true;

    let n = tape.batch;
    let mut adjoints: Vec<Option<Buffer>> = vec![None; model.nodes.len()];
    let last = model.output_node();
    adjoints[last] = Some(Buffer::Real(RealBuf {
        n,
        shape: model.nodes[last].out_shape,
        data: loss_adjoint.to_vec(),
    }));
    let mut grads = params.zero_grads();
    for idx in (1..model.nodes.len()).rev() {
        let Some(g_out) = adjoints[idx].take() else {
            continue;
        };
        let t0 = std::time::Instant::now();
        exec_backward(
            &model.nodes[idx],
            idx,
            params,
            &tape,
            g_out,
            &mut adjoints,
            &mut grads,
        );
        timings[idx].backward_seconds = t0.elapsed().as_secs_f64();
    }
    Ok(timings)
}

#[allow(clippy::too_many_arguments)]
fn forward_impl(
    model: &Model,
    params: &ParamStore,
    state: &ModelState,
    input: &InputBatch,
    mode: Mode,
    tape: &mut Tape,
    check_finite: bool,
) -> Result<Vec<f64>> {
    tape.reset(model.nodes.len());
    tape.batch = input.batch();
    if input.shape() != model.input_shape {
        return Err(Error::shape(
            "input",
            format!(
                "model expects {}, batch has {}",
                model.input_shape,
                input.shape()
            ),
        ));
    }
    let input_buffer = match (model.input_kind, input) {
        (InputKind::Complex, InputBatch::Complex(b)) => Buffer::Chart(b.clone()),
        (InputKind::Real, InputBatch::Real(b)) => Buffer::Real(b.clone()),
        _ => {
            return Err(Error::shape(
                "input",
                "model input domain does not match the batch".to_string(),
            ))
        }
    };
    tape.values[0] = Some(input_buffer);

    for idx in 1..model.nodes.len() {
        let node = &model.nodes[idx];
        exec_forward(node, idx, params, state, mode, tape)?;
        if check_finite && tape.values[idx].as_ref().unwrap().has_non_finite() {
            return Err(Error::NonFiniteAtLayer {
                layer: node.name.clone(),
            });
        }
    }
    tape.done = true;

    let out = tape.values[model.output_node()].as_ref().unwrap().as_real();
    debug_assert_eq!(out.shape.len(), model.classes);
    Ok(out.data.clone())
}

fn exec_forward(
    node: &Node,
    idx: usize,
    params: &ParamStore,
    state: &ModelState,
    mode: Mode,
    tape: &mut Tape,
) -> Result<()> {
    let n = tape.batch;
    match &node.op {
        OpKind::Input => unreachable!("input node is seeded before execution"),
        OpKind::WfmConv { geom } => {
            let parent = tape.values[node.inputs[0]].as_ref().unwrap().as_chart();
            let window = geom.window_len();
            let mut weights = vec![0.0; geom.out_channels * window];
            let logits = params.get(node.params[0]);
            for oc in 0..geom.out_channels {
                crate::layers::softmax_into(
                    &logits[oc * window..(oc + 1) * window],
                    &mut weights[oc * window..(oc + 1) * window],
                );
            }
            let mut out = ChartBuf::zeros(n, node.out_shape);
            let in_len = parent.sample_len();
            let out_len = out.sample_len();
            let in_shape = parent.shape;
            let gates: Vec<u64> = out
                .logr
                .par_chunks_mut(out_len)
                .zip(out.theta.par_chunks_mut(out_len))
                .zip(
                    parent
                        .logr
                        .par_chunks(in_len)
                        .zip(parent.theta.par_chunks(in_len)),
                )
                .map(|((ol, ot), (il, it))| {
                    let mut gate = GateHash::new();
                    wfm_conv_forward_chart(il, it, in_shape, geom, &weights, ol, ot, &mut gate);
                    gate.value()
                })
                .collect();
            for g in gates {
                tape.gate.push(g);
            }
            tape.saved[idx] = Saved::WfmConv { weights };
            tape.values[idx] = Some(Buffer::Chart(out));
        }
        OpKind::GTransport { channels } => {
            let parent = tape.values[node.inputs[0]].as_ref().unwrap().as_chart();
            let log_scale = params.get(node.params[0]);
            let angle = params.get(node.params[1]);
            let plane = parent.shape.height * parent.shape.width;
            let mut out = ChartBuf::zeros(n, node.out_shape);
            for i in 0..n {
                for c in 0..*channels {
                    let base = i * parent.sample_len() + c * plane;
                    for j in 0..plane {
                        out.logr[base + j] = parent.logr[base + j] + log_scale[c];
                        out.theta[base + j] = wrap_phase(parent.theta[base + j] + angle[c]);
                    }
                }
            }
            tape.values[idx] = Some(Buffer::Chart(out));
        }
        OpKind::TRelu => {
            let parent = tape.values[node.inputs[0]].as_ref().unwrap().as_chart();
            let mut out = ChartBuf::zeros(n, node.out_shape);
            for (o, &v) in out.logr.iter_mut().zip(&parent.logr) {
                *o = v.max(0.0);
                tape.gate.push_bool(v > 0.0);
            }
            for (o, &v) in out.theta.iter_mut().zip(&parent.theta) {
                *o = v.max(0.0);
                tape.gate.push_bool(v > 0.0);
            }
            tape.values[idx] = Some(Buffer::Chart(out));
        }
        OpKind::DistanceTransform { sets } => {
            let parent = tape.values[node.inputs[0]].as_ref().unwrap().as_chart();
            let len = parent.sample_len();
            let mut weights = vec![0.0; sets * len];
            let logits = params.get(node.params[0]);
            for s in 0..*sets {
                crate::layers::softmax_into(
                    &logits[s * len..(s + 1) * len],
                    &mut weights[s * len..(s + 1) * len],
                );
            }
            let mut out = RealBuf::zeros(n, node.out_shape);
            let out_len = out.sample_len();
            let results: Vec<(Vec<(f64, f64)>, u64)> = out
                .data
                .par_chunks_mut(out_len)
                .zip(
                    parent
                        .logr
                        .par_chunks(len)
                        .zip(parent.theta.par_chunks(len)),
                )
                .map(|(o, (il, it))| {
                    let mut gate = GateHash::new();
                    let mut means = Vec::new();
                    distance_transform_forward_chart(il, it, &weights, *sets, o, &mut means, &mut gate);
                    (means, gate.value())
                })
                .collect();
            let mut means = Vec::with_capacity(n * sets);
            for (m, g) in results {
                means.extend(m);
                tape.gate.push(g);
            }
            tape.saved[idx] = Saved::Dist { weights, means };
            tape.values[idx] = Some(Buffer::Real(out));
        }
        OpKind::ConcatChannels => {
            let a = tape.values[node.inputs[0]].as_ref().unwrap().as_chart();
            let b = tape.values[node.inputs[1]].as_ref().unwrap().as_chart();
            let (la, lb) = (a.sample_len(), b.sample_len());
            let mut out = ChartBuf::zeros(n, node.out_shape);
            let lo = out.sample_len();
            for i in 0..n {
                out.logr[i * lo..i * lo + la].copy_from_slice(&a.logr[i * la..(i + 1) * la]);
                out.theta[i * lo..i * lo + la].copy_from_slice(&a.theta[i * la..(i + 1) * la]);
                out.logr[i * lo + la..(i + 1) * lo].copy_from_slice(&b.logr[i * lb..(i + 1) * lb]);
                out.theta[i * lo + la..(i + 1) * lo].copy_from_slice(&b.theta[i * lb..(i + 1) * lb]);
            }
            tape.values[idx] = Some(Buffer::Chart(out));
        }
        OpKind::RealConv { geom } => {
            let parent = tape.values[node.inputs[0]].as_ref().unwrap().as_real();
            let weight = params.get(node.params[0]);
            let bias = params.get(node.params[1]);
            let mut out = RealBuf::zeros(n, node.out_shape);
            let in_len = parent.sample_len();
            let out_len = out.sample_len();
            let in_shape = parent.shape;
            out.data
                .par_chunks_mut(out_len)
                .zip(parent.data.par_chunks(in_len))
                .for_each(|(o, input)| {
                    real_conv_forward(input, in_shape, geom, weight, bias, o);
                });
            tape.values[idx] = Some(Buffer::Real(out));
        }
        OpKind::BatchNorm { channels } => {
            let parent = tape.values[node.inputs[0]].as_ref().unwrap().as_real();
            let plane = parent.shape.height * parent.shape.width;
            let len = parent.sample_len();
            let count = (n * plane) as f64;
            let mut out = RealBuf::zeros(n, node.out_shape);
            let gamma = params.get(node.params[0]);
            let beta = params.get(node.params[1]);
            let (mean, var, invstd, train) = match mode {
                Mode::Train => {
                    let mut mean = vec![0.0; *channels];
                    let mut var = vec![0.0; *channels];
                    for c in 0..*channels {
                        let mut sum = 0.0;
                        for i in 0..n {
                            for j in 0..plane {
                                sum += parent.data[i * len + c * plane + j];
                            }
                        }
                        mean[c] = sum / count;
                        let mut sq = 0.0;
                        for i in 0..n {
                            for j in 0..plane {
                                let d = parent.data[i * len + c * plane + j] - mean[c];
                                sq += d * d;
                            }
                        }
                        var[c] = sq / count;
                    }
                    let invstd: Vec<f64> =
                        var.iter().map(|v| 1.0 / (v + BATCH_NORM_EPS).sqrt()).collect();
                    (mean, var, invstd, true)
                }
                Mode::Eval => {
                    let bn = state.bn(idx);
                    let invstd: Vec<f64> = bn
                        .var
                        .iter()
                        .map(|v| 1.0 / (v + BATCH_NORM_EPS).sqrt())
                        .collect();
                    (bn.mean.clone(), Vec::new(), invstd, false)
                }
            };
            for c in 0..*channels {
                for i in 0..n {
                    for j in 0..plane {
                        let x = parent.data[i * len + c * plane + j];
                        out.data[i * len + c * plane + j] =
                            gamma[c] * (x - mean[c]) * invstd[c] + beta[c];
                    }
                }
            }
            tape.saved[idx] = Saved::BatchNorm {
                mean,
                invstd,
                batch_var: var,
                train,
            };
            tape.values[idx] = Some(Buffer::Real(out));
        }
        OpKind::Relu => {
            let parent = tape.values[node.inputs[0]].as_ref().unwrap().as_real();
            let mut out = RealBuf::zeros(n, node.out_shape);
            for (o, &v) in out.data.iter_mut().zip(&parent.data) {
                *o = v.max(0.0);
                tape.gate.push_bool(v > 0.0);
            }
            tape.values[idx] = Some(Buffer::Real(out));
        }
        OpKind::MaxPool { kernel, stride } => {
            let parent = tape.values[node.inputs[0]].as_ref().unwrap().as_real();
            let shape = parent.shape;
            let out_shape = node.out_shape;
            let mut out = RealBuf::zeros(n, out_shape);
            let len = parent.sample_len();
            let out_len = out.sample_len();
            let mut argmax = vec![0usize; n * out_len];
            for i in 0..n {
                for c in 0..shape.channels {
                    for oy in 0..out_shape.height {
                        for ox in 0..out_shape.width {
                            let mut best = f64::NEG_INFINITY;
                            let mut best_idx = 0;
                            for dy in 0..kernel.0 {
                                for dx in 0..kernel.1 {
                                    let iy = oy * stride.0 + dy;
                                    let ix = ox * stride.1 + dx;
                                    let fidx = (c * shape.height + iy) * shape.width + ix;
                                    let v = parent.data[i * len + fidx];
                                    if v > best {
                                        best = v;
                                        best_idx = fidx;
                                    }
                                }
                            }
                            let o = (c * out_shape.height + oy) * out_shape.width + ox;
                            out.data[i * out_len + o] = best;
                            argmax[i * out_len + o] = best_idx;
                            tape.gate.push(best_idx as u64);
                        }
                    }
                }
            }
            tape.saved[idx] = Saved::MaxPool { argmax };
            tape.values[idx] = Some(Buffer::Real(out));
        }
        OpKind::AddTensors => {
            let a = tape.values[node.inputs[0]].as_ref().unwrap().as_real();
            let b = tape.values[node.inputs[1]].as_ref().unwrap().as_real();
            let mut out = RealBuf::zeros(n, node.out_shape);
            for ((o, &x), &y) in out.data.iter_mut().zip(&a.data).zip(&b.data) {
                *o = x + y;
            }
            tape.values[idx] = Some(Buffer::Real(out));
        }
        OpKind::Flatten => {
            let parent = tape.values[node.inputs[0]].as_ref().unwrap().as_real();
            let mut out = RealBuf::zeros(n, node.out_shape);
            out.data.copy_from_slice(&parent.data);
            tape.values[idx] = Some(Buffer::Real(out));
        }
        OpKind::Dense { in_dim, out_dim } => {
            let parent = tape.values[node.inputs[0]].as_ref().unwrap().as_real();
            let weight = params.get(node.params[0]);
            let bias = params.get(node.params[1]);
            let mut out = RealBuf::zeros(n, node.out_shape);
            for i in 0..n {
                let x = &parent.data[i * in_dim..(i + 1) * in_dim];
                let y = &mut out.data[i * out_dim..(i + 1) * out_dim];
                for (o, yo) in y.iter_mut().enumerate() {
                    *yo = bias[o]
                        + weight[o * in_dim..(o + 1) * in_dim]
                            .iter()
                            .zip(x)
                            .map(|(w, v)| w * v)
                            .sum::<f64>();
                }
            }
            tape.values[idx] = Some(Buffer::Real(out));
        }
    }
    Ok(())
}

/// Fold the batch statistics recorded during a training-mode forward into
/// the running statistics (exponential moving average; the variance update
/// uses the unbiased estimate).
pub fn apply_bn_updates(model: &Model, tape: &Tape, state: &mut ModelState) {
    for idx in model.bn_nodes() {
        if let Saved::BatchNorm {
            mean,
            batch_var,
            train: true,
            ..
        } = &tape.saved[idx]
        {
            let parent = tape.values[model.nodes[idx].inputs[0]]
                .as_ref()
                .unwrap()
                .as_real();
            let count = (tape.batch * parent.shape.height * parent.shape.width) as f64;
            let correction = if count > 1.0 { count / (count - 1.0) } else { 1.0 };
            let bn = state.bn_mut(idx);
            for c in 0..mean.len() {
                bn.mean[c] =
                    BATCH_NORM_MOMENTUM * bn.mean[c] + (1.0 - BATCH_NORM_MOMENTUM) * mean[c];
                bn.var[c] = BATCH_NORM_MOMENTUM * bn.var[c]
                    + (1.0 - BATCH_NORM_MOMENTUM) * batch_var[c] * correction;
            }
        }
    }
}

/// Reverse sweep: propagates `loss_adjoint` (row-major batch x classes,
/// the gradient of the scalar loss with respect to the logits) down the
/// recorded graph, accumulating parameter gradients. Frozen parameters keep
/// zero gradients; inputs of frozen layers still receive adjoints.
pub fn backward(
    model: &Model,
    params: &ParamStore,
    tape: &Tape,
    loss_adjoint: &[f64],
    grads: &mut Gradients,
) -> Result<()> {
    if !tape.done {
        return Err(Error::BackwardBeforeForward);
    }
    let n = tape.batch;
    if loss_adjoint.len() != n * model.classes {
        return Err(Error::LengthMismatch {
            expected: n * model.classes,
            got: loss_adjoint.len(),
        });
    }

    let mut adjoints: Vec<Option<Buffer>> = vec![None; model.nodes.len()];
    let last = model.output_node();
    adjoints[last] = Some(Buffer::Real(RealBuf {
        n,
        shape: model.nodes[last].out_shape,
        data: loss_adjoint.to_vec(),
    }));

    for idx in (1..model.nodes.len()).rev() {
        let Some(g_out) = adjoints[idx].take() else {
            continue;
        };
        let node = &model.nodes[idx];
        exec_backward(node, idx, params, tape, g_out, &mut adjoints, grads);
    }
    Ok(())
}

fn adj_buffer<'a>(
    adjoints: &'a mut [Option<Buffer>],
    values: &[Option<Buffer>],
    node: usize,
) -> &'a mut Buffer {
    if adjoints[node].is_none() {
        adjoints[node] = Some(values[node].as_ref().unwrap().zeros_like());
    }
    adjoints[node].as_mut().unwrap()
}

fn exec_backward(
    node: &Node,
    idx: usize,
    params: &ParamStore,
    tape: &Tape,
    g_out: Buffer,
    adjoints: &mut [Option<Buffer>],
    grads: &mut Gradients,
) {
    let n = tape.batch;
    match &node.op {
        OpKind::Input => {}
        OpKind::WfmConv { geom } => {
            let Saved::WfmConv { weights } = &tape.saved[idx] else {
                unreachable!("wfm conv saved context")
            };
            let parent_id = node.inputs[0];
            let parent = tape.values[parent_id].as_ref().unwrap().as_chart();
            let in_shape = parent.shape;
            let in_len = parent.sample_len();
            let g_out = match g_out {
                Buffer::Chart(b) => b,
                _ => unreachable!(),
            };
            let out_len = g_out.sample_len();
            let g_in = adj_buffer(adjoints, &tape.values, parent_id).as_chart_mut();
            let window = geom.window_len();
            // Per-sample weight adjoints are folded in sample order below.
            let local_gws: Vec<Vec<f64>> = g_in
                .logr
                .par_chunks_mut(in_len)
                .zip(g_in.theta.par_chunks_mut(in_len))
                .zip(
                    parent
                        .logr
                        .par_chunks(in_len)
                        .zip(parent.theta.par_chunks(in_len)),
                )
                .zip(
                    g_out
                        .logr
                        .par_chunks(out_len)
                        .zip(g_out.theta.par_chunks(out_len)),
                )
                .map(|(((gil, git), (il, it)), (gol, got))| {
                    let mut gw = vec![0.0; geom.out_channels * window];
                    wfm_conv_backward_chart(
                        il, it, in_shape, geom, weights, gol, got, gil, git, &mut gw,
                    );
                    gw
                })
                .collect();
            if params.is_trainable(node.params[0]) {
                let mut gw_total = vec![0.0; geom.out_channels * window];
                for gw in local_gws {
                    for (acc, v) in gw_total.iter_mut().zip(gw) {
                        *acc += v;
                    }
                }
                wfm_conv_logit_grads(
                    weights,
                    &gw_total,
                    geom.out_channels,
                    window,
                    grads.get_mut(node.params[0]),
                );
            }
        }
        OpKind::GTransport { channels } => {
            let g_out = match g_out {
                Buffer::Chart(b) => b,
                _ => unreachable!(),
            };
            let parent_id = node.inputs[0];
            let plane = g_out.shape.height * g_out.shape.width;
            let len = g_out.sample_len();
            {
                let g_in = adj_buffer(adjoints, &tape.values, parent_id).as_chart_mut();
                for (gi, &go) in g_in.logr.iter_mut().zip(&g_out.logr) {
                    *gi += go;
                }
                for (gi, &go) in g_in.theta.iter_mut().zip(&g_out.theta) {
                    *gi += go;
                }
            }
            if params.is_trainable(node.params[0]) {
                let g_ls = grads.get_mut(node.params[0]);
                for c in 0..*channels {
                    for i in 0..n {
                        let base = i * len + c * plane;
                        for j in 0..plane {
                            g_ls[c] += g_out.logr[base + j];
                        }
                    }
                }
            }
            if params.is_trainable(node.params[1]) {
                let g_ang = grads.get_mut(node.params[1]);
                for c in 0..*channels {
                    for i in 0..n {
                        let base = i * len + c * plane;
                        for j in 0..plane {
                            g_ang[c] += g_out.theta[base + j];
                        }
                    }
                }
            }
        }
        OpKind::TRelu => {
            let g_out = match g_out {
                Buffer::Chart(b) => b,
                _ => unreachable!(),
            };
            let parent_id = node.inputs[0];
            let parent = tape.values[parent_id].as_ref().unwrap().as_chart();
            let g_in = adj_buffer(adjoints, &tape.values, parent_id).as_chart_mut();
            // Subgradient 0 at the exact ties r = 1 and theta = 0.
            for ((gi, &go), &v) in g_in.logr.iter_mut().zip(&g_out.logr).zip(&parent.logr) {
                if v > 0.0 {
                    *gi += go;
                }
            }
            for ((gi, &go), &v) in g_in.theta.iter_mut().zip(&g_out.theta).zip(&parent.theta) {
                if v > 0.0 {
                    *gi += go;
                }
            }
        }
        OpKind::DistanceTransform { sets } => {
            let Saved::Dist { weights, means } = &tape.saved[idx] else {
                unreachable!("distance transform saved context")
            };
            let g_out = match g_out {
                Buffer::Real(b) => b,
                _ => unreachable!(),
            };
            let parent_id = node.inputs[0];
            let parent = tape.values[parent_id].as_ref().unwrap().as_chart();
            let len = parent.sample_len();
            let out_len = g_out.sample_len();
            let g_in = adj_buffer(adjoints, &tape.values, parent_id).as_chart_mut();
            let local_gws: Vec<Vec<f64>> = g_in
                .logr
                .par_chunks_mut(len)
                .zip(g_in.theta.par_chunks_mut(len))
                .zip(
                    parent
                        .logr
                        .par_chunks(len)
                        .zip(parent.theta.par_chunks(len)),
                )
                .zip(g_out.data.par_chunks(out_len).zip(means.par_chunks(*sets)))
                .map(|(((gil, git), (il, it)), (go, sample_means))| {
                    let mut gw = vec![0.0; sets * len];
                    distance_transform_backward_chart(
                        il,
                        it,
                        weights,
                        *sets,
                        sample_means,
                        go,
                        gil,
                        git,
                        &mut gw,
                    );
                    gw
                })
                .collect();
            if params.is_trainable(node.params[0]) {
                let mut gw_total = vec![0.0; sets * len];
                for gw in local_gws {
                    for (acc, v) in gw_total.iter_mut().zip(gw) {
                        *acc += v;
                    }
                }
                let g_logits = grads.get_mut(node.params[0]);
                for s in 0..*sets {
                    crate::layers::softmax_vjp(
                        &weights[s * len..(s + 1) * len],
                        &gw_total[s * len..(s + 1) * len],
                        &mut g_logits[s * len..(s + 1) * len],
                    );
                }
            }
        }
        OpKind::ConcatChannels => {
            let g_out = match g_out {
                Buffer::Chart(b) => b,
                _ => unreachable!(),
            };
            let (a_id, b_id) = (node.inputs[0], node.inputs[1]);
            let la = tape.values[a_id].as_ref().unwrap().as_chart().sample_len();
            let lb = tape.values[b_id].as_ref().unwrap().as_chart().sample_len();
            let lo = g_out.sample_len();
            {
                let g_a = adj_buffer(adjoints, &tape.values, a_id).as_chart_mut();
                for i in 0..n {
                    for j in 0..la {
                        g_a.logr[i * la + j] += g_out.logr[i * lo + j];
                        g_a.theta[i * la + j] += g_out.theta[i * lo + j];
                    }
                }
            }
            let g_b = adj_buffer(adjoints, &tape.values, b_id).as_chart_mut();
            for i in 0..n {
                for j in 0..lb {
                    g_b.logr[i * lb + j] += g_out.logr[i * lo + la + j];
                    g_b.theta[i * lb + j] += g_out.theta[i * lo + la + j];
                }
            }
        }
        OpKind::RealConv { geom } => {
            let g_out = match g_out {
                Buffer::Real(b) => b,
                _ => unreachable!(),
            };
            let parent_id = node.inputs[0];
            let parent = tape.values[parent_id].as_ref().unwrap().as_real();
            let in_shape = parent.shape;
            let in_len = parent.sample_len();
            let out_len = g_out.sample_len();
            let weight = params.get(node.params[0]);
            let g_in = adj_buffer(adjoints, &tape.values, parent_id).as_real_mut();
            let locals: Vec<(Vec<f64>, Vec<f64>)> = g_in
                .data
                .par_chunks_mut(in_len)
                .zip(parent.data.par_chunks(in_len))
                .zip(g_out.data.par_chunks(out_len))
                .map(|((gi, input), go)| {
                    let mut gw = vec![0.0; weight.len()];
                    let mut gb = vec![0.0; geom.out_channels];
                    real_conv_backward(input, in_shape, geom, weight, go, gi, &mut gw, &mut gb);
                    (gw, gb)
                })
                .collect();
            let w_trainable = params.is_trainable(node.params[0]);
            let b_trainable = params.is_trainable(node.params[1]);
            for (gw, gb) in locals {
                if w_trainable {
                    for (acc, v) in grads.get_mut(node.params[0]).iter_mut().zip(gw) {
                        *acc += v;
                    }
                }
                if b_trainable {
                    for (acc, v) in grads.get_mut(node.params[1]).iter_mut().zip(gb) {
                        *acc += v;
                    }
                }
            }
        }
        OpKind::BatchNorm { channels } => {
            let Saved::BatchNorm {
                mean,
                invstd,
                train,
                ..
            } = &tape.saved[idx]
            else {
                unreachable!("batch norm saved context")
            };
            let g_out = match g_out {
                Buffer::Real(b) => b,
                _ => unreachable!(),
            };
            let parent_id = node.inputs[0];
            let parent = tape.values[parent_id].as_ref().unwrap().as_real();
            let plane = parent.shape.height * parent.shape.width;
            let len = parent.sample_len();
            let count = (n * plane) as f64;
            let gamma = params.get(node.params[0]);
            let g_in = adj_buffer(adjoints, &tape.values, parent_id).as_real_mut();
            let mut g_gamma = vec![0.0; *channels];
            let mut g_beta = vec![0.0; *channels];
            for c in 0..*channels {
                let mut sum_g = 0.0;
                let mut sum_gx = 0.0;
                for i in 0..n {
                    for j in 0..plane {
                        let fidx = i * len + c * plane + j;
                        let xhat = (parent.data[fidx] - mean[c]) * invstd[c];
                        sum_g += g_out.data[fidx];
                        sum_gx += g_out.data[fidx] * xhat;
                    }
                }
                g_gamma[c] = sum_gx;
                g_beta[c] = sum_g;
                for i in 0..n {
                    for j in 0..plane {
                        let fidx = i * len + c * plane + j;
                        let go = g_out.data[fidx];
                        if *train {
                            let xhat = (parent.data[fidx] - mean[c]) * invstd[c];
                            g_in.data[fidx] += gamma[c]
                                * invstd[c]
                                * (go - sum_g / count - xhat * sum_gx / count);
                        } else {
                            g_in.data[fidx] += go * gamma[c] * invstd[c];
                        }
                    }
                }
            }
            if params.is_trainable(node.params[0]) {
                for (acc, v) in grads.get_mut(node.params[0]).iter_mut().zip(g_gamma) {
                    *acc += v;
                }
            }
            if params.is_trainable(node.params[1]) {
                for (acc, v) in grads.get_mut(node.params[1]).iter_mut().zip(g_beta) {
                    *acc += v;
                }
            }
        }
        OpKind::Relu => {
            let g_out = match g_out {
                Buffer::Real(b) => b,
                _ => unreachable!(),
            };
            let parent_id = node.inputs[0];
            let parent = tape.values[parent_id].as_ref().unwrap().as_real();
            let g_in = adj_buffer(adjoints, &tape.values, parent_id).as_real_mut();
            for ((gi, &go), &v) in g_in.data.iter_mut().zip(&g_out.data).zip(&parent.data) {
                if v > 0.0 {
                    *gi += go;
                }
            }
        }
        OpKind::MaxPool { .. } => {
            let Saved::MaxPool { argmax } = &tape.saved[idx] else {
                unreachable!("max pool saved context")
            };
            let g_out = match g_out {
                Buffer::Real(b) => b,
                _ => unreachable!(),
            };
            let parent_id = node.inputs[0];
            let in_len = tape.values[parent_id].as_ref().unwrap().as_real().sample_len();
            let out_len = g_out.sample_len();
            let g_in = adj_buffer(adjoints, &tape.values, parent_id).as_real_mut();
            for i in 0..n {
                for o in 0..out_len {
                    g_in.data[i * in_len + argmax[i * out_len + o]] += g_out.data[i * out_len + o];
                }
            }
        }
        OpKind::AddTensors => {
            let g_out = match g_out {
                Buffer::Real(b) => b,
                _ => unreachable!(),
            };
            for &parent_id in &node.inputs {
                let g_in = adj_buffer(adjoints, &tape.values, parent_id).as_real_mut();
                for (gi, &go) in g_in.data.iter_mut().zip(&g_out.data) {
                    *gi += go;
                }
            }
        }
        OpKind::Flatten => {
            let g_out = match g_out {
                Buffer::Real(b) => b,
                _ => unreachable!(),
            };
            let parent_id = node.inputs[0];
            let g_in = adj_buffer(adjoints, &tape.values, parent_id).as_real_mut();
            for (gi, &go) in g_in.data.iter_mut().zip(&g_out.data) {
                *gi += go;
            }
        }
        OpKind::Dense { in_dim, out_dim } => {
            let g_out = match g_out {
                Buffer::Real(b) => b,
                _ => unreachable!(),
            };
            let parent_id = node.inputs[0];
            let parent = tape.values[parent_id].as_ref().unwrap().as_real();
            let weight = params.get(node.params[0]);
            let g_in = adj_buffer(adjoints, &tape.values, parent_id).as_real_mut();
            let w_trainable = params.is_trainable(node.params[0]);
            let b_trainable = params.is_trainable(node.params[1]);
            for i in 0..n {
                let x = &parent.data[i * in_dim..(i + 1) * in_dim];
                let go = &g_out.data[i * out_dim..(i + 1) * out_dim];
                for o in 0..*out_dim {
                    let g = go[o];
                    if g == 0.0 {
                        continue;
                    }
                    if w_trainable {
                        let gw = grads.get_mut(node.params[0]);
                        for j in 0..*in_dim {
                            gw[o * in_dim + j] += g * x[j];
                        }
                    }
                    for j in 0..*in_dim {
                        g_in.data[i * in_dim + j] += g * weight[o * in_dim + j];
                    }
                }
                if b_trainable {
                    let gb = grads.get_mut(node.params[1]);
                    for o in 0..*out_dim {
                        gb[o] += go[o];
                    }
                }
            }
        }
    }
}
