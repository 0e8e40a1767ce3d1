//! Standard real-valued layers for the classifier tail: convolution with
//! bias and optional zero padding, batch normalization with running
//! statistics, ReLU, max pooling, fully connected, and softmax cross-entropy.

use crate::error::{Error, Result};
use crate::layers::wfm_conv::ConvGeom;
use crate::tensor::{RealTensor, Shape};

/// Real convolution parameters. Weight layout is row-major
/// (out_channels, in_channels * kh * kw); one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RealConvSpec {
    geom: ConvGeom,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl RealConvSpec {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Self {
        let geom = ConvGeom {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        };
        RealConvSpec {
            weight: vec![0.0; out_channels * geom.window_len()],
            bias: vec![0.0; out_channels],
            geom,
        }
    }

    pub fn geom(&self) -> &ConvGeom {
        &self.geom
    }

    pub fn out_shape(&self, input: Shape) -> Result<Shape> {
        if input.channels != self.geom.in_channels {
            return Err(Error::shape(
                "real_conv",
                format!(
                    "input shape {input} has {} channels, spec expects {}",
                    input.channels, self.geom.in_channels
                ),
            ));
        }
        let (oh, ow) = self.geom.out_spatial(input.height, input.width)?;
        Ok(Shape::new(self.geom.out_channels, oh, ow))
    }
}

/// Forward kernel over flat planes; shared with the autodiff op.
pub(crate) fn real_conv_forward(
    input: &[f64],
    in_shape: Shape,
    geom: &ConvGeom,
    weight: &[f64],
    bias: &[f64],
    out: &mut [f64],
) {
    let (oh, ow) = geom
        .out_spatial(in_shape.height, in_shape.width)
        .expect("caller validates geometry");
    let (kh, kw) = geom.kernel;
    let (sh, sw) = geom.stride;
    let (ph, pw) = geom.padding;
    let window = geom.window_len();
    for oc in 0..geom.out_channels {
        let wrow = &weight[oc * window..(oc + 1) * window];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias[oc];
                let mut j = 0;
                for c in 0..geom.in_channels {
                    for dy in 0..kh {
                        let iy = (oy * sh + dy) as isize - ph as isize;
                        for dx in 0..kw {
                            let ix = (ox * sw + dx) as isize - pw as isize;
                            if iy >= 0
                                && (iy as usize) < in_shape.height
                                && ix >= 0
                                && (ix as usize) < in_shape.width
                            {
                                let idx = (c * in_shape.height + iy as usize) * in_shape.width
                                    + ix as usize;
                                acc += wrow[j] * input[idx];
                            }
                            j += 1;
                        }
                    }
                }
                out[(oc * oh + oy) * ow + ox] = acc;
            }
        }
    }
}

/// Backward kernel: accumulates input, weight, and bias adjoints.
#[allow(clippy::too_many_arguments)]
pub(crate) fn real_conv_backward(
    input: &[f64],
    in_shape: Shape,
    geom: &ConvGeom,
    weight: &[f64],
    g_out: &[f64],
    g_input: &mut [f64],
    g_weight: &mut [f64],
    g_bias: &mut [f64],
) {
    let (oh, ow) = geom
        .out_spatial(in_shape.height, in_shape.width)
        .expect("caller validates geometry");
    let (kh, kw) = geom.kernel;
    let (sh, sw) = geom.stride;
    let (ph, pw) = geom.padding;
    let window = geom.window_len();
    for oc in 0..geom.out_channels {
        let wrow = &weight[oc * window..(oc + 1) * window];
        let gwrow = &mut g_weight[oc * window..(oc + 1) * window];
        for oy in 0..oh {
            for ox in 0..ow {
                let g = g_out[(oc * oh + oy) * ow + ox];
                if g == 0.0 {
                    continue;
                }
                g_bias[oc] += g;
                let mut j = 0;
                for c in 0..geom.in_channels {
                    for dy in 0..kh {
                        let iy = (oy * sh + dy) as isize - ph as isize;
                        for dx in 0..kw {
                            let ix = (ox * sw + dx) as isize - pw as isize;
                            if iy >= 0
                                && (iy as usize) < in_shape.height
                                && ix >= 0
                                && (ix as usize) < in_shape.width
                            {
                                let idx = (c * in_shape.height + iy as usize) * in_shape.width
                                    + ix as usize;
                                gwrow[j] += g * input[idx];
                                g_input[idx] += g * wrow[j];
                            }
                            j += 1;
                        }
                    }
                }
            }
        }
    }
}

/// Convolution with bias; zero padding when the spec sets it.
pub fn real_conv(input: &RealTensor, spec: &RealConvSpec) -> Result<RealTensor> {
    let out_shape = spec.out_shape(input.shape())?;
    let mut out = vec![0.0; out_shape.len()];
    real_conv_forward(
        input.data(),
        input.shape(),
        spec.geom(),
        &spec.weight,
        &spec.bias,
        &mut out,
    );
    RealTensor::new(out_shape, out)
}

/// Batch normalization parameters and running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormSpec {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

pub const BATCH_NORM_MOMENTUM: f64 = 0.9;
pub const BATCH_NORM_EPS: f64 = 1e-5;

impl BatchNormSpec {
    pub fn new(channels: usize) -> Self {
        BatchNormSpec {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: BATCH_NORM_MOMENTUM,
            eps: BATCH_NORM_EPS,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// Evaluation-mode batch norm: normalizes with the running statistics.
pub fn batch_norm_eval(input: &RealTensor, spec: &BatchNormSpec) -> Result<RealTensor> {
    let shape = input.shape();
    if shape.channels != spec.channels() {
        return Err(Error::shape(
            "batch_norm",
            format!(
                "input shape {shape} has {} channels, spec has {}",
                shape.channels,
                spec.channels()
            ),
        ));
    }
    let plane = shape.height * shape.width;
    let mut out = vec![0.0; shape.len()];
    for c in 0..shape.channels {
        let inv = 1.0 / (spec.running_var[c] + spec.eps).sqrt();
        for i in 0..plane {
            let idx = c * plane + i;
            out[idx] = spec.gamma[c] * (input.data()[idx] - spec.running_mean[c]) * inv
                + spec.beta[c];
        }
    }
    RealTensor::new(shape, out)
}

/// Elementwise max(x, 0).
pub fn relu(input: &RealTensor) -> RealTensor {
    RealTensor::new(
        input.shape(),
        input.data().iter().map(|&v| v.max(0.0)).collect(),
    )
    .expect("shape preserved")
}

/// Max pooling; non-overlapping (stride = kernel) unless a stride is given.
pub fn max_pool(
    input: &RealTensor,
    kernel: (usize, usize),
    stride: Option<(usize, usize)>,
) -> Result<RealTensor> {
    let stride = stride.unwrap_or(kernel);
    let shape = input.shape();
    let (kh, kw) = kernel;
    let (sh, sw) = stride;
    if kh > shape.height || kw > shape.width {
        return Err(Error::shape(
            "max_pool",
            format!("kernel {kh}x{kw} does not fit input {shape}"),
        ));
    }
    let oh = (shape.height - kh) / sh + 1;
    let ow = (shape.width - kw) / sw + 1;
    let mut out = RealTensor::zeros(Shape::new(shape.channels, oh, ow));
    for c in 0..shape.channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                for dy in 0..kh {
                    for dx in 0..kw {
                        best = best.max(input.get(c, oy * sh + dy, ox * sw + dx));
                    }
                }
                out.set(c, oy, ox, best);
            }
        }
    }
    Ok(out)
}

/// Affine map logits = W x + b; weight layout (out_dim, in_dim) row-major.
pub fn fully_connected(input: &[f64], weight: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
    let out_dim = bias.len();
    if out_dim == 0 || weight.len() % out_dim != 0 {
        return Err(Error::Invalid("fully_connected weight/bias sizes".into()));
    }
    let in_dim = weight.len() / out_dim;
    if input.len() != in_dim {
        return Err(Error::LengthMismatch {
            expected: in_dim,
            got: input.len(),
        });
    }
    Ok((0..out_dim)
        .map(|o| {
            bias[o]
                + weight[o * in_dim..(o + 1) * in_dim]
                    .iter()
                    .zip(input)
                    .map(|(w, x)| w * x)
                    .sum::<f64>()
        })
        .collect())
}

/// Numerically stable softmax probabilities.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    crate::layers::softmax_into(logits, &mut out);
    out
}

/// Mean-reduction-free cross-entropy for one sample: returns the loss
/// `-log softmax(logits)[label]` and the logits adjoint `softmax - onehot`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    assert!(label < logits.len(), "label {label} out of range");
    let mut probs = softmax(logits);
    let loss = -probs[label].max(f64::MIN_POSITIVE).ln();
    probs[label] -= 1.0;
    (loss, probs)
}
