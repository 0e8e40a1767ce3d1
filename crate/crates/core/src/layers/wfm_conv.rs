//! Convolution as a learned weighted Frechet mean over sliding windows.
//!
//! A kernel spans a local spatial neighbourhood but all input channels; each
//! output channel owns one weight set over the `in_channels * kh * kw`
//! window, stored as unconstrained logits and mapped through softmax so the
//! effective weights are strictly positive and sum to 1 at every step.

use crate::error::{Error, Result};
use crate::gate::GateHash;
use crate::layers::{softmax_into, softmax_vjp};
use crate::tensor::{ComplexTensor, Shape};
use crate::wfm::{wfm_chart_gated, wfm_chart_vjp, WfmScratch};

/// Spatial geometry shared by complex and real convolutions. Output spatial
/// size is `floor((in + 2*pad - kernel) / stride) + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
}

impl ConvGeom {
    pub fn window_len(&self) -> usize {
        self.in_channels * self.kernel.0 * self.kernel.1
    }

    pub fn out_spatial(&self, in_h: usize, in_w: usize) -> Result<(usize, usize)> {
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (ph, pw) = self.padding;
        let h = in_h + 2 * ph;
        let w = in_w + 2 * pw;
        if kh > h || kw > w {
            return Err(Error::shape(
                "convolution",
                format!("kernel {kh}x{kw} does not fit input {in_h}x{in_w} with padding {ph},{pw}"),
            ));
        }
        assert!(sh > 0 && sw > 0, "stride must be positive");
        Ok(((h - kh) / sh + 1, (w - kw) / sw + 1))
    }
}

/// Weighted-Frechet-mean convolution layer parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WfmConvSpec {
    geom: ConvGeom,
    /// Row-major (out_channels, in_channels * kh * kw).
    logits: Vec<f64>,
}

impl WfmConvSpec {
    /// Zero logits: every output channel starts as the unweighted mean.
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
    ) -> Self {
        let geom = ConvGeom {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding: (0, 0),
        };
        WfmConvSpec {
            logits: vec![0.0; out_channels * geom.window_len()],
            geom,
        }
    }

    pub fn with_logits(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        logits: Vec<f64>,
    ) -> Result<Self> {
        let mut spec = WfmConvSpec::new(in_channels, out_channels, kernel, stride);
        if logits.len() != spec.logits.len() {
            return Err(Error::LengthMismatch {
                expected: spec.logits.len(),
                got: logits.len(),
            });
        }
        spec.logits = logits;
        Ok(spec)
    }

    pub fn geom(&self) -> &ConvGeom {
        &self.geom
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    /// Effective weights: softmax of each output channel's logit row.
    /// Strictly positive, each row sums to 1.
    pub fn softmax_weights(&self) -> Vec<f64> {
        let window = self.geom.window_len();
        let mut out = vec![0.0; self.logits.len()];
        for oc in 0..self.geom.out_channels {
            softmax_into(
                &self.logits[oc * window..(oc + 1) * window],
                &mut out[oc * window..(oc + 1) * window],
            );
        }
        out
    }

    pub fn out_shape(&self, input: Shape) -> Result<Shape> {
        if input.channels != self.geom.in_channels {
            return Err(Error::shape(
                "wfm_conv",
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

/// Gather one window (channel-major, then row, then column) into scratch.
#[inline]
#[allow(clippy::too_many_arguments)]
fn gather_window(
    in_logr: &[f64],
    in_theta: &[f64],
    in_shape: Shape,
    oy: usize,
    ox: usize,
    geom: &ConvGeom,
    win_logr: &mut [f64],
    win_theta: &mut [f64],
    win_idx: &mut [usize],
) {
    let (kh, kw) = geom.kernel;
    let (sh, sw) = geom.stride;
    let mut j = 0;
    for c in 0..geom.in_channels {
        for dy in 0..kh {
            let row = (c * in_shape.height + oy * sh + dy) * in_shape.width + ox * sw;
            for dx in 0..kw {
                let idx = row + dx;
                win_logr[j] = in_logr[idx];
                win_theta[j] = in_theta[idx];
                win_idx[j] = idx;
                j += 1;
            }
        }
    }
}

/// Forward kernel on chart planes. `weights` are the softmaxed rows.
#[allow(clippy::too_many_arguments)]
pub(crate) fn wfm_conv_forward_chart(
    in_logr: &[f64],
    in_theta: &[f64],
    in_shape: Shape,
    geom: &ConvGeom,
    weights: &[f64],
    out_logr: &mut [f64],
    out_theta: &mut [f64],
    gate: &mut GateHash,
) {
    let (oh, ow) = geom
        .out_spatial(in_shape.height, in_shape.width)
        .expect("caller validates geometry");
    let window = geom.window_len();
    let mut win_logr = vec![0.0; window];
    let mut win_theta = vec![0.0; window];
    let mut win_idx = vec![0usize; window];
    for oc in 0..geom.out_channels {
        let w = &weights[oc * window..(oc + 1) * window];
        for oy in 0..oh {
            for ox in 0..ow {
                gather_window(
                    in_logr, in_theta, in_shape, oy, ox, geom, &mut win_logr, &mut win_theta,
                    &mut win_idx,
                );
                let (ml, mt) = wfm_chart_gated(&win_logr, &win_theta, w, gate);
                let o = (oc * oh + oy) * ow + ox;
                out_logr[o] = ml;
                out_theta[o] = mt;
            }
        }
    }
}

/// Backward kernel on chart planes.
///
/// Accumulates input adjoints into `g_in_*` and raw (pre-softmax-VJP) weight
/// adjoints into `g_weights`, both with `+=`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn wfm_conv_backward_chart(
    in_logr: &[f64],
    in_theta: &[f64],
    in_shape: Shape,
    geom: &ConvGeom,
    weights: &[f64],
    g_out_logr: &[f64],
    g_out_theta: &[f64],
    g_in_logr: &mut [f64],
    g_in_theta: &mut [f64],
    g_weights: &mut [f64],
) {
    let (oh, ow) = geom
        .out_spatial(in_shape.height, in_shape.width)
        .expect("caller validates geometry");
    let window = geom.window_len();
    let mut win_logr = vec![0.0; window];
    let mut win_theta = vec![0.0; window];
    let mut win_idx = vec![0usize; window];
    let mut gz_logr = vec![0.0; window];
    let mut gz_theta = vec![0.0; window];
    let mut scratch = WfmScratch::default();
    for oc in 0..geom.out_channels {
        let w = &weights[oc * window..(oc + 1) * window];
        let gw = &mut g_weights[oc * window..(oc + 1) * window];
        for oy in 0..oh {
            for ox in 0..ow {
                gather_window(
                    in_logr, in_theta, in_shape, oy, ox, geom, &mut win_logr, &mut win_theta,
                    &mut win_idx,
                );
                let o = (oc * oh + oy) * ow + ox;
                gz_logr.fill(0.0);
                gz_theta.fill(0.0);
                wfm_chart_vjp(
                    &win_logr,
                    &win_theta,
                    w,
                    g_out_logr[o],
                    g_out_theta[o],
                    &mut gz_logr,
                    &mut gz_theta,
                    gw,
                    &mut scratch,
                );
                for j in 0..window {
                    g_in_logr[win_idx[j]] += gz_logr[j];
                    g_in_theta[win_idx[j]] += gz_theta[j];
                }
            }
        }
    }
}

/// Map raw weight adjoints through the softmax and accumulate logit adjoints.
pub(crate) fn wfm_conv_logit_grads(
    spec_weights: &[f64],
    g_weights: &[f64],
    out_channels: usize,
    window: usize,
    g_logits: &mut [f64],
) {
    for oc in 0..out_channels {
        let range = oc * window..(oc + 1) * window;
        softmax_vjp(
            &spec_weights[range.clone()],
            &g_weights[range.clone()],
            &mut g_logits[range],
        );
    }
}

/// Apply the wFM convolution to a tensor of manifold points.
pub fn wfm_conv(input: &ComplexTensor, spec: &WfmConvSpec) -> Result<ComplexTensor> {
    let out_shape = spec.out_shape(input.shape())?;
    let (in_logr, in_theta) = input.to_chart();
    let weights = spec.softmax_weights();
    let mut out_logr = vec![0.0; out_shape.len()];
    let mut out_theta = vec![0.0; out_shape.len()];
    let mut gate = GateHash::default();
    wfm_conv_forward_chart(
        &in_logr,
        &in_theta,
        input.shape(),
        spec.geom(),
        &weights,
        &mut out_logr,
        &mut out_theta,
        &mut gate,
    );
    ComplexTensor::from_chart(out_shape, &out_logr, &out_theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{act, distance, GroupElement, PolarComplex};
    use crate::wfm::{wfm_incremental, PointSet, WeightVector};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: Shape) -> ComplexTensor {
        ComplexTensor::from_fn(shape, |_, _, _| {
            PolarComplex::new(rng.random_range(0.2..4.0), rng.random_range(-PI..PI))
        })
    }

    #[test]
    fn identity_kernel_passes_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let input = random_tensor(&mut rng, Shape::new(1, 4, 4));
        // 1x1 kernel, one input tap: softmax of a single logit is weight 1.
        let spec = WfmConvSpec::new(1, 1, (1, 1), (1, 1));
        let out = wfm_conv(&input, &spec).unwrap();
        assert_eq!(out.shape(), input.shape());
        for (a, b) in out.data().iter().zip(input.data()) {
            assert!(distance(*a, *b) < 1e-12);
        }
    }

    #[test]
    fn table_shape_arithmetic() {
        // 100x100 input, 5x5 kernel, stride 2, 20 output channels -> 48x48.
        let spec = WfmConvSpec::new(1, 20, (5, 5), (2, 2));
        let out = spec.out_shape(Shape::new(1, 100, 100)).unwrap();
        assert_eq!(out, Shape::new(20, 48, 48));
        // Second layer: 48x48 -> 22x22.
        let spec = WfmConvSpec::new(20, 20, (5, 5), (2, 2));
        let out = spec.out_shape(Shape::new(20, 48, 48)).unwrap();
        assert_eq!(out, Shape::new(20, 22, 22));
    }

    #[test]
    fn channel_mismatch_reports_both_shapes() {
        let spec = WfmConvSpec::new(3, 4, (2, 2), (1, 1));
        let input = ComplexTensor::constant(Shape::new(2, 4, 4), PolarComplex::new(1.0, 0.0));
        let err = wfm_conv(&input, &spec).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2,4,4]") && msg.contains('3'), "message: {msg}");
    }

    #[test]
    fn constant_image_stays_constant() {
        let v = PolarComplex::new(0.7, 1.3);
        let input = ComplexTensor::constant(Shape::new(1, 4, 4), v);
        let spec = WfmConvSpec::new(1, 3, (2, 2), (1, 1));
        let out = wfm_conv(&input, &spec).unwrap();
        assert_eq!(out.shape(), Shape::new(3, 3, 3));
        for p in out.data() {
            assert!(distance(*p, v) < 1e-12);
        }
    }

    #[test]
    fn windows_match_incremental_solver() {
        // Each output element is the wFM of its window points in
        // channel-major, row, column order.
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let input = random_tensor(&mut rng, Shape::new(2, 5, 5));
        let mut spec = WfmConvSpec::new(2, 3, (2, 2), (2, 1));
        for l in spec.logits_mut() {
            *l = rng.random_range(-1.0..1.0);
        }
        let weights = spec.softmax_weights();
        let out = wfm_conv(&input, &spec).unwrap();
        assert_eq!(out.shape(), Shape::new(3, 2, 4));

        let window = spec.geom().window_len();
        for oc in 0..3 {
            for oy in 0..2 {
                for ox in 0..4 {
                    let mut pts = Vec::new();
                    for c in 0..2 {
                        for dy in 0..2 {
                            for dx in 0..2 {
                                pts.push(input.get(c, oy * 2 + dy, ox + dx));
                            }
                        }
                    }
                    let expect = wfm_incremental(
                        &PointSet::new(pts).unwrap(),
                        &WeightVector::new(weights[oc * window..(oc + 1) * window].to_vec())
                            .unwrap(),
                    )
                    .unwrap();
                    assert!(distance(out.get(oc, oy, ox), expect) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn softmax_weights_positive_and_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let mut spec = WfmConvSpec::new(3, 5, (3, 3), (1, 1));
        for l in spec.logits_mut() {
            *l = rng.random_range(-8.0..8.0);
        }
        let w = spec.softmax_weights();
        let window = spec.geom().window_len();
        for oc in 0..5 {
            let row = &w[oc * window..(oc + 1) * window];
            assert!(row.iter().all(|&x| x > 0.0));
            assert_relative_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn conv_is_equivariant_to_group_actions() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let mut max_err: f64 = 0.0;
        for _ in 0..50 {
            let input = random_tensor(&mut rng, Shape::new(2, 6, 6));
            let mut spec = WfmConvSpec::new(2, 4, (3, 3), (2, 2));
            for l in spec.logits_mut() {
                *l = rng.random_range(-1.5..1.5);
            }
            let g = GroupElement::new(rng.random_range(0.3..3.0), rng.random_range(-PI..PI));
            let moved = ComplexTensor::from_fn(input.shape(), |c, y, x| act(g, input.get(c, y, x)));
            let lhs = wfm_conv(&moved, &spec).unwrap();
            let rhs = wfm_conv(&input, &spec).unwrap();
            for (a, b) in lhs.data().iter().zip(rhs.data()) {
                max_err = max_err.max(distance(*a, act(g, *b)));
            }
        }
        assert!(max_err < 1e-9, "equivariance violated: {max_err}");
    }
}
