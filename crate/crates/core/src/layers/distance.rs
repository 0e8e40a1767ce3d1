//! Distance transform: the invariance cut from manifold values to reals.
//!
//! For each weight set, the layer computes the wFM of all `channels * height
//! * width` values and replaces every value by its manifold distance to that
//! mean. Group actions move the points and the mean together and the distance
//! is isometry-invariant, so the output ignores complex scaling entirely.

use crate::error::{Error, Result};
use crate::gate::GateHash;
use crate::manifold::{chart_distance, wrap_phase};
use crate::tensor::{ComplexTensor, RealTensor, Shape};
use crate::wfm::{wfm_chart_gated, wfm_chart_vjp, WeightVector, WfmScratch};

/// Adjoint of `d = sqrt(dlr^2 + 2 dth^2)` with upstream gradient `g`:
/// returns (d/d dlr, d/d dth). Zero subgradient at the tie d = 0.
#[inline]
pub(crate) fn chart_distance_vjp(dlr: f64, dth: f64, d: f64, g: f64) -> (f64, f64) {
    if d == 0.0 {
        (0.0, 0.0)
    } else {
        (g * dlr / d, g * 2.0 * dth / d)
    }
}

/// Forward kernel on chart planes; `weights` holds `sets` rows of length `n`.
/// Saves each set's mean for the backward pass.
pub(crate) fn distance_transform_forward_chart(
    in_logr: &[f64],
    in_theta: &[f64],
    weights: &[f64],
    sets: usize,
    out: &mut [f64],
    means: &mut Vec<(f64, f64)>,
    gate: &mut GateHash,
) {
    let n = in_logr.len();
    means.clear();
    for s in 0..sets {
        let w = &weights[s * n..(s + 1) * n];
        let (m_logr, m_theta) = wfm_chart_gated(in_logr, in_theta, w, gate);
        means.push((m_logr, m_theta));
        for k in 0..n {
            let dlr = in_logr[k] - m_logr;
            let dth = wrap_phase(in_theta[k] - m_theta);
            gate.near_cut(dth);
            out[s * n + k] = chart_distance(dlr, dth);
        }
    }
}

/// Backward kernel: accumulates input adjoints and raw weight adjoints.
#[allow(clippy::too_many_arguments)]
pub(crate) fn distance_transform_backward_chart(
    in_logr: &[f64],
    in_theta: &[f64],
    weights: &[f64],
    sets: usize,
    means: &[(f64, f64)],
    g_out: &[f64],
    g_in_logr: &mut [f64],
    g_in_theta: &mut [f64],
    g_weights: &mut [f64],
) {
    let n = in_logr.len();
    let mut scratch = WfmScratch::default();
    for s in 0..sets {
        let (m_logr, m_theta) = means[s];
        let mut gm_logr = 0.0;
        let mut gm_theta = 0.0;
        for k in 0..n {
            let dlr = in_logr[k] - m_logr;
            let dth = wrap_phase(in_theta[k] - m_theta);
            let d = chart_distance(dlr, dth);
            let (g_dlr, g_dth) = chart_distance_vjp(dlr, dth, d, g_out[s * n + k]);
            g_in_logr[k] += g_dlr;
            g_in_theta[k] += g_dth;
            gm_logr -= g_dlr;
            gm_theta -= g_dth;
        }
        wfm_chart_vjp(
            in_logr,
            in_theta,
            &weights[s * n..(s + 1) * n],
            gm_logr,
            gm_theta,
            g_in_logr,
            g_in_theta,
            &mut g_weights[s * n..(s + 1) * n],
            &mut scratch,
        );
    }
}

/// Distance transform over the whole feature map.
///
/// Each weight set spans all flattened elements (row-major channel, row,
/// column). With W sets the output has shape (W * channels, height, width):
/// sets are stacked along the channel axis in order.
pub fn distance_transform(
    input: &ComplexTensor,
    weight_sets: &[WeightVector],
) -> Result<RealTensor> {
    if weight_sets.is_empty() {
        return Err(Error::Invalid("no weight sets given".into()));
    }
    let n = input.shape().len();
    for ws in weight_sets {
        if ws.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: ws.len(),
            });
        }
    }
    let (in_logr, in_theta) = input.to_chart();
    let sets = weight_sets.len();
    let mut weights = Vec::with_capacity(sets * n);
    for ws in weight_sets {
        weights.extend_from_slice(ws.as_slice());
    }
    let mut out = vec![0.0; sets * n];
    let mut means = Vec::new();
    let mut gate = GateHash::default();
    distance_transform_forward_chart(
        &in_logr, &in_theta, &weights, sets, &mut out, &mut means, &mut gate,
    );
    RealTensor::new(
        Shape::new(
            sets * input.shape().channels,
            input.shape().height,
            input.shape().width,
        ),
        out,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{act, GroupElement, PolarComplex};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn constant_input_gives_zero_output() {
        let input = ComplexTensor::constant(Shape::new(2, 3, 3), PolarComplex::new(1.7, 0.4));
        let out = distance_transform(&input, &[WeightVector::uniform(18)]).unwrap();
        assert!(out.data().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn symmetric_pair_distances() {
        let input = ComplexTensor::new(
            Shape::new(1, 1, 2),
            vec![
                PolarComplex::new(1.0, PI / 6.0),
                PolarComplex::new(1.0, -PI / 6.0),
            ],
        )
        .unwrap();
        let out = distance_transform(&input, &[WeightVector::uniform(2)]).unwrap();
        let expected = 2.0_f64.sqrt() * PI / 6.0;
        assert_relative_eq!(out.data()[0], expected, epsilon = 1e-12);
        assert_relative_eq!(out.data()[1], expected, epsilon = 1e-12);
    }

    #[test]
    fn multiple_sets_stack_along_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let input = ComplexTensor::from_fn(Shape::new(2, 2, 2), |_, _, _| {
            PolarComplex::new(rng.random_range(0.3..3.0), rng.random_range(-PI..PI))
        });
        let w1 = WeightVector::uniform(8);
        let w2raw: Vec<f64> = (0..8).map(|_| rng.random_range(0.1..1.0)).collect();
        let w2 = WeightVector::new(w2raw).unwrap();
        let both = distance_transform(&input, &[w1.clone(), w2.clone()]).unwrap();
        assert_eq!(both.shape(), Shape::new(4, 2, 2));
        let first = distance_transform(&input, &[w1]).unwrap();
        let second = distance_transform(&input, &[w2]).unwrap();
        assert_eq!(&both.data()[..8], first.data());
        assert_eq!(&both.data()[8..], second.data());
    }

    #[test]
    fn length_mismatch_rejected() {
        let input = ComplexTensor::constant(Shape::new(1, 2, 2), PolarComplex::new(1.0, 0.0));
        let err = distance_transform(&input, &[WeightVector::uniform(3)]).unwrap_err();
        assert!(err.to_string().contains("length mismatch"));
    }

    #[test]
    fn output_is_invariant_to_group_actions() {
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        let mut max_err: f64 = 0.0;
        for _ in 0..100 {
            let input = ComplexTensor::from_fn(Shape::new(2, 3, 3), |_, _, _| {
                PolarComplex::new(rng.random_range(0.2..4.0), rng.random_range(-PI..PI))
            });
            let raw: Vec<f64> = (0..18).map(|_| rng.random_range(0.05..1.0)).collect();
            let w = WeightVector::new(raw).unwrap();
            let g = GroupElement::new(rng.random_range(0.25..4.0), rng.random_range(-PI..PI));
            let moved = ComplexTensor::from_fn(input.shape(), |c, y, x| act(g, input.get(c, y, x)));
            let a = distance_transform(&input, &[w.clone()]).unwrap();
            let b = distance_transform(&moved, &[w]).unwrap();
            for (x, y) in a.data().iter().zip(b.data()) {
                max_err = max_err.max((x - y).abs());
            }
        }
        assert!(max_err < 1e-9, "invariance violated: {max_err}");
    }

    #[test]
    fn squared_distance_gradient_convention() {
        // For loss = d^2, the adjoint of d is 2d, so the log-magnitude
        // gradient is exactly 2 * log(r_p / r_const).
        let dlr = 0.83_f64;
        let dth = -0.31_f64;
        let d = chart_distance(dlr, dth);
        let (g_dlr, g_dth) = chart_distance_vjp(dlr, dth, d, 2.0 * d);
        assert_relative_eq!(g_dlr, 2.0 * dlr, epsilon = 1e-12);
        assert_relative_eq!(g_dth, 4.0 * dth, epsilon = 1e-12);
        // Tie at d = 0 takes the zero subgradient.
        assert_eq!(chart_distance_vjp(0.0, 0.0, 0.0, 1.0), (0.0, 0.0));
    }
}
