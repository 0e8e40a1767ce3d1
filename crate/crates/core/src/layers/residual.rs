//! Residual combination for manifold-valued feature maps.
//!
//! Addition has no meaning on the manifold, so a skip connection first
//! brings the earlier (larger) map to the later map's spatial size with a
//! wFM convolution and then concatenates along the channel axis. Any channel
//! reduction is left to the next explicit convolution.

use crate::error::{Error, Result};
use crate::layers::wfm_conv::{wfm_conv, WfmConvSpec};
use crate::tensor::{ComplexTensor, Shape};

/// Concatenate `f1` with `f2` aligned to `f1`'s spatial shape.
///
/// Output channels are `f1.channels + align.out_channels`, `f1` first.
pub fn residual_combine(
    f1: &ComplexTensor,
    f2: &ComplexTensor,
    align: &WfmConvSpec,
) -> Result<ComplexTensor> {
    let aligned = wfm_conv(f2, align)?;
    if aligned.shape().spatial() != f1.shape().spatial() {
        return Err(Error::shape(
            "residual_combine",
            format!(
                "post-alignment spatial mismatch: aligned {} vs skip {}",
                aligned.shape(),
                f1.shape()
            ),
        ));
    }
    let out_shape = Shape::new(
        f1.shape().channels + aligned.shape().channels,
        f1.shape().height,
        f1.shape().width,
    );
    let mut data = Vec::with_capacity(out_shape.len());
    data.extend_from_slice(f1.data());
    data.extend_from_slice(aligned.data());
    ComplexTensor::new(out_shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{act, distance, GroupElement, PolarComplex};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: Shape) -> ComplexTensor {
        ComplexTensor::from_fn(shape, |_, _, _| {
            PolarComplex::new(rng.random_range(0.2..4.0), rng.random_range(-PI..PI))
        })
    }

    #[test]
    fn table_shape_arithmetic() {
        // f1 [20,22,22], f2 [20,48,48], align 5x5 stride 2 to 20 channels
        // -> [40,22,22].
        let mut rng = ChaCha8Rng::seed_from_u64(109);
        let f1 = random_tensor(&mut rng, Shape::new(20, 22, 22));
        let f2 = random_tensor(&mut rng, Shape::new(20, 48, 48));
        let align = WfmConvSpec::new(20, 20, (5, 5), (2, 2));
        let out = residual_combine(&f1, &f2, &align).unwrap();
        assert_eq!(out.shape(), Shape::new(40, 22, 22));
    }

    #[test]
    fn identity_align_duplicates_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(113);
        let f = random_tensor(&mut rng, Shape::new(2, 3, 3));
        // 1x1 kernel spanning both channels cannot be the identity; use a
        // per-channel identity by combining the tensor with itself through a
        // 1x1 conv that puts all weight on the matching channel.
        let mut align = WfmConvSpec::new(2, 2, (1, 1), (1, 1));
        for oc in 0..2 {
            for ic in 0..2 {
                align.logits_mut()[oc * 2 + ic] = if oc == ic { 40.0 } else { -40.0 };
            }
        }
        let out = residual_combine(&f, &f, &align).unwrap();
        assert_eq!(out.shape(), Shape::new(4, 3, 3));
        for c in 0..2 {
            for y in 0..3 {
                for x in 0..3 {
                    assert!(distance(out.get(c, y, x), f.get(c, y, x)) < 1e-12);
                    assert!(distance(out.get(c + 2, y, x), f.get(c, y, x)) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn spatial_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(127);
        let f1 = random_tensor(&mut rng, Shape::new(2, 4, 4));
        let f2 = random_tensor(&mut rng, Shape::new(2, 9, 9));
        let align = WfmConvSpec::new(2, 2, (3, 3), (2, 2)); // 9 -> 4, matches f1
        assert!(residual_combine(&f1, &f2, &align).is_ok());
        let align_bad = WfmConvSpec::new(2, 2, (3, 3), (1, 1)); // 9 -> 7, mismatch
        let err = residual_combine(&f1, &f2, &align_bad).unwrap_err();
        assert!(err.to_string().contains("spatial mismatch"));
    }

    #[test]
    fn combine_is_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(131);
        let mut max_err: f64 = 0.0;
        for _ in 0..25 {
            let f1 = random_tensor(&mut rng, Shape::new(2, 3, 3));
            let f2 = random_tensor(&mut rng, Shape::new(2, 7, 7));
            let mut align = WfmConvSpec::new(2, 3, (3, 3), (2, 2));
            for l in align.logits_mut() {
                *l = rng.random_range(-1.0..1.0);
            }
            let g = GroupElement::new(rng.random_range(0.3..3.0), rng.random_range(-PI..PI));
            let move_t = |t: &ComplexTensor| {
                ComplexTensor::from_fn(t.shape(), |c, y, x| act(g, t.get(c, y, x)))
            };
            let lhs = residual_combine(&move_t(&f1), &move_t(&f2), &align).unwrap();
            let rhs = residual_combine(&f1, &f2, &align).unwrap();
            for (a, b) in lhs.data().iter().zip(rhs.data()) {
                max_err = max_err.max(distance(*a, act(g, *b)));
            }
        }
        assert!(max_err < 1e-9, "equivariance violated: {max_err}");
    }
}
