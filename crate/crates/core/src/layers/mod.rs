//! Network layers: manifold-valued (wFM convolution, tReLU, G-transport,
//! distance transform, residual combination) and the real-valued classifier
//! tail, plus the optional tensor-ring weight factorization.

pub mod activation;
pub mod distance;
pub mod real;
pub mod residual;
pub mod tensor_ring;
pub mod wfm_conv;

pub use activation::{g_transport, trelu, GTransportSpec};
pub use distance::distance_transform;
pub use real::{
    batch_norm_eval, fully_connected, max_pool, real_conv, relu, softmax, softmax_cross_entropy,
    BatchNormSpec, RealConvSpec, BATCH_NORM_EPS, BATCH_NORM_MOMENTUM,
};
pub use residual::residual_combine;
pub use tensor_ring::{tensor_ring_param_count, TensorRingSpec};
pub use wfm_conv::{wfm_conv, ConvGeom, WfmConvSpec};

/// Numerically stable softmax written into `out`.
pub(crate) fn softmax_into(logits: &[f64], out: &mut [f64]) {
    debug_assert_eq!(logits.len(), out.len());
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Adjoint of softmax: given weights w = softmax(l) and upstream adjoints gw,
/// accumulates dL/dl_i = w_i * (gw_i - sum_j gw_j w_j).
pub(crate) fn softmax_vjp(w: &[f64], gw: &[f64], g_logits: &mut [f64]) {
    debug_assert_eq!(w.len(), gw.len());
    debug_assert_eq!(w.len(), g_logits.len());
    let dot: f64 = w.iter().zip(gw).map(|(a, b)| a * b).sum();
    for i in 0..w.len() {
        g_logits[i] += w[i] * (gw[i] - dot);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn softmax_vjp_matches_finite_differences() {
        let logits = [0.3, -1.2, 0.8, 0.0];
        let gw = [0.5, -0.25, 1.0, 0.1];
        let mut w = vec![0.0; 4];
        softmax_into(&logits, &mut w);
        let mut analytic = vec![0.0; 4];
        softmax_vjp(&w, &gw, &mut analytic);

        let h = 1e-7;
        for i in 0..4 {
            let mut lp = logits;
            lp[i] += h;
            let mut lm = logits;
            lm[i] -= h;
            let mut wp = vec![0.0; 4];
            let mut wm = vec![0.0; 4];
            softmax_into(&lp, &mut wp);
            softmax_into(&lm, &mut wm);
            let fp: f64 = wp.iter().zip(&gw).map(|(a, b)| a * b).sum();
            let fm: f64 = wm.iter().zip(&gw).map(|(a, b)| a * b).sum();
            assert_relative_eq!(analytic[i], (fp - fm) / (2.0 * h), epsilon = 1e-7);
        }
    }
}
