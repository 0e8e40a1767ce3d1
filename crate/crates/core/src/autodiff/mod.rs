//! Reverse-mode differentiation over the layer graph, parameter storage,
//! optimizers, and a finite-difference gradient checker.

pub mod buffer;
pub mod gradcheck;
pub mod graph;
pub mod optim;
pub mod params;
pub mod tape;

pub use buffer::{Buffer, ChartBuf, InputBatch, RealBuf};
pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{BnState, BufKind, InputKind, Model, ModelBuilder, ModelState, Node, OpKind};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{apply_bn_updates, backward, forward, forward_checked, profile_pass, LayerTiming, Mode, Tape};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::PolarComplex;
    use crate::tensor::{ComplexTensor, RealTensor, Shape};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn complex_batch(rng: &mut ChaCha8Rng, n: usize, shape: Shape) -> InputBatch {
        let tensors: Vec<ComplexTensor> = (0..n)
            .map(|_| {
                ComplexTensor::from_fn(shape, |_, _, _| {
                    PolarComplex::new(rng.random_range(0.3..3.0), rng.random_range(-2.0..2.0))
                })
            })
            .collect();
        InputBatch::Complex(ChartBuf::from_tensors(&tensors).unwrap())
    }

    fn small_complex_model(seed: u64) -> (Model, ParamStore, ModelState) {
        let rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = ModelBuilder::new("test", InputKind::Complex, Shape::new(2, 4, 4), 3, rng);
        let x = b.wfm_conv(0, 3, (2, 2), (1, 1)).unwrap();
        let x = b.g_transport(x).unwrap();
        let x = b.distance_transform(x, 1).unwrap();
        let x = b.flatten(x).unwrap();
        let _ = b.dense(x, 3).unwrap();
        b.finish()
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let (model, params, state) = small_complex_model(7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let batch = complex_batch(&mut rng, 3, Shape::new(2, 4, 4));
        let mut tape = Tape::new();
        let a = forward(&model, &params, &state, &batch, Mode::Eval, &mut tape).unwrap();
        let b = forward(&model, &params, &state, &batch, Mode::Eval, &mut tape).unwrap();
        assert_eq!(a, b, "same input must replay to identical logits");
    }

    #[test]
    fn backward_before_forward_errors() {
        let (model, params, _) = small_complex_model(9);
        let tape = Tape::new();
        let mut grads = params.zero_grads();
        let err = backward(&model, &params, &tape, &[0.0; 3], &mut grads).unwrap_err();
        assert_eq!(err.to_string(), "backward called before forward");
    }

    #[test]
    fn input_shape_mismatch_names_layer() {
        let (model, params, state) = small_complex_model(10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let batch = complex_batch(&mut rng, 2, Shape::new(2, 5, 5));
        let mut tape = Tape::new();
        let err = forward(&model, &params, &state, &batch, Mode::Eval, &mut tape).unwrap_err();
        assert!(err.to_string().contains("input"));
    }

    #[test]
    fn identity_plus_dense_is_the_affine_map() {
        // Zero-layer model: flatten + fully connected on real input.
        let rng = ChaCha8Rng::seed_from_u64(12);
        let mut b = ModelBuilder::new("affine", InputKind::Real, Shape::new(1, 2, 2), 2, rng);
        let x = b.flatten(0).unwrap();
        let _ = b.dense(x, 2).unwrap();
        let (model, params, state) = b.finish();

        let input = RealTensor::new(Shape::new(1, 2, 2), vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        let batch = InputBatch::Real(RealBuf::from_tensors(&[input.clone()]).unwrap());
        let mut tape = Tape::new();
        let logits = forward(&model, &params, &state, &batch, Mode::Eval, &mut tape).unwrap();

        let w = params.get(params.id("fc1.weight").unwrap());
        let b = params.get(params.id("fc1.bias").unwrap());
        let expect =
            crate::layers::fully_connected(input.data(), w, b).unwrap();
        assert_eq!(logits, expect);
    }

    #[test]
    fn frozen_real_tail_gets_zero_gradients() {
        let (model, mut params, state) = small_complex_model(13);
        params.set_trainable_by_prefix("fc", false);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let batch = complex_batch(&mut rng, 2, Shape::new(2, 4, 4));
        let mut tape = Tape::new();
        let logits = forward(&model, &params, &state, &batch, Mode::Train, &mut tape).unwrap();
        let (_, adjoint) = gradcheck::batch_loss(&logits, &[0, 1], model.classes);
        let mut grads = params.zero_grads();
        backward(&model, &params, &tape, &adjoint, &mut grads).unwrap();

        let fc_w = params.id("fc1.weight").unwrap();
        assert!(grads.get(fc_w).iter().all(|&g| g == 0.0));
        // Earlier layers still receive gradients through the frozen tail.
        let wfm = params.id("wfm_conv1.logits").unwrap();
        assert!(grads.get(wfm).iter().any(|&g| g != 0.0));
    }

    #[test]
    fn uniform_init_first_loss_is_log_k() {
        // Zero wFM logits and zero dense bias with zero dense weights give
        // uniform logits, so the first loss is log K.
        let rng = ChaCha8Rng::seed_from_u64(15);
        let mut b = ModelBuilder::new("logk", InputKind::Complex, Shape::new(1, 2, 2), 5, rng);
        let x = b.distance_transform(0, 1).unwrap();
        let x = b.flatten(x).unwrap();
        let fc = b.dense(x, 5).unwrap();
        let (model, mut params, state) = b.finish();
        let fc_w = model.nodes[fc].params[0];
        params.get_mut(fc_w).fill(0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let batch = complex_batch(&mut rng, 4, Shape::new(1, 2, 2));
        let mut tape = Tape::new();
        let logits = forward(&model, &params, &state, &batch, Mode::Train, &mut tape).unwrap();
        let (loss, _) = gradcheck::batch_loss(&logits, &[0, 1, 2, 3], 5);
        assert_relative_eq!(loss, 5.0_f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn linear_model_gradients_are_exact() {
        // Loss fed directly through the adjoint: a weighted sum of logits is
        // linear in every dense parameter, so central differences are exact
        // to rounding.
        let rng = ChaCha8Rng::seed_from_u64(17);
        let mut b = ModelBuilder::new("lin", InputKind::Real, Shape::new(1, 1, 4), 3, rng);
        let x = b.flatten(0).unwrap();
        let _ = b.dense(x, 3).unwrap();
        let (model, mut params, state) = b.finish();

        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let tensors: Vec<RealTensor> = (0..2)
            .map(|_| {
                RealTensor::new(
                    Shape::new(1, 1, 4),
                    (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
                )
                .unwrap()
            })
            .collect();
        let batch = InputBatch::Real(RealBuf::from_tensors(&tensors).unwrap());
        let cotangent: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();

        let mut tape = Tape::new();
        forward(&model, &params, &state, &batch, Mode::Eval, &mut tape).unwrap();
        let mut grads = params.zero_grads();
        backward(&model, &params, &tape, &cotangent, &mut grads).unwrap();

        let h = 1e-5;
        let mut max_rel: f64 = 0.0;
        for id in 0..params.len() {
            for j in 0..params.get(id).len() {
                let orig = params.get(id)[j];
                params.get_mut(id)[j] = orig + h;
                let lp: f64 = forward(&model, &params, &state, &batch, Mode::Eval, &mut tape)
                    .unwrap()
                    .iter()
                    .zip(&cotangent)
                    .map(|(a, c)| a * c)
                    .sum();
                params.get_mut(id)[j] = orig - h;
                let lm: f64 = forward(&model, &params, &state, &batch, Mode::Eval, &mut tape)
                    .unwrap()
                    .iter()
                    .zip(&cotangent)
                    .map(|(a, c)| a * c)
                    .sum();
                params.get_mut(id)[j] = orig;
                let numeric = (lp - lm) / (2.0 * h);
                let analytic = grads.get(id)[j];
                let denom = analytic.abs().max(numeric.abs()).max(1e-9);
                max_rel = max_rel.max((analytic - numeric).abs() / denom);
            }
        }
        assert!(max_rel < 1e-9, "linear gradients off by {max_rel}");
    }

    #[test]
    fn nan_detection_names_the_layer() {
        let (model, mut params, state) = small_complex_model(19);
        // Poison the g-transport scale the way a diverged optimizer would.
        let gt = params.id("g_transport1.log_scale").unwrap();
        params.get_mut(gt)[0] = f64::INFINITY;
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let batch = complex_batch(&mut rng, 1, Shape::new(2, 4, 4));
        let mut tape = Tape::new();
        let err =
            forward_checked(&model, &params, &state, &batch, Mode::Train, &mut tape).unwrap_err();
        assert!(
            err.to_string().contains("g_transport1"),
            "got: {err}"
        );
    }
}
