//! Network architectures: the manifold CNN, its residual variant, and the
//! two-channel real-valued baseline.
//!
//! One chain definition serves all input sizes. Kernels are clamped per axis
//! to the current feature size, so 100x100 images get the full 5x5 chain
//! (two wFM convolutions with G-transport, a distance transform, then a
//! standard CNN tail), 1x128 signals get the 1x5 analogue of the same layer
//! order, and small images fall back to 3x3 kernels.

use crate::autodiff::{InputKind, Model, ModelBuilder, ModelState, ParamStore};
use crate::error::{Error, Result};
use crate::tensor::Shape;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Selectable network architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    Surreal,
    SurrealRes,
    RealBaseline,
}

impl Arch {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "surreal" => Ok(Arch::Surreal),
            "surreal-res" => Ok(Arch::SurrealRes),
            "real-baseline" => Ok(Arch::RealBaseline),
            other => Err(Error::Invalid(format!(
                "unknown arch {other:?}; expected surreal, surreal-res, or real-baseline"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Arch::Surreal => "surreal",
            Arch::SurrealRes => "surreal-res",
            Arch::RealBaseline => "real-baseline",
        }
    }
}

/// Base spatial kernel extent: 5 for full-size inputs, 3 for small ones.
fn base_kernel(input: Shape) -> usize {
    if input.height.max(input.width) >= 96 {
        5
    } else {
        3
    }
}

fn clamp_kernel(base: usize, shape: Shape) -> (usize, usize) {
    (base.min(shape.height), base.min(shape.width))
}

/// Build a model for a complex-valued dataset of shape `input`
/// (channels, height, width; height 1 for signals). The baseline receives
/// the same data as stacked (re, im) channel pairs.
pub fn build_model(
    arch: Arch,
    input: Shape,
    classes: usize,
    seed: u64,
) -> Result<(Model, ParamStore, ModelState)> {
    if classes < 2 {
        return Err(Error::Invalid(format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    match arch {
        Arch::Surreal => build_surreal(input, classes, seed),
        Arch::SurrealRes => build_surreal_res(input, classes, seed),
        Arch::RealBaseline => build_real_baseline(input, classes, seed),
    }
}

fn build_surreal(input: Shape, classes: usize, seed: u64) -> Result<(Model, ParamStore, ModelState)> {
    let base = base_kernel(input);
    let rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = ModelBuilder::new("surreal", InputKind::Complex, input, classes, rng);

    let x = b.wfm_conv(0, 20, clamp_kernel(base, b.shape_of(0)), (2, 2))?;
    let x = b.g_transport(x)?;
    let x = b.wfm_conv(x, 20, clamp_kernel(base, b.shape_of(x)), (2, 2))?;
    let x = b.g_transport(x)?;
    let x = b.distance_transform(x, 1)?;
    let x = real_tail(&mut b, x, 30, base, classes, 50)?;
    let _ = x;
    Ok(b.finish())
}

/// Shared classifier tail: conv/bn/relu, optional pool, strided conv,
/// a collapse conv to 1x1, then two fully connected layers.
fn real_tail(
    b: &mut ModelBuilder,
    from: usize,
    conv_channels: usize,
    base: usize,
    classes: usize,
    hidden: usize,
) -> Result<usize> {
    let x = b.real_conv(from, conv_channels, clamp_kernel(base, b.shape_of(from)), (1, 1), (0, 0))?;
    let x = b.batch_norm(x)?;
    let mut x = b.relu(x)?;
    let s = b.shape_of(x);
    let pool = (s.height.min(2), s.width.min(2));
    if pool != (1, 1) {
        x = b.max_pool(x, pool, pool)?;
    }
    let x = b.real_conv(x, conv_channels, clamp_kernel(base, b.shape_of(x)), (3, 3), (0, 0))?;
    let x = b.batch_norm(x)?;
    let x = b.relu(x)?;
    let s = b.shape_of(x);
    let x = b.real_conv(x, conv_channels, (s.height, s.width), (1, 1), (0, 0))?;
    let x = b.batch_norm(x)?;
    let x = b.relu(x)?;
    let x = b.flatten(x)?;
    let x = b.dense(x, hidden)?;
    b.dense(x, classes)
}

/// Three stacked convolutions (1x1, zero-padded 3x3, 1x1) preserving shape.
fn conv_stack(b: &mut ModelBuilder, from: usize, channels: usize) -> Result<usize> {
    let x = b.real_conv(from, channels, (1, 1), (1, 1), (0, 0))?;
    let s = b.shape_of(x);
    let kh = if s.height >= 3 { 3 } else { 1 };
    let kw = if s.width >= 3 { 3 } else { 1 };
    let x = b.real_conv(x, channels, (kh, kw), (1, 1), ((kh - 1) / 2, (kw - 1) / 2))?;
    b.real_conv(x, channels, (1, 1), (1, 1), (0, 0))
}

fn build_surreal_res(
    input: Shape,
    classes: usize,
    seed: u64,
) -> Result<(Model, ParamStore, ModelState)> {
    let base = base_kernel(input);
    let rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = ModelBuilder::new("surreal-res", InputKind::Complex, input, classes, rng);

    let a = b.wfm_conv(0, 20, clamp_kernel(base, b.shape_of(0)), (2, 2))?;
    let a = b.g_transport(a)?;
    // Manifold residual block: main branch and a spatial-alignment branch
    // from the same source, combined by channel concatenation.
    let k = clamp_kernel(base, b.shape_of(a));
    let main = b.wfm_conv(a, 20, k, (2, 2))?;
    let align = b.wfm_conv(a, 20, k, (2, 2))?;
    let x = b.concat_channels(main, align)?;
    let x = b.g_transport(x)?;
    let x = b.distance_transform(x, 1)?;

    let x = b.real_conv(x, 30, clamp_kernel(base, b.shape_of(x)), (1, 1), (0, 0))?;
    let x = b.batch_norm(x)?;
    let c1 = b.relu(x)?;
    // Real residual block: addition is available in the real domain.
    let s1 = conv_stack(&mut b, c1, 30)?;
    let mut x = b.add(c1, s1)?;
    let s = b.shape_of(x);
    let pool = (s.height.min(2), s.width.min(2));
    if pool != (1, 1) {
        x = b.max_pool(x, pool, pool)?;
    }
    let x = b.real_conv(x, 50, clamp_kernel(base, b.shape_of(x)), (3, 3), (0, 0))?;
    let x = b.batch_norm(x)?;
    let c2 = b.relu(x)?;
    let s2 = conv_stack(&mut b, c2, 50)?;
    let x = b.add(c2, s2)?;
    let s = b.shape_of(x);
    let x = b.real_conv(x, 70, (s.height, s.width), (1, 1), (0, 0))?;
    let x = b.batch_norm(x)?;
    let x = b.relu(x)?;
    let x = b.flatten(x)?;
    let x = b.dense(x, 30)?;
    let _ = b.dense(x, classes)?;
    Ok(b.finish())
}

fn build_real_baseline(
    input: Shape,
    classes: usize,
    seed: u64,
) -> Result<(Model, ParamStore, ModelState)> {
    // Complex values arrive as independent (re, im) channel pairs.
    let real_input = Shape::new(2 * input.channels, input.height, input.width);
    let base = base_kernel(input);
    let rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = ModelBuilder::new("real-baseline", InputKind::Real, real_input, classes, rng);

    let width = 48;
    let x = b.real_conv(0, width, clamp_kernel(base, b.shape_of(0)), (2, 2), (0, 0))?;
    let x = b.batch_norm(x)?;
    let x = b.relu(x)?;
    let x = b.real_conv(x, width, clamp_kernel(base, b.shape_of(x)), (2, 2), (0, 0))?;
    let x = b.batch_norm(x)?;
    let x = b.relu(x)?;
    let x = b.real_conv(x, width, clamp_kernel(base, b.shape_of(x)), (1, 1), (0, 0))?;
    let x = b.batch_norm(x)?;
    let mut x = b.relu(x)?;
    let s = b.shape_of(x);
    let pool = (s.height.min(2), s.width.min(2));
    if pool != (1, 1) {
        x = b.max_pool(x, pool, pool)?;
    }
    let x = b.real_conv(x, width, clamp_kernel(base, b.shape_of(x)), (3, 3), (0, 0))?;
    let x = b.batch_norm(x)?;
    let x = b.relu(x)?;
    let s = b.shape_of(x);
    let x = b.real_conv(x, width, (s.height, s.width), (1, 1), (0, 0))?;
    let x = b.batch_norm(x)?;
    let x = b.relu(x)?;
    let x = b.flatten(x)?;
    let x = b.dense(x, 128)?;
    let _ = b.dense(x, classes)?;
    Ok(b.finish())
}
