//! Synthetic complex-valued blob images.
//!
//! Each class owns a fixed layout of spatial Gaussian magnitude bumps plus a
//! class-specific linear phase ramp with per-blob phase offsets; the layout
//! depends only on the class index. Samples add seeded Cartesian noise, so
//! with noise disabled all samples of a class are identical.

use crate::data::Dataset;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub classes: usize,
    pub per_class: usize,
    pub height: usize,
    pub width: usize,
    /// Per-component Gaussian noise sigma; 0 disables noise.
    pub noise: f64,
    pub seed: u64,
}

impl BlobSpec {
    pub fn new(classes: usize, per_class: usize, size: usize, seed: u64) -> Self {
        BlobSpec {
            classes,
            per_class,
            height: size,
            width: size,
            noise: 0.05,
            seed,
        }
    }
}

struct Blob {
    cy: f64,
    cx: f64,
    sigma: f64,
    amplitude: f64,
    phase_offset: f64,
}

struct ClassLayout {
    blobs: Vec<Blob>,
    ramp_y: f64,
    ramp_x: f64,
    phase0: f64,
}

/// Deterministic per-class layout, independent of the dataset seed.
fn class_layout(class: usize, height: usize, width: usize) -> ClassLayout {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB10B_5EED ^ (class as u64));
    let count = 2 + class % 3;
    let min_dim = height.min(width) as f64;
    let blobs = (0..count)
        .map(|_| Blob {
            cy: rng.random_range(0.2..0.8) * height as f64,
            cx: rng.random_range(0.2..0.8) * width as f64,
            sigma: rng.random_range(0.08..0.18) * min_dim,
            amplitude: rng.random_range(0.6..1.2),
            phase_offset: rng.random_range(-1.2..1.2),
        })
        .collect();
    ClassLayout {
        blobs,
        ramp_y: rng.random_range(-4.0..4.0),
        ramp_x: rng.random_range(-4.0..4.0),
        phase0: rng.random_range(-3.0..3.0),
    }
}

pub fn gen_blobs(spec: &BlobSpec) -> Result<Dataset> {
    if spec.height < 16 || spec.width < 16 {
        return Err(Error::Invalid(format!(
            "blob images must be at least 16x16, got {}x{}",
            spec.height, spec.width
        )));
    }
    if spec.classes == 0 {
        return Err(Error::Invalid("need at least one class".into()));
    }

    let layouts: Vec<ClassLayout> = (0..spec.classes)
        .map(|c| class_layout(c, spec.height, spec.width))
        .collect();

    // Clean per-class images, computed once.
    let plane = spec.height * spec.width;
    let clean: Vec<Vec<(f64, f64)>> = layouts
        .iter()
        .map(|layout| {
            let mut img = Vec::with_capacity(plane);
            for y in 0..spec.height {
                for x in 0..spec.width {
                    let (yf, xf) = (y as f64, x as f64);
                    let mut magnitude = 0.05;
                    let mut phase = layout.phase0
                        + layout.ramp_y * yf / spec.height as f64
                        + layout.ramp_x * xf / spec.width as f64;
                    for b in &layout.blobs {
                        let d2 = (yf - b.cy).powi(2) + (xf - b.cx).powi(2);
                        let bump = b.amplitude * (-d2 / (2.0 * b.sigma * b.sigma)).exp();
                        magnitude += bump;
                        phase += b.phase_offset * bump;
                    }
                    img.push((magnitude * phase.cos(), magnitude * phase.sin()));
                }
            }
            img
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n = spec.classes * spec.per_class;
    let mut labels = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * 2 * plane);
    for (label, img) in clean.iter().enumerate() {
        for _ in 0..spec.per_class {
            for &(re, im) in img {
                let (mut r, mut q) = (re, im);
                if spec.noise > 0.0 {
                    r += spec.noise * normal.sample(&mut rng);
                    q += spec.noise * normal.sample(&mut rng);
                }
                data.push(r as f32);
                data.push(q as f32);
            }
            labels.push(label as u32);
        }
    }
    Dataset::new(
        1,
        spec.height as u32,
        spec.width as u32,
        spec.classes as u32,
        labels,
        data,
    )
}
