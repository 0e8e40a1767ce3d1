//! Complex-scaling augmentation: one random group element per sample.

use crate::data::Dataset;
use crate::error::Result;
use crate::manifold::{wrap_phase, GroupElement};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    /// Scales drawn log-uniformly from this range.
    pub scale_range: (f64, f64),
    /// Angles drawn uniformly from this range (principal branch).
    pub angle_range: (f64, f64),
    pub seed: u64,
}

impl AugmentSpec {
    /// Default augmentation: scale in [0.5, 2.0], arbitrary rotation.
    pub fn new(seed: u64) -> Self {
        AugmentSpec {
            scale_range: (0.5, 2.0),
            angle_range: (-PI, PI),
            seed,
        }
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> GroupElement {
        let (lo, hi) = self.scale_range;
        assert!(lo > 0.0 && hi >= lo, "invalid scale range");
        let scale = if hi > lo {
            (rng.random_range(lo.ln()..hi.ln())).exp()
        } else {
            lo
        };
        let (alo, ahi) = self.angle_range;
        let angle = if ahi > alo {
            wrap_phase(rng.random_range(alo..ahi))
        } else {
            wrap_phase(alo)
        };
        GroupElement::new(scale, angle)
    }
}

/// Multiply every element of every sample by that sample's drawn group
/// element; labels are unchanged. Returns the augmented dataset together
/// with the drawn elements (one per sample, in order) for the sidecar log.
pub fn augment_scale(dataset: &Dataset, spec: &AugmentSpec) -> (Dataset, Vec<GroupElement>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let per = dataset.shape().len();
    let mut out = dataset.clone();
    let mut drawn = Vec::with_capacity(dataset.len());
    for i in 0..dataset.len() {
        let g = spec.draw(&mut rng);
        let (s, a) = (g.scale(), g.angle());
        let (cos, sin) = (a.cos(), a.sin());
        let sample = &mut out.data[i * 2 * per..(i + 1) * 2 * per];
        for pair in sample.chunks_exact_mut(2) {
            let (re, im) = (pair[0] as f64, pair[1] as f64);
            pair[0] = (s * (re * cos - im * sin)) as f32;
            pair[1] = (s * (re * sin + im * cos)) as f32;
        }
        drawn.push(g);
    }
    (out, drawn)
}

/// Sidecar log: one JSON object per drawn element,
/// `{"index":i,"scale":s,"angle":a}`.
pub fn write_augment_log(path: impl AsRef<Path>, drawn: &[GroupElement]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for (i, g) in drawn.iter().enumerate() {
        writeln!(
            f,
            "{}",
            serde_json::json!({"index": i, "scale": g.scale(), "angle": g.angle()})
        )?;
    }
    Ok(())
}
