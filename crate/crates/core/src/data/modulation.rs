//! Synthetic digitally modulated baseband signals.
//!
//! Symbols drawn i.i.d. from the class constellation are upsampled x4 through
//! a raised-cosine pulse (roll-off 0.35, span 8 symbols), truncated to the
//! requested length, normalized to unit average power, and optionally hit
//! with circular complex Gaussian noise at a given SNR.

use crate::data::Dataset;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Samples per symbol.
const SPS: usize = 4;
/// Pulse span in symbols.
const SPAN: usize = 8;
/// Raised-cosine roll-off.
const ROLLOFF: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModClass {
    Bpsk,
    Qpsk,
    Psk8,
    Pam4,
}

impl ModClass {
    pub const ALL: [ModClass; 4] = [ModClass::Bpsk, ModClass::Qpsk, ModClass::Psk8, ModClass::Pam4];

    pub fn name(&self) -> &'static str {
        match self {
            ModClass::Bpsk => "bpsk",
            ModClass::Qpsk => "qpsk",
            ModClass::Psk8 => "8psk",
            ModClass::Pam4 => "pam4",
        }
    }

    /// Unit-average-power constellation points.
    pub fn constellation(&self) -> Vec<(f64, f64)> {
        match self {
            ModClass::Bpsk => vec![(1.0, 0.0), (-1.0, 0.0)],
            ModClass::Qpsk => vec![
                (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
                (-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
                (-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
                (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
            ],
            ModClass::Psk8 => (0..8)
                .map(|k| {
                    let a = k as f64 * PI / 4.0;
                    (a.cos(), a.sin())
                })
                .collect(),
            ModClass::Pam4 => {
                let s = 5.0_f64.sqrt();
                vec![(-3.0 / s, 0.0), (-1.0 / s, 0.0), (1.0 / s, 0.0), (3.0 / s, 0.0)]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationSpec {
    pub classes: Vec<ModClass>,
    pub per_class: usize,
    /// Samples per signal; at least 16.
    pub length: usize,
    /// Signal-to-noise ratio in dB; +infinity disables noise.
    pub snr_db: f64,
    pub seed: u64,
}

impl ModulationSpec {
    pub fn new(classes: Vec<ModClass>, per_class: usize, snr_db: f64, seed: u64) -> Self {
        ModulationSpec {
            classes,
            per_class,
            length: 128,
            snr_db,
            seed,
        }
    }
}

fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

/// Raised-cosine impulse response at symbol-time offset t.
fn raised_cosine(t: f64) -> f64 {
    let denom = 1.0 - (2.0 * ROLLOFF * t) * (2.0 * ROLLOFF * t);
    if denom.abs() < 1e-9 {
        // L'Hopital limit at t = 1/(2*rolloff); not hit on our sample grid.
        return (PI / (4.0)) * sinc(1.0 / (2.0 * ROLLOFF));
    }
    sinc(t) * (PI * ROLLOFF * t).cos() / denom
}

fn pulse_taps() -> Vec<f64> {
    let half = (SPAN * SPS / 2) as isize;
    (-half..=half)
        .map(|n| raised_cosine(n as f64 / SPS as f64))
        .collect()
}

/// Generate the dataset: samples ordered class-major, labels following the
/// order of `spec.classes`. Identical spec and seed give identical bytes.
pub fn gen_modulation(spec: &ModulationSpec) -> Result<Dataset> {
    if spec.classes.is_empty() {
        return Err(Error::Invalid("no modulation classes requested".into()));
    }
    if spec.length < 16 {
        return Err(Error::Invalid(format!(
            "signal length must be at least 16, got {}",
            spec.length
        )));
    }
    if spec.snr_db.is_nan() {
        return Err(Error::Invalid("SNR must not be NaN".into()));
    }

    let taps = pulse_taps();
    let half = (SPAN * SPS / 2) as isize;
    let n_sym = spec.length.div_ceil(SPS) + SPAN;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise_sigma = if spec.snr_db.is_infinite() {
        0.0
    } else {
        // Unit signal power: per-component variance is 10^(-snr/10) / 2.
        (10.0_f64.powf(-spec.snr_db / 10.0) / 2.0).sqrt()
    };
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let n = spec.classes.len() * spec.per_class;
    let mut labels = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * 2 * spec.length);
    let mut re = vec![0.0f64; spec.length];
    let mut im = vec![0.0f64; spec.length];

    for (label, class) in spec.classes.iter().enumerate() {
        let constellation = class.constellation();
        for _ in 0..spec.per_class {
            let symbols: Vec<(f64, f64)> = (0..n_sym)
                .map(|_| constellation[rng.random_range(0..constellation.len())])
                .collect();
            re.fill(0.0);
            im.fill(0.0);
            // Symbol k is centered at sample 4k - half; tap index j covers
            // offsets i - (4k - half) in [0, 2*half].
            for (k, &(sr, si)) in symbols.iter().enumerate() {
                let center = (SPS * k) as isize - half;
                let lo = center.max(0);
                let hi = ((center + 2 * half).min(spec.length as isize - 1)).max(-1);
                for i in lo..=hi {
                    let tap = taps[(i - center) as usize];
                    re[i as usize] += sr * tap;
                    im[i as usize] += si * tap;
                }
            }
            // Normalize to unit average power before noise.
            let power: f64 =
                re.iter().zip(&im).map(|(r, i)| r * r + i * i).sum::<f64>() / spec.length as f64;
            let scale = 1.0 / power.sqrt();
            for i in 0..spec.length {
                let mut r = re[i] * scale;
                let mut q = im[i] * scale;
                if noise_sigma > 0.0 {
                    r += noise_sigma * normal.sample(&mut rng);
                    q += noise_sigma * normal.sample(&mut rng);
                }
                data.push(r as f32);
                data.push(q as f32);
            }
            labels.push(label as u32);
        }
    }
    Dataset::new(
        1,
        1,
        spec.length as u32,
        spec.classes.len() as u32,
        labels,
        data,
    )
}
