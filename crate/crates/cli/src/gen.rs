//! `surreal gen`: synthetic dataset generation.

use crate::CliError;
use clap::{Args, ValueEnum};
use std::path::PathBuf;
use surreal_core::data::{cvds, gen_blobs, gen_modulation, BlobSpec, ModClass, ModulationSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Modulation,
    Blobs,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Generator family.
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Number of classes (modulation supports up to 4: bpsk, qpsk, 8psk, pam4).
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    /// Samples generated per class.
    #[arg(long = "per-class")]
    pub per_class: usize,
    /// Signal-to-noise ratio in dB (modulation); `inf` disables noise.
    #[arg(long, default_value_t = 10.0)]
    pub snr: f64,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CVDS path.
    #[arg(long)]
    pub out: PathBuf,
    /// Signal length in samples (modulation).
    #[arg(long, default_value_t = 128)]
    pub length: usize,
    /// Square image side (blobs).
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    /// Per-component Gaussian noise sigma (blobs).
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
}

pub fn run(args: GenArgs) -> Result<(), CliError> {
    let dataset = match args.kind {
        Kind::Modulation => {
            if args.classes == 0 || args.classes > ModClass::ALL.len() {
                return Err(CliError::Usage(format!(
                    "modulation supports 1..=4 classes, got {}",
                    args.classes
                )));
            }
            let spec = ModulationSpec {
                classes: ModClass::ALL[..args.classes].to_vec(),
                per_class: args.per_class,
                length: args.length,
                snr_db: args.snr,
                seed: args.seed,
            };
            gen_modulation(&spec)?
        }
        Kind::Blobs => {
            let mut spec = BlobSpec::new(args.classes, args.per_class, args.size, args.seed);
            spec.noise = args.noise;
            gen_blobs(&spec)?
        }
    };
    cvds::write_cvds(&args.out, &dataset)?;
    let bytes = std::fs::metadata(&args.out)?.len();
    let summary = serde_json::json!({
        "kind": match args.kind { Kind::Modulation => "modulation", Kind::Blobs => "blobs" },
        "classes": dataset.class_count,
        "per_class": args.per_class,
        "n": dataset.len(),
        "shape": [dataset.channels, dataset.height, dataset.width],
        "snr_db": if args.snr.is_infinite() { serde_json::Value::Null } else { args.snr.into() },
        "seed": args.seed,
        "path": args.out.display().to_string(),
        "bytes": bytes,
    });
    println!("{summary}");
    Ok(())
}
