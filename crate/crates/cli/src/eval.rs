//! `surreal eval`: accuracy, per-class accuracy, and confusion matrix.

use crate::CliError;
use clap::Args;
use std::path::PathBuf;
use surreal_core::autodiff::InputKind;
use surreal_core::checkpoint::{load_checkpoint, restore};
use surreal_core::data::cvds::read_cvds;
use surreal_core::data::{augment_scale, write_augment_log, AugmentSpec};
use surreal_core::model::{build_model, Arch};
use surreal_core::tensor::Shape;
use surreal_core::train::{evaluate, PreparedDataset};

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    /// Apply random complex-scaling augmentation with this seed before
    /// evaluating.
    #[arg(long = "augment-scale")]
    pub augment_scale: Option<u64>,
    #[arg(long = "scale-min", default_value_t = 0.5)]
    pub scale_min: f64,
    #[arg(long = "scale-max", default_value_t = 2.0)]
    pub scale_max: f64,
    /// Write the drawn group elements to this JSONL sidecar.
    #[arg(long = "augment-log")]
    pub augment_log: Option<PathBuf>,
}

pub fn run(args: EvalArgs) -> Result<(), CliError> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let arch = Arch::parse(&ckpt.meta.arch).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut dataset = read_cvds(&args.dataset)?;
    let shape = dataset.shape();
    if ckpt.meta.input
        != (
            shape.channels as u32,
            shape.height as u32,
            shape.width as u32,
        )
    {
        return Err(CliError::Usage(format!(
            "checkpoint was trained on input [{},{},{}], dataset has {shape}",
            ckpt.meta.input.0, ckpt.meta.input.1, ckpt.meta.input.2
        )));
    }
    if ckpt.meta.classes != dataset.class_count {
        return Err(CliError::Usage(format!(
            "checkpoint has {} classes, dataset declares {}",
            ckpt.meta.classes, dataset.class_count
        )));
    }

    let mut augment_seed = None;
    if let Some(seed) = args.augment_scale {
        if !(args.scale_min > 0.0 && args.scale_max >= args.scale_min) {
            return Err(CliError::Usage("invalid augmentation scale range".into()));
        }
        let spec = AugmentSpec {
            scale_range: (args.scale_min, args.scale_max),
            ..AugmentSpec::new(seed)
        };
        let (augmented, drawn) = augment_scale(&dataset, &spec);
        dataset = augmented;
        if let Some(log) = &args.augment_log {
            write_augment_log(log, &drawn)?;
        }
        augment_seed = Some(seed);
    }

    let input_shape = Shape::new(
        ckpt.meta.input.0 as usize,
        ckpt.meta.input.1 as usize,
        ckpt.meta.input.2 as usize,
    );
    let (model, mut params, mut state) = build_model(
        arch,
        input_shape,
        ckpt.meta.classes as usize,
        ckpt.meta.seed,
    )
    .map_err(CliError::from)?;
    restore(&ckpt, &model, &mut params, &mut state, None)?;

    let kind = match arch {
        Arch::RealBaseline => InputKind::Real,
        _ => InputKind::Complex,
    };
    let prepared = PreparedDataset::from_dataset(&dataset, kind)?;
    let report = evaluate(&model, &params, &state, &prepared, args.batch.max(1))?;

    let json = serde_json::json!({
        "n": report.n,
        "loss": report.loss,
        "accuracy": report.accuracy,
        "per_class_accuracy": report.per_class_accuracy,
        "confusion": report.confusion,
        "augmented": augment_seed.is_some(),
        "augment_seed": augment_seed,
        "arch": ckpt.meta.arch,
    });
    println!("{json}");
    Ok(())
}
