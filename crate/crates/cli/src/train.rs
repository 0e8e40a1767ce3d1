//! `surreal train`: dataset in, metrics stream and checkpoint out.

use crate::config::ConfigFile;
use crate::CliError;
use clap::Args;
use std::io::Write;
use std::path::PathBuf;
use surreal_core::autodiff::{InputKind, Optimizer, OptimizerConfig, OptimizerKind};
use surreal_core::checkpoint::{load_checkpoint, save_checkpoint, snapshot, CheckpointMeta};
use surreal_core::data::cvds::read_cvds;
use surreal_core::model::{build_model, Arch};
use surreal_core::train::{train_loop, PreparedDataset, TrainConfig};

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Optional `key = value` config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training dataset (CVDS).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Optional held-out dataset evaluated after each epoch.
    #[arg(long = "test-dataset")]
    pub test_dataset: Option<PathBuf>,
    /// Architecture: surreal | surreal-res | real-baseline.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optimizer: adam | sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// Optional global-norm gradient clip.
    #[arg(long = "grad-clip")]
    pub grad_clip: Option<f64>,
    /// Output directory for metrics.jsonl and checkpoint.ckpt.
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
    /// Resume from an earlier checkpoint; epoch numbering continues.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

/// Fully resolved run settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub arch: Arch,
    pub dataset: PathBuf,
    pub test_dataset: Option<PathBuf>,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub grad_clip: Option<f64>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn resolve(args: &TrainArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => ConfigFile::load(path).map_err(CliError::Usage)?,
            None => ConfigFile::default(),
        };
        let from_file = |key: &str| file.get(key).map(|s| s.to_string());
        let parse_file = |key: &str| -> Result<Option<String>, CliError> {
            Ok(from_file(key))
        };

        let dataset = args
            .dataset
            .clone()
            .or_else(|| from_file("dataset").map(PathBuf::from))
            .ok_or_else(|| CliError::Usage("missing --dataset (or `dataset` in config)".into()))?;
        let out_dir = args
            .out_dir
            .clone()
            .or_else(|| from_file("out_dir").map(PathBuf::from))
            .ok_or_else(|| CliError::Usage("missing --out-dir (or `out_dir` in config)".into()))?;
        let test_dataset = args
            .test_dataset
            .clone()
            .or_else(|| from_file("test_dataset").map(PathBuf::from));

        let arch_name = args
            .arch
            .clone()
            .or_else(|| parse_file("arch").ok().flatten())
            .unwrap_or_else(|| "surreal".to_string());
        let arch = Arch::parse(&arch_name).map_err(|e| CliError::Usage(e.to_string()))?;

        let epochs = match args.epochs {
            Some(v) => v,
            None => file
                .get_parsed::<usize>("epochs")
                .map_err(CliError::Usage)?
                .unwrap_or(30),
        };
        let batch = match args.batch {
            Some(v) => v,
            None => file
                .get_parsed::<usize>("batch")
                .map_err(CliError::Usage)?
                .unwrap_or(32),
        };
        let lr = match args.lr {
            Some(v) => v,
            None => file
                .get_parsed::<f64>("lr")
                .map_err(CliError::Usage)?
                .unwrap_or(1e-3),
        };
        let seed = match args.seed {
            Some(v) => v,
            None => file
                .get_parsed::<u64>("seed")
                .map_err(CliError::Usage)?
                .unwrap_or(0),
        };
        let optimizer_name = args
            .optimizer
            .clone()
            .or_else(|| from_file("optimizer"))
            .unwrap_or_else(|| "adam".to_string());
        let optimizer = OptimizerKind::parse(&optimizer_name)
            .ok_or_else(|| CliError::Usage(format!("unknown optimizer {optimizer_name:?}")))?;
        let grad_clip = match args.grad_clip {
            Some(v) => Some(v),
            None => file.get_parsed::<f64>("grad_clip").map_err(CliError::Usage)?,
        };

        if batch == 0 {
            return Err(CliError::Usage("batch size must be positive".into()));
        }
        if lr <= 0.0 || !lr.is_finite() {
            return Err(CliError::Usage("learning rate must be positive".into()));
        }
        if let Some(c) = grad_clip {
            if c <= 0.0 {
                return Err(CliError::Usage("gradient clip must be positive".into()));
            }
        }

        Ok(RunConfig {
            arch,
            dataset,
            test_dataset,
            epochs,
            batch,
            lr,
            seed,
            optimizer,
            grad_clip,
            out_dir,
        })
    }

    /// The `key = value` echo stored in checkpoints.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("arch = {}\n", self.arch.as_str()));
        s.push_str(&format!("dataset = {}\n", self.dataset.display()));
        if let Some(t) = &self.test_dataset {
            s.push_str(&format!("test_dataset = {}\n", t.display()));
        }
        s.push_str(&format!("epochs = {}\n", self.epochs));
        s.push_str(&format!("batch = {}\n", self.batch));
        s.push_str(&format!("lr = {}\n", self.lr));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("optimizer = {}\n", self.optimizer.as_str()));
        if let Some(c) = self.grad_clip {
            s.push_str(&format!("grad_clip = {c}\n"));
        }
        s.push_str(&format!("out_dir = {}\n", self.out_dir.display()));
        s
    }

    pub fn input_kind(&self) -> InputKind {
        match self.arch {
            Arch::RealBaseline => InputKind::Real,
            _ => InputKind::Complex,
        }
    }
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&args)?;
    let dataset = read_cvds(&cfg.dataset)?;
    if dataset.is_empty() {
        return Err(CliError::Usage("training dataset has no samples".into()));
    }
    let test = match &cfg.test_dataset {
        Some(path) => Some(read_cvds(path)?),
        None => None,
    };

    let (model, mut params, mut state) = build_model(
        cfg.arch,
        dataset.shape(),
        dataset.class_count as usize,
        cfg.seed,
    )
    .map_err(CliError::from)?;

    let mut opt_config = match cfg.optimizer {
        OptimizerKind::Adam => OptimizerConfig::adam(cfg.lr),
        OptimizerKind::Sgd => OptimizerConfig::sgd(cfg.lr),
    };
    opt_config.grad_clip = cfg.grad_clip;
    let mut optimizer = Optimizer::new(opt_config, &params);

    let mut start_epoch = 0usize;
    if let Some(resume_path) = &args.resume {
        let ckpt = load_checkpoint(resume_path)?;
        if ckpt.meta.arch != cfg.arch.as_str() {
            return Err(CliError::Usage(format!(
                "checkpoint arch {} does not match requested {}",
                ckpt.meta.arch,
                cfg.arch.as_str()
            )));
        }
        let shape = dataset.shape();
        if ckpt.meta.input
            != (
                shape.channels as u32,
                shape.height as u32,
                shape.width as u32,
            )
            || ckpt.meta.classes != dataset.class_count
        {
            return Err(CliError::Usage(
                "checkpoint input shape/classes do not match the dataset".into(),
            ));
        }
        surreal_core::checkpoint::restore(
            &ckpt,
            &model,
            &mut params,
            &mut state,
            Some(&mut optimizer),
        )?;
        start_epoch = ckpt.meta.epochs_completed as usize;
    }

    let train_prepared = PreparedDataset::from_dataset(&dataset, cfg.input_kind())?;
    let test_prepared = match &test {
        Some(ds) => Some(PreparedDataset::from_dataset(ds, cfg.input_kind())?),
        None => None,
    };

    std::fs::create_dir_all(&cfg.out_dir)?;
    let metrics_path = cfg.out_dir.join("metrics.jsonl");
    let mut metrics_file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&metrics_path)?;

    let train_cfg = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch,
        seed: cfg.seed,
    };
    let mut io_err: Option<std::io::Error> = None;
    train_loop(
        &model,
        &mut params,
        &mut state,
        &mut optimizer,
        &train_prepared,
        test_prepared.as_ref(),
        &train_cfg,
        start_epoch,
        |m| {
            let line = serde_json::to_string(m).expect("metric serializes");
            println!("{line}");
            if let Err(e) = writeln!(metrics_file, "{line}") {
                io_err.get_or_insert(e);
            }
        },
    )?;
    if let Some(e) = io_err {
        return Err(CliError::Io(format!("writing metrics: {e}")));
    }

    let shape = dataset.shape();
    let meta = CheckpointMeta {
        arch: cfg.arch.as_str().to_string(),
        input: (
            shape.channels as u32,
            shape.height as u32,
            shape.width as u32,
        ),
        classes: dataset.class_count,
        epochs_completed: cfg.epochs as u32,
        seed: cfg.seed,
        opt_step: optimizer.step_count(),
        config_echo: cfg.echo(),
    };
    let ckpt_path = cfg.out_dir.join("checkpoint.ckpt");
    save_checkpoint(
        &ckpt_path,
        &snapshot(meta, &model, &params, &state, Some(&optimizer)),
    )?;

    let summary = serde_json::json!({
        "checkpoint": ckpt_path.display().to_string(),
        "metrics": metrics_path.display().to_string(),
        "arch": cfg.arch.as_str(),
        "epochs": cfg.epochs,
        "start_epoch": start_epoch,
        "parameters": params.scalar_count(),
        "n_train": dataset.len(),
    });
    println!("{summary}");
    Ok(())
}
