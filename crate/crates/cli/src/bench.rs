//! `surreal bench`: parameter accounting and per-layer wall times.

use crate::CliError;
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surreal_core::autodiff::{profile_pass, ChartBuf, InputBatch, InputKind, OpKind, RealBuf};
use surreal_core::layers::tensor_ring_param_count;
use surreal_core::manifold::PolarComplex;
use surreal_core::model::{build_model, Arch};
use surreal_core::tensor::{ComplexTensor, Shape};

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Architecture to report, or `all`.
    #[arg(long, default_value = "all")]
    pub arch: String,
    /// Side of the square image configuration.
    #[arg(long = "image-size", default_value_t = 100)]
    pub image_size: usize,
    /// Length of the signal configuration.
    #[arg(long = "signal-length", default_value_t = 128)]
    pub signal_length: usize,
    /// Class count used for the reports.
    #[arg(long, default_value_t = 11)]
    pub classes: usize,
    /// Tensor-ring rank for the compressed-size column.
    #[arg(long = "tr-rank", default_value_t = 4)]
    pub tr_rank: usize,
    /// Timing repetitions per configuration.
    #[arg(long, default_value_t = 2)]
    pub iters: usize,
}

fn archs(name: &str) -> Result<Vec<Arch>, CliError> {
    match name {
        "all" => Ok(vec![Arch::Surreal, Arch::SurrealRes, Arch::RealBaseline]),
        other => Ok(vec![
            Arch::parse(other).map_err(|e| CliError::Usage(e.to_string()))?
        ]),
    }
}

fn random_input(kind: InputKind, shape: Shape, seed: u64) -> InputBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        InputKind::Complex => {
            let t = ComplexTensor::from_fn(shape, |_, _, _| {
                PolarComplex::new(rng.random_range(0.2..3.0), rng.random_range(-3.0..3.0))
            });
            InputBatch::Complex(ChartBuf::from_tensors(&[t]).expect("one sample"))
        }
        InputKind::Real => {
            let mut buf = RealBuf::zeros(1, shape);
            for v in buf.data.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            InputBatch::Real(buf)
        }
    }
}

/// Tensor-ring size of a convolution weight with modes
/// (out, in, kh, kw), against its dense element count.
fn ring_entry(out_c: usize, in_c: usize, kernel: (usize, usize), rank: usize) -> serde_json::Value {
    let modes = [out_c, in_c, kernel.0, kernel.1];
    serde_json::json!({
        "modes": modes,
        "dense": modes.iter().product::<usize>(),
        "ring": tensor_ring_param_count(&modes, rank),
    })
}

pub fn run(args: BenchArgs) -> Result<(), CliError> {
    if args.classes < 2 {
        return Err(CliError::Usage("need at least 2 classes".into()));
    }
    let scales = [
        ("image", Shape::new(1, args.image_size, args.image_size)),
        ("signal", Shape::new(1, 1, args.signal_length)),
    ];
    for arch in archs(&args.arch)? {
        for (scale_name, shape) in scales {
            let (model, params, state) =
                build_model(arch, shape, args.classes, 1).map_err(CliError::from)?;
            let kind = model.input_kind;
            let input = random_input(kind, model.input_shape, 7);
            let adjoint = vec![1.0; args.classes];

            // Best-of-n per-layer timings from full forward+backward passes.
            let mut best: Option<Vec<surreal_core::autodiff::LayerTiming>> = None;
            for _ in 0..args.iters.max(1) {
                let t = profile_pass(&model, &params, &state, &input, &adjoint)
                    .map_err(CliError::from)?;
                best = Some(match best {
                    None => t,
                    Some(prev) => prev
                        .into_iter()
                        .zip(t)
                        .map(|(a, b)| surreal_core::autodiff::LayerTiming {
                            name: a.name,
                            forward_seconds: a.forward_seconds.min(b.forward_seconds),
                            backward_seconds: a.backward_seconds.min(b.backward_seconds),
                        })
                        .collect(),
                });
            }
            let timings = best.expect("at least one iteration");

            let mut layers = Vec::new();
            let mut rings = Vec::new();
            for (i, node) in model.nodes.iter().enumerate() {
                let n_params: usize = node
                    .params
                    .iter()
                    .map(|&id| params.get(id).len())
                    .sum();
                layers.push(serde_json::json!({
                    "name": node.name,
                    "output": node.out_shape.to_string(),
                    "params": n_params,
                    "forward_ms": timings[i].forward_seconds * 1e3,
                    "backward_ms": timings[i].backward_seconds * 1e3,
                }));
                match &node.op {
                    OpKind::WfmConv { geom } | OpKind::RealConv { geom } => {
                        rings.push(serde_json::json!({
                            "layer": node.name,
                            "rank": args.tr_rank,
                            "sizes": ring_entry(
                                geom.out_channels,
                                geom.in_channels,
                                geom.kernel,
                                args.tr_rank
                            ),
                        }));
                    }
                    _ => {}
                }
            }

            let total = params.scalar_count();
            let mut report = serde_json::json!({
                "arch": arch.as_str(),
                "scale": scale_name,
                "input": shape.to_string(),
                "classes": args.classes,
                "parameters": total,
                "layers": layers,
                "tensor_ring": rings,
            });
            if arch == Arch::Surreal && scale_name == "image" && args.image_size == 100 {
                report["reference_parameters"] = 67_000.into();
                report["within_10pct"] =
                    ((total as f64 - 67_000.0).abs() <= 6_700.0).into();
            }
            println!("{report}");
        }
    }
    Ok(())
}
