//! Acceptance suite: every release criterion as an executable check,
//! one pass/fail line per criterion. Heavy criteria share a lock so wall
//! times are measured without cross-test contention.

use std::sync::Mutex;
use std::time::Instant;

use surreal_core::autodiff::{InputKind, Optimizer, OptimizerConfig};
use surreal_core::data::{
    augment_scale, cvds, gen_blobs, gen_modulation, AugmentSpec, BlobSpec, Dataset, ModClass,
    ModulationSpec,
};
use surreal_core::layers::tensor_ring_param_count;
use surreal_core::manifold::{GroupElement, PolarComplex};
use surreal_core::model::{build_model, Arch};
use surreal_core::tensor::{ComplexTensor, Shape};
use surreal_core::train::{evaluate, train_loop, PreparedDataset, TrainConfig};
use surreal_core::verify;

static SERIAL: Mutex<()> = Mutex::new(());

fn guard() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(name: &str, pass: bool, detail: &str, seconds: f64) {
    println!(
        "{} {} ({:.2}s) {}",
        if pass { "PASS" } else { "FAIL" },
        name,
        seconds,
        detail
    );
    assert!(pass, "{name}: {detail}");
}

#[test]
fn p1_isometry() {
    let _g = guard();
    let t0 = Instant::now();
    let max = verify::isometry_max_error(7, 10_000);
    let secs = t0.elapsed().as_secs_f64();
    report(
        "P1 isometry",
        max < 1e-9 && secs < 1.0,
        &format!("max error {max:.3e}, tolerance 1e-9"),
        secs,
    );
}

#[test]
fn p2_wfm_equivariance() {
    let _g = guard();
    let t0 = Instant::now();
    let max = verify::wfm_equivariance_max_error(7, 1_000);
    let secs = t0.elapsed().as_secs_f64();
    report(
        "P2 wFM equivariance",
        max < 1e-9 && secs < 5.0,
        &format!("max error {max:.3e}, tolerance 1e-9"),
        secs,
    );
}

#[test]
fn p3_distance_transform_invariance() {
    let _g = guard();
    let t0 = Instant::now();
    let max = verify::dist_invariance_max_error(7, 1_000);
    let secs = t0.elapsed().as_secs_f64();
    report(
        "P3 distance-transform invariance",
        max < 1e-9 && secs < 10.0,
        &format!("max error {max:.3e}, tolerance 1e-9"),
        secs,
    );
}

#[test]
fn p4_end_to_end_architectural_invariance() {
    let _g = guard();
    let t0 = Instant::now();
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(404);
    let shape = Shape::new(1, 100, 100);

    let random_inputs = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| -> Vec<ComplexTensor> {
        (0..n)
            .map(|_| {
                ComplexTensor::from_fn(shape, |_, _, _| {
                    PolarComplex::new(
                        rng.random_range(0.2..4.0),
                        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                    )
                })
            })
            .collect()
    };
    let random_groups = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| -> Vec<GroupElement> {
        (0..n)
            .map(|_| {
                GroupElement::new(
                    rng.random_range(0.25..4.0),
                    rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                )
            })
            .collect()
    };

    // Random parameters: 50 (input, g) pairs in chunks.
    let (model, mut params, mut state) = build_model(Arch::Surreal, shape, 11, 42).unwrap();
    let mut max_rel: f64 = 0.0;
    for _ in 0..2 {
        let inputs = random_inputs(&mut rng, 25);
        let gs = random_groups(&mut rng, 25);
        max_rel = max_rel.max(
            verify::logits_invariance_max_rel(&model, &params, &state, &inputs, &gs).unwrap(),
        );
    }

    // Trained parameters: a few optimizer steps on full-size blob images.
    let blobs = gen_blobs(&BlobSpec::new(11, 2, 100, 77)).unwrap();
    let prepared = PreparedDataset::from_dataset(&blobs, InputKind::Complex).unwrap();
    let mut opt = Optimizer::new(OptimizerConfig::adam(1e-3), &params);
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 8,
        seed: 5,
    };
    train_loop(
        &model,
        &mut params,
        &mut state,
        &mut opt,
        &prepared,
        None,
        &cfg,
        0,
        |_| {},
    )
    .unwrap();
    for _ in 0..2 {
        let inputs = random_inputs(&mut rng, 25);
        let gs = random_groups(&mut rng, 25);
        max_rel = max_rel.max(
            verify::logits_invariance_max_rel(&model, &params, &state, &inputs, &gs).unwrap(),
        );
    }

    let secs = t0.elapsed().as_secs_f64();
    report(
        "P4 end-to-end architectural invariance",
        max_rel < 1e-6 && secs < 30.0,
        &format!("max relative logit difference {max_rel:.3e}, tolerance 1e-6"),
        secs,
    );
}

#[test]
fn p5_wfm_oracle_equivalence() {
    let _g = guard();
    let t0 = Instant::now();
    let closed = verify::wfm_closed_form_max_error(7, 200);
    let brute = verify::wfm_bruteforce_max_error(7, 200, 1024);
    let secs = t0.elapsed().as_secs_f64();
    report(
        "P5 wFM oracle equivalence",
        closed < 1e-8 && brute < 2e-3 && secs < 60.0,
        &format!("closed-form {closed:.3e} (tol 1e-8), brute-force {brute:.3e} (tol 2e-3)"),
        secs,
    );
}

#[test]
fn p6_trelu_region_map() {
    let _g = guard();
    let t0 = Instant::now();
    let map_err = verify::trelu_map_max_error(7, 10_000);
    let neg = verify::trelu_nonequivariance_error();
    let secs = t0.elapsed().as_secs_f64();
    report(
        "P6 tReLU region map",
        map_err == 0.0 && neg == 0.0,
        &format!("region/idempotence error {map_err:.3e}, non-equivariance witnessed: {}", neg == 0.0),
        secs,
    );
}

#[test]
fn p7_gradient_correctness() {
    let _g = guard();
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    let mut total_checked = 0usize;
    for seed in 0..20u64 {
        for (name, report) in verify::run_grad_checks(seed, 1e-5) {
            total_checked += report.checked;
            if report.max_rel_err > worst {
                worst = report.max_rel_err;
                worst_at = format!("{name} seed {seed} {:?}", report.worst);
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        "P7 gradient correctness",
        worst < 1e-4 && total_checked > 0 && secs < 120.0,
        &format!("max relative error {worst:.3e} (tol 1e-4) over {total_checked} checks; worst at {worst_at}"),
        secs,
    );
}

/// Split a generated dataset into interleaved halves (even/odd), keeping
/// class balance.
fn split_half(ds: &Dataset) -> (Dataset, Dataset) {
    let per = 2 * ds.shape().len();
    let mut take = |parity: usize| {
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for i in 0..ds.len() {
            if i % 2 == parity {
                labels.push(ds.labels[i]);
                data.extend_from_slice(&ds.data[i * per..(i + 1) * per]);
            }
        }
        Dataset::new(ds.channels, ds.height, ds.width, ds.class_count, labels, data).unwrap()
    };
    (take(0), take(1))
}

#[test]
fn p8_desk_scale_invariance_advantage() {
    let _g = guard();
    let t0 = Instant::now();

    // 4-class modulation set: 2000 train / 2000 test at SNR 10, seed 7.
    let full = gen_modulation(&ModulationSpec::new(ModClass::ALL.to_vec(), 1000, 10.0, 7)).unwrap();
    let (train_ds, test_ds) = split_half(&full);
    assert_eq!(train_ds.len(), 2000);
    assert_eq!(test_ds.len(), 2000);
    let (aug_test, _) = augment_scale(&test_ds, &AugmentSpec::new(1234));

    let epochs = 12usize;
    let run = |arch: Arch| -> (f64, f64) {
        let kind = match arch {
            Arch::RealBaseline => InputKind::Real,
            _ => InputKind::Complex,
        };
        let train = PreparedDataset::from_dataset(&train_ds, kind).unwrap();
        let test = PreparedDataset::from_dataset(&test_ds, kind).unwrap();
        let test_aug = PreparedDataset::from_dataset(&aug_test, kind).unwrap();
        let (model, mut params, mut state) =
            build_model(arch, train_ds.shape(), train_ds.class_count as usize, 7).unwrap();
        let mut opt = Optimizer::new(OptimizerConfig::adam(1e-3), &params);
        let cfg = TrainConfig {
            epochs,
            batch_size: 32,
            seed: 7,
        };
        train_loop(
            &model, &mut params, &mut state, &mut opt, &train, None, &cfg, 0, |_| {},
        )
        .unwrap();
        let clean = evaluate(&model, &params, &state, &test, 64).unwrap().accuracy;
        let augmented = evaluate(&model, &params, &state, &test_aug, 64)
            .unwrap()
            .accuracy;
        (clean, augmented)
    };

    let (sur_clean, sur_aug) = run(Arch::Surreal);
    let (base_clean, base_aug) = run(Arch::RealBaseline);
    let sur_drop = sur_clean - sur_aug;
    let base_drop = base_clean - base_aug;
    let secs = t0.elapsed().as_secs_f64();

    let pass = sur_clean >= 0.90 && sur_drop <= 0.005 && base_drop >= 0.10 && secs <= 600.0;
    report(
        "P8 desk-scale invariance advantage",
        pass,
        &format!(
            "surreal clean {sur_clean:.4} (>=0.90), surreal drop {sur_drop:.4} (<=0.005), \
             baseline clean {base_clean:.4}, baseline drop {base_drop:.4} (>=0.10), {epochs} epochs"
        ),
        secs,
    );
}

#[test]
fn p9_parameter_accounting() {
    let _g = guard();
    let t0 = Instant::now();
    let (_, params, _) = build_model(Arch::Surreal, Shape::new(1, 100, 100), 11, 1).unwrap();
    let count = params.scalar_count() as f64;
    let within = (count - 67_000.0).abs() <= 6_700.0;

    let formula_ok = tensor_ring_param_count(&[5, 5, 10], 4) == 320
        && tensor_ring_param_count(&[20, 500], 4) == 16 * 520
        && tensor_ring_param_count(&[30, 20, 5, 5], 2) == 4 * 60;
    let secs = t0.elapsed().as_secs_f64();
    report(
        "P9 parameter accounting",
        within && formula_ok,
        &format!("reference config has {count} parameters (67K +-10%); ring counts exact"),
        secs,
    );
}

#[test]
fn p10_cvds_format() {
    let _g = guard();
    let t0 = Instant::now();
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1010);
    let dir = tempfile::tempdir().unwrap();

    let mut all_ok = true;
    for case in 0..50 {
        let c = rng.random_range(1..3u32);
        let h = rng.random_range(1..5u32);
        let w = rng.random_range(1..6u32);
        let n = rng.random_range(0..6usize);
        let classes = rng.random_range(1..5u32);
        let per = (c * h * w) as usize;
        let labels: Vec<u32> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let data: Vec<f32> = (0..n * 2 * per).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ds = Dataset::new(c, h, w, classes, labels, data).unwrap();

        let path = dir.path().join(format!("case{case}.cvds"));
        cvds::write_cvds(&path, &ds).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        all_ok &= bytes.len() == cvds::cvds_len(n, c as usize, h as usize, w as usize);
        let back = cvds::read_cvds(&path).unwrap();
        all_ok &= back == ds;
        all_ok &= cvds::to_bytes(&back) == bytes;
    }

    // Documented length formula: header-only file is 24 bytes; one sample of
    // c=1,h=1,w=2 gives 20 + (4 + 16) + 4 = 44.
    all_ok &= cvds::cvds_len(0, 1, 1, 2) == 24;
    all_ok &= cvds::cvds_len(1, 1, 1, 2) == 44;

    // Corruption rejection.
    let ds = Dataset::new(1, 1, 2, 2, vec![0], vec![1.0, 0.0, 0.5, -0.5]).unwrap();
    let mut bytes = cvds::to_bytes(&ds);
    bytes[0] = b'X';
    all_ok &= matches!(cvds::from_bytes(&bytes), Err(surreal_core::Error::NotCvds));
    let bytes = cvds::to_bytes(&ds);
    all_ok &= matches!(
        cvds::from_bytes(&bytes[..bytes.len() - 2]),
        Err(surreal_core::Error::Truncated)
    );

    let secs = t0.elapsed().as_secs_f64();
    report(
        "P10 CVDS format",
        all_ok,
        "50 byte-exact round trips, length formula, corruption rejection",
        secs,
    );
}
