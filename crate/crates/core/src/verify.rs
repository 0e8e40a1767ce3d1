//! Executable property suites: isometry of the group action, equivariance of
//! the wFM layers, invariance of the distance transform, tangent-ReLU region
//! behaviour, solver/oracle agreement, end-to-end logit invariance, and
//! gradient correctness. Each check reports its worst observed error against
//! a documented tolerance; seeds change the samples, never the verdict.

use crate::autodiff::{
    forward, grad_check, ChartBuf, GradCheckReport, InputBatch, InputKind, Mode, Model,
    ModelBuilder, ModelState, ParamStore, RealBuf, Tape,
};
use crate::layers::{
    distance_transform, g_transport, residual_combine, trelu, wfm_conv, GTransportSpec,
    WfmConvSpec,
};
use crate::manifold::{act, distance, transporter, wrap_phase, GroupElement, PolarComplex};
use crate::model::{build_model, Arch};
use crate::tensor::{ComplexTensor, Shape};
use crate::wfm::{wfm_bruteforce, wfm_incremental, PointSet, WeightVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::time::Instant;

/// Outcome of one property suite.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    pub name: String,
    pub trials: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Overrides the per-property default trial counts.
    pub trials: Option<usize>,
    /// Substring filter on property names.
    pub property: Option<String>,
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn random_point(rng: &mut ChaCha8Rng) -> PolarComplex {
    PolarComplex::new(rng.random_range(0.1..8.0), rng.random_range(-PI..PI))
}

fn random_group(rng: &mut ChaCha8Rng) -> GroupElement {
    GroupElement::new(rng.random_range(0.25..4.0), rng.random_range(-PI..PI))
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: Shape) -> ComplexTensor {
    ComplexTensor::from_fn(shape, |_, _, _| random_point(rng))
}

fn acted(t: &ComplexTensor, g: GroupElement) -> ComplexTensor {
    ComplexTensor::from_fn(t.shape(), |c, y, x| act(g, t.get(c, y, x)))
}

pub fn isometry_max_error(seed: u64, trials: usize) -> f64 {
    let mut rng = rng_for(seed, 1);
    let mut max: f64 = 0.0;
    for _ in 0..trials {
        let g = random_group(&mut rng);
        let (z1, z2) = (random_point(&mut rng), random_point(&mut rng));
        max = max.max((distance(act(g, z1), act(g, z2)) - distance(z1, z2)).abs());
    }
    max
}

pub fn metric_axioms_max_violation(seed: u64, trials: usize) -> f64 {
    let mut rng = rng_for(seed, 2);
    let mut max: f64 = 0.0;
    for _ in 0..trials {
        let (a, b, c) = (
            random_point(&mut rng),
            random_point(&mut rng),
            random_point(&mut rng),
        );
        let (dab, dba) = (distance(a, b), distance(b, a));
        max = max.max((dab - dba).abs());
        max = max.max(-dab);
        max = max.max(distance(a, a));
        max = max.max(dab - distance(a, c) - distance(c, b));
    }
    max
}

pub fn transitivity_max_error(seed: u64, trials: usize) -> f64 {
    let mut rng = rng_for(seed, 3);
    let mut max: f64 = 0.0;
    for _ in 0..trials {
        let (a, b) = (random_point(&mut rng), random_point(&mut rng));
        max = max.max(distance(act(transporter(a, b), a), b));
    }
    max
}

pub fn wrap_idempotence_max_error(seed: u64, trials: usize) -> f64 {
    let mut rng = rng_for(seed, 4);
    let mut max: f64 = 0.0;
    for _ in 0..trials {
        let theta = rng.random_range(-40.0..40.0);
        let w = wrap_phase(theta);
        max = max.max((wrap_phase(w) - w).abs());
        if w <= -PI || w > PI {
            max = max.max(1.0);
        }
    }
    max
}

pub fn chart_consistency_max_error(seed: u64, trials: usize) -> f64 {
    let mut rng = rng_for(seed, 5);
    let mut max: f64 = 0.0;
    for _ in 0..trials {
        let (a, b) = (random_point(&mut rng), random_point(&mut rng));
        let (va, vb) = (crate::manifold::log_map(a), crate::manifold::log_map(b));
        let dlr = vb.d_logr - va.d_logr;
        let dth = 2.0_f64.sqrt() * wrap_phase(vb.d_theta - va.d_theta);
        max = max.max(((dlr * dlr + dth * dth).sqrt() - distance(a, b)).abs());
    }
    max
}

fn random_set(rng: &mut ChaCha8Rng, max_n: usize, arc: f64) -> (PointSet, WeightVector) {
    let n = rng.random_range(2..=max_n);
    let center = rng.random_range(-PI..PI);
    let points = (0..n)
        .map(|_| {
            PolarComplex::new(
                rng.random_range(0.2..5.0),
                wrap_phase(center + rng.random_range(-arc / 2.0..arc / 2.0)),
            )
        })
        .collect();
    let weights = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    (
        PointSet::new(points).unwrap(),
        WeightVector::new(weights).unwrap(),
    )
}

/// wFM equivariance over point sets of up to 25 points.
pub fn wfm_equivariance_max_error(seed: u64, trials: usize) -> f64 {
    let mut rng = rng_for(seed, 6);
    let mut max: f64 = 0.0;
    for _ in 0..trials {
        let (points, weights) = random_set(&mut rng, 25, 2.0 * PI);
        let g = random_group(&mut rng);
        let moved =
            PointSet::new(points.as_slice().iter().map(|&p| act(g, p)).collect()).unwrap();
        let lhs = act(g, wfm_incremental(&points, &weights).unwrap());
        let rhs = wfm_incremental(&moved, &weights).unwrap();
        max = max.max(distance(lhs, rhs));
    }
    max
}

/// The flat-chart closed form for low dispersion sets.
pub fn chart_closed_form(points: &PointSet, weights: &WeightVector) -> PolarComplex {
    let (logr, theta) = points.to_chart();
    let w = weights.as_slice();
    let theta_ref = theta[0];
    let mut m_logr = 0.0;
    let mut m_theta = 0.0;
    for k in 0..logr.len() {
        m_logr += w[k] * logr[k];
        m_theta += w[k] * (theta_ref + wrap_phase(theta[k] - theta_ref));
    }
    PolarComplex::from_log_polar(m_logr, wrap_phase(m_theta))
}

/// Incremental solver vs the chart closed form, phase dispersion < pi/2.
pub fn wfm_closed_form_max_error(seed: u64, trials: usize) -> f64 {
    let mut rng = rng_for(seed, 7);
    let mut max: f64 = 0.0;
    for _ in 0..trials {
        let (points, weights) = random_set(&mut rng, 16, PI / 2.0 * 0.98);
        let m = wfm_incremental(&points, &weights).unwrap();
        max = max.max(distance(m, chart_closed_form(&points, &weights)));
    }
    max
}

/// Incremental solver vs the lattice brute force at the given grid.
pub fn wfm_bruteforce_max_error(seed: u64, trials: usize, grid: usize) -> f64 {
    let mut rng = rng_for(seed, 8);
    let mut max: f64 = 0.0;
    for _ in 0..trials {
        let (points, weights) = random_set(&mut rng, 16, PI / 2.0 * 0.98);
        let m = wfm_incremental(&points, &weights).unwrap();
        let bf = wfm_bruteforce(&points, &weights, grid).unwrap();
        max = max.max(distance(m, bf));
    }
    max
}

/// How far outside the chart bounding box the wFM lands (0 when inside).
pub fn wfm_contraction_max_violation(seed: u64, trials: usize) -> f64 {
    let mut rng = rng_for(seed, 9);
    let mut max: f64 = 0.0;
    for _ in 0..trials {
        let (points, weights) = random_set(&mut rng, 16, PI / 2.0);
        let m = wfm_incremental(&points, &weights).unwrap();
        let (logr, theta) = points.to_chart();
        let theta_ref = theta[0];
        let unwrapped: Vec<f64> = theta
            .iter()
            .map(|&t| theta_ref + wrap_phase(t - theta_ref))
            .collect();
        let m_theta = theta_ref + wrap_phase(m.phase() - theta_ref);
        let lr = m.magnitude().ln();
        let bound = |vals: &[f64], v: f64| -> f64 {
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo - v).max(v - hi).max(0.0)
        };
        max = max.max(bound(&logr, lr));
        max = max.max(bound(&unwrapped, m_theta));
    }
    max
}

pub fn conv_equivariance_max_error(seed: u64, trials: usize) -> f64 {
    let mut rng = rng_for(seed, 10);
    let mut max: f64 = 0.0;
    for _ in 0..trials {
        let input = random_tensor(&mut rng, Shape::new(2, 6, 6));
        let mut spec = WfmConvSpec::new(2, 4, (3, 3), (2, 2));
        for l in spec.logits_mut() {
            *l = rng.random_range(-1.5..1.5);
        }
        let g = random_group(&mut rng);
        let lhs = wfm_conv(&acted(&input, g), &spec).unwrap();
        let rhs = wfm_conv(&input, &spec).unwrap();
        for (a, b) in lhs.data().iter().zip(rhs.data()) {
            max = max.max(distance(*a, act(g, *b)));
        }
    }
    max
}

pub fn g_transport_equivariance_max_error(seed: u64, trials: usize) -> f64 {
    let mut rng = rng_for(seed, 11);
    let mut max: f64 = 0.0;
    for _ in 0..trials {
        let input = random_tensor(&mut rng, Shape::new(3, 4, 4));
        let spec = GTransportSpec::new(
            (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..3).map(|_| rng.random_range(-PI..PI)).collect(),
        )
        .unwrap();
        let g = random_group(&mut rng);
        let lhs = g_transport(&acted(&input, g), &spec).unwrap();
        let rhs = g_transport(&input, &spec).unwrap();
        for (a, b) in lhs.data().iter().zip(rhs.data()) {
            max = max.max(distance(*a, act(g, *b)));
        }
    }
    max
}

pub fn residual_equivariance_max_error(seed: u64, trials: usize) -> f64 {
    let mut rng = rng_for(seed, 12);
    let mut max: f64 = 0.0;
    for _ in 0..trials {
        let f1 = random_tensor(&mut rng, Shape::new(2, 3, 3));
        let f2 = random_tensor(&mut rng, Shape::new(2, 7, 7));
        let mut align = WfmConvSpec::new(2, 3, (3, 3), (2, 2));
        for l in align.logits_mut() {
            *l = rng.random_range(-1.0..1.0);
        }
        let g = random_group(&mut rng);
        let lhs = residual_combine(&acted(&f1, g), &acted(&f2, g), &align).unwrap();
        let rhs = residual_combine(&f1, &f2, &align).unwrap();
        for (a, b) in lhs.data().iter().zip(rhs.data()) {
            max = max.max(distance(*a, act(g, *b)));
        }
    }
    max
}

pub fn dist_invariance_max_error(seed: u64, trials: usize) -> f64 {
    let mut rng = rng_for(seed, 13);
    let mut max: f64 = 0.0;
    for _ in 0..trials {
        let input = random_tensor(&mut rng, Shape::new(2, 3, 3));
        let weights =
            WeightVector::new((0..18).map(|_| rng.random_range(0.05..1.0)).collect()).unwrap();
        let g = random_group(&mut rng);
        let a = distance_transform(&input, &[weights.clone()]).unwrap();
        let b = distance_transform(&acted(&input, g), &[weights]).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            max = max.max((x - y).abs());
        }
    }
    max
}

/// Exactness of the four rectification regions plus idempotence.
pub fn trelu_map_max_error(seed: u64, trials: usize) -> f64 {
    let quadrants = [
        ((0.5, -1.0), (1.0, 0.0)),
        ((2.0, 1.0), (2.0, 1.0)),
        ((0.5, 1.0), (1.0, 1.0)),
        ((2.0, -1.0), (2.0, 0.0)),
    ];
    let mut max: f64 = 0.0;
    for ((m, p), (em, ep)) in quadrants {
        let t = ComplexTensor::constant(Shape::new(1, 1, 1), PolarComplex::new(m, p));
        let out = trelu(&t).data()[0];
        if out.magnitude() != em || out.phase() != ep {
            max = max.max(1.0);
        }
    }
    let mut rng = rng_for(seed, 14);
    for _ in 0..trials {
        let p = random_point(&mut rng);
        let t = ComplexTensor::constant(Shape::new(1, 1, 1), p);
        let once = trelu(&t);
        let twice = trelu(&once);
        max = max.max(distance(once.data()[0], twice.data()[0]));
    }
    max
}

/// Negative property: tReLU must NOT be equivariant. Returns 0 when a
/// violation is exhibited, 1 otherwise.
pub fn trelu_nonequivariance_error() -> f64 {
    let g = GroupElement::new(3.0, 0.0);
    let x = ComplexTensor::constant(Shape::new(1, 1, 1), PolarComplex::new(0.5, -1.0));
    let lhs = trelu(&acted(&x, g)).data()[0];
    let rhs = act(g, trelu(&x).data()[0]);
    if distance(lhs, rhs) > 0.1 {
        0.0
    } else {
        1.0
    }
}

/// Softmaxed convolution weights: positivity and unit sum for random logits.
pub fn softmax_weights_max_violation(seed: u64, trials: usize) -> f64 {
    let mut rng = rng_for(seed, 15);
    let mut max: f64 = 0.0;
    for _ in 0..trials {
        let mut spec = WfmConvSpec::new(2, 3, (2, 2), (1, 1));
        for l in spec.logits_mut() {
            *l = rng.random_range(-12.0..12.0);
        }
        let w = spec.softmax_weights();
        let window = spec.geom().window_len();
        for oc in 0..3 {
            let row = &w[oc * window..(oc + 1) * window];
            if row.iter().any(|&x| x <= 0.0) {
                max = max.max(1.0);
            }
            max = max.max((row.iter().sum::<f64>() - 1.0).abs());
        }
    }
    max
}

/// Worst relative logit change under per-input random group actions.
/// Inputs and their acted copies run as two batched forward passes.
pub fn logits_invariance_max_rel(
    model: &Model,
    params: &ParamStore,
    state: &ModelState,
    inputs: &[ComplexTensor],
    gs: &[GroupElement],
) -> crate::error::Result<f64> {
    assert_eq!(inputs.len(), gs.len());
    let moved: Vec<ComplexTensor> = inputs
        .iter()
        .zip(gs)
        .map(|(t, &g)| acted(t, g))
        .collect();
    let mut tape = Tape::new();
    let base = forward(
        model,
        params,
        state,
        &InputBatch::Complex(ChartBuf::from_tensors(inputs)?),
        Mode::Eval,
        &mut tape,
    )?;
    let shifted = forward(
        model,
        params,
        state,
        &InputBatch::Complex(ChartBuf::from_tensors(&moved)?),
        Mode::Eval,
        &mut tape,
    )?;
    let classes = model.classes;
    let mut max_rel: f64 = 0.0;
    for i in 0..inputs.len() {
        let a = &base[i * classes..(i + 1) * classes];
        let b = &shifted[i * classes..(i + 1) * classes];
        let scale = a
            .iter()
            .chain(b.iter())
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
            .max(1.0);
        for (x, y) in a.iter().zip(b) {
            max_rel = max_rel.max((x - y).abs() / scale);
        }
    }
    Ok(max_rel)
}

/// Desk-scale end-to-end invariance on random parameters.
pub fn network_invariance_max_rel(seed: u64, trials: usize) -> f64 {
    let shape = Shape::new(1, 1, 128);
    let (model, params, state) = build_model(Arch::Surreal, shape, 4, seed).unwrap();
    let mut rng = rng_for(seed, 16);
    let inputs: Vec<ComplexTensor> = (0..trials).map(|_| random_tensor(&mut rng, shape)).collect();
    let gs: Vec<GroupElement> = (0..trials).map(|_| random_group(&mut rng)).collect();
    logits_invariance_max_rel(&model, &params, &state, &inputs, &gs).unwrap()
}

/// One gradient-check scenario: a small model exercising one layer type.
pub struct GradScenario {
    pub name: &'static str,
    pub model: Model,
    pub params: ParamStore,
    pub state: ModelState,
    pub input: InputBatch,
    pub labels: Vec<usize>,
}

fn perturb(params: &mut ParamStore, rng: &mut ChaCha8Rng, amplitude: f64) {
    for id in 0..params.len() {
        let keep_positive = params.name(id).ends_with(".gamma");
        for v in params.get_mut(id).iter_mut() {
            *v += rng.random_range(-amplitude..amplitude);
            if keep_positive && *v < 0.2 {
                *v = 0.2;
            }
        }
    }
}

fn complex_input(rng: &mut ChaCha8Rng, n: usize, shape: Shape) -> InputBatch {
    let tensors: Vec<ComplexTensor> = (0..n)
        .map(|_| {
            ComplexTensor::from_fn(shape, |_, _, _| {
                PolarComplex::new(rng.random_range(0.3..3.0), rng.random_range(-2.0..2.0))
            })
        })
        .collect();
    InputBatch::Complex(ChartBuf::from_tensors(&tensors).unwrap())
}

fn real_input(rng: &mut ChaCha8Rng, n: usize, shape: Shape) -> InputBatch {
    let mut buf = RealBuf::zeros(n, shape);
    for v in buf.data.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    InputBatch::Real(buf)
}

/// Build the scenario zoo covering every differentiable layer type.
/// Seed 0 keeps the manifold-layer logits at their uniform-weight zeros;
/// other seeds randomize them.
pub fn grad_scenarios(seed: u64) -> Vec<GradScenario> {
    let mut out = Vec::new();
    let mut rng = rng_for(seed, 17);
    let classes = 3;

    let mut push = |name: &'static str,
                    built: (Model, ParamStore, ModelState),
                    input: InputBatch,
                    rng: &mut ChaCha8Rng| {
        let (model, mut params, state) = built;
        if seed != 0 {
            perturb(&mut params, rng, 0.4);
        }
        let n = input.batch();
        let labels = (0..n).map(|i| i % classes).collect();
        out.push(GradScenario {
            name,
            model,
            params,
            state,
            input,
            labels,
        });
    };

    // Two stacked wFM convolutions: checks logits of both plus the adjoint
    // flow through the recursion.
    let built = {
        let mut b = ModelBuilder::new(
            "wfm-stack",
            InputKind::Complex,
            Shape::new(2, 3, 3),
            classes,
            rng_for(seed, 18),
        );
        let x = b.wfm_conv(0, 3, (2, 2), (1, 1)).unwrap();
        let x = b.wfm_conv(x, 2, (2, 2), (1, 1)).unwrap();
        let x = b.distance_transform(x, 2).unwrap();
        let x = b.flatten(x).unwrap();
        let _ = b.dense(x, classes).unwrap();
        b.finish()
    };
    let input = complex_input(&mut rng, 2, Shape::new(2, 3, 3));
    push("wfm-stack", built, input, &mut rng);

    let built = {
        let mut b = ModelBuilder::new(
            "g-transport",
            InputKind::Complex,
            Shape::new(2, 3, 3),
            classes,
            rng_for(seed, 19),
        );
        let x = b.wfm_conv(0, 3, (2, 2), (1, 1)).unwrap();
        let x = b.g_transport(x).unwrap();
        let x = b.distance_transform(x, 1).unwrap();
        let x = b.flatten(x).unwrap();
        let _ = b.dense(x, classes).unwrap();
        b.finish()
    };
    let input = complex_input(&mut rng, 2, Shape::new(2, 3, 3));
    push("g-transport", built, input, &mut rng);

    let built = {
        let mut b = ModelBuilder::new(
            "trelu",
            InputKind::Complex,
            Shape::new(2, 3, 3),
            classes,
            rng_for(seed, 20),
        );
        let x = b.wfm_conv(0, 3, (2, 2), (1, 1)).unwrap();
        let x = b.trelu(x).unwrap();
        let x = b.distance_transform(x, 1).unwrap();
        let x = b.flatten(x).unwrap();
        let _ = b.dense(x, classes).unwrap();
        b.finish()
    };
    let input = complex_input(&mut rng, 2, Shape::new(2, 3, 3));
    push("trelu", built, input, &mut rng);

    let built = {
        let mut b = ModelBuilder::new(
            "residual",
            InputKind::Complex,
            Shape::new(2, 5, 5),
            classes,
            rng_for(seed, 21),
        );
        let main = b.wfm_conv(0, 2, (3, 3), (2, 2)).unwrap();
        let align = b.wfm_conv(0, 2, (3, 3), (2, 2)).unwrap();
        let x = b.concat_channels(main, align).unwrap();
        let x = b.distance_transform(x, 1).unwrap();
        let x = b.flatten(x).unwrap();
        let _ = b.dense(x, classes).unwrap();
        b.finish()
    };
    let input = complex_input(&mut rng, 2, Shape::new(2, 5, 5));
    push("residual", built, input, &mut rng);

    let built = {
        let mut b = ModelBuilder::new(
            "real-conv",
            InputKind::Real,
            Shape::new(2, 5, 5),
            classes,
            rng_for(seed, 22),
        );
        let x = b.real_conv(0, 3, (3, 3), (1, 1), (1, 1)).unwrap();
        let x = b.relu(x).unwrap();
        let x = b.real_conv(x, 2, (2, 2), (2, 2), (0, 0)).unwrap();
        let x = b.flatten(x).unwrap();
        let _ = b.dense(x, classes).unwrap();
        b.finish()
    };
    let input = real_input(&mut rng, 3, Shape::new(2, 5, 5));
    push("real-conv", built, input, &mut rng);

    let built = {
        let mut b = ModelBuilder::new(
            "batch-norm",
            InputKind::Real,
            Shape::new(2, 4, 4),
            classes,
            rng_for(seed, 23),
        );
        let x = b.real_conv(0, 3, (2, 2), (1, 1), (0, 0)).unwrap();
        let x = b.batch_norm(x).unwrap();
        let x = b.relu(x).unwrap();
        let x = b.flatten(x).unwrap();
        let _ = b.dense(x, classes).unwrap();
        b.finish()
    };
    let input = real_input(&mut rng, 4, Shape::new(2, 4, 4));
    push("batch-norm", built, input, &mut rng);

    let built = {
        let mut b = ModelBuilder::new(
            "max-pool",
            InputKind::Real,
            Shape::new(1, 4, 4),
            classes,
            rng_for(seed, 24),
        );
        let x = b.real_conv(0, 3, (2, 2), (1, 1), (0, 0)).unwrap();
        let x = b.max_pool(x, (2, 2), (2, 2)).unwrap();
        let x = b.flatten(x).unwrap();
        let _ = b.dense(x, classes).unwrap();
        b.finish()
    };
    let input = real_input(&mut rng, 3, Shape::new(1, 4, 4));
    push("max-pool", built, input, &mut rng);

    let built = {
        let mut b = ModelBuilder::new(
            "add-residual",
            InputKind::Real,
            Shape::new(2, 4, 4),
            classes,
            rng_for(seed, 25),
        );
        let x = b.real_conv(0, 2, (3, 3), (1, 1), (1, 1)).unwrap();
        let x = b.relu(x).unwrap();
        let x = b.add(0, x).unwrap();
        let x = b.flatten(x).unwrap();
        let _ = b.dense(x, classes).unwrap();
        b.finish()
    };
    let input = real_input(&mut rng, 2, Shape::new(2, 4, 4));
    push("add-residual", built, input, &mut rng);

    out
}

/// Run the gradient checker over the whole scenario zoo.
pub fn run_grad_checks(seed: u64, h: f64) -> Vec<(String, GradCheckReport)> {
    grad_scenarios(seed)
        .into_iter()
        .map(|mut s| {
            let report = grad_check(
                &s.model,
                &mut s.params,
                &s.state,
                &s.input,
                &s.labels,
                |_| true,
                h,
                20,
            )
            .expect("scenario forward succeeds");
            (s.name.to_string(), report)
        })
        .collect()
}

/// Worst relative gradient error across all scenarios.
pub fn gradcheck_max_rel_error(seed: u64) -> f64 {
    run_grad_checks(seed, 1e-5)
        .into_iter()
        .map(|(_, r)| r.max_rel_err)
        .fold(0.0, f64::max)
}

/// Assemble and run the default verification suite.
pub fn run_verification(opts: &VerifyOptions) -> Vec<PropertyReport> {
    let seed = opts.seed;
    let t = |default: usize| opts.trials.unwrap_or(default);

    type Check = (&'static str, usize, f64, Box<dyn Fn(u64, usize) -> f64>);
    let checks: Vec<Check> = vec![
        ("isometry", t(10_000), 1e-9, Box::new(isometry_max_error)),
        (
            "metric-axioms",
            t(10_000),
            1e-12,
            Box::new(metric_axioms_max_violation),
        ),
        (
            "transitivity",
            t(10_000),
            1e-12,
            Box::new(transitivity_max_error),
        ),
        (
            "wrap-idempotence",
            t(100_000),
            0.0,
            Box::new(wrap_idempotence_max_error),
        ),
        (
            "chart-consistency",
            t(10_000),
            1e-12,
            Box::new(chart_consistency_max_error),
        ),
        (
            "wfm-equivariance",
            t(1_000),
            1e-9,
            Box::new(wfm_equivariance_max_error),
        ),
        (
            "wfm-closed-form",
            t(200),
            1e-8,
            Box::new(wfm_closed_form_max_error),
        ),
        (
            "wfm-bruteforce",
            t(20),
            2e-3,
            Box::new(|s, n| wfm_bruteforce_max_error(s, n, 512)),
        ),
        (
            "wfm-contraction",
            t(1_000),
            1e-12,
            Box::new(wfm_contraction_max_violation),
        ),
        (
            "conv-equivariance",
            t(50),
            1e-9,
            Box::new(conv_equivariance_max_error),
        ),
        (
            "g-transport-equivariance",
            t(50),
            1e-9,
            Box::new(g_transport_equivariance_max_error),
        ),
        (
            "residual-equivariance",
            t(25),
            1e-9,
            Box::new(residual_equivariance_max_error),
        ),
        (
            "dist-invariance",
            t(1_000),
            1e-9,
            Box::new(dist_invariance_max_error),
        ),
        ("trelu-map", t(10_000), 0.0, Box::new(trelu_map_max_error)),
        (
            "trelu-not-equivariant",
            1,
            0.5,
            Box::new(|_, _| trelu_nonequivariance_error()),
        ),
        (
            "softmax-weights",
            t(1_000),
            1e-12,
            Box::new(softmax_weights_max_violation),
        ),
        (
            "network-invariance",
            t(20),
            1e-6,
            Box::new(network_invariance_max_rel),
        ),
        (
            "gradcheck",
            1,
            1e-4,
            Box::new(|s, _| gradcheck_max_rel_error(s)),
        ),
    ];

    checks
        .into_iter()
        .filter(|(name, _, _, _)| match &opts.property {
            Some(f) => name.contains(f.as_str()),
            None => true,
        })
        .map(|(name, trials, tolerance, f)| {
            let t0 = Instant::now();
            let max_error = f(seed, trials);
            PropertyReport {
                name: name.to_string(),
                trials,
                max_error,
                tolerance,
                passed: max_error <= tolerance,
                seconds: t0.elapsed().as_secs_f64(),
            }
        })
        .collect()
}
