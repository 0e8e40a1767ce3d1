//! Weighted Frechet mean solvers on R+ x SO(2).
//!
//! The production solver is the incremental geodesic recursion: it is exactly
//! equivariant to scaling-rotation actions, allocation-free per call, and
//! differentiable by unrolling. A Karcher-style fixed-point refiner and a
//! grid brute-force minimizer of the squared-distance objective serve as
//! cross-checks.
//!
//! All solvers run in chart coordinates (log r, theta), where geodesics are
//! straight lines and a shortest-arc wrap handles the phase branch cut.

use crate::error::{Error, Result};
use crate::gate::GateHash;
use crate::manifold::{chart_distance, wrap_phase, PolarComplex};
use rayon::prelude::*;

/// Nonnegative weights renormalized to sum to 1 on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::DegenerateWeights);
        }
        let mut sum = 0.0;
        for &w in &weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::DegenerateWeights);
            }
            sum += w;
        }
        if sum <= 0.0 {
            return Err(Error::DegenerateWeights);
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(WeightVector { weights })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0);
        WeightVector {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

/// A nonempty list of manifold points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<PolarComplex>,
}

impl PointSet {
    pub fn new(points: Vec<PolarComplex>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Invalid("empty point set".into()));
        }
        Ok(PointSet { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn as_slice(&self) -> &[PolarComplex] {
        &self.points
    }

    /// Chart coordinates of all points, in order.
    pub fn to_chart(&self) -> (Vec<f64>, Vec<f64>) {
        let logr = self.points.iter().map(|p| p.magnitude().ln()).collect();
        let theta = self.points.iter().map(|p| p.phase()).collect();
        (logr, theta)
    }
}

#[inline]
fn wfm_chart_impl<const GATED: bool>(
    logr: &[f64],
    theta: &[f64],
    weights: &[f64],
    gate: &mut GateHash,
) -> (f64, f64) {
    debug_assert_eq!(logr.len(), theta.len());
    debug_assert_eq!(logr.len(), weights.len());
    let start = weights
        .iter()
        .position(|&w| w > 0.0)
        .expect("all-zero weights must be rejected before the kernel");
    let mut m_logr = logr[start];
    let mut m_theta = theta[start];
    let mut sum = weights[start];
    for k in (start + 1)..logr.len() {
        let w = weights[k];
        sum += w;
        let t = w / sum;
        m_logr += t * (logr[k] - m_logr);
        let delta = wrap_phase(theta[k] - m_theta);
        if GATED {
            gate.near_cut(delta);
        }
        m_theta = wrap_phase(m_theta + t * delta);
    }
    (m_logr, m_theta)
}

/// Incremental wFM recursion in chart coordinates.
///
/// Weights need not be normalized: only running-sum ratios enter. Points with
/// zero weight before the first positive weight are ignored; later ones are
/// no-ops (interpolation parameter 0). Returns chart coordinates of the mean.
///
/// The recursion: seed at the first weighted point, then for each following
/// point move a fraction `w_k / sum_{i<=k} w_i` along the connecting geodesic
/// (linear in log-magnitude, shortest arc in phase).
pub fn wfm_chart(logr: &[f64], theta: &[f64], weights: &[f64]) -> (f64, f64) {
    let mut gate = GateHash::default();
    wfm_chart_impl::<false>(logr, theta, weights, &mut gate)
}

/// [`wfm_chart`] that also folds shortest-arc decisions near the phase cut
/// into `gate`, for non-smoothness detection during gradient checking.
pub fn wfm_chart_gated(
    logr: &[f64],
    theta: &[f64],
    weights: &[f64],
    gate: &mut GateHash,
) -> (f64, f64) {
    wfm_chart_impl::<true>(logr, theta, weights, gate)
}

/// Reusable scratch for [`wfm_chart_vjp`]; avoids per-window allocation.
#[derive(Debug, Default, Clone)]
pub struct WfmScratch {
    t: Vec<f64>,
    delta: Vec<f64>,
    m_logr_prev: Vec<f64>,
    diff_logr: Vec<f64>,
    s: Vec<f64>,
}

/// Reverse-mode derivative of [`wfm_chart`].
///
/// Replays the recursion, then sweeps backwards propagating the adjoint
/// (`g_logr`, `g_theta`) of the output into the per-point adjoints
/// (`gz_logr`, `gz_theta`, accumulated with `+=`) and the raw-weight
/// adjoints (`gw`, accumulated with `+=`). The phase wrap is treated as
/// locally linear (derivative 1), matching the shortest-arc geometry.
#[allow(clippy::too_many_arguments)]
pub fn wfm_chart_vjp(
    logr: &[f64],
    theta: &[f64],
    weights: &[f64],
    g_logr: f64,
    g_theta: f64,
    gz_logr: &mut [f64],
    gz_theta: &mut [f64],
    gw: &mut [f64],
    scratch: &mut WfmScratch,
) {
    let n = logr.len();
    let start = weights
        .iter()
        .position(|&w| w > 0.0)
        .expect("all-zero weights must be rejected before the kernel");

    // Forward replay, recording per-step quantities.
    scratch.t.clear();
    scratch.delta.clear();
    scratch.m_logr_prev.clear();
    scratch.diff_logr.clear();
    scratch.s.clear();
    let mut m_logr = logr[start];
    let mut m_theta = theta[start];
    let mut sum = weights[start];
    scratch.s.push(sum);
    for k in (start + 1)..n {
        let w = weights[k];
        sum += w;
        let t = w / sum;
        let delta = wrap_phase(theta[k] - m_theta);
        scratch.t.push(t);
        scratch.delta.push(delta);
        scratch.m_logr_prev.push(m_logr);
        scratch.diff_logr.push(logr[k] - m_logr);
        scratch.s.push(sum);
        m_logr += t * (logr[k] - m_logr);
        m_theta = wrap_phase(m_theta + t * delta);
    }

    // Reverse sweep. t_k = w_k / S_k with S_k the running sum, so
    // d t_k / d w_k = S_{k-1} / S_k^2 and d t_k / d w_j = -w_k / S_k^2 for
    // j < k; the latter is accumulated through a suffix sum.
    let mut gl = g_logr;
    let mut gt = g_theta;
    let mut suffix = 0.0;
    for (i, k) in ((start + 1)..n).enumerate().rev() {
        let t = scratch.t[i];
        let delta = scratch.delta[i];
        let s_k = scratch.s[i + 1];
        let s_prev = scratch.s[i];
        let g_t = gl * scratch.diff_logr[i] + gt * delta;
        gw[k] += g_t * s_prev / (s_k * s_k) + suffix;
        suffix += -g_t * weights[k] / (s_k * s_k);
        gz_logr[k] += gl * t;
        gz_theta[k] += gt * t;
        gl *= 1.0 - t;
        gt *= 1.0 - t;
    }
    gw[start] += suffix;
    gz_logr[start] += gl;
    gz_theta[start] += gt;
}

fn check_lengths(points: &PointSet, weights: &WeightVector) -> Result<()> {
    if points.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: points.len(),
            got: weights.len(),
        });
    }
    Ok(())
}

/// Incremental weighted Frechet mean estimator (the production solver).
///
/// Deterministic given the input order.
pub fn wfm_incremental(points: &PointSet, weights: &WeightVector) -> Result<PolarComplex> {
    check_lengths(points, weights)?;
    let (logr, theta) = points.to_chart();
    let (m_logr, m_theta) = wfm_chart(&logr, &theta, weights.as_slice());
    Ok(PolarComplex::from_log_polar(m_logr, m_theta))
}

/// Result of the fixed-point refiner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WfmFixedPoint {
    pub mean: PolarComplex,
    pub converged: bool,
    pub iterations: usize,
}

/// Karcher-style fixed-point refinement started from the incremental
/// estimate: repeatedly move to the exponential of the weighted mean of
/// log-mapped residuals (chart centered at the current mean, shortest-arc
/// phases) until the update step is below `tol` or `max_iter` is reached.
pub fn wfm_fixed_point(
    points: &PointSet,
    weights: &WeightVector,
    max_iter: usize,
    tol: f64,
) -> Result<WfmFixedPoint> {
    check_lengths(points, weights)?;
    assert!(max_iter >= 1, "max_iter must be at least 1");
    assert!(tol > 0.0, "tol must be positive");

    let (logr, theta) = points.to_chart();
    let w = weights.as_slice();
    let (mut m_logr, mut m_theta) = wfm_chart(&logr, &theta, w);

    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let mut v_logr = 0.0;
        let mut v_theta = 0.0;
        for k in 0..logr.len() {
            v_logr += w[k] * (logr[k] - m_logr);
            v_theta += w[k] * wrap_phase(theta[k] - m_theta);
        }
        m_logr += v_logr;
        m_theta = wrap_phase(m_theta + v_theta);
        if chart_distance(v_logr, v_theta) < tol {
            converged = true;
            break;
        }
    }
    Ok(WfmFixedPoint {
        mean: PolarComplex::from_log_polar(m_logr, m_theta),
        converged,
        iterations,
    })
}

/// Default iteration cap for [`wfm_fixed_point`].
pub const FIXED_POINT_MAX_ITER: usize = 32;
/// Default step tolerance for [`wfm_fixed_point`].
pub const FIXED_POINT_TOL: f64 = 1e-10;

/// Test-oracle brute force: minimizes the weighted squared-distance
/// objective over a `grid` x `grid` lattice in (log r, theta), bounded by
/// the data's chart bounding box inflated by 10%, then applies one local
/// quadratic refinement step per axis.
///
/// Guarded to small problems: n <= 16 points, grid <= 2048.
pub fn wfm_bruteforce(points: &PointSet, weights: &WeightVector, grid: usize) -> Result<PolarComplex> {
    check_lengths(points, weights)?;
    if points.len() > 16 {
        return Err(Error::CostGuard(format!(
            "brute-force solver limited to 16 points, got {}",
            points.len()
        )));
    }
    if grid < 2 || grid > 2048 {
        return Err(Error::CostGuard(format!(
            "brute-force grid must be in [2, 2048], got {grid}"
        )));
    }

    let (logr, theta) = points.to_chart();
    let w = weights.as_slice();

    // Unwrap phases relative to the first point so the bounding box is a
    // contiguous interval even when the data straddles the cut.
    let theta_ref = theta[0];
    let theta_unwrapped: Vec<f64> = theta
        .iter()
        .map(|&t| theta_ref + wrap_phase(t - theta_ref))
        .collect();

    let bounds = |vals: &[f64]| {
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    };
    let (lr_lo, lr_hi) = bounds(&logr);
    let (th_lo, th_hi) = bounds(&theta_unwrapped);

    let objective = |lr: f64, th: f64| -> f64 {
        let mut obj = 0.0;
        for k in 0..logr.len() {
            let dlr = lr - logr[k];
            let dth = wrap_phase(th - theta[k]);
            obj += w[k] * (dlr * dlr + 2.0 * dth * dth);
        }
        obj
    };

    let step_of = |lo: f64, hi: f64| {
        if hi > lo {
            (hi - lo) / (grid - 1) as f64
        } else {
            0.0
        }
    };
    let lr_step = step_of(lr_lo, lr_hi);
    let th_step = step_of(th_lo, th_hi);
    let lr_count = if lr_step > 0.0 { grid } else { 1 };
    let th_count = if th_step > 0.0 { grid } else { 1 };

    // Rows are independent; the reduction over collected row minima is in
    // index order, so the result does not depend on scheduling.
    let row_minima: Vec<(f64, usize)> = (0..lr_count)
        .into_par_iter()
        .map(|i| {
            let lr = lr_lo + i as f64 * lr_step;
            let mut best = (f64::INFINITY, 0usize);
            for j in 0..th_count {
                let th = th_lo + j as f64 * th_step;
                let obj = objective(lr, th);
                if obj < best.0 {
                    best = (obj, j);
                }
            }
            best
        })
        .collect();

    let mut best = (f64::INFINITY, 0usize, 0usize);
    for (i, &(obj, j)) in row_minima.iter().enumerate() {
        if obj < best.0 {
            best = (obj, i, j);
        }
    }
    let (_, bi, bj) = best;
    let mut lr_star = lr_lo + bi as f64 * lr_step;
    let mut th_star = th_lo + bj as f64 * th_step;
    let lattice_obj = objective(lr_star, th_star);

    // One quadratic refinement step per axis using lattice neighbours.
    let refine = |x: f64, h: f64, at_lo: bool, at_hi: bool, f: &dyn Fn(f64) -> f64| -> f64 {
        if h == 0.0 || at_lo || at_hi {
            return x;
        }
        let (fm, f0, fp) = (f(x - h), f(x), f(x + h));
        let denom = fm - 2.0 * f0 + fp;
        if denom <= 0.0 {
            return x;
        }
        let offset = 0.5 * h * (fm - fp) / denom;
        x + offset.clamp(-h, h)
    };
    lr_star = refine(
        lr_star,
        lr_step,
        bi == 0,
        bi + 1 == lr_count,
        &|lr| objective(lr, th_star),
    );
    th_star = refine(
        th_star,
        th_step,
        bj == 0,
        bj + 1 == th_count,
        &|th| objective(lr_star, th),
    );
    if objective(lr_star, th_star) > lattice_obj {
        lr_star = lr_lo + bi as f64 * lr_step;
        th_star = th_lo + bj as f64 * th_step;
    }

    Ok(PolarComplex::from_log_polar(lr_star, wrap_phase(th_star)))
}
