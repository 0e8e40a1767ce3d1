//! Geometry of the nonzero complex plane as the product manifold R+ x SO(2).
//!
//! A nonzero complex number is represented by its polar form: a strictly
//! positive magnitude and a principal phase in (-pi, pi]. The rotation part
//! is carried as the phase scalar; the Frobenius norm of the skew matrix
//! `theta * [[0,-1],[1,0]]` is `sqrt(2)*|theta|`, so the matrix distance
//! reduces to scalar arithmetic with a factor 2 on the squared phase term.
//! Scaling-rotation group elements act transitively and isometrically.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Default magnitude clamp used when converting Cartesian values that may be
/// exactly zero; the manifold excludes the origin.
pub const DEFAULT_EPS: f64 = 1e-6;

/// Wrap an angle into the principal branch (-pi, pi].
pub fn wrap_phase(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut t = theta % two_pi;
    if t <= -PI {
        t += two_pi;
    } else if t > PI {
        t -= two_pi;
    }
    t
}

/// A point on R+ x SO(2): strictly positive magnitude, phase in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarComplex {
    magnitude: f64,
    phase: f64,
}

impl PolarComplex {
    /// Build a manifold point. The phase is wrapped into (-pi, pi].
    ///
    /// Panics if the magnitude is not strictly positive and finite; those are
    /// precondition violations, not data errors.
    pub fn new(magnitude: f64, phase: f64) -> Self {
        assert!(
            magnitude.is_finite() && magnitude > 0.0,
            "magnitude must be strictly positive and finite, got {magnitude}"
        );
        assert!(phase.is_finite(), "phase must be finite, got {phase}");
        PolarComplex {
            magnitude,
            phase: wrap_phase(phase),
        }
    }

    /// Point from chart coordinates (log r, theta).
    pub fn from_log_polar(log_magnitude: f64, theta: f64) -> Self {
        PolarComplex::new(log_magnitude.exp(), theta)
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// Chart coordinates (log r, theta).
    pub fn to_chart(&self) -> (f64, f64) {
        (self.magnitude.ln(), self.phase)
    }
}

/// Cartesian view of a complex number. (0, 0) is permitted here; it is
/// clamped away at conversion time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianComplex {
    pub re: f64,
    pub im: f64,
}

impl CartesianComplex {
    pub fn new(re: f64, im: f64) -> Self {
        CartesianComplex { re, im }
    }
}

/// A scaling-rotation group element g = (scale, angle).
///
/// Identity is (1, 0); composition multiplies scales and adds angles; the
/// inverse is (1/scale, -angle).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    scale: f64,
    angle: f64,
}

impl GroupElement {
    pub fn new(scale: f64, angle: f64) -> Self {
        assert!(
            scale.is_finite() && scale > 0.0,
            "scale must be strictly positive and finite, got {scale}"
        );
        assert!(angle.is_finite(), "angle must be finite, got {angle}");
        GroupElement {
            scale,
            angle: wrap_phase(angle),
        }
    }

    pub fn identity() -> Self {
        GroupElement {
            scale: 1.0,
            angle: 0.0,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// Group composition: `self` applied after `other`.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement::new(self.scale * other.scale, self.angle + other.angle)
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement::new(1.0 / self.scale, wrap_phase(-self.angle))
    }
}

/// Tangent vector in (log r, theta) coordinates. The `d_theta` component is
/// the scalar coefficient of the skew matrix `[[0,-1],[1,0]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector {
    pub d_logr: f64,
    pub d_theta: f64,
}

impl TangentVector {
    pub fn new(d_logr: f64, d_theta: f64) -> Self {
        TangentVector { d_logr, d_theta }
    }
}

/// Convert a Cartesian value to polar form, clamping the magnitude at `eps`.
///
/// Values with |z| below `eps` get magnitude `eps` and phase 0.
pub fn to_polar(z: CartesianComplex, eps: f64) -> Result<PolarComplex> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::NonFiniteComplex);
    }
    assert!(eps > 0.0, "eps must be positive, got {eps}");
    let r = z.re.hypot(z.im);
    if r < eps {
        Ok(PolarComplex {
            magnitude: eps,
            phase: 0.0,
        })
    } else {
        Ok(PolarComplex {
            magnitude: r,
            phase: wrap_phase(z.im.atan2(z.re)),
        })
    }
}

/// Inverse of `to_polar`: (r, theta) -> (r cos theta, r sin theta).
pub fn from_polar(p: PolarComplex) -> CartesianComplex {
    CartesianComplex {
        re: p.magnitude * p.phase.cos(),
        im: p.magnitude * p.phase.sin(),
    }
}

/// Squared-chart distance helper shared by manifold and layer code:
/// dlr is a log-magnitude difference, dth a wrapped phase difference.
#[inline]
pub(crate) fn chart_distance(dlr: f64, dth: f64) -> f64 {
    (dlr * dlr + 2.0 * dth * dth).sqrt()
}

/// Manifold distance: sqrt(log^2(r2/r1) + 2 * wrap(th2 - th1)^2).
///
/// The factor 2 is the Frobenius norm of the skew phase matrix; it keeps the
/// scalar formula numerically equal to the literal matrix-logarithm form.
pub fn distance(a: PolarComplex, b: PolarComplex) -> f64 {
    let dlr = (b.magnitude / a.magnitude).ln();
    let dth = wrap_phase(b.phase - a.phase);
    chart_distance(dlr, dth)
}

/// Apply a group element: scales the magnitude, rotates the phase.
pub fn act(g: GroupElement, p: PolarComplex) -> PolarComplex {
    PolarComplex {
        magnitude: g.scale * p.magnitude,
        phase: wrap_phase(g.angle + p.phase),
    }
}

/// The unique group element carrying `a` to `b` (transitivity).
pub fn transporter(a: PolarComplex, b: PolarComplex) -> GroupElement {
    GroupElement {
        scale: b.magnitude / a.magnitude,
        angle: wrap_phase(b.phase - a.phase),
    }
}

/// Log map at the identity: (r, theta) -> (log r, theta).
pub fn log_map(p: PolarComplex) -> TangentVector {
    TangentVector {
        d_logr: p.magnitude.ln(),
        d_theta: p.phase,
    }
}

/// Exp map at the identity: (x, t) -> (e^x, wrap(t)).
pub fn exp_map(v: TangentVector) -> PolarComplex {
    PolarComplex {
        magnitude: v.d_logr.exp(),
        phase: wrap_phase(v.d_theta),
    }
}

/// Geodesic point between `a` and `b` at parameter `t` in [0, 1].
///
/// Geodesics are straight lines in (log r, theta) with the shortest-arc
/// phase; an exact antipodal tie takes the positive direction (`wrap` maps
/// a difference of +-pi to +pi). Endpoints are returned exactly.
pub fn geodesic_interpolate(a: PolarComplex, b: PolarComplex, t: f64) -> PolarComplex {
    assert!((0.0..=1.0).contains(&t), "t must lie in [0,1], got {t}");
    if t == 0.0 {
        return a;
    }
    if t == 1.0 {
        return b;
    }
    let magnitude = a.magnitude.powf(1.0 - t) * b.magnitude.powf(t);
    let delta = wrap_phase(b.phase - a.phase);
    PolarComplex {
        magnitude,
        phase: wrap_phase(a.phase + t * delta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // ------------------------------------------------------------------
    // Independent matrix oracle for the distance formula: a generic 2x2
    // principal matrix logarithm built from Denman-Beavers square roots and
    // the log(I + X) series. No atan2, no knowledge of the phase scalar.
    // ------------------------------------------------------------------

    type M2 = [[f64; 2]; 2];

    const IDENT: M2 = [[1.0, 0.0], [0.0, 1.0]];

    fn rot(theta: f64) -> M2 {
        let (s, c) = theta.sin_cos();
        [[c, -s], [s, c]]
    }

    fn mat_mul(a: &M2, b: &M2) -> M2 {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        out
    }

    fn mat_inv(a: &M2) -> M2 {
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        [
            [a[1][1] / det, -a[0][1] / det],
            [-a[1][0] / det, a[0][0] / det],
        ]
    }

    fn mat_sub(a: &M2, b: &M2) -> M2 {
        [
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ]
    }

    fn frob(a: &M2) -> f64 {
        a.iter()
            .flatten()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Principal square root by the Denman-Beavers iteration.
    fn mat_sqrt(a: &M2) -> M2 {
        let mut y = *a;
        let mut z = IDENT;
        for _ in 0..60 {
            let yn = {
                let zi = mat_inv(&z);
                [
                    [(y[0][0] + zi[0][0]) / 2.0, (y[0][1] + zi[0][1]) / 2.0],
                    [(y[1][0] + zi[1][0]) / 2.0, (y[1][1] + zi[1][1]) / 2.0],
                ]
            };
            let zn = {
                let yi = mat_inv(&y);
                [
                    [(z[0][0] + yi[0][0]) / 2.0, (z[0][1] + yi[0][1]) / 2.0],
                    [(z[1][0] + yi[1][0]) / 2.0, (z[1][1] + yi[1][1]) / 2.0],
                ]
            };
            y = yn;
            z = zn;
            if frob(&mat_sub(&mat_mul(&y, &y), a)) < 1e-15 {
                break;
            }
        }
        y
    }

    /// log(I + X) power series; requires frob(X) < 1.
    fn mat_log_series(a: &M2) -> M2 {
        let x = mat_sub(a, &IDENT);
        let mut term = x;
        let mut acc = [[0.0; 2]; 2];
        for k in 1..=80 {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            for i in 0..2 {
                for j in 0..2 {
                    acc[i][j] += sign * term[i][j] / k as f64;
                }
            }
            term = mat_mul(&term, &x);
        }
        acc
    }

    /// Principal matrix logarithm via inverse scaling-and-squaring.
    fn mat_log(a: &M2) -> M2 {
        let mut m = *a;
        let mut doublings = 0u32;
        while frob(&mat_sub(&m, &IDENT)) > 0.25 {
            m = mat_sqrt(&m);
            doublings += 1;
            assert!(doublings < 60, "matrix log failed to converge");
        }
        let mut l = mat_log_series(&m);
        let f = (1u64 << doublings) as f64;
        for row in l.iter_mut() {
            for v in row.iter_mut() {
                *v *= f;
            }
        }
        l
    }

    /// Literal product-manifold distance: magnitude log plus the Frobenius
    /// norm of the principal log of the relative rotation matrix.
    fn matrix_distance(a: PolarComplex, b: PolarComplex) -> f64 {
        let rel = mat_mul(&rot(b.phase()), &mat_inv(&rot(a.phase())));
        let l = mat_log(&rel);
        let dlr = (b.magnitude() / a.magnitude()).ln();
        (dlr * dlr + frob(&l).powi(2)).sqrt()
    }

    #[test]
    fn matrix_log_recovers_skew_form() {
        // logm(R(theta)) = theta * [[0,-1],[1,0]], Frobenius norm sqrt(2)|theta|
        for &theta in &[0.1, -0.7, 1.3, 2.9, -2.5] {
            let l = mat_log(&rot(theta));
            assert_relative_eq!(l[0][1], -theta, epsilon = 1e-12);
            assert_relative_eq!(l[1][0], theta, epsilon = 1e-12);
            assert!(l[0][0].abs() < 1e-12 && l[1][1].abs() < 1e-12);
            assert_relative_eq!(frob(&l), 2.0_f64.sqrt() * theta.abs(), epsilon = 1e-12);
        }
    }

    #[test]
    fn distance_matches_matrix_oracle() {
        // The derived example: a = (2, pi/4), b = (6, -pi/3).
        let a = PolarComplex::new(2.0, PI / 4.0);
        let b = PolarComplex::new(6.0, -PI / 3.0);
        let expected = matrix_distance(a, b);
        assert_relative_eq!(distance(a, b), expected, epsilon = 1e-12);

        // And randomized pairs away from the antipode.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = PolarComplex::new(rng.random_range(0.2..5.0), rng.random_range(-3.0..3.0));
            let b = PolarComplex::new(rng.random_range(0.2..5.0), rng.random_range(-3.0..3.0));
            if wrap_phase(b.phase() - a.phase()).abs() > 0.98 * PI {
                continue;
            }
            assert_relative_eq!(distance(a, b), matrix_distance(a, b), epsilon = 1e-12);
        }
    }

    #[test]
    fn to_polar_examples() {
        let p = to_polar(CartesianComplex::new(0.0, 1.0), DEFAULT_EPS).unwrap();
        assert_relative_eq!(p.magnitude(), 1.0);
        assert_relative_eq!(p.phase(), PI / 2.0);

        // Principal-branch boundary: phase +pi, not -pi.
        let p = to_polar(CartesianComplex::new(-1.0, 0.0), DEFAULT_EPS).unwrap();
        assert_relative_eq!(p.magnitude(), 1.0);
        assert_eq!(p.phase(), PI);

        // Exact zero clamps to (eps, 0).
        let p = to_polar(CartesianComplex::new(0.0, 0.0), 1e-6).unwrap();
        assert_eq!(p.magnitude(), 1e-6);
        assert_eq!(p.phase(), 0.0);
    }

    #[test]
    fn to_polar_rejects_non_finite() {
        let err = to_polar(CartesianComplex::new(f64::NAN, 0.0), DEFAULT_EPS).unwrap_err();
        assert_eq!(err.to_string(), "non-finite complex value");
        assert!(to_polar(CartesianComplex::new(0.0, f64::INFINITY), DEFAULT_EPS).is_err());
    }

    #[test]
    fn from_polar_examples() {
        let z = from_polar(PolarComplex::new(1.0, 0.0));
        assert_eq!((z.re, z.im), (1.0, 0.0));

        let z = from_polar(PolarComplex::new(2.0, PI));
        assert_relative_eq!(z.re, -2.0, epsilon = 1e-12);
        assert_relative_eq!(z.im, 0.0, epsilon = 1e-12);

        // Direct evaluation of cos/sin at 100 degrees.
        let z = from_polar(PolarComplex::new(1.5, 100.0 * PI / 180.0));
        assert_relative_eq!(z.re, -0.260472, epsilon = 5e-5);
        assert_relative_eq!(z.im, 1.477212, epsilon = 5e-5);
    }

    #[test]
    fn polar_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p = PolarComplex::new(rng.random_range(0.01..10.0), rng.random_range(-PI..PI));
            let q = to_polar(from_polar(p), DEFAULT_EPS).unwrap();
            assert_relative_eq!(q.magnitude(), p.magnitude(), epsilon = 1e-12);
            assert_relative_eq!(q.phase(), p.phase(), epsilon = 1e-12);
        }
    }

    #[test]
    fn wrap_phase_examples() {
        assert_relative_eq!(wrap_phase(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        // Half-open interval: -pi wraps to +pi.
        assert_eq!(wrap_phase(-PI), PI);
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(0.25), 0.25);
        assert_relative_eq!(wrap_phase(7.0 * PI), PI, epsilon = 1e-12);
    }

    #[test]
    fn wrap_phase_idempotent_and_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100_000 {
            let theta = rng.random_range(-50.0..50.0);
            let w = wrap_phase(theta);
            assert!(w > -PI && w <= PI, "wrap({theta}) = {w} out of range");
            assert_eq!(wrap_phase(w), w);
        }
    }

    #[test]
    fn distance_examples() {
        let d = distance(
            PolarComplex::new(1.0, 0.0),
            PolarComplex::new(std::f64::consts::E.powi(2), 0.0),
        );
        assert_relative_eq!(d, 2.0, epsilon = 1e-12);

        let d = distance(PolarComplex::new(1.0, 0.0), PolarComplex::new(1.0, PI / 2.0));
        assert_relative_eq!(d, (PI / 2.0) * 2.0_f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(d, 2.221441, epsilon = 1e-6);
    }

    #[test]
    fn metric_axioms_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sample = |rng: &mut ChaCha8Rng| {
            PolarComplex::new(rng.random_range(0.1..8.0), rng.random_range(-PI..PI))
        };
        for _ in 0..10_000 {
            let (a, b, c) = (sample(&mut rng), sample(&mut rng), sample(&mut rng));
            let dab = distance(a, b);
            let dba = distance(b, a);
            assert!(dab >= 0.0);
            assert_relative_eq!(dab, dba, epsilon = 1e-12);
            assert!(dab <= distance(a, c) + distance(c, b) + 1e-12);
            assert_eq!(distance(a, a), 0.0);
        }
    }

    #[test]
    fn act_examples() {
        let p = PolarComplex::new(0.7, 1.1);
        let moved = act(GroupElement::identity(), p);
        assert_eq!(moved, p);

        // Scaled by 1.5 and rotated by 100 degrees.
        let g = GroupElement::new(1.5, 100.0 * PI / 180.0);
        let moved = act(g, PolarComplex::new(1.0, 0.0));
        assert_relative_eq!(moved.magnitude(), 1.5, epsilon = 1e-12);
        assert_relative_eq!(moved.phase(), 1.74533, epsilon = 1e-5);
    }

    #[test]
    fn action_compatibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let g = GroupElement::new(rng.random_range(0.2..4.0), rng.random_range(-PI..PI));
            let h = GroupElement::new(rng.random_range(0.2..4.0), rng.random_range(-PI..PI));
            let p = PolarComplex::new(rng.random_range(0.1..5.0), rng.random_range(-PI..PI));
            let lhs = act(g, act(h, p));
            let rhs = act(g.compose(&h), p);
            assert!(distance(lhs, rhs) < 1e-12);
        }
    }

    #[test]
    fn group_identity_and_inverse() {
        let g = GroupElement::new(2.5, 0.8);
        let id = g.compose(&g.inverse());
        assert_relative_eq!(id.scale(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(id.angle(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn transporter_reaches_target() {
        let a = PolarComplex::new(1.0, 0.0);
        assert_eq!(transporter(a, a), GroupElement::identity());

        let b = PolarComplex::new(2.0, PI / 2.0);
        let g = transporter(a, b);
        assert_eq!(g.scale(), 2.0);
        assert_eq!(g.angle(), PI / 2.0);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10_000 {
            let a = PolarComplex::new(rng.random_range(0.1..6.0), rng.random_range(-PI..PI));
            let b = PolarComplex::new(rng.random_range(0.1..6.0), rng.random_range(-PI..PI));
            let g = transporter(a, b);
            assert!(distance(act(g, a), b) < 1e-12);
        }
    }

    #[test]
    fn isometry_of_group_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut max_err: f64 = 0.0;
        for _ in 0..10_000 {
            let g = GroupElement::new(rng.random_range(0.25..4.0), rng.random_range(-PI..PI));
            let z1 = PolarComplex::new(rng.random_range(0.1..8.0), rng.random_range(-PI..PI));
            let z2 = PolarComplex::new(rng.random_range(0.1..8.0), rng.random_range(-PI..PI));
            let err = (distance(act(g, z1), act(g, z2)) - distance(z1, z2)).abs();
            max_err = max_err.max(err);
        }
        assert!(max_err < 1e-9, "isometry violated: max error {max_err}");
    }

    #[test]
    fn log_exp_examples() {
        let v = log_map(PolarComplex::new(1.0, 0.0));
        assert_eq!((v.d_logr, v.d_theta), (0.0, 0.0));

        let v = log_map(PolarComplex::new(std::f64::consts::E, PI / 3.0));
        assert_relative_eq!(v.d_logr, 1.0, epsilon = 1e-12);
        assert_relative_eq!(v.d_theta, PI / 3.0, epsilon = 1e-12);

        let p = exp_map(TangentVector::new(-1.0, 3.0 * PI / 2.0));
        assert_relative_eq!(p.magnitude(), 1.0 / std::f64::consts::E, epsilon = 1e-12);
        assert_relative_eq!(p.phase(), -PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn log_exp_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let p = PolarComplex::new(rng.random_range(0.05..20.0), rng.random_range(-PI..PI));
            let q = exp_map(log_map(p));
            assert_relative_eq!(q.magnitude(), p.magnitude(), epsilon = 1e-12);
            assert_relative_eq!(q.phase(), p.phase(), epsilon = 1e-12);
        }
    }

    #[test]
    fn chart_consistency_with_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..10_000 {
            let a = PolarComplex::new(rng.random_range(0.1..8.0), rng.random_range(-PI..PI));
            let b = PolarComplex::new(rng.random_range(0.1..8.0), rng.random_range(-PI..PI));
            let (va, vb) = (log_map(a), log_map(b));
            let dlr = vb.d_logr - va.d_logr;
            let dth = 2.0_f64.sqrt() * wrap_phase(vb.d_theta - va.d_theta);
            let chart = (dlr * dlr + dth * dth).sqrt();
            assert_relative_eq!(chart, distance(a, b), epsilon = 1e-12);
        }
    }

    #[test]
    fn geodesic_endpoints_exact() {
        let a = PolarComplex::new(0.37, 2.9);
        let b = PolarComplex::new(5.1, -2.8);
        assert_eq!(geodesic_interpolate(a, b, 0.0), a);
        assert_eq!(geodesic_interpolate(a, b, 1.0), b);
    }

    #[test]
    fn geodesic_midpoint_pure_magnitude() {
        let a = PolarComplex::new(1.0, 0.0);
        let b = PolarComplex::new(std::f64::consts::E.powi(2), 0.0);
        let m = geodesic_interpolate(a, b, 0.5);
        assert_relative_eq!(m.magnitude(), std::f64::consts::E, epsilon = 1e-12);
        assert_eq!(m.phase(), 0.0);
    }

    #[test]
    fn geodesic_crosses_branch_cut_on_shortest_arc() {
        let a = PolarComplex::new(1.0, 3.0 * PI / 4.0);
        let b = PolarComplex::new(1.0, -3.0 * PI / 4.0);
        let m = geodesic_interpolate(a, b, 0.5);
        assert_relative_eq!(m.magnitude(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(m.phase(), PI, epsilon = 1e-12);

        // Brute-force the Frechet midpoint over a fine phase grid.
        let n = 400_001usize;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..n {
            let theta = -PI + 2.0 * PI * (i as f64 + 1.0) / n as f64;
            let x = PolarComplex::new(1.0, theta);
            let obj = distance(x, a).powi(2) + distance(x, b).powi(2);
            if obj < best.0 {
                best = (obj, theta);
            }
        }
        assert!(
            wrap_phase(best.1 - m.phase()).abs() < 2.0 * PI / (n as f64 - 1.0) * 2.0,
            "grid minimizer {} disagrees with geodesic midpoint {}",
            best.1,
            m.phase()
        );
    }

    #[test]
    fn antipodal_tie_is_deterministic() {
        // Exactly antipodal phases: the positive direction is chosen.
        let a = PolarComplex::new(1.0, 0.0);
        let b = PolarComplex::new(1.0, PI);
        let m = geodesic_interpolate(a, b, 0.5);
        assert_relative_eq!(m.phase(), PI / 2.0, epsilon = 1e-15);
    }
}
