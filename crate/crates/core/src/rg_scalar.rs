//! Closed two-scalar RG flows for the gasket, the MK3 lattice and the line,
//! plus the exact solution of the line flow.

use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::precision::Field;
use crate::Family;

/// Iteration halts with [`FlowStatus::Diverged`] once `|a|` or `|b|` exceeds this.
pub const DIVERGENCE_BOUND: f64 = 1e100;

/// Agreement required between the closed form at `N = 2` and `(a₁, b₁)`.
pub const BRANCH_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("{family} flow denominator of {which}' vanishes at a = {a}, b = {b}")]
    Singular { family: Family, which: &'static str, a: Complex64, b: Complex64 },
    #[error("family {0} requires a coin angle eta")]
    MissingEta(Family),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedFormError {
    #[error("system size {0} must be a power of two ≥ 2")]
    InvalidSize(u64),
    #[error("coin angle {0} is degenerate for the closed form (sin η or cos η vanishes)")]
    DegenerateAngle(f64),
    #[error("cos(Nν + σ) vanishes: z = {z} is a pole of the closed-form solution")]
    PoleOfSolution { z: Complex64 },
    #[error("neither branch reproduces the initial flow at z = {z} (mismatch {mismatch:.3e})")]
    BranchMismatch { z: Complex64, mismatch: f64 },
}

fn check_den<F: Field>(den: &F, family: Family, which: &'static str, a: &F, b: &F) -> Result<(), FlowError> {
    if den.is_zero() || !den.is_finite() {
        return Err(FlowError::Singular { family, which, a: a.to_c64(), b: b.to_c64() });
    }
    Ok(())
}

/// One step of the gasket flow at Laplace variable `z`.
pub fn dsg_step<F: Field>(a: &F, b: &F, z: &F) -> Result<(F, F), FlowError> {
    let k = |x: f64| z.real_like(x);
    let (a, b, z) = (a.clone(), b.clone(), z.clone());
    let z2 = z.clone() * z.clone();
    let z3 = z2.clone() * z.clone();
    let ab = a.clone() * b.clone();
    let b2 = b.clone() * b.clone();
    let p = k(3.0) * z.clone() - k(1.0); // 3z − 1
    let m = k(3.0) - z.clone(); // 3 − z
    let q = k(3.0) * z2.clone() + k(1.0); // 3z² + 1
    let r = k(3.0) + z2.clone(); // 3 + z²
    let a_m2b = a.clone() - k(2.0) * b.clone();
    let two_a_mb = k(2.0) * a.clone() - b.clone();
    let cubic = |c3: f64, c2: f64, c1: f64, c0: f64| {
        k(c3) * z3.clone() + k(c2) * z2.clone() + k(c1) * z.clone() + k(c0)
    };

    let na = k(3.0) * p.clone() * ab.clone() + m.clone() * a_m2b.clone();
    let da = k(3.0) * m.clone() - p.clone() * two_a_mb.clone();
    let nb = k(3.0) * p.clone() * q.clone() * ab.clone() * b.clone()
        + k(2.0) * cubic(3.0, -3.0, 7.0, -3.0) * b2.clone()
        - k(4.0) * cubic(3.0, -6.0, 4.0, -3.0) * ab.clone()
        - m.clone() * r.clone() * a_m2b;
    let db = p * q * two_a_mb * b.clone() - k(2.0) * cubic(3.0, -7.0, 3.0, -3.0) * a.clone()
        + k(4.0) * cubic(3.0, -4.0, 6.0, -3.0) * b.clone()
        + k(3.0) * m * r;
    check_den(&da, Family::Dsg, "a", &a, &b)?;
    check_den(&db, Family::Dsg, "b", &a, &b)?;
    Ok((na / da, nb / db))
}

/// One step of the MK3 flow; `z` enters only through the initial values.
pub fn mk3_step<F: Field>(a: &F, b: &F) -> Result<(F, F), FlowError> {
    let k = |x: f64| a.real_like(x);
    let (a, b) = (a.clone(), b.clone());
    let a2 = a.clone() * a.clone();
    let a3 = a2.clone() * a.clone();
    let b2 = b.clone() * b.clone();
    let ab = a.clone() * b.clone();
    let a2b = a2.clone() * b.clone();
    let a3b = a3.clone() * b.clone();
    let ab2 = a.clone() * b2.clone();
    let a2b2 = a2.clone() * b2.clone();
    let a3b2 = a3.clone() * b2.clone();

    let na = k(-9.0) * a.clone() + k(5.0) * a3.clone() + k(9.0) * b.clone() + k(3.0) * ab.clone()
        - k(17.0) * a2b.clone()
        - k(3.0) * a3b.clone()
        + k(3.0) * b2.clone()
        + k(14.0) * ab2.clone()
        - k(3.0) * a2b2.clone()
        - k(18.0) * a3b2;
    let da = k(-18.0) - k(3.0) * a.clone() + k(14.0) * a2.clone() + k(3.0) * a3.clone() - k(3.0) * b.clone()
        - k(17.0) * ab.clone()
        + k(3.0) * a2b.clone()
        + k(9.0) * a3b
        + k(5.0) * b2.clone()
        - k(9.0) * a2b2.clone();
    let nb = k(-3.0) * a.clone() - a2.clone() + k(3.0) * b.clone() + k(4.0) * ab.clone() - k(3.0) * a2b.clone()
        - b2.clone()
        + k(3.0) * ab2.clone()
        + k(6.0) * a2b2;
    let db = k(6.0) + k(3.0) * a.clone() - a2 - k(3.0) * b.clone() + k(4.0) * ab + k(3.0) * a2b - b2 - k(3.0) * ab2;
    check_den(&da, Family::Mk3, "a", &a, &b)?;
    check_den(&db, Family::Mk3, "b", &a, &b)?;
    Ok((na / da, nb / db))
}

/// One step of the line flow with coin angle `eta`.
pub fn line_step<F: Field>(a: &F, b: &F, eta: f64) -> Result<(F, F), FlowError> {
    let (s, c) = eta.sin_cos();
    let (s, c) = (a.real_like(s), a.real_like(c));
    let den = a.real_like(1.0) - a.real_like(2.0) * c.clone() * b.clone() + b.clone() * b.clone();
    check_den(&den, Family::Line, "a,b", a, b)?;
    let a2d = a.clone() * a.clone() / den;
    Ok((s * a2d.clone(), b.clone() + (b.clone() - c) * a2d))
}

/// Scalar RG state `(a_k, b_k)` at Laplace variable `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RGPoint {
    pub family: Family,
    pub a: Complex64,
    pub b: Complex64,
    pub z: Complex64,
    pub k: u32,
    pub eta: Option<f64>,
}

/// Index of the first stored step: the line flow starts from `(a₁, b₁)`.
pub fn first_step(family: Family) -> u32 {
    match family {
        Family::Line => 1,
        _ => 0,
    }
}

/// Initial values `(a, b)` at [`first_step`]. The line starts at
/// `(z² sin η, z² cos η)`, the others at `(z, z)`.
pub fn initial_scalars<F: Field>(family: Family, z: &F, eta: Option<f64>) -> Result<(F, F), FlowError> {
    match family {
        Family::Dsg | Family::Mk3 => Ok((z.clone(), z.clone())),
        Family::Line => {
            let eta = eta.ok_or(FlowError::MissingEta(family))?;
            let z2 = z.clone() * z.clone();
            Ok((z2.clone() * z.real_like(eta.sin()), z2 * z.real_like(eta.cos())))
        }
    }
}

/// One step of `family`'s flow.
pub fn step<F: Field>(family: Family, a: &F, b: &F, z: &F, eta: Option<f64>) -> Result<(F, F), FlowError> {
    match family {
        Family::Dsg => dsg_step(a, b, z),
        Family::Mk3 => mk3_step(a, b),
        Family::Line => line_step(a, b, eta.ok_or(FlowError::MissingEta(family))?),
    }
}

/// `(a_k, b_k)` at step `k` (for the line, `N = 2^k`). `k` below
/// [`first_step`] returns the initial values.
pub fn scalars_at<F: Field>(family: Family, z: &F, eta: Option<f64>, k: u32) -> Result<(F, F), FlowError> {
    let (mut a, mut b) = initial_scalars(family, z, eta)?;
    for _ in first_step(family)..k {
        (a, b) = step(family, &a, &b, z, eta)?;
    }
    Ok((a, b))
}

/// Fixed point `(a*, b*)` at `z = 1`.
pub fn fixed_point(family: Family, eta: Option<f64>) -> Result<(Complex64, Complex64), FlowError> {
    match family {
        Family::Dsg | Family::Mk3 => Ok((Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0))),
        Family::Line => {
            let (s, c) = eta.ok_or(FlowError::MissingEta(family))?.sin_cos();
            Ok((Complex64::new(s, 0.0), Complex64::new(c, 0.0)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlowStatus {
    Completed,
    /// `|a|` or `|b|` exceeded [`DIVERGENCE_BOUND`] at this step.
    Diverged { k: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub family: Family,
    pub z: Complex64,
    pub eta: Option<f64>,
    pub points: Vec<RGPoint>,
    pub status: FlowStatus,
}

/// Iterates from the initial values up to step `k_max`, storing every step.
pub fn flow_trace(family: Family, z: Complex64, eta: Option<f64>, k_max: u32) -> Result<FlowTrace, FlowError> {
    let (mut a, mut b) = initial_scalars(family, &z, eta)?;
    let k0 = first_step(family);
    let point = |k, a, b| RGPoint { family, a, b, z, k, eta };
    let mut trace = FlowTrace { family, z, eta, points: vec![point(k0, a, b)], status: FlowStatus::Completed };
    for k in k0 + 1..=k_max {
        (a, b) = step(family, &a, &b, &z, eta)?;
        let bad = |v: Complex64| !v.is_finite() || v.norm() > DIVERGENCE_BOUND;
        if bad(a) || bad(b) {
            trace.status = FlowStatus::Diverged { k };
            break;
        }
        trace.points.push(point(k, a, b));
    }
    Ok(trace)
}

impl FlowTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,re_a,im_a,re_b,im_b\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{:.16e},{:.16e},{:.16e},{:.16e}", p.k, p.a.re, p.a.im, p.b.re, p.b.im);
        }
        s
    }

    pub fn last(&self) -> &RGPoint {
        self.points.last().expect("trace holds at least the initial point")
    }
}

/// Which sign of `cos σ = ±√(1 − sin²σ)` matched the initial flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaBranch {
    Principal,
    Alternate,
}

/// Parameters of the exact line solution at one `(z, η)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormParams {
    pub nu: Complex64,
    pub sigma: Complex64,
    pub sin_sigma: Complex64,
    pub cos_sigma: Complex64,
    /// `ln e^{2iν}`, principal branch.
    pub log_q: Complex64,
    pub eta: f64,
    pub n: u64,
    pub branch: SigmaBranch,
}

impl ClosedFormParams {
    /// `e^{iNν}`, computed in the log domain.
    fn q_half_n(&self) -> Complex64 {
        (self.log_q * (self.n as f64 / 2.0)).exp()
    }

    /// `tan(Nν/2) = −i(Q − 1)/(Q + 1)` with `Q = e^{iNν}`, stable for large `|Q|`.
    pub fn tan_half_n_nu(&self) -> Complex64 {
        let i = Complex64::i();
        let lq = self.log_q * (self.n as f64 / 2.0);
        if lq.re >= 0.0 {
            let inv = (-lq).exp();
            -i * (1.0 - inv) / (1.0 + inv)
        } else {
            let q = lq.exp();
            -i * (q - 1.0) / (q + 1.0)
        }
    }
}

fn closed_form_eval(
    z: Complex64,
    eta: f64,
    n: u64,
    cos_sign: f64,
) -> Result<(Complex64, Complex64, ClosedFormParams), ClosedFormError> {
    let i = Complex64::i();
    let (s, c) = eta.sin_cos();
    let ct = c / s;
    let w = 1.0 / (z * z);
    let p = 1.0 - w;
    let sin_sigma = i * (w + 1.0 + p * ct * ct) / (2.0 * w * ct);
    let cos_sigma = cos_sign * (1.0 - sin_sigma * sin_sigma).sqrt();
    let sin_2nu = -i * p * ct * cos_sigma;
    let cos_2nu = w - i * p * ct * sin_sigma;
    let log_q = (cos_2nu + i * sin_2nu).ln();
    let e0 = cos_sigma + i * sin_sigma;
    let half = log_q * (n as f64 / 2.0);
    let (a, bmc) = if half.re >= 0.0 {
        // |Q| ≥ 1 with Q = e^{iNν} = e^{(N/2)L}
        let u = (-(log_q * n as f64)).exp();
        let den = e0 + u / e0;
        if den.norm() == 0.0 {
            return Err(ClosedFormError::PoleOfSolution { z });
        }
        (2.0 * cos_sigma * s * (-half).exp() / den, s * (1.0 - u) / den)
    } else {
        let v = (log_q * n as f64).exp();
        let den = v * e0 + 1.0 / e0;
        if den.norm() == 0.0 {
            return Err(ClosedFormError::PoleOfSolution { z });
        }
        (2.0 * cos_sigma * s * half.exp() / den, s * (v - 1.0) / den)
    };
    if !(a.is_finite() && bmc.is_finite()) {
        return Err(ClosedFormError::PoleOfSolution { z });
    }
    let sigma = -i * (i * sin_sigma + cos_sigma).ln();
    let params = ClosedFormParams {
        nu: -i * log_q / 2.0,
        sigma,
        sin_sigma,
        cos_sigma,
        log_q,
        eta,
        n,
        branch: if cos_sign > 0.0 { SigmaBranch::Principal } else { SigmaBranch::Alternate },
    };
    Ok((a, bmc + c, params))
}

/// Exact `(a, b)` of the line flow for a ring of `n = 2^k` sites:
/// `a = cos σ·sin η / cos(Nν + σ)`, `b = cos η + i·sin(Nν)·sin η / cos(Nν + σ)`.
/// The branch of `σ` is the first one that reproduces `(z² sin η, z² cos η)`
/// at `N = 2`.
pub fn line_closed_form(
    n: u64,
    z: Complex64,
    eta: f64,
) -> Result<(Complex64, Complex64, ClosedFormParams), ClosedFormError> {
    if n < 2 || !n.is_power_of_two() {
        return Err(ClosedFormError::InvalidSize(n));
    }
    let (s, c) = eta.sin_cos();
    if s.abs() < 1e-15 || c.abs() < 1e-15 {
        return Err(ClosedFormError::DegenerateAngle(eta));
    }
    let zero = Complex64::new(0.0, 0.0);
    if z == zero {
        let params = ClosedFormParams {
            nu: zero,
            sigma: zero,
            sin_sigma: zero,
            cos_sigma: zero,
            log_q: zero,
            eta,
            n,
            branch: SigmaBranch::Principal,
        };
        return Ok((zero, zero, params));
    }
    let target = (z * z * s, z * z * c);
    let mut mismatch = f64::INFINITY;
    for sign in [1.0, -1.0] {
        let Ok((a1, b1, _)) = closed_form_eval(z, eta, 2, sign) else { continue };
        let scale = 1.0f64.max(target.0.norm()).max(target.1.norm());
        let err = (a1 - target.0).norm().max((b1 - target.1).norm());
        if err <= BRANCH_MATCH_TOL * scale {
            return closed_form_eval(z, eta, n, sign);
        }
        mismatch = mismatch.min(err);
    }
    Err(ClosedFormError::BranchMismatch { z, mismatch })
}

/// `e^{iNν}` of a solution; exposed for pole analysis.
pub fn closed_form_phase(params: &ClosedFormParams) -> Complex64 {
    params.q_half_n()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::BigComplex;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn fixed_points() {
        let one = c(1.0, 0.0);
        let (a, b) = dsg_step(&one, &one, &one).unwrap();
        assert!((a - one).norm() < 1e-14 && (b - one).norm() < 1e-14);
        let (a, b) = mk3_step(&one, &one).unwrap();
        assert!((a - one).norm() < 1e-14 && (b - one).norm() < 1e-14);
        for eta in [FRAC_PI_4, FRAC_PI_3, 0.4] {
            let (s, co) = fixed_point(Family::Line, Some(eta)).unwrap();
            let (a, b) = line_step(&s, &co, eta).unwrap();
            assert!((a - s).norm() < 1e-14 && (b - co).norm() < 1e-14);
        }
    }

    #[test]
    fn mk3_regression_at_half() {
        let h = c(0.5, 0.0);
        let (a, b) = mk3_step(&h, &h).unwrap();
        assert!((a - c(-0.04113924050632911, 0.0)).norm() < 1e-15);
        assert!((b - c(0.1346153846153846, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn line_step_with_zero_a() {
        let (a, b) = line_step(&c(0.0, 0.0), &c(0.3, 0.2), 0.7).unwrap();
        assert_eq!(a, c(0.0, 0.0));
        assert_eq!(b, c(0.3, 0.2));
    }

    #[test]
    fn singular_denominator_is_reported() {
        // at z = 1 the a-denominator is 6 − 2(2a − b), zero for (a, b) = (2, 1)
        let one = c(1.0, 0.0);
        let err = dsg_step(&c(2.0, 0.0), &one, &one).unwrap_err();
        assert!(matches!(err, FlowError::Singular { family: Family::Dsg, which: "a", .. }));
        assert!(matches!(mk3_step(&one, &c(f64::NAN, 0.0)), Err(FlowError::Singular { .. })));
    }

    #[test]
    fn dsg_flow_stays_finite_near_unit_circle() {
        let z = Complex64::from_polar(1.0, 0.05);
        let trace = flow_trace(Family::Dsg, z, None, 10).unwrap();
        assert_eq!(trace.status, FlowStatus::Completed);
        assert_eq!(trace.points.len(), 11);
        assert!(trace.points.iter().all(|p| p.a.is_finite() && p.b.is_finite()));
    }

    #[test]
    fn divergence_is_a_status() {
        let trace = flow_trace(Family::Mk3, c(3.0, 0.5), None, 60).unwrap();
        assert!(matches!(trace.status, FlowStatus::Diverged { .. }) || trace.points.len() == 61);
    }

    #[test]
    fn closed_form_special_values() {
        for eta in [FRAC_PI_4, FRAC_PI_3] {
            for n in [2u64, 8, 64] {
                let (a, b, _) = line_closed_form(n, c(1.0, 0.0), eta).unwrap();
                assert!((a - eta.sin()).norm() < 1e-12 && (b - eta.cos()).norm() < 1e-12);
            }
        }
        let z = c(0.6, 0.3);
        let (_, _, p) = line_closed_form(16, z, FRAC_PI_4).unwrap();
        assert!((p.sin_sigma - Complex64::i() * z * z).norm() < 1e-14);
        assert_eq!(p.branch, SigmaBranch::Principal);
        assert!(line_closed_form(12, z, FRAC_PI_4).is_err());
        assert!(line_closed_form(16, z, std::f64::consts::FRAC_PI_2).is_err());
    }

    #[test]
    fn closed_form_matches_iteration() {
        let z = c(0.7, -0.4);
        for eta in [FRAC_PI_4, FRAC_PI_3] {
            let trace = flow_trace(Family::Line, z, Some(eta), 12).unwrap();
            for p in &trace.points {
                let (a, b, _) = line_closed_form(1 << p.k, z, eta).unwrap();
                assert!((a - p.a).norm() < 1e-12, "k={} {a} vs {}", p.k, p.a);
                assert!((b - p.b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_small_z_does_not_overflow() {
        let (a, b, _) = line_closed_form(4096, c(1e-3, 2e-3), FRAC_PI_4).unwrap();
        assert!(a.is_finite() && b.is_finite());
        assert!(a.norm() < 1e-100);
    }

    #[test]
    fn extended_precision_flow_agrees() {
        let z = c(0.8, 0.1);
        let (a, b) = scalars_at(Family::Dsg, &z, None, 5).unwrap();
        let zb = BigComplex::from_c64(z, 200);
        let (ab, bb) = scalars_at(Family::Dsg, &zb, None, 5).unwrap();
        assert!((ab.to_c64() - a).norm() < 1e-12 * a.norm().max(1.0));
        assert!((bb.to_c64() - b).norm() < 1e-12 * b.norm().max(1.0));
    }

    #[test]
    fn trace_csv_has_header() {
        let t = flow_trace(Family::Mk3, c(0.5, 0.0), None, 2).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("k,re_a,im_a,re_b,im_b\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
