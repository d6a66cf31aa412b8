//! Linearization of the scalar flows at their fixed points and the scaling
//! exponents that follow from the eigenvalues.

use num_complex::Complex64;

use super::AnalysisError;
use crate::rg_scalar::{fixed_point, step};
use crate::Family;

/// Central-difference steps combined by Richardson extrapolation.
pub const DIFF_STEPS: [f64; 3] = [1e-4, 5e-5, 2.5e-5];

/// Allowed drift of the fixed point under one flow step.
pub const FIXED_POINT_TOL: f64 = 1e-12;

/// Coin angle used for the line when none is given.
pub const DEFAULT_LINE_ETA: f64 = std::f64::consts::FRAC_PI_4;

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianResult {
    pub family: Family,
    pub lambda1: f64,
    pub lambda2: f64,
    pub a_star: Complex64,
    pub b_star: Complex64,
    pub z_star: Complex64,
    pub eta: Option<f64>,
    /// Row-major `∂(a', b')/∂(a, b)`.
    pub jacobian: [[f64; 2]; 2],
    pub steps: Vec<f64>,
    pub method: String,
}

fn richardson(d: [f64; 3]) -> f64 {
    // O(h²) central differences at h, h/2, h/4
    let r1 = (4.0 * d[1] - d[0]) / 3.0;
    let r2 = (4.0 * d[2] - d[1]) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

/// Eigenvalues of the one-step flow Jacobian at the fixed point `z* = 1`,
/// ordered `λ1 ≥ λ2`.
pub fn jacobian_eigs(family: Family, eta: Option<f64>) -> Result<JacobianResult, AnalysisError> {
    let eta = match family {
        Family::Line => Some(eta.unwrap_or(DEFAULT_LINE_ETA)),
        _ => None,
    };
    let z = Complex64::new(1.0, 0.0);
    let (a0, b0) = fixed_point(family, eta)?;
    let (a1, b1) = step(family, &a0, &b0, &z, eta)?;
    let drift = (a1 - a0).norm().max((b1 - b0).norm());
    if !(drift <= FIXED_POINT_TOL) {
        return Err(AnalysisError::FixedPointDrift { family, drift });
    }

    let mut jac = [[0.0; 2]; 2];
    for (col, dir) in [(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)), (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))]
        .into_iter()
        .enumerate()
    {
        let mut da = [0.0; 3];
        let mut db = [0.0; 3];
        for (i, &h) in DIFF_STEPS.iter().enumerate() {
            let (ap, bp) = step(family, &(a0 + dir.0 * h), &(b0 + dir.1 * h), &z, eta)?;
            let (am, bm) = step(family, &(a0 - dir.0 * h), &(b0 - dir.1 * h), &z, eta)?;
            da[i] = ((ap - am) / (2.0 * h)).re;
            db[i] = ((bp - bm) / (2.0 * h)).re;
        }
        jac[0][col] = richardson(da);
        jac[1][col] = richardson(db);
    }

    let tr = jac[0][0] + jac[1][1];
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc < -1e-9 * tr.abs().max(1.0) {
        return Err(AnalysisError::ComplexEigenvalues { family });
    }
    let root = disc.max(0.0).sqrt();
    Ok(JacobianResult {
        family,
        lambda1: tr / 2.0 + root,
        lambda2: tr / 2.0 - root,
        a_star: a0,
        b_star: b0,
        z_star: z,
        eta,
        jacobian: jac,
        steps: DIFF_STEPS.to_vec(),
        method: "central differences with Richardson extrapolation".into(),
    })
}

/// `d_f = log_b λ1`, `d_w = log_b √(λ1 λ2)`.
pub fn exponents(lambda1: f64, lambda2: f64, base: f64) -> Result<(f64, f64), AnalysisError> {
    if !(lambda1 > 0.0 && lambda2 > 0.0) || !(base > 1.0) || !lambda1.is_finite() || !lambda2.is_finite() {
        return Err(AnalysisError::InvalidInput(format!(
            "exponents need λ1, λ2 > 0 and b > 1 (got {lambda1}, {lambda2}, {base})"
        )));
    }
    let lb = base.ln();
    Ok((lambda1.ln() / lb, (lambda1 * lambda2).sqrt().ln() / lb))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalingSourceKind {
    Eigenvalues,
    PoleFit,
    SimulationFit,
}

impl ScalingSourceKind {
    pub fn name(self) -> &'static str {
        match self {
            ScalingSourceKind::Eigenvalues => "eigenvalues",
            ScalingSourceKind::PoleFit => "pole_fit",
            ScalingSourceKind::SimulationFit => "simulation_fit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSource {
    pub kind: ScalingSourceKind,
    pub d_f: Option<f64>,
    pub d_w: Option<f64>,
    pub uncertainty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub family: Family,
    pub base: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub d_f: f64,
    pub d_w: f64,
    pub sources: Vec<ScalingSource>,
}

impl ScalingReport {
    /// Report built from the Jacobian eigenvalues with the family's length
    /// rescaling factor.
    pub fn from_eigenvalues(jac: &JacobianResult) -> Result<Self, AnalysisError> {
        let base = jac.family.rescaling_base();
        let (d_f, d_w) = exponents(jac.lambda1, jac.lambda2, base)?;
        Ok(Self {
            family: jac.family,
            base,
            lambda1: jac.lambda1,
            lambda2: jac.lambda2,
            d_f,
            d_w,
            sources: vec![ScalingSource {
                kind: ScalingSourceKind::Eigenvalues,
                d_f: Some(d_f),
                d_w: Some(d_w),
                uncertainty: None,
            }],
        })
    }

    /// Adds `d_w = log_b(ratio)` from a per-step smallest-pole-angle ratio.
    pub fn add_pole_fit(&mut self, ratio: f64, uncertainty: Option<f64>) {
        self.sources.push(ScalingSource {
            kind: ScalingSourceKind::PoleFit,
            d_f: None,
            d_w: Some(ratio.ln() / self.base.ln()),
            uncertainty,
        });
    }

    /// Adds `d_w = x·d_f` from a fitted period exponent `x = d_w/d_f`.
    pub fn add_simulation_fit(&mut self, exponent: f64, uncertainty: Option<f64>) {
        self.sources.push(ScalingSource {
            kind: ScalingSourceKind::SimulationFit,
            d_f: None,
            d_w: Some(exponent * self.d_f),
            uncertainty: uncertainty.map(|u| u * self.d_f),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dsg_eigenvalues() {
        let j = jacobian_eigs(Family::Dsg, None).unwrap();
        assert!((j.lambda1 - 3.0).abs() < 1e-6, "{}", j.lambda1);
        assert!((j.lambda2 - 5.0 / 3.0).abs() < 1e-6, "{}", j.lambda2);
    }

    #[test]
    fn mk3_eigenvalues() {
        let j = jacobian_eigs(Family::Mk3, None).unwrap();
        assert!((j.lambda1 - 7.0).abs() < 1e-6 && (j.lambda2 - 3.0).abs() < 1e-6);
    }

    #[test]
    fn line_eigenvalues() {
        let j = jacobian_eigs(Family::Line, None).unwrap();
        assert!((j.lambda1 - 2.0).abs() < 1e-6 && (j.lambda2 - 2.0).abs() < 1e-6);
        assert_eq!(j.eta, Some(DEFAULT_LINE_ETA));
    }

    #[test]
    fn exponent_values() {
        let (df, dw) = exponents(3.0, 5.0 / 3.0, 2.0).unwrap();
        assert!((df - 3f64.log2()).abs() < 1e-15 && (dw - 5f64.sqrt().log2()).abs() < 1e-15);
        let (df, dw) = exponents(7.0, 3.0, 4.0).unwrap();
        assert!((df - 7f64.ln() / 4f64.ln()).abs() < 1e-15 && (dw - 21f64.ln() / 16f64.ln()).abs() < 1e-15);
        assert_eq!(exponents(2.0, 2.0, 2.0).unwrap(), (1.0, 1.0));
        assert!(exponents(-1.0, 2.0, 2.0).is_err());
        assert!(exponents(2.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn report_sources() {
        let j = jacobian_eigs(Family::Dsg, None).unwrap();
        let mut r = ScalingReport::from_eigenvalues(&j).unwrap();
        r.add_pole_fit(5f64.sqrt(), None);
        r.add_simulation_fit(5f64.sqrt().ln() / 3f64.ln(), Some(0.01));
        let dw: Vec<f64> = r.sources.iter().map(|s| s.d_w.unwrap()).collect();
        assert!(dw.iter().all(|v| (v - r.d_w).abs() < 1e-6), "{dw:?}");
    }
}
