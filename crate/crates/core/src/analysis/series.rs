//! Expansion coefficients in `ζ = z − 1` of the flow scalars and of the
//! return amplitude, extracted by trapezoidal Cauchy integrals on a small
//! circle around `z = 1`.

use num_complex::Complex64;
use rayon::prelude::*;

use super::amplitude::amplitude;
use super::{reference_eigenvalues, AnalysisError};
use crate::precision::{half_offset_roots_of_unity, BigComplex, Field};
use crate::rg_scalar::scalars_at;
use crate::Family;

/// Cancellation (in bits) above which [`PrecisionMode::Auto`] switches to
/// extended precision.
pub const AUTO_EXTENDED_THRESHOLD_BITS: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecisionMode {
    /// Double precision unless the expected loss exceeds the threshold or the
    /// two-radius check fails.
    Auto,
    Double,
    /// Fixed significand width in bits.
    Extended { bits: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    /// Trapezoid nodes on the circle (power of two).
    pub nodes: usize,
    /// Circle radius; the default is `0.1/λ1^k` (`0.5/N` for the line).
    pub radius: Option<f64>,
    pub mode: PrecisionMode,
    /// Largest accepted disagreement between radii `r` and `r/2`, measured
    /// relative to the size of the function on the circle.
    pub consistency_tol: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { nodes: 64, radius: None, mode: PrecisionMode::Auto, consistency_tol: 1e-6 }
    }
}

/// Laurent coefficients `c_n` for `n = min_order ..`.
#[derive(Debug, Clone, PartialEq)]
pub struct Laurent {
    pub min_order: i32,
    pub coeffs: Vec<Complex64>,
}

impl Laurent {
    pub fn get(&self, n: i32) -> Complex64 {
        let idx = n - self.min_order;
        assert!(idx >= 0 && (idx as usize) < self.coeffs.len(), "order {n} not extracted");
        self.coeffs[idx as usize]
    }

    pub fn max_order(&self) -> i32 {
        self.min_order + self.coeffs.len() as i32 - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFit {
    pub family: Family,
    pub k: u32,
    pub eta: Option<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Orders 0..=3 of `a_k(1+ζ)`.
    pub a: Laurent,
    /// Orders 0..=3 of `b_k(1+ζ)`.
    pub b: Laurent,
    /// Orders −1..=2 of `[X_k]₁₁`.
    pub x11: Laurent,
    /// Orders −1..=2 of `[X_k]₁₂`.
    pub x12: Laurent,
    /// `𝒜 = α_k^{(1)}/λ1^k`.
    pub cal_a: Complex64,
    /// `ℬ = β_k^{(1)}/λ2^k`.
    pub cal_b: Complex64,
    /// `α_k^{(2)}/(𝒜λ1^k)²`.
    pub alpha2_ratio: Complex64,
    pub radius: f64,
    pub nodes: usize,
    /// Significand bits used (53 for double precision).
    pub precision_bits: usize,
    /// Disagreement between radii `r` and `r/2`.
    pub consistency: f64,
}

/// Bits of cancellation expected at step `k`: `k·log₂λ1`.
pub fn expected_loss_bits(family: Family, k: u32) -> f64 {
    k as f64 * reference_eigenvalues(family).0.log2()
}

/// Extended width used for step `k`: double precision plus the expected loss
/// plus a safety margin.
pub fn extended_bits(family: Family, k: u32) -> usize {
    (53.0 + expected_loss_bits(family, k) + 10.0).ceil() as usize + 64
}

pub fn default_radius(family: Family, k: u32) -> f64 {
    match family {
        Family::Line => 0.5 / 2f64.powi(k as i32),
        _ => 0.1 / reference_eigenvalues(family).0.powi(k as i32),
    }
}

struct Raw {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    x11: Vec<Complex64>,
    x12: Vec<Complex64>,
}

/// Weighted sums `Σ_j f_j u_j^{−n}` for the requested orders, in the working field.
fn moment_sums<F: Field>(vals: &[F], units: &[F], orders: std::ops::RangeInclusive<i32>) -> Vec<Complex64> {
    orders
        .map(|n| {
            let mut acc = F::zero();
            for (f, u) in vals.iter().zip(units) {
                let w = if n >= 0 { u.conj() } else { u.clone() };
                let mut p = F::one();
                for _ in 0..n.unsigned_abs() {
                    p = p * w.clone();
                }
                acc = acc + f.clone() * p;
            }
            acc.to_c64()
        })
        .collect()
}

fn sample<F: Field>(family: Family, k: u32, eta: Option<f64>, units: &[F], r: f64) -> Result<Raw, AnalysisError> {
    let evals: Vec<Result<(F, F, F, F), AnalysisError>> = units
        .par_iter()
        .map(|u| {
            let zeta = u.clone() * u.real_like(r);
            let z = u.real_like(1.0) + zeta;
            let (a, b) = scalars_at(family, &z, eta, k)?;
            let x = amplitude(family, k, &z, eta)?;
            Ok((a, b, x.get(0, 0).clone(), x.get(0, 1).clone()))
        })
        .collect();
    let mut av = Vec::with_capacity(units.len());
    let mut bv = Vec::with_capacity(units.len());
    let mut x11 = Vec::with_capacity(units.len());
    let mut x12 = Vec::with_capacity(units.len());
    for e in evals {
        let (a, b, p, q) = e?;
        av.push(a);
        bv.push(b);
        x11.push(p);
        x12.push(q);
    }
    let m = units.len() as f64;
    let scale = |sums: Vec<Complex64>, lo: i32| -> Vec<Complex64> {
        sums.into_iter().enumerate().map(|(i, s)| s / m * r.powi(-(lo + i as i32))).collect()
    };
    Ok(Raw {
        a: scale(moment_sums(&av, units, 0..=3), 0),
        b: scale(moment_sums(&bv, units, 0..=3), 0),
        x11: scale(moment_sums(&x11, units, -1..=2), -1),
        x12: scale(moment_sums(&x12, units, -1..=2), -1),
    })
}

fn sample_in(
    family: Family,
    k: u32,
    eta: Option<f64>,
    nodes: usize,
    r: f64,
    bits: Option<usize>,
) -> Result<Raw, AnalysisError> {
    match bits {
        None => {
            let units: Vec<Complex64> = (0..nodes)
                .map(|j| Complex64::from_polar(1.0, std::f64::consts::PI * (2 * j + 1) as f64 / nodes as f64))
                .collect();
            sample(family, k, eta, &units, r)
        }
        Some(bits) => {
            let units: Vec<BigComplex> = half_offset_roots_of_unity(nodes, bits);
            sample(family, k, eta, &units, r)
        }
    }
}

fn mismatch(r: f64, c1: &[Complex64], c2: &[Complex64], lo: i32) -> f64 {
    let size = c1.iter().enumerate().map(|(i, c)| c.norm() * r.powi(lo + i as i32)).fold(0.0, f64::max);
    if size == 0.0 {
        return 0.0;
    }
    c1.iter()
        .zip(c2)
        .enumerate()
        .map(|(i, (a, b))| (a - b).norm() * r.powi(lo + i as i32) / size)
        .fold(0.0, f64::max)
}

fn attempt(
    family: Family,
    k: u32,
    eta: Option<f64>,
    opts: &SeriesOptions,
    r: f64,
    bits: Option<usize>,
) -> Result<(Raw, f64), AnalysisError> {
    let full = sample_in(family, k, eta, opts.nodes, r, bits)?;
    let half = sample_in(family, k, eta, opts.nodes, r / 2.0, bits)?;
    let m = mismatch(r, &full.a, &half.a, 0)
        .max(mismatch(r, &full.b, &half.b, 0))
        .max(mismatch(r, &full.x11, &half.x11, -1))
        .max(mismatch(r, &full.x12, &half.x12, -1));
    Ok((full, m))
}

/// Expansion coefficients of `a_k`, `b_k` and `X_k` around `z = 1`.
pub fn extract_series(family: Family, k: u32, eta: Option<f64>, opts: &SeriesOptions) -> Result<SeriesFit, AnalysisError> {
    if !(opts.nodes >= 8 && opts.nodes.is_power_of_two()) {
        return Err(AnalysisError::InvalidInput(format!("node count {} must be a power of two ≥ 8", opts.nodes)));
    }
    if family == Family::Line && eta.is_none() {
        return Err(AnalysisError::InvalidInput("the line expansion needs a coin angle".into()));
    }
    let r = opts.radius.unwrap_or_else(|| default_radius(family, k));
    let ext_bits = extended_bits(family, k);
    let (raw, consistency, bits) = match opts.mode {
        PrecisionMode::Double => {
            let (raw, m) = attempt(family, k, eta, opts, r, None)?;
            if !(m <= opts.consistency_tol) {
                return Err(AnalysisError::PrecisionEscalation { family, k, mismatch: m, suggested_bits: ext_bits });
            }
            (raw, m, 53)
        }
        PrecisionMode::Extended { bits } => {
            let (raw, m) = attempt(family, k, eta, opts, r, Some(bits))?;
            if !(m <= opts.consistency_tol) {
                return Err(AnalysisError::IllConditioned { family, k, mismatch: m });
            }
            (raw, m, bits)
        }
        PrecisionMode::Auto => {
            let double = if expected_loss_bits(family, k) > AUTO_EXTENDED_THRESHOLD_BITS {
                None
            } else {
                Some(attempt(family, k, eta, opts, r, None)?)
            };
            match double {
                Some((raw, m)) if m <= opts.consistency_tol => (raw, m, 53),
                _ => {
                    let (raw, m) = attempt(family, k, eta, opts, r, Some(ext_bits))?;
                    if !(m <= opts.consistency_tol) {
                        return Err(AnalysisError::IllConditioned { family, k, mismatch: m });
                    }
                    (raw, m, ext_bits)
                }
            }
        }
    };
    let (l1, l2) = reference_eigenvalues(family);
    let a1 = raw.a[1];
    Ok(SeriesFit {
        family,
        k,
        eta,
        lambda1: l1,
        lambda2: l2,
        cal_a: a1 / l1.powi(k as i32),
        cal_b: raw.b[1] / l2.powi(k as i32),
        alpha2_ratio: raw.a[2] / (a1 * a1),
        a: Laurent { min_order: 0, coeffs: raw.a },
        b: Laurent { min_order: 0, coeffs: raw.b },
        x11: Laurent { min_order: -1, coeffs: raw.x11 },
        x12: Laurent { min_order: -1, coeffs: raw.x12 },
        radius: r,
        nodes: opts.nodes,
        precision_bits: bits,
        consistency,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderRow {
    pub k: u32,
    pub zeta_m1: Complex64,
    pub zeta_0: Complex64,
    pub zeta_1: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderRate {
    pub order: i32,
    /// Fitted per-step factor `e^{slope}` of `|c_n|` against `k`.
    pub rate: f64,
    /// Rate predicted from the fixed-point eigenvalues.
    pub expected: f64,
    /// Name of the eigenvalue power closest to the fitted rate.
    pub matched: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderTable {
    pub family: Family,
    pub rows: Vec<OrderRow>,
    pub rates: Vec<OrderRate>,
}

fn lsq_rate(ks: &[u32], vals: &[f64]) -> f64 {
    let n = ks.len() as f64;
    let xs: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let ys: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    (sxy / sxx).exp()
}

/// Per-step growth of the `ζ⁻¹, ζ⁰, ζ¹` coefficients of `[X_k]₁₁` over `ks`.
/// The gasket is expected to show `(1/λ1, 1, λ2)`, MK3 `(1/λ2, 1, λ1)` and
/// the line `(1/λ, 1, λ)`.
pub fn x11_order_check(
    family: Family,
    ks: &[u32],
    eta: Option<f64>,
    opts: &SeriesOptions,
) -> Result<OrderTable, AnalysisError> {
    if ks.len() < 2 {
        return Err(AnalysisError::InvalidInput("order check needs at least two k values".into()));
    }
    let rows: Vec<OrderRow> = ks
        .iter()
        .map(|&k| {
            let fit = extract_series(family, k, eta, opts)?;
            Ok(OrderRow { k, zeta_m1: fit.x11.get(-1), zeta_0: fit.x11.get(0), zeta_1: fit.x11.get(1) })
        })
        .collect::<Result<_, AnalysisError>>()?;
    let (l1, l2) = reference_eigenvalues(family);
    let expected = match family {
        Family::Dsg => [1.0 / l1, 1.0, l2],
        Family::Mk3 => [1.0 / l2, 1.0, l1],
        Family::Line => [1.0 / l1, 1.0, l1],
    };
    let candidates = [("lambda1", l1), ("lambda2", l2), ("1", 1.0), ("1/lambda1", 1.0 / l1), ("1/lambda2", 1.0 / l2)];
    let rates = (0..3)
        .map(|i| {
            let vals: Vec<f64> = rows
                .iter()
                .map(|r| [r.zeta_m1, r.zeta_0, r.zeta_1][i].norm())
                .collect();
            let rate = lsq_rate(ks, &vals);
            let matched = candidates
                .iter()
                .min_by(|a, b| (a.1.ln() - rate.ln()).abs().total_cmp(&(b.1.ln() - rate.ln()).abs()))
                .map(|c| c.0)
                .unwrap_or("1");
            OrderRate { order: i as i32 - 1, rate, expected: expected[i], matched }
        })
        .collect();
    Ok(OrderTable { family, rows, rates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    #[test]
    fn line_exact_coefficients() {
        let opts = SeriesOptions::default();
        for k in 3..=6u32 {
            let n = 2f64.powi(k as i32);
            let fit = extract_series(Family::Line, k, Some(FRAC_PI_4), &opts).unwrap();
            assert!((fit.x11.get(-1) + 1.0 / n).norm() < 1e-10 / n, "k={k}");
            assert!((fit.x11.get(0) - (n - 1.0) / (2.0 * n)).norm() < 1e-9, "k={k}");
            assert!((fit.x12.get(0) + (n - 2.0) / (2.0 * n)).norm() < 1e-9, "k={k}");
            assert!((fit.a.get(1) - n / SQRT_2).norm() < 1e-8 * n, "k={k}");
            assert!((fit.cal_a - 1.0 / SQRT_2).norm() < 1e-8);
            assert!((fit.cal_b - 1.0 / SQRT_2).norm() < 1e-8);
            assert_eq!(fit.precision_bits, 53);
        }
    }

    #[test]
    fn extended_matches_double() {
        let d = extract_series(Family::Dsg, 3, None, &SeriesOptions { mode: PrecisionMode::Double, ..Default::default() })
            .unwrap();
        let e = extract_series(
            Family::Dsg,
            3,
            None,
            &SeriesOptions { mode: PrecisionMode::Extended { bits: 160 }, nodes: 32, ..Default::default() },
        )
        .unwrap();
        assert_eq!(e.precision_bits, 160);
        for n in -1..=1 {
            let (x, y) = (d.x11.get(n), e.x11.get(n));
            assert!((x - y).norm() < 1e-8 * x.norm().max(1.0), "order {n}: {x} vs {y}");
        }
        assert!((d.cal_a - e.cal_a).norm() < 1e-8);
    }

    #[test]
    fn auto_switches_for_deep_steps() {
        assert!(expected_loss_bits(Family::Dsg, 19) > AUTO_EXTENDED_THRESHOLD_BITS);
        assert!(expected_loss_bits(Family::Dsg, 18) < AUTO_EXTENDED_THRESHOLD_BITS);
        assert!(extended_bits(Family::Dsg, 19) > 53 + 30);
    }

    #[test]
    fn dsg_pole_residue_at_one() {
        let fit = extract_series(Family::Dsg, 2, None, &SeriesOptions::default()).unwrap();
        // ζ⁻¹ coefficient is −1/(3N) with N = 3^{k+1}
        assert!((fit.x11.get(-1) + 1.0 / 81.0).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_node_count() {
        let opts = SeriesOptions { nodes: 12, ..Default::default() };
        assert!(extract_series(Family::Dsg, 2, None, &opts).is_err());
    }
}
