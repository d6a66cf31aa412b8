//! Laplace poles of `[X_k]₁₁` on the unit circle and the scaling of the
//! smallest pole angle with the RG step.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use super::amplitude::{inverse_x11, AmplitudeError};
use super::AnalysisError;
use crate::Family;

/// Smallest grid accepted by [`find_poles`].
pub const MIN_GRID: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleOptions {
    /// Refined candidates must satisfy `|1/[X_k]₁₁| <` this.
    pub accept_tol: f64,
    /// Width in `ω` at which golden-section refinement stops.
    pub omega_tol: f64,
    /// Optional pre-filter: a grid minimum is refined only if `|[X_k]₁₁|`
    /// there exceeds this multiple of the grid median.
    pub peak_ratio: Option<f64>,
    /// Radius of the residue contour around each pole.
    pub residue_radius: f64,
    /// Number of contour points for the residue.
    pub residue_points: usize,
}

impl Default for PoleOptions {
    fn default() -> Self {
        Self { accept_tol: 1e-6, omega_tol: 1e-10, peak_ratio: None, residue_radius: 1e-6, residue_points: 16 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoleSet {
    pub family: Family,
    pub k: u32,
    /// Matrix entry whose poles are recorded, zero-based.
    pub component: (usize, usize),
    /// Pole angles `ω_j ∈ (0, π]`, ascending; the conjugates `−ω_j` are implied.
    pub angles: Vec<f64>,
    /// `lim (z − z_j)[X_k]₁₁` at `z_j = e^{iω_j}`.
    pub residues: Vec<Complex64>,
    /// `|1/[X_k]₁₁|` at each refined angle.
    pub residual: Vec<f64>,
    pub grid: usize,
    /// Grid minima whose refinement did not reach the acceptance tolerance.
    pub unresolved: usize,
    pub warnings: Vec<String>,
}

impl PoleSet {
    pub fn smallest_angle(&self) -> Option<f64> {
        self.angles.first().copied()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,omega,re_residue,im_residue\n");
        for (w, r) in self.angles.iter().zip(&self.residues) {
            let _ = writeln!(s, "{},{:.16e},{:.16e},{:.16e}", self.k, w, r.re, r.im);
        }
        s
    }
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        x1
    } else {
        x2
    }
}

/// Scans `ω ∈ (0, π]` on `grid` points for minima of `|g(e^{iω})|`, where
/// `g = 1/[X_k]₁₁`, refines them by golden section followed by a few
/// Gauss-Newton steps, and keeps those with `|g| < accept_tol`.
pub fn find_poles<G>(family: Family, k: u32, g: &G, grid: usize, opts: &PoleOptions) -> Result<PoleSet, AnalysisError>
where
    G: Fn(Complex64) -> Result<Complex64, AmplitudeError> + Sync,
{
    if grid < MIN_GRID {
        return Err(AnalysisError::InvalidInput(format!("pole grid {grid} below minimum {MIN_GRID}")));
    }
    let step = std::f64::consts::PI / grid as f64;
    let abs_g = |w: f64| match g(Complex64::from_polar(1.0, w)) {
        Ok(v) if v.is_finite() => v.norm(),
        Ok(_) | Err(AmplitudeError::Pole { .. }) => 0.0,
        Err(_) => f64::INFINITY,
    };
    let vals: Vec<f64> = (1..=grid).into_par_iter().map(|i| abs_g(i as f64 * step)).collect();

    let median_x = {
        let mut x: Vec<f64> = vals.iter().filter(|v| v.is_finite() && **v > 0.0).map(|v| 1.0 / v).collect();
        x.sort_by(|a, b| a.total_cmp(b));
        x.get(x.len() / 2).copied().unwrap_or(0.0)
    };
    let mut candidates = Vec::new();
    for i in 0..grid {
        let left = if i == 0 { f64::INFINITY } else { vals[i - 1] };
        let right = if i + 1 == grid { f64::INFINITY } else { vals[i + 1] };
        if vals[i] <= left && vals[i] <= right && vals[i].is_finite() {
            if let Some(ratio) = opts.peak_ratio {
                if vals[i] > 0.0 && 1.0 / vals[i] < ratio * median_x {
                    continue;
                }
            }
            candidates.push(i);
        }
    }

    let refined: Vec<(f64, f64)> = candidates
        .par_iter()
        .map(|&i| {
            let w0 = (i + 1) as f64 * step;
            let lo = (w0 - step).max(0.25 * step);
            let hi = (w0 + step).min(std::f64::consts::PI);
            let mut w = golden_min(&abs_g, lo, hi, opts.omega_tol);
            // Gauss-Newton on the complex residual g(e^{iω}) = 0
            for _ in 0..4 {
                let h = 1e-7 * w.max(1e-3);
                let (Ok(gv), Ok(gp), Ok(gm)) = (
                    g(Complex64::from_polar(1.0, w)),
                    g(Complex64::from_polar(1.0, w + h)),
                    g(Complex64::from_polar(1.0, w - h)),
                ) else {
                    break;
                };
                let d = (gp - gm) / (2.0 * h);
                if d.norm_sqr() == 0.0 || !d.is_finite() {
                    break;
                }
                let next = w - (gv * d.conj()).re / d.norm_sqr();
                if !(next > lo && next < hi) || abs_g(next) >= abs_g(w) {
                    break;
                }
                w = next;
            }
            (w, abs_g(w))
        })
        .collect();

    let mut accepted: Vec<(f64, f64)> = Vec::new();
    let mut unresolved = 0;
    let mut warnings = Vec::new();
    for (w, r) in refined {
        if r < opts.accept_tol {
            accepted.push((w, r));
        } else {
            unresolved += 1;
        }
    }
    accepted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let before = accepted.len();
    accepted.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-8);
    if accepted.len() < before {
        warnings.push(format!(
            "{} grid minima refined onto the same pole; consider grid ≥ {}",
            before - accepted.len(),
            grid * 4
        ));
    }
    if unresolved > 0 {
        warnings.push(format!(
            "{unresolved} grid minima did not refine below |1/X11| < {:.0e}; consider grid ≥ {}",
            opts.accept_tol,
            grid * 4
        ));
    }
    if accepted.windows(2).any(|p| p[1].0 - p[0].0 < 2.0 * step) {
        warnings.push(format!("adjacent poles closer than two grid spacings; consider grid ≥ {}", grid * 4));
    }

    let residues: Vec<Complex64> = accepted
        .par_iter()
        .map(|&(w, _)| residue(g, Complex64::from_polar(1.0, w), opts.residue_radius, opts.residue_points))
        .collect();
    Ok(PoleSet {
        family,
        k,
        component: (0, 0),
        angles: accepted.iter().map(|p| p.0).collect(),
        residual: accepted.iter().map(|p| p.1).collect(),
        residues,
        grid,
        unresolved,
        warnings,
    })
}

/// Mean of `(z − z_j)/g(z)` over `points` nodes on a circle of radius
/// `radius` around `z_j`.
pub fn residue<G>(g: &G, zj: Complex64, radius: f64, points: usize) -> Complex64
where
    G: Fn(Complex64) -> Result<Complex64, AmplitudeError>,
{
    let mut sum = Complex64::new(0.0, 0.0);
    let mut used = 0;
    for p in 0..points {
        let dz = Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * (p as f64 + 0.5) / points as f64);
        if let Ok(v) = g(zj + dz) {
            if v.norm() > 0.0 && v.is_finite() {
                sum += dz / v;
                used += 1;
            }
        }
    }
    if used == 0 {
        Complex64::new(f64::NAN, f64::NAN)
    } else {
        sum / used as f64
    }
}

/// Pole set of `[X_k]₁₁` for a family.
pub fn find_family_poles(
    family: Family,
    k: u32,
    eta: Option<f64>,
    grid: usize,
    opts: &PoleOptions,
) -> Result<PoleSet, AnalysisError> {
    let g = move |z: Complex64| inverse_x11(family, k, &z, eta);
    find_poles(family, k, &g, grid, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaFit {
    /// Least-squares slope of `−ln θ_k` against `k`.
    pub slope: f64,
    /// `e^{slope}`, the fitted per-step ratio `θ_k/θ_{k+1}`.
    pub ratio: f64,
    pub per_step_ratios: Vec<f64>,
}

/// Fits the decay of the smallest pole angle over consecutive `k`.
pub fn fit_theta_scaling(points: &[(u32, f64)]) -> Result<ThetaFit, AnalysisError> {
    if points.len() < 3 {
        return Err(AnalysisError::InvalidInput(format!(
            "θ scaling needs at least 3 consecutive k values, got {}",
            points.len()
        )));
    }
    if points.windows(2).any(|w| w[1].0 != w[0].0 + 1) {
        return Err(AnalysisError::InvalidInput("θ scaling needs consecutive k values".into()));
    }
    if points.iter().any(|p| !(p.1 > 0.0)) {
        return Err(AnalysisError::InvalidInput("θ values must be positive".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| -p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(ThetaFit {
        slope,
        ratio: slope.exp(),
        per_step_ratios: points.windows(2).map(|w| w[0].1 / w[1].1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

    #[test]
    fn synthetic_rational_poles() {
        // g(z) = (z − e^{0.5i})(z − e^{2i}) has zeros at ω = 0.5, 2
        let g = |z: Complex64| {
            Ok::<_, AmplitudeError>((z - Complex64::from_polar(1.0, 0.5)) * (z - Complex64::from_polar(1.0, 2.0)))
        };
        let set = find_poles(Family::Dsg, 0, &g, 256, &PoleOptions::default()).unwrap();
        assert_eq!(set.angles.len(), 2);
        assert!((set.angles[0] - 0.5).abs() < 1e-10 && (set.angles[1] - 2.0).abs() < 1e-10);
        // residue of 1/g at e^{0.5i} is 1/(e^{0.5i} − e^{2i})
        let want = 1.0 / (Complex64::from_polar(1.0, 0.5) - Complex64::from_polar(1.0, 2.0));
        assert!((set.residues[0] - want).norm() < 1e-6);
    }

    #[test]
    fn grid_too_small() {
        let g = |_z: Complex64| Ok::<_, AmplitudeError>(Complex64::new(1.0, 0.0));
        assert!(find_poles(Family::Dsg, 0, &g, 32, &PoleOptions::default()).is_err());
    }

    #[test]
    fn line_smallest_pole() {
        let set = find_family_poles(Family::Line, 4, Some(FRAC_PI_4), 4096, &PoleOptions::default()).unwrap();
        let n = 16.0;
        let exact = ((2.0 * PI / n).sin() / SQRT_2).asin();
        let w = set.smallest_angle().unwrap();
        assert!((w - exact).abs() < 1e-9, "{w} vs {exact}");
        assert!((w / (SQRT_2 * PI / n) - 1.0).abs() < 0.02);
        assert!(set.residual.iter().all(|r| *r < 1e-6));
        // exact residue −e^{iω}/N
        let want = -Complex64::from_polar(1.0, w) / n;
        assert!((set.residues[0] - want).norm() < 1e-6, "{} vs {want}", set.residues[0]);
    }

    #[test]
    fn dsg_count_grows_and_angle_shrinks() {
        let opts = PoleOptions::default();
        let p2 = find_family_poles(Family::Dsg, 2, None, 4096, &opts).unwrap();
        let p3 = find_family_poles(Family::Dsg, 3, None, 4096, &opts).unwrap();
        assert!(p3.angles.len() > p2.angles.len());
        assert!(p3.smallest_angle().unwrap() < p2.smallest_angle().unwrap());
    }

    #[test]
    fn theta_fit() {
        let pts: Vec<(u32, f64)> = (2..6).map(|k| (k, 3.0 * 2f64.powi(-(k as i32)))).collect();
        let fit = fit_theta_scaling(&pts).unwrap();
        assert!((fit.ratio - 2.0).abs() < 1e-12);
        assert!(fit_theta_scaling(&pts[..2]).is_err());
        assert!(fit_theta_scaling(&[(1, 0.1), (3, 0.05), (4, 0.02)]).is_err());
    }

    #[test]
    fn csv_format() {
        let set = find_family_poles(Family::Line, 3, Some(FRAC_PI_4), 256, &PoleOptions::default()).unwrap();
        let csv = set.to_csv();
        assert!(csv.starts_with("k,omega,re_residue,im_residue\n"));
        assert_eq!(csv.lines().count(), set.angles.len() + 1);
    }
}
