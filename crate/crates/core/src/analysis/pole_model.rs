//! Superposition-of-poles model for the return amplitude:
//! `[X_k]₁₁ ∼ (1/h) Σ_{j=−h..h} f_|j| / (1 − z e^{iθ j g_|j|})`, and its
//! time-domain counterpart `ψ_{0,t} ∼ (1/h) Σ_{j=0..h} f_j cos(j g_j θ t)`.

use num_complex::Complex64;

use super::poles::PoleSet;
use super::AnalysisError;

#[derive(Debug, Clone, PartialEq)]
pub struct PoleModel {
    /// Effective number of contributing poles.
    pub h: usize,
    /// Weights `f_0 ..= f_h`.
    pub f: Vec<f64>,
    /// Frequency factors `g_0 ..= g_h` (`g_0` is unused).
    pub g: Vec<f64>,
    /// Angular unit `θ_k`; the time argument of the cosine series is `θ_k t`.
    pub theta: f64,
}

impl PoleModel {
    pub fn new(f: Vec<f64>, g: Vec<f64>, theta: f64) -> Result<Self, AnalysisError> {
        if f.is_empty() || f.len() != g.len() {
            return Err(AnalysisError::InvalidInput(format!(
                "pole model needs equal, non-empty f and g (got {} and {})",
                f.len(),
                g.len()
            )));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(AnalysisError::InvalidInput(format!("θ must be positive, got {theta}")));
        }
        let h = (f.len() - 1).max(1);
        Ok(Self { h, f, g, theta })
    }

    /// Equal weights and frequencies, as for the loop.
    pub fn uniform(h: usize, theta: f64) -> Result<Self, AnalysisError> {
        Self::new(vec![1.0; h + 1], vec![1.0; h + 1], theta)
    }

    fn phase(&self, j: usize) -> f64 {
        self.theta * j as f64 * self.g[j]
    }

    /// Cosine series at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let sum: f64 = (0..self.f.len()).map(|j| self.f[j] * (self.phase(j) * t).cos()).sum();
        sum / self.h as f64
    }

    /// Laplace-domain pole sum at `z`.
    pub fn laplace_eval(&self, z: Complex64) -> Complex64 {
        let mut sum = self.f[0] / (1.0 - z);
        for j in 1..self.f.len() {
            let w = Complex64::from_polar(1.0, self.phase(j));
            sum += self.f[j] / (1.0 - z * w) + self.f[j] / (1.0 - z * w.conj());
        }
        sum / self.h as f64
    }

    /// `S_m = Σ_{j=1..h} f_j/(g_j j)^m`.
    pub fn s_m(&self, m: i32) -> f64 {
        (1..self.f.len()).map(|j| self.f[j] / (self.g[j] * j as f64).powi(m)).sum()
    }

    /// Exact coefficients of `ζ^{−1}, ζ⁰, …, ζ^{n_max}` about `z = 1`.
    pub fn laurent(&self, n_max: u32) -> Vec<f64> {
        let h = self.h as f64;
        let mut out = vec![-self.f[0] / h];
        for n in 0..=n_max as i32 {
            let mut c = 0.0;
            for j in 1..self.f.len() {
                // 1/(1 − (1+ζ)w) = Σ ζⁿ wⁿ/(1 − w)^{n+1}; the ±j pair doubles the real part
                let w = Complex64::from_polar(1.0, self.phase(j));
                c += self.f[j] * 2.0 * (w.powi(n) / (1.0 - w).powi(n + 1)).re;
            }
            out.push(c / h);
        }
        out
    }

    /// Small-angle form of the first three Laurent coefficients:
    /// `[−f_0/h, S_0/h, −2S_2/(θ²h)]`.
    pub fn laurent_small_angle(&self) -> [f64; 3] {
        let h = self.h as f64;
        [-self.f[0] / h, self.s_m(0) / h, -2.0 * self.s_m(2) / (self.theta * self.theta * h)]
    }

    /// Participation ratio `(Σ|f_j|)²/Σf_j²` over `j ≥ 1`, an estimate of how
    /// many poles carry the weight.
    pub fn participation(&self) -> f64 {
        let s1: f64 = self.f[1..].iter().map(|v| v.abs()).sum();
        let s2: f64 = self.f[1..].iter().map(|v| v * v).sum();
        if s2 == 0.0 {
            0.0
        } else {
            s1 * s1 / s2
        }
    }

    /// Model read off a measured pole set: `h` is the pole count,
    /// `f_j = −h Re(R_j/z_j)`, `θ = ω_1`, `g_j = ω_j/(jθ)`, and
    /// `f_0 = −h Re(c_{−1})` from the `ζ⁻¹` coefficient at `z = 1`.
    pub fn from_pole_set(set: &PoleSet, zeta_m1: Complex64) -> Result<Self, AnalysisError> {
        let h = set.angles.len();
        if h == 0 {
            return Err(AnalysisError::InvalidInput("pole set is empty".into()));
        }
        let theta = set.angles[0];
        let hf = h as f64;
        let mut f = vec![-hf * zeta_m1.re];
        let mut g = vec![1.0];
        for (j, (&w, &r)) in set.angles.iter().zip(&set.residues).enumerate() {
            let j = j + 1;
            f.push(-hf * (r / Complex64::from_polar(1.0, w)).re);
            g.push(w / (j as f64 * theta));
        }
        Self::new(f, g, theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn value_at_zero_time() {
        let m = PoleModel::uniform(40, 0.01).unwrap();
        assert!((m.eval(0.0) - (1.0 + 1.0 / 40.0)).abs() < 1e-14);
    }

    #[test]
    fn single_term_is_constant() {
        let m = PoleModel::new(vec![0.7], vec![1.0], 0.3).unwrap();
        assert_eq!(m.h, 1);
        for t in [0.0, 1.0, 17.5] {
            assert!((m.eval(t) - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_model_is_periodic() {
        let h = 16;
        let theta = 2.0 * PI / 64.0;
        let m = PoleModel::uniform(h, theta).unwrap();
        for t in [0.0, 3.0, 11.0] {
            assert!((m.eval(t) - m.eval(t + 64.0)).abs() < 1e-12);
        }
        assert!(m.eval(32.0) < m.eval(0.0));
    }

    #[test]
    fn laurent_matches_laplace_sum() {
        let m = PoleModel::new(vec![0.5, 1.0, 0.8, 1.2], vec![1.0, 1.0, 1.1, 0.9], 0.2).unwrap();
        let c = m.laurent(2);
        let zeta = Complex64::new(1e-3, 2e-3);
        let series = c[0] / zeta + c[1] + c[2] * zeta + c[3] * zeta * zeta;
        let exact = m.laplace_eval(1.0 + zeta);
        assert!((series - exact).norm() < 1e-6 * exact.norm(), "{series} vs {exact}");
    }

    #[test]
    fn small_angle_limit() {
        let m = PoleModel::uniform(10, 1e-3).unwrap();
        let exact = m.laurent(1);
        let approx = m.laurent_small_angle();
        for i in 0..3 {
            assert!((exact[i] - approx[i]).abs() < 1e-5 * approx[i].abs().max(1.0), "{i}");
        }
    }

    #[test]
    fn sums_and_participation() {
        let m = PoleModel::uniform(100, 0.01).unwrap();
        assert_eq!(m.s_m(0), 100.0);
        assert!((m.s_m(2) - PI * PI / 6.0).abs() < 0.011);
        assert!((m.participation() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(PoleModel::new(vec![], vec![], 0.1).is_err());
        assert!(PoleModel::new(vec![1.0], vec![1.0, 2.0], 0.1).is_err());
        assert!(PoleModel::uniform(3, 0.0).is_err());
    }
}
