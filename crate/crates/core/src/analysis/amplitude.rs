//! Return-amplitude matrices `X_k(z)` at the origin after `k` RG steps.

use num_complex::Complex64;
use thiserror::Error;

use crate::coin::{grover_coin, rotation_coin, CoinError, Matrix};
use crate::precision::Field;
use crate::rg_scalar::{line_closed_form, scalars_at, ClosedFormError, FlowError};
use crate::Family;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AmplitudeError {
    /// `z` is (numerically) a Laplace pole of `X_k`; this is a signal, not a failure.
    #[error("z = {z} is a pole of the return amplitude")]
    Pole { z: Complex64 },
    #[error("flow failed: {0}")]
    Flow(#[from] FlowError),
    #[error("closed form failed: {0}")]
    ClosedForm(ClosedFormError),
    #[error("intermediate inverse failed: {0}")]
    Numerical(CoinError),
    #[error("the line amplitude needs k ≥ 1 (N = 2^k), got {0}")]
    InvalidStep(u32),
    #[error("family {0} requires a coin angle eta")]
    MissingEta(Family),
}

fn lift<F: Field>(m: &Matrix<Complex64>, like: &F) -> Matrix<F> {
    m.map(|x| like.lift_like(*x))
}

fn scalar<F: Field>(m: &Matrix<F>, s: F) -> Matrix<F> {
    m.scale(s)
}

/// `Y_k = X_k⁻¹` for the given family.
pub fn inverse_amplitude<F: Field>(family: Family, k: u32, z: &F, eta: Option<f64>) -> Result<Matrix<F>, AmplitudeError> {
    if family == Family::Line && k == 0 {
        return Err(AmplitudeError::InvalidStep(0));
    }
    let (a, b) = scalars_at(family, z, eta, k)?;
    let third = z.real_like(1.0 / 3.0);
    let half = z.real_like(0.5);
    match family {
        Family::Dsg => {
            let g = lift(&grover_coin(3).expect("d = 3"), z);
            let eye = Matrix::<F>::identity(3);
            let wm = Matrix::diagonal(&[
                (a.clone() - z.real_like(2.0) * b.clone()) * third.clone(),
                z.clone(),
                F::zero(),
            ]);
            let wa = Matrix::diagonal(&[(a + b) * third, F::zero(), F::zero()]);
            let wc = Matrix::diagonal(&[F::zero(), F::zero(), z.clone()]);
            let (m, am, c) = (&wm * &g, &wa * &g, &wc * &g);
            let inner = &(&(&eye - &m) - &am) - &c;
            let inner_inv = inner.inverse().map_err(AmplitudeError::Numerical)?;
            let two_a_inv_a = scalar(&(&(&am * &inner_inv) * &am), z.real_like(2.0));
            Ok(&(&(&eye - &m) - &c) - &two_a_inv_a)
        }
        Family::Mk3 => {
            let g = lift(&grover_coin(3).expect("d = 3"), z);
            let eye = Matrix::<F>::identity(3);
            let m = scalar(&g, (a.clone() - b.clone()) * half.clone());
            let v = scalar(&g, (a + b) * half);
            let i_m = &eye - &m;
            let inner_inv = i_m.inverse().map_err(AmplitudeError::Numerical)?;
            Ok(&i_m - &(&(&v * &inner_inv) * &v))
        }
        Family::Line => {
            let eta = eta.ok_or(AmplitudeError::MissingEta(family))?;
            let coin = lift(&rotation_coin(eta), z);
            let total = Matrix::from_rows(&[[a.clone(), b.clone()], [b, -a]]);
            Ok(&Matrix::<F>::identity(2) - &(&total * &coin))
        }
    }
}

/// `X_k(z)`; a singular `Y_k` is reported as [`AmplitudeError::Pole`].
pub fn amplitude<F: Field>(family: Family, k: u32, z: &F, eta: Option<f64>) -> Result<Matrix<F>, AmplitudeError> {
    let y = inverse_amplitude(family, k, z, eta)?;
    y.inverse().map_err(|e| match e {
        CoinError::Singular { .. } | CoinError::InaccurateInverse { .. } => AmplitudeError::Pole { z: z.to_c64() },
        other => AmplitudeError::Numerical(other),
    })
}

fn det<F: Field>(y: &Matrix<F>) -> F {
    let g = |i, j| y.get(i, j).clone();
    match y.dim() {
        2 => g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0),
        3 => {
            g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1)) - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
                + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0))
        }
        d => panic!("determinant only needed for d = 2, 3, got {d}"),
    }
}

fn minor11<F: Field>(y: &Matrix<F>) -> F {
    let g = |i, j| y.get(i, j).clone();
    match y.dim() {
        2 => g(1, 1),
        3 => g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1),
        d => panic!("minor only needed for d = 2, 3, got {d}"),
    }
}

/// `1/[X_k]₁₁ = det Y_k / minor₁₁(Y_k)`, smooth through the poles of `X_k`.
pub fn inverse_x11<F: Field>(family: Family, k: u32, z: &F, eta: Option<f64>) -> Result<F, AmplitudeError> {
    let y = inverse_amplitude(family, k, z, eta)?;
    let m = minor11(&y);
    if m.is_zero() {
        return Err(AmplitudeError::Numerical(CoinError::Singular { pivot: 0.0, threshold: 0.0 }));
    }
    Ok(det(&y) / m)
}

/// `[X_k]₁₁` computed from the cofactor formula.
pub fn x11<F: Field>(family: Family, k: u32, z: &F, eta: Option<f64>) -> Result<F, AmplitudeError> {
    let y = inverse_amplitude(family, k, z, eta)?;
    let d = det(&y);
    if d.is_zero() {
        return Err(AmplitudeError::Pole { z: z.to_c64() });
    }
    Ok(minor11(&y) / d)
}

pub fn amplitude_dsg(k: u32, z: Complex64) -> Result<Matrix<Complex64>, AmplitudeError> {
    amplitude(Family::Dsg, k, &z, None)
}

pub fn amplitude_mk3(k: u32, z: Complex64) -> Result<Matrix<Complex64>, AmplitudeError> {
    amplitude(Family::Mk3, k, &z, None)
}

/// Line amplitude for `N = 2^k` from the rational expression in `(a_k, b_k)`:
/// `X = [[1 − as − bc, ac − bs], [bs − ac, 1 − as − bc]] / (1 − 2as − 2bc + a² + b²)`.
pub fn amplitude_line(k: u32, z: Complex64, eta: f64) -> Result<Matrix<Complex64>, AmplitudeError> {
    if k == 0 {
        return Err(AmplitudeError::InvalidStep(0));
    }
    let (a, b) = scalars_at(Family::Line, &z, Some(eta), k)?;
    let (s, c) = eta.sin_cos();
    let den = 1.0 - 2.0 * a * s - 2.0 * b * c + a * a + b * b;
    if den.norm() == 0.0 || !den.is_finite() {
        return Err(AmplitudeError::Pole { z });
    }
    let p = (1.0 - a * s - b * c) / den;
    let q = (a * c - b * s) / den;
    Ok(Matrix::from_rows(&[[p, q], [-q, p]]))
}

/// Line amplitude from the closed-form parameters:
/// `X = ½[[1, −cot η], [cot η, 1]] + [[i cot η + sin σ, i − sin σ cot η],
/// [sin σ cot η − i, i cot η + sin σ]] / (2 tan(Nν/2) cos σ)`.
pub fn amplitude_line_closed(k: u32, z: Complex64, eta: f64) -> Result<Matrix<Complex64>, AmplitudeError> {
    if k == 0 || k > 62 {
        return Err(AmplitudeError::InvalidStep(k));
    }
    let n = 1u64 << k;
    let (_, _, p) = match line_closed_form(n, z, eta) {
        Ok(v) => v,
        Err(ClosedFormError::PoleOfSolution { .. }) => return Err(AmplitudeError::Pole { z }),
        Err(e) => return Err(AmplitudeError::ClosedForm(e)),
    };
    let i = Complex64::i();
    let ct = 1.0 / eta.tan();
    let s = p.sin_sigma;
    let den = 2.0 * p.tan_half_n_nu() * p.cos_sigma;
    if den.norm() == 0.0 || !den.is_finite() {
        return Err(AmplitudeError::Pole { z });
    }
    let h = Complex64::new(0.5, 0.0);
    let base = [[h, -ct * h], [ct * h, h]];
    let sing = [[i * ct + s, i - s * ct], [s * ct - i, i * ct + s]];
    let rows: Vec<Vec<Complex64>> =
        (0..2).map(|r| (0..2).map(|c| base[r][c] + sing[r][c] / den).collect()).collect();
    Ok(Matrix::from_rows(&rows))
}
