//! Fixed-point linearization, return amplitudes, pole spectra, low-frequency
//! expansions and the pole model.

pub mod amplitude;
pub mod jacobian;
pub mod pole_model;
pub mod poles;
pub mod series;

use thiserror::Error;

use crate::rg_scalar::FlowError;
use crate::Family;
use amplitude::AmplitudeError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("fixed point of {family} drifts by {drift:e} under one step")]
    FixedPointDrift { family: Family, drift: f64 },
    #[error("flow Jacobian of {family} has complex eigenvalues")]
    ComplexEigenvalues { family: Family },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Amplitude(#[from] AmplitudeError),
    #[error("{family} k={k}: double precision is inconsistent (mismatch {mismatch:e}); rerun with at least {suggested_bits} bits")]
    PrecisionEscalation { family: Family, k: u32, mismatch: f64, suggested_bits: usize },
    #[error("{family} k={k}: expansion ill-conditioned even in extended precision (mismatch {mismatch:e})")]
    IllConditioned { family: Family, k: u32, mismatch: f64 },
}

/// Exact fixed-point eigenvalues `(λ1, λ2)` of each family's flow.
pub fn reference_eigenvalues(family: Family) -> (f64, f64) {
    match family {
        Family::Dsg => (3.0, 5.0 / 3.0),
        Family::Mk3 => (7.0, 3.0),
        Family::Line => (2.0, 2.0),
    }
}
