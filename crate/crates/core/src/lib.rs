//! Renormalization-group analysis of coined quantum walks on fractal networks.
//!
//! The crate covers direct unitary simulation on dual Sierpinski gaskets and
//! rings, matrix and scalar RG flows, fixed-point Jacobians, Laplace-pole
//! tracking of the return amplitude, and series extraction near `z = 1`.

pub mod analysis;
pub mod coin;
pub mod evolution;
pub mod network;
pub mod precision;
pub mod rg_matrix;
pub mod rg_scalar;

use std::fmt;
use std::str::FromStr;

pub use num_complex::Complex64;

/// Network family a walk lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Dual Sierpinski gasket, coin dimension 3, length rescaling 2.
    Dsg,
    /// Migdal-Kadanoff hierarchical lattice, coin dimension 3, length rescaling 4.
    Mk3,
    /// One-dimensional ring, coin dimension 2, length rescaling 2.
    Line,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Dsg, Family::Mk3, Family::Line];

    pub fn name(self) -> &'static str {
        match self {
            Family::Dsg => "dsg",
            Family::Mk3 => "mk3",
            Family::Line => "line",
        }
    }

    pub fn coin_dim(self) -> usize {
        match self {
            Family::Dsg | Family::Mk3 => 3,
            Family::Line => 2,
        }
    }

    /// Length rescaling factor per RG step.
    pub fn rescaling_base(self) -> f64 {
        match self {
            Family::Dsg | Family::Line => 2.0,
            Family::Mk3 => 4.0,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown network family '{0}' (expected dsg, mk3 or line)")]
pub struct UnknownFamily(pub String);

impl FromStr for Family {
    type Err = UnknownFamily;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dsg" => Ok(Family::Dsg),
            "mk3" => Ok(Family::Mk3),
            "line" | "loop" => Ok(Family::Line),
            _ => Err(UnknownFamily(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_roundtrip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert!("sierpinski".parse::<Family>().is_err());
    }
}
