//! Run configuration and its validation.

use std::path::PathBuf;

use qwrg_core::Family;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Rg,
    Jacobian,
    Poles,
    Scaling,
    Series,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Rg => "rg",
            Command::Jacobian => "jacobian",
            Command::Poles => "poles",
            Command::Scaling => "scaling",
            Command::Series => "series",
            Command::Report => "report",
        }
    }

    /// Commands whose payload is a sequence and can be written as CSV.
    pub fn has_sequence(self) -> bool {
        matches!(self, Command::Simulate | Command::Rg | Command::Poles)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Auto,
    Double,
    Extended,
}

mod family_opt {
    use super::*;

    pub fn serialize<S: Serializer>(f: &Option<Family>, s: S) -> Result<S::Ok, S::Error> {
        match f {
            Some(f) => s.serialize_some(f.name()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Family>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        raw.map(|s| s.parse().map_err(serde::de::Error::custom)).transpose()
    }
}

/// Everything a single invocation needs. Unused fields stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    #[serde(with = "family_opt", default)]
    pub family: Option<Family>,
    /// Gasket generation `g` (simulate).
    pub generation: Option<u32>,
    /// Ring size `N` (simulate on the line).
    pub size: Option<usize>,
    pub k_min: Option<u32>,
    pub k_max: Option<u32>,
    pub re_z: Option<f64>,
    pub im_z: Option<f64>,
    /// Unit-circle grid for the pole scan.
    pub grid: Option<usize>,
    pub eta: Option<f64>,
    /// Number of time steps `T` (simulate).
    pub steps: Option<usize>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub precision: Precision,
    /// Significand bits for `precision = extended`.
    pub bits: Option<usize>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            family: None,
            generation: None,
            size: None,
            k_min: None,
            k_max: None,
            re_z: None,
            im_z: None,
            grid: None,
            eta: None,
            steps: None,
            output: None,
            format: Format::Json,
            precision: Precision::Auto,
            bits: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid value for '{field}': {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

fn bad(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError { field, message: message.into() }
}

pub const MAX_LINE_K: u32 = 40;
pub const MAX_RG_K: u32 = 60;
pub const MIN_GRID: usize = 64;
pub const MAX_LOOP_SIZE: usize = 1 << 20;

impl RunConfig {
    fn need_family(&self) -> Result<Family, ConfigError> {
        self.family.ok_or_else(|| bad("family", format!("required by '{}'", self.command.name())))
    }

    /// Inclusive `k` range with defaults.
    pub fn k_range(&self, default_min: u32, default_max: u32) -> (u32, u32) {
        let lo = self.k_min.unwrap_or(default_min);
        (lo, self.k_max.unwrap_or(default_max.max(lo)))
    }

    /// Rejects inconsistent or out-of-range settings, naming the field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.format == Format::Csv && !self.command.has_sequence() {
            return Err(bad("format", format!("'{}' has no sequence payload; use json", self.command.name())));
        }
        if let Some(eta) = self.eta {
            if !eta.is_finite() {
                return Err(bad("eta", "must be finite"));
            }
            if self.family.is_some_and(|f| f != Family::Line) {
                return Err(bad("eta", "only the line family has a coin angle"));
            }
            if (eta.sin() * eta.cos()).abs() < 1e-12 {
                return Err(bad("eta", "must not be a multiple of π/2"));
            }
        }
        if self.bits.is_some() && self.precision != Precision::Extended {
            return Err(bad("bits", "only meaningful with precision = extended"));
        }
        if let Some(b) = self.bits {
            if !(64..=4096).contains(&b) {
                return Err(bad("bits", "must lie in 64..=4096"));
            }
        }
        if self.precision != Precision::Auto && self.command != Command::Series {
            return Err(bad("precision", "only the series command has a precision mode"));
        }
        if let (Some(lo), Some(hi)) = (self.k_min, self.k_max) {
            if lo > hi {
                return Err(bad("k_min", format!("{lo} exceeds k_max = {hi}")));
            }
        }
        if self.re_z.is_some() != self.im_z.is_some() {
            return Err(bad("z", "give both real and imaginary parts"));
        }
        if let (Some(re), Some(im)) = (self.re_z, self.im_z) {
            if !(re.is_finite() && im.is_finite()) {
                return Err(bad("z", "must be finite"));
            }
        }
        if let Some(g) = self.grid {
            if g < MIN_GRID {
                return Err(bad("grid", format!("must be at least {MIN_GRID}")));
            }
        }
        match self.command {
            Command::Report => {}
            Command::Jacobian => {
                self.need_family()?;
            }
            Command::Simulate => match self.need_family()? {
                Family::Dsg => {
                    let g = self.generation.ok_or_else(|| bad("generation", "required for dsg simulation"))?;
                    if !(1..=qwrg_core::network::MAX_DSG_GENERATION).contains(&g) {
                        return Err(bad(
                            "generation",
                            format!("must lie in 1..={}", qwrg_core::network::MAX_DSG_GENERATION),
                        ));
                    }
                    if self.size.is_some() {
                        return Err(bad("size", "ring size is only used for the line family"));
                    }
                }
                Family::Line => {
                    let n = self.size.ok_or_else(|| bad("size", "required for line simulation"))?;
                    if n < 2 || n % 2 != 0 || n > MAX_LOOP_SIZE {
                        return Err(bad("size", format!("must be even and in 2..={MAX_LOOP_SIZE}")));
                    }
                    if self.generation.is_some() {
                        return Err(bad("generation", "generation is only used for the gasket"));
                    }
                }
                Family::Mk3 => return Err(bad("family", "direct simulation is available for dsg and line only")),
            },
            Command::Rg => {
                self.need_family()?;
                if self.re_z.is_none() {
                    return Err(bad("z", "required by 'rg'"));
                }
                if self.k_max.is_some_and(|k| k > MAX_RG_K) {
                    return Err(bad("k_max", format!("must not exceed {MAX_RG_K}")));
                }
            }
            Command::Poles | Command::Series | Command::Scaling => {
                let fam = self.need_family()?;
                let (lo, hi) = self.k_range(1, 1);
                if fam == Family::Line && (lo == 0 || hi > MAX_LINE_K) {
                    return Err(bad("k_min", format!("line steps must lie in 1..={MAX_LINE_K}")));
                }
                if hi > MAX_RG_K {
                    return Err(bad("k_max", format!("must not exceed {MAX_RG_K}")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_offending_field() {
        let mut c = RunConfig::new(Command::Poles);
        assert_eq!(c.validate().unwrap_err().field, "family");
        c.family = Some(Family::Dsg);
        c.eta = Some(0.3);
        assert_eq!(c.validate().unwrap_err().field, "eta");
        c.eta = None;
        c.grid = Some(10);
        assert_eq!(c.validate().unwrap_err().field, "grid");
        c.grid = None;
        c.format = Format::Csv;
        assert!(c.validate().is_ok());
        let mut j = RunConfig::new(Command::Jacobian);
        j.family = Some(Family::Mk3);
        j.format = Format::Csv;
        assert_eq!(j.validate().unwrap_err().field, "format");
    }

    #[test]
    fn simulate_rules() {
        let mut c = RunConfig::new(Command::Simulate);
        c.family = Some(Family::Mk3);
        assert_eq!(c.validate().unwrap_err().field, "family");
        c.family = Some(Family::Line);
        c.size = Some(15);
        assert_eq!(c.validate().unwrap_err().field, "size");
        c.size = Some(16);
        assert!(c.validate().is_ok());
        c.family = Some(Family::Dsg);
        c.size = None;
        c.generation = Some(11);
        assert_eq!(c.validate().unwrap_err().field, "generation");
    }

    #[test]
    fn roundtrip_json() {
        let mut c = RunConfig::new(Command::Series);
        c.family = Some(Family::Line);
        c.eta = Some(0.7853981633974483);
        c.precision = Precision::Extended;
        c.bits = Some(256);
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"family\":\"line\""));
        assert_eq!(serde_json::from_str::<RunConfig>(&s).unwrap(), c);
    }
}
