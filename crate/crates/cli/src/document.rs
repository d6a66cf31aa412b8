//! Serialized result documents. Complex values are split into `re_`/`im_`
//! fields so the JSON stays flat and plot-ready.

use serde::{Deserialize, Serialize};

pub use qwrg_report::CriterionRow;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: &str = "qwrg.result/1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: String,
    pub tool: String,
    pub tool_version: String,
    pub config: RunConfig,
    pub duration_s: f64,
    pub payload: Option<Payload>,
    pub error: Option<ErrorRecord>,
}

impl ResultDocument {
    /// A failed report keeps its payload next to the error record.
    pub fn new(config: RunConfig, duration_s: f64, payload: Option<Payload>, error: Option<ErrorRecord>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            tool: "qwrg".into(),
            tool_version: TOOL_VERSION.into(),
            config,
            duration_s,
            payload,
            error,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents contain only finite numbers and strings")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// 0 on success, otherwise the exit code stored in the error record.
    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(0, |e| e.exit_code)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    /// `config`, `criterion` or `numerical`.
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl ErrorRecord {
    pub fn config(message: impl Into<String>) -> Self {
        Self { kind: "config".into(), message: message.into(), exit_code: 1 }
    }

    pub fn criterion(message: impl Into<String>) -> Self {
        Self { kind: "criterion".into(), message: message.into(), exit_code: 1 }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { kind: "numerical".into(), message: message.into(), exit_code: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Trajectory(TrajectorySummary),
    FlowTrace(FlowTraceDoc),
    Jacobian(JacobianDoc),
    Poles(PolesDoc),
    Scaling(ScalingDoc),
    Series(SeriesDoc),
    Report(ReportDoc),
}

impl Payload {
    /// One-line human summary echoed to standard output.
    pub fn summary(&self) -> String {
        match self {
            Payload::Trajectory(t) => format!(
                "{} N={} T={}: period {} (norm {:.15})",
                t.family,
                t.num_sites,
                t.steps,
                t.period.map_or_else(|| "not resolved".to_string(), |p| format!("{p:.4}")),
                t.final_norm
            ),
            Payload::FlowTrace(f) => format!(
                "{} z={}{:+}i: {} steps, {}, a={}{:+}i b={}{:+}i",
                f.family,
                f.re_z,
                f.im_z,
                f.k.len(),
                f.status,
                f.re_a.last().unwrap_or(&f64::NAN),
                f.im_a.last().unwrap_or(&f64::NAN),
                f.re_b.last().unwrap_or(&f64::NAN),
                f.im_b.last().unwrap_or(&f64::NAN)
            ),
            Payload::Jacobian(j) => format!("{}: lambda1={:.9} lambda2={:.9}", j.family, j.lambda1, j.lambda2),
            Payload::Poles(p) => {
                let parts: Vec<String> = p
                    .sets
                    .iter()
                    .map(|s| {
                        format!(
                            "k={} poles={} smallest={}",
                            s.k,
                            s.omega.len(),
                            s.omega.first().map_or_else(|| "-".to_string(), |w| format!("{w:.6}"))
                        )
                    })
                    .collect();
                format!("{}: {}", p.family, parts.join("; "))
            }
            Payload::Scaling(s) => format!("{}: d_f={:.7} d_w={:.7}", s.family, s.d_f, s.d_w),
            Payload::Series(s) => {
                let last = s.fits.last();
                format!(
                    "{}: {} fits, calA={}",
                    s.family,
                    s.fits.len(),
                    last.map_or_else(|| "-".to_string(), |f| format!("{:.9}{:+.3e}i", f.re_cal_a, f.im_cal_a))
                )
            }
            Payload::Report(r) => format!("{}/{} criteria passed", r.passed, r.rows.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub family: String,
    pub num_sites: usize,
    pub steps: usize,
    pub origin: usize,
    pub observable: String,
    pub final_norm: f64,
    pub re_overlap_final: f64,
    pub im_overlap_final: f64,
    pub mean_return_probability: f64,
    pub period: Option<f64>,
    pub frequency: Option<f64>,
    pub peak_to_floor: Option<f64>,
    pub period_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTraceDoc {
    pub family: String,
    pub re_z: f64,
    pub im_z: f64,
    pub eta: Option<f64>,
    /// `completed` or `diverged`.
    pub status: String,
    pub diverged_at: Option<u32>,
    pub k: Vec<u32>,
    pub re_a: Vec<f64>,
    pub im_a: Vec<f64>,
    pub re_b: Vec<f64>,
    pub im_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianDoc {
    pub family: String,
    pub lambda1: f64,
    pub lambda2: f64,
    pub re_a_star: f64,
    pub im_a_star: f64,
    pub re_b_star: f64,
    pub im_b_star: f64,
    pub re_z_star: f64,
    pub im_z_star: f64,
    pub eta: Option<f64>,
    pub jacobian: [[f64; 2]; 2],
    pub steps: Vec<f64>,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleSetDoc {
    pub k: u32,
    pub component: [usize; 2],
    pub omega: Vec<f64>,
    pub re_residue: Vec<Option<f64>>,
    pub im_residue: Vec<Option<f64>>,
    pub inverse_residual: Vec<f64>,
    pub grid: usize,
    pub unresolved: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolesDoc {
    pub family: String,
    pub eta: Option<f64>,
    pub sets: Vec<PoleSetDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSourceDoc {
    pub kind: String,
    pub d_f: Option<f64>,
    pub d_w: Option<f64>,
    pub uncertainty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingDoc {
    pub family: String,
    pub base: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub d_f: f64,
    pub d_w: f64,
    pub sources: Vec<ScalingSourceDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFitDoc {
    pub k: u32,
    pub re_cal_a: f64,
    pub im_cal_a: f64,
    pub re_cal_b: f64,
    pub im_cal_b: f64,
    pub re_alpha2_ratio: f64,
    pub im_alpha2_ratio: f64,
    /// Orders 0..=3.
    pub re_alpha: Vec<f64>,
    pub im_alpha: Vec<f64>,
    pub re_beta: Vec<f64>,
    pub im_beta: Vec<f64>,
    /// Orders −1..=2.
    pub re_x11: Vec<f64>,
    pub im_x11: Vec<f64>,
    pub re_x12: Vec<f64>,
    pub im_x12: Vec<f64>,
    pub radius: f64,
    pub nodes: usize,
    pub precision_bits: usize,
    pub consistency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRateDoc {
    pub order: i32,
    pub rate: f64,
    pub expected: f64,
    pub matched: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDoc {
    pub family: String,
    pub eta: Option<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub fits: Vec<SeriesFitDoc>,
    /// Growth of the `[X_k]₁₁` coefficients across the fitted `k`.
    pub x11_rates: Vec<OrderRateDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub passed: usize,
    pub failed: usize,
    pub rows: Vec<CriterionRow>,
}

/// Leading line naming the schema of an emitted CSV file.
pub fn csv_schema_line(kind: &str) -> String {
    format!("# schema_version=qwrg.{kind}/1\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Command;

    #[test]
    fn document_roundtrip() {
        let payload = Payload::Jacobian(JacobianDoc {
            family: "dsg".into(),
            lambda1: 3.0000000000000004,
            lambda2: 1.6666666666666667,
            re_a_star: 1.0,
            im_a_star: 0.0,
            re_b_star: 1.0,
            im_b_star: -0.0,
            re_z_star: 1.0,
            im_z_star: 0.0,
            eta: None,
            jacobian: [[0.1 + 0.2, 1e-300], [-2.5e17, 7.0]],
            steps: vec![1e-4],
            method: "m".into(),
        });
        let doc = ResultDocument::new(RunConfig::new(Command::Jacobian), 0.125, Some(payload), None);
        let back = ResultDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.exit_code(), 0);
    }

    #[test]
    fn error_documents() {
        let doc = ResultDocument::new(RunConfig::new(Command::Report), 0.0, None, Some(ErrorRecord::numerical("singular")));
        assert_eq!(doc.exit_code(), 2);
        assert!(doc.to_json().contains("\"kind\": \"numerical\""));
        assert_eq!(ResultDocument::from_json(&doc.to_json()).unwrap(), doc);
    }
}
