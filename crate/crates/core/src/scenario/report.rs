//! JSON solve reports and their schema.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScenarioError;

/// The JSON schema every report must satisfy (no extra keys allowed).
pub const REPORT_SCHEMA: &str = include_str!("../../../../schemas/solve_report.schema.json");

/// One run, as written to the report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioReport {
    /// Effective `omega / (2 pi)` after rounding `n`.
    pub omega_over_2pi: f64,
    pub q: f64,
    pub n: usize,
    #[serde(rename = "N")]
    pub num_unknowns: usize,
    #[serde(rename = "R")]
    pub max_rank: u64,
    pub eps: f64,
    pub bc: String,
    pub velocity: String,
    pub forcing: String,
    pub sweep: String,
    /// Preconditioner construction only (no velocity sampling or assembly).
    pub t_setup_s: f64,
    pub t_solve_s: f64,
    /// GMRES Arnoldi steps.
    pub n_iter: usize,
    pub resid_history: Vec<f64>,
    pub true_resid: f64,
    pub seed: u64,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> Result<(), ScenarioError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))
    }

    /// Read a report, validating it against [`REPORT_SCHEMA`] first.
    pub fn read(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ScenarioError::Report(vec![format!("not JSON: {e}")]))?;
        validate_report(&value).map_err(ScenarioError::Report)?;
        serde_json::from_value(value).map_err(|e| ScenarioError::Report(vec![e.to_string()]))
    }
}

/// Check a parsed report against [`REPORT_SCHEMA`]; returns every violation.
pub fn validate_report(value: &serde_json::Value) -> Result<(), Vec<String>> {
    let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA).expect("bundled schema is JSON");
    let validator = jsonschema::validator_for(&schema).expect("bundled schema compiles");
    let errors: Vec<String> = validator
        .iter_errors(value)
        .map(|e| {
            let at = e.instance_path().to_string();
            if at.is_empty() {
                e.to_string()
            } else {
                format!("{at}: {e}")
            }
        })
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}
