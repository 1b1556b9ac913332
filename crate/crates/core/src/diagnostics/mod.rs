//! Observability and regularity checks.

mod bilipschitz;
mod flow;
mod observability;
mod sandwich;

use std::io::Write;

use crate::error::Result;

pub use bilipschitz::{bilipschitz_decompose_1d, BiLipschitzSplit, MIN_PROBES};
pub use flow::{verify_flow_deviation, DeviationReport, DeviationRow};
pub use observability::{
    observability_matrix, observability_matrix_rank, reconstruction_matrix, ObservabilityReport, Reconstruction,
    DEFAULT_RANK_TOL,
};
pub use sandwich::{
    lemma51_constants, model_constants, verify_sandwich, windowed_observation, SandwichConstants, SandwichReport,
    SIMPSON_PANELS,
};

/// One line of a diagnostics report.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, bound: f64, pass: bool) -> Self {
        Self { name: name.into(), value, bound, pass }
    }

    /// `PASS name value bound`.
    pub fn summary_line(&self) -> String {
        format!(
            "{} {} {:.6e} {:.6e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.bound
        )
    }
}

/// Writes `check,value,bound,pass`.
pub fn write_checks_csv<W: Write>(w: W, checks: &[Check]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["check", "value", "bound", "pass"])?;
    for c in checks {
        out.write_record([c.name.clone(), c.value.to_string(), c.bound.to_string(), c.pass.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
