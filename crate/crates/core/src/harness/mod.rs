//! Config-driven experiments and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod convolution;
pub mod counterexample;
pub mod diagnose;
pub mod lemma42;
pub mod oracles;
pub mod output;
pub mod predictor;
pub mod simulate;
pub mod stability;

use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, ExperimentKind, FieldSpec, ModelSpec, PriorSpec, Thresholds};
pub use output::{output_root, ExperimentOutput, Series, OUTPUT_ROOT_VAR};

use crate::error::Result;

/// Runs one experiment in memory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.kind {
        ExperimentKind::Simulate => simulate::simulate_experiment(cfg),
        ExperimentKind::Filter => simulate::filter_experiment(cfg),
        ExperimentKind::Stability => {
            let traces = stability::run_stability(cfg)?;
            stability::stability_output(cfg, &traces)
        }
        ExperimentKind::Counterexample => counterexample::counterexample_experiment(cfg),
        ExperimentKind::Predictor => predictor::predictor_experiment(cfg),
        ExperimentKind::Convolution => convolution::convolution_experiment(cfg),
        ExperimentKind::Lemma42 => lemma42::lemma42_experiment(cfg),
        ExperimentKind::Diagnose => diagnose::diagnose_experiment(cfg),
    }
}

/// Loads a config file, runs it and writes results under `root/<name>/`.
/// Returns the output directory with the in-memory results.
pub fn run_config_file(path: &Path, root: &Path) -> Result<(PathBuf, ExperimentOutput)> {
    let cfg = ExperimentConfig::load(path)?;
    let out = run_experiment(&cfg)?;
    let dir = root.join(cfg.output_name());
    out.write_to(&dir)?;
    Ok((dir, out))
}
