//! Filter stability laboratory.
//!
//! Hidden Markov models with white-noise observations, the filters that track
//! them, and the machinery to measure whether two filters started from
//! different priors forget their initial condition: the dual bounded-Lipschitz
//! distance (exactly, and through certified bounds), total variation, and
//! observability diagnostics.

pub mod diagnostics;
pub mod error;
pub mod filters;
pub mod harness;
pub mod linalg;
pub mod measures;
pub mod metrics;
pub mod models;
pub mod rng;

pub use error::{Error, Result};
pub use measures::{DiscreteMeasure, GaussianMeasure, GaussianNoise};
pub use metrics::MetricReport;
pub use models::ObservationPath;
