//! Filtering algorithms.

mod example12;
mod hmm;
mod kalman;
mod particle;
mod predictor;
mod resample;
mod trace;

pub use example12::{
    example12_initial_posterior, example12_log_likelihood, example12_statistic, grid_filter_example12,
    limit_posterior_example12,
};
pub use hmm::finite_hmm_forward;
pub use kalman::{kalman_bucy_run, KalmanState};
pub use particle::{particle_filter_run, ParticleFilter, ParticleModel, ParticleState};
pub use predictor::{predictor_step_discrete, predictor_step_exact, predictor_step_sampled};
pub use resample::systematic_resample;
pub use trace::{write_trace_csv, TraceRow};

/// Two filters driven by one observation path.
#[derive(Clone, Debug)]
pub struct StabilityPair<F> {
    pub filter_mu: F,
    pub filter_nu: F,
    /// Content hash of the shared path.
    pub path_hash: String,
}

impl<F> StabilityPair<F> {
    pub fn new(filter_mu: F, filter_nu: F, path: &crate::models::ObservationPath) -> Self {
        Self { filter_mu, filter_nu, path_hash: path.content_hash() }
    }
}
