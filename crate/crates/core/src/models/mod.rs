//! Model specifications and path simulators.

mod chain;
mod diffusion;
mod example12;
mod hmm;
mod linear;
mod path;

pub use chain::{step_discrete_chain, DiscreteChainModel, Kernel};
pub use diffusion::{
    constant_diffusion, eta_flow, eta_flow_nodes, linear_field, simulate_diffusion, zero_field,
    DiffusionModel, MatrixField, VectorField,
};
pub use example12::{simulate_example12, simulate_example12_noiseless, Example12Model};
pub use hmm::FiniteHMM;
pub(crate) use hmm::{check_row, check_stochastic};
pub use linear::{simulate_linear_from, simulate_linear_gaussian, LinearGaussianModel, LinearStepper, Prior};
pub use path::{step_count, uniform_grid, write_path_csv, ObservationPath, SignalPath};
