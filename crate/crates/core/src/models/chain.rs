use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::measures::GaussianNoise;
use crate::models::diffusion::VectorField;
use crate::rng::RngStream;

/// Draws `x' ~ P(x, ·)` into `out`.
pub type Kernel = Arc<dyn Fn(&[f64], &mut RngStream, &mut [f64]) + Send + Sync>;

/// Discrete-time chain observed as `Y_n = h(X_n) + ξ_n`.
#[derive(Clone)]
pub struct DiscreteChainModel {
    pub dim: usize,
    pub kernel: Kernel,
    pub h: VectorField,
    pub noise: GaussianNoise,
}

impl fmt::Debug for DiscreteChainModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteChainModel")
            .field("dim", &self.dim)
            .field("noise", &self.noise)
            .finish_non_exhaustive()
    }
}

impl DiscreteChainModel {
    pub fn obs_dim(&self) -> usize {
        self.noise.dim()
    }

    pub fn observe(&self, x: &[f64], rng: &mut RngStream) -> Vec<f64> {
        let mut y = vec![0.0; self.obs_dim()];
        (self.h)(x, &mut y);
        let e = self.noise.sample_flat(1, rng);
        y.iter_mut().zip(e).for_each(|(a, b)| *a += b);
        y
    }

    /// Scalar AR(1) kernel `x' = a x + sd·N(0, 1)`.
    pub fn ar1_kernel(a: f64, sd: f64) -> Kernel {
        Arc::new(move |x: &[f64], rng: &mut RngStream, out: &mut [f64]| {
            let z: f64 = rand::Rng::sample(rng, rand_distr::StandardNormal);
            out[0] = a * x[0] + sd * z;
        })
    }
}

/// One transition followed by an observation of the new state.
pub fn step_discrete_chain(model: &DiscreteChainModel, x: &[f64], rng: &mut RngStream) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut next = vec![0.0; model.dim];
    (model.kernel)(x, rng, &mut next);
    let y = model.observe(&next, rng);
    Ok((next, y))
}
