use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::filters::resample::systematic_resample;
use crate::measures::{normalize_log, DiscreteMeasure};
use crate::models::DiscreteChainModel;
use crate::rng::RngStream;

/// Log-weights `log w_i + log g_ξ(y − h(x_i))`.
fn assimilate(pi: &DiscreteMeasure, y: &[f64], model: &DiscreteChainModel) -> Result<Vec<f64>> {
    let factor = model.noise.factor()?;
    let mut h = vec![0.0; model.obs_dim()];
    let mut r = vec![0.0; model.obs_dim()];
    let logw: Vec<f64> = pi
        .iter()
        .map(|(x, w)| {
            (model.h)(x, &mut h);
            for i in 0..r.len() {
                r[i] = y[i] - h[i] - model.noise.mean[i];
            }
            w.ln() + factor.log_density(&r)
        })
        .collect();
    normalize_log(&logw).map_err(|_| Error::AllWeightsZero { step: None })
}

/// One step of the one-step predictor: weight by the observation `y` (or skip
/// weighting when `y` is `None`), resample systematically to `n` atoms and
/// move every atom by one kernel draw.
pub fn predictor_step_sampled(
    pi: &DiscreteMeasure,
    y: Option<&[f64]>,
    model: &DiscreteChainModel,
    n: usize,
    rng: &mut RngStream,
) -> Result<DiscreteMeasure> {
    let weights = match y {
        Some(y) => assimilate(pi, y, model)?,
        None => pi.weights().to_vec(),
    };
    let dim = pi.dim();
    let idx = systematic_resample(&weights, n, rng.random());
    let mut atoms = vec![0.0; n * dim];
    for (out, i) in atoms.chunks_exact_mut(dim).zip(idx) {
        (model.kernel)(pi.atom(i), rng, out);
    }
    Ok(DiscreteMeasure::from_parts_unchecked(dim, atoms, vec![1.0 / n as f64; n]))
}

/// `π_{n+1}` from `π_n` and `Y_{n+1} = y`, keeping the atom count.
pub fn predictor_step_discrete(
    pi: &DiscreteMeasure,
    y: &[f64],
    model: &DiscreteChainModel,
    rng: &mut RngStream,
) -> Result<DiscreteMeasure> {
    predictor_step_sampled(pi, Some(y), model, pi.len(), rng)
}

/// Predictor step for a chain on the finite set of atoms of `pi` with
/// transition matrix `transition` (rows indexed like the atoms). Propagation
/// is exact, so atoms stay fixed and only the weights move.
pub fn predictor_step_exact(
    pi: &DiscreteMeasure,
    y: &[f64],
    model: &DiscreteChainModel,
    transition: &DMatrix<f64>,
) -> Result<DiscreteMeasure> {
    if transition.nrows() != pi.len() || !transition.is_square() {
        return Err(Error::DimensionMismatch("transition matrix does not match the atoms".into()));
    }
    crate::models::check_stochastic(transition, "transition")?;
    let w = assimilate(pi, y, model)?;
    let next: Vec<f64> = (0..pi.len())
        .map(|j| (0..pi.len()).map(|i| w[i] * transition[(i, j)]).sum())
        .collect();
    let s: f64 = next.iter().sum();
    DiscreteMeasure::new(pi.dim(), pi.atoms_flat().to_vec(), next.iter().map(|v| v / s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::GaussianNoise;
    use crate::models::linear_field;
    use crate::rng::stream_raw;
    use std::sync::Arc;

    fn identity_chain(var: f64) -> DiscreteChainModel {
        DiscreteChainModel {
            dim: 1,
            kernel: Arc::new(|x: &[f64], _: &mut RngStream, out: &mut [f64]| out.copy_from_slice(x)),
            h: linear_field(1.0),
            noise: GaussianNoise::scalar(var).unwrap(),
        }
    }

    #[test]
    fn flat_likelihood_is_pure_propagation() {
        let m = DiscreteChainModel {
            kernel: DiscreteChainModel::ar1_kernel(2.0, 0.0),
            ..identity_chain(1.0)
        };
        let pi = DiscreteMeasure::uniform(1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let next = predictor_step_sampled(&pi, None, &m, 4, &mut stream_raw(0, 0)).unwrap();
        assert_eq!(next.atoms_flat(), &[0.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn sharp_noise_concentrates() {
        let m = identity_chain(1e-6);
        let pi = DiscreteMeasure::uniform(1, vec![0.0, 0.5, 1.0, 1.5]).unwrap();
        let next = predictor_step_exact(&pi, &[0.98], &m, &DMatrix::identity(4, 4)).unwrap();
        assert!(next.weights()[2] > 0.999);
        let sampled = predictor_step_discrete(&pi, &[0.98], &m, &mut stream_raw(1, 0)).unwrap();
        assert!(sampled.atoms_flat().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn exact_matches_forward_prediction() {
        let t = DMatrix::from_row_slice(3, 3, &[0.7, 0.2, 0.1, 0.3, 0.3, 0.4, 0.05, 0.15, 0.8]);
        let m = DiscreteChainModel {
            h: Arc::new(|x: &[f64], o: &mut [f64]| o[0] = x[0] * x[0]),
            ..identity_chain(0.5)
        };
        let pi = DiscreteMeasure::new(1, vec![0.0, 1.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
        let y = 1.7;
        let next = predictor_step_exact(&pi, &[y], &m, &t).unwrap();
        // Independent: unnormalized Gaussian likelihoods then row-vector times matrix.
        let lik: Vec<f64> = [0.0f64, 1.0, 4.0].iter().map(|h| (-(y - h).powi(2) / (2.0 * 0.5)).exp()).collect();
        let post: Vec<f64> = pi.weights().iter().zip(&lik).map(|(a, b)| a * b).collect();
        let z: f64 = post.iter().sum();
        for j in 0..3 {
            let want: f64 = (0..3).map(|i| post[i] / z * t[(i, j)]).sum();
            assert!((next.weights()[j] - want).abs() < 1e-12);
        }
    }
}
