use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::filters::resample::systematic_resample;
use crate::linalg;
use crate::measures::DiscreteMeasure;
use crate::models::{DiffusionModel, LinearGaussianModel, LinearStepper, ObservationPath, Prior};
use crate::rng::RngStream;

/// Signal dynamics plus observation function, as seen by the particle filter.
pub trait ParticleModel: Sync {
    fn state_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    /// `DDᵀ`.
    fn obs_covariance(&self) -> DMatrix<f64>;
    fn obs_function(&self, x: &[f64], out: &mut [f64]);
    /// Returns a one-step propagator for the signal on the given step.
    fn propagator(&self, dt: f64) -> Box<dyn FnMut(&mut [f64], &mut RngStream) + '_>;
}

impl ParticleModel for LinearGaussianModel {
    fn state_dim(&self) -> usize {
        LinearGaussianModel::state_dim(self)
    }

    fn obs_dim(&self) -> usize {
        LinearGaussianModel::obs_dim(self)
    }

    fn obs_covariance(&self) -> DMatrix<f64> {
        self.obs_noise()
    }

    fn obs_function(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..x.len()).map(|j| self.c[(i, j)] * x[j]).sum();
        }
    }

    fn propagator(&self, dt: f64) -> Box<dyn FnMut(&mut [f64], &mut RngStream) + '_> {
        let stepper = LinearStepper::new(self, dt);
        let mut z = vec![0.0; LinearGaussianModel::state_dim(self)];
        Box::new(move |x, rng| stepper.advance(x, &mut z, rng))
    }
}

impl ParticleModel for DiffusionModel {
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn obs_dim(&self) -> usize {
        DiffusionModel::obs_dim(self)
    }

    fn obs_covariance(&self) -> DMatrix<f64> {
        &self.d * self.d.transpose()
    }

    fn obs_function(&self, x: &[f64], out: &mut [f64]) {
        self.observation(x, out)
    }

    fn propagator(&self, dt: f64) -> Box<dyn FnMut(&mut [f64], &mut RngStream) + '_> {
        let mut scratch = vec![0.0; self.dim];
        Box::new(move |x, rng| self.em_step(x, dt, &mut scratch, rng))
    }
}

#[derive(Clone, Debug)]
pub struct ParticleState {
    pub t: f64,
    pub measure: DiscreteMeasure,
    /// Accumulated log-weights since the last resampling.
    pub log_weights: Vec<f64>,
    pub ess: f64,
}

/// Bootstrap particle filter with Girsanov log-weights and systematic
/// resampling when the ESS drops below `N/2`.
pub struct ParticleFilter<'m, M: ParticleModel + ?Sized> {
    model: &'m M,
    rinv: DMatrix<f64>,
    dim: usize,
    t: f64,
    particles: Vec<f64>,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
    step: usize,
}

impl<'m, M: ParticleModel + ?Sized> ParticleFilter<'m, M> {
    pub fn new(model: &'m M, particles: Vec<f64>) -> Result<Self> {
        let dim = model.state_dim();
        if particles.is_empty() || particles.len() % dim != 0 {
            return Err(Error::DimensionMismatch("particle buffer is not a multiple of the state dimension".into()));
        }
        let n = particles.len() / dim;
        if n < 2 {
            return Err(Error::InvalidModel("a particle filter needs at least two particles".into()));
        }
        let rinv = linalg::GaussianFactor::new(&model.obs_covariance())
            .map_err(|_| Error::SingularInnovation)?
            .precision;
        Ok(Self {
            model,
            rinv,
            dim,
            t: 0.0,
            particles,
            log_weights: vec![0.0; n],
            weights: vec![1.0 / n as f64; n],
            step: 0,
        })
    }

    pub fn from_prior(model: &'m M, prior: &Prior, n: usize, rng: &mut RngStream) -> Result<Self> {
        if prior.dim() != model.state_dim() {
            return Err(Error::DimensionMismatch("prior dimension differs from the state".into()));
        }
        Self::new(model, prior.sample_flat(n, rng))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (x, w) in self.particles.chunks_exact(self.dim).zip(&self.weights) {
            for (mi, xi) in m.iter_mut().zip(x) {
                *mi += w * xi;
            }
        }
        m
    }

    pub fn measure(&self) -> DiscreteMeasure {
        DiscreteMeasure::from_parts_unchecked(self.dim, self.particles.clone(), self.weights.clone())
    }

    pub fn state(&self) -> ParticleState {
        ParticleState {
            t: self.t,
            measure: self.measure(),
            log_weights: self.log_weights.clone(),
            ess: self.ess(),
        }
    }

    /// Weights by the increment `dy` over `[t, t + dt]` at the current
    /// positions, resamples if needed, then propagates one step.
    pub fn assimilate(
        &mut self,
        dy: &[f64],
        dt: f64,
        propagate: &mut dyn FnMut(&mut [f64], &mut RngStream),
        rng: &mut RngStream,
    ) -> Result<()> {
        self.step += 1;
        let q = self.model.obs_dim();
        let mut h = vec![0.0; q];
        let mut rh = vec![0.0; q];
        for (x, lw) in self.particles.chunks_exact(self.dim).zip(self.log_weights.iter_mut()) {
            self.model.obs_function(x, &mut h);
            for i in 0..q {
                rh[i] = (0..q).map(|j| self.rinv[(i, j)] * h[j]).sum();
            }
            let lin: f64 = rh.iter().zip(dy).map(|(a, b)| a * b).sum();
            let quad: f64 = rh.iter().zip(&h).map(|(a, b)| a * b).sum();
            *lw += lin - 0.5 * quad * dt;
        }
        self.weights = crate::measures::normalize_log(&self.log_weights).map_err(|_| Error::AllWeightsZero {
            step: Some(self.step),
        })?;
        let n = self.len();
        if self.ess() < 0.5 * n as f64 {
            let idx = systematic_resample(&self.weights, n, rng.random());
            let mut fresh = Vec::with_capacity(self.particles.len());
            for i in idx {
                fresh.extend_from_slice(&self.particles[i * self.dim..(i + 1) * self.dim]);
            }
            self.particles = fresh;
            self.log_weights.iter_mut().for_each(|v| *v = 0.0);
            self.weights.iter_mut().for_each(|v| *v = 1.0 / n as f64);
        }
        for x in self.particles.chunks_exact_mut(self.dim) {
            propagate(x, rng);
        }
        if self.particles.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: self.step });
        }
        self.t += dt;
        Ok(())
    }
}

/// Runs the filter along `path`, recording the state every `cadence` steps and
/// at the final time.
pub fn particle_filter_run<M: ParticleModel + ?Sized>(
    model: &M,
    prior: &Prior,
    path: &ObservationPath,
    n: usize,
    cadence: usize,
    rng: &mut RngStream,
) -> Result<Vec<ParticleState>> {
    if path.dim() != model.obs_dim() {
        return Err(Error::DimensionMismatch("path dimension differs from the observation".into()));
    }
    let cadence = cadence.max(1);
    let mut pf = ParticleFilter::from_prior(model, prior, n, rng)?;
    let mut out = vec![pf.state()];
    let steps = path.len() - 1;
    let mut prop: Option<(f64, Box<dyn FnMut(&mut [f64], &mut RngStream) + '_>)> = None;
    for i in 0..steps {
        let dt = path.step(i);
        if prop.as_ref().is_none_or(|(h, _)| (h - dt).abs() > 1e-12 * dt) {
            prop = Some((dt, model.propagator(dt)));
        }
        let (_, f) = prop.as_mut().expect("propagator initialized above");
        pf.assimilate(&path.increment(i), dt, f.as_mut(), rng)?;
        pf.t = path.times()[i + 1];
        if (i + 1) % cadence == 0 || i + 1 == steps {
            out.push(pf.state());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::kalman_bucy_run;
    use crate::measures::GaussianMeasure;
    use crate::models::{constant_diffusion, linear_field, simulate_linear_gaussian, uniform_grid, zero_field};
    use crate::rng::stream_raw;
    use std::sync::Arc;

    fn blind_diffusion(sigma: f64) -> DiffusionModel {
        DiffusionModel {
            dim: 1,
            drift: linear_field(-0.5),
            lip_drift: 0.5,
            diffusion: constant_diffusion(DMatrix::from_element(1, 1, sigma)),
            trace_bound: sigma * sigma,
            c: DMatrix::from_element(1, 1, 1.0),
            h0: Arc::new(|x: &[f64], o: &mut [f64]| o[0] = -x[0]),
            lip_cinv_h0: 0.0,
            d: DMatrix::from_element(1, 1, 1.0),
        }
    }

    #[test]
    fn no_information_follows_prior_flow() {
        // h = Cx + h0 = 0, so the weights never move.
        let model = blind_diffusion(0.0);
        let incs: Vec<f64> = (0..100).map(|i| 0.1 * (i as f64).cos()).collect();
        let path = ObservationPath::from_increments(uniform_grid(100, 0.01), 1, &incs).unwrap();
        let prior = Prior::Gaussian(GaussianMeasure::scalar(2.0, 1.0).unwrap());
        let run = particle_filter_run(&model, &prior, &path, 10_000, 10, &mut stream_raw(1, 0)).unwrap();
        let last = run.last().unwrap();
        assert!((last.ess - 10_000.0).abs() < 1e-6);
        let m0 = run[0].measure.mean()[0];
        // Euler flow of x' = -x/2 over 100 steps.
        let factor = (1.0 - 0.005f64).powi(100);
        assert!((last.measure.mean()[0] - m0 * factor).abs() < 1e-9);
        assert!((m0 - 2.0).abs() < 3.0 / 100.0);
    }

    #[test]
    fn deterministic_signal_keeps_uniform_weights() {
        let mut model = blind_diffusion(0.0);
        model.h0 = zero_field();
        let path = ObservationPath::from_increments(uniform_grid(50, 0.02), 1, &vec![0.3; 50]).unwrap();
        let prior = Prior::Discrete(DiscreteMeasure::dirac(&[1.5]));
        let run = particle_filter_run(&model, &prior, &path, 16, 1, &mut stream_raw(2, 0)).unwrap();
        for s in &run {
            assert!(s.measure.weights().iter().all(|&w| w == 1.0 / 16.0));
            let x0 = s.measure.atom(0)[0];
            assert!(s.measure.atoms_flat().iter().all(|&x| x == x0));
        }
    }

    #[test]
    fn tracks_kalman_on_linear_model() {
        let model = LinearGaussianModel::scalar(-0.5, 1.0, 1.0, 1.0);
        let prior_g = GaussianMeasure::scalar(1.0, 2.0).unwrap();
        let prior = Prior::Gaussian(prior_g.clone());
        let mut rng = stream_raw(3, 0);
        let (_, path) = simulate_linear_gaussian(&model, &prior, 1.0, 1e-3, &mut rng).unwrap();
        let kb = kalman_bucy_run(&model, &prior_g, &path).unwrap();
        let pf = particle_filter_run(&model, &prior, &path, 20_000, 1000, &mut rng).unwrap();
        let (k, p) = (kb.last().unwrap(), pf.last().unwrap());
        let sd = (k.covariance[(0, 0)] / p.ess).sqrt();
        assert!((p.measure.mean()[0] - k.mean[0]).abs() < 4.0 * sd + 5e-3);
        assert!((p.measure.covariance()[(0, 0)] - k.covariance[(0, 0)]).abs() < 0.05);
    }

    #[test]
    fn singular_noise_rejected() {
        let mut model = blind_diffusion(1.0);
        model.d = DMatrix::zeros(1, 1);
        assert!(matches!(
            ParticleFilter::new(&model, vec![0.0, 1.0]),
            Err(Error::SingularInnovation)
        ));
    }
}
