use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, GaussianFactor};
use crate::measures::{DiscreteMeasure, GaussianMeasure};
use crate::models::path::{step_count, uniform_grid, ObservationPath, SignalPath};
use crate::rng::RngStream;

/// `dX = A X dt + B dW`, `dY = C X dt + D dV`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGaussianModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl LinearGaussianModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let q = c.nrows();
        let ok = a.is_square() && b.nrows() == n && c.ncols() == n && d.nrows() == q && n > 0;
        if !ok {
            return Err(Error::DimensionMismatch(format!(
                "A {}x{}, B {}x{}, C {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn scalar(a: f64, b: f64, c: f64, d: f64) -> Self {
        let m = |v| DMatrix::from_element(1, 1, v);
        Self {
            a: m(a),
            b: m(b),
            c: m(c),
            d: m(d),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn signal_noise(&self) -> DMatrix<f64> {
        &self.b * self.b.transpose()
    }

    pub fn obs_noise(&self) -> DMatrix<f64> {
        &self.d * self.d.transpose()
    }

    /// `(D Dᵀ)⁻¹`; fails when the observation noise is degenerate.
    pub fn innovation_precision(&self) -> Result<DMatrix<f64>> {
        GaussianFactor::new(&self.obs_noise())
            .map(|f| f.precision)
            .map_err(|_| Error::SingularInnovation)
    }
}

/// Initial law accepted by the simulators and particle filters.
#[derive(Clone, Debug, PartialEq)]
pub enum Prior {
    Gaussian(GaussianMeasure),
    Discrete(DiscreteMeasure),
}

impl Prior {
    pub fn dim(&self) -> usize {
        match self {
            Prior::Gaussian(g) => g.dim(),
            Prior::Discrete(d) => d.dim(),
        }
    }

    pub fn sample_flat(&self, n: usize, rng: &mut RngStream) -> Vec<f64> {
        match self {
            Prior::Gaussian(g) => g.sample_flat(n, rng),
            Prior::Discrete(d) => d.sample_flat(n, rng),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            Prior::Gaussian(g) => linalg::to_vec(&g.mean),
            Prior::Discrete(d) => d.mean(),
        }
    }
}

/// Exact one-step transition of the signal plus the observation map on a fixed `dt`.
#[derive(Clone, Debug)]
pub struct LinearStepper {
    pub dt: f64,
    pub phi: DMatrix<f64>,
    pub q_factor: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl LinearStepper {
    pub fn new(model: &LinearGaussianModel, dt: f64) -> Self {
        let (phi, q) = linalg::van_loan(&model.a, &model.signal_noise(), dt);
        Self {
            dt,
            phi,
            q_factor: linalg::psd_factor(&q),
            c: model.c.clone(),
            d: model.d.clone(),
        }
    }

    /// Advances `x` in place by one exact Gaussian transition.
    pub fn advance(&self, x: &mut [f64], z: &mut [f64], rng: &mut RngStream) {
        let n = x.len();
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let old = x.to_vec();
        for i in 0..n {
            let mut v = 0.0;
            for j in 0..n {
                v += self.phi[(i, j)] * old[j] + self.q_factor[(i, j)] * z[j];
            }
            x[i] = v;
        }
    }

    /// `C x dt + D √dt ε`, left-endpoint rule for `∫ C X ds`.
    pub fn observe(&self, x: &[f64], rng: &mut RngStream) -> Vec<f64> {
        let sdt = self.dt.sqrt();
        let e: Vec<f64> = (0..self.d.ncols()).map(|_| rng.sample(StandardNormal)).collect();
        (0..self.c.nrows())
            .map(|i| {
                let drift: f64 = (0..x.len()).map(|j| self.c[(i, j)] * x[j]).sum::<f64>() * self.dt;
                let noise: f64 = (0..e.len()).map(|j| self.d[(i, j)] * e[j]).sum::<f64>() * sdt;
                drift + noise
            })
            .collect()
    }
}

/// Simulates signal and cumulative observations on `[0, horizon]`.
pub fn simulate_linear_gaussian(
    model: &LinearGaussianModel,
    prior: &Prior,
    horizon: f64,
    dt: f64,
    rng: &mut RngStream,
) -> Result<(SignalPath, ObservationPath)> {
    if prior.dim() != model.state_dim() {
        return Err(Error::DimensionMismatch("prior dimension differs from the state".into()));
    }
    let x0 = prior.sample_flat(1, rng);
    simulate_linear_from(model, &x0, horizon, dt, rng)
}

pub fn simulate_linear_from(
    model: &LinearGaussianModel,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    rng: &mut RngStream,
) -> Result<(SignalPath, ObservationPath)> {
    let steps = step_count(horizon, dt)?;
    let n = model.state_dim();
    let q = model.obs_dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch("initial state has the wrong dimension".into()));
    }
    let stepper = LinearStepper::new(model, dt);
    let mut x = x0.to_vec();
    let mut z = vec![0.0; n];
    let mut states = Vec::with_capacity((steps + 1) * n);
    let mut incs = Vec::with_capacity(steps * q);
    states.extend_from_slice(&x);
    for _ in 0..steps {
        incs.extend(stepper.observe(&x, rng));
        stepper.advance(&mut x, &mut z, rng);
        states.extend_from_slice(&x);
    }
    let times = uniform_grid(steps, dt);
    let obs = ObservationPath::from_increments(times.clone(), q, &incs)?;
    Ok((SignalPath { times, dim: n, states }, obs))
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_raw;

    #[test]
    fn deterministic_case() {
        let model = LinearGaussianModel::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::from_row_slice(1, 2, &[2.0, -1.0]),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let (sig, obs) = simulate_linear_from(&model, &[1.5, 0.5], 1.0, 0.125, &mut stream_raw(0, 0)).unwrap();
        for i in 0..sig.len() {
            assert_eq!(sig.state(i), &[1.5, 0.5]);
            assert!((obs.value(i)[0] - 2.5 * sig.times[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn scalar_exponential_growth() {
        let model = LinearGaussianModel::scalar(0.7, 0.0, 1.0, 1.0);
        let (sig, _) = simulate_linear_from(&model, &[2.0], 3.0, 0.25, &mut stream_raw(0, 0)).unwrap();
        for i in 0..sig.len() {
            let exact = 2.0 * (0.7 * sig.times[i]).exp();
            assert!((sig.state(i)[0] - exact).abs() < 1e-12 * exact);
        }
    }

    #[test]
    fn brownian_variance() {
        let model = LinearGaussianModel::scalar(0.0, 1.0, 1.0, 1.0);
        let stepper = LinearStepper::new(&model, 0.25);
        let mut rng = stream_raw(4, 0);
        let n = 100_000;
        let mut z = [0.0];
        let finals: Vec<f64> = (0..n)
            .map(|_| {
                let mut x = [0.0];
                for _ in 0..4 {
                    stepper.advance(&mut x, &mut z, &mut rng);
                }
                x[0]
            })
            .collect();
        let m = finals.iter().sum::<f64>() / n as f64;
        let var = finals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        // Var of the sample variance of N(0,1) is 2/(n-1).
        assert!((var - 1.0).abs() < 3.0 * (2.0 / (n - 1) as f64).sqrt(), "{var}");
    }

    #[test]
    fn reproducible() {
        let model = LinearGaussianModel::scalar(-0.5, 1.0, 1.0, 0.5);
        let prior = Prior::Gaussian(GaussianMeasure::scalar(0.0, 1.0).unwrap());
        let a = simulate_linear_gaussian(&model, &prior, 2.0, 0.01, &mut stream_raw(9, 0)).unwrap();
        let b = simulate_linear_gaussian(&model, &prior, 2.0, 0.01, &mut stream_raw(9, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_errors() {
        let bad = LinearGaussianModel::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(3, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
        );
        assert!(matches!(bad, Err(Error::DimensionMismatch(_))));
        let singular = LinearGaussianModel::scalar(0.0, 1.0, 1.0, 0.0);
        assert!(matches!(singular.innovation_precision(), Err(Error::SingularInnovation)));
    }
}
