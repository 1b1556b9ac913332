use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::GaussianMeasure;
use crate::models::{LinearGaussianModel, ObservationPath};

#[derive(Clone, Debug, PartialEq)]
pub struct KalmanState {
    pub t: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl KalmanState {
    pub fn gaussian(&self) -> Result<GaussianMeasure> {
        GaussianMeasure::new(self.mean.clone(), self.covariance.clone())
    }
}

/// Riccati right-hand side `AP + PAᵀ + BBᵀ − PCᵀR⁻¹CP`.
struct Riccati {
    a: DMatrix<f64>,
    bbt: DMatrix<f64>,
    ct_rinv_c: DMatrix<f64>,
}

impl Riccati {
    fn rhs(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a * p + p * self.a.transpose() + &self.bbt - p * &self.ct_rinv_c * p
    }

    fn rk4(&self, p: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
        let k1 = self.rhs(p);
        let k2 = self.rhs(&(p + &k1 * (0.5 * h)));
        let k3 = self.rhs(&(p + &k2 * (0.5 * h)));
        let k4 = self.rhs(&(p + &k3 * h));
        p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    }
}

/// Kalman–Bucy filter on the observation grid. Returns one state per grid time.
///
/// The covariance follows the Riccati equation with one RK4 step per grid
/// interval; the mean takes an Euler step driven by the observed increment.
pub fn kalman_bucy_run(
    model: &LinearGaussianModel,
    prior: &GaussianMeasure,
    path: &ObservationPath,
) -> Result<Vec<KalmanState>> {
    let n = model.state_dim();
    if prior.dim() != n || path.dim() != model.obs_dim() {
        return Err(Error::DimensionMismatch("prior, model and path dimensions disagree".into()));
    }
    let rinv = model.innovation_precision()?;
    let ct_rinv = model.c.transpose() * &rinv;
    let ric = Riccati {
        a: model.a.clone(),
        bbt: model.signal_noise(),
        ct_rinv_c: &ct_rinv * &model.c,
    };
    let mut m = prior.mean.clone();
    let mut p = prior.covariance.clone();
    let mut out = Vec::with_capacity(path.len());
    out.push(KalmanState { t: 0.0, mean: m.clone(), covariance: p.clone() });
    for i in 0..path.len() - 1 {
        let dt = path.step(i);
        let dy = DVector::from_vec(path.increment(i));
        let innovation = dy - &model.c * &m * dt;
        m = &m + &model.a * &m * dt + &p * &ct_rinv * innovation;
        p = ric.rk4(&p, dt);
        linalg::symmetrize(&mut p);
        if m.iter().chain(p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: i + 1 });
        }
        out.push(KalmanState { t: path.times()[i + 1], mean: m.clone(), covariance: p.clone() });
    }
    Ok(out)
}
