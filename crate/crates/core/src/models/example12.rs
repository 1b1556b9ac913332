use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::models::path::{step_count, uniform_grid, ObservationPath};
use crate::rng::RngStream;

/// Exponentially growing signal `X_t = X_0 e^{λt}` on `[1, ∞)` observed through
/// `h(x) = 1/x` in white noise. Observable, yet filters from equivalent priors
/// need not merge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Example12Model {
    pub lambda: f64,
}

impl Example12Model {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidModel(format!("growth rate must be positive, got {lambda}")));
        }
        Ok(Self { lambda })
    }

    pub fn signal_at(&self, x0: f64, t: f64) -> f64 {
        x0 * (self.lambda * t).exp()
    }

    /// `∫_s^{s+dt} x0⁻¹ e^{−λr} dr`.
    pub fn drift_integral(&self, x0: f64, s: f64, dt: f64) -> f64 {
        let l = self.lambda;
        ((-l * s).exp() - (-l * (s + dt)).exp()) / (l * x0)
    }
}

pub fn simulate_example12(
    model: &Example12Model,
    x0: f64,
    horizon: f64,
    dt: f64,
    rng: &mut RngStream,
) -> Result<ObservationPath> {
    simulate_inner(model, x0, horizon, dt, Some(rng))
}

/// Same path with the Wiener part switched off.
pub fn simulate_example12_noiseless(
    model: &Example12Model,
    x0: f64,
    horizon: f64,
    dt: f64,
) -> Result<ObservationPath> {
    simulate_inner(model, x0, horizon, dt, None)
}

fn simulate_inner(
    model: &Example12Model,
    x0: f64,
    horizon: f64,
    dt: f64,
    mut rng: Option<&mut RngStream>,
) -> Result<ObservationPath> {
    if !(x0 >= 1.0) {
        return Err(Error::InvalidModel(format!("initial state {x0} lies outside [1, inf)")));
    }
    let steps = step_count(horizon, dt)?;
    let times = uniform_grid(steps, dt);
    let sdt = dt.sqrt();
    let incs: Vec<f64> = times[..steps]
        .iter()
        .map(|&t| {
            let noise = match rng.as_deref_mut() {
                Some(r) => sdt * r.sample::<f64, _>(StandardNormal),
                None => 0.0,
            };
            model.drift_integral(x0, t, dt) + noise
        })
        .collect();
    ObservationPath::from_increments(times, 1, &incs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_raw;

    #[test]
    fn noiseless_closed_form() {
        let m = Example12Model::new(1.0).unwrap();
        let p = simulate_example12_noiseless(&m, 1.0, 3.0, 0.01).unwrap();
        for (i, &t) in p.times().iter().enumerate() {
            assert!((p.value(i)[0] - (1.0 - (-t).exp())).abs() < 1e-13);
        }
    }

    #[test]
    fn huge_initial_state_is_pure_noise() {
        let m = Example12Model::new(1.0).unwrap();
        let p = simulate_example12_noiseless(&m, 1e12, 5.0, 0.01).unwrap();
        assert!(p.value(p.len() - 1)[0].abs() < 1e-11);
    }

    #[test]
    fn mean_matches_integral() {
        let m = Example12Model::new(0.5).unwrap();
        let (x0, horizon) = (2.0, 2.0);
        let n = 10_000;
        let mut rng = stream_raw(12, 0);
        let finals: Vec<f64> = (0..n)
            .map(|_| {
                let p = simulate_example12(&m, x0, horizon, 0.05, &mut rng).unwrap();
                p.value(p.len() - 1)[0]
            })
            .collect();
        let mean = finals.iter().sum::<f64>() / n as f64;
        let expected = (1.0 - (-0.5f64 * horizon).exp()) / (0.5 * x0);
        // Var(Y_T) = T.
        assert!((mean - expected).abs() < 3.0 * (horizon / n as f64).sqrt(), "{mean} vs {expected}");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Example12Model::new(0.0).is_err());
        let m = Example12Model::new(1.0).unwrap();
        assert!(simulate_example12_noiseless(&m, 0.5, 1.0, 0.1).is_err());
    }
}
