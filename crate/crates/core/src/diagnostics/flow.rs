use crate::error::{Error, Result};
use crate::models::{eta_flow, DiffusionModel};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviationRow {
    pub s: f64,
    /// Largest Monte Carlo mean of `‖X_s − η_s(x)‖` over the probe points.
    pub estimate: f64,
    pub std_error: f64,
    /// `e^{‖b‖_L s} √(K s)`.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationReport {
    pub rows: Vec<DeviationRow>,
}

impl DeviationReport {
    pub fn at(&self, s: f64) -> Option<&DeviationRow> {
        self.rows.iter().find(|r| (r.s - s).abs() < 1e-9 * s.max(1.0))
    }
}

/// Monte Carlo estimate of `E‖X_s − η_s(x)‖` on the grid `s = k·dt ≤ t` for every
/// probe `x`, checked against the drift/diffusion bound plus 3 standard errors.
pub fn verify_flow_deviation(
    model: &DiffusionModel,
    t: f64,
    dt: f64,
    mc_paths: usize,
    probes: &[Vec<f64>],
    rng: &mut RngStream,
) -> Result<DeviationReport> {
    model.validate()?;
    let steps = crate::models::step_count(t, dt)?;
    if mc_paths < 2 || probes.is_empty() {
        return Err(Error::InvalidModel("need at least two paths and one probe".into()));
    }
    let q = model.dim;
    let mut rows: Vec<DeviationRow> = (1..=steps)
        .map(|k| {
            let s = k as f64 * dt;
            DeviationRow {
                s,
                estimate: 0.0,
                std_error: 0.0,
                bound: (model.lip_drift * s).exp() * (model.trace_bound * s).sqrt(),
            }
        })
        .collect();
    for x0 in probes {
        if x0.len() != q {
            return Err(Error::DimensionMismatch("probe has the wrong dimension".into()));
        }
        let flow: Vec<Vec<f64>> = (1..=steps)
            .map(|k| eta_flow(model.drift.as_ref(), x0, k as f64 * dt, 8 * k))
            .collect();
        let mut sum = vec![0.0; steps];
        let mut sum_sq = vec![0.0; steps];
        let mut x = vec![0.0; q];
        let mut scratch = vec![0.0; q];
        for _ in 0..mc_paths {
            x.copy_from_slice(x0);
            for k in 0..steps {
                model.em_step(&mut x, dt, &mut scratch, rng);
                let dev = x.iter().zip(&flow[k]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                if !dev.is_finite() {
                    return Err(Error::NonFiniteState { step: k + 1 });
                }
                sum[k] += dev;
                sum_sq[k] += dev * dev;
            }
        }
        let n = mc_paths as f64;
        for (k, row) in rows.iter_mut().enumerate() {
            let mean = sum[k] / n;
            let var = ((sum_sq[k] - n * mean * mean) / (n - 1.0)).max(0.0);
            if mean > row.estimate {
                row.estimate = mean;
                row.std_error = (var / n).sqrt();
            }
        }
    }
    for row in &rows {
        if row.estimate > row.bound + 3.0 * row.std_error + 1e-12 {
            return Err(Error::BoundViolated {
                time: row.s,
                estimate: row.estimate,
                bound: row.bound,
                allowance: 3.0 * row.std_error,
            });
        }
    }
    Ok(DeviationReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{constant_diffusion, zero_field};
    use crate::rng::stream_raw;
    use nalgebra::DMatrix;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn model(drift: crate::models::VectorField, lip: f64, sigma: f64) -> DiffusionModel {
        DiffusionModel {
            dim: 1,
            drift,
            lip_drift: lip,
            diffusion: constant_diffusion(DMatrix::from_element(1, 1, sigma)),
            trace_bound: sigma * sigma,
            c: DMatrix::from_element(1, 1, 1.0),
            h0: zero_field(),
            lip_cinv_h0: 0.0,
            d: DMatrix::from_element(1, 1, 1.0),
        }
    }

    #[test]
    fn no_noise_no_deviation() {
        let m = model(Arc::new(|_: &[f64], o: &mut [f64]| o[0] = 1.0), 0.0, 0.0);
        let r = verify_flow_deviation(&m, 0.5, 0.01, 10, &[vec![0.3]], &mut stream_raw(0, 0)).unwrap();
        assert!(r.rows.iter().all(|row| row.estimate < 1e-13 && row.bound == 0.0));
    }

    #[test]
    fn brownian_folded_normal() {
        let m = model(zero_field(), 0.0, 1.0);
        let r = verify_flow_deviation(&m, 1.0, 0.01, 20_000, &[vec![0.0]], &mut stream_raw(1, 0)).unwrap();
        for s in [0.1, 0.5, 1.0] {
            let row = r.at(s).unwrap();
            assert!((row.estimate - (2.0 * s / PI).sqrt()).abs() < 3.0 * row.std_error);
            assert!(row.estimate < s.sqrt());
        }
    }

    #[test]
    fn clipped_linear_drift() {
        let m = model(Arc::new(|x: &[f64], o: &mut [f64]| o[0] = x[0].clamp(-5.0, 5.0)), 1.0, 1.0);
        let r = verify_flow_deviation(&m, 0.5, 0.01, 20_000, &[vec![0.0], vec![1.0]], &mut stream_raw(2, 0)).unwrap();
        let row = r.at(0.5).unwrap();
        assert!((row.bound - 0.5f64.exp() * 0.5f64.sqrt()).abs() < 1e-12);
        assert!(row.estimate < row.bound);
    }

    #[test]
    fn violation_detected() {
        let mut m = model(zero_field(), 0.0, 2.0);
        m.trace_bound = 1.0;
        let r = verify_flow_deviation(&m, 0.2, 0.01, 2000, &[vec![0.0]], &mut stream_raw(3, 0));
        assert!(matches!(r, Err(Error::BoundViolated { .. })));
    }
}
