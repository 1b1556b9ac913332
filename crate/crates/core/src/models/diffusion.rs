use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::path::{step_count, uniform_grid, ObservationPath, SignalPath};
use crate::rng::RngStream;

/// In-place vector field `x ↦ out`.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// `dX = b(X) dt + σ(X) dW`, `dY = h(X) dt + D dV` with `h(x) = C x + h₀(x)`.
///
/// The Lipschitz constants are declared by whoever builds the model; the
/// diagnostics module checks them on probe grids.
#[derive(Clone)]
pub struct DiffusionModel {
    pub dim: usize,
    pub drift: VectorField,
    /// Declared `‖b‖_L`.
    pub lip_drift: f64,
    pub diffusion: MatrixField,
    /// Declared `K ≥ sup Tr[σᵀσ]`.
    pub trace_bound: f64,
    pub c: DMatrix<f64>,
    pub h0: VectorField,
    /// Declared `‖C⁻¹h₀‖_L`.
    pub lip_cinv_h0: f64,
    pub d: DMatrix<f64>,
}

impl fmt::Debug for DiffusionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionModel")
            .field("dim", &self.dim)
            .field("lip_drift", &self.lip_drift)
            .field("trace_bound", &self.trace_bound)
            .field("c", &self.c)
            .field("lip_cinv_h0", &self.lip_cinv_h0)
            .field("d", &self.d)
            .finish_non_exhaustive()
    }
}

pub fn zero_field() -> VectorField {
    Arc::new(|_, out: &mut [f64]| out.iter_mut().for_each(|v| *v = 0.0))
}

pub fn linear_field(rate: f64) -> VectorField {
    Arc::new(move |x: &[f64], out: &mut [f64]| {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = rate * xi;
        }
    })
}

pub fn constant_diffusion(sigma: DMatrix<f64>) -> MatrixField {
    Arc::new(move |_| sigma.clone())
}

impl DiffusionModel {
    pub fn validate(&self) -> Result<()> {
        let q = self.dim;
        if self.c.nrows() != q || self.c.ncols() != q || self.d.nrows() != q {
            return Err(Error::DimensionMismatch(format!(
                "C must be {q}x{q} and D must have {q} rows"
            )));
        }
        if self.c.clone().try_inverse().is_none() {
            return Err(Error::InvalidModel("C is not invertible".into()));
        }
        if !(self.lip_cinv_h0 < 1.0) || self.lip_cinv_h0 < 0.0 {
            return Err(Error::InvalidModel(format!(
                "declared Lipschitz constant of C^-1 h0 is {} (must be < 1)",
                self.lip_cinv_h0
            )));
        }
        if self.lip_drift < 0.0 || self.trace_bound < 0.0 {
            return Err(Error::InvalidModel("declared constants must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        (self.diffusion)(&vec![0.0; self.dim]).ncols()
    }

    pub fn observation(&self, x: &[f64], out: &mut [f64]) {
        (self.h0)(x, out);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i] += self.c[(i, j)] * x[j];
            }
        }
    }

    pub fn norm_c_inverse(&self) -> f64 {
        self.c
            .clone()
            .try_inverse()
            .map_or(f64::INFINITY, |m| linalg::operator_norm(&m))
    }

    /// `‖h‖_L ≤ ‖C‖ (1 + ‖C⁻¹h₀‖_L)`.
    pub fn lip_observation(&self) -> f64 {
        linalg::operator_norm(&self.c) * (1.0 + self.lip_cinv_h0)
    }

    /// One Euler–Maruyama step of the signal, in place.
    pub fn em_step(&self, x: &mut [f64], dt: f64, scratch: &mut [f64], rng: &mut RngStream) {
        (self.drift)(x, scratch);
        let sigma = (self.diffusion)(x);
        let sdt = dt.sqrt();
        let z: Vec<f64> = (0..sigma.ncols()).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..self.dim {
            let mut noise = 0.0;
            for (j, zj) in z.iter().enumerate() {
                noise += sigma[(i, j)] * zj;
            }
            x[i] += scratch[i] * dt + noise * sdt;
        }
    }
}

/// Euler–Maruyama for the signal and the left-endpoint rule for `∫ h(X) ds`.
pub fn simulate_diffusion(
    model: &DiffusionModel,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    rng: &mut RngStream,
) -> Result<(SignalPath, ObservationPath)> {
    model.validate()?;
    if x0.len() != model.dim {
        return Err(Error::DimensionMismatch("initial state has the wrong dimension".into()));
    }
    let guard = 0.1 / model.lip_drift.max(1.0);
    if dt > guard {
        return Err(Error::InvalidModel(format!("step {dt} exceeds the stability guard {guard}")));
    }
    let steps = step_count(horizon, dt)?;
    let q = model.dim;
    let r = model.d.ncols();
    let sdt = dt.sqrt();
    let mut x = x0.to_vec();
    let mut scratch = vec![0.0; q];
    let mut hx = vec![0.0; q];
    let mut states = Vec::with_capacity((steps + 1) * q);
    let mut incs = Vec::with_capacity(steps * q);
    states.extend_from_slice(&x);
    for k in 0..steps {
        model.observation(&x, &mut hx);
        let e: Vec<f64> = (0..r).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..q {
            let noise: f64 = (0..r).map(|j| model.d[(i, j)] * e[j]).sum();
            incs.push(hx[i] * dt + noise * sdt);
        }
        model.em_step(&mut x, dt, &mut scratch, rng);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: k + 1 });
        }
        states.extend_from_slice(&x);
    }
    let times = uniform_grid(steps, dt);
    let obs = ObservationPath::from_increments(times.clone(), q, &incs)?;
    Ok((SignalPath { times, dim: q, states }, obs))
}

fn rk4_step(b: &dyn Fn(&[f64], &mut [f64]), x: &mut [f64], h: f64, k: &mut [Vec<f64>; 5]) {
    let n = x.len();
    let [k1, k2, k3, k4, tmp] = k;
    b(x, k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    b(tmp, k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    b(tmp, k3);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    b(tmp, k4);
    for i in 0..n {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Deterministic flow `η_t(x) = x + ∫_0^t b(η_s(x)) ds` by classical RK4.
pub fn eta_flow(b: &dyn Fn(&[f64], &mut [f64]), x: &[f64], t: f64, substeps: usize) -> Vec<f64> {
    let n = substeps.max(1);
    let h = t / n as f64;
    let mut y = x.to_vec();
    let mut k: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; x.len()]);
    for _ in 0..n {
        rk4_step(b, &mut y, h, &mut k);
    }
    y
}

/// Flow sampled at `t·i/nodes`, `i = 0..=nodes`, with `substeps` RK4 steps between nodes.
pub fn eta_flow_nodes(
    b: &dyn Fn(&[f64], &mut [f64]),
    x: &[f64],
    t: f64,
    nodes: usize,
    substeps: usize,
) -> Vec<Vec<f64>> {
    let h = t / (nodes * substeps.max(1)) as f64;
    let mut y = x.to_vec();
    let mut k: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; x.len()]);
    let mut out = Vec::with_capacity(nodes + 1);
    out.push(y.clone());
    for _ in 0..nodes {
        for _ in 0..substeps.max(1) {
            rk4_step(b, &mut y, h, &mut k);
        }
        out.push(y.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_raw;

    fn scalar_model(drift: VectorField, lip: f64, sigma: f64, c: f64, d: f64) -> DiffusionModel {
        DiffusionModel {
            dim: 1,
            drift,
            lip_drift: lip,
            diffusion: constant_diffusion(DMatrix::from_element(1, 1, sigma)),
            trace_bound: sigma * sigma,
            c: DMatrix::from_element(1, 1, c),
            h0: zero_field(),
            lip_cinv_h0: 0.0,
            d: DMatrix::from_element(1, 1, d),
        }
    }

    #[test]
    fn eta_examples() {
        let zero = |_: &[f64], o: &mut [f64]| o[0] = 0.0;
        assert_eq!(eta_flow(&zero, &[3.0], 2.0, 10), vec![3.0]);
        let one = |_: &[f64], o: &mut [f64]| o[0] = 1.0;
        assert!((eta_flow(&one, &[3.0], 2.0, 10)[0] - 5.0).abs() < 1e-14);
        let lin = |x: &[f64], o: &mut [f64]| o[0] = x[0];
        assert!((eta_flow(&lin, &[1.0], 1.0, 100)[0] - std::f64::consts::E).abs() < 1e-8);
        let nodes = eta_flow_nodes(&lin, &[1.0], 1.0, 4, 25);
        assert!((nodes[2][0] - 0.5f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn deterministic_observation() {
        let m = scalar_model(zero_field(), 0.0, 0.0, 1.0, 0.0);
        let (_, obs) = simulate_diffusion(&m, &[2.0], 1.0, 0.01, &mut stream_raw(0, 0)).unwrap();
        for i in 0..obs.len() {
            assert!((obs.value(i)[0] - 2.0 * obs.times()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn euler_first_order() {
        let lambda = 0.5;
        let m = scalar_model(linear_field(lambda), lambda, 0.0, 1.0, 1.0);
        let mut errs = Vec::new();
        for dt in [0.02, 0.01] {
            let (sig, _) = simulate_diffusion(&m, &[1.0], 2.0, dt, &mut stream_raw(0, 0)).unwrap();
            errs.push((sig.last()[0] - (lambda * 2.0).exp()).abs());
        }
        // Halving dt roughly halves the global error.
        let ratio = errs[0] / errs[1];
        assert!((1.8..2.2).contains(&ratio), "ratio {ratio}");
        assert!(errs[1] < 0.05);
    }

    #[test]
    fn brownian_variance() {
        let m = scalar_model(zero_field(), 0.0, 1.0, 1.0, 1.0);
        let mut rng = stream_raw(6, 0);
        let n = 100_000;
        let mut scratch = [0.0];
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let mut x = [0.0];
                for _ in 0..10 {
                    m.em_step(&mut x, 0.1, &mut scratch, &mut rng);
                }
                x[0]
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt(), "{var}");
    }

    #[test]
    fn guard_and_validation() {
        let m = scalar_model(linear_field(5.0), 5.0, 0.0, 1.0, 1.0);
        assert!(simulate_diffusion(&m, &[1.0], 1.0, 0.05, &mut stream_raw(0, 0)).is_err());
        let mut bad = scalar_model(zero_field(), 0.0, 1.0, 1.0, 1.0);
        bad.lip_cinv_h0 = 1.0;
        assert!(matches!(bad.validate(), Err(Error::InvalidModel(_))));
        bad.lip_cinv_h0 = 0.0;
        bad.c = DMatrix::zeros(1, 1);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn blow_up_detected() {
        let m = scalar_model(Arc::new(|x: &[f64], o: &mut [f64]| o[0] = x[0] * x[0]), 0.0, 0.0, 1.0, 1.0);
        let r = simulate_diffusion(&m, &[10.0], 10.0, 0.1, &mut stream_raw(0, 0));
        assert!(matches!(r, Err(Error::NonFiniteState { .. })));
    }
}
