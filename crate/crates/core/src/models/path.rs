use std::io::Write;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Cumulative observation process `Y` sampled on a time grid, with `Y_0 = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationPath {
    times: Vec<f64>,
    dim: usize,
    values: Vec<f64>,
}

impl ObservationPath {
    pub fn new(times: Vec<f64>, dim: usize, values: Vec<f64>) -> Result<Self> {
        check_grid(&times)?;
        if values.len() != times.len() * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} observation values for {} grid points of dimension {dim}",
                values.len(),
                times.len()
            )));
        }
        if values[..dim].iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidModel("observation path must start at Y_0 = 0".into()));
        }
        Ok(Self { times, dim, values })
    }

    /// Accumulates increments `Y_{t_{i+1}} − Y_{t_i}` into a path.
    pub fn from_increments(times: Vec<f64>, dim: usize, increments: &[f64]) -> Result<Self> {
        if increments.len() + dim != times.len() * dim {
            return Err(Error::DimensionMismatch("increment count does not match the grid".into()));
        }
        let mut values = vec![0.0; dim];
        for (k, inc) in increments.chunks_exact(dim).enumerate() {
            for j in 0..dim {
                let v = values[k * dim + j] + inc[j];
                values.push(v);
            }
        }
        Self::new(times, dim, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of grid points (one more than the number of increments).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// `Y_{t_{i+1}} − Y_{t_i}`.
    pub fn increment(&self, i: usize) -> Vec<f64> {
        let a = self.value(i);
        let b = self.value(i + 1);
        b.iter().zip(a).map(|(x, y)| x - y).collect()
    }

    pub fn step(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }

    /// Hex SHA-256 of the grid and values; identifies the path in traces.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for t in &self.times {
            h.update(t.to_le_bytes());
        }
        for v in &self.values {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Signal states on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalPath {
    pub times: Vec<f64>,
    pub dim: usize,
    pub states: Vec<f64>,
}

impl SignalPath {
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }
}

pub(crate) fn check_grid(times: &[f64]) -> Result<()> {
    if times.first() != Some(&0.0) {
        return Err(Error::InvalidModel("time grid must start at 0".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidModel("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Number of steps of size `dt` in `[0, horizon]`; `dt` must divide `horizon`.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::InvalidModel(format!("bad horizon {horizon} / step {dt}")));
    }
    let n = (horizon / dt).round();
    if (n * dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::InvalidModel(format!("step {dt} does not divide horizon {horizon}")));
    }
    Ok(n as usize)
}

pub fn uniform_grid(steps: usize, dt: f64) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 * dt).collect()
}

/// Writes `t,x_0..x_{d-1},y_0..y_{q-1}`.
pub fn write_path_csv<W: Write>(w: W, signal: &SignalPath, obs: &ObservationPath) -> Result<()> {
    if signal.len() != obs.len() {
        return Err(Error::DimensionMismatch("signal and observation grids differ".into()));
    }
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((0..signal.dim).map(|i| format!("x_{i}")));
    header.extend((0..obs.dim()).map(|i| format!("y_{i}")));
    out.write_record(&header)?;
    for i in 0..signal.len() {
        let mut row = vec![signal.times[i].to_string()];
        row.extend(signal.state(i).iter().map(f64::to_string));
        row.extend(obs.value(i).iter().map(f64::to_string));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
