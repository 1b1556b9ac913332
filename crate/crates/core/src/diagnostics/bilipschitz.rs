use crate::error::{Error, Result};

pub const MIN_PROBES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiLipschitzSplit {
    /// Linear part, so that `h(x) = C x + h0(x)`.
    pub c: f64,
    /// `(M − m)/(M + m)`.
    pub epsilon: f64,
    pub lower: f64,
    pub upper: f64,
    /// Grid estimate of `‖C⁻¹h0‖_L`.
    pub lip_cinv_h0: f64,
    pub valid: bool,
}

/// Splits a monotone scalar map into `C x + h0(x)` with `‖C⁻¹h0‖_L ≤ ε`,
/// estimating the derivative range from adjacent difference quotients on a
/// sorted probe grid.
pub fn bilipschitz_decompose_1d(h: impl Fn(f64) -> f64, grid: &[f64]) -> Result<BiLipschitzSplit> {
    if grid.len() < MIN_PROBES {
        return Err(Error::InvalidModel(format!("probe grid needs at least {MIN_PROBES} points")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidModel("probe grid must be strictly increasing".into()));
    }
    let values: Vec<f64> = grid.iter().map(|&x| h(x)).collect();
    let slopes: Vec<f64> = (1..grid.len())
        .map(|i| (values[i] - values[i - 1]) / (grid[i] - grid[i - 1]))
        .collect();
    let sign = slopes.iter().find(|s| **s != 0.0).map_or(0.0, |s| s.signum());
    if let Some(i) = slopes.iter().position(|s| s.signum() != sign || *s == 0.0) {
        return Err(Error::NotMonotone { at: grid[i] });
    }
    let (mut lower, mut upper) = (f64::INFINITY, 0.0f64);
    for s in &slopes {
        lower = lower.min(s.abs());
        upper = upper.max(s.abs());
    }
    let c = sign * (upper + lower) / 2.0;
    let epsilon = (upper - lower) / (upper + lower);
    let lip_cinv_h0 = slopes.iter().map(|s| ((s - c) / c).abs()).fold(0.0, f64::max);
    Ok(BiLipschitzSplit {
        c,
        epsilon,
        lower,
        upper,
        lip_cinv_h0,
        valid: lower > 0.0 && epsilon < 1.0 && lip_cinv_h0 <= epsilon * (1.0 + 1e-12) + 1e-15,
    })
}
