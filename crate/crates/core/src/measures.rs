//! Probability measures on ℝ^d and the elementary operations on them.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, GaussianFactor};
use crate::rng::RngStream;

const WEIGHT_SUM_TOL: f64 = 1e-12;
const COV_TOL: f64 = 1e-10;

/// Finitely supported probability measure.
///
/// Atoms are stored row-major in one flat buffer; coinciding atoms are kept as
/// separate entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be at least 1".into()));
        }
        if weights.is_empty() || atoms.len() != dim * weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} coordinates do not form {} atoms of dimension {dim}",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!("weight {w} is not a nonnegative real")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite atom coordinate".into()));
        }
        Ok(Self { dim, atoms, weights })
    }

    pub fn from_points(points: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch("atoms of differing dimension".into()));
        }
        Self::new(dim, points.concat(), weights)
    }

    /// Builds a measure from unnormalized nonnegative weights.
    pub fn from_raw_weights(dim: usize, atoms: Vec<f64>, raw: &[f64]) -> Result<Self> {
        Self::new(dim, atoms, normalize(raw)?)
    }

    pub fn from_log_weights(dim: usize, atoms: Vec<f64>, log_weights: &[f64]) -> Result<Self> {
        Self::new(dim, atoms, normalize_log(log_weights)?)
    }

    pub fn uniform(dim: usize, atoms: Vec<f64>) -> Result<Self> {
        let n = if dim == 0 { 0 } else { atoms.len() / dim };
        Self::new(dim, atoms, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn dirac(point: &[f64]) -> Self {
        Self {
            dim: point.len(),
            atoms: point.to_vec(),
            weights: vec![1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms_flat(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.atoms.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (x, w) in self.iter() {
            for (mi, xi) in m.iter_mut().zip(x) {
                *mi += w * xi;
            }
        }
        m
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let m = self.mean();
        let mut c = DMatrix::zeros(self.dim, self.dim);
        for (x, w) in self.iter() {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    c[(i, j)] += w * (x[i] - m[i]) * (x[j] - m[j]);
                }
            }
        }
        c
    }

    /// Effective sample size `1 / Σ w_i²`.
    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Image measure under `f`; weights are carried over unchanged and
    /// coinciding images stay separate atoms.
    pub fn pushforward(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        let mut out_dim = None;
        for x in self.atoms.chunks_exact(self.dim) {
            let y = f(x);
            match out_dim {
                None => out_dim = Some(y.len()),
                Some(d) if d != y.len() => {
                    return Err(Error::DimensionMismatch("pushforward map changed output dimension".into()))
                }
                _ => {}
            }
            atoms.extend(y);
        }
        Self::new(out_dim.unwrap_or(self.dim), atoms, self.weights.clone())
    }

    pub(crate) fn from_parts_unchecked(dim: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Self {
        Self { dim, atoms, weights }
    }

    /// Inverse-CDF sampling, one uniform per draw. Returns `n * dim` coordinates.
    pub fn sample_flat(&self, n: usize, rng: &mut RngStream) -> Vec<f64> {
        let mut cdf = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w;
            cdf.push(acc);
        }
        let mut out = Vec::with_capacity(n * self.dim);
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * acc;
            let idx = cdf.partition_point(|&c| c <= u).min(self.len() - 1);
            out.extend_from_slice(self.atom(idx));
        }
        out
    }

    /// Serializes as CSV with header `atom_0,...,atom_{d-1},weight`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim).map(|i| format!("atom_{i}")).collect();
        header.push("weight".into());
        w.write_record(&header)?;
        for (x, wt) in self.iter() {
            let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
            row.push(wt.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let dim = headers.len().checked_sub(1).filter(|d| *d > 0).ok_or_else(|| {
            Error::InvalidMeasure("CSV needs at least one atom column and a weight column".into())
        })?;
        for (i, h) in headers.iter().take(dim).enumerate() {
            if h.trim() != format!("atom_{i}") {
                return Err(Error::InvalidMeasure(format!("unexpected column `{h}`")));
            }
        }
        if headers.get(dim).map(str::trim) != Some("weight") {
            return Err(Error::InvalidMeasure("last column must be `weight`".into()));
        }
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| {
                    Error::InvalidMeasure(format!("row {}: `{s}`: {e}", line + 2))
                })
            };
            for j in 0..dim {
                atoms.push(parse(&rec[j])?);
            }
            weights.push(parse(&rec[dim])?);
        }
        Self::new(dim, atoms, weights)
    }
}

/// Rescales nonnegative weights to sum to one.
pub fn normalize(raw: &[f64]) -> Result<Vec<f64>> {
    if let Some(w) = raw.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidMeasure(format!("raw weight {w} is not a nonnegative real")));
    }
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllWeightsZero { step: None });
    }
    let mut out: Vec<f64> = raw.iter().map(|w| w / total).collect();
    // One correction pass keeps the sum within an ulp or two of 1.
    let resid: f64 = out.iter().sum::<f64>();
    if resid != 1.0 {
        out.iter_mut().for_each(|w| *w /= resid);
    }
    Ok(out)
}

/// Normalizes log-weights by subtracting the running maximum before exponentiating.
pub fn normalize_log(log_weights: &[f64]) -> Result<Vec<f64>> {
    let max = log_weights
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::AllWeightsZero { step: None });
    }
    let raw: Vec<f64> = log_weights
        .iter()
        .map(|&v| if v.is_nan() { 0.0 } else { (v - max).exp() })
        .collect();
    normalize(&raw)
}

fn check_covariance(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<()> {
    if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
        return Err(Error::DimensionMismatch(format!(
            "mean has length {} but covariance is {}x{}",
            mean.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    if linalg::asymmetry(cov) > COV_TOL {
        return Err(Error::InvalidMeasure("covariance is not symmetric".into()));
    }
    if mean.len() > 0 && linalg::min_eigenvalue(cov) < -COV_TOL {
        return Err(Error::InvalidMeasure("covariance is not positive semidefinite".into()));
    }
    Ok(())
}

fn gaussian_draws(mean: &DVector<f64>, factor: &DMatrix<f64>, n: usize, rng: &mut RngStream) -> Vec<f64> {
    let d = mean.len();
    let mut out = Vec::with_capacity(n * d);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let mut v = mean[i];
            for j in 0..d {
                v += factor[(i, j)] * z[j];
            }
            out.push(v);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMeasure {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianMeasure {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        check_covariance(&mean, &covariance)?;
        Ok(Self { mean, covariance })
    }

    pub fn scalar(mean: f64, variance: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample_flat(&self, n: usize, rng: &mut RngStream) -> Vec<f64> {
        gaussian_draws(&self.mean, &linalg::psd_factor(&self.covariance), n, rng)
    }

    /// Density; fails for degenerate covariances.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        let f = GaussianFactor::new(&self.covariance)?;
        let r: Vec<f64> = x.iter().zip(self.mean.iter()).map(|(a, b)| a - b).collect();
        Ok(f.density(&r))
    }
}

/// Additive Gaussian noise law.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianNoise {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianNoise {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        check_covariance(&mean, &covariance)?;
        Ok(Self { mean, covariance })
    }

    pub fn centered(covariance: DMatrix<f64>) -> Result<Self> {
        Self::new(DVector::zeros(covariance.nrows()), covariance)
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: DVector::zeros(dim),
            covariance: DMatrix::identity(dim, dim),
        }
    }

    pub fn scalar(variance: f64) -> Result<Self> {
        Self::centered(DMatrix::from_element(1, 1, variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Largest marginal standard deviation.
    pub fn max_std(&self) -> f64 {
        self.covariance.diagonal().max().max(0.0).sqrt()
    }

    /// Law of `-ξ`.
    pub fn reflect(&self) -> Self {
        Self {
            mean: -&self.mean,
            covariance: self.covariance.clone(),
        }
    }

    pub fn factor(&self) -> Result<GaussianFactor> {
        GaussianFactor::new(&self.covariance)
    }

    pub fn sample_flat(&self, n: usize, rng: &mut RngStream) -> Vec<f64> {
        gaussian_draws(&self.mean, &linalg::psd_factor(&self.covariance), n, rng)
    }
}

/// Density of `μ * ξ` at `y`, i.e. the Gaussian mixture `Σ w_i N(y - x_i; ξ)`.
pub fn convolved_density(mu: &DiscreteMeasure, xi: &GaussianNoise, y: &[f64]) -> Result<f64> {
    let factor = xi.factor()?;
    Ok(convolved_density_with(mu, xi, &factor, y))
}

pub(crate) fn convolved_density_with(
    mu: &DiscreteMeasure,
    xi: &GaussianNoise,
    factor: &GaussianFactor,
    y: &[f64],
) -> f64 {
    let mut r = vec![0.0; y.len()];
    mu.iter()
        .map(|(x, w)| {
            for k in 0..y.len() {
                r[k] = y[k] - x[k] - xi.mean[k];
            }
            w * factor.density(&r)
        })
        .sum()
}
