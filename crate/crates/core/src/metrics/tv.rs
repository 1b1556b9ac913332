//! Total variation, in the convention `‖μ − ν‖_TV = sup_{‖f‖∞ ≤ 1} |μ(f) − ν(f)|`
//! (twice the set-based distance).

use crate::error::{Error, Result};
use crate::linalg::GaussianFactor;
use crate::measures::{convolved_density_with, DiscreteMeasure, GaussianMeasure, GaussianNoise};
use crate::metrics::bl::signed_difference;

/// Composite Simpson rule with `intervals` subintervals per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub intervals: usize,
    /// Half-width of the integration box in noise standard deviations.
    pub half_width_sd: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            intervals: 4000,
            half_width_sd: 8.0,
        }
    }
}

impl Quadrature {
    pub fn coarse_2d() -> Self {
        Self {
            intervals: 400,
            half_width_sd: 8.0,
        }
    }

    fn weights(&self) -> (usize, Vec<f64>) {
        let n = self.intervals.max(2) + self.intervals % 2;
        let w = (0..=n)
            .map(|i| if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 })
            .collect();
        (n, w)
    }

    /// `∫ f` over the box `lo..hi` (one or two dimensions).
    pub fn integrate(&self, lo: &[f64], hi: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Result<f64> {
        let (n, w) = self.weights();
        let h: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| (b - a) / n as f64).collect();
        match lo.len() {
            1 => {
                let mut acc = 0.0;
                for i in 0..=n {
                    acc += w[i] * f(&[lo[0] + i as f64 * h[0]]);
                }
                Ok(acc * h[0] / 3.0)
            }
            2 => {
                let mut acc = 0.0;
                for i in 0..=n {
                    let x = lo[0] + i as f64 * h[0];
                    for j in 0..=n {
                        acc += w[i] * w[j] * f(&[x, lo[1] + j as f64 * h[1]]);
                    }
                }
                Ok(acc * h[0] * h[1] / 9.0)
            }
            d => Err(Error::DimensionMismatch(format!(
                "quadrature total variation supports d <= 2, got {d}"
            ))),
        }
    }
}

pub fn tv_discrete(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch("measures of differing dimension".into()));
    }
    let (_, signed) = signed_difference(mu, nu);
    Ok(signed.iter().map(|v| v.abs()).sum::<f64>().min(2.0))
}

/// `∫ |p_{μ*ξ} − p_{ν*ξ}|` by quadrature over a box covering every atom ± the
/// configured number of noise standard deviations.
pub fn tv_convolved(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    xi: &GaussianNoise,
    quad: &Quadrature,
) -> Result<f64> {
    let d = mu.dim();
    if nu.dim() != d || xi.dim() != d {
        return Err(Error::DimensionMismatch("measures and noise of differing dimension".into()));
    }
    let factor = xi.factor()?;
    let sd = xi.max_std();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for m in [mu, nu] {
        for (x, _) in m.iter() {
            for k in 0..d {
                lo[k] = lo[k].min(x[k] + xi.mean[k] - quad.half_width_sd * sd);
                hi[k] = hi[k].max(x[k] + xi.mean[k] + quad.half_width_sd * sd);
            }
        }
    }
    quad.integrate(&lo, &hi, |y| {
        (convolved_density_with(mu, xi, &factor, y) - convolved_density_with(nu, xi, &factor, y)).abs()
    })
}

/// Total variation between two nondegenerate Gaussians (d ≤ 2) by quadrature.
pub fn tv_gaussian(a: &GaussianMeasure, b: &GaussianMeasure, quad: &Quadrature) -> Result<f64> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::DimensionMismatch("Gaussians of differing dimension".into()));
    }
    let fa = GaussianFactor::new(&a.covariance)?;
    let fb = GaussianFactor::new(&b.covariance)?;
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    for k in 0..d {
        let sa = a.covariance[(k, k)].sqrt() * quad.half_width_sd;
        let sb = b.covariance[(k, k)].sqrt() * quad.half_width_sd;
        lo[k] = (a.mean[k] - sa).min(b.mean[k] - sb);
        hi[k] = (a.mean[k] + sa).max(b.mean[k] + sb);
    }
    let mut ra = vec![0.0; d];
    let mut rb = vec![0.0; d];
    let v = quad.integrate(&lo, &hi, |y| {
        for k in 0..d {
            ra[k] = y[k] - a.mean[k];
            rb[k] = y[k] - b.mean[k];
        }
        (fa.density(&ra) - fb.density(&rb)).abs()
    })?;
    Ok(v.min(2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use statrs::function::erf::erf;

    fn phi(x: f64) -> f64 {
        0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
    }

    #[test]
    fn discrete_examples() {
        let a = DiscreteMeasure::uniform(1, vec![0.0, 1.0]).unwrap();
        let b = DiscreteMeasure::dirac(&[0.0]);
        let c = DiscreteMeasure::dirac(&[3.0]);
        assert_eq!(tv_discrete(&a, &a).unwrap(), 0.0);
        assert_eq!(tv_discrete(&b, &c).unwrap(), 2.0);
        assert_eq!(tv_discrete(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn convolved_examples() {
        let xi = GaussianNoise::standard(1);
        let q = Quadrature::default();
        let z = DiscreteMeasure::dirac(&[0.0]);
        assert!(tv_convolved(&z, &z, &xi, &q).unwrap().abs() < 1e-15);
        for (shift, approx) in [(1.0, 0.765_850), (0.25, 0.198_953)] {
            let s = DiscreteMeasure::dirac(&[shift]);
            let v = tv_convolved(&s, &z, &xi, &q).unwrap();
            let closed = 2.0 * (2.0 * phi(shift / 2.0) - 1.0);
            assert!((v - closed).abs() < 1e-6, "{v} vs {closed}");
            assert!((closed - approx).abs() < 1e-6);
        }
        let singular = GaussianNoise::scalar(0.0).unwrap();
        assert!(matches!(tv_convolved(&z, &z, &singular, &q), Err(Error::SingularNoise)));
    }

    #[test]
    fn convolved_two_dimensional() {
        let xi = GaussianNoise::standard(2);
        let a = DiscreteMeasure::dirac(&[0.0, 0.0]);
        let b = DiscreteMeasure::dirac(&[0.6, 0.8]);
        let v = tv_convolved(&a, &b, &xi, &Quadrature::coarse_2d()).unwrap();
        // Isotropic noise: only the unit-length shift along its own axis matters.
        let closed = 2.0 * (2.0 * phi(0.5) - 1.0);
        assert!((v - closed).abs() < 1e-4, "{v} vs {closed}");
    }

    #[test]
    fn gaussian_pair() {
        let a = GaussianMeasure::new(DVector::from_element(1, 0.0), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let b = GaussianMeasure::new(DVector::from_element(1, 1.0), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let v = tv_gaussian(&a, &b, &Quadrature::default()).unwrap();
        assert!((v - 2.0 * (2.0 * phi(0.5) - 1.0)).abs() < 1e-6);
    }
}
