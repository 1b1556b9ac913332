use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::rng::RngStream;

/// Randomized lower bound on the BL distance.
///
/// Each trial draws a unit direction `u` and an offset `c` and evaluates the
/// hinge `x ↦ clip(⟨u, x⟩ + c, −1, 1)`, which is bounded by one and
/// 1-Lipschitz. The offset is uniform on the range where the hinge is not
/// constant on the combined support.
pub fn bl_lower_random(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    trials: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch("measures of differing dimension".into()));
    }
    let dim = mu.dim();
    let mut best = 0.0f64;
    let mut u = vec![0.0; dim];
    let mut proj_mu = vec![0.0; mu.len()];
    let mut proj_nu = vec![0.0; nu.len()];
    for _ in 0..trials.max(1) {
        let norm = loop {
            for ui in u.iter_mut() {
                *ui = rng.sample(StandardNormal);
            }
            let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 1e-12 {
                break n;
            }
        };
        u.iter_mut().for_each(|v| *v /= norm);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (m, out) in [(mu, &mut proj_mu), (nu, &mut proj_nu)] {
            for (i, (x, _)) in m.iter().enumerate() {
                let p: f64 = x.iter().zip(&u).map(|(a, b)| a * b).sum();
                out[i] = p;
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
        let c = rng.random_range((-hi - 1.0)..=(-lo + 1.0));
        let hinge = |p: f64| (p + c).clamp(-1.0, 1.0);
        let a: f64 = proj_mu.iter().zip(mu.weights()).map(|(p, w)| w * hinge(*p)).sum();
        let b: f64 = proj_nu.iter().zip(nu.weights()).map(|(p, w)| w * hinge(*p)).sum();
        best = best.max((a - b).abs());
    }
    Ok(best)
}
