//! The scaled cos² partition of unity and the upper bound it certifies.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

/// One-dimensional bump `cos²(π(u − k)/2)` on `|u − k| ≤ 1`.
fn bump(k: i64, u: f64) -> f64 {
    let r = u - k as f64;
    if r.abs() > 1.0 {
        0.0
    } else {
        let c = (std::f64::consts::FRAC_PI_2 * r).cos();
        c * c
    }
}

/// Value of the member indexed by `k` at `x`: `Π_i φ_{k_i}(α x_i)`.
pub fn partition_member_eval(k: &[i64], alpha: f64, x: &[f64]) -> f64 {
    k.iter().zip(x).map(|(&ki, &xi)| bump(ki, alpha * xi)).product()
}

/// The family `V^α` on ℝ^d.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionOfUnity {
    pub alpha: f64,
    pub dim: usize,
}

impl PartitionOfUnity {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidMeasure(format!("partition scale must be positive, got {alpha}")));
        }
        Ok(Self { alpha, dim })
    }

    /// Uniform Lipschitz constant of every member, `(απ/2)·√d`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.alpha * std::f64::consts::FRAC_PI_2 * (self.dim as f64).sqrt()
    }

    /// Radius of each member's support around its centre `k/α`.
    pub fn support_radius(&self) -> f64 {
        (self.dim as f64).sqrt() / self.alpha
    }

    /// Members that are nonzero at `x`, with their values. At most `2^d`.
    pub fn active(&self, x: &[f64]) -> Vec<(Vec<i64>, f64)> {
        let per_coord: Vec<Vec<(i64, f64)>> = x
            .iter()
            .map(|&xi| {
                let u = self.alpha * xi;
                let lo = u.floor() as i64;
                [lo, lo + 1]
                    .into_iter()
                    .map(|k| (k, bump(k, u)))
                    .filter(|(_, v)| *v > 0.0)
                    .collect()
            })
            .collect();
        let mut out = vec![(Vec::with_capacity(x.len()), 1.0)];
        for choices in &per_coord {
            let mut next = Vec::with_capacity(out.len() * choices.len());
            for (k, v) in &out {
                for &(ki, vi) in choices {
                    let mut kk = k.clone();
                    kk.push(ki);
                    next.push((kk, v * vi));
                }
            }
            out = next;
        }
        out.retain(|(_, v)| *v > 0.0);
        out
    }

    /// `Σ_k |μ(φ_k) − ν(φ_k)|` over the members meeting either support.
    pub fn l1_gap(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let mut acc: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
        for (m, sign) in [(mu, 1.0), (nu, -1.0)] {
            for (x, w) in m.iter() {
                for (k, v) in self.active(x) {
                    *acc.entry(k).or_insert(0.0) += sign * w * v;
                }
            }
        }
        acc.values().map(|v| v.abs()).sum()
    }
}

/// Upper bound `2√d/α + Σ_k |μ(φ_k) − ν(φ_k)|`, clipped to 2.
pub fn bl_upper_partition(mu: &DiscreteMeasure, nu: &DiscreteMeasure, alpha: f64) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch("measures of differing dimension".into()));
    }
    let pu = PartitionOfUnity::new(alpha, mu.dim())?;
    Ok((2.0 * pu.support_radius() + pu.l1_gap(mu, nu)).min(2.0))
}

pub const DEFAULT_SCALES: [f64; 6] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0];

/// Best partition bound over a list of scales.
pub fn bl_upper_min(mu: &DiscreteMeasure, nu: &DiscreteMeasure, scales: &[f64]) -> Result<f64> {
    scales
        .iter()
        .map(|&a| bl_upper_partition(mu, nu, a))
        .try_fold(2.0f64, |best, v| v.map(|v| best.min(v)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn member_examples() {
        assert_eq!(partition_member_eval(&[0], 1.0, &[0.0]), 1.0);
        assert!((partition_member_eval(&[0], 1.0, &[0.5]) - 0.5).abs() < 1e-15);
        assert_eq!(partition_member_eval(&[0], 1.0, &[1.5]), 0.0);
    }

    #[test]
    fn upper_examples() {
        let a = DiscreteMeasure::dirac(&[0.0]);
        let b = DiscreteMeasure::dirac(&[0.5]);
        assert!((bl_upper_partition(&a, &a, 4.0).unwrap() - 0.5).abs() < 1e-15);
        let pu = PartitionOfUnity::new(1.0, 1).unwrap();
        // |1 − ½| + |0 − ½| before the additive 2 and the clip.
        assert!((pu.l1_gap(&a, &b) - 1.0).abs() < 1e-15);
        assert_eq!(bl_upper_partition(&a, &b, 1.0).unwrap(), 2.0);
        let fine = PartitionOfUnity::new(100.0, 1).unwrap();
        assert!((fine.l1_gap(&a, &b) - 2.0).abs() < 1e-12);
        assert_eq!(bl_upper_partition(&a, &b, 100.0).unwrap(), 2.0);
    }

    #[test]
    fn active_sums_to_one() {
        let pu = PartitionOfUnity::new(3.7, 2).unwrap();
        for x in [[0.0, 0.0], [0.13, -2.2], [1.0 / 3.7, 5.0]] {
            let act = pu.active(&x);
            assert!(act.len() <= 4);
            let s: f64 = act.iter().map(|(_, v)| v).sum();
            assert!((s - 1.0).abs() < 1e-12);
            for (k, v) in act {
                assert_eq!(partition_member_eval(&k, 3.7, &x), v);
            }
        }
    }
}
