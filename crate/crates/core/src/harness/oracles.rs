//! Brute-force reference computations used by the acceptance suite.

use crate::measures::DiscreteMeasure;

/// Coarse grid step of the exhaustive search.
const GRID_STEP: f64 = 0.05;
const FINAL_STEP: f64 = 1e-12;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Dual bounded-Lipschitz distance for tiny supports, by search over the
/// values `f_i` of the test function at the atoms.
///
/// Since `Σ (μ_i − ν_i) = 0`, fixing `f_0 = 0` and imposing
/// `|f_i − f_j| ≤ min(d_ij, 2)` loses nothing. The reduced problem is solved
/// by an exhaustive grid over `[−2, 2]^{n−1}`, then refined by pattern search
/// over all `{−1, 0, 1}` directions with a halving step.
pub fn bl_grid_search(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let mut pts: Vec<&[f64]> = Vec::new();
    let mut s: Vec<f64> = Vec::new();
    for (x, w) in mu.iter() {
        pts.push(x);
        s.push(w);
    }
    for (x, w) in nu.iter() {
        pts.push(x);
        s.push(-w);
    }
    let n = pts.len();
    assert!(n <= 6, "grid search is exhaustive and meant for tiny supports");
    let mut cap = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            cap[i][j] = dist(pts[i], pts[j]).min(2.0);
        }
    }
    let feasible = |f: &[f64]| {
        (0..n).all(|i| (i + 1..n).all(|j| (f[i] - f[j]).abs() <= cap[i][j] + 1e-15))
    };
    let value = |f: &[f64]| f.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>();
    if n == 1 {
        return 0.0;
    }
    let m = n - 1;
    let levels = (4.0 / GRID_STEP).round() as usize + 1;
    let mut best = vec![0.0; n];
    let mut best_val = 0.0;
    let mut f = vec![0.0; n];
    let total = levels.pow(m as u32);
    for code in 0..total {
        let mut c = code;
        for slot in f.iter_mut().skip(1) {
            *slot = -2.0 + (c % levels) as f64 * GRID_STEP;
            c /= levels;
        }
        if feasible(&f) {
            let v = value(&f);
            if v > best_val {
                best_val = v;
                best.copy_from_slice(&f);
            }
        }
    }
    let dirs: Vec<Vec<f64>> = (0..3usize.pow(m as u32))
        .map(|code| {
            let mut c = code;
            let mut d = vec![0.0; n];
            for slot in d.iter_mut().skip(1) {
                *slot = (c % 3) as f64 - 1.0;
                c /= 3;
            }
            d
        })
        .filter(|d| d.iter().any(|&v| v != 0.0))
        .collect();
    let mut h = GRID_STEP;
    let mut cand = vec![0.0; n];
    while h >= FINAL_STEP {
        let mut moved = false;
        for d in &dirs {
            for i in 0..n {
                cand[i] = best[i] + h * d[i];
            }
            if feasible(&cand) {
                let v = value(&cand);
                if v > best_val + 1e-16 {
                    best_val = v;
                    best.copy_from_slice(&cand);
                    moved = true;
                }
            }
        }
        if !moved {
            h /= 2.0;
        }
    }
    best_val
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_masses() {
        let a = DiscreteMeasure::dirac(&[0.0]);
        let b = DiscreteMeasure::dirac(&[0.3]);
        assert!((bl_grid_search(&a, &b) - 0.3).abs() < 1e-9);
        let c = DiscreteMeasure::dirac(&[7.0]);
        assert!((bl_grid_search(&a, &c) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn off_grid_optimum() {
        let a = DiscreteMeasure::new(2, vec![0.0, 0.0, 0.1234567, 0.3], vec![0.3, 0.7]).unwrap();
        let b = DiscreteMeasure::dirac(&[0.777, -0.2]);
        let want = 0.3 * (0.777f64.powi(2) + 0.04).sqrt() + 0.7 * ((0.777f64 - 0.1234567).powi(2) + 0.25).sqrt();
        let got = bl_grid_search(&a, &b);
        assert!((got - want).abs() < 1e-9, "{got} {want}");
    }
}
