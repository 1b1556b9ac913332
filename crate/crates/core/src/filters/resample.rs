/// Systematic resampling: `n` indices from normalized `weights` using the single
/// uniform `u ∈ [0, 1)`.
pub fn systematic_resample(weights: &[f64], n: usize, u: f64) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut acc = weights[0];
    let mut j = 0;
    let step = total / n as f64;
    for i in 0..n {
        let target = (u + i as f64) * step;
        while acc <= target && j + 1 < weights.len() {
            j += 1;
            acc += weights[j];
        }
        out.push(j);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_raw;
    use rand::Rng;

    #[test]
    fn deterministic_counts() {
        let idx = systematic_resample(&[0.5, 0.25, 0.25], 4, 0.1);
        assert_eq!(idx, vec![0, 0, 1, 2]);
    }

    #[test]
    fn counts_within_one_of_expectation() {
        let w = [0.13, 0.0, 0.4, 0.07, 0.4];
        let mut rng = stream_raw(5, 0);
        for _ in 0..1000 {
            let idx = systematic_resample(&w, 37, rng.random());
            for (k, wk) in w.iter().enumerate() {
                let c = idx.iter().filter(|&&i| i == k).count() as f64;
                assert!((c - 37.0 * wk).abs() < 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn unbiased_over_draws() {
        let w = [0.05, 0.3, 0.15, 0.5];
        let n = 10;
        let draws = 10_000;
        let mut rng = stream_raw(6, 0);
        let mut freq = [0.0; 4];
        for _ in 0..draws {
            for i in systematic_resample(&w, n, rng.random()) {
                freq[i] += 1.0 / (n * draws) as f64;
            }
        }
        for (f, wk) in freq.iter().zip(w) {
            // Per-draw count deviates from n·w by less than one, so the binomial band is conservative.
            let sd = (wk * (1.0 - wk) / (n * draws) as f64).sqrt();
            assert!((f - wk).abs() < 3.0 * sd, "{f} vs {wk}");
        }
    }
}
