use crate::error::{Error, Result};
use crate::measures::{normalize_log, DiscreteMeasure};
use crate::models::{Example12Model, ObservationPath};

/// Cumulative left-endpoint sums `S_n = Σ_{i<n} e^{−λ t_i}(Y_{t_{i+1}} − Y_{t_i})`,
/// one entry per grid time.
pub fn example12_statistic(lambda: f64, path: &ObservationPath) -> Vec<f64> {
    let mut out = Vec::with_capacity(path.len());
    let mut s = 0.0;
    out.push(s);
    for i in 0..path.len() - 1 {
        s += (-lambda * path.times()[i]).exp() * path.increment(i)[0];
        out.push(s);
    }
    out
}

/// Log-likelihood of `X_0 = x` given the statistic `s` and `∫ e^{−2λr} dr = quad`.
pub fn example12_log_likelihood(x: f64, s: f64, quad: f64) -> f64 {
    s / x - 0.5 * quad / (x * x)
}

fn check_prior(prior: &DiscreteMeasure) -> Result<()> {
    if prior.dim() != 1 || prior.atoms_flat().iter().any(|&x| !(x >= 1.0)) {
        return Err(Error::InvalidMeasure("prior must be one-dimensional and supported on [1, inf)".into()));
    }
    Ok(())
}

/// Posterior of `X_0` at grid index `index`, given the precomputed statistic.
pub fn example12_initial_posterior(
    model: &Example12Model,
    prior: &DiscreteMeasure,
    statistic: f64,
    t: f64,
) -> Result<DiscreteMeasure> {
    check_prior(prior)?;
    let l = model.lambda;
    let quad = (1.0 - (-2.0 * l * t).exp()) / (2.0 * l);
    let logw: Vec<f64> = prior
        .iter()
        .map(|(x, w)| w.ln() + example12_log_likelihood(x[0], statistic, quad))
        .collect();
    let weights = normalize_log(&logw)?;
    DiscreteMeasure::new(1, prior.atoms_flat().to_vec(), weights)
}

/// Exact filter for the growth model: law of `X_t` given `Y` on `[0, t]`.
/// `t` is snapped to the nearest grid time.
pub fn grid_filter_example12(
    model: &Example12Model,
    prior: &DiscreteMeasure,
    path: &ObservationPath,
    t: f64,
) -> Result<DiscreteMeasure> {
    let times = path.times();
    let index = times.partition_point(|&s| s < t).min(times.len() - 1);
    let index = if index > 0 && (t - times[index - 1]).abs() < (times[index] - t).abs() {
        index - 1
    } else {
        index
    };
    let stat = example12_statistic(model.lambda, path)[index];
    let t = times[index];
    let post = example12_initial_posterior(model, prior, stat, t)?;
    post.pushforward(|x| vec![model.signal_at(x[0], t)])
}

/// Limit of `E(f(X_0) | Y)` as `t → ∞`, with `z` standing for `∫_0^∞ e^{−λs} dY_s`.
pub fn limit_posterior_example12(prior: &DiscreteMeasure, z: f64, lambda: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    check_prior(prior)?;
    let quad = 1.0 / (2.0 * lambda);
    let logw: Vec<f64> = prior
        .iter()
        .map(|(x, w)| w.ln() + example12_log_likelihood(x[0], z, quad))
        .collect();
    let weights = normalize_log(&logw)?;
    Ok(prior.atoms_flat().iter().zip(weights).map(|(&x, w)| w * f(x)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{simulate_example12, uniform_grid};
    use crate::rng::stream_raw;
    use std::f64::consts::PI;

    fn two_atom(w: f64) -> DiscreteMeasure {
        DiscreteMeasure::new(1, vec![1.0, PI.exp()], vec![w, 1.0 - w]).unwrap()
    }

    #[test]
    fn time_zero_is_prior() {
        let m = Example12Model::new(1.0).unwrap();
        let path = simulate_example12(&m, 1.0, 1.0, 0.01, &mut stream_raw(0, 0)).unwrap();
        let prior = two_atom(0.3);
        assert_eq!(grid_filter_example12(&m, &prior, &path, 0.0).unwrap(), prior);
    }

    #[test]
    fn dirac_prior_moves_deterministically() {
        let m = Example12Model::new(0.7).unwrap();
        let path = simulate_example12(&m, 2.0, 2.0, 0.01, &mut stream_raw(1, 0)).unwrap();
        let post = grid_filter_example12(&m, &DiscreteMeasure::dirac(&[2.0]), &path, 2.0).unwrap();
        assert_eq!(post.weights(), &[1.0]);
        assert!((post.atom(0)[0] - 2.0 * (1.4f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn odds_match_hand_formula() {
        let m = Example12Model::new(1.0).unwrap();
        let incs = [0.1, -0.3, 0.25, 0.05];
        let dt = 0.5;
        let path = ObservationPath::from_increments(uniform_grid(4, dt), 1, &incs).unwrap();
        let prior = two_atom(0.4);
        let post = grid_filter_example12(&m, &prior, &path, 2.0).unwrap();
        let s = 0.1 + (-0.5f64).exp() * -0.3 + (-1.0f64).exp() * 0.25 + (-1.5f64).exp() * 0.05;
        let quad = (1.0 - (-4.0f64).exp()) / 2.0;
        let x2 = PI.exp();
        let odds = (0.4 / 0.6) * ((s - quad / 2.0) - (s / x2 - quad / (2.0 * x2 * x2))).exp();
        let got = post.weights()[0] / post.weights()[1];
        assert!((got / odds - 1.0).abs() < 1e-10, "{got} vs {odds}");
        assert!((post.atom(1)[0] - x2 * 2.0f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn limit_formula_examples() {
        let f = |x: f64| x.ln().cos();
        assert!((limit_posterior_example12(&DiscreteMeasure::dirac(&[3.0]), 7.0, 1.0, f).unwrap() - 3f64.ln().cos()).abs() < 1e-15);
        assert!((limit_posterior_example12(&two_atom(0.2), -1.3, 2.0, |_| 4.5).unwrap() - 4.5).abs() < 1e-14);
        let a = (1.0f64 - 0.25).exp() * 0.5;
        let b = ((-PI).exp() - (-2.0 * PI).exp() / 4.0).exp() * 0.5;
        let expected = (a - b) / (a + b);
        let got = limit_posterior_example12(&two_atom(0.5), 1.0, 1.0, f).unwrap();
        assert!((got - expected).abs() < 1e-13, "{got} vs {expected}");
    }

    #[test]
    fn grid_weights_match_truncated_limit_integrand() {
        let m = Example12Model::new(1.0).unwrap();
        let path = simulate_example12(&m, 1.0, 3.0, 0.01, &mut stream_raw(4, 0)).unwrap();
        let prior = two_atom(0.5);
        let post = grid_filter_example12(&m, &prior, &path, 3.0).unwrap();
        let back = post.pushforward(|x| vec![x[0] * (-3.0f64).exp()]).unwrap();
        let s = *example12_statistic(1.0, &path).last().unwrap();
        let quad = (1.0 - (-6.0f64).exp()) / 2.0;
        let raw: Vec<f64> = prior
            .iter()
            .map(|(x, w)| w * (s / x[0] - 0.5 * quad / (x[0] * x[0])).exp())
            .collect();
        let tot: f64 = raw.iter().sum();
        for (i, r) in raw.iter().enumerate() {
            assert!((back.weights()[i] - r / tot).abs() < 1e-10);
            assert!((back.atom(i)[0] - prior.atom(i)[0]).abs() < 1e-12 * prior.atom(i)[0]);
        }
    }
}
