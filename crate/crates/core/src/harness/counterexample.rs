use std::f64::consts::PI;

use rayon::prelude::*;

use crate::diagnostics::Check;
use crate::error::{Error, Result};
use crate::filters::{example12_initial_posterior, example12_statistic, limit_posterior_example12};
use crate::harness::config::{ExperimentConfig, ModelSpec};
use crate::harness::output::{csv_table, svg_plot, ExperimentOutput, Series};
use crate::measures::DiscreteMeasure;
use crate::models::{simulate_example12, Example12Model};
use crate::rng::{stream, StreamId};

/// Tail tolerance for truncating `∫_0^∞ e^{−λs} dY_s`.
const TAIL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct CounterexampleSeed {
    pub seed: u64,
    /// `g_n` for `n = 1..=n_max`.
    pub gaps: Vec<f64>,
    pub z: f64,
    pub g_limit: f64,
    /// `max_{n0 ≤ n ≤ n_max} |g_n − g_limit|`.
    pub residual: f64,
}

/// The test function `cos ∘ log`, equal to ±1 on the atoms `1` and `e^π`.
pub fn cos_log(x: f64) -> f64 {
    x.ln().cos()
}

fn equivalent(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> bool {
    let charged = |m: &DiscreteMeasure| -> Vec<u64> {
        let mut v: Vec<u64> = m.iter().filter(|(_, w)| *w > 0.0).map(|(x, _)| x[0].to_bits()).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    charged(mu) == charged(nu)
}

/// Horizon in whole periods: at least `n_max`, and long enough that the
/// truncated tail of `Z` is below the tail tolerance.
pub fn counterexample_periods(lambda: f64, n_max: usize) -> usize {
    let period = 2.0 * PI / lambda;
    let t_drift = (1.0 / (lambda * TAIL_TOL)).ln() / lambda;
    let t_noise = (1.0 / (2.0 * lambda * TAIL_TOL)).ln() / (2.0 * lambda);
    n_max.max((t_drift.max(t_noise) / period).ceil() as usize)
}

pub fn run_counterexample(
    model: &Example12Model,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    n_max: usize,
    period_steps: usize,
    n0: usize,
    seeds: &[u64],
) -> Result<Vec<CounterexampleSeed>> {
    if !equivalent(mu, nu) {
        return Err(Error::Config("the two priors must charge the same atoms".into()));
    }
    if n_max == 0 || period_steps == 0 || n0 > n_max {
        return Err(Error::Config("need 1 <= n0 <= n_max and positive period_steps".into()));
    }
    let lambda = model.lambda;
    let period = 2.0 * PI / lambda;
    let dt = period / period_steps as f64;
    let horizon = counterexample_periods(lambda, n_max) as f64 * period;
    seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = stream(seed, StreamId::Signal);
            let x0 = mu.sample_flat(1, &mut rng)[0];
            let path = simulate_example12(model, x0, horizon, dt, &mut rng)?;
            let stat = example12_statistic(lambda, &path);
            let gaps = (1..=n_max)
                .map(|n| {
                    let i = n * period_steps;
                    let t = path.times()[i];
                    let filter = |p: &DiscreteMeasure| -> Result<f64> {
                        let post = example12_initial_posterior(model, p, stat[i], t)?;
                        let moved = post.pushforward(|x| vec![model.signal_at(x[0], t)])?;
                        Ok(moved.integrate(|x| cos_log(x[0])))
                    };
                    Ok(filter(mu)? - filter(nu)?)
                })
                .collect::<Result<Vec<f64>>>()?;
            let z = *stat.last().expect("path is non-empty");
            let g_limit = limit_posterior_example12(mu, z, lambda, cos_log)? - limit_posterior_example12(nu, z, lambda, cos_log)?;
            let residual = gaps[n0 - 1..].iter().map(|g| (g - g_limit).abs()).fold(0.0, f64::max);
            Ok(CounterexampleSeed { seed, gaps, z, g_limit, residual })
        })
        .collect()
}

pub fn counterexample_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let ModelSpec::Example12(spec) = cfg.model_spec()? else {
        return Err(Error::Config("counterexample runs need an example12 model".into()));
    };
    let model = spec.build()?;
    let (pmu, pnu) = cfg.priors()?;
    let (mu, nu) = (pmu.discrete()?, pnu.discrete()?);
    let ce = cfg.require(&cfg.counterexample, "counterexample")?;
    let seeds = run_counterexample(&model, &mu, &nu, ce.n_max, ce.period_steps, ce.n0, &cfg.seeds)?;
    let mut out = ExperimentOutput::default();
    let rows: Vec<Vec<String>> = seeds
        .iter()
        .flat_map(|s| {
            s.gaps.iter().enumerate().map(move |(i, g)| {
                vec![s.seed.to_string(), (i + 1).to_string(), g.to_string(), s.g_limit.to_string()]
            })
        })
        .collect();
    out.files.push(("gaps.csv".into(), csv_table(&["seed", "n", "g_n", "g_limit"], &rows)?));
    let rows: Vec<Vec<String>> = seeds
        .iter()
        .map(|s| vec![s.seed.to_string(), s.z.to_string(), s.g_limit.to_string(), s.residual.to_string()])
        .collect();
    out.files.push(("limits.csv".into(), csv_table(&["seed", "z", "g_limit", "residual"], &rows)?));
    let series: Vec<Series> = seeds
        .iter()
        .take(6)
        .map(|s| Series {
            name: format!("g_n seed {}", s.seed),
            points: s.gaps.iter().enumerate().map(|(i, g)| ((i + 1) as f64, *g)).collect(),
        })
        .collect();
    out.files.push(("plot.svg".into(), svg_plot("g_n = pi_mu(f) - pi_nu(f)", &series, false)));
    let th = &cfg.thresholds;
    if th.max_residual.is_some() || th.min_limit_gap.is_some() {
        let max_res = th.max_residual.unwrap_or(f64::INFINITY);
        let min_gap = th.min_limit_gap.unwrap_or(0.0);
        let good = seeds.iter().filter(|s| s.residual <= max_res && s.g_limit.abs() > min_gap).count();
        let frac = good as f64 / seeds.len() as f64;
        let need = th.min_seed_fraction.unwrap_or(1.0);
        out.checks.push(Check::new("seeds_converged_nonzero", frac, need, frac >= need));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior(w: f64) -> DiscreteMeasure {
        DiscreteMeasure::new(1, vec![1.0, PI.exp()], vec![w, 1.0 - w]).unwrap()
    }

    #[test]
    fn test_function_at_atoms() {
        assert_eq!(cos_log(1.0), 1.0);
        assert!((cos_log(PI.exp()) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn equal_priors_never_separate() {
        let m = Example12Model::new(1.0).unwrap();
        let r = run_counterexample(&m, &prior(0.5), &prior(0.5), 6, 400, 5, &[3]).unwrap();
        assert!(r[0].gaps.iter().all(|g| *g == 0.0) && r[0].g_limit == 0.0);
    }

    #[test]
    fn gap_converges_to_limit() {
        let m = Example12Model::new(1.0).unwrap();
        let r = run_counterexample(&m, &prior(0.5), &prior(0.25), 8, 1000, 5, &[0, 1, 2]).unwrap();
        for s in &r {
            assert!(s.residual < 1e-3, "{s:?}");
            assert!(s.g_limit.abs() > 0.05);
        }
    }

    #[test]
    fn limit_gap_linear_in_weight_difference() {
        let m = Example12Model::new(1.0).unwrap();
        let base = run_counterexample(&m, &prior(0.5), &prior(0.5 - 1e-6), 5, 400, 5, &[7]).unwrap()[0].g_limit;
        let double = run_counterexample(&m, &prior(0.5), &prior(0.5 - 2e-6), 5, 400, 5, &[7]).unwrap()[0].g_limit;
        assert!(base != 0.0 && base.abs() < 1e-5);
        assert!((double / base - 2.0).abs() < 1e-4, "{}", double / base);
    }

    #[test]
    fn inequivalent_priors_rejected() {
        let m = Example12Model::new(1.0).unwrap();
        let nu = DiscreteMeasure::new(1, vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert!(run_counterexample(&m, &prior(0.5), &nu, 5, 100, 5, &[0]).is_err());
    }
}
