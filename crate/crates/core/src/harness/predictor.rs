use rayon::prelude::*;

use crate::diagnostics::Check;
use crate::error::{Error, Result};
use crate::filters::predictor_step_discrete;
use crate::harness::config::{ExperimentConfig, ModelSpec};
use crate::harness::output::{svg_plot, ExperimentOutput, Series};
use crate::harness::stability::{bl_bounds, gaps, StabilityRecord, StabilityTrace};
use crate::measures::DiscreteMeasure;
use crate::metrics::BlSolver;
use crate::models::{step_discrete_chain, uniform_grid, DiscreteChainModel, ObservationPath, Prior};
use crate::rng::{stream, StreamId};

/// Hinge trials for the lower bound on large particle clouds.
pub const PREDICTOR_LOWER_TRIALS: usize = 20;

/// Observations `Y_0..Y_{n−1}` of a chain started from `prior`.
pub fn simulate_chain_observations(
    model: &DiscreteChainModel,
    prior: &Prior,
    n: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = stream(seed, StreamId::Signal);
    let mut x = prior.sample_flat(1, &mut rng);
    let mut states = x.clone();
    let mut ys = Vec::with_capacity(n * model.obs_dim());
    if n > 0 {
        ys.extend(model.observe(&x, &mut rng));
    }
    for _ in 1..n {
        let (next, y) = step_discrete_chain(model, &x, &mut rng)?;
        x = next;
        states.extend_from_slice(&x);
        ys.extend(y);
    }
    Ok((states, ys))
}

/// Predictor pair on one observation sequence generated under `mu`. Record
/// `n` holds the predictors after `n` observations (record 0 is the priors).
pub fn predictor_seed(
    model: &DiscreteChainModel,
    mu: &Prior,
    nu: &Prior,
    n_steps: usize,
    particles: usize,
    seed: u64,
) -> Result<StabilityTrace> {
    if mu.dim() != model.dim || nu.dim() != model.dim {
        return Err(Error::DimensionMismatch("prior dimension differs from the chain".into()));
    }
    let q = model.obs_dim();
    let (_, ys) = simulate_chain_observations(model, mu, n_steps, seed)?;
    // Shared observations stored as a unit-step path of running sums.
    let path = ObservationPath::from_increments(uniform_grid(n_steps, 1.0), q, &ys)?;
    let mut ra = stream(seed, StreamId::FilterMu);
    let mut rb = stream(seed, StreamId::FilterMu);
    let mut pa = DiscreteMeasure::uniform(model.dim, mu.sample_flat(particles, &mut ra))?;
    let mut pb = DiscreteMeasure::uniform(model.dim, nu.sample_flat(particles, &mut rb))?;
    let solver = BlSolver::default();
    let mut rng = stream(seed, StreamId::Metric);
    let mut records = Vec::with_capacity(n_steps + 1);
    for n in 0..=n_steps {
        if n > 0 {
            let y = &ys[(n - 1) * q..n * q];
            pa = predictor_step_discrete(&pa, y, model, &mut ra).map_err(|e| e.annotate(format!("step {n}")))?;
            pb = predictor_step_discrete(&pb, y, model, &mut rb).map_err(|e| e.annotate(format!("step {n}")))?;
        }
        let (bl, bl_upper, bl_lower) = bl_bounds(&pa, &pb, &solver, PREDICTOR_LOWER_TRIALS, &mut rng)?;
        let (mean_gap, coordinate_gaps) = gaps(&pa.mean(), &pb.mean());
        records.push(StabilityRecord {
            t: n as f64,
            bl,
            bl_upper,
            bl_lower,
            tv: None,
            mean_gap,
            coordinate_gaps,
            aux: pa.ess().min(pb.ess()),
        });
    }
    Ok(StabilityTrace {
        seed,
        prior_ids: (String::new(), String::new()),
        path_hash: path.content_hash(),
        records,
    })
}

pub fn run_predictor_merging(
    model: &DiscreteChainModel,
    mu: &Prior,
    nu: &Prior,
    n_steps: usize,
    particles: usize,
    seeds: &[u64],
) -> Result<Vec<StabilityTrace>> {
    seeds
        .par_iter()
        .map(|&seed| predictor_seed(model, mu, nu, n_steps, particles, seed).map_err(|e| e.annotate(format!("seed {seed}"))))
        .collect()
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median over seeds of the exact BL at record `i`.
pub fn median_bl(traces: &[StabilityTrace], i: usize) -> f64 {
    let mut v: Vec<f64> = traces
        .iter()
        .map(|t| t.records[i].bl.unwrap_or(t.records[i].bl_upper))
        .collect();
    median(&mut v)
}

pub fn predictor_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let ModelSpec::Chain(spec) = cfg.model_spec()? else {
        return Err(Error::Config("predictor runs need a chain model".into()));
    };
    let model = spec.build()?;
    let (pmu, pnu) = cfg.priors()?;
    let (mu, nu) = (pmu.prior()?, pnu.prior()?);
    let steps = cfg.require(&cfg.steps, "steps")?;
    let n = cfg.require(&cfg.particles, "particles")?;
    let mut traces = run_predictor_merging(&model, &mu, &nu, steps, n, &cfg.seeds)?;
    for t in &mut traces {
        t.prior_ids = (pmu.label(), pnu.label());
    }
    let mut out = ExperimentOutput::default();
    let mut series = Vec::new();
    for t in &traces {
        out.files.push((format!("trace_seed{}.csv", t.seed), t.csv()?));
    }
    series.push(Series {
        name: "median bl".into(),
        points: (0..=steps).map(|i| (i as f64, median_bl(&traces, i))).collect(),
    });
    out.files.push(("plot.svg".into(), svg_plot("one-step predictor BL distance", &series, cfg.log_plot)));
    if let Some(b) = cfg.thresholds.max_median_bl_ratio {
        let ratio = median_bl(&traces, steps) / median_bl(&traces, 0);
        out.checks.push(Check::new("median_bl_ratio", ratio, b, ratio <= b));
    }
    let ordered = traces.iter().all(|t| {
        t.records
            .iter()
            .all(|r| r.bl.is_none_or(|e| r.bl_lower <= e + 1e-9 && e <= r.bl_upper + 1e-9))
    });
    out.checks.push(Check::new("bl_sandwich_rows", f64::from(u8::from(ordered)), 1.0, ordered));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{GaussianMeasure, GaussianNoise};
    use crate::models::linear_field;

    fn chain() -> DiscreteChainModel {
        DiscreteChainModel {
            dim: 1,
            kernel: DiscreteChainModel::ar1_kernel(2.0, 1.0),
            h: linear_field(1.0),
            noise: GaussianNoise::standard(1),
        }
    }

    #[test]
    fn identical_priors_identical_predictors() {
        let p = Prior::Gaussian(GaussianMeasure::scalar(0.0, 1.0).unwrap());
        let t = predictor_seed(&chain(), &p, &p, 8, 200, 4).unwrap();
        assert!(t.records.iter().all(|r| r.bl == Some(0.0) && r.mean_gap == 0.0));
    }

    #[test]
    fn distinct_priors_merge() {
        let mu = Prior::Gaussian(GaussianMeasure::scalar(0.0, 1.0).unwrap());
        let nu = Prior::Gaussian(GaussianMeasure::scalar(5.0, 4.0).unwrap());
        let traces = run_predictor_merging(&chain(), &mu, &nu, 10, 1000, &[0, 1, 2]).unwrap();
        assert!(median_bl(&traces, 10) < 0.3 * median_bl(&traces, 0));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
