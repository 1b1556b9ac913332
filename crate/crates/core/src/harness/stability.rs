use nalgebra::DVector;
use rayon::prelude::*;
use statrs::function::erf::erfc_inv;

use crate::diagnostics::Check;
use crate::error::{Error, Result};
use crate::filters::{kalman_bucy_run, ParticleFilter, ParticleModel};
use crate::harness::config::{ExperimentConfig, ModelSpec};
use crate::harness::output::{csv_table, fmt_opt, svg_plot, ExperimentOutput, Series};
use crate::linalg;
use crate::measures::{DiscreteMeasure, GaussianMeasure};
use crate::metrics::{bl_lower_random, bl_upper_min, tv_gaussian, BlSolver, Quadrature, DEFAULT_SCALES};
use crate::models::{simulate_diffusion, simulate_linear_gaussian, ObservationPath, Prior};
use crate::rng::{stream, RngStream, StreamId};

/// Quantile atoms per Gaussian discretization.
pub const QUANTILE_ATOMS: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityRecord {
    pub t: f64,
    pub bl: Option<f64>,
    pub bl_upper: f64,
    pub bl_lower: f64,
    pub tv: Option<f64>,
    /// Euclidean distance between the two filter means.
    pub mean_gap: f64,
    /// Per-coordinate absolute mean gaps.
    pub coordinate_gaps: Vec<f64>,
    /// Kalman runs: operator-norm covariance gap. Particle runs: smaller ESS.
    pub aux: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityTrace {
    pub seed: u64,
    pub prior_ids: (String, String),
    pub path_hash: String,
    pub records: Vec<StabilityRecord>,
}

impl StabilityTrace {
    pub fn csv(&self) -> Result<String> {
        let d = self.records.first().map_or(0, |r| r.coordinate_gaps.len());
        let mut header = vec!["t", "bl", "bl_upper", "bl_lower", "tv", "mean_gap"];
        let names: Vec<String> = (0..d).map(|i| format!("gap_{i}")).collect();
        header.extend(names.iter().map(String::as_str));
        header.extend(["aux", "path_hash"]);
        let rows: Vec<Vec<String>> = self
            .records
            .iter()
            .map(|r| {
                let mut row = vec![
                    r.t.to_string(),
                    fmt_opt(r.bl),
                    r.bl_upper.to_string(),
                    r.bl_lower.to_string(),
                    fmt_opt(r.tv),
                    r.mean_gap.to_string(),
                ];
                row.extend(r.coordinate_gaps.iter().map(f64::to_string));
                row.push(r.aux.to_string());
                row.push(self.path_hash.clone());
                row
            })
            .collect();
        csv_table(&header, &rows)
    }

    pub fn first(&self) -> &StabilityRecord {
        &self.records[0]
    }

    pub fn last(&self) -> &StabilityRecord {
        self.records.last().expect("traces are non-empty")
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Standard-normal nodes: `2d + 1` sigma points followed by `quantiles`
/// quasi-random quantile points (stratified midpoints in the first coordinate,
/// a Kronecker sequence in the others).
pub fn standard_nodes(d: usize, quantiles: usize) -> Vec<f64> {
    let mut z = vec![0.0; d];
    let root = (d as f64).sqrt();
    for i in 0..d {
        for sign in [1.0, -1.0] {
            let mut v = vec![0.0; d];
            v[i] = sign * root;
            z.extend(v);
        }
    }
    // Generalized golden ratio for dimension d.
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
    }
    for j in 0..quantiles {
        for i in 0..d {
            let u = if i == 0 {
                (j as f64 + 0.5) / quantiles as f64
            } else {
                (0.5 + (j + 1) as f64 * phi.powi(-(i as i32 + 1))).fract()
            };
            z.push(normal_quantile(u));
        }
    }
    z
}

/// Equal-weight atoms `m + L z` over the shared standard nodes.
pub fn discretize_gaussian(g: &GaussianMeasure, nodes: &[f64]) -> Result<DiscreteMeasure> {
    let d = g.dim();
    let l = linalg::psd_factor(&g.covariance);
    let mut atoms = Vec::with_capacity(nodes.len());
    for z in nodes.chunks_exact(d) {
        let x = &g.mean + &l * DVector::from_column_slice(z);
        atoms.extend(x.iter());
    }
    DiscreteMeasure::uniform(d, atoms)
}

/// Random hinge trials for the lower bound in stability traces.
pub const LOWER_TRIALS: usize = 200;

/// `(exact, upper, lower)` BL values; the exact value is absent when the
/// solver declines the pair.
pub fn bl_bounds(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    solver: &BlSolver,
    trials: usize,
    rng: &mut RngStream,
) -> Result<(Option<f64>, f64, f64)> {
    let exact = if solver.accepts(mu, nu) { Some(solver.distance(mu, nu)?) } else { None };
    let upper = bl_upper_min(mu, nu, &DEFAULT_SCALES)?;
    let lower = bl_lower_random(mu, nu, trials, rng)?;
    Ok((exact, upper, lower))
}

pub(crate) fn record_indices(len: usize, cadence: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).step_by(cadence).collect();
    if idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

pub(crate) fn gaps(a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let g: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    (g.iter().map(|v| v * v).sum::<f64>().sqrt(), g)
}

/// Kalman–Bucy pair on one path simulated under `mu`.
pub fn kalman_stability_seed(
    model: &crate::models::LinearGaussianModel,
    mu: &GaussianMeasure,
    nu: &GaussianMeasure,
    horizon: f64,
    dt: f64,
    cadence: usize,
    seed: u64,
) -> Result<(ObservationPath, Vec<StabilityRecord>)> {
    let mut sig = stream(seed, StreamId::Signal);
    let (_, path) = simulate_linear_gaussian(model, &Prior::Gaussian(mu.clone()), horizon, dt, &mut sig)?;
    let kb_mu = kalman_bucy_run(model, mu, &path)?;
    let kb_nu = kalman_bucy_run(model, nu, &path)?;
    let d = model.state_dim();
    let nodes = standard_nodes(d, QUANTILE_ATOMS);
    let solver = BlSolver::default();
    let quad = if d == 1 { Some(Quadrature::default()) } else if d == 2 { Some(Quadrature::coarse_2d()) } else { None };
    let mut rng = stream(seed, StreamId::Metric);
    let mut records = Vec::new();
    for i in record_indices(path.len(), cadence) {
        let (a, b) = (kb_mu[i].gaussian()?, kb_nu[i].gaussian()?);
        let (da, db) = (discretize_gaussian(&a, &nodes)?, discretize_gaussian(&b, &nodes)?);
        let (bl, bl_upper, bl_lower) = bl_bounds(&da, &db, &solver, LOWER_TRIALS, &mut rng)?;
        let tv = match &quad {
            Some(q) if linalg::min_eigenvalue(&a.covariance) > 0.0 && linalg::min_eigenvalue(&b.covariance) > 0.0 => {
                Some(tv_gaussian(&a, &b, q)?)
            }
            _ => None,
        };
        let (mean_gap, coordinate_gaps) = gaps(a.mean.as_slice(), b.mean.as_slice());
        records.push(StabilityRecord {
            t: kb_mu[i].t,
            bl,
            bl_upper,
            bl_lower,
            tv,
            mean_gap,
            coordinate_gaps,
            aux: linalg::operator_norm(&(&a.covariance - &b.covariance)),
        });
    }
    Ok((path, records))
}

/// Particle pair on one diffusion path simulated under `mu`. Both filters
/// share one random stream for propagation and resampling.
pub fn particle_stability_seed<M: ParticleModel>(
    model: &M,
    path: &ObservationPath,
    mu: &Prior,
    nu: &Prior,
    particles: usize,
    cadence: usize,
    seed: u64,
) -> Result<Vec<StabilityRecord>> {
    let mut ra = stream(seed, StreamId::FilterMu);
    let mut rb = stream(seed, StreamId::FilterMu);
    let mut fa = ParticleFilter::from_prior(model, mu, particles, &mut ra)?;
    let mut fb = ParticleFilter::from_prior(model, nu, particles, &mut rb)?;
    let solver = BlSolver::default();
    let mut rng = stream(seed, StreamId::Metric);
    let mut records = Vec::new();
    let wanted = record_indices(path.len(), cadence);
    let mut next = 0;
    let mut pa = model.propagator(path.step(0));
    let mut pb = model.propagator(path.step(0));
    for i in 0..path.len() {
        if i > 0 {
            let dy = path.increment(i - 1);
            let dt = path.step(i - 1);
            fa.assimilate(&dy, dt, pa.as_mut(), &mut ra)?;
            fb.assimilate(&dy, dt, pb.as_mut(), &mut rb)?;
        }
        if wanted.get(next) == Some(&i) {
            next += 1;
            let (ma, mb) = (fa.measure(), fb.measure());
            let (bl, bl_upper, bl_lower) = bl_bounds(&ma, &mb, &solver, LOWER_TRIALS, &mut rng)?;
            let (mean_gap, coordinate_gaps) = gaps(&ma.mean(), &mb.mean());
            records.push(StabilityRecord {
                t: path.times()[i],
                bl,
                bl_upper,
                bl_lower,
                tv: None,
                mean_gap,
                coordinate_gaps,
                aux: fa.ess().min(fb.ess()),
            });
        }
    }
    Ok(records)
}

pub fn run_stability(cfg: &ExperimentConfig) -> Result<Vec<StabilityTrace>> {
    let horizon = cfg.require(&cfg.horizon, "horizon")?;
    let dt = cfg.require(&cfg.dt, "dt")?;
    let (pmu, pnu) = cfg.priors()?;
    let ids = (pmu.label(), pnu.label());
    let traces: Vec<Result<StabilityTrace>> = match cfg.model_spec()? {
        ModelSpec::LinearGaussian(spec) => {
            let model = spec.build()?;
            let (mu, nu) = (pmu.gaussian()?, pnu.gaussian()?);
            cfg.seeds
                .par_iter()
                .map(|&seed| {
                    let (path, records) = kalman_stability_seed(&model, &mu, &nu, horizon, dt, cfg.cadence, seed)
                        .map_err(|e| e.annotate(format!("seed {seed}")))?;
                    Ok(StabilityTrace { seed, prior_ids: ids.clone(), path_hash: path.content_hash(), records })
                })
                .collect()
        }
        ModelSpec::Diffusion(spec) => {
            let model = spec.build()?;
            let (mu, nu) = (pmu.prior()?, pnu.prior()?);
            let n = cfg.require(&cfg.particles, "particles")?;
            cfg.seeds
                .par_iter()
                .map(|&seed| {
                    let mut sig = stream(seed, StreamId::Signal);
                    let x0 = mu.sample_flat(1, &mut sig);
                    let (_, path) = simulate_diffusion(&model, &x0, horizon, dt, &mut sig)?;
                    let records = particle_stability_seed(&model, &path, &mu, &nu, n, cfg.cadence, seed)
                        .map_err(|e| e.annotate(format!("seed {seed}")))?;
                    Ok(StabilityTrace { seed, prior_ids: ids.clone(), path_hash: path.content_hash(), records })
                })
                .collect()
        }
        _ => return Err(Error::Config("stability runs need a linear_gaussian or diffusion model".into())),
    };
    traces.into_iter().collect()
}

/// Block maxima never increase by more than `slack` when the trace is cut into
/// `blocks` consecutive pieces.
pub fn trending_down(values: &[f64], blocks: usize, slack: f64) -> bool {
    if values.len() < blocks || blocks < 2 {
        return values.windows(2).all(|w| w[1] <= w[0] + slack);
    }
    let size = values.len() / blocks;
    let maxima: Vec<f64> = (0..blocks)
        .map(|b| {
            let end = if b + 1 == blocks { values.len() } else { (b + 1) * size };
            values[b * size..end].iter().copied().fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    maxima.windows(2).all(|w| w[1] <= w[0] + slack)
}

/// Increases below this fraction of the initial distance are treated as
/// round-off in the trend check.
pub const TREND_SLACK: f64 = 1e-6;

pub fn stability_checks(cfg: &ExperimentConfig, traces: &[StabilityTrace]) -> Vec<Check> {
    let th = &cfg.thresholds;
    let mut checks = Vec::new();
    let worst = |f: &dyn Fn(&StabilityTrace) -> f64| traces.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let least = |f: &dyn Fn(&StabilityTrace) -> f64| traces.iter().map(f).fold(f64::INFINITY, f64::min);
    if let Some(b) = th.max_mean_gap_ratio {
        let v = worst(&|t| t.last().mean_gap / t.first().mean_gap);
        checks.push(Check::new("mean_gap_ratio", v, b, v <= b));
    }
    if let Some(b) = th.max_cov_gap {
        let v = worst(&|t| t.last().aux);
        checks.push(Check::new("cov_gap", v, b, v <= b));
    }
    if let Some(b) = th.max_final_bl {
        let v = worst(&|t| t.last().bl.unwrap_or(t.last().bl_upper));
        let trend = traces.iter().all(|t| {
            let bl: Vec<f64> = t.records.iter().map(|r| r.bl.unwrap_or(r.bl_upper)).collect();
            trending_down(&bl, 10, TREND_SLACK * bl.first().copied().unwrap_or(0.0))
        });
        checks.push(Check::new("final_bl", v, b, v < b));
        checks.push(Check::new("bl_trending_down", f64::from(u8::from(trend)), 1.0, trend));
    }
    if let (Some(i), Some(b)) = (th.persistent_coordinate, th.min_persistent_ratio) {
        let v = least(&|t| {
            let (a, z) = (t.first().coordinate_gaps.get(i), t.last().coordinate_gaps.get(i));
            match (a, z) {
                (Some(a), Some(z)) if *a > 0.0 => z / a,
                _ => f64::NAN,
            }
        });
        checks.push(Check::new(format!("persistent_gap_{i}"), v, b, v >= b));
    }
    let ordered = traces.iter().all(|t| {
        t.records
            .iter()
            .all(|r| r.bl.is_none_or(|e| r.bl_lower <= e + 1e-9 && e <= r.bl_upper + 1e-9) && r.bl_lower <= r.bl_upper + 1e-9)
    });
    checks.push(Check::new("bl_sandwich_rows", f64::from(u8::from(ordered)), 1.0, ordered));
    checks
}

pub fn stability_output(cfg: &ExperimentConfig, traces: &[StabilityTrace]) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::default();
    let mut series = Vec::new();
    for t in traces {
        out.files.push((format!("trace_seed{}.csv", t.seed), t.csv()?));
        series.push(Series {
            name: format!("bl seed {}", t.seed),
            points: t.records.iter().map(|r| (r.t, r.bl.unwrap_or(r.bl_upper))).collect(),
        });
        series.push(Series {
            name: format!("mean gap seed {}", t.seed),
            points: t.records.iter().map(|r| (r.t, r.mean_gap)).collect(),
        });
    }
    out.files.push(("plot.svg".into(), svg_plot("filter distance vs t", &series, cfg.log_plot)));
    out.checks = stability_checks(cfg, traces);
    Ok(out)
}
