use crate::diagnostics::{
    bilipschitz_decompose_1d, model_constants, verify_flow_deviation, verify_sandwich, Check,
};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, ModelSpec};
use crate::harness::output::{csv_table, svg_plot, ExperimentOutput, Series};
use crate::rng::{stream, StreamId};

/// Probe points for the scalar bi-Lipschitz split.
const SPLIT_PROBES: usize = 10_001;

pub fn diagnose_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let ModelSpec::Diffusion(spec) = cfg.model_spec()? else {
        return Err(Error::Config("diagnose runs need a diffusion model".into()));
    };
    let model = spec.build()?;
    let ds = cfg.require(&cfg.diagnose, "diagnose")?;
    let seed = cfg.seeds[0];
    let mut out = ExperimentOutput::default();

    if let (1, Some([lo, hi])) = (model.dim, ds.probe_interval) {
        let grid: Vec<f64> = (0..SPLIT_PROBES)
            .map(|i| lo + (hi - lo) * i as f64 / (SPLIT_PROBES - 1) as f64)
            .collect();
        let h = |x: f64| {
            let mut o = [0.0];
            model.observation(&[x], &mut o);
            o[0]
        };
        let split = bilipschitz_decompose_1d(h, &grid)?;
        out.checks.push(Check::new("bilipschitz_epsilon", split.epsilon, 1.0, split.valid));
        out.checks.push(Check::new(
            "declared_lip_cinv_h0_covers_grid",
            split.lip_cinv_h0,
            model.lip_cinv_h0,
            split.lip_cinv_h0 <= model.lip_cinv_h0 + 1e-9,
        ));
    }

    let k0 = model_constants(&model, 0.0)?;
    let eps = if k0.epsilon0.is_finite() { ds.window_fraction * k0.epsilon0 } else { ds.window };
    let k = model_constants(&model, eps)?;
    out.checks.push(Check::new("window_lower_constant", k.lower, 0.0, k.lower > 0.0 && k.lower <= k.upper));
    match verify_sandwich(&model, eps, ds.pairs, ds.radius, &mut stream(seed, StreamId::Auxiliary)) {
        Ok(r) => {
            out.checks.push(Check::new("sandwich_min_ratio", r.min_ratio, k.lower, true));
            out.checks.push(Check::new("sandwich_max_ratio", r.max_ratio, k.upper, true));
        }
        Err(Error::SandwichViolated { ratio, lower, upper, .. }) => {
            out.checks.push(Check::new("sandwich_ratio", ratio, if ratio < lower { lower } else { upper }, false));
        }
        Err(e) => return Err(e),
    }

    let probes: Vec<Vec<f64>> = ds.probes.iter().map(|&p| vec![p; model.dim]).collect();
    match verify_flow_deviation(&model, ds.flow_horizon, ds.flow_dt, ds.mc_paths, &probes, &mut stream(seed, StreamId::Signal)) {
        Ok(r) => {
            let rows: Vec<Vec<String>> = r
                .rows
                .iter()
                .map(|row| vec![row.s.to_string(), row.estimate.to_string(), row.std_error.to_string(), row.bound.to_string()])
                .collect();
            out.files.push(("flow_deviation.csv".into(), csv_table(&["s", "estimate", "std_error", "bound"], &rows)?));
            let series = vec![
                Series { name: "E|X_s - eta_s|".into(), points: r.rows.iter().map(|x| (x.s, x.estimate)).collect() },
                Series { name: "bound".into(), points: r.rows.iter().map(|x| (x.s, x.bound)).collect() },
            ];
            out.files.push(("plot.svg".into(), svg_plot("flow deviation", &series, cfg.log_plot)));
            let worst = r.rows.iter().map(|x| x.estimate / x.bound).fold(0.0, f64::max);
            out.checks.push(Check::new("flow_deviation_over_bound", worst, 1.0, true));
        }
        Err(Error::BoundViolated { estimate, bound, .. }) => {
            out.checks.push(Check::new("flow_deviation", estimate, bound, false));
        }
        Err(e) => return Err(e),
    }
    Ok(out)
}
