use crate::error::{Error, Result};
use crate::filters::{kalman_bucy_run, particle_filter_run, write_trace_csv, TraceRow};
use crate::harness::config::{ExperimentConfig, ModelSpec};
use crate::harness::output::{csv_table, ExperimentOutput};
use crate::harness::predictor::simulate_chain_observations;
use crate::models::{
    simulate_diffusion, simulate_example12, simulate_linear_gaussian, write_path_csv, ObservationPath, SignalPath,
};
use crate::rng::{stream, StreamId};

/// Simulated signal and observation path for one seed.
fn simulate_seed(cfg: &ExperimentConfig, seed: u64) -> Result<(SignalPath, ObservationPath)> {
    let mut rng = stream(seed, StreamId::Signal);
    let horizon = cfg.require(&cfg.horizon, "horizon")?;
    let dt = cfg.require(&cfg.dt, "dt")?;
    let prior = cfg.require(&cfg.prior_mu, "prior_mu")?.prior()?;
    match cfg.model_spec()? {
        ModelSpec::LinearGaussian(s) => simulate_linear_gaussian(&s.build()?, &prior, horizon, dt, &mut rng),
        ModelSpec::Diffusion(s) => {
            let x0 = prior.sample_flat(1, &mut rng);
            simulate_diffusion(&s.build()?, &x0, horizon, dt, &mut rng)
        }
        ModelSpec::Example12(s) => {
            let model = s.build()?;
            let x0 = prior.sample_flat(1, &mut rng)[0];
            let obs = simulate_example12(&model, x0, horizon, dt, &mut rng)?;
            let states = obs.times().iter().map(|&t| model.signal_at(x0, t)).collect();
            Ok((SignalPath { times: obs.times().to_vec(), dim: 1, states }, obs))
        }
        _ => Err(Error::Config("continuous-time simulation needs a linear_gaussian, diffusion or example12 model".into())),
    }
}

pub fn simulate_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::default();
    for &seed in &cfg.seeds {
        if let ModelSpec::Chain(spec) = cfg.model_spec()? {
            let model = spec.build()?;
            let prior = cfg.require(&cfg.prior_mu, "prior_mu")?.prior()?;
            let steps = cfg.require(&cfg.steps, "steps")?;
            let (xs, ys) = simulate_chain_observations(&model, &prior, steps, seed)?;
            let rows: Vec<Vec<String>> = (0..steps)
                .map(|n| vec![n.to_string(), xs[n].to_string(), ys[n].to_string()])
                .collect();
            out.files.push((format!("path_seed{seed}.csv"), csv_table(&["n", "x_0", "y_0"], &rows)?));
            continue;
        }
        let (signal, obs) = simulate_seed(cfg, seed).map_err(|e| e.annotate(format!("seed {seed}")))?;
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &signal, &obs)?;
        out.files.push((format!("path_seed{seed}.csv"), String::from_utf8(buf).expect("csv is utf-8")));
    }
    Ok(out)
}

pub fn filter_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::default();
    let prior = cfg.require(&cfg.prior_mu, "prior_mu")?;
    for &seed in &cfg.seeds {
        let (_, path) = simulate_seed(cfg, seed).map_err(|e| e.annotate(format!("seed {seed}")))?;
        let mut emit = |name: String, rows: Vec<TraceRow>| -> Result<()> {
            let mut buf = Vec::new();
            write_trace_csv(&mut buf, &rows)?;
            out.files.push((name, String::from_utf8(buf).expect("csv is utf-8")));
            Ok(())
        };
        let mut rng = stream(seed, StreamId::FilterMu);
        match cfg.model_spec()? {
            ModelSpec::LinearGaussian(s) => {
                let model = s.build()?;
                let kb = kalman_bucy_run(&model, &prior.gaussian()?, &path)?;
                let rows = kb.iter().step_by(cfg.cadence).map(TraceRow::from).collect();
                emit(format!("kalman_seed{seed}.csv"), rows)?;
                if let Some(n) = cfg.particles {
                    let pf = particle_filter_run(&model, &prior.prior()?, &path, n, cfg.cadence, &mut rng)?;
                    emit(format!("particle_seed{seed}.csv"), pf.iter().map(TraceRow::from).collect())?;
                }
            }
            ModelSpec::Diffusion(s) => {
                let model = s.build()?;
                let n = cfg.require(&cfg.particles, "particles")?;
                let pf = particle_filter_run(&model, &prior.prior()?, &path, n, cfg.cadence, &mut rng)?;
                emit(format!("particle_seed{seed}.csv"), pf.iter().map(TraceRow::from).collect())?;
            }
            _ => return Err(Error::Config("filter runs need a linear_gaussian or diffusion model".into())),
        }
    }
    Ok(out)
}
