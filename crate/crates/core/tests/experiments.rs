//! End-to-end runs of the experiment drivers on shortened configs.

use filterlab::harness::counterexample::run_counterexample;
use filterlab::harness::predictor::run_predictor_merging;
use filterlab::harness::stability::run_stability;
use filterlab::harness::{run_experiment, ExperimentConfig, ModelSpec};

const OBS: &str = include_str!("../../../configs/obs_kalman.toml");
const COUNTER: &str = include_str!("../../../configs/counterexample.toml");
const PRED: &str = include_str!("../../../configs/predictor_identity.toml");

fn short_obs() -> String {
    OBS.replace("horizon = 20.0", "horizon = 2.0")
        .replace("cadence = 200", "cadence = 50")
        .replace("seeds = [0, 1, 2, 3, 4]", "seeds = [3, 7]")
}

fn same_priors(text: &str) -> String {
    let (head, _) = text.split_once("[prior_nu]").unwrap();
    let mu = head.split_once("[prior_mu]").unwrap().1.split("\n[").next().unwrap();
    let tail = text.split_once("[prior_nu]").unwrap().1;
    let rest = tail.find("\n[").map(|i| &tail[i..]).unwrap_or("");
    format!("{head}[prior_nu]{mu}{rest}")
}

#[test]
fn same_prior_filters_never_differ() {
    let cfg = ExperimentConfig::from_toml(&same_priors(&short_obs())).unwrap();
    for trace in run_stability(&cfg).unwrap() {
        for r in &trace.records {
            assert_eq!(r.bl, Some(0.0));
            assert_eq!(r.bl_lower, 0.0);
            assert_eq!(r.tv, Some(0.0));
            assert_eq!(r.mean_gap, 0.0);
        }
    }
}

#[test]
fn stability_rows_are_well_formed() {
    let cfg = ExperimentConfig::from_toml(&short_obs()).unwrap();
    let traces = run_stability(&cfg).unwrap();
    assert_eq!(traces.len(), 2);
    assert_ne!(traces[0].path_hash, traces[1].path_hash);
    for trace in &traces {
        assert!(trace.records.windows(2).all(|w| w[1].t > w[0].t));
        for r in &trace.records {
            let bl = r.bl.unwrap();
            assert!((0.0..=2.0).contains(&bl));
            assert!(r.bl_lower <= bl + 1e-12 && bl <= r.bl_upper + 1e-12, "{r:?}");
        }
        let csv = trace.csv().unwrap();
        assert!(csv.lines().skip(1).all(|l| l.ends_with(&trace.path_hash)));
    }
}

#[test]
fn runs_are_reproducible_in_memory() {
    let cfg = ExperimentConfig::from_toml(&short_obs()).unwrap();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.files, b.files);
    assert_eq!(a.summary(), b.summary());
}

#[test]
fn counterexample_with_equal_priors_has_no_gap() {
    let cfg = ExperimentConfig::from_toml(COUNTER).unwrap();
    let ModelSpec::Example12(spec) = cfg.model_spec().unwrap() else { panic!() };
    let model = spec.build().unwrap();
    let mu = cfg.prior_mu.as_ref().unwrap().discrete().unwrap();
    let runs = run_counterexample(&model, &mu, &mu, 4, 500, 2, &[0, 1, 2]).unwrap();
    for r in runs {
        assert!(r.gaps.iter().all(|g| *g == 0.0), "{:?}", r.gaps);
        assert_eq!(r.g_limit, 0.0);
    }
}

#[test]
fn predictors_from_one_prior_coincide() {
    let cfg = ExperimentConfig::from_toml(PRED).unwrap();
    let ModelSpec::Chain(spec) = cfg.model_spec().unwrap() else { panic!() };
    let model = spec.build().unwrap();
    let mu = cfg.prior_mu.as_ref().unwrap().prior().unwrap();
    for trace in run_predictor_merging(&model, &mu, &mu, 6, 300, &[0, 5]).unwrap() {
        for r in &trace.records {
            assert_eq!(r.bl.unwrap_or(r.bl_lower), 0.0);
            assert_eq!(r.bl_lower, 0.0);
            assert_eq!(r.mean_gap, 0.0);
        }
    }
}
