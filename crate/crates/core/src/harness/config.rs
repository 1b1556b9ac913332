//! Experiment configuration files (TOML).
//!
//! ```toml
//! kind = "stability"
//! horizon = 20.0
//! dt = 0.01
//! seeds = [0, 1, 2]
//! cadence = 100
//!
//! [model]
//! type = "linear_gaussian"
//! a = [[1.0]]
//! b = [[1.0]]
//! c = [[1.0]]
//! d = [[1.0]]
//!
//! [prior_mu]
//! type = "gaussian"
//! mean = [0.0]
//! cov = [[1.0]]
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, GaussianMeasure, GaussianNoise};
use crate::models::{
    constant_diffusion, DiffusionModel, DiscreteChainModel, Example12Model, FiniteHMM, LinearGaussianModel, Prior,
    VectorField,
};

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Filter,
    Stability,
    Counterexample,
    Predictor,
    Convolution,
    Lemma42,
    Diagnose,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Filter => "filter",
            Self::Stability => "stability",
            Self::Counterexample => "counterexample",
            Self::Predictor => "predictor",
            Self::Convolution => "convolution",
            Self::Lemma42 => "lemma42",
            Self::Diagnose => "diagnose",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Output subdirectory; defaults to the kind.
    pub name: Option<String>,
    pub model: Option<ModelSpec>,
    pub prior_mu: Option<PriorSpec>,
    pub prior_nu: Option<PriorSpec>,
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub particles: Option<usize>,
    /// Predictor steps.
    pub steps: Option<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Metric evaluations every `cadence` grid steps.
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default)]
    pub log_plot: bool,
    pub counterexample: Option<CounterexampleSpec>,
    pub convolution: Option<ConvolutionSpec>,
    pub lemma42: Option<Lemma42Spec>,
    pub diagnose: Option<DiagnoseSpec>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_cadence() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    LinearGaussian(LinearSpec),
    Diffusion(DiffusionSpec),
    Example12(Example12Spec),
    Chain(ChainSpec),
    FiniteHmm(HmmSpec),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
}

/// Scalar maps applied coordinatewise.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    Constant { value: f64 },
    Linear { rate: f64 },
    Sine { scale: f64 },
    /// `rate · clamp(x, −bound, bound)`.
    ClippedLinear { rate: f64, bound: f64 },
    /// `rate · x + scale · sin x`.
    LinearSine { rate: f64, scale: f64 },
}

impl FieldSpec {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant { value } => value,
            Self::Linear { rate } => rate * x,
            Self::Sine { scale } => scale * x.sin(),
            Self::ClippedLinear { rate, bound } => rate * x.clamp(-bound, bound),
            Self::LinearSine { rate, scale } => rate * x + scale * x.sin(),
        }
    }

    pub fn field(self) -> VectorField {
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            for (o, v) in out.iter_mut().zip(x) {
                *o = self.eval(*v);
            }
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSpec {
    pub drift: FieldSpec,
    pub lip_drift: f64,
    pub sigma: Vec<Vec<f64>>,
    pub trace_bound: f64,
    pub c: Vec<Vec<f64>>,
    pub h0: FieldSpec,
    pub lip_cinv_h0: f64,
    pub d: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example12Spec {
    pub lambda: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    /// AR(1) coefficient of `x' = a x + sd·N(0, 1)`.
    pub a: f64,
    pub sd: f64,
    pub h: FieldSpec,
    pub noise_var: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmmSpec {
    pub transition: Vec<Vec<f64>>,
    pub emission: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    Discrete { atoms: Vec<Vec<f64>>, weights: Vec<f64> },
    /// Probability row over the states of a finite chain.
    Row { probs: Vec<f64> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSpec {
    pub n_max: usize,
    /// Grid steps per period `2π/λ`.
    pub period_steps: usize,
    /// First index of the convergence window.
    #[serde(default = "default_n0")]
    pub n0: usize,
}

fn default_n0() -> usize {
    5
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvolutionSpec {
    pub n_values: Vec<usize>,
    pub noise_var: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma42Spec {
    pub t_max: usize,
    pub k: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseSpec {
    /// Window as a fraction of the threshold `ε₀` (used when `ε₀` is finite).
    #[serde(default = "half")]
    pub window_fraction: f64,
    /// Window used when `ε₀` is infinite.
    #[serde(default = "default_window")]
    pub window: f64,
    pub pairs: usize,
    pub radius: f64,
    pub flow_horizon: f64,
    pub flow_dt: f64,
    pub mc_paths: usize,
    pub probes: Vec<f64>,
    /// Working interval for the scalar bi-Lipschitz split.
    pub probe_interval: Option<[f64; 2]>,
}

fn half() -> f64 {
    0.5
}

fn default_window() -> f64 {
    0.1
}

/// Frozen pass/fail thresholds. Each check runs only when its threshold is set.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Final mean gap over initial mean gap.
    pub max_mean_gap_ratio: Option<f64>,
    /// Final covariance gap (operator norm).
    pub max_cov_gap: Option<f64>,
    /// Final sigma-atom BL distance.
    pub max_final_bl: Option<f64>,
    /// Coordinate whose gap must persist, with its minimal final/initial ratio.
    pub persistent_coordinate: Option<usize>,
    pub min_persistent_ratio: Option<f64>,
    /// Median BL at the last step over median BL at step 0.
    pub max_median_bl_ratio: Option<f64>,
    /// Counterexample: `max_{n ≥ n0} |g_n − g_limit|`.
    pub max_residual: Option<f64>,
    pub min_limit_gap: Option<f64>,
    /// Fraction of seeds that must pass the per-seed checks.
    pub min_seed_fraction: Option<f64>,
    pub max_discrepancy: Option<f64>,
    /// Convolution: closed-form tolerance.
    pub tv_tolerance: Option<f64>,
}

pub(crate) fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Config(format!("{what} must be a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_row_iterator(r, c, rows.iter().flatten().copied()))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn output_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be non-empty".into()));
        }
        if self.cadence == 0 {
            return Err(Error::Config("cadence must be positive".into()));
        }
        if let (Some(h), Some(dt)) = (self.horizon, self.dt) {
            let steps = crate::models::step_count(h, dt).map_err(|e| Error::Config(e.to_string()))?;
            if steps % self.cadence != 0 {
                return Err(Error::Config(format!("cadence {} does not divide the {steps}-step grid", self.cadence)));
            }
        }
        Ok(())
    }

    pub fn require<T: Clone>(&self, v: &Option<T>, key: &str) -> Result<T> {
        v.clone()
            .ok_or_else(|| Error::Config(format!("`{key}` is required for {} experiments", self.kind.name())))
    }

    pub fn model_spec(&self) -> Result<&ModelSpec> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Config(format!("[model] is required for {} experiments", self.kind.name())))
    }

    pub fn priors(&self) -> Result<(PriorSpec, PriorSpec)> {
        let mu = self.require(&self.prior_mu, "prior_mu")?;
        let nu = self.prior_nu.clone().unwrap_or_else(|| mu.clone());
        Ok((mu, nu))
    }
}

impl LinearSpec {
    pub fn build(&self) -> Result<LinearGaussianModel> {
        LinearGaussianModel::new(matrix(&self.a, "a")?, matrix(&self.b, "b")?, matrix(&self.c, "c")?, matrix(&self.d, "d")?)
    }
}

impl DiffusionSpec {
    pub fn build(&self) -> Result<DiffusionModel> {
        let c = matrix(&self.c, "c")?;
        let model = DiffusionModel {
            dim: c.nrows(),
            drift: self.drift.field(),
            lip_drift: self.lip_drift,
            diffusion: constant_diffusion(matrix(&self.sigma, "sigma")?),
            trace_bound: self.trace_bound,
            c,
            h0: self.h0.field(),
            lip_cinv_h0: self.lip_cinv_h0,
            d: matrix(&self.d, "d")?,
        };
        model.validate()?;
        if (model.diffusion)(&vec![0.0; model.dim]).nrows() != model.dim {
            return Err(Error::Config("sigma must have one row per state coordinate".into()));
        }
        Ok(model)
    }
}

impl Example12Spec {
    pub fn build(&self) -> Result<Example12Model> {
        Example12Model::new(self.lambda)
    }
}

impl ChainSpec {
    pub fn build(&self) -> Result<DiscreteChainModel> {
        if !(self.noise_var > 0.0) {
            return Err(Error::Config("chain noise variance must be positive".into()));
        }
        Ok(DiscreteChainModel {
            dim: 1,
            kernel: DiscreteChainModel::ar1_kernel(self.a, self.sd),
            h: self.h.field(),
            noise: GaussianNoise::scalar(self.noise_var)?,
        })
    }
}

impl HmmSpec {
    pub fn build(&self) -> Result<FiniteHMM> {
        FiniteHMM::new(matrix(&self.transition, "transition")?, matrix(&self.emission, "emission")?)
    }
}

impl PriorSpec {
    pub fn gaussian(&self) -> Result<GaussianMeasure> {
        match self {
            Self::Gaussian { mean, cov } => GaussianMeasure::new(DVector::from_vec(mean.clone()), matrix(cov, "cov")?),
            _ => Err(Error::Config("a Gaussian prior is required here".into())),
        }
    }

    pub fn discrete(&self) -> Result<DiscreteMeasure> {
        match self {
            Self::Discrete { atoms, weights } => DiscreteMeasure::from_points(atoms, weights.clone()),
            _ => Err(Error::Config("a discrete prior is required here".into())),
        }
    }

    pub fn row(&self) -> Result<Vec<f64>> {
        match self {
            Self::Row { probs } => Ok(probs.clone()),
            _ => Err(Error::Config("a probability row prior is required here".into())),
        }
    }

    pub fn prior(&self) -> Result<Prior> {
        match self {
            Self::Gaussian { .. } => Ok(Prior::Gaussian(self.gaussian()?)),
            Self::Discrete { .. } => Ok(Prior::Discrete(self.discrete()?)),
            Self::Row { .. } => Err(Error::Config("probability rows only apply to finite chains".into())),
        }
    }

    /// Short identifier for trace metadata.
    pub fn label(&self) -> String {
        match self {
            Self::Gaussian { mean, cov } => format!("N({mean:?},{cov:?})"),
            Self::Discrete { atoms, weights } => format!("discrete({atoms:?},{weights:?})"),
            Self::Row { probs } => format!("row({probs:?})"),
        }
    }
}
