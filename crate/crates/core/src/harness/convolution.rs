use statrs::function::erf::erf;

use crate::diagnostics::Check;
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::output::{csv_table, svg_plot, ExperimentOutput, Series};
use crate::measures::{DiscreteMeasure, GaussianNoise};
use crate::metrics::{bl_distance_exact, tv_convolved, tv_discrete, Quadrature};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvolutionRow {
    pub n: usize,
    pub bl: f64,
    pub tv_discrete: f64,
    pub tv_convolved: f64,
    /// `2(2Φ(1/(2nσ)) − 1)`.
    pub closed_form: f64,
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Point masses `δ_{1/n}` against `δ_0`, before and after convolving with `ξ`.
pub fn run_convolution_merging(n_values: &[usize], xi: &GaussianNoise) -> Result<Vec<ConvolutionRow>> {
    if xi.dim() != 1 {
        return Err(Error::DimensionMismatch("the point-mass family lives on the line".into()));
    }
    let sd = xi.covariance[(0, 0)].sqrt();
    let nu = DiscreteMeasure::dirac(&[0.0]);
    let quad = Quadrature::default();
    n_values
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::Config("n must be positive".into()));
            }
            let mu = DiscreteMeasure::dirac(&[1.0 / n as f64]);
            Ok(ConvolutionRow {
                n,
                bl: bl_distance_exact(&mu, &nu)?,
                tv_discrete: tv_discrete(&mu, &nu)?,
                tv_convolved: tv_convolved(&mu, &nu, xi, &quad)?,
                closed_form: 2.0 * (2.0 * std_normal_cdf(1.0 / (2.0 * n as f64 * sd)) - 1.0),
            })
        })
        .collect()
}

pub fn convolution_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let spec = cfg.require(&cfg.convolution, "convolution")?;
    let xi = GaussianNoise::scalar(spec.noise_var)?;
    let rows = run_convolution_merging(&spec.n_values, &xi)?;
    let mut out = ExperimentOutput::default();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.bl.to_string(),
                r.tv_discrete.to_string(),
                r.tv_convolved.to_string(),
                r.closed_form.to_string(),
            ]
        })
        .collect();
    out.files.push((
        "convolution.csv".into(),
        csv_table(&["n", "bl", "tv_discrete", "tv_convolved", "tv_closed_form"], &table)?,
    ));
    let series = vec![
        Series { name: "bl".into(), points: rows.iter().map(|r| (r.n as f64, r.bl)).collect() },
        Series { name: "tv discrete".into(), points: rows.iter().map(|r| (r.n as f64, r.tv_discrete)).collect() },
        Series { name: "tv convolved".into(), points: rows.iter().map(|r| (r.n as f64, r.tv_convolved)).collect() },
    ];
    out.files.push(("plot.svg".into(), svg_plot("point masses vs their convolutions", &series, cfg.log_plot)));
    let tv2 = rows.iter().all(|r| r.tv_discrete == 2.0);
    out.checks.push(Check::new("tv_discrete_equals_2", f64::from(u8::from(tv2)), 1.0, tv2));
    let bl_ok = rows.iter().all(|r| (r.bl - (1.0 / r.n as f64).min(2.0)).abs() < 1e-12);
    out.checks.push(Check::new("bl_equals_inverse_n", f64::from(u8::from(bl_ok)), 1.0, bl_ok));
    if let Some(tol) = cfg.thresholds.tv_tolerance {
        let err = rows.iter().map(|r| (r.tv_convolved - r.closed_form).abs()).fold(0.0, f64::max);
        out.checks.push(Check::new("tv_convolved_closed_form", err, tol, err <= tol));
    }
    let mut sorted = rows.clone();
    sorted.sort_by_key(|r| r.n);
    let decreasing = sorted.windows(2).all(|w| w[1].tv_convolved < w[0].tv_convolved);
    out.checks.push(Check::new("tv_convolved_decreasing", f64::from(u8::from(decreasing)), 1.0, decreasing));
    Ok(out)
}
