//! Probability distances: exact dual bounded-Lipschitz distance, its
//! partition-of-unity upper bound, a randomized lower bound, and total variation.

mod bl;
mod lower;
mod partition;
mod tv;

use std::io::Write;

pub use bl::{bl_distance_exact, BlMethod, BlSolver, DEFAULT_SUPPORT_CAP};
pub use lower::bl_lower_random;
pub use partition::{
    bl_upper_min, bl_upper_partition, partition_member_eval, PartitionOfUnity, DEFAULT_SCALES,
};
pub use tv::{tv_convolved, tv_discrete, tv_gaussian, Quadrature};

use crate::error::Result;
use crate::measures::DiscreteMeasure;
use crate::rng::RngStream;

/// Distances between two measures at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub t: f64,
    /// Absent when the combined support exceeded the exact solver's cap.
    pub exact_bl: Option<f64>,
    pub bl_upper: f64,
    pub bl_lower: f64,
    pub tv: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "t,bl_exact,bl_upper,bl_lower,tv";

    /// `bl_lower ≤ exact_bl ≤ bl_upper` up to `tol`, all values in `[0, 2]`.
    pub fn is_consistent(&self, tol: f64) -> bool {
        let in_range = |v: f64| (-tol..=2.0 + tol).contains(&v);
        let ordered = match self.exact_bl {
            Some(e) => self.bl_lower <= e + tol && e <= self.bl_upper + tol && in_range(e),
            None => self.bl_lower <= self.bl_upper + tol,
        };
        ordered && in_range(self.bl_upper) && in_range(self.bl_lower) && in_range(self.tv)
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.t,
            self.exact_bl.map(|v| v.to_string()).unwrap_or_default(),
            self.bl_upper,
            self.bl_lower,
            self.tv
        )
    }
}

pub fn write_reports_csv<W: Write>(mut w: W, rows: &[MetricReport]) -> std::io::Result<()> {
    writeln!(w, "{}", MetricReport::CSV_HEADER)?;
    for r in rows {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Settings for [`measure_pair`].
#[derive(Clone, Debug)]
pub struct MetricSettings {
    pub solver: BlSolver,
    pub scales: Vec<f64>,
    pub lower_trials: usize,
}

impl Default for MetricSettings {
    fn default() -> Self {
        Self {
            solver: BlSolver::default(),
            scales: DEFAULT_SCALES.to_vec(),
            lower_trials: 200,
        }
    }
}

/// Full report for two discrete measures: exact BL when the solver accepts the
/// pair, partition upper bound, hinge lower bound and discrete TV.
pub fn measure_pair(
    t: f64,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    settings: &MetricSettings,
    rng: &mut RngStream,
) -> Result<MetricReport> {
    let exact_bl = if settings.solver.accepts(mu, nu) {
        Some(settings.solver.distance(mu, nu)?)
    } else {
        None
    };
    Ok(MetricReport {
        t,
        exact_bl,
        bl_upper: bl_upper_min(mu, nu, &settings.scales)?,
        bl_lower: bl_lower_random(mu, nu, settings.lower_trials, rng)?,
        tv: tv_discrete(mu, nu)?,
    })
}
