use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ObservabilityReport {
    pub rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub observable: bool,
    pub tolerance: f64,
}

fn rank_report(m: &DMatrix<f64>, d: usize, tol: f64) -> ObservabilityReport {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = if top > 0.0 { sv.iter().filter(|&&s| s > tol * top).count() } else { 0 };
    ObservabilityReport { rank, singular_values: sv, observable: rank == d, tolerance: tol }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidModel(format!("rank tolerance {tol} must lie in (0, 1)")));
    }
    Ok(())
}

/// `[C; CA; …; CA^{d−1}]`.
pub fn observability_matrix(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    if !a.is_square() || c.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, C is {}x{}",
            a.nrows(),
            a.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    let q = c.nrows();
    let mut o = DMatrix::zeros(q * d, d);
    let mut block = c.clone();
    for k in 0..d {
        o.view_mut((k * q, 0), (q, d)).copy_from(&block);
        block = &block * a;
    }
    Ok(o)
}

/// Rank of the observability matrix by SVD with a relative threshold.
pub fn observability_matrix_rank(a: &DMatrix<f64>, c: &DMatrix<f64>, tol: f64) -> Result<ObservabilityReport> {
    check_tol(tol)?;
    let o = observability_matrix(a, c)?;
    Ok(rank_report(&o, a.nrows(), tol))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    /// Stacked `∫_0^{t_i} C e^{As} ds`, `kq × d`.
    pub matrix: DMatrix<f64>,
    pub report: ObservabilityReport,
    /// Left inverse, present when the stack has full column rank.
    pub left_inverse: Option<DMatrix<f64>>,
}

/// Stacks the integrated observation maps at the given times and certifies
/// that the initial state can be read off linearly.
pub fn reconstruction_matrix(a: &DMatrix<f64>, c: &DMatrix<f64>, times: &[f64], tol: f64) -> Result<Reconstruction> {
    check_tol(tol)?;
    observability_matrix(a, c)?;
    if times.is_empty() || times.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidModel("reconstruction times must be positive".into()));
    }
    let (d, q) = (a.nrows(), c.nrows());
    let mut m = DMatrix::zeros(times.len() * q, d);
    for (i, &t) in times.iter().enumerate() {
        let block = c * linalg::integrated_exp(a, t);
        m.view_mut((i * q, 0), (q, d)).copy_from(&block);
    }
    let report = rank_report(&m, d, tol);
    let left_inverse = if report.observable {
        let cutoff = tol * report.singular_values[0];
        Some(m.clone().pseudo_inverse(cutoff).map_err(|e| Error::InvalidModel(e.to_string()))?)
    } else {
        None
    };
    Ok(Reconstruction { matrix: m, report, left_inverse })
}
