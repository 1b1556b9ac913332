//! Small dense linear-algebra helpers shared by the models and filters.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).abs().max()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let mut s = m.clone();
    symmetrize(&mut s);
    s.symmetric_eigenvalues().min()
}

/// Factor `L` with `L Lᵀ = cov` for a symmetric positive semidefinite matrix.
///
/// Uses Cholesky when it succeeds and falls back to the symmetric eigenvalue
/// square root (negative round-off eigenvalues clamped to zero) otherwise.
pub fn psd_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = cov.clone();
    symmetrize(&mut s);
    if let Some(ch) = s.clone().cholesky() {
        return ch.l();
    }
    let eig = s.symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

/// Spectral norm.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Precomputed inverse and normalizing constant of a nondegenerate Gaussian.
#[derive(Clone, Debug)]
pub struct GaussianFactor {
    pub precision: DMatrix<f64>,
    pub log_norm: f64,
}

impl GaussianFactor {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let mut s = cov.clone();
        symmetrize(&mut s);
        let ch = s.cholesky().ok_or(Error::SingularNoise)?;
        let diag = ch.l_dirty().diagonal();
        if diag.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::SingularNoise);
        }
        let log_det = 2.0 * diag.iter().map(|v| v.ln()).sum::<f64>();
        let d = cov.nrows() as f64;
        Ok(Self {
            precision: ch.inverse(),
            log_norm: -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det),
        })
    }

    pub fn log_density(&self, residual: &[f64]) -> f64 {
        let n = residual.len();
        let mut quad = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.precision[(i, j)] * residual[j];
            }
            quad += residual[i] * row;
        }
        self.log_norm - 0.5 * quad
    }

    pub fn density(&self, residual: &[f64]) -> f64 {
        self.log_density(residual).exp()
    }
}

/// Exact discretization of `dX = A X dt + B dW` over a step `dt`.
///
/// Returns `(e^{A dt}, ∫_0^{dt} e^{As} B Bᵀ e^{Aᵀs} ds)` from one exponential of
/// the block matrix `[[-A, BBᵀ], [0, Aᵀ]] dt`.
pub fn van_loan(a: &DMatrix<f64>, bbt: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-a * dt));
    block.view_mut((0, n), (n, n)).copy_from(&(bbt * dt));
    block.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * dt));
    let e = block.exp();
    let phi = e.view((n, n), (n, n)).transpose();
    let mut q = &phi * e.view((0, n), (n, n));
    symmetrize(&mut q);
    (phi, q)
}

/// `∫_0^t e^{As} ds`, read off the upper-right block of `exp([[A, I], [0, 0]] t)`.
pub fn integrated_exp(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(a * t));
    block
        .view_mut((0, n), (n, n))
        .copy_from(&(DMatrix::<f64>::identity(n, n) * t));
    block.exp().view((0, n), (n, n)).into_owned()
}

pub fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Truncated power series, independent of the Padé route inside `exp`.
    fn series_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        let mut term = DMatrix::<f64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..60 {
            term = &term * m / k as f64;
            sum += &term;
        }
        sum
    }

    #[test]
    fn van_loan_matches_quadrature() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.3, 1.0, -0.5, 0.2]);
        let b = DMatrix::from_row_slice(2, 1, &[0.4, 1.1]);
        let bbt = &b * b.transpose();
        let dt = 0.7;
        let (phi, q) = van_loan(&a, &bbt, dt);
        assert!((&phi - series_exp(&(&a * dt))).abs().max() < 1e-12);

        // Composite Simpson over s in [0, dt].
        let n = 2000;
        let h = dt / n as f64;
        let mut acc = DMatrix::zeros(2, 2);
        for i in 0..=n {
            let s = i as f64 * h;
            let e = series_exp(&(&a * s));
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += (&e * &bbt * e.transpose()) * w;
        }
        acc *= h / 3.0;
        assert!((&q - acc).abs().max() < 1e-10);
    }

    #[test]
    fn integrated_exp_nilpotent() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let m = integrated_exp(&a, 2.0);
        // ∫_0^2 [[1, s], [0, 1]] ds
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 0.0, 2.0]);
        assert!((m - expected).abs().max() < 1e-13);
    }

    #[test]
    fn gaussian_factor_standard_normal() {
        let g = GaussianFactor::new(&DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert!((g.density(&[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!(GaussianFactor::new(&DMatrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn psd_factor_handles_singular() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let l = psd_factor(&cov);
        assert!((&l * l.transpose() - cov).abs().max() < 1e-12);
    }
}
