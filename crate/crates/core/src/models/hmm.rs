use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Finite-state chain with finitely many observation symbols.
///
/// `X_0` is drawn from the prior; for `n ≥ 1`, `X_n` follows the transition
/// matrix and emits `Y_n` from row `X_n` of the emission matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteHMM {
    pub transition: DMatrix<f64>,
    pub emission: DMatrix<f64>,
}

pub(crate) fn check_stochastic(m: &DMatrix<f64>, name: &str) -> Result<()> {
    for (i, row) in m.row_iter().enumerate() {
        if row.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidModel(format!("{name} row {i} has a negative entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("{name} row {i} sums to {s}")));
        }
    }
    Ok(())
}

pub(crate) fn check_row(p: &[f64], name: &str) -> Result<()> {
    if p.iter().any(|v| !(*v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidModel(format!("{name} is not a probability row")));
    }
    Ok(())
}

impl FiniteHMM {
    pub fn new(transition: DMatrix<f64>, emission: DMatrix<f64>) -> Result<Self> {
        if !transition.is_square() || emission.nrows() != transition.nrows() {
            return Err(Error::DimensionMismatch("transition must be s x s and emission s x o".into()));
        }
        check_stochastic(&transition, "transition")?;
        check_stochastic(&emission, "emission")?;
        Ok(Self { transition, emission })
    }

    pub fn states(&self) -> usize {
        self.transition.nrows()
    }

    pub fn symbols(&self) -> usize {
        self.emission.ncols()
    }

    /// Draws `(X_0..X_n, Y_1..Y_n)`.
    pub fn sample(&self, prior: &[f64], n: usize, rng: &mut RngStream) -> Result<(Vec<usize>, Vec<usize>)> {
        check_row(prior, "prior")?;
        let draw = |p: &mut dyn Iterator<Item = f64>, rng: &mut RngStream| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut last = 0;
            for (i, w) in p.enumerate() {
                acc += w;
                last = i;
                if u < acc {
                    return i;
                }
            }
            last
        };
        let mut x = draw(&mut prior.iter().copied(), rng);
        let mut states = vec![x];
        let mut obs = Vec::with_capacity(n);
        for _ in 0..n {
            x = draw(&mut self.transition.row(x).iter().copied(), rng);
            obs.push(draw(&mut self.emission.row(x).iter().copied(), rng));
            states.push(x);
        }
        Ok((states, obs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_stochastic() {
        let t = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.2, 0.7]);
        let e = DMatrix::identity(2, 2);
        assert!(FiniteHMM::new(t, e).is_err());
    }
}
