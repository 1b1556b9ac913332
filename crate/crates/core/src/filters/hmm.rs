use crate::error::{Error, Result};
use crate::models::{check_row, FiniteHMM};

/// Forward recursion. Row 0 is the prior; row `n` is `P(X_n = · | Y_1..Y_n)`.
pub fn finite_hmm_forward(model: &FiniteHMM, prior: &[f64], observations: &[usize]) -> Result<Vec<Vec<f64>>> {
    check_row(prior, "prior")?;
    if prior.len() != model.states() {
        return Err(Error::DimensionMismatch("prior length differs from the state count".into()));
    }
    let s = model.states();
    let mut rows = vec![prior.to_vec()];
    for (n, &y) in observations.iter().enumerate() {
        if y >= model.symbols() {
            return Err(Error::DimensionMismatch(format!("symbol {y} out of range")));
        }
        let last = rows.last().expect("rows start non-empty");
        let mut next: Vec<f64> = (0..s)
            .map(|j| (0..s).map(|i| last[i] * model.transition[(i, j)]).sum::<f64>() * model.emission[(j, y)])
            .collect();
        let z: f64 = next.iter().sum();
        if z <= 0.0 {
            return Err(Error::ZeroLikelihood { step: n + 1 });
        }
        next.iter_mut().for_each(|v| *v /= z);
        rows.push(next);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn chain(emission: DMatrix<f64>) -> FiniteHMM {
        FiniteHMM::new(DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.25, 0.75]), emission).unwrap()
    }

    #[test]
    fn uniform_emission_propagates_only() {
        let m = chain(DMatrix::from_element(2, 3, 1.0 / 3.0));
        let rows = finite_hmm_forward(&m, &[0.4, 0.6], &[0, 2, 1]).unwrap();
        let mut p = [0.4, 0.6];
        for row in &rows[1..] {
            p = [p[0] * 0.9 + p[1] * 0.25, p[0] * 0.1 + p[1] * 0.75];
            assert!((row[0] - p[0]).abs() < 1e-15 && (row[1] - p[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn revealing_emission() {
        let m = chain(DMatrix::identity(2, 2));
        let rows = finite_hmm_forward(&m, &[0.5, 0.5], &[1, 1, 0]).unwrap();
        assert_eq!(rows[1], vec![0.0, 1.0]);
        assert_eq!(rows[3], vec![1.0, 0.0]);
    }

    #[test]
    fn matches_path_enumeration() {
        let m = chain(DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.35, 0.65]));
        let prior = [0.3, 0.7];
        let obs = [1, 0, 0, 1, 1];
        let rows = finite_hmm_forward(&m, &prior, &obs).unwrap();
        for n in 1..=obs.len() {
            // Joint P(X_n = i, Y_1..Y_n) by summing over all 2^{n+1} state paths.
            let mut joint = [0.0; 2];
            for code in 0..(1usize << (n + 1)) {
                let xs: Vec<usize> = (0..=n).map(|k| (code >> k) & 1).collect();
                let mut p = prior[xs[0]];
                for k in 1..=n {
                    p *= m.transition[(xs[k - 1], xs[k])] * m.emission[(xs[k], obs[k - 1])];
                }
                joint[xs[n]] += p;
            }
            let z = joint[0] + joint[1];
            assert!((rows[n][0] - joint[0] / z).abs() < 1e-12);
            assert!((rows[n][1] - joint[1] / z).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_likelihood() {
        let m = chain(DMatrix::identity(2, 2));
        let t = FiniteHMM::new(DMatrix::identity(2, 2), m.emission.clone()).unwrap();
        assert!(matches!(
            finite_hmm_forward(&t, &[1.0, 0.0], &[0, 1]),
            Err(Error::ZeroLikelihood { step: 2 })
        ));
    }
}
