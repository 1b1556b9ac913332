use crate::diagnostics::Check;
use crate::error::{Error, Result};
use crate::filters::finite_hmm_forward;
use crate::harness::config::{ExperimentConfig, ModelSpec};
use crate::harness::output::{csv_table, ExperimentOutput};
use crate::models::{check_row, FiniteHMM};

/// Largest total horizon the enumeration accepts.
pub const MAX_HORIZON: usize = 8;

/// `P(Y_1..Y_n = w)` for every word `w` (base-`o`, first symbol most
/// significant) by summing over every state path.
pub fn enumerate_joint(model: &FiniteHMM, prior: &[f64], n: usize) -> Vec<f64> {
    let o = model.symbols();
    let mut joint = vec![0.0; o.pow(n as u32)];
    fn visit(m: &FiniteHMM, level: usize, n: usize, state: usize, p: f64, word: usize, joint: &mut [f64]) {
        if level == n {
            joint[word] += p;
            return;
        }
        for j in 0..m.states() {
            let pj = p * m.transition[(state, j)];
            if pj == 0.0 {
                continue;
            }
            for y in 0..m.symbols() {
                visit(m, level + 1, n, j, pj * m.emission[(j, y)], word * m.symbols() + y, joint);
            }
        }
    }
    for (x0, &p) in prior.iter().enumerate() {
        if p > 0.0 {
            visit(model, 0, n, x0, p, 0, &mut joint);
        }
    }
    joint
}

/// Marginal over the last `drop` symbols.
fn marginal(joint: &[f64], o: usize, drop: usize) -> Vec<f64> {
    let block = o.pow(drop as u32);
    joint.chunks(block).map(|c| c.iter().sum()).collect()
}

/// Largest gap between `P(next k' symbols = z | first t symbols = y)` by
/// enumeration and the same probability computed from the filter restarted at
/// time `t`, over all `t ≤ t_max`, `k' ≤ k`, prefixes of positive probability
/// and indicator functionals `z`.
pub fn run_lemma42_check(model: &FiniteHMM, prior: &[f64], t_max: usize, k: usize) -> Result<f64> {
    Ok(lemma42_table(model, prior, t_max, k)?.into_iter().map(|(_, _, d)| d).fold(0.0, f64::max))
}

/// The same discrepancy split by `(t, k')`.
pub fn lemma42_table(model: &FiniteHMM, prior: &[f64], t_max: usize, k: usize) -> Result<Vec<(usize, usize, f64)>> {
    check_row(prior, "prior")?;
    if model.states() > 3 || model.symbols() > 3 || t_max + k > MAX_HORIZON {
        return Err(Error::Config(format!(
            "enumeration needs at most 3 states, 3 symbols and t_max + k <= {MAX_HORIZON}"
        )));
    }
    let o = model.symbols();
    let total = t_max + k;
    let full = enumerate_joint(model, prior, total);
    let mut table: Vec<(usize, usize, f64)> = (0..=t_max).flat_map(|t| (0..=k).map(move |kk| (t, kk, 0.0))).collect();
    for t in 0..=t_max {
        let prefix = marginal(&full, o, total - t);
        for (y, &py) in prefix.iter().enumerate() {
            if py <= 0.0 {
                continue;
            }
            let word: Vec<usize> = (0..t).map(|i| (y / o.pow((t - 1 - i) as u32)) % o).collect();
            let filter = finite_hmm_forward(model, prior, &word)?;
            let restart = filter.last().expect("forward output is non-empty");
            for kk in 0..=k {
                let joint = marginal(&full, o, total - t - kk);
                let future = enumerate_joint(model, restart, kk);
                for (z, &pz) in future.iter().enumerate() {
                    let lhs = joint[y * o.pow(kk as u32) + z] / py;
                    let cell = &mut table[t * (k + 1) + kk].2;
                    *cell = cell.max((lhs - pz).abs());
                }
            }
        }
    }
    Ok(table)
}

pub fn lemma42_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let ModelSpec::FiniteHmm(spec) = cfg.model_spec()? else {
        return Err(Error::Config("lemma42 runs need a finite_hmm model".into()));
    };
    let model = spec.build()?;
    let prior = cfg.require(&cfg.prior_mu, "prior_mu")?.row()?;
    let l = cfg.require(&cfg.lemma42, "lemma42")?;
    let table = lemma42_table(&model, &prior, l.t_max, l.k)?;
    let worst = table.iter().map(|r| r.2).fold(0.0, f64::max);
    let rows: Vec<Vec<String>> = table.iter().map(|(t, k, d)| vec![t.to_string(), k.to_string(), d.to_string()]).collect();
    let mut out = ExperimentOutput::default();
    out.files.push(("discrepancy.csv".into(), csv_table(&["t", "k", "max_discrepancy"], &rows)?));
    let bound = cfg.thresholds.max_discrepancy.unwrap_or(1e-12);
    out.checks.push(Check::new("lemma42_discrepancy", worst, bound, worst <= bound));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn hmm() -> FiniteHMM {
        FiniteHMM::new(
            DMatrix::from_row_slice(2, 2, &[0.85, 0.15, 0.3, 0.7]),
            DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.2, 0.8]),
        )
        .unwrap()
    }

    #[test]
    fn joint_is_a_distribution() {
        for n in 0..5 {
            let j = enumerate_joint(&hmm(), &[0.4, 0.6], n);
            assert!((j.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn time_zero_and_constant_functional() {
        // t = 0: the restart is the prior itself; k = 0: the functional is 1.
        assert!(run_lemma42_check(&hmm(), &[0.4, 0.6], 0, 3).unwrap() < 1e-15);
        assert!(run_lemma42_check(&hmm(), &[0.4, 0.6], 5, 0).unwrap() < 1e-15);
    }

    #[test]
    fn identity_holds() {
        assert!(run_lemma42_check(&hmm(), &[0.4, 0.6], 3, 2).unwrap() <= 1e-12);
    }

    #[test]
    fn rejects_large_problems() {
        assert!(run_lemma42_check(&hmm(), &[0.4, 0.6], 6, 3).is_err());
    }
}
