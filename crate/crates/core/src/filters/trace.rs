use std::io::Write;

use crate::error::{Error, Result};
use crate::filters::{KalmanState, ParticleState};

/// One row of a filter trace. `ess` is absent for Kalman runs.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub mean: Vec<f64>,
    /// Row-major covariance.
    pub covariance: Vec<f64>,
    pub ess: Option<f64>,
}

impl From<&KalmanState> for TraceRow {
    fn from(s: &KalmanState) -> Self {
        Self {
            t: s.t,
            mean: s.mean.iter().copied().collect(),
            covariance: s.covariance.transpose().iter().copied().collect(),
            ess: None,
        }
    }
}

impl From<&ParticleState> for TraceRow {
    fn from(s: &ParticleState) -> Self {
        Self {
            t: s.t,
            mean: s.measure.mean(),
            covariance: s.measure.covariance().transpose().iter().copied().collect(),
            ess: Some(s.ess),
        }
    }
}

/// Writes `t,mean_0..,cov_00..,ess`.
pub fn write_trace_csv<W: Write>(w: W, rows: &[TraceRow]) -> Result<()> {
    let d = rows.first().map_or(0, |r| r.mean.len());
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|i| format!("mean_{i}")));
    for i in 0..d {
        header.extend((0..d).map(|j| format!("cov_{i}{j}")));
    }
    header.push("ess".into());
    out.write_record(&header)?;
    for r in rows {
        if r.mean.len() != d || r.covariance.len() != d * d {
            return Err(Error::DimensionMismatch("trace rows have mixed dimensions".into()));
        }
        let mut rec = vec![r.t.to_string()];
        rec.extend(r.mean.iter().chain(&r.covariance).map(f64::to_string));
        rec.push(r.ess.map_or(String::new(), |e| e.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_blank_ess() {
        let rows = [TraceRow { t: 0.5, mean: vec![1.0, 2.0], covariance: vec![1.0, 0.1, 0.1, 2.0], ess: None }];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &rows).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "t,mean_0,mean_1,cov_00,cov_01,cov_10,cov_11,ess\n0.5,1,2,1,0.1,0.1,2,\n");
    }
}
