use rand::Rng;

use crate::error::{Error, Result};
use crate::models::{eta_flow_nodes, DiffusionModel};
use crate::rng::RngStream;

/// Subintervals of the composite Simpson rule for `H_ε`.
pub const SIMPSON_PANELS: usize = 64;
const RK4_SUBSTEPS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichConstants {
    pub epsilon: f64,
    pub lower: f64,
    pub upper: f64,
    /// Window length below which `lower > 0`; infinite for a driftless signal.
    pub epsilon0: f64,
}

fn lower_constant(lip_ch0: f64, lip_b: f64, norm_cinv: f64, eps: f64) -> f64 {
    let g = (lip_b * eps).exp();
    (1.0 - lip_ch0 * g - lip_b * eps * g / 2.0) / norm_cinv
}

/// Constants `m(ε)`, `M(ε)` for the windowed observation average and the
/// threshold `ε₀` where `m` vanishes (bisection to relative precision 1e-8).
pub fn lemma51_constants(lip_ch0: f64, lip_b: f64, norm_cinv: f64, lip_h: f64, eps: f64) -> Result<SandwichConstants> {
    if !(lip_ch0 < 1.0) || lip_ch0 < 0.0 {
        return Err(Error::InvalidModel(format!("Lipschitz constant of C^-1 h0 is {lip_ch0}, must be < 1")));
    }
    if !(norm_cinv > 0.0) || !(lip_b >= 0.0) || !(lip_h >= 0.0) || !(eps >= 0.0) {
        return Err(Error::InvalidModel("sandwich constants need nonnegative inputs".into()));
    }
    let epsilon0 = if lip_b == 0.0 {
        f64::INFINITY
    } else {
        let f = |e: f64| lower_constant(lip_ch0, lip_b, norm_cinv, e);
        let (mut lo, mut hi) = (0.0, 1.0);
        while f(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > 1e-8 * hi {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    Ok(SandwichConstants {
        epsilon: eps,
        lower: lower_constant(lip_ch0, lip_b, norm_cinv, eps),
        upper: lip_h * (lip_b * eps).exp(),
        epsilon0,
    })
}

/// Constants implied by the model's declared Lipschitz data.
pub fn model_constants(model: &DiffusionModel, eps: f64) -> Result<SandwichConstants> {
    model.validate()?;
    lemma51_constants(
        model.lip_cinv_h0,
        model.lip_drift,
        model.norm_c_inverse(),
        model.lip_observation(),
        eps,
    )
}

/// `H_ε(x) = (1/ε)∫_0^ε h(η_s(x)) ds` by composite Simpson.
pub fn windowed_observation(model: &DiffusionModel, x: &[f64], eps: f64) -> Vec<f64> {
    let nodes = eta_flow_nodes(model.drift.as_ref(), x, eps, SIMPSON_PANELS, RK4_SUBSTEPS);
    let q = model.dim;
    let mut acc = vec![0.0; q];
    let mut h = vec![0.0; q];
    for (i, y) in nodes.iter().enumerate() {
        let w = if i == 0 || i == SIMPSON_PANELS {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        model.observation(y, &mut h);
        for (a, v) in acc.iter_mut().zip(&h) {
            *a += w * v;
        }
    }
    acc.iter().map(|a| a / (3.0 * SIMPSON_PANELS as f64)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SandwichReport {
    pub constants: SandwichConstants,
    pub pairs: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Checks `m‖x−y‖ ≤ ‖H_ε(x) − H_ε(y)‖ ≤ M‖x−y‖` on `pairs` random pairs drawn
/// uniformly from the box `[-radius, radius]^q`.
pub fn verify_sandwich(
    model: &DiffusionModel,
    eps: f64,
    pairs: usize,
    radius: f64,
    rng: &mut RngStream,
) -> Result<SandwichReport> {
    let constants = model_constants(model, eps)?;
    if !(eps > 0.0 && eps < constants.epsilon0) {
        return Err(Error::InvalidModel(format!(
            "window {eps} must lie in (0, {})",
            constants.epsilon0
        )));
    }
    let q = model.dim;
    let (mut min_ratio, mut max_ratio) = (f64::INFINITY, 0.0f64);
    for _ in 0..pairs {
        let x: Vec<f64> = (0..q).map(|_| rng.random_range(-radius..radius)).collect();
        let y: Vec<f64> = (0..q).map(|_| rng.random_range(-radius..radius)).collect();
        let dist = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if dist == 0.0 {
            continue;
        }
        let (hx, hy) = (windowed_observation(model, &x, eps), windowed_observation(model, &y, eps));
        let ratio = hx.iter().zip(&hy).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / dist;
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        // Relative slack covers the quadrature error only.
        if ratio < constants.lower * (1.0 - 1e-9) || ratio > constants.upper * (1.0 + 1e-9) {
            return Err(Error::SandwichViolated {
                x,
                y,
                ratio,
                lower: constants.lower,
                upper: constants.upper,
            });
        }
    }
    Ok(SandwichReport { constants, pairs, min_ratio, max_ratio })
}
