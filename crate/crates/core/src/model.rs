//! Expected values of the full simulated model: asymmetric herald rates,
//! per-ensemble decay, two-photon terms, splitter imbalance and polarization
//! loss. These reduce to the closed forms in [`crate::control`] for identical
//! ensembles with `w = 0`, a balanced splitter and no loss.

use crate::config::RunConfig;
use crate::error::Result;
use crate::hom::{coincidence_probabilities, CoincidenceProbabilities};
use crate::photon::{conditional_distribution, retrieval_decay, Field2Distribution};
use crate::types::{Ensemble, InterferenceConfig};

fn field(cfg: &RunConfig, ensemble: Ensemble, age: u32) -> Result<Field2Distribution> {
    let p = match ensemble {
        Ensemble::L => &cfg.ensemble_l,
        Ensemble::R => &cfg.ensemble_r,
    };
    conditional_distribution(retrieval_decay(p.pc, age as f64, p.nc), p.w)
}

/// Port statistics of a joint readout after storage times `age_l`, `age_r`.
pub fn readout_coincidence(cfg: &RunConfig, age_l: u32, age_r: u32) -> Result<CoincidenceProbabilities> {
    coincidence_probabilities(
        &field(cfg, Ensemble::L, age_l)?,
        &field(cfg, Ensemble::R, age_r)?,
        &cfg.interference,
    )
}

/// Probability per armed trial that the preparation completes with the heralds
/// exactly `k` trials apart, split by which ensemble heralded first:
/// `(L first, R first)`. For `k = 0` both entries hold half of the
/// same-trial probability.
pub fn separation_weights(cfg: &RunConfig, k: u32) -> (f64, f64) {
    let (pl, pr) = (cfg.ensemble_l.p1, cfg.ensemble_r.p1);
    if k == 0 {
        let both = pl * pr;
        return (both / 2.0, both / 2.0);
    }
    (
        pl * pr * (1.0 - pr).powi(k as i32),
        pl * pr * (1.0 - pl).powi(k as i32),
    )
}

/// Ready probability per armed trial for separations below `n`.
pub fn p11_model(cfg: &RunConfig, n: u32) -> f64 {
    (0..n.min(cfg.control.n_max))
        .map(|k| {
            let (a, b) = separation_weights(cfg, k);
            a + b
        })
        .sum()
}

/// Joint detection probability per armed trial for separations below `n`.
pub fn p1122_model(cfg: &RunConfig, n: u32) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..n.min(cfg.control.n_max) {
        let (a, b) = separation_weights(cfg, k);
        total += a * readout_coincidence(cfg, k, 0)?.both_detectors;
        total += b * readout_coincidence(cfg, 0, k)?.both_detectors;
    }
    Ok(total)
}

/// Expected `p22c` and per-detector `p2c` at separation `k`, averaged over
/// the two herald orders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayPoint {
    pub p22c: f64,
    pub p2c_a: f64,
    pub p2c_b: f64,
}

pub fn decay_point(cfg: &RunConfig, k: u32) -> Result<DecayPoint> {
    let (a, b) = separation_weights(cfg, k);
    let ic: &InterferenceConfig = &cfg.interference;
    let (t, r) = ic.splitter();
    let mut out = DecayPoint {
        p22c: 0.0,
        p2c_a: 0.0,
        p2c_b: 0.0,
    };
    let total = a + b;
    if total == 0.0 {
        return Ok(out);
    }
    for (weight, age_l, age_r) in [(a, k, 0), (b, 0, k)] {
        let l = crate::hom::polarization_adjusted(&field(cfg, Ensemble::L, age_l)?, ic);
        let rr = field(cfg, Ensemble::R, age_r)?;
        let both = readout_coincidence(cfg, age_l, age_r)?.both_detectors;
        let w = weight / total;
        out.p22c += w * both;
        out.p2c_a += w * (t * l.mean() + r * rr.mean() - both);
        out.p2c_b += w * (r * l.mean() + t * rr.mean() - both);
    }
    Ok(out)
}
