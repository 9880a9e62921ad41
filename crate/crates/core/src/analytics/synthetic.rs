//! Poisson-noisy coincidence histograms drawn from the delay density, and the
//! replica study of how well the fits recover the injected parameters.

use rand_distr::{Distribution, Poisson};

use crate::analytics::fit::{fit_gaussian_counts, fit_modulated_gaussian, rad_per_ns_to_mhz, FitData};
use crate::error::{Error, Result};
use crate::hom::{coincidence_density, CoincidenceDensityParams};
use crate::rng::{seed_stream, Stream, TrialRng};

/// Delays of the 2 ns bins covering +-44 ns.
pub fn delay_grid() -> Vec<f64> {
    (-22..=22).map(|i| 2.0 * i as f64).collect()
}

/// Expected counts per bin of `x` for the density `params`, scaled so that
/// they sum to `total`. Returns the counts and the applied scale.
pub fn expected_counts(x: &[f64], params: &CoincidenceDensityParams, total: f64) -> Result<(Vec<f64>, f64)> {
    params.validate()?;
    let shape: Vec<f64> = x.iter().map(|&t| coincidence_density(t, params)).collect();
    let sum: f64 = shape.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::DivisionByZero("density vanishes on the grid"));
    }
    let k = total / sum;
    Ok((shape.into_iter().map(|s| s * k).collect(), k))
}

/// One Poisson draw per bin.
pub fn poisson_counts(expected: &[f64], rng: &mut TrialRng) -> Vec<f64> {
    expected
        .iter()
        .map(|&m| if m > 0.0 { Poisson::new(m).map(|p| p.sample(rng)).unwrap_or(0.0) } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryStudy {
    pub replicas: usize,
    /// Replicas whose fit returned an error.
    pub failures: usize,
    pub mean_v: f64,
    pub rms_v: f64,
    pub mean_dw_mhz: f64,
    /// Root mean square of `dw / 2 pi - injected`, MHz.
    pub rms_dw_mhz: f64,
}

/// Draws `replicas` pairs of histograms, one with crossed polarizations
/// (`V = 0`) and one with parallel polarizations, each holding about
/// `counts` coincidences. The envelope is fitted on the crossed histogram
/// and then held fixed while `(V, dw)` are fitted on the parallel one.
pub fn fit_recovery_study(
    truth: &CoincidenceDensityParams,
    counts: f64,
    replicas: usize,
    seed: u64,
) -> Result<RecoveryStudy> {
    let x = delay_grid();
    let crossed = CoincidenceDensityParams { v: 0.0, ..*truth };
    let (perp, k_perp) = expected_counts(&x, &crossed, counts)?;
    let (par, k_par) = expected_counts(&x, truth, counts)?;
    let relative = k_perp / k_par;
    let (mut sv, mut sv2, mut sf, mut sf2, mut n, mut failures) = (0.0, 0.0, 0.0, 0.0, 0usize, 0usize);
    let f_true = rad_per_ns_to_mhz(truth.delta_omega);
    for replica in 0..replicas {
        let mut rng = seed_stream(seed, Stream::Synthetic, replica as u64);
        let cp = poisson_counts(&perp, &mut rng);
        let cq = poisson_counts(&par, &mut rng);
        let fitted = fit_gaussian_counts(x.clone(), &cp, 1.0).and_then(|g| {
            let data = FitData::from_counts(x.clone(), &cq, relative)?;
            fit_modulated_gaussian(&data, Some((g.values[0], g.values[1])))
        });
        match fitted {
            Ok(r) => {
                let (dv, df) = (r.values[2] - truth.v, rad_per_ns_to_mhz(r.values[3]) - f_true);
                sv += dv;
                sv2 += dv * dv;
                sf += df;
                sf2 += df * df;
                n += 1;
            }
            Err(_) => failures += 1,
        }
    }
    if n == 0 {
        return Err(Error::DivisionByZero("no replica could be fitted"));
    }
    let m = n as f64;
    Ok(RecoveryStudy {
        replicas,
        failures,
        mean_v: truth.v + sv / m,
        rms_v: (sv2 / m).sqrt(),
        mean_dw_mhz: f_true + sf / m,
        rms_dw_mhz: (sf2 / m).sqrt(),
    })
}
