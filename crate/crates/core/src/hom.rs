//! Two-photon interference at the output beam splitter.
//!
//! Field L enters the splitter in the port that sends it to detector `a` with
//! probability `t`; field R reaches `a` with probability `r = 1 - t`. Two
//! distinguishable photons, one per input, leave through different ports with
//! probability `t^2 + r^2`. For partially indistinguishable photons the
//! quantum amplitudes interfere and that probability drops to
//! `t^2 + r^2 - 2 t r xi cos(dw tau)`, where `tau` is the delay between the two
//! photons and `dw` the frequency difference of the sources. Two photons from
//! the same input split with probability `2 t r`.
//!
//! Only configurations with at most two photons in total are kept: events with
//! two photons in one input and one or more in the other are dropped, which
//! is the same truncation the closed forms below make.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::photon::{sample_photon_number, Field2Distribution};
use crate::types::{InterferenceConfig, Polarization};

/// Upper bound on the visibility set by the two-photon component, `1 / (1 + w)`.
pub fn visibility_from_w(w: f64) -> f64 {
    1.0 / (1.0 + w)
}

/// Visibility with imperfect mode overlap, `xi / (1 + w)`.
pub fn effective_visibility(xi: f64, w: f64) -> f64 {
    xi * visibility_from_w(w)
}

/// Overlap averaged over the delay distribution of two Gaussian wavepackets
/// detuned by `dw`: `xi exp(-dw^2 T_c^2 / 2)`.
pub fn delay_averaged_overlap(cfg: &InterferenceConfig) -> f64 {
    let x = cfg.delta_omega_rad_per_ns * cfg.envelope_width_ns;
    cfg.xi * (-x * x / 2.0).exp()
}

/// Distribution of field L after the polarization-switching loss, which only
/// acts when the two fields are crossed.
pub fn polarization_adjusted(dist_l: &Field2Distribution, cfg: &InterferenceConfig) -> Field2Distribution {
    match cfg.polarization {
        Polarization::Orthogonal if cfg.pol_misalignment_offset > 0.0 => {
            dist_l.attenuated(1.0 - cfg.pol_misalignment_offset)
        }
        _ => *dist_l,
    }
}

/// Probability that one photon from each input leaves through different
/// ports, averaged over the delay.
pub fn one_from_each_split_probability(cfg: &InterferenceConfig) -> f64 {
    let (t, r) = cfg.splitter();
    let distinguishable = t * t + r * r;
    match cfg.polarization {
        Polarization::Orthogonal => distinguishable,
        Polarization::Parallel => distinguishable - 2.0 * t * r * delay_averaged_overlap(cfg),
    }
}

/// Probability that two photons entering the same port are split.
pub fn two_from_one_split_probability(cfg: &InterferenceConfig) -> f64 {
    let (t, r) = cfg.splitter();
    2.0 * t * r
}

/// Joint photon-number distribution of the two inputs, truncated at two
/// photons in total. Marginals and the one-from-each term match the
/// independent product exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDistribution {
    /// Probabilities of (0,0), (1,0), (0,1), (1,1), (2,0), (0,2).
    probs: [f64; 6],
}

impl PairDistribution {
    pub const OUTCOMES: [(u8, u8); 6] = [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2)];

    pub fn new(left: &Field2Distribution, right: &Field2Distribution) -> Result<Self> {
        let one_each = left.p1() * right.p1();
        let probs = [
            (1.0 - left.p1()) * (1.0 - right.p1()) - left.p2() - right.p2(),
            left.p1() * (1.0 - right.p1()),
            right.p1() * (1.0 - left.p1()),
            one_each,
            left.p2(),
            right.p2(),
        ];
        if probs[0] < -1e-15 {
            return Err(Error::invalid(
                "P2",
                "two-photon terms too large for the truncated pair model",
            ));
        }
        let mut probs = probs;
        probs[0] = probs[0].max(0.0);
        Ok(PairDistribution { probs })
    }

    pub fn probability(&self, n_l: u8, n_r: u8) -> f64 {
        Self::OUTCOMES
            .iter()
            .position(|&o| o == (n_l, n_r))
            .map_or(0.0, |i| self.probs[i])
    }

    /// Inverts the cumulative distribution at `u`.
    pub fn sample(&self, u: f64) -> (u8, u8) {
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return Self::OUTCOMES[i];
            }
        }
        // rounding at the top of the interval: fall back to the last
        // outcome with non-zero weight
        let i = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Self::OUTCOMES[i]
    }
}

/// Output-port statistics of one joint readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceProbabilities {
    /// At least one photon in each detector.
    pub both_detectors: f64,
    /// Two photons, both in the same detector.
    pub same_detector: f64,
    /// Contribution of one photon from each input to `both_detectors`.
    pub one_from_each: f64,
    /// Contribution of two photons from L.
    pub two_from_left: f64,
    /// Contribution of two photons from R.
    pub two_from_right: f64,
}

/// Coincidence probabilities for the configured polarization setting.
///
/// ```
/// use condmem::{coincidence_probabilities, conditional_distribution, InterferenceConfig, Polarization};
///
/// let d = conditional_distribution(0.085, 0.17).unwrap();
/// let ideal = InterferenceConfig { xi: 1.0, ..Default::default() };
/// let perp = coincidence_probabilities(&d, &d, &InterferenceConfig { polarization: Polarization::Orthogonal, ..ideal }).unwrap();
/// let par = coincidence_probabilities(&d, &d, &InterferenceConfig { polarization: Polarization::Parallel, ..ideal }).unwrap();
/// let v = (perp.both_detectors - par.both_detectors) / perp.both_detectors;
/// assert!((v - 1.0 / 1.17).abs() < 1e-12);
/// ```
pub fn coincidence_probabilities(
    dist_l: &Field2Distribution,
    dist_r: &Field2Distribution,
    cfg: &InterferenceConfig,
) -> Result<CoincidenceProbabilities> {
    let left = polarization_adjusted(dist_l, cfg);
    let pair = PairDistribution::new(&left, dist_r)?;
    let split_each = one_from_each_split_probability(cfg);
    let split_same = two_from_one_split_probability(cfg);
    let one_from_each = pair.probability(1, 1) * split_each;
    let two_from_left = pair.probability(2, 0) * split_same;
    let two_from_right = pair.probability(0, 2) * split_same;
    let two_photon = pair.probability(1, 1) + pair.probability(2, 0) + pair.probability(0, 2);
    let both_detectors = one_from_each + two_from_left + two_from_right;
    Ok(CoincidenceProbabilities {
        both_detectors,
        same_detector: two_photon - both_detectors,
        one_from_each,
        two_from_left,
        two_from_right,
    })
}

/// Centre-to-side peak ratio of the coincidence histogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossTrialRatio {
    /// Leading-order ratio `(1/2) (1 + w) / (1 + 2 w P1)`.
    pub r: f64,
    /// Same-readout coincidence probability `P1^2 / 2 + P2`.
    pub center: f64,
    /// Coincidence probability between two different readouts `(P1 + 2 P2)^2`.
    pub side: f64,
}

pub fn cross_trial_ratio(p1: f64, w: f64) -> Result<CrossTrialRatio> {
    if !(p1 > 0.0 && p1 <= 1.0) {
        return Err(Error::invalid("P1", "must lie in (0, 1]"));
    }
    if !(w >= 0.0) {
        return Err(Error::invalid("w", "must be >= 0"));
    }
    let p2 = w * p1 * p1 / 2.0;
    Ok(CrossTrialRatio {
        r: 0.5 * (1.0 + w) / (1.0 + 2.0 * w * p1),
        center: p1 * p1 / 2.0 + p2,
        side: (p1 + 2.0 * p2).powi(2),
    })
}

/// Parameters of the delay density `p0 exp(-tau^2/T^2) (1 - V cos(dw tau))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceDensityParams {
    pub p0: f64,
    /// 1/e half-width in ns.
    pub t: f64,
    pub v: f64,
    /// rad/ns
    pub delta_omega: f64,
}

impl CoincidenceDensityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0) {
            return Err(Error::invalid("T", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.v) {
            return Err(Error::invalid("V", "must lie in [0, 1]"));
        }
        if !(self.p0 >= 0.0) {
            return Err(Error::invalid("p0", "must be >= 0"));
        }
        Ok(())
    }
}

pub fn coincidence_density(tau: f64, params: &CoincidenceDensityParams) -> f64 {
    let envelope = params.p0 * (-(tau * tau) / (params.t * params.t)).exp();
    envelope * (1.0 - params.v * (params.delta_omega * tau).cos())
}

/// Which photons produced a detection pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Single,
    /// One photon per input, leaving through different ports.
    OneFromEachSplit,
    /// One photon per input, leaving through the same port.
    OneFromEachBunched,
    /// Two photons from one input.
    TwoFromOne,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampledTimes {
    Single(f64),
    /// Times of the two photons; for split origins the first goes to `a`.
    Pair(f64, f64),
}

pub const REJECTION_BUDGET: u32 = 10_000;

fn wavepacket_time<R: Rng + ?Sized>(cfg: &InterferenceConfig, rng: &mut R) -> f64 {
    // density exp(-t^2 / T_c^2) has standard deviation T_c / sqrt(2)
    let z: f64 = rng.sample(StandardNormal);
    z * cfg.envelope_width_ns * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws detection times (continuous, before quantization) for a routing
/// that has already been decided.
///
/// Independent Gaussian wavepacket times are drawn; for one-from-each origins
/// with parallel polarization the delay `tau` is then accepted with weight
/// proportional to the conditional port probability, so that split pairs
/// follow `exp(-tau^2/(2 T_c^2)) (t^2 + r^2 - 2 t r xi cos(dw tau))`.
pub fn sample_detection_times<R: Rng + ?Sized>(
    origin: Origin,
    cfg: &InterferenceConfig,
    rng: &mut R,
) -> Result<SampledTimes> {
    let (t, r) = cfg.splitter();
    let modulation: Option<(f64, f64)> = match (origin, cfg.polarization) {
        (Origin::Single, _) => return Ok(SampledTimes::Single(wavepacket_time(cfg, rng))),
        (Origin::TwoFromOne, _) | (_, Polarization::Orthogonal) => None,
        (Origin::OneFromEachSplit, Polarization::Parallel) => Some((t * t + r * r, -2.0 * t * r * cfg.xi)),
        (Origin::OneFromEachBunched, Polarization::Parallel) => Some((1.0, cfg.xi)),
    };
    let Some((base, amp)) = modulation.filter(|_| cfg.delta_omega_rad_per_ns != 0.0 && cfg.xi > 0.0)
    else {
        return Ok(SampledTimes::Pair(wavepacket_time(cfg, rng), wavepacket_time(cfg, rng)));
    };
    let ceiling = base + amp.abs();
    for _ in 0..REJECTION_BUDGET {
        let t1 = wavepacket_time(cfg, rng);
        let t2 = wavepacket_time(cfg, rng);
        let weight = base + amp * (cfg.delta_omega_rad_per_ns * (t1 - t2)).cos();
        if rng.random::<f64>() * ceiling < weight {
            return Ok(SampledTimes::Pair(t1, t2));
        }
    }
    Err(Error::RejectionBudgetExceeded {
        rounds: REJECTION_BUDGET,
    })
}

/// Photon numbers for a joint readout, drawn from the truncated pair model.
pub fn sample_pair(pair: &PairDistribution, u: f64) -> (u8, u8) {
    pair.sample(u)
}

/// Photon number for a single-ensemble readout.
pub fn sample_single(dist: &Field2Distribution, u: f64) -> u8 {
    sample_photon_number(dist, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon::conditional_distribution;
    use proptest::prelude::*;

    fn cfg(pol: Polarization, xi: f64, t: f64) -> InterferenceConfig {
        InterferenceConfig {
            xi,
            polarization: pol,
            splitter_ratio: t,
            ..Default::default()
        }
    }

    #[test]
    fn visibility_examples() {
        assert!((visibility_from_w(0.17) - 0.8547008547008548).abs() < 1e-12);
        assert_eq!(visibility_from_w(0.0), 1.0);
        assert_eq!(visibility_from_w(1.0), 0.5);
        assert!((effective_visibility(0.90, 0.17) - 0.7692307692307693).abs() < 1e-12);
        assert_eq!(effective_visibility(1.0, 0.17), visibility_from_w(0.17));
        assert_eq!(effective_visibility(0.0, 0.4), 0.0);
    }

    #[test]
    fn symmetric_balanced_coincidences() {
        let (p1, w) = (0.085, 0.17);
        let d = conditional_distribution(p1, w).unwrap();
        let perp = coincidence_probabilities(&d, &d, &cfg(Polarization::Orthogonal, 1.0, 0.5)).unwrap();
        let par = coincidence_probabilities(&d, &d, &cfg(Polarization::Parallel, 1.0, 0.5)).unwrap();
        assert!((perp.both_detectors - (w * p1 * p1 / 2.0 + p1 * p1 / 2.0)).abs() < 1e-16);
        assert!((par.both_detectors - w * p1 * p1 / 2.0).abs() < 1e-16);
        let v = (perp.both_detectors - par.both_detectors) / perp.both_detectors;
        assert!((v - visibility_from_w(w)).abs() < 1e-12);
    }

    #[test]
    fn perfect_single_photons_never_coincide() {
        let d = conditional_distribution(0.3, 0.0).unwrap();
        let par = coincidence_probabilities(&d, &d, &cfg(Polarization::Parallel, 1.0, 0.5)).unwrap();
        assert_eq!(par.both_detectors, 0.0);
    }

    #[test]
    fn imbalanced_splitter_factors() {
        let c = cfg(Polarization::Orthogonal, 0.9, 0.51);
        assert!((two_from_one_split_probability(&c) - 0.4998).abs() < 1e-15);
        assert!((one_from_each_split_probability(&c) - 0.5002).abs() < 1e-15);
        let balanced = cfg(Polarization::Orthogonal, 0.9, 0.5);
        assert_eq!(two_from_one_split_probability(&balanced), 0.5);
    }

    #[test]
    fn cross_ratio_examples() {
        let c = cross_trial_ratio(0.085, 0.17).unwrap();
        assert!((c.r - 0.5686).abs() < 5e-5, "{}", c.r);
        assert!((cross_trial_ratio(0.3, 0.0).unwrap().r - 0.5).abs() < 1e-15);
        assert!((c.center - (0.085f64.powi(2) / 2.0 + 0.17 * 0.085f64.powi(2) / 2.0)).abs() < 1e-16);
        assert!(cross_trial_ratio(0.0, 0.1).is_err());
    }

    #[test]
    fn density_examples() {
        let p = CoincidenceDensityParams {
            p0: 1.0,
            t: 18.4,
            v: 0.80,
            delta_omega: 2.0 * std::f64::consts::PI * 0.004,
        };
        assert!((coincidence_density(0.0, &p) - 0.2).abs() < 1e-12);
        let flat = CoincidenceDensityParams { v: 0.0, ..p };
        assert_eq!(coincidence_density(0.0, &flat), 1.0);
        assert!((coincidence_density(18.4, &flat) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn pair_model_marginals() {
        let l = conditional_distribution(0.07, 0.2).unwrap();
        let r = conditional_distribution(0.09, 0.1).unwrap();
        let pair = PairDistribution::new(&l, &r).unwrap();
        let total: f64 = PairDistribution::OUTCOMES.iter().map(|&(a, b)| pair.probability(a, b)).sum();
        assert!((total - 1.0).abs() < 1e-15);
        let p1l = pair.probability(1, 0) + pair.probability(1, 1);
        assert!((p1l - l.p1()).abs() < 1e-16);
        assert_eq!(pair.probability(2, 0), l.p2());
        assert_eq!(pair.probability(2, 1), 0.0);
    }

    proptest! {
        #[test]
        fn parallel_never_exceeds_orthogonal(
            p1 in 0.001f64..0.3, w in 0.0f64..1.0, xi in 0.0f64..=1.0, t in 0.05f64..0.95,
            dw in -0.1f64..0.1,
        ) {
            let d = conditional_distribution(p1, w).unwrap();
            let base = InterferenceConfig { xi, splitter_ratio: t, delta_omega_rad_per_ns: dw, ..Default::default() };
            let perp = coincidence_probabilities(&d, &d, &InterferenceConfig { polarization: Polarization::Orthogonal, ..base }).unwrap();
            let par = coincidence_probabilities(&d, &d, &InterferenceConfig { polarization: Polarization::Parallel, ..base }).unwrap();
            prop_assert!(par.both_detectors <= perp.both_detectors);
            if xi == 0.0 {
                prop_assert_eq!(par.both_detectors, perp.both_detectors);
            } else {
                prop_assert!(par.both_detectors < perp.both_detectors);
            }
        }

        #[test]
        fn balanced_visibility_matches_closed_form(p1 in 0.001f64..0.3, w in 0.0f64..1.0, xi in 0.0f64..=1.0) {
            let d = conditional_distribution(p1, w).unwrap();
            let base = InterferenceConfig { xi, ..Default::default() };
            let perp = coincidence_probabilities(&d, &d, &InterferenceConfig { polarization: Polarization::Orthogonal, ..base }).unwrap();
            let par = coincidence_probabilities(&d, &d, &InterferenceConfig { polarization: Polarization::Parallel, ..base }).unwrap();
            let v = (perp.both_detectors - par.both_detectors) / perp.both_detectors;
            prop_assert!((v - effective_visibility(xi, w)).abs() < 1e-12);
        }
    }
}
