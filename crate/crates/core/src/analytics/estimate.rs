use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eventlog::EventLog;
use crate::types::{Detection, Detector, EventKind, Polarization, TimeWindow, TrialRecord};

use super::histogram::{Histogram, Normalization};

/// A counted probability with its `sqrt(C)` error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub count: u64,
    pub denominator: f64,
}

impl Estimate {
    pub fn from_count(count: u64, denominator: f64) -> Self {
        if denominator <= 0.0 {
            return Estimate {
                value: 0.0,
                error: 0.0,
                count,
                denominator,
            };
        }
        Estimate {
            value: count as f64 / denominator,
            error: (count as f64).sqrt() / denominator,
            count,
            denominator,
        }
    }

    /// Distance from `target` in units of the error.
    pub fn pull(&self, target: f64) -> f64 {
        if self.error > 0.0 {
            (self.value - target) / self.error
        } else if self.value == target {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// What a per-trial probability is divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialNormalization {
    /// Trials that began with both ensembles idle. Trials spent holding an
    /// excitation cannot start a new preparation, so this is the
    /// normalization that matches the closed forms.
    Armed,
    /// Every trial of the run.
    All,
}

fn trials(log: &EventLog, norm: TrialNormalization) -> Result<f64> {
    if log.n_trials() == 0 {
        return Err(Error::EmptyLog);
    }
    Ok(match norm {
        TrialNormalization::All => log.n_trials() as f64,
        TrialNormalization::Armed => log.summary().armed_trials() as f64,
    })
}

fn within(record: &TrialRecord, n: u32) -> bool {
    record.separation().is_some_and(|s| s < n)
}

fn in_window(d: &Detection, window: TimeWindow) -> bool {
    window.contains(d.time_ns)
}

/// At least one click in each detector inside `window`.
pub fn is_coincidence(record: &TrialRecord, window: TimeWindow) -> bool {
    let mut a = false;
    let mut b = false;
    for d in record.detections.iter().filter(|d| in_window(d, window)) {
        match d.detector {
            Detector::A => a = true,
            Detector::B => b = true,
        }
    }
    a && b
}

fn ready(log: &EventLog) -> impl Iterator<Item = &TrialRecord> {
    log.records.iter().filter(|r| matches!(r.event, EventKind::Ready { .. }))
}

/// Probability per trial that both ensembles were prepared within `n` trials
/// of each other, normalized by armed trials.
pub fn estimate_p11(log: &EventLog, n: u32) -> Result<Estimate> {
    estimate_p11_normalized(log, n, TrialNormalization::Armed)
}

pub fn estimate_p11_normalized(log: &EventLog, n: u32, norm: TrialNormalization) -> Result<Estimate> {
    let denom = trials(log, norm)?;
    let count = ready(log).filter(|r| within(r, n)).count() as u64;
    Ok(Estimate::from_count(count, denom))
}

/// Joint `a`/`b` detection probability per trial for preparations within `n`
/// trials, counted in the field-2 window.
pub fn estimate_p1122(log: &EventLog, n: u32) -> Result<Estimate> {
    estimate_p1122_in(log, n, log.config.windows.field2(), TrialNormalization::Armed)
}

pub fn estimate_p1122_in(log: &EventLog, n: u32, window: TimeWindow, norm: TrialNormalization) -> Result<Estimate> {
    let denom = trials(log, norm)?;
    let count = ready(log)
        .filter(|r| within(r, n) && is_coincidence(r, window))
        .count() as u64;
    Ok(Estimate::from_count(count, denom))
}

fn at_separation(log: &EventLog, n: u32) -> impl Iterator<Item = &TrialRecord> {
    ready(log).filter(move |r| r.separation() == Some(n))
}

/// Two-photon conditional probability for ready events whose heralds were
/// exactly `n` trials apart.
pub fn estimate_p22c(log: &EventLog, n: u32) -> Result<Estimate> {
    if log.n_trials() == 0 {
        return Err(Error::EmptyLog);
    }
    let window = log.config.windows.field2();
    let mut events = 0u64;
    let mut count = 0u64;
    for r in at_separation(log, n) {
        events += 1;
        count += is_coincidence(r, window) as u64;
    }
    Ok(Estimate::from_count(count, events as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorPair {
    pub a: Estimate,
    pub b: Estimate,
}

/// Single-detector conditional probabilities at separation `n`: clicks per
/// ready event on each detector, minus the two-photon part.
pub fn estimate_p2c(log: &EventLog, n: u32) -> Result<DetectorPair> {
    let p22c = estimate_p22c(log, n)?;
    let window = log.config.windows.field2();
    let (mut a, mut b) = (0u64, 0u64);
    for r in at_separation(log, n) {
        for d in r.detections.iter().filter(|d| in_window(d, window)) {
            match d.detector {
                Detector::A => a += 1,
                Detector::B => b += 1,
            }
        }
    }
    let events = p22c.denominator;
    let shift = |e: Estimate| Estimate {
        value: e.value - p22c.value,
        ..e
    };
    Ok(DetectorPair {
        a: shift(Estimate::from_count(a, events)),
        b: shift(Estimate::from_count(b, events)),
    })
}

/// Ratio of `b` to `a` single counts over every ready event.
pub fn detector_asymmetry(log: &EventLog) -> Result<Estimate> {
    let window = log.config.windows.field2();
    let (mut a, mut b) = (0u64, 0u64);
    for r in ready(log) {
        for d in r.detections.iter().filter(|d| in_window(d, window)) {
            match d.detector {
                Detector::A => a += 1,
                Detector::B => b += 1,
            }
        }
    }
    if a == 0 {
        return Err(Error::DivisionByZero("no detector-a counts in ready events"));
    }
    let ratio = b as f64 / a as f64;
    let error = ratio * (1.0 / a as f64 + if b > 0 { 1.0 / b as f64 } else { 0.0 }).sqrt();
    Ok(Estimate {
        value: ratio,
        error,
        count: b,
        denominator: a as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakSelector {
    /// Both clicks from the same ready event.
    SameTrial,
    /// Clicks from ready events `k` apart.
    Offset(u32),
}

/// Delay histogram `tau = t_a - t_b` of `a`/`b` click pairs inside the
/// conditional window, in counts per ready event (per pair of ready events
/// and orientation for offset peaks).
pub fn coincidence_histogram(log: &EventLog, polarization: Polarization, selector: PeakSelector) -> Result<Histogram> {
    coincidence_histogram_in(log, polarization, selector, log.config.windows.conditional())
}

/// [`coincidence_histogram`] with clicks restricted to `window` instead of the
/// conditional window.
pub fn coincidence_histogram_in(
    log: &EventLog,
    polarization: Polarization,
    selector: PeakSelector,
    window: TimeWindow,
) -> Result<Histogram> {
    if log.config.interference.polarization != polarization {
        return Err(Error::MismatchedConfigs("interference.polarization".into()));
    }
    let mut h = Histogram::on_grid(2.0 * window.half_width_ns);
    let events: Vec<&TrialRecord> = ready(log).collect();
    let clicks = |r: &TrialRecord, det: Detector| -> Vec<i32> {
        r.detections
            .iter()
            .filter(|d| d.detector == det && in_window(d, window))
            .map(|d| d.time_ns)
            .collect()
    };
    let pairs = |x: &[i32], y: &[i32], h: &mut Histogram| {
        for &ta in x {
            for &tb in y {
                h.fill((ta - tb) as f64);
            }
        }
    };
    let scale = match selector {
        PeakSelector::SameTrial => {
            for r in &events {
                pairs(&clicks(r, Detector::A), &clicks(r, Detector::B), &mut h);
            }
            events.len() as f64
        }
        PeakSelector::Offset(k) => {
            let k = k.max(1) as usize;
            for w in events.windows(k + 1) {
                let (first, last) = (w[0], w[k]);
                pairs(&clicks(first, Detector::A), &clicks(last, Detector::B), &mut h);
                pairs(&clicks(last, Detector::A), &clicks(first, Detector::B), &mut h);
            }
            2.0 * events.len().saturating_sub(k) as f64
        }
    };
    h.scale = scale.max(1.0);
    Ok(h)
}

fn check_pair(perp: &RunConfig, par: &RunConfig) -> Result<()> {
    if perp.interference.polarization != Polarization::Orthogonal {
        return Err(Error::MismatchedConfigs("first log must use orthogonal polarization".into()));
    }
    if par.interference.polarization != Polarization::Parallel {
        return Err(Error::MismatchedConfigs("second log must use parallel polarization".into()));
    }
    let strip = |c: &RunConfig| {
        let mut c = c.with_polarization(Polarization::Orthogonal);
        c.seed = 0;
        c.entries()
    };
    let (a, b) = (strip(perp), strip(par));
    if let Some(((k, _), _)) = a.iter().zip(&b).find(|(x, y)| x != y) {
        return Err(Error::MismatchedConfigs(k.clone()));
    }
    Ok(())
}

/// Visibility `(p_perp - p_par) / p_perp` of same-trial coincidences with
/// `|tau| <= tau_halfwidth_ns`.
pub fn visibility(perp: &EventLog, par: &EventLog, tau_halfwidth_ns: f64) -> Result<Estimate> {
    check_pair(&perp.config, &par.config)?;
    let hp = coincidence_histogram(perp, Polarization::Orthogonal, PeakSelector::SameTrial)?;
    let hq = coincidence_histogram(par, Polarization::Parallel, PeakSelector::SameTrial)?;
    visibility_from_histograms(&hp, &hq, tau_halfwidth_ns)
}

pub fn visibility_from_histograms(perp: &Histogram, par: &Histogram, tau_halfwidth_ns: f64) -> Result<Estimate> {
    let cp = perp.counts_within(tau_halfwidth_ns);
    let cq = par.counts_within(tau_halfwidth_ns);
    if cp == 0.0 {
        return Err(Error::DivisionByZero("no orthogonal coincidences in the window"));
    }
    let x = (cq / par.scale) / (cp / perp.scale);
    let rel = (1.0 / cp + if cq > 0.0 { 1.0 / cq } else { 0.0 }).sqrt();
    Ok(Estimate {
        value: 1.0 - x,
        error: x * rel,
        count: cq as u64,
        denominator: cp,
    })
}

/// Ratio of the same-trial peak to the mean of the offset peaks `1..=max_offset`.
pub fn cross_peak_ratio(log: &EventLog, max_offset: u32) -> Result<Estimate> {
    let pol = log.config.interference.polarization;
    let center = coincidence_histogram(log, pol, PeakSelector::SameTrial)?;
    let mut side_counts = 0.0;
    let mut side_scale = 0.0;
    for k in 1..=max_offset.max(1) {
        let h = coincidence_histogram(log, pol, PeakSelector::Offset(k))?;
        side_counts += h.in_range();
        side_scale += h.scale;
    }
    let cc = center.in_range();
    if side_counts == 0.0 || cc == 0.0 {
        return Err(Error::DivisionByZero("empty coincidence peaks"));
    }
    let ratio = (cc / center.scale) / (side_counts / side_scale);
    Ok(Estimate {
        value: ratio,
        error: ratio * (1.0 / cc + 1.0 / side_counts).sqrt(),
        count: cc as u64,
        denominator: side_counts,
    })
}

/// Side-peak visibility between paired runs, pooled over offsets `1..=max_offset`.
pub fn side_peak_visibility(perp: &EventLog, par: &EventLog, max_offset: u32) -> Result<Estimate> {
    check_pair(&perp.config, &par.config)?;
    let pooled = |log: &EventLog, pol| -> Result<Histogram> {
        let mut total = coincidence_histogram(log, pol, PeakSelector::Offset(1))?;
        for k in 2..=max_offset.max(1) {
            let h = coincidence_histogram(log, pol, PeakSelector::Offset(k))?;
            let scale = total.scale + h.scale;
            total.merge(&h)?;
            total.scale = scale;
        }
        Ok(total)
    };
    let hp = pooled(perp, Polarization::Orthogonal)?;
    let hq = pooled(par, Polarization::Parallel)?;
    visibility_from_histograms(&hp, &hq, f64::INFINITY)
}

/// Density-normalized detection-time profile.
///
/// The conditional profile keeps clicks from readouts in a trial with a
/// herald and drops flagged background; the unconditional profile keeps every
/// click in the field-2 window.
pub fn wavepacket_profiles(log: &EventLog, conditional: bool) -> Histogram {
    let window = log.config.windows.field2();
    let mut h = Histogram::on_grid(window.half_width_ns);
    for r in log.records.iter().filter(|r| r.event.is_readout()) {
        if conditional && !(r.herald_l || r.herald_r) {
            continue;
        }
        for d in r.detections.iter().filter(|d| in_window(d, window)) {
            if conditional && d.background {
                continue;
            }
            h.fill(d.time_ns as f64);
        }
    }
    h.normalized(Normalization::Density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Ensemble;

    fn det(detector: Detector, time_ns: i32) -> Detection {
        Detection {
            detector,
            time_ns,
            background: false,
        }
    }

    fn rec(t: u64, event: EventKind, detections: Vec<Detection>) -> TrialRecord {
        TrialRecord {
            trial_index: t,
            herald_l: true,
            herald_r: false,
            event,
            detections,
        }
    }

    fn log() -> EventLog {
        let ready = |l, r| EventKind::Ready { age_l: l, age_r: r };
        EventLog {
            config: RunConfig {
                n_trials: 1000,
                ..Default::default()
            },
            records: vec![
                rec(10, ready(0, 0), vec![det(Detector::A, 0), det(Detector::B, 4)]),
                rec(20, ready(5, 0), vec![det(Detector::A, 2)]),
                rec(40, ready(0, 22), vec![det(Detector::A, -40), det(Detector::B, 40)]),
                rec(90, EventKind::Flush { ensemble: Ensemble::L, age: 23 }, vec![det(Detector::B, 0)]),
            ],
        }
    }

    #[test]
    fn counting_rules() {
        let log = log();
        // gated: 0 + 5 + 22 + 22
        assert_eq!(log.summary().armed_trials(), 1000 - 49);
        let p11 = estimate_p11(&log, 23).unwrap();
        assert_eq!(p11.count, 3);
        assert_eq!(estimate_p11(&log, 22).unwrap().count, 2);
        assert_eq!(estimate_p11_normalized(&log, 23, TrialNormalization::All).unwrap().value, 3.0 / 1000.0);
        assert_eq!(estimate_p1122(&log, 23).unwrap().count, 2);
        let conditional = log.config.windows.conditional();
        assert_eq!(estimate_p1122_in(&log, 23, conditional, TrialNormalization::All).unwrap().count, 1);
        let p22c = estimate_p22c(&log, 0).unwrap();
        assert_eq!((p22c.count, p22c.denominator), (1, 1.0));
        let p2c = estimate_p2c(&log, 5).unwrap();
        assert_eq!(p2c.a.value, 1.0);
        assert_eq!(p2c.b.value, 0.0);
    }

    #[test]
    fn empty_log_is_an_error_but_no_events_is_zero() {
        let mut log = log();
        log.records.clear();
        let e = estimate_p11(&log, 23).unwrap();
        assert_eq!((e.value, e.error), (0.0, 0.0));
        log.config.n_trials = 0;
        assert!(matches!(estimate_p11(&log, 23), Err(Error::EmptyLog)));
    }

    #[test]
    fn same_trial_histogram() {
        let log = log();
        let h = coincidence_histogram(&log, Polarization::Orthogonal, PeakSelector::SameTrial).unwrap();
        assert_eq!(h.in_range(), 1.0);
        assert_eq!(h.scale, 3.0);
        assert_eq!(h.counts[h.bin_of(-4.0).unwrap()], 1.0);
        assert!(coincidence_histogram(&log, Polarization::Parallel, PeakSelector::SameTrial).is_err());
        let side = coincidence_histogram(&log, Polarization::Orthogonal, PeakSelector::Offset(1)).unwrap();
        // event 10 a(0) with event 20 (no b); event 20 a(2) with event 10 b(4)
        assert_eq!(side.in_range(), 1.0);
        assert_eq!(side.scale, 4.0);
    }

    #[test]
    fn visibility_requires_matching_pair() {
        let perp = log();
        let mut par = log();
        par.config.interference.polarization = Polarization::Parallel;
        par.config.seed = 99;
        assert!(visibility(&perp, &par, 90.0).is_ok());
        par.config.ensemble_l.w = 0.3;
        assert!(matches!(visibility(&perp, &par, 90.0), Err(Error::MismatchedConfigs(k)) if k == "ensemble_l.w"));
    }
}
