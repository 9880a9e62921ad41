//! Shared domain types: per-node rates, control and interference settings,
//! and the per-trial records that make up an event log.

use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};

/// Resolution of the time-tagging electronics. Every recorded detection time
/// is an integer multiple of this.
pub const TIME_RESOLUTION_NS: i32 = 2;

pub(crate) fn check_probability(field: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::invalid(field, format!("{value} is outside [0, 1]")));
    }
    Ok(())
}

/// Which of the two memory nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ensemble {
    L,
    R,
}

impl Ensemble {
    pub fn other(self) -> Ensemble {
        match self {
            Ensemble::L => Ensemble::R,
            Ensemble::R => Ensemble::L,
        }
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ensemble::L => f.write_str("L"),
            Ensemble::R => f.write_str("R"),
        }
    }
}

/// Physical rates of one memory node.
///
/// `pc` already folds in channel loss and detector efficiency; `qc`, `q1` and
/// `g12` are carried along for reporting only and never enter the sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleParams {
    /// Herald (field-1 detection) probability per trial.
    pub p1: f64,
    /// Field-2 detection probability given a fresh herald.
    pub pc: f64,
    pub qc: f64,
    pub q1: f64,
    /// Two-photon suppression parameter `2 P2 / P1^2`.
    pub w: f64,
    pub g12: f64,
    /// Memory coherence time in trials. May be infinite.
    pub nc: f64,
    /// Probability per readout of an extra, uncorrelated field-2 detection.
    pub background_rate: f64,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        EnsembleParams {
            p1: 0.0012,
            pc: 0.085,
            qc: 0.34,
            q1: 0.005,
            w: 0.17,
            g12: 23.0,
            nc: 18.0,
            background_rate: 0.0,
        }
    }
}

impl EnsembleParams {
    /// Two-photon probability of a fresh readout, `w pc^2 / 2`.
    pub fn two_photon_probability(&self) -> f64 {
        self.w * self.pc * self.pc / 2.0
    }

    pub fn validate(self) -> Result<ValidatedParams> {
        validate(self)
    }
}

/// [`EnsembleParams`] whose invariants have been checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedParams(EnsembleParams);

impl ValidatedParams {
    pub fn into_inner(self) -> EnsembleParams {
        self.0
    }
}

impl Deref for ValidatedParams {
    type Target = EnsembleParams;

    fn deref(&self) -> &EnsembleParams {
        &self.0
    }
}

/// Checks every invariant of `params` and wraps it on success.
///
/// ```
/// use condmem::{validate, EnsembleParams};
///
/// let bad = EnsembleParams { pc: 0.9, w: 3.0, ..Default::default() };
/// assert!(validate(bad).is_err());
/// ```
pub fn validate(params: EnsembleParams) -> Result<ValidatedParams> {
    check_probability("p1", params.p1)?;
    check_probability("pc", params.pc)?;
    check_probability("qc", params.qc)?;
    if !(params.q1 >= 0.0) {
        return Err(Error::invalid("q1", "must be non-negative"));
    }
    if !(params.w >= 0.0) || params.w.is_infinite() {
        return Err(Error::invalid("w", format!("{} must be finite and >= 0", params.w)));
    }
    if !(params.g12 >= 0.0) {
        return Err(Error::invalid("g12", "must be non-negative"));
    }
    if !(params.nc > 0.0) {
        return Err(Error::invalid("nc", format!("{} must be > 0", params.nc)));
    }
    if !(0.0..1.0).contains(&params.background_rate) {
        return Err(Error::invalid(
            "background_rate",
            format!("{} is outside [0, 1)", params.background_rate),
        ));
    }
    let p2 = params.two_photon_probability();
    if p2 + params.pc > 1.0 {
        return Err(Error::invalid(
            "w",
            format!("two-photon probability {p2} plus pc {} exceeds 1", params.pc),
        ));
    }
    Ok(ValidatedParams(params))
}

/// Timing of the write/read cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlConfig {
    /// Longest storage, in trials, before a stored excitation is flushed.
    pub n_max: u32,
    pub trial_duration_ns: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            n_max: 23,
            trial_duration_ns: 525.0,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_max < 1 {
            return Err(Error::invalid("n_max", "must be >= 1"));
        }
        if !(self.trial_duration_ns > 0.0) || self.trial_duration_ns.is_infinite() {
            return Err(Error::invalid("trial_duration_ns", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Storage timeout in nanoseconds.
    pub fn storage_timeout_ns(&self) -> f64 {
        self.n_max as f64 * self.trial_duration_ns
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    Parallel,
    Orthogonal,
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarization::Parallel => f.write_str("parallel"),
            Polarization::Orthogonal => f.write_str("orthogonal"),
        }
    }
}

impl std::str::FromStr for Polarization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "parallel" => Ok(Polarization::Parallel),
            "orthogonal" => Ok(Polarization::Orthogonal),
            other => Err(format!("expected `parallel` or `orthogonal`, got `{other}`")),
        }
    }
}

/// Beam splitter and wavepacket settings for the two-photon measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceConfig {
    /// Mode overlap of the two wavepackets.
    pub xi: f64,
    /// 1/e half-width of each single-photon probability density.
    pub envelope_width_ns: f64,
    /// Fixed frequency difference between the two sources.
    pub delta_omega_rad_per_ns: f64,
    /// Intensity transmission of the splitter. Field L reaches detector a with
    /// this probability, field R with one minus it.
    pub splitter_ratio: f64,
    pub polarization: Polarization,
    /// Fractional loss on field L when the polarizations are crossed.
    pub pol_misalignment_offset: f64,
}

impl Default for InterferenceConfig {
    fn default() -> Self {
        InterferenceConfig {
            xi: 0.90,
            envelope_width_ns: 13.0,
            delta_omega_rad_per_ns: 0.0,
            splitter_ratio: 0.5,
            polarization: Polarization::Orthogonal,
            pol_misalignment_offset: 0.0,
        }
    }
}

impl InterferenceConfig {
    pub fn validate(&self) -> Result<()> {
        check_probability("xi", self.xi)?;
        if !(self.envelope_width_ns > 0.0) || self.envelope_width_ns.is_infinite() {
            return Err(Error::invalid("envelope_width_ns", "must be finite and > 0"));
        }
        if !self.delta_omega_rad_per_ns.is_finite() {
            return Err(Error::invalid("delta_omega_rad_per_ns", "must be finite"));
        }
        if !(self.splitter_ratio > 0.0 && self.splitter_ratio < 1.0) {
            return Err(Error::invalid("splitter_ratio", "must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.pol_misalignment_offset) {
            return Err(Error::invalid("pol_misalignment_offset", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// 1/e half-width of the coincidence-delay envelope, `sqrt(2) T_c`.
    pub fn coincidence_width_ns(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.envelope_width_ns
    }

    /// Transmission `t` and reflection `r = 1 - t`.
    pub fn splitter(&self) -> (f64, f64) {
        (self.splitter_ratio, 1.0 - self.splitter_ratio)
    }
}

/// Electronic and analysis gate lengths (full widths, centred on the readout).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisWindows {
    pub field1_ns: f64,
    pub field2_ns: f64,
    pub conditional_field2_ns: f64,
    /// Half-width of the delay integration used for visibilities.
    pub tau_halfwidth_ns: f64,
}

impl Default for AnalysisWindows {
    fn default() -> Self {
        AnalysisWindows {
            field1_ns: 80.0,
            field2_ns: 90.0,
            conditional_field2_ns: 44.0,
            tau_halfwidth_ns: 90.0,
        }
    }
}

impl AnalysisWindows {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("field1_ns", self.field1_ns),
            ("field2_ns", self.field2_ns),
            ("conditional_field2_ns", self.conditional_field2_ns),
            ("tau_halfwidth_ns", self.tau_halfwidth_ns),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(name, "must be > 0"));
            }
        }
        if self.conditional_field2_ns > self.field2_ns {
            return Err(Error::invalid(
                "conditional_field2_ns",
                "conditional window must fit inside the field-2 window",
            ));
        }
        Ok(())
    }

    pub fn field2(&self) -> TimeWindow {
        TimeWindow::centered(self.field2_ns)
    }

    pub fn conditional(&self) -> TimeWindow {
        TimeWindow::centered(self.conditional_field2_ns)
    }
}

/// A symmetric gate `[-half, +half]` around the readout centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    pub half_width_ns: f64,
}

impl TimeWindow {
    pub fn centered(full_width_ns: f64) -> Self {
        TimeWindow {
            half_width_ns: full_width_ns / 2.0,
        }
    }

    pub fn contains(&self, t_ns: i32) -> bool {
        (t_ns as f64).abs() <= self.half_width_ns
    }
}

/// Rounds a time to the acquisition grid.
pub fn quantize_time(t_ns: f64) -> i32 {
    let step = TIME_RESOLUTION_NS as f64;
    ((t_ns / step).round() * step) as i32
}

/// Control status of one ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    /// Write/read train running.
    Idle,
    /// Excitation stored; `age` is the number of trials since the herald.
    Stored { age: u32 },
}

impl Status {
    pub fn is_stored(self) -> bool {
        matches!(self, Status::Stored { .. })
    }

    pub fn age(self) -> Option<u32> {
        match self {
            Status::Idle => None,
            Status::Stored { age } => Some(age),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ControlState {
    pub left: Status,
    pub right: Status,
    pub trial_index: u64,
}

impl ControlState {
    pub fn idle() -> Self {
        ControlState {
            left: Status::Idle,
            right: Status::Idle,
            trial_index: 0,
        }
    }

    pub fn status(&self, ensemble: Ensemble) -> Status {
        match ensemble {
            Ensemble::L => self.left,
            Ensemble::R => self.right,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.left == Status::Idle && self.right == Status::Idle
    }
}

impl Default for ControlState {
    fn default() -> Self {
        Self::idle()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detector {
    A,
    B,
}

impl Detector {
    pub fn swapped(self) -> Detector {
        match self {
            Detector::A => Detector::B,
            Detector::B => Detector::A,
        }
    }
}

/// One field-2 click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Detection {
    pub detector: Detector,
    /// Signed time relative to the readout centre, on the 2 ns grid.
    pub time_ns: i32,
    /// Uncorrelated light rather than a retrieved excitation.
    pub background: bool,
}

/// What the control electronics did in a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    None,
    /// Both ensembles read out together.
    Ready { age_l: u32, age_r: u32 },
    /// One ensemble read out without a partner. Its detections never enter
    /// the conditional statistics.
    Flush { ensemble: Ensemble, age: u32 },
}

impl EventKind {
    pub fn is_readout(&self) -> bool {
        !matches!(self, EventKind::None)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub herald_l: bool,
    pub herald_r: bool,
    pub event: EventKind,
    pub detections: Vec<Detection>,
}

impl TrialRecord {
    /// Separation in trials between the two heralds of a ready event.
    pub fn separation(&self) -> Option<u32> {
        match self.event {
            EventKind::Ready { age_l, age_r } => Some(age_l.max(age_r)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper() -> EnsembleParams {
        EnsembleParams {
            p1: 0.0012,
            pc: 0.085,
            w: 0.17,
            nc: 18.0,
            ..Default::default()
        }
    }

    #[test]
    fn paper_rates_validate() {
        assert!(validate(paper()).is_ok());
    }

    #[test]
    fn all_zero_rates_validate() {
        let p = EnsembleParams {
            p1: 0.0,
            pc: 0.0,
            w: 0.0,
            nc: 1.0,
            ..Default::default()
        };
        assert!(validate(p).is_ok());
    }

    #[test]
    fn two_photon_overflow_is_rejected() {
        // P2 = 3 * 0.81 / 2 = 1.215 > 1 - 0.9
        let p = EnsembleParams {
            pc: 0.9,
            w: 3.0,
            ..paper()
        };
        match validate(p) {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "w"),
            other => panic!("expected InvalidParameter, got {other:?}"),
        }
    }

    #[test]
    fn bounds_name_the_field() {
        let cases: [(EnsembleParams, &str); 4] = [
            (EnsembleParams { p1: 1.5, ..paper() }, "p1"),
            (EnsembleParams { pc: -0.1, ..paper() }, "pc"),
            (EnsembleParams { nc: 0.0, ..paper() }, "nc"),
            (EnsembleParams { background_rate: 1.0, ..paper() }, "background_rate"),
        ];
        for (p, name) in cases {
            match validate(p) {
                Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, name),
                other => panic!("{name}: {other:?}"),
            }
        }
    }

    #[test]
    fn infinite_coherence_is_allowed() {
        let p = EnsembleParams {
            nc: f64::INFINITY,
            ..paper()
        };
        assert!(validate(p).is_ok());
    }

    #[test]
    fn storage_timeout() {
        let c = ControlConfig::default();
        assert_eq!(c.storage_timeout_ns(), 23.0 * 525.0);
        assert!(ControlConfig { n_max: 0, ..c }.validate().is_err());
    }

    #[test]
    fn coincidence_width_is_root_two_envelope() {
        let cfg = InterferenceConfig::default();
        assert!((cfg.coincidence_width_ns() - 18.384776310850235).abs() < 1e-12);
    }

    #[test]
    fn conditional_window_nests() {
        let w = AnalysisWindows {
            conditional_field2_ns: 100.0,
            ..Default::default()
        };
        assert!(w.validate().is_err());
        assert!(AnalysisWindows::default().validate().is_ok());
    }

    #[test]
    fn quantization_step_is_two_ns() {
        assert_eq!(quantize_time(0.9), 0);
        assert_eq!(quantize_time(1.1), 2);
        assert_eq!(quantize_time(-3.2), -4);
        assert_eq!(quantize_time(-2.9), -2);
        for t in [-40.3, -7.7, 0.0, 5.5, 31.9] {
            assert_eq!(quantize_time(t) % TIME_RESOLUTION_NS, 0);
        }
    }
}
