//! The conditional-control state machine and the closed-form preparation
//! probabilities it produces.
//!
//! Each trial the electronics looks at the two herald detectors. A herald on an
//! idle ensemble gates its write/read train off, storing the excitation. When
//! both ensembles hold an excitation a *ready* signal reads them out together.
//! A stored excitation that waits `n_max` trials without a partner is flushed.

use crate::error::{Error, Result};
use crate::types::{ControlConfig, ControlState, Ensemble, EventKind, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlMode {
    /// Store heralded excitations and wait for the partner.
    Conditional,
    /// No storage: only a same-trial double herald produces a joint readout.
    Baseline,
}

impl std::fmt::Display for ControlMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ControlMode::Conditional => f.write_str("conditional"),
            ControlMode::Baseline => f.write_str("baseline"),
        }
    }
}

impl std::str::FromStr for ControlMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "conditional" => Ok(ControlMode::Conditional),
            "baseline" => Ok(ControlMode::Baseline),
            other => Err(format!("expected `conditional` or `baseline`, got `{other}`")),
        }
    }
}

/// Pulse-level commands issued by the electronics within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlAction {
    FireWrite(Ensemble),
    GateOff(Ensemble),
    FireReadBoth,
    Flush(Ensemble),
}

impl ControlState {
    /// Advances the controller by one trial.
    ///
    /// `heralds` are the field-1 detections of this trial. A herald reported
    /// for an ensemble whose train is gated off is a [`Error::ProtocolViolation`].
    ///
    /// ```
    /// use condmem::{ControlConfig, ControlMode, ControlState, EventKind, Status};
    ///
    /// let cfg = ControlConfig::default();
    /// let s = ControlState { left: Status::Stored { age: 5 }, ..ControlState::idle() };
    /// let (next, event) = s.step((false, true), &cfg, ControlMode::Conditional).unwrap();
    /// assert_eq!(event, EventKind::Ready { age_l: 5, age_r: 0 });
    /// assert!(next.is_idle());
    /// ```
    pub fn step(
        &self,
        heralds: (bool, bool),
        cfg: &ControlConfig,
        mode: ControlMode,
    ) -> Result<(ControlState, EventKind)> {
        let (herald_l, herald_r) = heralds;
        if herald_l && self.left.is_stored() {
            return Err(Error::ProtocolViolation(Ensemble::L));
        }
        if herald_r && self.right.is_stored() {
            return Err(Error::ProtocolViolation(Ensemble::R));
        }
        let trial_index = self.trial_index + 1;

        if mode == ControlMode::Baseline {
            let event = match (herald_l, herald_r) {
                (true, true) => EventKind::Ready { age_l: 0, age_r: 0 },
                (true, false) => EventKind::Flush { ensemble: Ensemble::L, age: 0 },
                (false, true) => EventKind::Flush { ensemble: Ensemble::R, age: 0 },
                (false, false) => EventKind::None,
            };
            let next = ControlState { trial_index, ..ControlState::idle() };
            return Ok((next, event));
        }

        let left = if herald_l { Status::Stored { age: 0 } } else { self.left };
        let right = if herald_r { Status::Stored { age: 0 } } else { self.right };

        if let (Status::Stored { age: age_l }, Status::Stored { age: age_r }) = (left, right) {
            let next = ControlState { trial_index, ..ControlState::idle() };
            return Ok((next, EventKind::Ready { age_l, age_r }));
        }

        let mut event = EventKind::None;
        let mut age_up = |status: Status, ensemble: Ensemble| match status {
            Status::Idle => Status::Idle,
            Status::Stored { age } => {
                let age = age + 1;
                if age >= cfg.n_max {
                    event = EventKind::Flush { ensemble, age };
                    Status::Idle
                } else {
                    Status::Stored { age }
                }
            }
        };
        let left = age_up(left, Ensemble::L);
        let right = age_up(right, Ensemble::R);
        Ok((ControlState { left, right, trial_index }, event))
    }

    /// Commands issued during the trial that led from `self` to `event`.
    pub fn actions(&self, heralds: (bool, bool), event: EventKind) -> Vec<ControlAction> {
        let mut out = Vec::with_capacity(4);
        for (ensemble, status, herald) in [
            (Ensemble::L, self.left, heralds.0),
            (Ensemble::R, self.right, heralds.1),
        ] {
            if status == Status::Idle {
                out.push(ControlAction::FireWrite(ensemble));
                if herald && !matches!(event, EventKind::Ready { .. }) {
                    out.push(ControlAction::GateOff(ensemble));
                }
            }
        }
        match event {
            EventKind::Ready { .. } => out.push(ControlAction::FireReadBoth),
            EventKind::Flush { ensemble, .. } => out.push(ControlAction::Flush(ensemble)),
            EventKind::None => {}
        }
        out
    }
}

/// Probability per trial that both ensembles end up prepared within `n`
/// trials of each other:
/// `p1^2 (1 + 2 sum_{k=1}^{n-1} (1 - p1)^k)`.
///
/// ```
/// let p1 = 0.0012;
/// let f11 = condmem::p11_exact(p1, 23) / (p1 * p1);
/// assert!((f11 - 44.4).abs() < 0.05);
/// ```
pub fn p11_exact(p1: f64, n: u32) -> f64 {
    if n == 0 || p1 == 0.0 {
        return 0.0;
    }
    let q = 1.0 - p1;
    // sum_{k=1}^{n-1} q^k = q (1 - q^(n-1)) / p1
    let tail = q * (1.0 - q.powi(n as i32 - 1)) / p1;
    p1 * p1 * (1.0 + 2.0 * tail)
}

/// Small-`p1` limit `(2n - 1) p1^2`.
pub fn p11_small(p1: f64, n: u32) -> f64 {
    (2.0 * n as f64 - 1.0) * p1 * p1
}

/// Joint two-photon conditional probability after a storage of `n` trials,
/// `(pc^2 / 2) exp(-n / nc)`.
pub fn p22c_model(pc: f64, nc: f64, n: f64) -> f64 {
    pc * pc / 2.0 * (-n / nc).exp()
}

/// Single-detector conditional probability after a storage of `n` trials,
/// `(pc + pc exp(-n / nc)) / 2 - p22c`.
pub fn p2c_model(pc: f64, nc: f64, n: f64) -> f64 {
    (pc + pc * (-n / nc).exp()) / 2.0 - p22c_model(pc, nc, n)
}

/// Ideal-memory joint detection probability, small-`p1` form
/// `(2n - 1) p1^2 pc^2 / 2`.
pub fn p1122_ideal(p1: f64, pc: f64, n: u32) -> f64 {
    p11_small(p1, n) * pc * pc / 2.0
}

/// Ideal-memory joint detection probability without the small-`p1`
/// approximation.
pub fn p1122_ideal_exact(p1: f64, pc: f64, n: u32) -> f64 {
    p11_exact(p1, n) * pc * pc / 2.0
}

/// Joint detection probability with a decaying memory: every term of
/// [`p11_exact`] weighted by [`p22c_model`] at its separation.
pub fn p1122_decohered(p1: f64, pc: f64, nc: f64, n: u32) -> f64 {
    if n == 0 || p1 == 0.0 {
        return 0.0;
    }
    let ratio = (1.0 - p1) * (-1.0 / nc).exp();
    let tail = if ratio == 1.0 {
        (n - 1) as f64
    } else {
        ratio * (1.0 - ratio.powi(n as i32 - 1)) / (1.0 - ratio)
    };
    p1 * p1 * pc * pc / 2.0 * (1.0 + 2.0 * tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CFG: ControlConfig = ControlConfig {
        n_max: 23,
        trial_duration_ns: 525.0,
    };

    fn stored(age: u32) -> Status {
        Status::Stored { age }
    }

    #[test]
    fn same_trial_double_herald() {
        let (s, e) = ControlState::idle()
            .step((true, true), &CFG, ControlMode::Conditional)
            .unwrap();
        assert_eq!(e, EventKind::Ready { age_l: 0, age_r: 0 });
        assert!(s.is_idle());
        assert_eq!(s.trial_index, 1);
    }

    #[test]
    fn partner_herald_releases_both() {
        let s = ControlState { left: stored(5), ..ControlState::idle() };
        let (s, e) = s.step((false, true), &CFG, ControlMode::Conditional).unwrap();
        assert_eq!(e, EventKind::Ready { age_l: 5, age_r: 0 });
        assert!(s.is_idle());
    }

    #[test]
    fn timeout_flushes_at_n_max() {
        let s = ControlState { left: stored(22), ..ControlState::idle() };
        let (s, e) = s.step((false, false), &CFG, ControlMode::Conditional).unwrap();
        assert_eq!(e, EventKind::Flush { ensemble: Ensemble::L, age: 23 });
        assert!(s.is_idle());
    }

    #[test]
    fn storage_ages_by_one() {
        let (s, e) = ControlState::idle()
            .step((false, true), &CFG, ControlMode::Conditional)
            .unwrap();
        assert_eq!(e, EventKind::None);
        assert_eq!(s.right, stored(1));
        let (s, _) = s.step((false, false), &CFG, ControlMode::Conditional).unwrap();
        assert_eq!(s.right, stored(2));
    }

    #[test]
    fn gated_herald_is_a_violation() {
        let s = ControlState { right: stored(3), ..ControlState::idle() };
        assert!(matches!(
            s.step((false, true), &CFG, ControlMode::Conditional),
            Err(Error::ProtocolViolation(Ensemble::R))
        ));
    }

    #[test]
    fn n_max_one_only_reads_same_trial() {
        let cfg = ControlConfig { n_max: 1, ..CFG };
        let (s, e) = ControlState::idle()
            .step((true, false), &cfg, ControlMode::Conditional)
            .unwrap();
        assert_eq!(e, EventKind::Flush { ensemble: Ensemble::L, age: 1 });
        assert!(s.is_idle());
    }

    #[test]
    fn baseline_never_stores() {
        let s = ControlState::idle();
        let (s, e) = s.step((true, false), &CFG, ControlMode::Baseline).unwrap();
        assert_eq!(e, EventKind::Flush { ensemble: Ensemble::L, age: 0 });
        assert!(s.is_idle());
        let (_, e) = s.step((true, true), &CFG, ControlMode::Baseline).unwrap();
        assert_eq!(e, EventKind::Ready { age_l: 0, age_r: 0 });
    }

    #[test]
    fn actions_follow_the_event() {
        let s = ControlState { left: stored(4), ..ControlState::idle() };
        let (_, e) = s.step((false, true), &CFG, ControlMode::Conditional).unwrap();
        let acts = s.actions((false, true), e);
        assert_eq!(acts, vec![ControlAction::FireWrite(Ensemble::R), ControlAction::FireReadBoth]);

        let s = ControlState::idle();
        let (_, e) = s.step((true, false), &CFG, ControlMode::Conditional).unwrap();
        assert!(s.actions((true, false), e).contains(&ControlAction::GateOff(Ensemble::L)));
    }

    #[test]
    fn p11_examples() {
        let p1 = 0.0012;
        let f = p11_exact(p1, 23) / (p1 * p1);
        assert!((f - 44.4).abs() < 0.05, "{f}");
        assert!((p11_exact(0.37, 1) - 0.37 * 0.37).abs() < 1e-15);
        let tiny = 1e-9;
        assert!((p11_exact(tiny, 23) / (tiny * tiny) - 45.0).abs() < 1e-5);
        assert_eq!(p11_small(p1, 23), 45.0 * p1 * p1);
    }

    #[test]
    fn p11_matches_explicit_sum() {
        for &p1 in &[0.001, 0.05, 0.3, 1.0] {
            for n in 1..30u32 {
                let explicit: f64 =
                    p1 * (p1 + 2.0 * (1..n).map(|k| (1.0f64 - p1).powi(k as i32) * p1).sum::<f64>());
                assert!((p11_exact(p1, n) - explicit).abs() < 1e-14, "p1={p1} n={n}");
            }
        }
    }

    #[test]
    fn p1122_examples() {
        let (p1, pc) = (0.0012, 0.091);
        let ideal = p1122_ideal(p1, pc, 23);
        assert!((ideal - 45.0 * p1 * p1 * pc * pc / 2.0).abs() < 1e-20);
        assert!((ideal - 2.68e-7).abs() < 0.005e-7);
        assert_eq!(p1122_ideal(p1, pc, 1), p1 * p1 * pc * pc / 2.0);

        let base = p1122_decohered(p1, pc, 18.0, 1);
        let f1122 = p1122_decohered(p1, pc, 18.0, 23) / base;
        assert!((f1122 - 25.42).abs() < 0.01, "{f1122}");
        let tiny = 1e-9;
        let limit = p1122_decohered(tiny, pc, 18.0, 23) / p1122_decohered(tiny, pc, 18.0, 1);
        let direct = 1.0 + 2.0 * (1..23).map(|k| (-(k as f64) / 18.0).exp()).sum::<f64>();
        assert!((limit - direct).abs() < 1e-6);
        assert!((limit - 25.7).abs() < 0.01, "{limit}");

        let ratio = ideal / p1122_decohered(p1, pc, 18.0, 23);
        assert!((ratio - 1.770).abs() < 0.001, "{ratio}");

        let inf = p1122_decohered(p1, pc, f64::INFINITY, 23);
        assert!((inf - p1122_ideal_exact(p1, pc, 23)).abs() < 1e-20);
    }

    #[test]
    fn p1122_matches_explicit_sum() {
        let (p1, pc, nc) = (0.0012, 0.091, 18.0);
        for n in 1..=30u32 {
            let explicit = p1
                * (p1 * p22c_model(pc, nc, 0.0)
                    + 2.0
                        * (1..n)
                            .map(|k| (1.0 - p1).powi(k as i32) * p1 * p22c_model(pc, nc, k as f64))
                            .sum::<f64>());
            assert!((p1122_decohered(p1, pc, nc, n) - explicit).abs() < 1e-20);
        }
    }

    #[test]
    fn decay_model_examples() {
        assert!((p22c_model(0.091, 18.0, 0.0) - 0.0041405).abs() < 1e-12);
        assert!((p2c_model(0.091, 18.0, 0.0) - 0.0868595).abs() < 1e-12);
        assert!(p22c_model(0.091, 18.0, 1e4) < 1e-200);
        assert!((p2c_model(0.091, 18.0, 1e4) - 0.0455).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn p11_is_increasing(p1 in 1e-6f64..0.99, n in 1u32..200) {
            if (1.0 - p1).powi(n as i32) > 1e-12 {
                prop_assert!(p11_exact(p1, n + 1) > p11_exact(p1, n));
            }
            prop_assert!(p11_exact(p1, n + 1) >= p11_exact(p1, n));
        }

        #[test]
        fn decoherence_never_helps(p1 in 1e-5f64..0.5, pc in 0.01f64..1.0, nc in 0.5f64..1e3, n in 1u32..60) {
            let ideal = p1122_ideal_exact(p1, pc, n);
            let dec = p1122_decohered(p1, pc, nc, n);
            if n == 1 {
                prop_assert!((ideal - dec).abs() <= 1e-15 * ideal);
            } else {
                prop_assert!(dec < ideal);
            }
        }
    }
}
