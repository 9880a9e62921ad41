//! The block engine against a trial-by-trial reference built on the public
//! state machine.

use std::collections::BTreeMap;

use condmem::reproduce::ideal_decay_config;
use condmem::{run, ControlMode, ControlState, EventKind, RunConfig};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[derive(Default, Debug)]
struct Tally {
    ready: BTreeMap<u32, f64>,
    flush: f64,
}

fn reference(cfg: &RunConfig, seed: u64) -> Tally {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut state = ControlState::idle();
    let mut tally = Tally::default();
    for _ in 0..cfg.n_trials {
        let hl = !state.left.is_stored() && rng.random::<f64>() < cfg.ensemble_l.p1;
        let hr = !state.right.is_stored() && rng.random::<f64>() < cfg.ensemble_r.p1;
        let (next, event) = state.step((hl, hr), &cfg.control, cfg.mode).unwrap();
        match event {
            EventKind::Ready { age_l, age_r } => *tally.ready.entry(age_l.max(age_r)).or_default() += 1.0,
            EventKind::Flush { .. } => tally.flush += 1.0,
            EventKind::None => {}
        }
        state = next;
    }
    tally
}

fn engine(cfg: &RunConfig) -> Tally {
    let log = run(cfg).unwrap();
    let mut tally = Tally::default();
    for r in &log.records {
        match r.event {
            EventKind::Ready { age_l, age_r } => *tally.ready.entry(age_l.max(age_r)).or_default() += 1.0,
            EventKind::Flush { .. } => tally.flush += 1.0,
            EventKind::None => {}
        }
    }
    tally
}

fn same_rate(a: f64, b: f64) -> bool {
    (a - b).abs() <= 4.5 * (a + b).max(1.0).sqrt()
}

fn compare(cfg: &RunConfig) {
    let fast = engine(cfg);
    let slow = reference(cfg, cfg.seed);
    assert!(same_rate(fast.flush, slow.flush), "flush {} vs {}", fast.flush, slow.flush);
    for k in 0..cfg.control.n_max {
        let (a, b) = (
            fast.ready.get(&k).copied().unwrap_or(0.0),
            slow.ready.get(&k).copied().unwrap_or(0.0),
        );
        assert!(same_rate(a, b), "separation {k}: {a} vs {b}");
    }
    assert!(fast.ready.keys().all(|&k| k < cfg.control.n_max));
}

#[test]
fn conditional_mode_matches_reference() {
    let mut cfg = ideal_decay_config();
    cfg.n_trials = 4_000_000;
    cfg.control.n_max = 8;
    cfg.ensemble_l.p1 = 0.02;
    cfg.ensemble_r.p1 = 0.01;
    cfg.block_len = 1 << 16;
    compare(&cfg);
}

#[test]
fn baseline_mode_matches_reference() {
    let mut cfg = ideal_decay_config();
    cfg.n_trials = 4_000_000;
    cfg.mode = ControlMode::Baseline;
    cfg.ensemble_l.p1 = 0.05;
    cfg.ensemble_r.p1 = 0.05;
    compare(&cfg);
}

#[test]
fn single_trial_window_equals_baseline() {
    let mut cond = ideal_decay_config();
    cond.n_trials = 20_000_000;
    cond.control.n_max = 1;
    cond.ensemble_l.p1 = 0.01;
    cond.ensemble_r.p1 = 0.01;
    let base = RunConfig {
        mode: ControlMode::Baseline,
        ..cond.clone()
    };
    let (a, b) = (engine(&cond), engine(&base));
    assert_eq!(a.ready.keys().copied().collect::<Vec<_>>(), vec![0]);
    assert!(same_rate(a.ready[&0], b.ready[&0]));
    assert!(same_rate(a.flush, b.flush));
    let expected = cond.n_trials as f64 * 1e-4;
    assert!(same_rate(a.ready[&0], expected));
}
