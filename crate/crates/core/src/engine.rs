//! Monte Carlo driver: heralds, control, readout and detection.
//!
//! Trials are grouped into fixed-length blocks. Each block starts with both
//! ensembles idle and is simulated on its own, so a run gives the same log no
//! matter how blocks are spread over shards and threads. An excitation still
//! stored when its block ends is flushed on the block's last trial.
//!
//! While both ensembles are idle nothing happens until the next herald, so
//! the engine draws the length of that idle stretch directly from its
//! geometric distribution instead of visiting every trial.

use rand::RngCore;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eventlog::EventLog;
use crate::hom::{
    one_from_each_split_probability, polarization_adjusted, sample_detection_times, two_from_one_split_probability,
    Origin, PairDistribution, SampledTimes,
};
use crate::photon::{conditional_distribution, retrieval_decay, sample_photon_number, Field2Distribution};
use crate::rng::{threshold, Stream, StreamKey, TrialRng, UNIT_BITS, UNIT_SCALE};
use crate::types::{
    quantize_time, ControlState, Detection, Detector, Ensemble, EventKind, Status, TimeWindow, TrialRecord,
};

/// Runs the whole experiment described by `config`.
///
/// ```
/// use condmem::{run, RunConfig};
///
/// let mut cfg = RunConfig::default();
/// cfg.n_trials = 200_000;
/// let log = run(&cfg).unwrap();
/// assert!(log.summary().is_conserved());
/// ```
pub fn run(config: &RunConfig) -> Result<EventLog> {
    config.validate()?;
    let sim = Simulator::new(config);
    let blocks = block_ranges(config.n_trials, config.block_len);
    let shards = shard_ranges(blocks.len(), config.shards);

    let work = |&(lo, hi): &(usize, usize)| -> Result<Vec<TrialRecord>> {
        let mut out = Vec::new();
        for &(start, end) in &blocks[lo..hi] {
            sim.block(start, end, &mut out)?;
        }
        Ok(out)
    };
    let parts: Vec<Result<Vec<TrialRecord>>> = if config.threads == 1 || shards.len() == 1 {
        shards.iter().map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::config("run.threads", e.to_string()))?;
        pool.install(|| shards.par_iter().map(work).collect())
    };

    let mut records = Vec::with_capacity(parts.iter().map(|p| p.as_ref().map_or(0, Vec::len)).sum());
    for part in parts {
        records.extend(part?);
    }
    if records.windows(2).any(|w| w[0].trial_index >= w[1].trial_index) {
        return Err(Error::ShardMergeMismatch("trial indices out of order after merge".into()));
    }
    if let Some(last) = records.last() {
        if last.trial_index >= config.n_trials {
            return Err(Error::ShardMergeMismatch("record beyond the last trial".into()));
        }
    }
    Ok(EventLog {
        config: config.clone(),
        records,
    })
}

/// `[start, end)` trial ranges of every block.
pub fn block_ranges(n_trials: u64, block_len: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::with_capacity((n_trials / block_len.max(1) + 1) as usize);
    let mut start = 0;
    while start < n_trials {
        let end = (start + block_len).min(n_trials);
        out.push((start, end));
        start = end;
    }
    out
}

/// Splits `n_blocks` into `shards` contiguous ranges; the last one takes the
/// remainder.
pub fn shard_ranges(n_blocks: usize, shards: usize) -> Vec<(usize, usize)> {
    let shards = shards.max(1);
    let base = n_blocks / shards;
    (0..shards)
        .map(|i| {
            let lo = i * base;
            let hi = if i + 1 == shards { n_blocks } else { lo + base };
            (lo, hi)
        })
        .filter(|(lo, hi)| hi > lo)
        .collect()
}

struct Simulator<'a> {
    cfg: &'a RunConfig,
    herald: StreamKey,
    readout: StreamKey,
    /// `ln P(no herald in a trial)` with both ensembles idle.
    ln_quiet: f64,
    /// Thresholds on the 53-bit pattern draw: both, else L only, else R only.
    both_below: u64,
    left_below: u64,
    herald_l: u64,
    herald_r: u64,
    window: TimeWindow,
    split_each: f64,
    split_same: f64,
}

impl<'a> Simulator<'a> {
    fn new(cfg: &'a RunConfig) -> Self {
        let (pl, pr) = (cfg.ensemble_l.p1, cfg.ensemble_r.p1);
        let any = pl + pr - pl * pr;
        let (both, left) = if any > 0.0 {
            (pl * pr / any, pl * pr / any + pl * (1.0 - pr) / any)
        } else {
            (0.0, 0.0)
        };
        Simulator {
            cfg,
            herald: StreamKey::new(cfg.seed, Stream::Herald),
            readout: StreamKey::new(cfg.seed, Stream::Readout),
            ln_quiet: (-pl).ln_1p() + (-pr).ln_1p(),
            both_below: threshold(both),
            left_below: threshold(left),
            herald_l: threshold(pl),
            herald_r: threshold(pr),
            window: cfg.windows.field2(),
            split_each: one_from_each_split_probability(&cfg.interference),
            split_same: two_from_one_split_probability(&cfg.interference),
        }
    }

    fn block(&self, start: u64, end: u64, out: &mut Vec<TrialRecord>) -> Result<()> {
        let control = &self.cfg.control;
        let mode = self.cfg.mode;
        let mut state = ControlState::idle();
        let mut t = start;
        while t < end {
            let heralds = if state.is_idle() {
                let mut rng = self.herald.trial(t);
                let Some(gap) = self.idle_gap(&mut rng) else { break };
                if gap >= end - t {
                    break;
                }
                t += gap;
                let bits = rng.next_u64() >> (64 - UNIT_BITS);
                if bits < self.both_below {
                    (true, true)
                } else if bits < self.left_below {
                    (true, false)
                } else {
                    (false, true)
                }
            } else {
                let bits = self.herald.trial(t).first_bits();
                match (state.left, state.right) {
                    (Status::Idle, _) => (bits < self.herald_l, false),
                    (_, Status::Idle) => (false, bits < self.herald_r),
                    _ => unreachable!("both stored without a ready"),
                }
            };
            state.trial_index = t;
            let (next, event) = state.step(heralds, control, mode)?;
            state = next;
            if heralds.0 || heralds.1 || event.is_readout() {
                out.push(self.record(t, heralds, event)?);
            }
            t += 1;
        }
        let pending = [(Ensemble::L, state.left), (Ensemble::R, state.right)]
            .into_iter()
            .find_map(|(e, s)| s.age().map(|a| (e, a)));
        if let Some((ensemble, age)) = pending {
            let event = EventKind::Flush { ensemble, age };
            let last = end - 1;
            match out.last_mut() {
                // herald on the block's last trial: the flush shares its record
                Some(r) if r.trial_index == last => *r = self.record(last, (r.herald_l, r.herald_r), event)?,
                _ => out.push(self.record(last, (false, false), event)?),
            }
        }
        Ok(())
    }

    /// Number of quiet trials before the next herald, or `None` if heralds
    /// are impossible.
    fn idle_gap(&self, rng: &mut TrialRng) -> Option<u64> {
        if self.ln_quiet == 0.0 {
            return None;
        }
        if self.ln_quiet == f64::NEG_INFINITY {
            rng.skip_first();
            return Some(0);
        }
        // uniform on (0, 1]
        let u = ((rng.next_u64() >> (64 - UNIT_BITS)) + 1) as f64 / UNIT_SCALE;
        let gap = (u.ln() / self.ln_quiet).floor();
        Some(if gap >= u64::MAX as f64 { u64::MAX } else { gap as u64 })
    }

    fn record(&self, t: u64, heralds: (bool, bool), event: EventKind) -> Result<TrialRecord> {
        let detections = match event {
            EventKind::None => Vec::new(),
            _ => self.readout(t, event)?,
        };
        Ok(TrialRecord {
            trial_index: t,
            herald_l: heralds.0,
            herald_r: heralds.1,
            event,
            detections,
        })
    }

    fn field(&self, ensemble: Ensemble, age: u32) -> Result<Field2Distribution> {
        let p = match ensemble {
            Ensemble::L => &self.cfg.ensemble_l,
            Ensemble::R => &self.cfg.ensemble_r,
        };
        let d = conditional_distribution(retrieval_decay(p.pc, age as f64, p.nc), p.w)?;
        Ok(match ensemble {
            Ensemble::L => polarization_adjusted(&d, &self.cfg.interference),
            Ensemble::R => d,
        })
    }

    fn readout(&self, t: u64, event: EventKind) -> Result<Vec<Detection>> {
        let mut rng = self.readout.trial(t);
        let mut raw: Vec<(Detector, f64, bool)> = Vec::with_capacity(4);
        let (n_l, n_r, with_l, with_r) = match event {
            EventKind::Ready { age_l, age_r } => {
                let pair = PairDistribution::new(&self.field(Ensemble::L, age_l)?, &self.field(Ensemble::R, age_r)?)?;
                let (a, b) = pair.sample(rng.uniform());
                (a, b, true, true)
            }
            EventKind::Flush { ensemble, age } => {
                let n = sample_photon_number(&self.field(ensemble, age)?, rng.uniform());
                match ensemble {
                    Ensemble::L => (n, 0, true, false),
                    Ensemble::R => (0, n, false, true),
                }
            }
            EventKind::None => return Ok(Vec::new()),
        };
        self.route(n_l, n_r, &mut rng, &mut raw)?;
        for (ensemble, active) in [(Ensemble::L, with_l), (Ensemble::R, with_r)] {
            let p = match ensemble {
                Ensemble::L => &self.cfg.ensemble_l,
                Ensemble::R => &self.cfg.ensemble_r,
            };
            if active && p.background_rate > 0.0 && rng.uniform() < p.background_rate {
                let detector = self.port(ensemble, &mut rng);
                let h = self.window.half_width_ns;
                let time = -h + 2.0 * h * rng.uniform();
                raw.push((detector, time, true));
            }
        }
        Ok(raw
            .into_iter()
            .map(|(detector, t, background)| Detection {
                detector,
                time_ns: quantize_time(t),
                background,
            })
            .filter(|d| self.window.contains(d.time_ns))
            .collect())
    }

    /// Output port of a single photon entering from `ensemble`'s side.
    fn port(&self, ensemble: Ensemble, rng: &mut TrialRng) -> Detector {
        let to_a = match ensemble {
            Ensemble::L => self.cfg.interference.splitter_ratio,
            Ensemble::R => 1.0 - self.cfg.interference.splitter_ratio,
        };
        if rng.uniform() < to_a {
            Detector::A
        } else {
            Detector::B
        }
    }

    fn route(&self, n_l: u8, n_r: u8, rng: &mut TrialRng, raw: &mut Vec<(Detector, f64, bool)>) -> Result<()> {
        let ic = &self.cfg.interference;
        let (t, r) = ic.splitter();
        let pair = |origin, rng: &mut TrialRng| -> Result<(f64, f64)> {
            match sample_detection_times(origin, ic, rng)? {
                SampledTimes::Pair(x, y) => Ok((x, y)),
                SampledTimes::Single(x) => Ok((x, x)),
            }
        };
        match (n_l, n_r) {
            (0, 0) => {}
            (1, 0) | (0, 1) => {
                let from = if n_l == 1 { Ensemble::L } else { Ensemble::R };
                let d = self.port(from, rng);
                if let SampledTimes::Single(x) = sample_detection_times(Origin::Single, ic, rng)? {
                    raw.push((d, x, false));
                }
            }
            (1, 1) => {
                if rng.uniform() < self.split_each {
                    let (x, y) = pair(Origin::OneFromEachSplit, rng)?;
                    raw.push((Detector::A, x, false));
                    raw.push((Detector::B, y, false));
                } else {
                    let d = if rng.uniform() < 0.5 { Detector::A } else { Detector::B };
                    let (x, y) = pair(Origin::OneFromEachBunched, rng)?;
                    raw.push((d, x, false));
                    raw.push((d, y, false));
                }
            }
            (2, 0) | (0, 2) => {
                let (x, y) = pair(Origin::TwoFromOne, rng)?;
                if rng.uniform() < self.split_same {
                    raw.push((Detector::A, x, false));
                    raw.push((Detector::B, y, false));
                } else {
                    let to_a = if n_l == 2 { t * t } else { r * r };
                    let d = if rng.uniform() * (t * t + r * r) < to_a {
                        Detector::A
                    } else {
                        Detector::B
                    };
                    raw.push((d, x, false));
                    raw.push((d, y, false));
                }
            }
            _ => unreachable!("at most two photons per readout"),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlMode;

    fn small() -> RunConfig {
        let mut cfg = RunConfig {
            n_trials: 300_000,
            block_len: 50_000,
            ..Default::default()
        };
        cfg.ensemble_l.p1 = 0.01;
        cfg.ensemble_r.p1 = 0.01;
        cfg
    }

    #[test]
    fn block_and_shard_layout() {
        assert_eq!(block_ranges(10, 4), vec![(0, 4), (4, 8), (8, 10)]);
        assert_eq!(block_ranges(0, 4), vec![]);
        assert_eq!(shard_ranges(7, 3), vec![(0, 2), (2, 4), (4, 7)]);
        assert_eq!(shard_ranges(2, 8), vec![(0, 2)]);
    }

    #[test]
    fn zero_rates_give_empty_log() {
        let mut cfg = small();
        cfg.ensemble_l.p1 = 0.0;
        cfg.ensemble_r.p1 = 0.0;
        assert!(run(&cfg).unwrap().records.is_empty());
    }

    #[test]
    fn conservation_and_order() {
        let log = run(&small()).unwrap();
        let s = log.summary();
        assert!(s.is_conserved(), "{s:?}");
        assert!(s.ready > 700, "{s:?}");
        for r in &log.records {
            if let EventKind::Ready { age_l, age_r } = r.event {
                assert!(age_l.min(age_r) == 0 && age_l.max(age_r) < 23);
            }
        }
    }

    #[test]
    fn certain_heralds_always_ready_at_once() {
        let mut cfg = small();
        cfg.n_trials = 1000;
        cfg.ensemble_l.p1 = 1.0;
        cfg.ensemble_r.p1 = 1.0;
        let log = run(&cfg).unwrap();
        assert_eq!(log.records.len(), 1000);
        assert!(log.records.iter().all(|r| r.event == EventKind::Ready { age_l: 0, age_r: 0 }));
    }

    #[test]
    fn baseline_only_reads_out_in_the_herald_trial() {
        let mut cfg = small();
        cfg.mode = ControlMode::Baseline;
        let log = run(&cfg).unwrap();
        for r in &log.records {
            match r.event {
                EventKind::Ready { age_l, age_r } => assert!(r.herald_l && r.herald_r && age_l == 0 && age_r == 0),
                EventKind::Flush { age, .. } => assert_eq!(age, 0),
                EventKind::None => panic!("baseline never stores"),
            }
        }
    }
}
