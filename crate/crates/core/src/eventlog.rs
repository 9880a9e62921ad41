//! Sparse per-trial event logs and their text format.
//!
//! Only trials with a herald or a readout are stored. The file starts with a
//! header carrying the full configuration:
//!
//! ```text
//! # condmem 0.1.0 config_hash=3f2a... run.n_trials=1000000 run.seed=1 ...
//! 1043 1 0 none - - -
//! 1051 0 1 ready 8 0 a:-12,b:4
//! 2210 1 0 flush-L 23 - b:30*
//! ```
//!
//! Columns: trial, herald L, herald R, event, age L, age R, detections.
//! A detection is `<detector>:<time ns>`, with a trailing `*` for background.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::types::{Detection, Detector, Ensemble, EventKind, TrialRecord};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub config: RunConfig,
    pub records: Vec<TrialRecord>,
}

/// Counts over a whole log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LogSummary {
    pub n_trials: u64,
    pub heralds_l: u64,
    pub heralds_r: u64,
    pub ready: u64,
    pub flush: u64,
    /// Trials in which at least one ensemble was holding an excitation and
    /// therefore could not start a new preparation.
    pub gated_trials: u64,
    pub detections: u64,
    pub background_detections: u64,
}

impl LogSummary {
    /// Trials that began with both ensembles idle.
    pub fn armed_trials(&self) -> u64 {
        self.n_trials - self.gated_trials
    }

    /// Every herald is resolved by exactly one readout.
    pub fn is_conserved(&self) -> bool {
        self.heralds_l + self.heralds_r == 2 * self.ready + self.flush
    }
}

/// Trials after the herald during which the excitation behind `event` was
/// stored.
pub fn gated_trials(event: &EventKind) -> u64 {
    match *event {
        EventKind::Ready { age_l, age_r } => age_l.max(age_r) as u64,
        EventKind::Flush { age, .. } => age.saturating_sub(1) as u64,
        EventKind::None => 0,
    }
}

impl EventLog {
    pub fn n_trials(&self) -> u64 {
        self.config.n_trials
    }

    pub fn summary(&self) -> LogSummary {
        let mut s = LogSummary {
            n_trials: self.config.n_trials,
            ..Default::default()
        };
        for r in &self.records {
            s.heralds_l += r.herald_l as u64;
            s.heralds_r += r.herald_r as u64;
            match r.event {
                EventKind::Ready { .. } => s.ready += 1,
                EventKind::Flush { .. } => s.flush += 1,
                EventKind::None => {}
            }
            s.gated_trials += gated_trials(&r.event);
            s.detections += r.detections.len() as u64;
            s.background_detections += r.detections.iter().filter(|d| d.background).count() as u64;
        }
        s
    }

    pub fn header(&self) -> String {
        let mut h = format!("# condmem {VERSION} config_hash={}", self.config.hash());
        for (k, v) in self.config.entries() {
            h.push(' ');
            h.push_str(&k);
            h.push('=');
            h.push_str(&v);
        }
        h
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.header())?;
        let mut line = String::with_capacity(64);
        for r in &self.records {
            line.clear();
            format_record(r, &mut line);
            out.write_all(line.as_bytes())?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("log text is ASCII")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or(Error::EmptyLog)??;
        let config = parse_header(&header)?;
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(parse_record(&line, i + 2)?);
        }
        Ok(EventLog { config, records })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::read_from(text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

fn parse_header(line: &str) -> Result<RunConfig> {
    let body = line
        .strip_prefix("# condmem ")
        .ok_or_else(|| Error::parse(1, "missing `# condmem` header"))?;
    let mut parts = body.split_whitespace();
    let _version = parts.next().ok_or_else(|| Error::parse(1, "missing version"))?;
    let mut config = RunConfig::default();
    let mut hash = None;
    for part in parts {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::parse(1, format!("bad header entry `{part}`")))?;
        if k == "config_hash" {
            hash = Some(v.to_string());
        } else {
            config.set(k, v)?;
        }
    }
    match hash {
        Some(h) if h == config.hash() => Ok(config),
        Some(h) => Err(Error::parse(1, format!("config hash {h} does not match header entries"))),
        None => Err(Error::parse(1, "missing config_hash")),
    }
}

fn format_record(r: &TrialRecord, out: &mut String) {
    use std::fmt::Write as _;
    let _ = write!(out, "{} {} {} ", r.trial_index, r.herald_l as u8, r.herald_r as u8);
    match r.event {
        EventKind::None => out.push_str("none - -"),
        EventKind::Ready { age_l, age_r } => {
            let _ = write!(out, "ready {age_l} {age_r}");
        }
        EventKind::Flush { ensemble: Ensemble::L, age } => {
            let _ = write!(out, "flush-L {age} -");
        }
        EventKind::Flush { ensemble: Ensemble::R, age } => {
            let _ = write!(out, "flush-R - {age}");
        }
    }
    out.push(' ');
    if r.detections.is_empty() {
        out.push('-');
    }
    for (i, d) in r.detections.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let det = match d.detector {
            Detector::A => 'a',
            Detector::B => 'b',
        };
        let _ = write!(out, "{det}:{}", d.time_ns);
        if d.background {
            out.push('*');
        }
    }
}

fn parse_record(line: &str, n: usize) -> Result<TrialRecord> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 7 {
        return Err(Error::parse(n, format!("expected 7 columns, found {}", fields.len())));
    }
    let num = |s: &str| -> Result<u64> { s.parse().map_err(|_| Error::parse(n, format!("bad number `{s}`"))) };
    let flag = |s: &str| -> Result<bool> {
        match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(Error::parse(n, format!("bad herald flag `{s}`"))),
        }
    };
    let age = |s: &str| -> Result<u32> { s.parse().map_err(|_| Error::parse(n, format!("bad age `{s}`"))) };
    let event = match (fields[3], fields[4], fields[5]) {
        ("none", "-", "-") => EventKind::None,
        ("ready", l, r) => EventKind::Ready {
            age_l: age(l)?,
            age_r: age(r)?,
        },
        ("flush-L", a, "-") => EventKind::Flush {
            ensemble: Ensemble::L,
            age: age(a)?,
        },
        ("flush-R", "-", a) => EventKind::Flush {
            ensemble: Ensemble::R,
            age: age(a)?,
        },
        (k, _, _) => return Err(Error::parse(n, format!("bad event columns for `{k}`"))),
    };
    let mut detections = Vec::new();
    if fields[6] != "-" {
        for item in fields[6].split(',') {
            let (det, rest) = item
                .split_once(':')
                .ok_or_else(|| Error::parse(n, format!("bad detection `{item}`")))?;
            let detector = match det {
                "a" => Detector::A,
                "b" => Detector::B,
                _ => return Err(Error::parse(n, format!("bad detector `{det}`"))),
            };
            let (time, background) = match rest.strip_suffix('*') {
                Some(t) => (t, true),
                None => (rest, false),
            };
            let time_ns = time
                .parse()
                .map_err(|_| Error::parse(n, format!("bad time `{time}`")))?;
            detections.push(Detection {
                detector,
                time_ns,
                background,
            });
        }
    }
    Ok(TrialRecord {
        trial_index: num(fields[0])?,
        herald_l: flag(fields[1])?,
        herald_r: flag(fields[2])?,
        event,
        detections,
    })
}
