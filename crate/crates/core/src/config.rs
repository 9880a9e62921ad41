//! Run configuration and its plain-text `section.key = value` format.
//!
//! ```text
//! # paper rates, crossed polarizations
//! run.n_trials = 100000000
//! run.seed = 7
//! ensembles.p1 = 0.0012        # sets both nodes
//! ensemble_r.pc = 0.091
//! control.n_max = 23
//! interference.polarization = orthogonal
//! ```
//!
//! Keys not mentioned keep their defaults. Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::control::ControlMode;
use crate::error::{Error, Result};
use crate::hom::PairDistribution;
use crate::photon::conditional_distribution;
use crate::types::{AnalysisWindows, ControlConfig, EnsembleParams, InterferenceConfig};

pub const DEFAULT_BLOCK_LEN: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ensemble_l: EnsembleParams,
    pub ensemble_r: EnsembleParams,
    pub control: ControlConfig,
    pub interference: InterferenceConfig,
    pub windows: AnalysisWindows,
    pub mode: ControlMode,
    pub n_trials: u64,
    pub seed: u64,
    /// Number of contiguous trial ranges handed to workers.
    pub shards: usize,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    /// Trials per independent block. Control state is reset at block starts.
    pub block_len: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            ensemble_l: EnsembleParams::default(),
            ensemble_r: EnsembleParams::default(),
            control: ControlConfig::default(),
            interference: InterferenceConfig::default(),
            windows: AnalysisWindows::default(),
            mode: ControlMode::Conditional,
            n_trials: 1_000_000,
            seed: 1,
            shards: 1,
            threads: 1,
            block_len: DEFAULT_BLOCK_LEN,
        }
    }
}

fn ensemble_keys(p: &EnsembleParams) -> [(&'static str, f64); 8] {
    [
        ("p1", p.p1),
        ("pc", p.pc),
        ("qc", p.qc),
        ("q1", p.q1),
        ("w", p.w),
        ("g12", p.g12),
        ("nc", p.nc),
        ("background_rate", p.background_rate),
    ]
}

fn set_ensemble(p: &mut EnsembleParams, key: &str, v: f64) -> bool {
    let slot = match key {
        "p1" => &mut p.p1,
        "pc" => &mut p.pc,
        "qc" => &mut p.qc,
        "q1" => &mut p.q1,
        "w" => &mut p.w,
        "g12" => &mut p.g12,
        "nc" => &mut p.nc,
        "background_rate" => &mut p.background_rate,
        _ => return false,
    };
    *slot = v;
    true
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

impl RunConfig {
    /// Checks every parameter and the truncated two-photon model at the
    /// freshest (largest) retrieval probabilities.
    pub fn validate(&self) -> Result<()> {
        let wrap = |prefix: &str, e: Error| match e {
            Error::InvalidParameter { field, reason } => Error::config(format!("{prefix}.{field}"), reason),
            other => other,
        };
        self.ensemble_l.validate().map_err(|e| wrap("ensemble_l", e))?;
        self.ensemble_r.validate().map_err(|e| wrap("ensemble_r", e))?;
        self.control.validate().map_err(|e| wrap("control", e))?;
        self.interference.validate().map_err(|e| wrap("interference", e))?;
        self.windows.validate().map_err(|e| wrap("windows", e))?;
        if self.shards == 0 {
            return Err(Error::config("run.shards", "must be >= 1"));
        }
        if self.block_len == 0 {
            return Err(Error::config("run.block_len", "must be >= 1"));
        }
        let l = conditional_distribution(self.ensemble_l.pc, self.ensemble_l.w)?;
        let r = conditional_distribution(self.ensemble_r.pc, self.ensemble_r.w)?;
        PairDistribution::new(&l, &r).map_err(|e| wrap("ensembles", e))?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected `key = value`, got `{line}`")))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Sets one `section.key` entry.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (section, name) = key
            .split_once('.')
            .ok_or_else(|| Error::config(key, "expected `section.key`"))?;
        let unknown = || Error::config(key, "unknown key");
        match section {
            "run" => match name {
                "n_trials" => self.n_trials = parse_value(key, value)?,
                "seed" => self.seed = parse_value(key, value)?,
                "shards" => self.shards = parse_value(key, value)?,
                "threads" => self.threads = parse_value(key, value)?,
                "block_len" => self.block_len = parse_value(key, value)?,
                "mode" => self.mode = parse_value(key, value)?,
                _ => return Err(unknown()),
            },
            "ensemble_l" | "ensemble_r" | "ensembles" => {
                let v: f64 = parse_value(key, value)?;
                let mut ok = true;
                if section != "ensemble_r" {
                    ok &= set_ensemble(&mut self.ensemble_l, name, v);
                }
                if section != "ensemble_l" {
                    ok &= set_ensemble(&mut self.ensemble_r, name, v);
                }
                if !ok {
                    return Err(unknown());
                }
            }
            "control" => match name {
                "n_max" => self.control.n_max = parse_value(key, value)?,
                "trial_duration_ns" => self.control.trial_duration_ns = parse_value(key, value)?,
                _ => return Err(unknown()),
            },
            "interference" => {
                let c = &mut self.interference;
                match name {
                    "xi" => c.xi = parse_value(key, value)?,
                    "envelope_width_ns" => c.envelope_width_ns = parse_value(key, value)?,
                    "delta_omega_rad_per_ns" => c.delta_omega_rad_per_ns = parse_value(key, value)?,
                    "splitter_ratio" => c.splitter_ratio = parse_value(key, value)?,
                    "polarization" => c.polarization = parse_value(key, value)?,
                    "pol_misalignment_offset" => c.pol_misalignment_offset = parse_value(key, value)?,
                    _ => return Err(unknown()),
                }
            }
            "windows" => {
                let w = &mut self.windows;
                match name {
                    "field1_ns" => w.field1_ns = parse_value(key, value)?,
                    "field2_ns" => w.field2_ns = parse_value(key, value)?,
                    "conditional_field2_ns" => w.conditional_field2_ns = parse_value(key, value)?,
                    "tau_halfwidth_ns" => w.tau_halfwidth_ns = parse_value(key, value)?,
                    _ => return Err(unknown()),
                }
            }
            _ => return Err(unknown()),
        }
        Ok(())
    }

    /// Every physics-relevant entry in canonical order. Worker layout
    /// (`shards`, `threads`) is left out since it cannot change results.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("run.n_trials".to_string(), self.n_trials.to_string()),
            ("run.seed".to_string(), self.seed.to_string()),
            ("run.mode".to_string(), self.mode.to_string()),
            ("run.block_len".to_string(), self.block_len.to_string()),
        ];
        for (section, p) in [("ensemble_l", &self.ensemble_l), ("ensemble_r", &self.ensemble_r)] {
            for (k, v) in ensemble_keys(p) {
                out.push((format!("{section}.{k}"), v.to_string()));
            }
        }
        let c = &self.control;
        out.push(("control.n_max".into(), c.n_max.to_string()));
        out.push(("control.trial_duration_ns".into(), c.trial_duration_ns.to_string()));
        let i = &self.interference;
        for (k, v) in [
            ("xi", i.xi.to_string()),
            ("envelope_width_ns", i.envelope_width_ns.to_string()),
            ("delta_omega_rad_per_ns", i.delta_omega_rad_per_ns.to_string()),
            ("splitter_ratio", i.splitter_ratio.to_string()),
            ("polarization", i.polarization.to_string()),
            ("pol_misalignment_offset", i.pol_misalignment_offset.to_string()),
        ] {
            out.push((format!("interference.{k}"), v));
        }
        let w = &self.windows;
        for (k, v) in [
            ("field1_ns", w.field1_ns),
            ("field2_ns", w.field2_ns),
            ("conditional_field2_ns", w.conditional_field2_ns),
            ("tau_halfwidth_ns", w.tau_halfwidth_ns),
        ] {
            out.push((format!("windows.{k}"), v.to_string()));
        }
        out
    }

    /// Full config file text, including the worker layout.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
            if k == "run.block_len" {
                let _ = writeln!(s, "run.shards = {}", self.shards);
                let _ = writeln!(s, "run.threads = {}", self.threads);
            }
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of the canonical entries.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Same config with another polarization, used for paired runs.
    pub fn with_polarization(&self, polarization: crate::types::Polarization) -> Self {
        let mut c = self.clone();
        c.interference.polarization = polarization;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Polarization;
    use proptest::prelude::*;

    #[test]
    fn round_trip_keeps_everything() {
        let mut cfg = RunConfig::default();
        cfg.ensemble_l.nc = f64::INFINITY;
        cfg.ensemble_r.pc = 0.091;
        cfg.interference.polarization = Polarization::Parallel;
        cfg.mode = ControlMode::Baseline;
        cfg.shards = 8;
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert!(cfg.to_text().contains("ensemble_l.nc = inf"));
    }

    #[test]
    fn comments_and_shared_section() {
        let cfg = RunConfig::parse("# header\nensembles.p1 = 0.01  # both\n\nensemble_r.p1=0.02\n").unwrap();
        assert_eq!(cfg.ensemble_l.p1, 0.01);
        assert_eq!(cfg.ensemble_r.p1, 0.02);
    }

    #[test]
    fn errors_name_the_key() {
        match RunConfig::parse("run.colour = red") {
            Err(Error::InvalidConfig { key, .. }) => assert_eq!(key, "run.colour"),
            other => panic!("{other:?}"),
        }
        match RunConfig::parse("control.n_max = many") {
            Err(Error::InvalidConfig { key, .. }) => assert_eq!(key, "control.n_max"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::parse("just words"), Err(Error::Parse { line: 1, .. })));
        let mut cfg = RunConfig::default();
        cfg.ensemble_l.p1 = 1.5;
        match cfg.validate() {
            Err(Error::InvalidConfig { key, .. }) => assert_eq!(key, "ensemble_l.p1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_ignores_worker_layout() {
        let a = RunConfig::default();
        let b = RunConfig { shards: 8, threads: 4, ..a.clone() };
        let c = RunConfig { seed: 2, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }

    proptest! {
        #[test]
        fn floats_survive_the_text_format(p1 in 0.0f64..1.0, xi in 0.0f64..1.0, seed in any::<u64>()) {
            let mut cfg = RunConfig { seed, ..Default::default() };
            cfg.ensemble_l.p1 = p1;
            cfg.interference.xi = xi;
            prop_assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
        }
    }
}
