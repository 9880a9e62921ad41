//! Figure reproductions: run configurations, data tables and the comparison
//! of every simulated quantity with its closed form.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::analytics::fit::{fit_gaussian_counts, fit_modulated_gaussian, fit_p2c_p22c_pair, rad_per_ns_to_mhz, FitData, FitResult};
use crate::analytics::{
    coincidence_histogram, coincidence_histogram_in, cross_peak_ratio, detector_asymmetry, estimate_p1122,
    estimate_p11, estimate_p22c, estimate_p2c, side_peak_visibility, visibility, visibility_from_histograms,
    wavepacket_profiles, Estimate, Histogram, PeakSelector, Table,
};
use crate::config::RunConfig;
use crate::control::{p1122_decohered, p1122_ideal, p11_exact, ControlMode};
use crate::engine::run;
use crate::error::{Error, Result};
use crate::eventlog::EventLog;
use crate::hom::{cross_trial_ratio, effective_visibility};
use crate::model::{decay_point, p1122_model};
use crate::types::Polarization;

/// Trials in the original acquisition.
pub const PAPER_TRIALS: u64 = 3_360_000_000;
/// Trials per polarization for the interference runs at scale 1.
pub const HOM_TRIALS: u64 = 40_000_000;
/// Trials for the single-ensemble wavepacket runs at scale 1.
pub const WAVEPACKET_TRIALS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    FigA1,
    FigA2,
}

impl Figure {
    pub const ALL: [Figure; 5] = [Figure::Fig2, Figure::Fig3, Figure::Fig4, Figure::FigA1, Figure::FigA2];
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::FigA1 => "figA1",
            Figure::FigA2 => "figA2",
        })
    }
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "fig2" | "2" => Ok(Figure::Fig2),
            "fig3" | "3" => Ok(Figure::Fig3),
            "fig4" | "4" => Ok(Figure::Fig4),
            "figa1" | "a1" => Ok(Figure::FigA1),
            "figa2" | "a2" => Ok(Figure::FigA2),
            _ => Err(format!("unknown figure `{s}`; expected fig2, fig3, fig4, figA1 or figA2")),
        }
    }
}

/// One pass/fail comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    /// Allowed absolute deviation.
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            target,
            tolerance,
            passed: (value - target).abs() <= tolerance,
        }
    }

    /// `estimate` within `sigmas` standard errors of `target`.
    pub fn pull(name: impl Into<String>, estimate: &Estimate, target: f64, sigmas: f64) -> Self {
        Self::within(name, estimate.value, target, sigmas * estimate.error)
    }

    pub fn range(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Check {
            name: name.into(),
            value,
            target: 0.5 * (lo + hi),
            tolerance: 0.5 * (hi - lo),
            passed: value >= lo && value <= hi,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} (target {} +- {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.target,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct FigureReport {
    pub figure: String,
    pub config_hashes: Vec<String>,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub fits: Vec<(String, FitResult)>,
    /// Reported numbers that are not pass/fail.
    pub values: Vec<(String, f64)>,
}

impl FigureReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|v| v.1)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "figure = {}", self.figure);
        for h in &self.config_hashes {
            let _ = writeln!(s, "config_hash = {h}");
        }
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k} = {v}");
        }
        for (name, fit) in &self.fits {
            for line in fit.to_string().lines() {
                let _ = writeln!(s, "fit.{name}.{line}");
            }
        }
        for c in &self.checks {
            let _ = writeln!(s, "{c}");
        }
        let _ = writeln!(s, "passed = {}", self.passed());
        s
    }
}

fn scaled(n: u64, scale: f64) -> u64 {
    ((n as f64) * scale).round().max(1.0) as u64
}

/// Widens a tolerance set at full statistics for a run with fewer trials.
fn widen(tolerance: f64, scale: f64) -> f64 {
    tolerance / scale.min(1.0).sqrt()
}

/// Heralds and memory as measured in the experiment, with the imbalanced
/// splitter and the polarization loss.
pub fn paper_config() -> RunConfig {
    let mut cfg = RunConfig {
        n_trials: PAPER_TRIALS,
        ..Default::default()
    };
    for p in [&mut cfg.ensemble_l, &mut cfg.ensemble_r] {
        p.p1 = 0.0012;
        p.pc = 0.091;
        p.nc = 18.0;
        p.w = 0.17;
    }
    cfg.interference.splitter_ratio = 0.51;
    cfg.interference.pol_misalignment_offset = 0.08;
    cfg
}

/// Paper rates with single photons and an ideal splitter, the setting in
/// which the decay closed forms are exact.
pub fn ideal_decay_config() -> RunConfig {
    let mut cfg = paper_config();
    cfg.ensemble_l.w = 0.0;
    cfg.ensemble_r.w = 0.0;
    cfg.interference.splitter_ratio = 0.5;
    cfg.interference.pol_misalignment_offset = 0.0;
    cfg
}

/// Interference runs: frequent heralds and no decay so that every ready event
/// sees the same retrieval probability.
pub fn hom_config() -> RunConfig {
    let mut cfg = RunConfig {
        n_trials: HOM_TRIALS,
        ..Default::default()
    };
    for p in [&mut cfg.ensemble_l, &mut cfg.ensemble_r] {
        p.p1 = 0.05;
        p.pc = 0.085;
        p.nc = f64::INFINITY;
        p.w = 0.17;
    }
    cfg.interference.xi = 0.90;
    cfg
}

/// One ensemble alone, read out in its herald trial, with uncorrelated light.
pub fn wavepacket_config() -> RunConfig {
    let mut cfg = RunConfig {
        n_trials: WAVEPACKET_TRIALS,
        mode: ControlMode::Baseline,
        ..Default::default()
    };
    cfg.ensemble_l.p1 = 0.01;
    cfg.ensemble_l.pc = 0.085;
    cfg.ensemble_l.background_rate = 0.05;
    cfg.ensemble_r.p1 = 0.0;
    cfg
}

/// Run configurations used for `figure` at `scale` times the default trials.
pub fn figure_configs(figure: Figure, scale: f64, seed: u64) -> Vec<RunConfig> {
    let base = match figure {
        Figure::Fig2 => paper_config(),
        Figure::FigA1 | Figure::FigA2 => ideal_decay_config(),
        Figure::Fig3 => hom_config(),
        Figure::Fig4 => wavepacket_config(),
    };
    let cfg = RunConfig {
        seed,
        n_trials: scaled(base.n_trials, scale),
        ..base
    };
    match figure {
        Figure::Fig3 => vec![cfg.clone(), cfg.with_polarization(Polarization::Parallel)],
        _ => vec![cfg],
    }
}

pub fn reproduce(figure: Figure, scale: f64, seed: u64) -> Result<FigureReport> {
    if !(scale > 0.0) {
        return Err(Error::invalid("scale", "must be > 0"));
    }
    let configs = figure_configs(figure, scale, seed);
    let mut report = FigureReport {
        figure: figure.to_string(),
        config_hashes: configs.iter().map(RunConfig::hash).collect(),
        ..Default::default()
    };
    match figure {
        Figure::Fig2 => fig2(&run(&configs[0])?, &mut report)?,
        Figure::FigA1 => fig_a1(&run(&configs[0])?, &mut report)?,
        Figure::FigA2 => fig_a2(&run(&configs[0])?, &mut report)?,
        Figure::Fig3 => fig3(&run(&configs[0])?, &run(&configs[1])?, scale, &mut report)?,
        Figure::Fig4 => fig4(&run(&configs[0])?, scale, &mut report)?,
    }
    Ok(report)
}

fn max_abs(values: impl Iterator<Item = f64>) -> f64 {
    values.map(f64::abs).fold(0.0, f64::max)
}

fn fig2(log: &EventLog, report: &mut FigureReport) -> Result<()> {
    let cfg = &log.config;
    let hash = cfg.hash();
    let p1 = cfg.ensemble_l.p1;
    let n_max = cfg.control.n_max;
    let mut p11 = Table::new("fig2_p11", &hash, "p11 per armed trial versus N");
    let mut p1122 = Table::new("fig2_p1122", &hash, "p1122 per armed trial versus N");
    let mut pulls11 = Vec::new();
    let mut pulls1122 = Vec::new();
    for n in 1..=n_max {
        let e = estimate_p11(log, n)?;
        p11.push(n as f64, e.value, e.error);
        pulls11.push(e.pull(p11_exact(p1, n)));
        let j = estimate_p1122(log, n)?;
        p1122.push(n as f64, j.value, j.error);
        let model = p1122_model(cfg, n)?;
        // a handful of counts: judge on the Poisson error of the expectation
        let err = (model * j.denominator).max(1.0).sqrt() / j.denominator;
        pulls1122.push((j.value - model) / err);
    }
    report.tables.extend([p11, p1122]);

    let e11 = estimate_p11(log, n_max)?;
    let f11 = Estimate {
        value: e11.value / (p1 * p1),
        error: e11.error / (p1 * p1),
        ..e11
    };
    report.checks.push(Check::pull("F11", &f11, p11_exact(p1, n_max) / (p1 * p1), 3.0));
    report.checks.push(Check::within("p11 max pull over N", max_abs(pulls11.into_iter()), 0.0, 3.0));
    report
        .checks
        .push(Check::within("p1122 max pull over N", max_abs(pulls1122.into_iter()), 0.0, 3.0));

    let e1122 = estimate_p1122(log, n_max)?;
    let baseline = p1122_model(cfg, 1)?;
    let f1122 = Estimate {
        value: e1122.value / baseline,
        error: e1122.error / baseline,
        ..e1122
    };
    let model_f = p1122_model(cfg, n_max)? / baseline;
    report.checks.push(Check::pull("F1122 versus full model", &f1122, model_f, 3.0));
    let pc = cfg.ensemble_l.pc;
    let nc = cfg.ensemble_l.nc;
    report.values.extend([
        ("p11_counts".into(), e11.count as f64),
        ("p1122_counts".into(), e1122.count as f64),
        ("F11".into(), f11.value),
        ("F11_error".into(), f11.error),
        ("F11_exact".into(), p11_exact(p1, n_max) / (p1 * p1)),
        ("F11_small_p1".into(), (2 * n_max - 1) as f64),
        ("F1122".into(), f1122.value),
        ("F1122_error".into(), f1122.error),
        ("F1122_full_model".into(), model_f),
        (
            "F1122_decohered_formula".into(),
            p1122_decohered(p1, pc, nc, n_max) / p1122_decohered(p1, pc, nc, 1),
        ),
    ]);
    if let Ok(asym) = detector_asymmetry(log) {
        report.values.push(("detector_b_over_a".into(), asym.value));
        report.values.push(("detector_b_over_a_error".into(), asym.error));
    }
    Ok(())
}

fn decay_tables(log: &EventLog, report: &mut FigureReport) -> Result<FitData> {
    let cfg = &log.config;
    let hash = cfg.hash();
    let mut p22c = Table::new("figA1_decay", &hash, "p22c versus separation N");
    let mut p2c_a = Table::new("figA1_decay_p2c_a", &hash, "p2c on detector a versus separation N");
    let mut p2c_b = Table::new("figA1_decay_p2c_b", &hash, "p2c on detector b versus separation N");
    let (mut x0, mut y0, mut e0) = (vec![], vec![], vec![]);
    let (mut x1, mut y1, mut e1) = (vec![], vec![], vec![]);
    for n in 0..cfg.control.n_max {
        let j = estimate_p22c(log, n)?;
        if j.denominator == 0.0 {
            continue;
        }
        let s = estimate_p2c(log, n)?;
        p22c.push(n as f64, j.value, j.error);
        p2c_a.push(n as f64, s.a.value, s.a.error);
        p2c_b.push(n as f64, s.b.value, s.b.error);
        x0.push(n as f64);
        y0.push(j.value);
        e0.push((j.count.max(1) as f64).sqrt() / j.denominator);
        for e in [s.a, s.b] {
            x1.push(n as f64);
            y1.push(e.value);
            e1.push((e.count.max(1) as f64).sqrt() / e.denominator);
        }
    }
    report.tables.extend([p22c, p2c_a, p2c_b]);
    Ok(FitData::joined(&FitData::new(x0, y0, e0)?, &FitData::new(x1, y1, e1)?))
}

fn fig_a1(log: &EventLog, report: &mut FigureReport) -> Result<()> {
    let data = decay_tables(log, report)?;
    let fit = fit_p2c_p22c_pair(&data)?;
    let cfg = &log.config;
    let (pc, pc_err) = fit.get("pc").unwrap_or_default();
    let (nc, nc_err) = fit.get("Nc").unwrap_or_default();
    let (pc0, nc0) = (cfg.ensemble_l.pc, cfg.ensemble_l.nc);
    report.checks.push(Check::within("fitted pc within 5%", pc, pc0, 0.05 * pc0));
    report.checks.push(Check::within("fitted Nc within 5%", nc, nc0, 0.05 * nc0));
    report.checks.push(Check::within("fitted pc within 2 sigma", pc, pc0, 2.0 * pc_err));
    report.checks.push(Check::within("fitted Nc within 2 sigma", nc, nc0, 2.0 * nc_err));
    let mut pulls = Vec::new();
    for n in 0..cfg.control.n_max {
        let j = estimate_p22c(log, n)?;
        if j.denominator > 0.0 {
            let expected = decay_point(cfg, n)?.p22c;
            pulls.push((j.value - expected) / ((expected * j.denominator).max(1.0).sqrt() / j.denominator));
        }
    }
    report.checks.push(Check::within("p22c max pull over N", max_abs(pulls.into_iter()), 0.0, 3.5));
    if let Ok(asym) = detector_asymmetry(log) {
        report.values.push(("detector_b_over_a".into(), asym.value));
    }
    report.fits.push(("p2c_p22c".into(), fit));
    Ok(())
}

fn fig_a2(log: &EventLog, report: &mut FigureReport) -> Result<()> {
    let cfg = &log.config;
    let hash = cfg.hash();
    let (p1, pc, nc) = (cfg.ensemble_l.p1, cfg.ensemble_l.pc, cfg.ensemble_l.nc);
    let n_max = cfg.control.n_max;
    let mut decohered = Table::new("figA2_theory", &hash, "p1122 with memory decay versus N");
    let mut ideal = Table::new("figA2_theory_ideal", &hash, "p1122 for an ideal memory versus N");
    let mut mc = Table::new("figA2_mc", &hash, "simulated p1122 versus N");
    let mut pulls = Vec::new();
    for n in 1..=n_max {
        let theory = p1122_decohered(p1, pc, nc, n);
        decohered.push(n as f64, theory, 0.0);
        ideal.push(n as f64, p1122_ideal(p1, pc, n), 0.0);
        let e = estimate_p1122(log, n)?;
        mc.push(n as f64, e.value, e.error);
        pulls.push((e.value - theory) / ((theory * e.denominator).max(1.0).sqrt() / e.denominator));
    }
    report.tables.extend([decohered, ideal, mc]);
    report.checks.push(Check::within("p1122 max pull over N", max_abs(pulls.into_iter()), 0.0, 3.0));
    let e = estimate_p1122(log, n_max)?;
    let base = p1122_decohered(p1, pc, nc, 1);
    let f = Estimate {
        value: e.value / base,
        error: e.error / base,
        ..e
    };
    let oracle = p1122_decohered(p1, pc, nc, n_max) / base;
    report.checks.push(Check::pull("F1122", &f, oracle, 3.0));
    report.checks.push(Check::range("F1122 in [22, 30]", f.value, 22.0, 30.0));
    report.values.extend([
        ("F1122".into(), f.value),
        ("F1122_error".into(), f.error),
        ("F1122_formula".into(), oracle),
        ("ideal_over_decohered".into(), p1122_ideal(p1, pc, n_max) / p1122_decohered(p1, pc, nc, n_max)),
    ]);
    Ok(())
}

fn density_fit(h: &Histogram) -> Result<FitResult> {
    let sum = h.in_range();
    let width = h.bin_width(0);
    fit_gaussian_counts(h.centers(), &h.counts, 1.0 / (sum.max(1.0) * width))
}

fn fig3(perp: &EventLog, par: &EventLog, scale: f64, report: &mut FigureReport) -> Result<()> {
    let cfg = &perp.config;
    let hash = cfg.hash();
    let field2 = cfg.windows.field2();
    let hp = coincidence_histogram_in(perp, Polarization::Orthogonal, PeakSelector::SameTrial, field2)?;
    let hq = coincidence_histogram_in(par, Polarization::Parallel, PeakSelector::SameTrial, field2)?;
    report.tables.push(Table::from_histogram(
        "fig3_coincidence_orthogonal",
        &hash,
        "same-trial coincidences per ready event versus tau, crossed polarizations",
        &hp,
    ));
    report.tables.push(Table::from_histogram(
        "fig3_coincidence_parallel",
        par.config.hash(),
        "same-trial coincidences per ready event versus tau, parallel polarizations",
        &hq,
    ));

    let cp = coincidence_histogram(perp, Polarization::Orthogonal, PeakSelector::SameTrial)?;
    let cq = coincidence_histogram(par, Polarization::Parallel, PeakSelector::SameTrial)?;
    let mut vt = Table::new("fig3_coincidence", &hash, "visibility versus tau integration half-width");
    for half in (2..=44).step_by(2) {
        let v = visibility_from_histograms(&cp, &cq, half as f64)?;
        vt.push(half as f64, v.value, v.error);
    }
    report.tables.push(vt);

    let (w, xi) = (cfg.ensemble_l.w, cfg.interference.xi);
    let v_full = visibility(perp, par, cfg.windows.tau_halfwidth_ns)?;
    let v6 = visibility(perp, par, 6.0)?;
    report.checks.push(Check::within("V integrated", v_full.value, 0.77, widen(0.06, scale)));
    report.checks.push(Check::within("V within 6 ns", v6.value, 0.80, widen(0.10, scale)));
    report.checks.push(Check::pull("V integrated versus model", &v_full, effective_visibility(xi, w), 3.0));

    let g = fit_gaussian_counts(hp.centers(), &hp.counts, 1.0 / hp.scale)?;
    let t_expected = cfg.interference.coincidence_width_ns();
    report.checks.push(Check::within("T", g.value("T"), t_expected, widen(0.5, scale)));
    let m = fit_modulated_gaussian(
        &FitData::from_counts(hq.centers(), &hq.counts, 1.0 / hq.scale)?,
        Some((g.value("p0"), g.value("T"))),
    )?;
    let (v_fit, v_fit_err) = m.get("V").unwrap_or_default();
    report
        .checks
        .push(Check::within("V_fit versus model", v_fit, effective_visibility(xi, w), 3.0 * v_fit_err.max(1e-12)));

    let ratio = cross_peak_ratio(perp, 5)?;
    let r = cross_trial_ratio(cfg.ensemble_l.pc, w)?;
    report.checks.push(Check::pull("center/side ratio", &ratio, r.r, 3.0));
    let side = side_peak_visibility(perp, par, 5)?;
    report.checks.push(Check::within("side-peak visibility", side.value, 0.0, widen(0.05, scale)));

    let dw = m.value("dw");
    report.values.extend([
        ("coincidences_orthogonal".into(), cp.in_range()),
        ("coincidences_parallel".into(), cq.in_range()),
        ("V".into(), v_full.value),
        ("V_error".into(), v_full.error),
        ("V_6ns".into(), v6.value),
        ("V_6ns_error".into(), v6.error),
        ("V_model".into(), effective_visibility(xi, w)),
        ("V_fit".into(), v_fit),
        ("dw_over_2pi_MHz".into(), rad_per_ns_to_mhz(dw)),
        ("dw_over_2pi_MHz_error".into(), rad_per_ns_to_mhz(m.errors[3])),
        ("time_bandwidth".into(), g.value("T") * rad_per_ns_to_mhz(dw) / 1000.0),
        ("center_side_ratio".into(), ratio.value),
        ("center_side_ratio_error".into(), ratio.error),
        ("r".into(), r.r),
        ("side_peak_V".into(), side.value),
        ("side_peak_V_error".into(), side.error),
    ]);
    report.fits.push(("gaussian".into(), g));
    report.fits.push(("modulated_gaussian".into(), m));
    Ok(())
}

fn fig4(log: &EventLog, scale: f64, report: &mut FigureReport) -> Result<()> {
    let hash = log.config.hash();
    let cond = wavepacket_profiles(log, true);
    let uncond = wavepacket_profiles(log, false);
    report.tables.push(Table::from_histogram(
        "fig4_wavepackets",
        &hash,
        "conditional field-2 detection-time density",
        &cond,
    ));
    report.tables.push(Table::from_histogram(
        "fig4_wavepackets_unconditional",
        &hash,
        "unconditional field-2 detection-time density",
        &uncond,
    ));
    let gc = density_fit(&cond)?;
    let gu = density_fit(&uncond)?;
    let tc = log.config.interference.envelope_width_ns;
    report.checks.push(Check::within("conditional width", gc.value("T"), tc, widen(0.5, scale)));
    let tail = |h: &Histogram| {
        let all = h.in_range();
        (all - h.counts_within(30.0)) / all.max(1.0)
    };
    report.values.extend([
        ("conditional_width_ns".into(), gc.value("T")),
        ("unconditional_width_ns".into(), gu.value("T")),
        ("conditional_tail_fraction".into(), tail(&cond)),
        ("unconditional_tail_fraction".into(), tail(&uncond)),
    ]);
    if log.config.ensemble_l.background_rate > 0.0 {
        report
            .checks
            .push(Check::range("unconditional tail excess", tail(&uncond) - tail(&cond), 0.0, 1.0));
    }
    report.fits.push(("conditional_gaussian".into(), gc));
    report.fits.push(("unconditional_gaussian".into(), gu));
    Ok(())
}

/// Outcome of one grid point of [`selfcheck`].
#[derive(Debug, Clone, PartialEq)]
pub struct SelfcheckPoint {
    pub p1: f64,
    pub pc: f64,
    pub nc: f64,
    pub checks: Vec<Check>,
}

/// Runs every estimator against its closed form over a 3x3x3 grid of
/// `(p1, pc, Nc)`. Each point compares three pooled quantities; the
/// threshold of 4 sigma keeps the family-wise false-alarm rate of the 81
/// comparisons near 0.5%.
pub fn selfcheck(seed: u64, n_trials: u64) -> Result<Vec<SelfcheckPoint>> {
    let mut out = Vec::new();
    for (i, &p1) in [0.005, 0.01, 0.02].iter().enumerate() {
        for (j, &pc) in [0.05, 0.1, 0.2].iter().enumerate() {
            for (k, &nc) in [5.0, 18.0, 50.0].iter().enumerate() {
                let mut cfg = ideal_decay_config();
                cfg.n_trials = n_trials;
                cfg.seed = seed.wrapping_add((i * 9 + j * 3 + k) as u64);
                for p in [&mut cfg.ensemble_l, &mut cfg.ensemble_r] {
                    p.p1 = p1;
                    p.pc = pc;
                    p.nc = nc;
                }
                let log = run(&cfg)?;
                let n = cfg.control.n_max;
                let mut checks = Vec::new();
                let e = estimate_p11(&log, n)?;
                checks.push(Check::pull("p11", &e, p11_exact(p1, n), 4.0));
                let e = estimate_p1122(&log, n)?;
                let expected = p1122_decohered(p1, pc, nc, n);
                let err = (expected * e.denominator).sqrt() / e.denominator;
                checks.push(Check::within("p1122", e.value, expected, 4.0 * err));
                let (mut count, mut expected) = (0.0, 0.0);
                for s in 0..n {
                    let j = estimate_p22c(&log, s)?;
                    count += j.count as f64;
                    expected += j.denominator * decay_point(&cfg, s)?.p22c;
                }
                checks.push(Check::within("pooled p22c counts", count, expected, 4.0 * expected.sqrt()));
                out.push(SelfcheckPoint { p1, pc, nc, checks });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_names() {
        for f in Figure::ALL {
            assert_eq!(f.to_string().parse::<Figure>().unwrap(), f);
        }
        assert!("fig9".parse::<Figure>().is_err());
    }

    #[test]
    fn configs_validate_and_scale() {
        for f in Figure::ALL {
            for c in figure_configs(f, 0.01, 3) {
                c.validate().unwrap();
                assert_eq!(c.seed, 3);
            }
        }
        assert_eq!(figure_configs(Figure::Fig2, 0.5, 1)[0].n_trials, PAPER_TRIALS / 2);
        let pair = figure_configs(Figure::Fig3, 1.0, 1);
        assert_eq!(pair[1].interference.polarization, Polarization::Parallel);
    }

    #[test]
    fn checks() {
        assert!(Check::within("x", 1.0, 1.05, 0.1).passed);
        assert!(!Check::range("y", 31.0, 22.0, 30.0).passed);
        assert_eq!(widen(0.06, 0.01), 0.6);
        assert_eq!(widen(0.06, 4.0), 0.06);
    }
}
