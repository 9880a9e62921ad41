//! The standard set of tables and numbers extracted from one log, or from a
//! crossed/parallel pair of logs.

use crate::analytics::estimate::{
    coincidence_histogram_in, cross_peak_ratio, detector_asymmetry, estimate_p1122, estimate_p11, estimate_p22c,
    estimate_p2c, side_peak_visibility, visibility, wavepacket_profiles, PeakSelector,
};
use crate::analytics::tables::Table;
use crate::error::Result;
use crate::eventlog::EventLog;

#[derive(Debug, Clone, Default)]
pub struct Analysis {
    pub tables: Vec<Table>,
    pub values: Vec<(String, f64)>,
}

impl Analysis {
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub fn analyze(log: &EventLog, parallel: Option<&EventLog>) -> Result<Analysis> {
    let cfg = &log.config;
    let hash = cfg.hash();
    let n_max = cfg.control.n_max;
    let mut out = Analysis::default();

    let s = log.summary();
    out.values.extend([
        ("n_trials".into(), s.n_trials as f64),
        ("armed_trials".into(), s.armed_trials() as f64),
        ("heralds_l".into(), s.heralds_l as f64),
        ("heralds_r".into(), s.heralds_r as f64),
        ("ready".into(), s.ready as f64),
        ("flush".into(), s.flush as f64),
        ("detections".into(), s.detections as f64),
        ("background_detections".into(), s.background_detections as f64),
    ]);

    let mut p11 = Table::new("p11", &hash, "p11 per armed trial versus N");
    let mut p1122 = Table::new("p1122", &hash, "p1122 per armed trial versus N");
    for n in 1..=n_max {
        let e = estimate_p11(log, n)?;
        p11.push(n as f64, e.value, e.error);
        let e = estimate_p1122(log, n)?;
        p1122.push(n as f64, e.value, e.error);
    }
    let mut p22c = Table::new("p22c", &hash, "p22c versus separation N");
    let mut p2c_a = Table::new("p2c_a", &hash, "p2c on detector a versus separation N");
    let mut p2c_b = Table::new("p2c_b", &hash, "p2c on detector b versus separation N");
    for n in 0..n_max {
        let j = estimate_p22c(log, n)?;
        if j.denominator > 0.0 {
            let d = estimate_p2c(log, n)?;
            p22c.push(n as f64, j.value, j.error);
            p2c_a.push(n as f64, d.a.value, d.a.error);
            p2c_b.push(n as f64, d.b.value, d.b.error);
        }
    }
    let same = coincidence_histogram_in(
        log,
        cfg.interference.polarization,
        PeakSelector::SameTrial,
        cfg.windows.field2(),
    )?;
    out.tables.extend([p11, p1122, p22c, p2c_a, p2c_b]);
    out.tables.push(Table::from_histogram(
        "coincidence",
        &hash,
        "same-trial coincidences per ready event versus tau",
        &same,
    ));
    out.tables.push(Table::from_histogram(
        "wavepackets",
        &hash,
        "conditional field-2 detection-time density",
        &wavepacket_profiles(log, true),
    ));
    out.tables.push(Table::from_histogram(
        "wavepackets_unconditional",
        &hash,
        "unconditional field-2 detection-time density",
        &wavepacket_profiles(log, false),
    ));

    let p1 = cfg.ensemble_l.p1 * cfg.ensemble_r.p1;
    if p1 > 0.0 {
        let e = estimate_p11(log, n_max)?;
        out.values.push(("F11".into(), e.value / p1));
        out.values.push(("F11_error".into(), e.error / p1));
    }
    let (base, top) = (estimate_p1122(log, 1)?, estimate_p1122(log, n_max)?);
    if base.count > 0 {
        out.values.push(("F1122".into(), top.value / base.value));
    }
    if let Ok(a) = detector_asymmetry(log) {
        out.values.push(("detector_b_over_a".into(), a.value));
        out.values.push(("detector_b_over_a_error".into(), a.error));
    }
    if let Ok(r) = cross_peak_ratio(log, 5) {
        out.values.push(("center_side_ratio".into(), r.value));
        out.values.push(("center_side_ratio_error".into(), r.error));
    }
    if let Some(par) = parallel {
        for (name, half) in [("V", cfg.windows.tau_halfwidth_ns), ("V_6ns", 6.0)] {
            let v = visibility(log, par, half)?;
            out.values.push((name.into(), v.value));
            out.values.push((format!("{name}_error"), v.error));
        }
        if let Ok(v) = side_peak_visibility(log, par, 5) {
            out.values.push(("side_peak_V".into(), v.value));
            out.values.push(("side_peak_V_error".into(), v.error));
        }
    }
    Ok(out)
}
