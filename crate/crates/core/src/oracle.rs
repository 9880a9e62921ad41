//! Closed-form quantities evaluated over parameter grids.

use std::collections::BTreeMap;

use crate::control::{p1122_decohered, p1122_ideal, p11_exact, p22c_model, p2c_model};
use crate::error::{Error, Result};
use crate::hom::{coincidence_density, cross_trial_ratio, effective_visibility, visibility_from_w, CoincidenceDensityParams};

/// Formula name and the parameters it reads, in order.
pub const FORMULAS: &[(&str, &[&str])] = &[
    ("p11", &["p1", "n"]),
    ("p1122_ideal", &["p1", "pc", "n"]),
    ("p1122_decohered", &["p1", "pc", "nc", "n"]),
    ("p22c", &["pc", "nc", "n"]),
    ("p2c", &["pc", "nc", "n"]),
    ("v_max", &["w"]),
    ("v_eff", &["xi", "w"]),
    ("ratio_r", &["p1", "w"]),
    ("density", &["tau", "p0", "t", "v", "dw"]),
];

/// Parses `1,2,3` or `start:stop:step` (inclusive).
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::invalid("grid", format!("cannot parse `{s}`: {e}")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(Error::invalid("grid", format!("bad range `{text}`")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| start + i as f64 * step).collect());
    }
    text.split(',').map(num).collect()
}

fn count(name: &str, x: f64) -> Result<u32> {
    if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
        Ok(x as u32)
    } else {
        Err(Error::invalid(name, "must be a non-negative integer"))
    }
}

/// Evaluates one formula at a single point given in the order of [`FORMULAS`].
pub fn evaluate(formula: &str, args: &[f64]) -> Result<f64> {
    let a = |i: usize| args[i];
    Ok(match formula {
        "p11" => p11_exact(a(0), count("n", a(1))?),
        "p1122_ideal" => p1122_ideal(a(0), a(1), count("n", a(2))?),
        "p1122_decohered" => p1122_decohered(a(0), a(1), a(2), count("n", a(3))?),
        "p22c" => p22c_model(a(0), a(1), a(2)),
        "p2c" => p2c_model(a(0), a(1), a(2)),
        "v_max" => visibility_from_w(a(0)),
        "v_eff" => effective_visibility(a(0), a(1)),
        "ratio_r" => cross_trial_ratio(a(0), a(1))?.r,
        "density" => {
            let params = CoincidenceDensityParams {
                p0: a(1),
                t: a(2),
                v: a(3),
                delta_omega: a(4),
            };
            params.validate()?;
            coincidence_density(a(0), &params)
        }
        _ => return Err(Error::invalid("formula", format!("unknown formula `{formula}`"))),
    })
}

/// Rows of parameter values followed by the formula value, over the
/// Cartesian product of the grids. The last parameter varies fastest.
pub fn evaluate_grid(formula: &str, grids: &BTreeMap<String, Vec<f64>>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let names = FORMULAS
        .iter()
        .find(|(f, _)| *f == formula)
        .map(|(_, p)| *p)
        .ok_or_else(|| Error::invalid("formula", format!("unknown formula `{formula}`")))?;
    for key in grids.keys() {
        if !names.contains(&key.as_str()) {
            return Err(Error::invalid(key.clone(), format!("not a parameter of `{formula}`")));
        }
    }
    let axes = names
        .iter()
        .map(|n| {
            grids
                .get(*n)
                .filter(|g| !g.is_empty())
                .ok_or_else(|| Error::invalid(*n, "missing value"))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut idx = vec![0usize; axes.len()];
    loop {
        let point: Vec<f64> = idx.iter().zip(&axes).map(|(&i, g)| g[i]).collect();
        let value = evaluate(formula, &point)?;
        let mut row = point;
        row.push(value);
        rows.push(row);
        let mut d = axes.len();
        loop {
            if d == 0 {
                let mut header: Vec<String> = names.iter().map(|s| s.to_string()).collect();
                header.push(formula.to_string());
                return Ok((header, rows));
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
}
