//! Weighted least squares with Levenberg-Marquardt damping.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 500;

/// Points to fit. `series` tags points that belong to different curves of a
/// joint model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub y_err: Vec<f64>,
    pub series: Vec<u8>,
}

impl FitData {
    pub fn new(x: Vec<f64>, y: Vec<f64>, y_err: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() != y_err.len() {
            return Err(Error::invalid("data", "x, y and y_err differ in length"));
        }
        if let Some(e) = y_err.iter().find(|e| !(**e > 0.0)) {
            return Err(Error::invalid("y_err", format!("{e} is not > 0")));
        }
        let series = vec![0; x.len()];
        Ok(FitData { x, y, y_err, series })
    }

    /// Counts scaled by `scale`, with `sqrt(max(C, 1))` errors.
    pub fn from_counts(x: Vec<f64>, counts: &[f64], scale: f64) -> Result<Self> {
        let y = counts.iter().map(|c| c * scale).collect();
        let err = counts.iter().map(|c| c.max(1.0).sqrt() * scale).collect();
        Self::new(x, y, err)
    }

    /// Points with unit errors, for noiseless model curves.
    pub fn unweighted(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        Self::new(x, y, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Concatenates two data sets, tagging the second as series 1.
    pub fn joined(first: &FitData, second: &FitData) -> FitData {
        let mut out = first.clone();
        out.x.extend(&second.x);
        out.y.extend(&second.y);
        out.y_err.extend(&second.y_err);
        out.series.extend(std::iter::repeat_n(1, second.len()));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.values[i], self.errors[i]))
    }

    pub fn value(&self, name: &str) -> f64 {
        self.get(name).map_or(f64::NAN, |v| v.0)
    }
}

impl fmt::Display for FitResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ((n, v), e) in self.names.iter().zip(&self.values).zip(&self.errors) {
            writeln!(f, "{n} = {v} +- {e}")?;
        }
        writeln!(f, "chi2 = {}", self.chi2)?;
        writeln!(f, "dof = {}", self.dof)?;
        writeln!(f, "converged = {}", self.converged)?;
        writeln!(f, "iterations = {}", self.iterations)
    }
}

/// A model `f(x, series; params)`.
pub trait Model {
    fn names(&self) -> Vec<String>;
    fn eval(&self, x: f64, series: u8, p: &[f64]) -> f64;
}

fn residuals(model: &dyn Model, data: &FitData, p: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        data.len(),
        (0..data.len()).map(|i| (data.y[i] - model.eval(data.x[i], data.series[i], p)) / data.y_err[i]),
    )
}

/// Five-point central differences, accurate to fourth order in the step.
fn jacobian(model: &dyn Model, data: &FitData, p: &[f64], free: &[usize]) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(data.len(), free.len());
    let mut q = p.to_vec();
    let eval_at = |k: usize, v: f64, i: usize, q: &mut [f64]| {
        q[k] = v;
        model.eval(data.x[i], data.series[i], q)
    };
    for (c, &k) in free.iter().enumerate() {
        let h = 1e-3 * p[k].abs().max(1e-3);
        for i in 0..data.len() {
            let f2 = eval_at(k, p[k] + 2.0 * h, i, &mut q);
            let f1 = eval_at(k, p[k] + h, i, &mut q);
            let b1 = eval_at(k, p[k] - h, i, &mut q);
            let b2 = eval_at(k, p[k] - 2.0 * h, i, &mut q);
            j[(i, c)] = (8.0 * (f1 - b1) - (f2 - b2)) / (12.0 * h) / data.y_err[i];
        }
        q[k] = p[k];
    }
    j
}

/// Minimizes the weighted squared residuals starting from `start`. Indices in
/// `fixed` are held at their starting values.
pub fn levenberg_marquardt(model: &dyn Model, data: &FitData, start: &[f64], fixed: &[usize]) -> Result<FitResult> {
    let names = model.names();
    let free: Vec<usize> = (0..start.len()).filter(|i| !fixed.contains(i)).collect();
    if data.len() < free.len() + 3 {
        return Err(Error::invalid(
            "data",
            format!("{} points for {} free parameters", data.len(), free.len()),
        ));
    }
    let mut p = start.to_vec();
    let mut r = residuals(model, data, &p);
    let mut chi2 = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let j = jacobian(model, data, &p, &free);
        for (c, &k) in free.iter().enumerate() {
            if iterations == 1 && j.column(c).iter().all(|v| *v == 0.0) {
                return Err(Error::DegenerateJacobian {
                    parameter: names[k].clone(),
                });
            }
        }
        if chi2 == 0.0 {
            converged = true;
            break;
        }
        let (m, n) = (data.len(), free.len());
        let scale: Vec<f64> = (0..n).map(|c| j.column(c).norm_squared().max(1e-300)).collect();
        let model_at = |q: &[f64]| -> DVector<f64> {
            DVector::from_iterator(m, (0..m).map(|i| model.eval(data.x[i], data.series[i], q) / data.y_err[i]))
        };
        let f0 = model_at(&p);
        let mut rhs = DVector::zeros(m + n);
        let mut improved = false;
        while lambda < 1e16 {
            // damped least squares solved on [J; sqrt(lambda D)] to keep the
            // conditioning of J rather than that of J^T J
            let mut aug = DMatrix::zeros(m + n, n);
            aug.rows_mut(0, m).copy_from(&j);
            for c in 0..n {
                aug[(m + c, c)] = (lambda * scale[c]).sqrt();
            }
            let svd = aug.svd(true, true);
            rhs.rows_mut(0, m).copy_from(&r);
            let Ok(velocity) = svd.solve(&rhs, 0.0) else {
                lambda *= 10.0;
                continue;
            };
            // geodesic acceleration: second-order correction along the
            // velocity, which lets the step follow curved valleys
            let shift = |v: &DVector<f64>, t: f64| {
                let mut q = p.clone();
                for (c, &k) in free.iter().enumerate() {
                    q[k] += t * v[c];
                }
                q
            };
            let h = 0.1;
            let curvature = (model_at(&shift(&velocity, h)) - &f0 - h * (&j * &velocity)) * (2.0 / (h * h));
            rhs.rows_mut(0, m).copy_from(&(-curvature));
            let acceleration = svd.solve(&rhs, 0.0).unwrap_or_else(|_| DVector::zeros(n));
            let dnorm = |v: &DVector<f64>| (0..n).map(|c| scale[c] * v[c] * v[c]).sum::<f64>().sqrt();
            let step = if 2.0 * dnorm(&acceleration) <= 0.75 * dnorm(&velocity) {
                &velocity + 0.5 * &acceleration
            } else {
                velocity
            };
            let trial = shift(&step, 1.0);
            let r_trial = residuals(model, data, &trial);
            let chi2_trial = r_trial.norm_squared();
            if chi2_trial.is_finite() && chi2_trial <= chi2 {
                let small_step = free
                    .iter()
                    .enumerate()
                    .all(|(c, &k)| step[c].abs() <= 1e-12 * (p[k].abs() + 1e-12));
                let small_gain = chi2 - chi2_trial <= 1e-14 * chi2;
                p = trial;
                r = r_trial;
                chi2 = chi2_trial;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if small_step || small_gain {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !improved {
            // no downhill step at any damping: at the minimum to working precision
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations });
    }

    let j = jacobian(model, data, &p, &free);
    let jt = j.transpose();
    let gradient_norm = (&jt * &r).norm();
    let mut a = &jt * &j;
    // a parameter that stopped mattering at the minimum has no curvature
    let flat: Vec<bool> = (0..free.len()).map(|c| a[(c, c)] == 0.0).collect();
    for (c, &f) in flat.iter().enumerate() {
        if f {
            a[(c, c)] = 1.0;
        }
    }
    let mut errors = vec![0.0; p.len()];
    if let Some(cov) = a.try_inverse() {
        for (c, &k) in free.iter().enumerate() {
            errors[k] = if flat[c] { f64::INFINITY } else { cov[(c, c)].max(0.0).sqrt() };
        }
    }
    Ok(FitResult {
        names,
        values: p,
        errors,
        chi2,
        dof: data.len() - free.len(),
        converged,
        iterations,
        gradient_norm,
    })
}

/// `p0 exp(-x^2 / T^2)`.
pub struct Gaussian;

impl Model for Gaussian {
    fn names(&self) -> Vec<String> {
        vec!["p0".into(), "T".into()]
    }

    fn eval(&self, x: f64, _: u8, p: &[f64]) -> f64 {
        p[0] * (-(x * x) / (p[1] * p[1])).exp()
    }
}

/// `A exp(-x / Nc)`.
pub struct ExpDecay;

impl Model for ExpDecay {
    fn names(&self) -> Vec<String> {
        vec!["A".into(), "Nc".into()]
    }

    fn eval(&self, x: f64, _: u8, p: &[f64]) -> f64 {
        p[0] * (-x / p[1]).exp()
    }
}

/// `p0 exp(-x^2 / T^2) (1 - V cos(dw x))`, `dw` in rad/ns.
pub struct ModulatedGaussian;

impl Model for ModulatedGaussian {
    fn names(&self) -> Vec<String> {
        vec!["p0".into(), "T".into(), "V".into(), "dw".into()]
    }

    fn eval(&self, x: f64, _: u8, p: &[f64]) -> f64 {
        p[0] * (-(x * x) / (p[1] * p[1])).exp() * (1.0 - p[2] * (p[3] * x).cos())
    }
}

/// Series 0: `p22c = (pc^2 / 2) exp(-N / Nc)`; series 1:
/// `p2c = (pc + pc exp(-N / Nc)) / 2 - p22c`.
pub struct P2cP22cPair;

impl Model for P2cP22cPair {
    fn names(&self) -> Vec<String> {
        vec!["pc".into(), "Nc".into()]
    }

    fn eval(&self, x: f64, series: u8, p: &[f64]) -> f64 {
        let decay = (-x / p[1]).exp();
        let p22c = p[0] * p[0] / 2.0 * decay;
        match series {
            0 => p22c,
            _ => (p[0] + p[0] * decay) / 2.0 - p22c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitModel {
    Gaussian,
    ExpDecay,
    /// Optionally with `(p0, T)` held fixed, e.g. at an orthogonal-run fit.
    ModulatedGaussian { fixed_envelope: Option<(f64, f64)> },
    P2cP22cPair,
}

/// Fits `model` with its documented starting point.
pub fn fit(model: FitModel, data: &FitData) -> Result<FitResult> {
    match model {
        FitModel::Gaussian => fit_gaussian(data),
        FitModel::ExpDecay => fit_exp_decay(data),
        FitModel::ModulatedGaussian { fixed_envelope } => fit_modulated_gaussian(data, fixed_envelope),
        FitModel::P2cP22cPair => fit_p2c_p22c_pair(data),
    }
}

/// Peak value for `p0`; `T = sqrt(2 <x^2>)` from the second moment.
pub fn gaussian_start(data: &FitData) -> [f64; 2] {
    let peak = data.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: f64 = data.y.iter().map(|y| y.max(0.0)).sum();
    let m2: f64 = data.x.iter().zip(&data.y).map(|(x, y)| x * x * y.max(0.0)).sum::<f64>() / w.max(1e-300);
    [peak.max(1e-300), (2.0 * m2).sqrt().max(1e-6)]
}

pub fn fit_gaussian(data: &FitData) -> Result<FitResult> {
    levenberg_marquardt(&Gaussian, data, &gaussian_start(data), &[])
}

/// Gaussian fit to a histogram of counts scaled by `scale`. After a first fit
/// with `sqrt(C)` errors the errors are replaced by the square root of the
/// fitted expectation and the fit is repeated twice, which removes the
/// narrowing that count-based weights cause in sparse tails.
pub fn fit_gaussian_counts(x: Vec<f64>, counts: &[f64], scale: f64) -> Result<FitResult> {
    let mut data = FitData::from_counts(x, counts, scale)?;
    let mut result = fit_gaussian(&data)?;
    for _ in 0..2 {
        for i in 0..data.len() {
            let expected = Gaussian.eval(data.x[i], 0, &result.values) / scale;
            data.y_err[i] = expected.max(0.5).sqrt() * scale;
        }
        result = levenberg_marquardt(&Gaussian, &data, &result.values, &[])?;
    }
    Ok(result)
}

/// Log-linear regression over the positive points.
pub fn exp_decay_start(data: &FitData) -> [f64; 2] {
    let pts: Vec<(f64, f64)> = data
        .x
        .iter()
        .zip(&data.y)
        .filter(|(_, y)| **y > 0.0)
        .map(|(x, y)| (*x, y.ln()))
        .collect();
    let n = pts.len() as f64;
    if n < 2.0 {
        return [data.y.first().copied().unwrap_or(1.0).max(1e-300), 1.0];
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let nc = if slope < 0.0 { -1.0 / slope } else { 1e3 };
    [(my - slope * mx).exp(), nc]
}

pub fn fit_exp_decay(data: &FitData) -> Result<FitResult> {
    levenberg_marquardt(&ExpDecay, data, &exp_decay_start(data), &[])
}

fn chi2_at(model: &dyn Model, data: &FitData, p: &[f64]) -> f64 {
    residuals(model, data, p).norm_squared()
}

const MHZ: f64 = 2.0 * std::f64::consts::PI / 1000.0;

/// Converts rad/ns to a frequency `dw / 2 pi` in MHz.
pub fn rad_per_ns_to_mhz(dw: f64) -> f64 {
    dw / MHZ
}

pub fn mhz_to_rad_per_ns(f: f64) -> f64 {
    f * MHZ
}

/// Fits the modulated Gaussian.
///
/// The envelope comes from `fixed_envelope` or from a plain Gaussian fit. The
/// grid `V in {.25, .5, .75, 1}` by `dw / 2 pi in {0, 1, ..., 10} MHz` is
/// scanned; a free envelope also scans `T` over 0.6 to 1.1 times the Gaussian
/// width with the best `p0` at each point and is refined from the ten best
/// grid points, a fixed one from the best point only. The error on `dw`
/// is the half-width of the region where the profiled chi2 stays below twice
/// its minimum.
pub fn fit_modulated_gaussian(data: &FitData, fixed_envelope: Option<(f64, f64)>) -> Result<FitResult> {
    let (p0, t) = match fixed_envelope {
        Some(env) => env,
        None => {
            let g = fit_gaussian(data)?;
            (g.values[0], g.values[1])
        }
    };
    let widths: &[f64] = if fixed_envelope.is_some() { &[1.0] } else { &[0.6, 0.7, 0.8, 0.9, 1.0, 1.1] };
    let mut grid = Vec::new();
    for &scale in widths {
        for v in [0.25, 0.5, 0.75, 1.0] {
            for f in 0..=10 {
                // the dw column vanishes at dw = 0
                let dw = mhz_to_rad_per_ns(if f == 0 { 0.5 } else { f as f64 });
                let mut p = [p0, t * scale, v, dw];
                if fixed_envelope.is_none() {
                    p[0] = best_amplitude(&ModulatedGaussian, data, &p);
                }
                grid.push((chi2_at(&ModulatedGaussian, data, &p), p));
            }
        }
    }
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (fixed, starts): (&[usize], usize) = if fixed_envelope.is_some() { (&[0, 1], 1) } else { (&[], 10) };
    let mut best: Option<FitResult> = None;
    let mut last_err = None;
    for (_, start) in grid.iter().take(starts) {
        match levenberg_marquardt(&ModulatedGaussian, data, start, fixed) {
            Ok(r) if best.as_ref().is_none_or(|b| r.chi2 < b.chi2) => best = Some(r),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    let Some(mut result) = best else {
        return Err(last_err.unwrap_or(Error::NoConvergence { iterations: 0 }));
    };
    result.values[3] = result.values[3].abs();
    result.errors[3] = dw_error_by_doubling(data, &result, fixed)?;
    Ok(result)
}

/// Weighted least-squares amplitude for a model linear in `p[0]`.
fn best_amplitude(model: &dyn Model, data: &FitData, p: &[f64]) -> f64 {
    let mut unit = p.to_vec();
    unit[0] = 1.0;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..data.len() {
        let f = model.eval(data.x[i], data.series[i], &unit);
        let w = 1.0 / (data.y_err[i] * data.y_err[i]);
        num += w * f * data.y[i];
        den += w * f * f;
    }
    if den > 0.0 {
        num / den
    } else {
        p[0]
    }
}

fn dw_error_by_doubling(data: &FitData, result: &FitResult, fixed: &[usize]) -> Result<f64> {
    let target = 2.0 * result.chi2;
    let dw0 = result.values[3];
    let mut fixed_dw = fixed.to_vec();
    fixed_dw.push(3);
    let profile = |dw: f64| -> f64 {
        let mut p = result.values.clone();
        p[3] = dw;
        match levenberg_marquardt(&ModulatedGaussian, data, &p, &fixed_dw) {
            Ok(r) => r.chi2,
            Err(_) => chi2_at(&ModulatedGaussian, data, &p),
        }
    };
    if target <= 0.0 {
        return Ok(0.0);
    }
    let mut step = mhz_to_rad_per_ns(1.0);
    let mut hi = dw0 + step;
    let limit = mhz_to_rad_per_ns(1000.0);
    while profile(hi) < target {
        step *= 2.0;
        hi = dw0 + step;
        if step > limit {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = dw0;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if profile(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) - dw0)
}

/// Joint fit of `p22c` (series 0) and `p2c` (series 1). The start takes `Nc`
/// from a log-linear fit of the `p22c` points and `pc` from their intercept.
pub fn fit_p2c_p22c_pair(data: &FitData) -> Result<FitResult> {
    let mut first = FitData {
        x: Vec::new(),
        y: Vec::new(),
        y_err: Vec::new(),
        series: Vec::new(),
    };
    for i in (0..data.len()).filter(|&i| data.series[i] == 0) {
        first.x.push(data.x[i]);
        first.y.push(data.y[i]);
        first.y_err.push(data.y_err[i]);
        first.series.push(0);
    }
    let [a, nc] = exp_decay_start(&first);
    let pc = (2.0 * a.max(0.0)).sqrt().clamp(1e-6, 1.0);
    levenberg_marquardt(&P2cP22cPair, data, &[pc, nc.clamp(1e-3, 1e6)], &[])
}
