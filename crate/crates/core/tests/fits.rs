//! Fits recover the parameters of noiseless model curves from distant starts.

use condmem::analytics::fit::{
    fit, levenberg_marquardt, mhz_to_rad_per_ns, ExpDecay, FitData, FitModel, Gaussian, Model, ModulatedGaussian,
    P2cP22cPair,
};
use proptest::prelude::*;

fn curve(model: &dyn Model, x: &[f64], series: &[u8], p: &[f64]) -> FitData {
    let y = x.iter().zip(series).map(|(&x, &s)| model.eval(x, s, p)).collect();
    let mut d = FitData::unweighted(x.to_vec(), y).unwrap();
    d.series = series.to_vec();
    d
}

fn worst_relative(found: &[f64], truth: &[f64]) -> f64 {
    found.iter().zip(truth).map(|(f, t)| ((f - t) / t).abs()).fold(0.0, f64::max)
}

fn taus() -> Vec<f64> {
    (-22..=22).map(|i| 2.0 * i as f64).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gaussian_from_far_starts(a in 0.5f64..1.5, b in 0.5f64..1.5) {
        let truth = [0.3, 18.4];
        let x = taus();
        let d = curve(&Gaussian, &x, &vec![0; x.len()], &truth);
        let r = levenberg_marquardt(&Gaussian, &d, &[truth[0] * a, truth[1] * b], &[]).unwrap();
        prop_assert!(worst_relative(&r.values, &truth) < 1e-9);
    }

    #[test]
    fn exp_decay_from_far_starts(a in 0.5f64..1.5, b in 0.5f64..1.5) {
        let truth = [0.004, 18.0];
        let x: Vec<f64> = (0..23).map(f64::from).collect();
        let d = curve(&ExpDecay, &x, &[0; 23], &truth);
        let r = levenberg_marquardt(&ExpDecay, &d, &[truth[0] * a, truth[1] * b], &[]).unwrap();
        prop_assert!(worst_relative(&r.values, &truth) < 1e-9);
    }

    #[test]
    fn pair_from_far_starts(a in 0.5f64..1.5, b in 0.5f64..1.5) {
        let truth = [0.091, 18.0];
        let n: Vec<f64> = (0..23).map(f64::from).collect();
        let x: Vec<f64> = n.iter().chain(&n).copied().collect();
        let s: Vec<u8> = (0..46).map(|i| u8::from(i >= 23)).collect();
        let d = curve(&P2cP22cPair, &x, &s, &truth);
        let r = levenberg_marquardt(&P2cP22cPair, &d, &[truth[0] * a, truth[1] * b], &[]).unwrap();
        prop_assert!(worst_relative(&r.values, &truth) < 1e-9);
    }

    #[test]
    fn modulated_gaussian_with_documented_start(v in 0.2f64..0.95, f in 1.0f64..9.0, t in 12.0f64..25.0) {
        let truth = [1.0, t, v, mhz_to_rad_per_ns(f)];
        let x = taus();
        let d = curve(&ModulatedGaussian, &x, &vec![0; x.len()], &truth);
        let fixed = fit(FitModel::ModulatedGaussian { fixed_envelope: Some((1.0, t)) }, &d).unwrap();
        prop_assert!(worst_relative(&fixed.values, &truth) < 1e-9);
    }
}

#[test]
fn fixed_parameters_stay_put() {
    let x = taus();
    let truth = [0.3, 18.4];
    let d = curve(&Gaussian, &x, &vec![0; x.len()], &truth);
    let r = levenberg_marquardt(&Gaussian, &d, &[0.2, 18.4], &[1]).unwrap();
    assert_eq!(r.values[1], 18.4);
    assert_eq!(r.errors[1], 0.0);
    assert!((r.values[0] - 0.3).abs() < 1e-12);
}
