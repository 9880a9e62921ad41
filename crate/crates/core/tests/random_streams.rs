use condmem::hom::PairDistribution;
use condmem::photon::{conditional_distribution, sample_photon_number};
use condmem::rng::{seed_stream, Stream, StreamKey};
use rand::RngCore;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi2_p_value(counts: &[f64], expected: &[f64]) -> f64 {
    let stat: f64 = counts.iter().zip(expected).map(|(c, e)| (c - e) * (c - e) / e).sum();
    let dof = (counts.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

#[test]
fn uniforms_pass_chi_square() {
    let mut counts = vec![0.0; 100];
    for i in 0..1_000_000u64 {
        let mut rng = seed_stream(11, Stream::Readout, i / 4);
        for _ in 0..(i % 4) {
            rng.next_u64();
        }
        counts[(rng.uniform() * 100.0) as usize] += 1.0;
    }
    let p = chi2_p_value(&counts, &[10_000.0; 100]);
    assert!(p > 1e-4, "p = {p}");
}

#[test]
fn first_draws_of_consecutive_trials_are_uniform() {
    let key = StreamKey::new(3, Stream::Herald);
    let mut counts = vec![0.0; 100];
    for i in 0..1_000_000u64 {
        let u = key.trial(i).first_bits() as f64 / condmem::rng::UNIT_SCALE;
        counts[(u * 100.0) as usize] += 1.0;
    }
    let p = chi2_p_value(&counts, &[10_000.0; 100]);
    assert!(p > 1e-4, "p = {p}");
}

#[test]
fn streams_are_uncorrelated() {
    let n = 200_000u64;
    let (mut sxy, mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let x = seed_stream(5, Stream::Herald, i).uniform();
        let y = seed_stream(5, Stream::Readout, i).uniform();
        sxy += x * y;
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
    }
    let m = n as f64;
    let cov = sxy / m - sx / m * sy / m;
    let r = cov / ((sxx / m - (sx / m).powi(2)) * (syy / m - (sy / m).powi(2))).sqrt();
    // standard error of r is 1/sqrt(n)
    assert!(r.abs() < 5.0 / m.sqrt(), "r = {r}");
}

#[test]
fn photon_numbers_follow_the_distribution() {
    let dist = conditional_distribution(0.3, 0.5).unwrap();
    let n = 1_000_000;
    let mut counts = [0.0; 3];
    let mut rng = seed_stream(2, Stream::Synthetic, 0);
    for _ in 0..n {
        counts[sample_photon_number(&dist, rng.uniform()) as usize] += 1.0;
    }
    let expected = [dist.p0() * n as f64, dist.p1() * n as f64, dist.p2() * n as f64];
    assert!(chi2_p_value(&counts, &expected) > 1e-4, "{counts:?} vs {expected:?}");
    let mean = (counts[1] + 2.0 * counts[2]) / n as f64;
    assert!((mean - dist.mean()).abs() < 5.0 * (0.5 / n as f64).sqrt());
}

#[test]
fn pair_sampler_reproduces_marginals() {
    let left = conditional_distribution(0.2, 0.17).unwrap();
    let right = conditional_distribution(0.1, 0.17).unwrap();
    let pair = PairDistribution::new(&left, &right).unwrap();
    let n = 1_000_000;
    let mut rng = seed_stream(9, Stream::Synthetic, 1);
    let (mut l, mut r) = ([0.0; 3], [0.0; 3]);
    for _ in 0..n {
        let (a, b) = pair.sample(rng.uniform());
        l[a as usize] += 1.0;
        r[b as usize] += 1.0;
    }
    for (counts, dist) in [(l, left), (r, right)] {
        for (k, p) in [dist.p1(), dist.p2()].into_iter().enumerate() {
            let c = counts[k + 1];
            let e = p * n as f64;
            assert!((c - e).abs() < 5.0 * e.sqrt() + 1.0, "k={} {c} vs {e}", k + 1);
        }
    }
}
