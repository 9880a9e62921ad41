//! Photon-number statistics of the retrieved field, truncated at two photons,
//! and the exponential memory decay.

use crate::error::{Error, Result};
use crate::types::check_probability;

/// Probabilities of finding 0, 1 or 2 photons in a retrieved field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Field2Distribution {
    p0: f64,
    p1: f64,
    p2: f64,
}

impl Field2Distribution {
    pub const VACUUM: Field2Distribution = Field2Distribution {
        p0: 1.0,
        p1: 0.0,
        p2: 0.0,
    };

    /// Builds a distribution from `P1` and `P2`; `P0` takes the remainder.
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        check_probability("P1", p1)?;
        check_probability("P2", p2)?;
        let p0 = 1.0 - p1 - p2;
        if p0 < 0.0 {
            return Err(Error::invalid("P0", format!("P1 + P2 = {} exceeds 1", p1 + p2)));
        }
        Ok(Field2Distribution { p0, p1, p2 })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn mean(&self) -> f64 {
        self.p1 + 2.0 * self.p2
    }

    /// Applies a lossy channel with transmission `eta` to leading order:
    /// single-photon terms scale with `eta`, two-photon terms with `eta^2`.
    pub fn attenuated(&self, eta: f64) -> Field2Distribution {
        let p1 = self.p1 * eta;
        let p2 = self.p2 * eta * eta;
        Field2Distribution {
            p0: 1.0 - p1 - p2,
            p1,
            p2,
        }
    }

    /// Two-photon suppression of this distribution, see [`two_photon_w`].
    pub fn w(&self) -> Result<f64> {
        two_photon_w(self.p1, self.p2)
    }
}

/// Two-photon suppression `w = 2 P2 / P1^2`.
///
/// `w = 1` for a coherent state, `w = 2` for a thermal one, and anything below
/// one signals a suppressed two-photon component.
pub fn two_photon_w(p1: f64, p2: f64) -> Result<f64> {
    if p1 == 0.0 {
        return Err(Error::DivisionByZero("two_photon_w requires P1 > 0"));
    }
    Ok(2.0 * p2 / (p1 * p1))
}

/// Field-2 distribution given a herald: `P1 = pc_eff`, `P2 = w pc_eff^2 / 2`.
pub fn conditional_distribution(pc_eff: f64, w: f64) -> Result<Field2Distribution> {
    check_probability("pc_eff", pc_eff)?;
    if !(w >= 0.0) {
        return Err(Error::invalid("w", "must be >= 0"));
    }
    Field2Distribution::new(pc_eff, w * pc_eff * pc_eff / 2.0)
}

/// Retrieval probability after `age` trials of storage, `pc exp(-age / nc)`.
pub fn retrieval_decay(pc: f64, age: f64, nc: f64) -> f64 {
    pc * (-age / nc).exp()
}

/// Inverts the cumulative distribution at the uniform draw `u`.
pub fn sample_photon_number(dist: &Field2Distribution, u: f64) -> u8 {
    if u < dist.p0 {
        0
    } else if u < dist.p0 + dist.p1 {
        1
    } else if dist.p2 > 0.0 {
        2
    } else {
        // Only reachable through rounding at the top of the unit interval.
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn w_examples() {
        assert!((two_photon_w(0.085, 0.000614125).unwrap() - 0.17).abs() < 1e-12);
        assert!((two_photon_w(0.5, 0.125).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(two_photon_w(0.3, 0.0).unwrap(), 0.0);
        assert!(matches!(two_photon_w(0.0, 0.1), Err(Error::DivisionByZero(_))));
    }

    #[test]
    fn conditional_distribution_examples() {
        let d = conditional_distribution(0.085, 0.17).unwrap();
        assert_eq!(d.p1(), 0.085);
        assert!((d.p2() - 0.000614125).abs() < 1e-15);
        assert!((d.p0() - 0.914385875).abs() < 1e-12);
        assert!((d.w().unwrap() - 0.17).abs() < 1e-12);

        let d = conditional_distribution(0.0, 0.17).unwrap();
        assert_eq!((d.p0(), d.p1(), d.p2()), (1.0, 0.0, 0.0));

        let d = conditional_distribution(1.0, 0.0).unwrap();
        assert_eq!((d.p0(), d.p1(), d.p2()), (0.0, 1.0, 0.0));

        assert!(conditional_distribution(0.9, 3.0).is_err());
        assert!(conditional_distribution(1.2, 0.0).is_err());
    }

    #[test]
    fn decay_examples() {
        let e = std::f64::consts::E;
        assert!((retrieval_decay(0.091, 18.0, 18.0) - 0.091 / e).abs() < 1e-15);
        assert!((retrieval_decay(0.091, 18.0, 18.0) - 0.03348).abs() < 5e-6);
        assert_eq!(retrieval_decay(0.091, 0.0, 18.0), 0.091);
        assert_eq!(retrieval_decay(0.091, 40.0, f64::INFINITY), 0.091);
        // 18 trials of 525 ns
        assert!((18.0 * 0.525f64 - 9.45).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_cdf_inversion() {
        let d = conditional_distribution(0.085, 0.17).unwrap();
        assert_eq!(sample_photon_number(&d, 0.0), 0);
        assert_eq!(sample_photon_number(&d, d.p0() - 1e-12), 0);
        assert_eq!(sample_photon_number(&d, d.p0() + 1e-9), 1);
        assert_eq!(sample_photon_number(&d, 0.99999), 2);
        let one = Field2Distribution::new(1.0, 0.0).unwrap();
        for u in [0.0, 0.3, 0.999_999_999] {
            assert_eq!(sample_photon_number(&one, u), 1);
        }
    }

    #[test]
    fn attenuation_keeps_normalisation() {
        let d = conditional_distribution(0.2, 0.5).unwrap().attenuated(0.9);
        assert!((d.p0() + d.p1() + d.p2() - 1.0).abs() < 1e-15);
        assert!((d.p1() - 0.18).abs() < 1e-15);
        assert!((d.p2() - 0.01 * 0.81).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn w_round_trips(pc in 1e-6f64..0.6, w in 0.0f64..2.0) {
            let d = conditional_distribution(pc, w).unwrap();
            prop_assert!((d.w().unwrap() - w).abs() < 1e-12);
            prop_assert!((d.p0() + d.p1() + d.p2() - 1.0).abs() < 1e-15);
        }

        #[test]
        fn decay_is_monotone_and_multiplicative(
            pc in 0.0f64..1.0, a in 0.0f64..200.0, b in 0.0f64..200.0, nc in 0.5f64..500.0
        ) {
            let once = retrieval_decay(pc, a + b, nc);
            let twice = retrieval_decay(retrieval_decay(pc, a, nc), b, nc);
            prop_assert!((once - twice).abs() <= 1e-15);
            prop_assert!(retrieval_decay(pc, a + 1.0, nc) <= retrieval_decay(pc, a, nc));
        }
    }
}
