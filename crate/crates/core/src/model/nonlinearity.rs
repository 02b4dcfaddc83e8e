use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

/// Pointwise reaction nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    Zero,
    /// `l_phi * sin(u)`.
    LipschitzSin {
        l_phi: f64,
    },
    /// `u^3`.
    #[default]
    MonotoneCubic,
}

impl Nonlinearity {
    pub fn validate(&self) -> Result<()> {
        if let Nonlinearity::LipschitzSin { l_phi } = self {
            if !(l_phi.is_finite() && *l_phi >= 0.0) {
                return Err(validation(format!("l_phi must be finite and >= 0, got {l_phi}")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::LipschitzSin { l_phi } => l_phi * u.sin(),
            Nonlinearity::MonotoneCubic => u * u * u,
        }
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::LipschitzSin { l_phi } => l_phi * u.cos(),
            Nonlinearity::MonotoneCubic => 3.0 * u * u,
        }
    }

    /// Global Lipschitz constant, if finite.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            Nonlinearity::Zero => Some(0.0),
            Nonlinearity::LipschitzSin { l_phi } => Some(*l_phi),
            Nonlinearity::MonotoneCubic => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Nonlinearity::Zero => "zero",
            Nonlinearity::LipschitzSin { .. } => "lipschitz_sin",
            Nonlinearity::MonotoneCubic => "monotone_cubic",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pointwise_values() {
        let s = Nonlinearity::LipschitzSin { l_phi: 2.0 };
        assert!((s.eval(std::f64::consts::FRAC_PI_2) - 2.0).abs() < 1e-15);
        assert_eq!(Nonlinearity::MonotoneCubic.eval(2.0), 8.0);
        assert_eq!(Nonlinearity::MonotoneCubic.derivative(2.0), 12.0);
        assert_eq!(Nonlinearity::Zero.eval(3.0), 0.0);
    }

    #[test]
    fn negative_lipschitz_rejected() {
        assert!(Nonlinearity::LipschitzSin { l_phi: -1.0 }.validate().is_err());
    }

    proptest! {
        #[test]
        fn derivative_matches_difference_quotient(u in -3.0f64..3.0, which in 0usize..3) {
            let nl = [
                Nonlinearity::Zero,
                Nonlinearity::LipschitzSin { l_phi: 1.5 },
                Nonlinearity::MonotoneCubic,
            ][which];
            let h = 1e-6;
            let fd = (nl.eval(u + h) - nl.eval(u - h)) / (2.0 * h);
            prop_assert!((fd - nl.derivative(u)).abs() < 1e-6);
        }

        #[test]
        fn cubic_is_monotone(u in -5.0f64..5.0, v in -5.0f64..5.0) {
            let nl = Nonlinearity::MonotoneCubic;
            prop_assert!((nl.eval(u) - nl.eval(v)) * (u - v) >= 0.0);
        }
    }
}
