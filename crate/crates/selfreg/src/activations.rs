//! Scalar activation functions and their derivatives.
//!
//! All kinds map ℝ → ℝ. Sigmoid, Step, and the saturated ReLU land in [0,1];
//! ReLU, Softplus, and Gaussian land in [0,∞). ReLU is positively homogeneous
//! and Step is scale invariant, which is what lets inner rows be normalized
//! without changing the computed function.

use num_traits::Float;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Sigmoid,
    ReLU,
    Step,
    /// ReLU clipped to [0,1]: 0 for x<0, x on [0,1), 1 for x≥1.
    #[serde(rename = "srelu")]
    SaturatedReLU,
    Softplus,
    Gaussian,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 6] = [
        ActivationKind::Sigmoid,
        ActivationKind::ReLU,
        ActivationKind::Step,
        ActivationKind::SaturatedReLU,
        ActivationKind::Softplus,
        ActivationKind::Gaussian,
    ];

    /// Evaluates the activation. Total over finite inputs; use [`Self::eval`]
    /// for the checked variant.
    #[inline]
    pub fn apply<T: Float>(self, x: T) -> T {
        let one = T::one();
        match self {
            // evaluate on the side that keeps exp's argument non-positive
            ActivationKind::Sigmoid => {
                if x >= T::zero() {
                    one / (one + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (one + e)
                }
            }
            ActivationKind::ReLU => x.max(T::zero()),
            ActivationKind::Step => {
                if x >= T::zero() {
                    one
                } else {
                    T::zero()
                }
            }
            ActivationKind::SaturatedReLU => x.max(T::zero()).min(one),
            ActivationKind::Softplus => {
                if x > T::zero() {
                    x + (-x).exp().ln_1p()
                } else {
                    x.exp().ln_1p()
                }
            }
            ActivationKind::Gaussian => (-x * x).exp(),
        }
    }

    /// Checked evaluation: rejects non-finite inputs.
    pub fn eval<T: Float>(self, x: T) -> Result<T> {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                what: "activation input",
                value: x.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(self.apply(x))
    }

    /// Derivative σ′(x). At the ReLU kink (x=0) and at both saturated-ReLU
    /// kinks the subgradient choice is 0, so projected-GD iterates are
    /// deterministic.
    #[inline]
    pub fn apply_derivative<T: Float>(self, x: T) -> Result<T> {
        let one = T::one();
        let two = one + one;
        Ok(match self {
            ActivationKind::Sigmoid => {
                let s = self.apply(x);
                s * (one - s)
            }
            ActivationKind::ReLU => {
                if x > T::zero() {
                    one
                } else {
                    T::zero()
                }
            }
            ActivationKind::Step => return Err(Error::UnsupportedDerivative(self)),
            ActivationKind::SaturatedReLU => {
                if x > T::zero() && x < one {
                    one
                } else {
                    T::zero()
                }
            }
            ActivationKind::Softplus => ActivationKind::Sigmoid.apply(x),
            ActivationKind::Gaussian => -two * x * (-x * x).exp(),
        })
    }

    /// Checked derivative: rejects non-finite inputs and the Step kind.
    pub fn eval_derivative<T: Float>(self, x: T) -> Result<T> {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                what: "activation input",
                value: x.to_f64().unwrap_or(f64::NAN),
            });
        }
        self.apply_derivative(x)
    }

    pub fn is_differentiable(self) -> bool {
        !matches!(self, ActivationKind::Step)
    }

    /// Supremum of |σ| over ℝ when finite: used to derive label bounds for
    /// non-negative teacher networks.
    pub fn range_sup(self) -> Option<f64> {
        match self {
            ActivationKind::Sigmoid
            | ActivationKind::Step
            | ActivationKind::SaturatedReLU
            | ActivationKind::Gaussian => Some(1.0),
            ActivationKind::ReLU | ActivationKind::Softplus => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::ReLU => "relu",
            ActivationKind::Step => "step",
            ActivationKind::SaturatedReLU => "srelu",
            ActivationKind::Softplus => "softplus",
            ActivationKind::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "relu" => Ok(ActivationKind::ReLU),
            "step" => Ok(ActivationKind::Step),
            "srelu" => Ok(ActivationKind::SaturatedReLU),
            "softplus" => Ok(ActivationKind::Softplus),
            "gaussian" => Ok(ActivationKind::Gaussian),
            other => Err(Error::InvalidArgument(format!(
                "unknown activation '{other}'"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::ActivationKind::*;
    use super::*;
    use crate::util::seeded_rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn pinned_values() {
        assert_abs_diff_eq!(
            Sigmoid.eval(-1.0).unwrap(),
            1.0 / (1.0 + std::f64::consts::E),
            epsilon = 1e-15
        );
        assert_eq!(ReLU.eval(0.0).unwrap(), 0.0);
        assert_eq!(Step.eval(0.0).unwrap(), 1.0);
        assert_eq!(SaturatedReLU.eval(2.5).unwrap(), 1.0);
        assert_eq!(SaturatedReLU.eval(0.4).unwrap(), 0.4);
        assert_abs_diff_eq!(
            Softplus.eval(0.0).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn pinned_derivatives() {
        assert_eq!(Sigmoid.eval_derivative(0.0).unwrap(), 0.25);
        assert_eq!(ReLU.eval_derivative(-3.0).unwrap(), 0.0);
        // subgradient choice at the kink
        assert_eq!(ReLU.eval_derivative(0.0).unwrap(), 0.0);
        assert_eq!(SaturatedReLU.eval_derivative(1.0).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        assert!(Sigmoid.eval(f64::NAN).is_err());
        assert!(ReLU.eval(f64::INFINITY).is_err());
        assert!(matches!(
            Step.eval_derivative(0.5),
            Err(Error::UnsupportedDerivative(Step))
        ));
    }

    #[test]
    fn sigmoid_is_stable_at_extreme_arguments() {
        assert_eq!(Sigmoid.apply(800.0), 1.0);
        assert_eq!(Sigmoid.apply(-800.0), 0.0);
        assert!(Softplus.apply(-800.0) >= 0.0);
        assert_abs_diff_eq!(Softplus.apply(800.0), 800.0, epsilon = 1e-9);
    }

    proptest::proptest! {
        #[test]
        fn relu_is_positively_homogeneous(x in -50.0..50.0f64, c in 1e-3..100.0f64) {
            let lhs = ReLU.apply(c * x);
            let rhs = c * ReLU.apply(x);
            proptest::prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + (c * x).abs()));
            proptest::prop_assert_eq!(Step.apply(c * x), Step.apply(x));
        }

        #[test]
        fn saturated_relu_is_clipped_relu(x in -5.0..5.0f64) {
            proptest::prop_assert_eq!(SaturatedReLU.apply(x), ReLU.apply(x).min(1.0));
        }

        #[test]
        fn monotone_kinds_are_monotone_and_bounded(x in -20.0..20.0f64, y in -20.0..20.0f64) {
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            for kind in [Sigmoid, ReLU, Step, SaturatedReLU, Softplus] {
                proptest::prop_assert!(kind.apply(lo) <= kind.apply(hi) + 1e-15);
            }
            let s = Sigmoid.apply(10.0 * x);
            proptest::prop_assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn derivatives_match_central_differences_away_from_kinks() {
        let mut rng = seeded_rng(14, &[]);
        let h = 1e-6;
        let kinds = [Sigmoid, ReLU, SaturatedReLU, Softplus, Gaussian];
        for kind in kinds {
            let mut checked = 0;
            while checked < 100 {
                let x: f64 = rng.random_range(-4.0..4.0);
                // keep a margin from the kinks at 0 and 1
                if x.abs() < 1e-3 || (x - 1.0).abs() < 1e-3 {
                    continue;
                }
                let fd = (kind.apply(x + h) - kind.apply(x - h)) / (2.0 * h);
                let an = kind.eval_derivative(x).unwrap();
                assert!(
                    (an - fd).abs() <= 1e-5,
                    "{kind:?} at {x}: analytic {an} vs fd {fd}"
                );
                checked += 1;
            }
        }
    }

    #[test]
    fn generic_over_f32() {
        let y: f32 = Sigmoid.apply(0.0f32);
        assert_eq!(y, 0.5f32);
    }

    #[test]
    fn config_names_round_trip() {
        for kind in ActivationKind::ALL {
            assert_eq!(kind.as_str().parse::<ActivationKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.as_str()));
        }
    }
}
