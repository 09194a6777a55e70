//! Parameter and state types shared by the rest of the crate.
//!
//! The model tracks five compartments: susceptible `S`, infectious and
//! temporarily immune for the original strain (`I1`, `R1`), and the same pair
//! for the emerging strain (`I2`, `R2`). Recovery from the emerging strain
//! gives a degree `epsilon` of protection against the original strain; the
//! converse protection is absent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("population size must be positive and finite, got {0}")]
    NonPositivePopulation(f64),
    #[error("rate `{name}` = {value} is out of bounds ({bound})")]
    NegativeRate {
        name: &'static str,
        value: f64,
        bound: &'static str,
    },
    #[error("cross-immunity epsilon must lie in [0, 1], got {0}")]
    EpsilonOutOfRange(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("state component `{name}` = {value} is negative or not finite")]
    NegativeComponent { name: &'static str, value: f64 },
    #[error("reduced state ({i2}, {r2}) lies outside the trapping triangle for N = {n_pop}")]
    OutsideTriangle { i2: f64, r2: f64, n_pop: f64 },
}

/// Names of the seven rate parameters, used for scan axes and fit reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateName {
    Beta1,
    Beta2,
    Gamma1,
    Gamma2,
    Sigma1,
    Sigma2,
    Epsilon,
}

impl RateName {
    pub const ALL: [RateName; 7] = [
        RateName::Beta1,
        RateName::Beta2,
        RateName::Gamma1,
        RateName::Gamma2,
        RateName::Sigma1,
        RateName::Sigma2,
        RateName::Epsilon,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RateName::Beta1 => "beta1",
            RateName::Beta2 => "beta2",
            RateName::Gamma1 => "gamma1",
            RateName::Gamma2 => "gamma2",
            RateName::Sigma1 => "sigma1",
            RateName::Sigma2 => "sigma2",
            RateName::Epsilon => "epsilon",
        }
    }

    pub fn parse(name: &str) -> Option<RateName> {
        RateName::ALL.into_iter().find(|r| r.as_str() == name)
    }
}

impl std::fmt::Display for RateName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Rates (per day), cross-immunity degree and effective population size.
///
/// `n_pop` is real-valued: fits treat it as an effective population level
/// rather than a head count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub beta1: f64,
    pub beta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub epsilon: f64,
    pub n_pop: f64,
}

impl ModelParams {
    /// Builds and validates a parameter set.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        beta1: f64,
        beta2: f64,
        gamma1: f64,
        gamma2: f64,
        sigma1: f64,
        sigma2: f64,
        epsilon: f64,
        n_pop: f64,
    ) -> Result<Self, ParamError> {
        ModelParams {
            beta1,
            beta2,
            gamma1,
            gamma2,
            sigma1,
            sigma2,
            epsilon,
            n_pop,
        }
        .validate()
    }

    /// Checks every bound and returns the parameters unchanged on success.
    ///
    /// Transmission and immunity-loss rates must be non-negative, recovery
    /// rates strictly positive, `0 <= epsilon <= 1` and `n_pop > 0`.
    pub fn validate(self) -> Result<Self, ParamError> {
        if !(self.n_pop.is_finite() && self.n_pop > 0.0) {
            return Err(ParamError::NonPositivePopulation(self.n_pop));
        }
        for (name, value) in [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ParamError::NegativeRate {
                    name,
                    value,
                    bound: ">= 0",
                });
            }
        }
        for (name, value) in [("gamma1", self.gamma1), ("gamma2", self.gamma2)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ParamError::NegativeRate {
                    name,
                    value,
                    bound: "> 0",
                });
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(ParamError::EpsilonOutOfRange(self.epsilon));
        }
        Ok(self)
    }

    pub fn get(&self, name: RateName) -> f64 {
        match name {
            RateName::Beta1 => self.beta1,
            RateName::Beta2 => self.beta2,
            RateName::Gamma1 => self.gamma1,
            RateName::Gamma2 => self.gamma2,
            RateName::Sigma1 => self.sigma1,
            RateName::Sigma2 => self.sigma2,
            RateName::Epsilon => self.epsilon,
        }
    }

    /// Returns a copy with one rate replaced. The result is not validated.
    pub fn with(mut self, name: RateName, value: f64) -> Self {
        match name {
            RateName::Beta1 => self.beta1 = value,
            RateName::Beta2 => self.beta2 = value,
            RateName::Gamma1 => self.gamma1 = value,
            RateName::Gamma2 => self.gamma2 = value,
            RateName::Sigma1 => self.sigma1 = value,
            RateName::Sigma2 => self.sigma2 = value,
            RateName::Epsilon => self.epsilon = value,
        }
        self
    }

    /// Largest of the six rates, used to scale residual tolerances.
    pub fn max_rate(&self) -> f64 {
        [
            self.beta1,
            self.beta2,
            self.gamma1,
            self.gamma2,
            self.sigma1,
            self.sigma2,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// `I2 + epsilon*R2` level at which the original strain's quasi-steady
    /// level reaches zero: `N (1 - 1/R1)`. Negative infinity when `beta1 = 0`.
    pub fn switching_level(&self) -> f64 {
        self.n_pop * (1.0 - self.gamma1 / self.beta1)
    }
}

/// A point `(S, I1, R1, I2, R2)` of the full system, in people.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullState {
    pub s: f64,
    pub i1: f64,
    pub r1: f64,
    pub i2: f64,
    pub r2: f64,
}

impl FullState {
    pub fn new(s: f64, i1: f64, r1: f64, i2: f64, r2: f64) -> Result<Self, StateError> {
        for (name, value) in [("S", s), ("I1", i1), ("R1", r1), ("I2", i2), ("R2", r2)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(StateError::NegativeComponent { name, value });
            }
        }
        Ok(FullState { s, i1, r1, i2, r2 })
    }

    /// State with `S` filled in so the components sum to `n_pop`.
    pub fn from_infected(n_pop: f64, i1: f64, r1: f64, i2: f64, r2: f64) -> Result<Self, StateError> {
        FullState::new(n_pop - i1 - r1 - i2 - r2, i1, r1, i2, r2)
    }

    pub fn disease_free(n_pop: f64) -> Self {
        FullState {
            s: n_pop,
            ..FullState::default()
        }
    }

    pub fn total(&self) -> f64 {
        self.s + self.i1 + self.r1 + self.i2 + self.r2
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.s, self.i1, self.r1, self.i2, self.r2]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        FullState {
            s: a[0],
            i1: a[1],
            r1: a[2],
            i2: a[3],
            r2: a[4],
        }
    }

    pub fn reduced(&self) -> ReducedState {
        ReducedState {
            i2: self.i2,
            r2: self.r2,
        }
    }

    pub fn max_abs_diff(&self, other: &FullState) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A point `(I2, R2)` of the reduced planar system, in people.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedState {
    pub i2: f64,
    pub r2: f64,
}

impl ReducedState {
    /// Builds a state inside the trapping triangle
    /// `{I2 >= 0, R2 >= 0, I2 + R2 <= N}`.
    pub fn new(i2: f64, r2: f64, n_pop: f64) -> Result<Self, StateError> {
        for (name, value) in [("I2", i2), ("R2", r2)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(StateError::NegativeComponent { name, value });
            }
        }
        if i2 + r2 > n_pop {
            return Err(StateError::OutsideTriangle { i2, r2, n_pop });
        }
        Ok(ReducedState { i2, r2 })
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.i2, self.r2]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        ReducedState { i2: a[0], r2: a[1] }
    }

    /// Distance outside the triangle, zero when inside.
    pub fn triangle_violation(&self, n_pop: f64) -> f64 {
        (-self.i2)
            .max(-self.r2)
            .max(self.i2 + self.r2 - n_pop)
            .max(0.0)
    }
}

/// How a reproduction-number set was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    NextGeneration,
}

/// Basic and invasion reproduction numbers.
///
/// `r12` is strain 1 invading the strain-2 endemic state and `r21` the
/// reverse. When the invaded strain cannot persist on its own the endemic
/// state it refers to is not physical; the corresponding flag records that.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReproductionSet {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub r12: f64,
    pub r21: f64,
    pub provenance: Provenance,
    /// `false` when `r2 <= 1`, i.e. the strain-2 endemic state used by `r12`
    /// has a negative component.
    pub r12_target_physical: bool,
    /// `false` when `r1 <= 1`.
    pub r21_target_physical: bool,
}

impl ReproductionSet {
    pub fn min_threshold(&self) -> f64 {
        self.r1.min(self.r2).min(self.r12).min(self.r21)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_params() -> ModelParams {
        ModelParams::new(0.4, 0.6, 0.2, 0.1, 0.1, 0.1, 0.0, 10000.0).unwrap()
    }

    #[test]
    fn reference_parameters_are_valid() {
        let p = reference_params();
        assert_eq!(p.n_pop, 10000.0);
    }

    #[test]
    fn rejects_out_of_range_epsilon() {
        let err = ModelParams { epsilon: 1.5, ..reference_params() }.validate().unwrap_err();
        assert_eq!(err, ParamError::EpsilonOutOfRange(1.5));
    }

    #[test]
    fn rejects_zero_population() {
        let err = ModelParams { n_pop: 0.0, ..reference_params() }.validate().unwrap_err();
        assert_eq!(err, ParamError::NonPositivePopulation(0.0));
    }

    #[test]
    fn rejects_negative_and_zero_rates() {
        assert!(matches!(
            ModelParams { sigma2: -0.1, ..reference_params() }.validate(),
            Err(ParamError::NegativeRate { name: "sigma2", .. })
        ));
        assert!(matches!(
            ModelParams { gamma1: 0.0, ..reference_params() }.validate(),
            Err(ParamError::NegativeRate { name: "gamma1", .. })
        ));
        assert!(ModelParams { beta1: 0.0, sigma1: 0.0, ..reference_params() }.validate().is_ok());
    }

    #[test]
    fn validate_is_idempotent() {
        let p = reference_params();
        assert_eq!(p.validate().unwrap().validate().unwrap(), p);
    }

    #[test]
    fn state_construction_is_exact() {
        assert!(FullState::new(1.0, 0.0, -1e-300, 0.0, 0.0).is_err());
        assert!(ReducedState::new(6000.0, 5000.0, 10000.0).is_err());
        let y = ReducedState::new(5000.0, 5000.0, 10000.0).unwrap();
        assert_eq!(y.triangle_violation(10000.0), 0.0);
    }

    #[test]
    fn rate_names_round_trip() {
        for r in RateName::ALL {
            assert_eq!(RateName::parse(r.as_str()), Some(r));
        }
        assert_eq!(RateName::parse("n_pop"), None);
    }
}
