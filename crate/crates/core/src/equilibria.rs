//! Steady states of the full and reduced systems.
//!
//! The three boundary states have closed forms. The coexistence state of the
//! full system is found by reducing the steady-state equations to a single
//! monotone scalar problem in `I1` and bisecting; the reduced system's steady
//! state is the intersection of its two nullclines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{full_rhs, reduced_rhs};
use crate::model::{FullState, ModelParams, ReducedState};
use crate::numeric::bisect;
use crate::phase::{r2_nullcline_at, i2_nullcline_residual};
use crate::reproduction::closed_form_reproduction;

/// Bisection stopping width as a fraction of `N`.
pub const ROOT_TOLERANCE: f64 = 1e-10;
pub const MAX_BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("I1 = {i1} is outside [0, {upper})")]
    OutOfDomain { i1: f64, upper: f64 },
    #[error("all thresholds exceed one but no sign change was found for the coexistence equation")]
    BisectionStagnated,
    #[error("reduced steady state requires R1 > 1, R2 > 1 and R21 > 1 (failed: {0})")]
    PreconditionFailed(Threshold),
    #[error(transparent)]
    Reproduction(#[from] crate::reproduction::ReproductionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyKind {
    DiseaseFree,
    OriginalOnly,
    EmergingOnly,
    Coexistence,
}

/// Reproduction-number thresholds that gate the steady states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Threshold {
    R1,
    R2,
    R12,
    R21,
}

impl std::fmt::Display for Threshold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Threshold::R1 => "R1",
            Threshold::R2 => "R2",
            Threshold::R12 => "R12",
            Threshold::R21 => "R21",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateReport {
    pub kind: SteadyKind,
    pub state: FullState,
    pub physical: bool,
    /// Largest absolute component of the full vector field at `state`.
    pub residual: f64,
}

/// Largest absolute component of the full vector field.
pub fn full_residual(p: &ModelParams, x: &FullState) -> f64 {
    full_rhs(p, x).to_array().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest absolute component of the reduced vector field.
pub fn reduced_residual(p: &ModelParams, y: &ReducedState) -> f64 {
    let d = reduced_rhs(p, y);
    d.i2.abs().max(d.r2.abs())
}

/// Residual tolerance for solver output: `1e-8 N max-rate`.
pub fn residual_tolerance(p: &ModelParams) -> f64 {
    1e-8 * p.n_pop * p.max_rate()
}

/// Original-strain-only equilibrium. Has negative components when
/// `beta1 < gamma1`.
pub fn original_only_state(p: &ModelParams) -> FullState {
    let n = p.n_pop;
    let excess = n * (p.beta1 - p.gamma1) / (p.beta1 * (p.gamma1 + p.sigma1));
    FullState {
        s: n * p.gamma1 / p.beta1,
        i1: p.sigma1 * excess,
        r1: p.gamma1 * excess,
        i2: 0.0,
        r2: 0.0,
    }
}

/// Emerging-strain-only equilibrium. Has negative components when
/// `beta2 < gamma2`.
pub fn emerging_only_state(p: &ModelParams) -> FullState {
    let n = p.n_pop;
    let excess = n * (p.beta2 - p.gamma2) / (p.beta2 * (p.gamma2 + p.sigma2));
    FullState {
        s: n * p.gamma2 / p.beta2,
        i1: 0.0,
        r1: 0.0,
        i2: p.sigma2 * excess,
        r2: p.gamma2 * excess,
    }
}

/// Disease-free, original-only and emerging-only states, in that order.
pub fn boundary_steady_states(p: &ModelParams) -> Vec<SteadyStateReport> {
    let x0 = FullState::disease_free(p.n_pop);
    let x1 = original_only_state(p);
    let x2 = emerging_only_state(p);
    vec![
        SteadyStateReport {
            kind: SteadyKind::DiseaseFree,
            state: x0,
            physical: true,
            residual: full_residual(p, &x0),
        },
        SteadyStateReport {
            kind: SteadyKind::OriginalOnly,
            state: x1,
            physical: p.beta1 > p.gamma1,
            residual: full_residual(p, &x1),
        },
        SteadyStateReport {
            kind: SteadyKind::EmergingOnly,
            state: x2,
            physical: p.beta2 > p.gamma2,
            residual: full_residual(p, &x2),
        },
    ]
}

/// Curves parametrised by `I1` along which the emerging strain's two
/// steady-state equations hold.
///
/// `phi` and `psi` are the `I2` and `R2` solving those equations; `f` and `g`
/// are the values of `R1` that satisfy, respectively, the `I1` and `R1`
/// equations. Coexistence states are the crossings `f = g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoexistenceCurves {
    pub phi: f64,
    pub psi: f64,
    pub f: f64,
    pub g: f64,
}

/// Upper end `N (1 - 1/R2)` of the `I1` range on which `phi > 0`.
pub fn coexistence_upper_bound(p: &ModelParams) -> f64 {
    p.n_pop * (1.0 - p.gamma2 / p.beta2)
}

fn curves_unchecked(p: &ModelParams, i1: f64) -> CoexistenceCurves {
    let n = p.n_pop;
    let k = n * (p.beta2 - p.gamma2) - p.beta2 * i1;
    let a = p.beta1 * (1.0 - p.epsilon) * i1 + n * p.sigma2;
    let d = p.beta2 * (a + n * p.gamma2);
    let phi = k * a / d;
    let psi = n * p.gamma2 * k / d;
    let f = n - i1 - phi - p.epsilon * psi - n * p.gamma1 / p.beta1;
    let g = n * p.gamma1 * i1 / (n * p.sigma1 + p.beta2 * phi);
    CoexistenceCurves { phi, psi, f, g }
}

/// Evaluates the curves at `i1`, which must lie in `[0, N(1 - 1/R2))`.
pub fn coexistence_curves(p: &ModelParams, i1: f64) -> Result<CoexistenceCurves, EquilibriumError> {
    let upper = coexistence_upper_bound(p);
    if !(p.beta1 > 0.0 && p.beta2 > p.gamma2 && i1 >= 0.0 && i1 < upper) {
        return Err(EquilibriumError::OutOfDomain { i1, upper });
    }
    Ok(curves_unchecked(p, i1))
}

fn coexistence_gap(p: &ModelParams, i1: f64) -> f64 {
    let c = curves_unchecked(p, i1);
    c.f - c.g
}

fn coexistence_state(p: &ModelParams, i1: f64) -> FullState {
    let c = curves_unchecked(p, i1);
    FullState {
        s: p.n_pop - i1 - c.g - c.phi - c.psi,
        i1,
        r1: c.g,
        i2: c.phi,
        r2: c.psi,
    }
}

/// Bisects `f - g` on a caller-chosen sub-bracket of the `I1` domain.
/// Returns `None` when the bracket holds no sign change.
pub fn coexistence_root_in(p: &ModelParams, lo: f64, hi: f64) -> Option<f64> {
    if !(p.beta1 > 0.0 && p.beta2 > p.gamma2) {
        return None;
    }
    let upper = coexistence_upper_bound(p);
    let (lo, hi) = (lo.max(0.0), hi.min(upper));
    if !(hi > lo) {
        return None;
    }
    bisect(
        |i1| coexistence_gap(p, i1),
        lo,
        hi,
        ROOT_TOLERANCE * p.n_pop,
        MAX_BISECTION_STEPS,
    )
    .map(|b| b.root)
}

/// Result of the coexistence search on the full system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CoexistenceOutcome {
    Found(SteadyStateReport),
    NoCoexistence { threshold: Threshold, value: f64 },
}

impl CoexistenceOutcome {
    /// The state, when one with `I1 > 0`, `I2 > 0` and no negative
    /// component was found.
    pub fn positive_state(&self) -> Option<FullState> {
        match self {
            CoexistenceOutcome::Found(r) if r.physical => Some(r.state),
            _ => None,
        }
    }
}

/// First threshold (in the order R1, R2, R12, R21) that is not above one.
pub fn failing_threshold(p: &ModelParams) -> Result<Option<(Threshold, f64)>, EquilibriumError> {
    let rs = closed_form_reproduction(p)?;
    Ok([
        (Threshold::R1, rs.r1),
        (Threshold::R2, rs.r2),
        (Threshold::R12, rs.r12),
        (Threshold::R21, rs.r21),
    ]
    .into_iter()
    .find(|&(_, v)| !(v > 1.0)))
}

/// Coexistence steady state of the full system.
///
/// The search does not consult the thresholds: it looks for a sign change
/// of `f - g` over `[0, N(1 - 1/R2)]` and bisects it. The thresholds are
/// only used to name the reason when nothing is found, and to flag the
/// inconsistent case where all of them exceed one but no root exists.
pub fn solve_coexistence_full(p: &ModelParams) -> Result<CoexistenceOutcome, EquilibriumError> {
    let failing = failing_threshold(p)?;
    let no_coexistence = || match failing {
        Some((threshold, value)) => Ok(CoexistenceOutcome::NoCoexistence { threshold, value }),
        None => Err(EquilibriumError::BisectionStagnated),
    };
    if !(p.beta1 > 0.0 && p.beta2 > p.gamma2) {
        return no_coexistence();
    }
    let upper = coexistence_upper_bound(p);
    let at_zero = coexistence_gap(p, 0.0);
    let at_upper = coexistence_gap(p, upper);
    // a root strictly inside the domain needs f > g at 0 and f < g at the top
    if !(at_zero > 0.0 && at_upper < 0.0) {
        return no_coexistence();
    }
    let Some(i1) = coexistence_root_in(p, 0.0, upper) else {
        return Err(EquilibriumError::BisectionStagnated);
    };
    let state = coexistence_state(p, i1);
    let physical = state.i1 > 0.0
        && state.i2 > 0.0
        && state.to_array().iter().all(|&v| v >= 0.0);
    Ok(CoexistenceOutcome::Found(SteadyStateReport {
        kind: SteadyKind::Coexistence,
        state,
        physical,
        residual: full_residual(p, &state),
    }))
}

/// Long-run regime of the reduced system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReducedRegime {
    /// Steady state left of the switching line, original strain persists.
    Coexistence,
    /// Steady state on or beyond the switching line, original strain absent.
    EmergingOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedSteadyState {
    pub state: ReducedState,
    pub regime: ReducedRegime,
    /// `true` for `0 < epsilon < 1`, where uniqueness and the regime rule
    /// are conjectured rather than proven.
    pub conjectured: bool,
    pub residual: f64,
}

/// Sign of the vertical gap between the `I2`- and `R2`-nullclines at column
/// `i2`: positive when the `I2`-nullcline lies above.
///
/// The `I2`-nullcline residual is strictly decreasing in `R2`, so its sign at
/// the `R2`-nullcline point gives the sign of the gap without locating the
/// `I2`-nullcline. A missing `R2`-nullcline point is replaced by the top edge
/// of the triangle.
pub fn nullcline_gap_sign(p: &ModelParams, i2: f64) -> f64 {
    let r2 = r2_nullcline_at(p, i2).value_or_edge(p.n_pop - i2);
    i2_nullcline_residual(p, &ReducedState { i2, r2 })
}

/// Unique positive steady state of the reduced system, as the intersection
/// of its nullclines.
pub fn solve_reduced_steady_state(p: &ModelParams) -> Result<ReducedSteadyState, EquilibriumError> {
    let rs = closed_form_reproduction(p)?;
    for (threshold, value) in [(Threshold::R1, rs.r1), (Threshold::R2, rs.r2), (Threshold::R21, rs.r21)] {
        if !(value > 1.0) {
            return Err(EquilibriumError::PreconditionFailed(threshold));
        }
    }
    let n = p.n_pop;
    let root = bisect(
        |i2| nullcline_gap_sign(p, i2),
        0.0,
        n,
        ROOT_TOLERANCE * n,
        MAX_BISECTION_STEPS,
    )
    .ok_or(EquilibriumError::BisectionStagnated)?;
    let i2 = root.root;
    let r2 = r2_nullcline_at(p, i2).value_or_edge(n - i2);
    let state = ReducedState { i2, r2 };
    let regime = if i2 + p.epsilon * r2 < p.switching_level() {
        ReducedRegime::Coexistence
    } else {
        ReducedRegime::EmergingOnly
    };
    Ok(ReducedSteadyState {
        state,
        regime,
        conjectured: p.epsilon != 0.0 && p.epsilon != 1.0,
        residual: reduced_residual(p, &state),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(beta1: f64, epsilon: f64) -> ModelParams {
        ModelParams::new(beta1, 0.6, 0.2, 0.1, 0.1, 0.1, epsilon, 10000.0).unwrap()
    }

    #[test]
    fn boundary_states_for_reference() {
        let p = reference(0.4, 0.0);
        let states = boundary_steady_states(&p);
        assert_eq!(states[0].state, FullState::disease_free(p.n_pop));
        assert_eq!(states[0].residual, 0.0);
        let x1 = states[1].state;
        assert!((x1.s - 5000.0).abs() < 0.01);
        assert!((x1.i1 - 1666.67).abs() < 0.01);
        assert!((x1.r1 - 3333.33).abs() < 0.01);
        assert!((x1.total() - p.n_pop).abs() < 1e-9);
        assert!(states[1].physical && states[2].physical);
        assert!(states.iter().all(|s| s.residual <= residual_tolerance(&p)));
    }

    #[test]
    fn subcritical_original_strain_is_not_physical() {
        let p = reference(0.15, 0.0);
        let x1 = &boundary_steady_states(&p)[1];
        assert!(!x1.physical);
        assert!(x1.state.i1 < 0.0);
    }

    #[test]
    fn curves_at_zero() {
        let p = reference(0.4, 0.0);
        let c = coexistence_curves(&p, 0.0).unwrap();
        assert_eq!(c.g, 0.0);
        // phi(0) reproduces the I2 component of the emerging-only state
        let expected = 10000.0 * 0.1 * 0.5 / (0.6 * 0.2);
        assert!((c.phi - expected).abs() < 1e-9);
        assert!((c.phi - 4166.67).abs() < 0.01);
        assert!((c.psi - emerging_only_state(&p).r2).abs() < 1e-9);
    }

    #[test]
    fn curves_are_monotone() {
        for eps in [0.0, 0.3, 1.0] {
            let p = reference(0.4, eps);
            let upper = coexistence_upper_bound(&p);
            let h = 1e-6 * upper;
            for k in 1..=100 {
                let i1 = upper * k as f64 / 101.0;
                let lo = coexistence_curves(&p, i1 - h).unwrap();
                let hi = coexistence_curves(&p, i1 + h).unwrap();
                if eps < 1.0 {
                    assert!(hi.f < lo.f, "f not decreasing at {i1} (eps {eps})");
                } else {
                    // with complete cross-immunity f has zero slope
                    assert!(hi.f <= lo.f + 1e-9 * p.n_pop);
                }
                assert!(hi.g > lo.g, "g not increasing at {i1}");
            }
        }
    }

    #[test]
    fn curves_reject_out_of_domain() {
        let p = reference(0.4, 0.0);
        let upper = coexistence_upper_bound(&p);
        assert!(matches!(coexistence_curves(&p, upper), Err(EquilibriumError::OutOfDomain { .. })));
        assert!(matches!(coexistence_curves(&p, -1.0), Err(EquilibriumError::OutOfDomain { .. })));
    }

    #[test]
    fn coexistence_for_reference() {
        let p = reference(0.4, 0.0);
        let out = solve_coexistence_full(&p).unwrap();
        let x = out.positive_state().expect("coexistence expected");
        assert!(x.i1 > 0.0 && x.i2 > 0.0);
        let CoexistenceOutcome::Found(report) = out else { unreachable!() };
        assert!(report.residual <= 1e-8 * p.n_pop, "residual {}", report.residual);
        assert!((x.total() - p.n_pop).abs() < 1e-8 * p.n_pop);
    }

    #[test]
    fn no_coexistence_names_r12() {
        for p in [reference(0.3, 0.0), reference(0.4, 0.5)] {
            match solve_coexistence_full(&p).unwrap() {
                CoexistenceOutcome::NoCoexistence { threshold, value } => {
                    assert_eq!(threshold, Threshold::R12);
                    assert!(value < 1.0);
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        let r12 = failing_threshold(&reference(0.3, 0.0)).unwrap().unwrap().1;
        assert!((r12 - 0.875).abs() < 1e-12);
    }

    #[test]
    fn reduced_regimes_for_reference_cases() {
        let a = solve_reduced_steady_state(&reference(0.4, 0.0)).unwrap();
        assert_eq!(a.regime, ReducedRegime::Coexistence);
        assert!(!a.conjectured);
        let b = solve_reduced_steady_state(&reference(0.3, 0.0)).unwrap();
        assert_eq!(b.regime, ReducedRegime::EmergingOnly);
        let c = solve_reduced_steady_state(&reference(0.4, 0.5)).unwrap();
        assert!(c.conjectured);
        for s in [a, b, c] {
            assert!(s.residual <= residual_tolerance(&reference(0.4, 0.0)), "{s:?}");
        }
    }

    #[test]
    fn reduced_and_full_coexistence_agree() {
        let p = reference(0.4, 0.0);
        let full = solve_coexistence_full(&p).unwrap().positive_state().unwrap();
        let reduced = solve_reduced_steady_state(&p).unwrap().state;
        assert!((full.i2 - reduced.i2).abs() <= 1e-6 * p.n_pop);
        assert!((full.r2 - reduced.r2).abs() <= 1e-6 * p.n_pop);
    }

    #[test]
    fn emerging_only_reduced_state_matches_boundary_state() {
        let p = reference(0.3, 0.0);
        let reduced = solve_reduced_steady_state(&p).unwrap().state;
        let x2 = emerging_only_state(&p);
        assert!((reduced.i2 - x2.i2).abs() <= 1e-6 * p.n_pop);
        assert!((reduced.r2 - x2.r2).abs() <= 1e-6 * p.n_pop);
    }

    #[test]
    fn reduced_precondition() {
        let p = reference(0.15, 0.0);
        assert_eq!(
            solve_reduced_steady_state(&p).unwrap_err(),
            EquilibriumError::PreconditionFailed(Threshold::R1)
        );
    }
}
