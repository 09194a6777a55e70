//! Vector fields of the full and reduced systems, the quasi-steady closure
//! for the original strain, a fixed-step RK4 integrator and model-side
//! incidence accumulation.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FullState, ModelParams, ReducedState};

/// Default integration step, in days.
pub const DEFAULT_STEP: f64 = 0.05;

/// Components that undershoot zero by less than this fraction of `N` are
/// clamped back to zero after every step.
pub const CLAMP_FRACTION: f64 = 1e-12;

/// Length of an incidence aggregation window, in days.
pub const WINDOW_DAYS: f64 = 14.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("integration step must be positive and finite, got {0}")]
    StepNotPositive(f64),
    #[error("time span [{t0}, {t1}] is empty")]
    EmptySpan { t0: f64, t1: f64 },
    #[error("non-finite state encountered at t = {time}")]
    NonFiniteState { time: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IncidenceError {
    #[error("grid spacing {step} does not divide the {window}-day window")]
    WindowMisaligned { step: f64, window: f64 },
    #[error("trajectory has fewer than two points")]
    TooShort,
}

/// Which vector field to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Full,
    Reduced,
}

/// Time derivative of the full system, component-wise in people/day.
///
/// The returned components sum to zero analytically.
pub fn full_rhs(p: &ModelParams, x: &FullState) -> FullState {
    let n = p.n_pop;
    let inf1 = p.beta1 / n * x.i1;
    let inf2 = p.beta2 / n * x.i2;
    // R2 -> I1 and R1 -> I2 reinfection flows
    let r2_to_i1 = inf1 * (1.0 - p.epsilon) * x.r2;
    let r1_to_i2 = inf2 * x.r1;
    FullState {
        s: -x.s * (inf1 + inf2) + p.sigma1 * x.r1 + p.sigma2 * x.r2,
        i1: inf1 * x.s + r2_to_i1 - p.gamma1 * x.i1,
        r1: p.gamma1 * x.i1 - p.sigma1 * x.r1 - r1_to_i2,
        i2: inf2 * x.s + r1_to_i2 - p.gamma2 * x.i2,
        r2: p.gamma2 * x.i2 - p.sigma2 * x.r2 - r2_to_i1,
    }
}

/// Which piece of the quasi-steady closure applies at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaBranch {
    /// `I2 + eps*R2 < N(1 - 1/R1)`: the original strain persists.
    Endemic,
    /// On or beyond the switching line: the original strain is absent.
    Extinct,
}

pub fn omega_branch(p: &ModelParams, y: &ReducedState) -> OmegaBranch {
    if y.i2 + p.epsilon * y.r2 < p.switching_level() {
        OmegaBranch::Endemic
    } else {
        OmegaBranch::Extinct
    }
}

/// Steady level of `I1` given the emerging strain at `(I2, R2)`.
///
/// Obtained by holding the original strain's two equations at equilibrium.
/// Continuous across the switching line and never negative.
pub fn omega(p: &ModelParams, y: &ReducedState) -> f64 {
    match omega_branch(p, y) {
        OmegaBranch::Extinct => 0.0,
        OmegaBranch::Endemic => {
            let n = p.n_pop;
            let surplus = n * (p.beta1 - p.gamma1) - p.beta1 * (y.i2 + p.epsilon * y.r2);
            let v = p.beta2 * y.i2 + n * p.sigma1;
            let w = v + n * p.gamma1;
            (surplus * v / (p.beta1 * w)).max(0.0)
        }
    }
}

/// Closed-form partial derivatives `(d omega/d I2, d omega/d R2)`.
///
/// On the switching line the function is not differentiable; there the
/// extinct-side value `(0, 0)` is returned.
pub fn omega_gradient(p: &ModelParams, y: &ReducedState) -> (f64, f64) {
    match omega_branch(p, y) {
        OmegaBranch::Extinct => (0.0, 0.0),
        OmegaBranch::Endemic => {
            let n = p.n_pop;
            let v = p.beta2 * y.i2 + n * p.sigma1;
            let w = v + n * p.gamma1;
            let om = omega(p, y);
            let d_i2 = n * p.gamma1 * (1.0 + p.beta2 * om / v) / w - 1.0;
            let d_r2 = -p.epsilon * v / w;
            (d_i2, d_r2)
        }
    }
}

/// Original-strain immune level paired with `I1 = omega` at the quasi-steady
/// state: `R1 = N gamma1 omega / (N sigma1 + beta2 I2)`.
pub fn quasi_steady_recovered(p: &ModelParams, y: &ReducedState, omega_value: f64) -> f64 {
    if omega_value <= 0.0 {
        return 0.0;
    }
    let n = p.n_pop;
    n * p.gamma1 * omega_value / (n * p.sigma1 + p.beta2 * y.i2)
}

/// Full state reconstructed from a reduced point with the original strain at
/// its quasi-steady level.
pub fn lift_reduced(p: &ModelParams, y: &ReducedState) -> FullState {
    let i1 = omega(p, y);
    let r1 = quasi_steady_recovered(p, y, i1);
    FullState {
        s: p.n_pop - i1 - r1 - y.i2 - y.r2,
        i1,
        r1,
        i2: y.i2,
        r2: y.r2,
    }
}

/// Time derivative `(dI2, dR2)` of the reduced switching system.
pub fn reduced_rhs(p: &ModelParams, y: &ReducedState) -> ReducedState {
    let n = p.n_pop;
    let om = omega(p, y);
    ReducedState {
        i2: p.beta2 / n * (n - om - y.i2 - y.r2) * y.i2 - p.gamma2 * y.i2,
        r2: p.gamma2 * y.i2 - p.sigma2 * y.r2 - p.beta1 / n * (1.0 - p.epsilon) * om * y.r2,
    }
}

/// Uniformly sampled solution of an initial-value problem.
///
/// Points are spaced by the step size, except that the last step is shortened
/// to land exactly on the end of the span.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
}

impl<S: Copy> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, S)> {
        Some((*self.times.last()?, *self.states.last()?))
    }
}

/// One classical RK4 step of size `h`.
#[inline]
pub fn rk4_step<const D: usize, F>(rhs: &mut F, x: &[f64; D], h: f64) -> [f64; D]
where
    F: FnMut(&[f64; D]) -> [f64; D],
{
    let axpy = |a: &[f64; D], k: &[f64; D], c: f64| {
        let mut out = *a;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += c * ki;
        }
        out
    };
    let k1 = rhs(x);
    let k2 = rhs(&axpy(x, &k1, 0.5 * h));
    let k3 = rhs(&axpy(x, &k2, 0.5 * h));
    let k4 = rhs(&axpy(x, &k3, h));
    let mut out = *x;
    for i in 0..D {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Number of steps and the length of the final step for a span.
fn step_plan(t0: f64, t1: f64, h: f64) -> Result<(usize, f64), IntegrationError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(IntegrationError::StepNotPositive(h));
    }
    if !(t1 > t0) {
        return Err(IntegrationError::EmptySpan { t0, t1 });
    }
    let span = t1 - t0;
    let ratio = span / h;
    // tolerate round-off so that e.g. 14 / 0.05 gives exactly 280 steps
    let full = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };
    let last = span - (full - 1) as f64 * h;
    Ok((full, last))
}

/// Integrates with classical fixed-step RK4, handing every accepted point
/// (including the initial one) to `observe`.
///
/// Components that dip below zero by no more than `clamp_floor` are reset to
/// zero after each step. Returns the terminal state.
pub fn integrate_rk4_with<const D: usize, F, O>(
    rhs: F,
    x0: [f64; D],
    t_span: (f64, f64),
    h: f64,
    clamp_floor: f64,
    mut observe: O,
) -> Result<[f64; D], IntegrationError>
where
    F: FnMut(&[f64; D]) -> [f64; D],
    O: FnMut(f64, &[f64; D]),
{
    integrate_rk4_until(rhs, x0, t_span, h, clamp_floor, |t, x| {
        observe(t, x);
        ControlFlow::Continue(())
    })
    .map(|(_, x)| x)
}

/// As [`integrate_rk4_with`], but `observe` may stop the integration early.
/// Returns the time and state of the last observed point.
pub fn integrate_rk4_until<const D: usize, F, O>(
    mut rhs: F,
    x0: [f64; D],
    t_span: (f64, f64),
    h: f64,
    clamp_floor: f64,
    mut observe: O,
) -> Result<(f64, [f64; D]), IntegrationError>
where
    F: FnMut(&[f64; D]) -> [f64; D],
    O: FnMut(f64, &[f64; D]) -> ControlFlow<()>,
{
    let (t0, t1) = t_span;
    let (n_steps, last) = step_plan(t0, t1, h)?;
    let mut x = x0;
    if observe(t0, &x).is_break() {
        return Ok((t0, x));
    }
    for k in 0..n_steps {
        let (dt, t) = if k + 1 == n_steps {
            (last, t1)
        } else {
            (h, t0 + (k + 1) as f64 * h)
        };
        x = rk4_step(&mut rhs, &x, dt);
        for v in x.iter_mut() {
            if !v.is_finite() {
                return Err(IntegrationError::NonFiniteState { time: t });
            }
            if *v < 0.0 && *v >= -clamp_floor {
                *v = 0.0;
            }
        }
        if observe(t, &x).is_break() {
            return Ok((t, x));
        }
    }
    Ok((t1, x))
}

/// Integrates and stores every point.
pub fn integrate_rk4<const D: usize, F>(
    rhs: F,
    x0: [f64; D],
    t_span: (f64, f64),
    h: f64,
    clamp_floor: f64,
) -> Result<(Vec<f64>, Vec<[f64; D]>), IntegrationError>
where
    F: FnMut(&[f64; D]) -> [f64; D],
{
    let mut times = Vec::new();
    let mut states = Vec::new();
    integrate_rk4_with(rhs, x0, t_span, h, clamp_floor, |t, x| {
        times.push(t);
        states.push(*x);
    })?;
    Ok((times, states))
}

pub fn simulate_full(
    p: &ModelParams,
    x0: &FullState,
    t_span: (f64, f64),
    h: f64,
) -> Result<Trajectory<FullState>, IntegrationError> {
    let rhs = |x: &[f64; 5]| full_rhs(p, &FullState::from_array(*x)).to_array();
    let (times, states) = integrate_rk4(rhs, x0.to_array(), t_span, h, CLAMP_FRACTION * p.n_pop)?;
    Ok(Trajectory {
        times,
        states: states.into_iter().map(FullState::from_array).collect(),
    })
}

pub fn simulate_reduced(
    p: &ModelParams,
    y0: &ReducedState,
    t_span: (f64, f64),
    h: f64,
) -> Result<Trajectory<ReducedState>, IntegrationError> {
    let rhs = |y: &[f64; 2]| reduced_rhs(p, &ReducedState::from_array(*y)).to_array();
    let (times, states) = integrate_rk4(rhs, y0.to_array(), t_span, h, CLAMP_FRACTION * p.n_pop)?;
    Ok(Trajectory {
        times,
        states: states.into_iter().map(ReducedState::from_array).collect(),
    })
}

/// Terminal state only, without storing the path.
pub fn terminal_full(
    p: &ModelParams,
    x0: &FullState,
    t_span: (f64, f64),
    h: f64,
) -> Result<FullState, IntegrationError> {
    let rhs = |x: &[f64; 5]| full_rhs(p, &FullState::from_array(*x)).to_array();
    integrate_rk4_with(rhs, x0.to_array(), t_span, h, CLAMP_FRACTION * p.n_pop, |_, _| {})
        .map(FullState::from_array)
}

pub fn terminal_reduced(
    p: &ModelParams,
    y0: &ReducedState,
    t_span: (f64, f64),
    h: f64,
) -> Result<ReducedState, IntegrationError> {
    let rhs = |y: &[f64; 2]| reduced_rhs(p, &ReducedState::from_array(*y)).to_array();
    integrate_rk4_with(rhs, y0.to_array(), t_span, h, CLAMP_FRACTION * p.n_pop, |_, _| {})
        .map(ReducedState::from_array)
}

/// Rate of new infections `(strain 1, strain 2)` in the full system: the
/// force-of-infection inflows into `I1` and `I2`.
pub fn full_incidence_rate(p: &ModelParams, x: &FullState) -> (f64, f64) {
    let n = p.n_pop;
    (
        p.beta1 / n * x.i1 * (x.s + (1.0 - p.epsilon) * x.r2),
        p.beta2 / n * x.i2 * (x.s + x.r1),
    )
}

/// Incidence rate for the reduced system, with `I1 = omega` and `R1` at its
/// quasi-steady level.
pub fn reduced_incidence_rate(p: &ModelParams, y: &ReducedState) -> (f64, f64) {
    full_incidence_rate(p, &lift_reduced(p, y))
}

/// Running totals of new cases per strain, nondecreasing along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IncidenceAccumulator {
    pub new_cases_1: f64,
    pub new_cases_2: f64,
}

/// Cumulative new cases at every grid time, by the trapezoid rule.
pub fn cumulative_incidence(times: &[f64], rates: &[(f64, f64)]) -> Vec<IncidenceAccumulator> {
    let mut acc = IncidenceAccumulator::default();
    let mut out = Vec::with_capacity(times.len());
    if times.is_empty() {
        return out;
    }
    out.push(acc);
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        acc.new_cases_1 += 0.5 * dt * (rates[k - 1].0 + rates[k].0);
        acc.new_cases_2 += 0.5 * dt * (rates[k - 1].1 + rates[k].1);
        out.push(acc);
    }
    out
}

/// Per-window new-case totals over consecutive 14-day windows starting at
/// the first grid time. Only complete windows are returned.
pub fn window_totals(
    times: &[f64],
    rates: &[(f64, f64)],
) -> Result<Vec<IncidenceAccumulator>, IncidenceError> {
    if times.len() < 2 {
        return Err(IncidenceError::TooShort);
    }
    let step = times[1] - times[0];
    let ratio = WINDOW_DAYS / step;
    let per_window = ratio.round();
    if per_window < 1.0 || (ratio - per_window).abs() > 1e-9 * ratio {
        return Err(IncidenceError::WindowMisaligned {
            step,
            window: WINDOW_DAYS,
        });
    }
    let per_window = per_window as usize;
    let cumulative = cumulative_incidence(times, rates);
    let mut out = Vec::new();
    let mut start = 0;
    while start + per_window < times.len() {
        let end = start + per_window;
        if ((times[end] - times[start]) - WINDOW_DAYS).abs() > 1e-9 * WINDOW_DAYS {
            // trailing shortened step
            break;
        }
        out.push(IncidenceAccumulator {
            new_cases_1: cumulative[end].new_cases_1 - cumulative[start].new_cases_1,
            new_cases_2: cumulative[end].new_cases_2 - cumulative[start].new_cases_2,
        });
        start = end;
    }
    Ok(out)
}

/// Per-window model incidence along a full-system trajectory.
pub fn accumulate_incidence(
    p: &ModelParams,
    traj: &Trajectory<FullState>,
) -> Result<Vec<IncidenceAccumulator>, IncidenceError> {
    let rates: Vec<_> = traj.states.iter().map(|x| full_incidence_rate(p, x)).collect();
    window_totals(&traj.times, &rates)
}

/// Per-window model incidence along a reduced-system trajectory.
pub fn accumulate_reduced_incidence(
    p: &ModelParams,
    traj: &Trajectory<ReducedState>,
) -> Result<Vec<IncidenceAccumulator>, IncidenceError> {
    let rates: Vec<_> = traj.states.iter().map(|y| reduced_incidence_rate(p, y)).collect();
    window_totals(&traj.times, &rates)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_params() -> ModelParams {
        ModelParams::new(0.4, 0.6, 0.2, 0.1, 0.1, 0.1, 0.0, 10000.0).unwrap()
    }

    /// Original-strain-only equilibrium written out directly from the model
    /// equations, independent of the equilibria module.
    fn x1_oracle(p: &ModelParams) -> FullState {
        let n = p.n_pop;
        FullState {
            s: n * p.gamma1 / p.beta1,
            i1: n * p.sigma1 * (p.beta1 - p.gamma1) / (p.beta1 * (p.gamma1 + p.sigma1)),
            r1: n * p.gamma1 * (p.beta1 - p.gamma1) / (p.beta1 * (p.gamma1 + p.sigma1)),
            i2: 0.0,
            r2: 0.0,
        }
    }

    #[test]
    fn disease_free_state_is_fixed() {
        let p = reference_params();
        let d = full_rhs(&p, &FullState::disease_free(p.n_pop));
        assert_eq!(d.to_array(), [0.0; 5]);
    }

    #[test]
    fn original_strain_equilibrium_is_fixed() {
        let p = reference_params();
        let x1 = x1_oracle(&p);
        assert!((x1.i1 - 5000.0 / 3.0).abs() < 1e-9);
        assert!((x1.r1 - 10000.0 / 3.0).abs() < 1e-9);
        let d = full_rhs(&p, &x1);
        for v in d.to_array() {
            assert!(v.abs() < 1e-10, "{d:?}");
        }
    }

    #[test]
    fn full_rhs_hand_values() {
        let p = reference_params();
        let x = FullState::new(9000.0, 500.0, 0.0, 500.0, 0.0).unwrap();
        let d = full_rhs(&p, &x);
        assert!((d.i1 - 80.0).abs() < 1e-10);
        assert!((d.i2 - 220.0).abs() < 1e-10);
        assert!(d.to_array().iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn omega_at_origin_matches_original_equilibrium() {
        let p = reference_params();
        let om = omega(&p, &ReducedState { i2: 0.0, r2: 0.0 });
        assert!((om - x1_oracle(&p).i1).abs() < 1e-9);
        assert!((om - 5000.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn omega_vanishes_on_and_beyond_switching_line() {
        let p = ModelParams { epsilon: 0.5, ..reference_params() };
        let level = p.switching_level();
        let on = ReducedState { i2: level - 0.5 * 2000.0, r2: 2000.0 };
        assert_eq!(omega_branch(&p, &on), OmegaBranch::Extinct);
        assert_eq!(omega(&p, &on), 0.0);
        let beyond = ReducedState { i2: level, r2: 100.0 };
        assert_eq!(omega(&p, &beyond), 0.0);
    }

    #[test]
    fn reduced_rhs_hand_values() {
        let p = reference_params();
        let y = ReducedState { i2: 2000.0, r2: 1000.0 };
        // (N(b1-g1) - b1 I2)(b2 I2 + N s1) / (b1 (b2 I2 + N(g1+s1))) = 1200*2200/1680
        let om_expected = 1200.0 * 2200.0 / 1680.0;
        assert!((omega(&p, &y) - om_expected).abs() < 1e-9);
        let d = reduced_rhs(&p, &y);
        let di2 = 0.6 / 10000.0 * (10000.0 - om_expected - 3000.0) * 2000.0 - 0.1 * 2000.0;
        let dr2 = 200.0 - 100.0 - 0.4 / 10000.0 * om_expected * 1000.0;
        assert!((d.i2 - di2).abs() < 1e-9);
        assert!((d.i2 - 451.428_571_428_571_4).abs() < 1e-6);
        assert!((d.r2 - dr2).abs() < 1e-9);
        assert!((d.r2 - 37.142_857_142_857_14).abs() < 1e-6);
    }

    #[test]
    fn reduced_axes_behave() {
        let p = reference_params();
        assert_eq!(reduced_rhs(&p, &ReducedState { i2: 0.0, r2: 4321.0 }).i2, 0.0);
        let d = reduced_rhs(&p, &ReducedState { i2: 1500.0, r2: 0.0 });
        assert!((d.r2 - p.gamma2 * 1500.0).abs() < 1e-12);
    }

    #[test]
    fn step_plan_lands_on_end() {
        assert_eq!(step_plan(0.0, 14.0, 0.05).unwrap(), (280, 14.0 - 279.0 * 0.05));
        let (n, last) = step_plan(0.0, 1.0, 0.3).unwrap();
        assert_eq!(n, 4);
        assert!((last - 0.1).abs() < 1e-12);
        assert!(matches!(step_plan(0.0, 1.0, 0.0), Err(IntegrationError::StepNotPositive(_))));
        assert!(matches!(step_plan(1.0, 1.0, 0.1), Err(IntegrationError::EmptySpan { .. })));
    }

    #[test]
    fn constant_trajectory_from_disease_free_state() {
        let p = reference_params();
        let x0 = FullState::disease_free(p.n_pop);
        let traj = simulate_full(&p, &x0, (0.0, 50.0), 0.1).unwrap();
        assert_eq!(traj.len(), 501);
        assert!((traj.times[500] - 50.0).abs() < 1e-12);
        assert!(traj.states.iter().all(|x| *x == x0));
    }

    #[test]
    fn non_finite_state_aborts() {
        let err = integrate_rk4(|x: &[f64; 1]| [x[0] * x[0]], [1.0], (0.0, 10.0), 0.5, 0.0).unwrap_err();
        assert!(matches!(err, IntegrationError::NonFiniteState { .. }));
    }

    #[test]
    fn rk4_is_exact_for_cubic_growth() {
        // x' = 3t^2 written autonomously as (x, t)' = (3t^2, 1)
        let (_, xs) = integrate_rk4(|x: &[f64; 2]| [3.0 * x[1] * x[1], 1.0], [0.0, 0.0], (0.0, 2.0), 0.25, 0.0)
            .unwrap();
        assert!((xs.last().unwrap()[0] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn zero_infection_incidence_is_zero() {
        let p = reference_params();
        let traj = simulate_full(&p, &FullState::disease_free(p.n_pop), (0.0, 42.0), 0.25).unwrap();
        let w = accumulate_incidence(&p, &traj).unwrap();
        assert_eq!(w.len(), 3);
        assert!(w.iter().all(|c| c.new_cases_1 == 0.0 && c.new_cases_2 == 0.0));
    }

    #[test]
    fn constant_state_window_total() {
        let p = reference_params();
        let x = FullState::new(6000.0, 1000.0, 1000.0, 1000.0, 1000.0).unwrap();
        let times: Vec<f64> = (0..=56).map(|k| k as f64 * 0.25).collect();
        let traj = Trajectory {
            states: vec![x; times.len()],
            times,
        };
        let w = accumulate_incidence(&p, &traj).unwrap();
        assert_eq!(w.len(), 1);
        let expected = 14.0 * p.beta1 / p.n_pop * x.i1 * (x.s + (1.0 - p.epsilon) * x.r2);
        assert!((w[0].new_cases_1 - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn misaligned_grid_is_rejected() {
        let times: Vec<f64> = (0..100).map(|k| k as f64 * 0.3).collect();
        let rates = vec![(1.0, 1.0); times.len()];
        assert!(matches!(window_totals(&times, &rates), Err(IncidenceError::WindowMisaligned { .. })));
    }

    #[test]
    fn lifted_state_conserves_population() {
        let p = reference_params();
        let x = lift_reduced(&p, &ReducedState { i2: 2000.0, r2: 1000.0 });
        assert!((x.total() - p.n_pop).abs() < 1e-9);
        // the lifted strain-1 pair satisfies the quasi-steady equations
        let d = full_rhs(&p, &x);
        assert!(d.i1.abs() < 1e-9 && d.r1.abs() < 1e-9);
    }
}
