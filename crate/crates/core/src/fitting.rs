//! Biweekly incidence data, the sum-of-squares objective and a seeded
//! Gauss-Newton search with random coordinate proposals.

use std::collections::HashMap;

use chrono::{Days, NaiveDate};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{CaseDataFile, VariantShareFile};
use crate::dynamics::{
    full_incidence_rate, full_rhs, integrate_rk4_with, lift_reduced, reduced_rhs, IntegrationError,
    ModelKind, CLAMP_FRACTION, WINDOW_DAYS,
};
use crate::model::{FullState, ModelParams, ReducedState, ReproductionSet};
use crate::reproduction::closed_form_reproduction;

/// Default integration step for fitting, in days.
pub const DEFAULT_FIT_STEP: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("window ending {window_end} is not fully covered by daily data")]
    IncompleteWindow { window_end: NaiveDate },
    #[error("share {value} for window ending {window_end} is outside [0, 1]")]
    ShareOutOfRange { window_end: NaiveDate, value: f64 },
    #[error("length mismatch: {data} data windows but {predicted} predictions")]
    LengthMismatch { data: usize, predicted: usize },
    #[error("no data windows")]
    EmptyData,
    #[error("constraint violated: {param} = {value} ({rule})")]
    ConstraintViolated { param: &'static str, value: f64, rule: String },
    #[error("integration step {0} does not divide the 14-day window")]
    StepMisaligned(f64),
    #[error("integration failed: {0}")]
    IntegrationFailed(#[from] IntegrationError),
}

/// Biweekly new-case totals split by strain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidenceSeries {
    pub window_end_dates: Vec<NaiveDate>,
    pub original_cases: Vec<f64>,
    pub emerging_cases: Vec<f64>,
}

impl IncidenceSeries {
    pub fn len(&self) -> usize {
        self.window_end_dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window_end_dates.is_empty()
    }

    /// Sum of squares of all observations.
    pub fn sum_of_squares(&self) -> f64 {
        self.original_cases.iter().chain(&self.emerging_cases).map(|v| v * v).sum()
    }

    /// Largest window total.
    pub fn max_window_total(&self) -> f64 {
        self.original_cases
            .iter()
            .zip(&self.emerging_cases)
            .map(|(x, y)| x + y)
            .fold(0.0, f64::max)
    }
}

/// Sums daily cases over the 14 days ending at each share date and splits
/// the total by the share. Share windows ending before `start` or after
/// `end` are dropped.
pub fn aggregate_biweekly(
    daily: &CaseDataFile,
    shares: &VariantShareFile,
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
) -> Result<IncidenceSeries, FitError> {
    let by_date: HashMap<NaiveDate, f64> = daily.dates.iter().copied().zip(daily.new_cases.iter().copied()).collect();
    let mut out = IncidenceSeries { window_end_dates: Vec::new(), original_cases: Vec::new(), emerging_cases: Vec::new() };
    for (&window_end, &share) in shares.window_end_dates.iter().zip(&shares.emerging_share) {
        if start.is_some_and(|s| window_end < s) || end.is_some_and(|e| window_end > e) {
            continue;
        }
        if !(0.0..=1.0).contains(&share) {
            return Err(FitError::ShareOutOfRange { window_end, value: share });
        }
        let mut total = 0.0;
        for back in 0..WINDOW_DAYS as u64 {
            let day = window_end
                .checked_sub_days(Days::new(back))
                .ok_or(FitError::IncompleteWindow { window_end })?;
            total += by_date.get(&day).ok_or(FitError::IncompleteWindow { window_end })?;
        }
        let emerging = total * share;
        out.window_end_dates.push(window_end);
        out.original_cases.push(total - emerging);
        out.emerging_cases.push(emerging);
    }
    Ok(out)
}

/// Model output per window: original-strain and emerging-strain new cases.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Predictions {
    pub original: Vec<f64>,
    pub emerging: Vec<f64>,
}

/// `sum (x - x_hat)^2 + sum (y - y_hat)^2`.
pub fn sse_objective(data: &IncidenceSeries, predictions: &Predictions) -> Result<f64, FitError> {
    let n = data.len();
    for len in [data.original_cases.len(), data.emerging_cases.len(), predictions.original.len(), predictions.emerging.len()] {
        if len != n {
            return Err(FitError::LengthMismatch { data: n, predicted: len });
        }
    }
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
    Ok(sq(&data.original_cases, &predictions.original) + sq(&data.emerging_cases, &predictions.emerging))
}

/// A candidate parameter vector: population, initial infections and rates.
///
/// The two recovery rates share the single value `gamma`. For the reduced
/// model `i1_0` and `r1_0` are ignored and derived from the quasi-steady
/// closure instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theta {
    pub n_pop: f64,
    pub i1_0: f64,
    pub r1_0: f64,
    pub i2_0: f64,
    pub r2_0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub epsilon: f64,
}

impl Theta {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            beta1: self.beta1,
            beta2: self.beta2,
            gamma1: self.gamma,
            gamma2: self.gamma,
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            epsilon: self.epsilon,
            n_pop: self.n_pop,
        }
    }

    /// Initial state of the full system. For the reduced model the
    /// original-strain compartments are lifted from the closure.
    pub fn initial_state(&self, model: ModelKind) -> FullState {
        match model {
            ModelKind::Full => FullState {
                s: self.n_pop - self.i1_0 - self.r1_0 - self.i2_0 - self.r2_0,
                i1: self.i1_0,
                r1: self.r1_0,
                i2: self.i2_0,
                r2: self.r2_0,
            },
            ModelKind::Reduced => lift_reduced(&self.params(), &self.reduced_initial_state()),
        }
    }

    pub fn reduced_initial_state(&self) -> ReducedState {
        ReducedState { i2: self.i2_0, r2: self.r2_0 }
    }
}

/// Coordinates the optimizer may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParam {
    NPop,
    I10,
    R10,
    I20,
    R20,
    Beta1,
    /// `beta2 / beta1`; moving it keeps the ratio constraint exact.
    BetaRatio,
    Gamma,
    Sigma1,
    Sigma2,
    Epsilon,
}

impl FitParam {
    pub const ALL: [FitParam; 11] = [
        FitParam::NPop,
        FitParam::I10,
        FitParam::R10,
        FitParam::I20,
        FitParam::R20,
        FitParam::Beta1,
        FitParam::BetaRatio,
        FitParam::Gamma,
        FitParam::Sigma1,
        FitParam::Sigma2,
        FitParam::Epsilon,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FitParam::NPop => "n_pop",
            FitParam::I10 => "i1_0",
            FitParam::R10 => "r1_0",
            FitParam::I20 => "i2_0",
            FitParam::R20 => "r2_0",
            FitParam::Beta1 => "beta1",
            FitParam::BetaRatio => "beta_ratio",
            FitParam::Gamma => "gamma",
            FitParam::Sigma1 => "sigma1",
            FitParam::Sigma2 => "sigma2",
            FitParam::Epsilon => "epsilon",
        }
    }

    fn is_initial_state(self) -> bool {
        matches!(self, FitParam::I10 | FitParam::R10 | FitParam::I20 | FitParam::R20)
    }

    fn get(self, t: &Theta) -> f64 {
        match self {
            FitParam::NPop => t.n_pop,
            FitParam::I10 => t.i1_0,
            FitParam::R10 => t.r1_0,
            FitParam::I20 => t.i2_0,
            FitParam::R20 => t.r2_0,
            FitParam::Beta1 => t.beta1,
            FitParam::BetaRatio => t.beta2 / t.beta1,
            FitParam::Gamma => t.gamma,
            FitParam::Sigma1 => t.sigma1,
            FitParam::Sigma2 => t.sigma2,
            FitParam::Epsilon => t.epsilon,
        }
    }
}

/// Box and linkage constraints on candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitBounds {
    /// Lower bound on every rate and on `epsilon`.
    pub rate_min: f64,
    pub sigma_max: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Optional extra lower bound on `N`; the data-derived bound always applies.
    pub n_pop_min: f64,
}

impl Default for FitBounds {
    fn default() -> Self {
        FitBounds { rate_min: 0.001, sigma_max: 0.5, ratio_min: 0.8, ratio_max: 1.25, n_pop_min: 0.0 }
    }
}

/// What to fit and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub model: ModelKind,
    /// Coordinates the optimizer may move; the rest stay at the initial guess.
    #[serde(default = "all_free")]
    pub free_parameters: Vec<FitParam>,
    #[serde(default)]
    pub bounds: FitBounds,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_budget")]
    pub max_iterations: usize,
    #[serde(default = "default_step")]
    pub step: f64,
}

fn all_free() -> Vec<FitParam> {
    FitParam::ALL.to_vec()
}

fn default_budget() -> usize {
    2000
}

fn default_step() -> f64 {
    DEFAULT_FIT_STEP
}

impl FitSpec {
    pub fn new(model: ModelKind) -> Self {
        FitSpec {
            model,
            free_parameters: all_free(),
            bounds: FitBounds::default(),
            rng_seed: 0,
            max_iterations: default_budget(),
            step: DEFAULT_FIT_STEP,
        }
    }

    /// Free coordinates that matter for this model, in canonical order.
    fn active(&self) -> Vec<FitParam> {
        FitParam::ALL
            .into_iter()
            .filter(|p| self.free_parameters.contains(p))
            .filter(|p| self.model == ModelKind::Full || !matches!(p, FitParam::I10 | FitParam::R10))
            .collect()
    }

    /// Lower bound on `N` for the given data.
    pub fn n_pop_floor(&self, data: &IncidenceSeries) -> f64 {
        self.bounds.n_pop_min.max(data.max_window_total() / WINDOW_DAYS)
    }

    fn coordinate_box(&self, param: FitParam, n_floor: f64) -> (f64, f64) {
        let b = &self.bounds;
        match param {
            FitParam::NPop => (n_floor, f64::INFINITY),
            FitParam::I10 | FitParam::R10 | FitParam::I20 | FitParam::R20 => (0.0, f64::INFINITY),
            // keeps beta2 = ratio * beta1 above the rate floor for every admissible ratio
            FitParam::Beta1 => (b.rate_min / b.ratio_min * (1.0 + 1e-12), f64::INFINITY),
            FitParam::Gamma => (b.rate_min, f64::INFINITY),
            FitParam::BetaRatio => (b.ratio_min, b.ratio_max),
            FitParam::Sigma1 | FitParam::Sigma2 => (b.rate_min, b.sigma_max),
            FitParam::Epsilon => (b.rate_min, 1.0),
        }
    }

    /// Checks every constraint on a candidate.
    pub fn check_feasible(&self, theta: &Theta, data: &IncidenceSeries) -> Result<(), FitError> {
        let violated = |param: &'static str, value: f64, rule: String| Err(FitError::ConstraintViolated { param, value, rule });
        let b = &self.bounds;
        let n_floor = self.n_pop_floor(data);
        if !(theta.n_pop >= n_floor && theta.n_pop.is_finite()) {
            return violated("n_pop", theta.n_pop, format!(">= {n_floor}"));
        }
        for (name, v) in [("beta1", theta.beta1), ("beta2", theta.beta2), ("gamma", theta.gamma)] {
            if !(v >= b.rate_min && v.is_finite()) {
                return violated(name, v, format!(">= {}", b.rate_min));
            }
        }
        for (name, v) in [("sigma1", theta.sigma1), ("sigma2", theta.sigma2)] {
            if !(v >= b.rate_min && v <= b.sigma_max) {
                return violated(name, v, format!("in [{}, {}]", b.rate_min, b.sigma_max));
            }
        }
        if !(theta.epsilon >= b.rate_min && theta.epsilon <= 1.0) {
            return violated("epsilon", theta.epsilon, format!("in [{}, 1]", b.rate_min));
        }
        if !(theta.beta2 >= b.ratio_min * theta.beta1 && theta.beta2 <= b.ratio_max * theta.beta1) {
            return violated("beta2", theta.beta2, format!("in [{} beta1, {} beta1]", b.ratio_min, b.ratio_max));
        }
        let initial: &[(&'static str, f64)] = match self.model {
            ModelKind::Full => &[("i1_0", theta.i1_0), ("r1_0", theta.r1_0), ("i2_0", theta.i2_0), ("r2_0", theta.r2_0)],
            ModelKind::Reduced => &[("i2_0", theta.i2_0), ("r2_0", theta.r2_0)],
        };
        for &(name, v) in initial {
            if !(v >= 0.0 && v.is_finite()) {
                return violated(name, v, ">= 0".into());
            }
        }
        let infected: f64 = initial.iter().map(|(_, v)| v).sum();
        if !(infected <= theta.n_pop) {
            return violated("initial_state", infected, format!("sum <= n_pop = {}", theta.n_pop));
        }
        Ok(())
    }
}

/// Model incidence over `n_windows` consecutive 14-day windows starting at
/// time zero.
pub fn predict(spec: &FitSpec, theta: &Theta, n_windows: usize) -> Result<Predictions, FitError> {
    let h = spec.step;
    let per_window = (WINDOW_DAYS / h).round();
    if !(h > 0.0 && per_window >= 1.0 && (per_window * h - WINDOW_DAYS).abs() <= 1e-9 * WINDOW_DAYS) {
        return Err(FitError::StepMisaligned(h));
    }
    if n_windows == 0 {
        return Ok(Predictions::default());
    }
    let per_window = per_window as usize;
    let p = theta.params();
    let t_end = n_windows as f64 * WINDOW_DAYS;
    let clamp = CLAMP_FRACTION * p.n_pop;

    let mut out = Predictions { original: Vec::with_capacity(n_windows), emerging: Vec::with_capacity(n_windows) };
    let mut current = (0.0, 0.0);
    let mut prev: Option<(f64, (f64, f64))> = None;
    let mut steps_in_window = 0;
    let mut accumulate = |t: f64, rate: (f64, f64)| {
        if let Some((t_prev, r_prev)) = prev {
            let dt = t - t_prev;
            current.0 += 0.5 * dt * (r_prev.0 + rate.0);
            current.1 += 0.5 * dt * (r_prev.1 + rate.1);
            steps_in_window += 1;
            if steps_in_window == per_window {
                out.original.push(current.0);
                out.emerging.push(current.1);
                current = (0.0, 0.0);
                steps_in_window = 0;
            }
        }
        prev = Some((t, rate));
    };
    match spec.model {
        ModelKind::Full => {
            let x0 = theta.initial_state(ModelKind::Full);
            integrate_rk4_with(
                |x: &[f64; 5]| full_rhs(&p, &FullState::from_array(*x)).to_array(),
                x0.to_array(),
                (0.0, t_end),
                h,
                clamp,
                |t, x| accumulate(t, full_incidence_rate(&p, &FullState::from_array(*x))),
            )?;
        }
        ModelKind::Reduced => {
            integrate_rk4_with(
                |y: &[f64; 2]| reduced_rhs(&p, &ReducedState::from_array(*y)).to_array(),
                theta.reduced_initial_state().to_array(),
                (0.0, t_end),
                h,
                clamp,
                |t, y| accumulate(t, full_incidence_rate(&p, &lift_reduced(&p, &ReducedState::from_array(*y)))),
            )?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    /// Zero objective, or no further improvement could be found.
    Converged,
    /// The iteration budget ran out while still improving.
    BudgetExhausted,
    /// The budget ran out without a single accepted improvement; the
    /// initial guess is returned.
    NoImprovement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub theta: Theta,
    pub params: ModelParams,
    pub initial_state: FullState,
    pub sse: f64,
    pub predictions: Predictions,
    pub reproduction: ReproductionSet,
    pub iterations_used: usize,
    pub status: FitStatus,
    /// Objective after the start and after every accepted move.
    pub accepted_sse: Vec<f64>,
    pub rng_seed: u64,
}

/// Consecutive rejections after which the step length is reset.
const RESTART_AFTER: usize = 50;
/// Consecutive rejections after which the search is declared stationary.
const STATIONARY_AFTER: usize = 4 * RESTART_AFTER;
const FD_RELATIVE_STEP: f64 = 1e-4;
const PROPOSAL_SCALE: f64 = 0.1;
const MARQUARDT: f64 = 1e-8;
const MAX_RELATIVE_MOVE: f64 = 0.5;

/// Maps between a candidate and the vector of free coordinates.
struct Coordinates<'a> {
    spec: &'a FitSpec,
    active: Vec<FitParam>,
    base: Theta,
    n_floor: f64,
}

impl Coordinates<'_> {
    fn encode(&self, t: &Theta) -> Vec<f64> {
        self.active.iter().map(|p| p.get(t)).collect()
    }

    fn decode(&self, v: &[f64]) -> Theta {
        let mut t = self.base;
        let mut ratio = self.base.beta2 / self.base.beta1;
        for (&p, &x) in self.active.iter().zip(v) {
            match p {
                FitParam::NPop => t.n_pop = x,
                FitParam::I10 => t.i1_0 = x,
                FitParam::R10 => t.r1_0 = x,
                FitParam::I20 => t.i2_0 = x,
                FitParam::R20 => t.r2_0 = x,
                FitParam::Beta1 => t.beta1 = x,
                FitParam::BetaRatio => ratio = x,
                FitParam::Gamma => t.gamma = x,
                FitParam::Sigma1 => t.sigma1 = x,
                FitParam::Sigma2 => t.sigma2 = x,
                FitParam::Epsilon => t.epsilon = x,
            }
        }
        if self.active.contains(&FitParam::BetaRatio) || self.active.contains(&FitParam::Beta1) {
            t.beta2 = ratio * t.beta1;
        }
        t
    }

    /// Clamps into the box and scales free initial infections down so that
    /// they fit in the population.
    fn project(&self, v: &mut [f64]) {
        for (x, &p) in v.iter_mut().zip(&self.active) {
            let (lo, hi) = self.spec.coordinate_box(p, self.n_floor);
            *x = if x.is_nan() { lo } else { x.clamp(lo, hi) };
        }
        let t = self.decode(v);
        let fixed_infected: f64 = self.initial_terms(&t).filter(|(p, _)| !self.active.contains(p)).map(|(_, v)| v).sum();
        let free_infected: f64 = self.initial_terms(&t).filter(|(p, _)| self.active.contains(p)).map(|(_, v)| v).sum();
        let room = t.n_pop - fixed_infected;
        if free_infected > room && free_infected > 0.0 {
            let scale = (room.max(0.0) / free_infected) * (1.0 - 1e-12);
            for (x, p) in v.iter_mut().zip(&self.active) {
                if p.is_initial_state() {
                    *x *= scale;
                }
            }
        }
    }

    fn initial_terms(&self, t: &Theta) -> impl Iterator<Item = (FitParam, f64)> {
        let mut terms = vec![(FitParam::I20, t.i2_0), (FitParam::R20, t.r2_0)];
        if self.spec.model == ModelKind::Full {
            terms.extend([(FitParam::I10, t.i1_0), (FitParam::R10, t.r1_0)]);
        }
        terms.into_iter()
    }

    /// Typical magnitude of a coordinate, used for difference steps and
    /// proposals at zero.
    fn scale(&self, index: usize, x: f64) -> f64 {
        let p = self.active[index];
        let floor = if p.is_initial_state() { 1e-6 * self.base.n_pop.max(self.n_floor) } else { 1e-3 };
        x.abs().max(floor)
    }
}

/// Runs the search. Every candidate handed to the model is feasible.
pub fn fit(spec: &FitSpec, data: &IncidenceSeries, initial_guess: &Theta) -> Result<FitResult, FitError> {
    fit_with_observer(spec, data, initial_guess, |_| {})
}

/// As [`fit`], calling `observe` with every candidate before it is evaluated.
pub fn fit_with_observer<O: FnMut(&Theta)>(
    spec: &FitSpec,
    data: &IncidenceSeries,
    initial_guess: &Theta,
    mut observe: O,
) -> Result<FitResult, FitError> {
    if data.is_empty() {
        return Err(FitError::EmptyData);
    }
    spec.check_feasible(initial_guess, data)?;
    let windows = data.len();
    let coords = Coordinates { spec, active: spec.active(), base: *initial_guess, n_floor: spec.n_pop_floor(data) };
    let observed: DVector<f64> = DVector::from_iterator(
        2 * windows,
        data.original_cases.iter().chain(&data.emerging_cases).copied(),
    );

    let mut evaluate = |v: &[f64]| -> Option<(f64, DVector<f64>)> {
        let theta = coords.decode(v);
        debug_assert!(spec.check_feasible(&theta, data).is_ok(), "infeasible candidate {theta:?}");
        observe(&theta);
        let pred = predict(spec, &theta, windows).ok()?;
        let model = DVector::from_iterator(2 * windows, pred.original.iter().chain(&pred.emerging).copied());
        let residual = model - &observed;
        let sse = residual.norm_squared();
        sse.is_finite().then_some((sse, residual))
    };

    let mut x = coords.encode(initial_guess);
    let k = x.len();
    let (mut best, mut residual) = evaluate(&x).ok_or(FitError::IntegrationFailed(IntegrationError::NonFiniteState { time: 0.0 }))?;
    let mut accepted_sse = vec![best];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut alpha = 1.0;
    let mut rejections = 0;
    let mut iterations = 0;
    let mut status = FitStatus::BudgetExhausted;
    let mut jacobian: Option<DMatrix<f64>> = None;

    while iterations < spec.max_iterations {
        if best == 0.0 || k == 0 {
            status = FitStatus::Converged;
            break;
        }
        iterations += 1;

        if jacobian.is_none() {
            let mut j = DMatrix::zeros(2 * windows, k);
            for c in 0..k {
                let step = FD_RELATIVE_STEP * coords.scale(c, x[c]);
                for signed in [step, -step] {
                    let mut probe = x.clone();
                    probe[c] += signed;
                    coords.project(&mut probe);
                    let moved = probe[c] - x[c];
                    if moved == 0.0 || probe.iter().zip(&x).enumerate().any(|(i, (a, b))| i != c && a != b) {
                        continue;
                    }
                    if let Some((_, r)) = evaluate(&probe) {
                        j.set_column(c, &((r - &residual) / moved));
                    }
                    break;
                }
            }
            jacobian = Some(j);
        }
        let j = jacobian.as_ref().expect("computed above");

        // Gauss-Newton candidate in coordinates scaled to unit magnitude
        let scales = DVector::from_iterator(k, (0..k).map(|c| coords.scale(c, x[c])));
        let js = j * DMatrix::from_diagonal(&scales);
        let mut normal = js.transpose() * &js;
        let ridge = MARQUARDT * normal.trace().max(f64::MIN_POSITIVE) / k as f64;
        for d in 0..k {
            normal[(d, d)] += ridge + MARQUARDT * normal[(d, d)];
        }
        let gradient = js.transpose() * &residual;
        let newton = normal.cholesky().map(|c| c.solve(&(-&gradient)));
        let mut candidates = Vec::with_capacity(2);
        if let Some(step) = newton {
            // no coordinate moves by more than MAX_RELATIVE_MOVE of its scale
            let largest = step.amax();
            let shrink = if largest > MAX_RELATIVE_MOVE { MAX_RELATIVE_MOVE / largest } else { 1.0 };
            let mut v: Vec<f64> = (0..k).map(|c| x[c] + alpha * shrink * step[c] * scales[c]).collect();
            coords.project(&mut v);
            candidates.push(v);
        }

        // random coordinate proposal
        let c = rng.random_range(0..k);
        let z: f64 = rng.sample(StandardNormal);
        let mut v = x.clone();
        v[c] = if v[c] != 0.0 {
            v[c] * (PROPOSAL_SCALE * z).exp()
        } else {
            PROPOSAL_SCALE * z.abs() * coords.scale(c, 0.0)
        };
        coords.project(&mut v);
        candidates.push(v);

        let mut winner: Option<(f64, Vec<f64>, DVector<f64>)> = None;
        for cand in candidates {
            if cand == x {
                continue;
            }
            if let Some((sse, r)) = evaluate(&cand) {
                if winner.as_ref().is_none_or(|w| sse < w.0) {
                    winner = Some((sse, cand, r));
                }
            }
        }
        match winner {
            Some((sse, cand, r)) if sse < best => {
                best = sse;
                x = cand;
                residual = r;
                accepted_sse.push(sse);
                jacobian = None;
                alpha = (2.0 * alpha).min(1.0);
                rejections = 0;
            }
            _ => {
                alpha *= 0.5;
                rejections += 1;
                if rejections % RESTART_AFTER == 0 {
                    alpha = 1.0;
                }
                if rejections >= STATIONARY_AFTER {
                    status = FitStatus::Converged;
                    break;
                }
            }
        }
    }
    if accepted_sse.len() == 1 && status == FitStatus::BudgetExhausted {
        status = FitStatus::NoImprovement;
    }

    let theta = coords.decode(&x);
    let predictions = predict(spec, &theta, windows)?;
    let sse = sse_objective(data, &predictions)?;
    let params = theta.params();
    let reproduction = closed_form_reproduction(&params).map_err(|_| FitError::ConstraintViolated {
        param: "gamma",
        value: theta.gamma,
        rule: "> 0".into(),
    })?;
    Ok(FitResult {
        model: spec.model,
        theta,
        params,
        initial_state: theta.initial_state(spec.model),
        sse,
        predictions,
        reproduction,
        iterations_used: iterations,
        status,
        accepted_sse,
        rng_seed: spec.rng_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn theta() -> Theta {
        Theta {
            n_pop: 1.0e6,
            i1_0: 2000.0,
            r1_0: 5000.0,
            i2_0: 50.0,
            r2_0: 0.0,
            beta1: 0.30,
            beta2: 0.33,
            gamma: 0.25,
            sigma1: 0.01,
            sigma2: 0.02,
            epsilon: 0.3,
        }
    }

    fn synthetic(spec: &FitSpec, t: &Theta, windows: usize) -> IncidenceSeries {
        let pred = predict(spec, t, windows).unwrap();
        let start = date("2021-01-14");
        IncidenceSeries {
            window_end_dates: (0..windows).map(|k| start + Days::new(14 * k as u64)).collect(),
            original_cases: pred.original,
            emerging_cases: pred.emerging,
        }
    }

    #[test]
    fn constant_daily_counts() {
        let daily = CaseDataFile {
            dates: (0..14).map(|k| date("2021-06-01") + Days::new(k)).collect(),
            new_cases: vec![10.0; 14],
        };
        let shares = VariantShareFile { window_end_dates: vec![date("2021-06-14")], emerging_share: vec![0.25] };
        let s = aggregate_biweekly(&daily, &shares, None, None).unwrap();
        assert_eq!((s.original_cases[0], s.emerging_cases[0]), (105.0, 35.0));
        let zero = VariantShareFile { emerging_share: vec![0.0], ..shares.clone() };
        assert_eq!(aggregate_biweekly(&daily, &zero, None, None).unwrap().emerging_cases[0], 0.0);
    }

    #[test]
    fn windowed_share_matches_daily_split() {
        let counts = [3.0, 8.0, 1.0, 0.0, 12.0, 5.0, 7.0, 9.0, 2.0, 4.0, 6.0, 11.0, 10.0, 13.0];
        let daily = CaseDataFile {
            dates: (0..14).map(|k| date("2021-06-01") + Days::new(k)).collect(),
            new_cases: counts.to_vec(),
        };
        let shares = VariantShareFile { window_end_dates: vec![date("2021-06-14")], emerging_share: vec![0.4] };
        let s = aggregate_biweekly(&daily, &shares, None, None).unwrap();
        let daywise: f64 = counts.iter().map(|c| c * 0.4).sum();
        assert!((s.emerging_cases[0] - daywise).abs() < 1e-12);
    }

    #[test]
    fn incomplete_window() {
        let daily = CaseDataFile {
            dates: (0..13).map(|k| date("2021-06-02") + Days::new(k)).collect(),
            new_cases: vec![1.0; 13],
        };
        let shares = VariantShareFile { window_end_dates: vec![date("2021-06-14")], emerging_share: vec![0.5] };
        assert!(matches!(
            aggregate_biweekly(&daily, &shares, None, None),
            Err(FitError::IncompleteWindow { .. })
        ));
    }

    #[test]
    fn sse_examples() {
        let data = IncidenceSeries {
            window_end_dates: vec![date("2021-06-14")],
            original_cases: vec![100.0],
            emerging_cases: vec![50.0],
        };
        let pred = Predictions { original: vec![90.0], emerging: vec![60.0] };
        assert_eq!(sse_objective(&data, &pred).unwrap(), 200.0);
        let exact = Predictions { original: vec![100.0], emerging: vec![50.0] };
        assert_eq!(sse_objective(&data, &exact).unwrap(), 0.0);
        let short = Predictions { original: vec![], emerging: vec![] };
        assert!(matches!(sse_objective(&data, &short), Err(FitError::LengthMismatch { .. })));
    }

    #[test]
    fn zero_infections_predict_nothing() {
        let t = Theta { i1_0: 0.0, r1_0: 0.0, i2_0: 0.0, r2_0: 0.0, ..theta() };
        let pred = predict(&FitSpec::new(ModelKind::Full), &t, 5).unwrap();
        assert_eq!(pred.original.len(), 5);
        assert!(pred.original.iter().chain(&pred.emerging).all(|&v| v == 0.0));
        // the reduced model keeps the original strain at its quasi-steady level
        let pred = predict(&FitSpec::new(ModelKind::Reduced), &t, 5).unwrap();
        assert!(pred.emerging.iter().all(|&v| v == 0.0));
        assert!(pred.original.iter().all(|&v| (v - pred.original[0]).abs() <= 1e-9 * v));
    }

    #[test]
    fn streaming_prediction_matches_stored_trajectory() {
        let spec = FitSpec::new(ModelKind::Full);
        let t = theta();
        let pred = predict(&spec, &t, 6).unwrap();
        let traj = crate::dynamics::simulate_full(&t.params(), &t.initial_state(ModelKind::Full), (0.0, 84.0), 0.25).unwrap();
        let windows = crate::dynamics::accumulate_incidence(&t.params(), &traj).unwrap();
        for (w, acc) in windows.iter().enumerate() {
            assert!((acc.new_cases_1 - pred.original[w]).abs() <= 1e-9 * acc.new_cases_1.max(1.0));
            assert!((acc.new_cases_2 - pred.emerging[w]).abs() <= 1e-9 * acc.new_cases_2.max(1.0));
        }
    }

    #[test]
    fn misaligned_step() {
        let spec = FitSpec { step: 0.3, ..FitSpec::new(ModelKind::Full) };
        assert!(matches!(predict(&spec, &theta(), 2), Err(FitError::StepMisaligned(_))));
    }

    #[test]
    fn infeasible_guess_rejected_before_simulation() {
        let spec = FitSpec::new(ModelKind::Full);
        let data = synthetic(&spec, &theta(), 4);
        let bad = Theta { beta2: 2.0 * theta().beta1, ..theta() };
        let mut calls = 0;
        let err = fit_with_observer(&spec, &data, &bad, |_| calls += 1).unwrap_err();
        assert!(matches!(err, FitError::ConstraintViolated { param: "beta2", .. }));
        assert_eq!(calls, 0);
    }

    #[test]
    fn exact_start_is_a_fixed_point() {
        let spec = FitSpec::new(ModelKind::Full);
        let t = theta();
        let data = synthetic(&spec, &t, 8);
        let result = fit(&spec, &data, &t).unwrap();
        assert_eq!(result.sse, 0.0);
        assert_eq!(result.theta, t);
        assert_eq!(result.status, FitStatus::Converged);
        assert_eq!(result.iterations_used, 0);
    }

    #[test]
    fn result_sse_matches_predictions() {
        let spec = FitSpec { max_iterations: 30, ..FitSpec::new(ModelKind::Reduced) };
        let t = theta();
        let data = synthetic(&spec, &t, 8);
        let start = Theta { beta1: 0.32, beta2: 0.34, ..t };
        let result = fit(&spec, &data, &start).unwrap();
        assert_eq!(result.sse, sse_objective(&data, &result.predictions).unwrap());
        assert!(result.accepted_sse.windows(2).all(|w| w[1] <= w[0]));
        assert!(result.sse <= result.accepted_sse[0]);
    }
}
