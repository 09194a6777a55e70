//! Phase-plane tools for the reduced system: nullclines, switching line,
//! vector-field sampling, direction signs, the Dulac sign test and a
//! finite-difference stability check.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{omega, omega_branch, omega_gradient, reduced_rhs};
use crate::equilibria::{reduced_residual, residual_tolerance, MAX_BISECTION_STEPS, ROOT_TOLERANCE};
use crate::model::{ModelParams, ReducedState};
use crate::numeric::bisect;
use crate::reproduction::closed_form_reproduction;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseError {
    #[error("point is not a steady state (residual {residual:e} exceeds {tolerance:e})")]
    NotSteadyState { residual: f64, tolerance: f64 },
    #[error("finite-difference stencil straddles the switching line even with step {step:e}")]
    OnSwitchingLine { step: f64 },
    #[error("grid must have at least one point per axis")]
    EmptyGrid,
}

/// Residual whose zero set is the `I2`-nullcline away from the `R2`-axis:
/// `beta2 - gamma2 - beta2/N (omega + I2 + R2)`.
pub fn i2_nullcline_residual(p: &ModelParams, y: &ReducedState) -> f64 {
    p.beta2 - p.gamma2 - p.beta2 / p.n_pop * (omega(p, y) + y.i2 + y.r2)
}

/// Residual whose zero set is the `R2`-nullcline:
/// `gamma2 I2 - sigma2 R2 - beta1/N (1 - eps) omega R2`.
pub fn r2_nullcline_residual(p: &ModelParams, y: &ReducedState) -> f64 {
    y.i2 * p.gamma2 - p.sigma2 * y.r2 - p.beta1 / p.n_pop * (1.0 - p.epsilon) * omega(p, y) * y.r2
}

/// Where a nullcline meets the vertical segment `{I2} x [0, N - I2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "r2", rename_all = "snake_case")]
pub enum ColumnRoot {
    Inside(f64),
    /// The curve passes below the triangle at this column.
    Below,
    /// The curve passes above the triangle at this column.
    Above,
}

impl ColumnRoot {
    pub fn value(self) -> Option<f64> {
        match self {
            ColumnRoot::Inside(v) => Some(v),
            _ => None,
        }
    }

    /// The root, or the nearest edge of the column.
    pub fn value_or_edge(self, top: f64) -> f64 {
        match self {
            ColumnRoot::Inside(v) => v,
            ColumnRoot::Below => 0.0,
            ColumnRoot::Above => top,
        }
    }
}

/// Locates a sign change of `residual` on `[0, top]` where the residual is
/// nonnegative at the bottom. `Below` and `Above` report which edge the
/// curve leaves through when the column holds no sign change.
fn column_root<F: Fn(f64) -> f64>(residual: F, top: f64, n_pop: f64) -> ColumnRoot {
    let bottom = residual(0.0);
    if bottom == 0.0 {
        return ColumnRoot::Inside(0.0);
    }
    if bottom < 0.0 {
        return ColumnRoot::Below;
    }
    if residual(top) > 0.0 {
        return ColumnRoot::Above;
    }
    match bisect(residual, 0.0, top, ROOT_TOLERANCE * n_pop, MAX_BISECTION_STEPS) {
        Some(b) => ColumnRoot::Inside(b.root),
        None => ColumnRoot::Above,
    }
}

/// `R2` on the `I2`-nullcline at column `i2`. The residual is strictly
/// decreasing in `R2`, so the root is unique when it exists.
pub fn i2_nullcline_at(p: &ModelParams, i2: f64) -> ColumnRoot {
    let top = (p.n_pop - i2).max(0.0);
    column_root(|r2| i2_nullcline_residual(p, &ReducedState { i2, r2 }), top, p.n_pop)
}

/// `R2` on the `R2`-nullcline at column `i2`.
pub fn r2_nullcline_at(p: &ModelParams, i2: f64) -> ColumnRoot {
    let top = (p.n_pop - i2).max(0.0);
    column_root(|r2| r2_nullcline_residual(p, &ReducedState { i2, r2 }), top, p.n_pop)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullclineKind {
    I2Nullcline,
    R2Nullcline,
}

impl NullclineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NullclineKind::I2Nullcline => "i2_nullcline",
            NullclineKind::R2Nullcline => "r2_nullcline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "i2_nullcline" => Some(NullclineKind::I2Nullcline),
            "r2_nullcline" => Some(NullclineKind::R2Nullcline),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullclineSample {
    pub which: NullclineKind,
    pub points: Vec<ReducedState>,
    pub parameter_grid: Vec<f64>,
    /// Columns where the curve leaves the triangle, with the exit side.
    pub missing: Vec<(f64, ColumnRoot)>,
    pub strictly_decreasing: bool,
    pub strictly_increasing: bool,
}

impl NullclineSample {
    fn build(which: NullclineKind, grid: &[f64], locate: impl Fn(f64) -> ColumnRoot) -> Self {
        let mut points = Vec::with_capacity(grid.len());
        let mut missing = Vec::new();
        for &i2 in grid {
            match locate(i2) {
                ColumnRoot::Inside(r2) => points.push(ReducedState { i2, r2 }),
                other => missing.push((i2, other)),
            }
        }
        let pairs = || points.windows(2).map(|w| (w[0].r2, w[1].r2));
        let strictly_decreasing = pairs().all(|(a, b)| b < a);
        let strictly_increasing = pairs().all(|(a, b)| b > a);
        NullclineSample {
            which,
            points,
            parameter_grid: grid.to_vec(),
            missing,
            strictly_decreasing,
            strictly_increasing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullclinePair {
    pub i2_nullcline: NullclineSample,
    pub r2_nullcline: NullclineSample,
    /// Whether `R1 > 1`, `R2 > 1` and `R21 > 1`, under which the curves are
    /// known to cross exactly once inside the triangle.
    pub hypotheses_hold: bool,
}

/// Samples both nullclines over the given `I2` columns.
pub fn sample_nullclines(p: &ModelParams, grid: &[f64]) -> NullclinePair {
    let hypotheses_hold = closed_form_reproduction(p)
        .map(|r| r.r1 > 1.0 && r.r2 > 1.0 && r.r21 > 1.0)
        .unwrap_or(false);
    NullclinePair {
        i2_nullcline: NullclineSample::build(NullclineKind::I2Nullcline, grid, |i2| i2_nullcline_at(p, i2)),
        r2_nullcline: NullclineSample::build(NullclineKind::R2Nullcline, grid, |i2| r2_nullcline_at(p, i2)),
        hypotheses_hold,
    }
}

/// `n` evenly spaced `I2` values from 0 to `N` inclusive.
pub fn uniform_i2_grid(p: &ModelParams, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| p.n_pop * k as f64 / (n - 1) as f64).collect(),
    }
}

/// `R2` intercept of the `I2`-nullcline on the `R2`-axis.
pub fn i2_nullcline_axis_intercept(p: &ModelParams) -> f64 {
    let (b1, b2, g1, g2, s1) = (p.beta1, p.beta2, p.gamma1, p.gamma2, p.sigma1);
    p.n_pop * (b2 * g1 * (b1 + s1) - b1 * g2 * (g1 + s1)) / (b1 * b2 * ((1.0 - p.epsilon) * s1 + g1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(v: f64) -> Sign {
        if v > 0.0 {
            Sign::Positive
        } else if v < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

/// Signs of `(I2', R2')` at `y`.
pub fn region_direction(p: &ModelParams, y: &ReducedState) -> (Sign, Sign) {
    let d = reduced_rhs(p, y);
    (Sign::of(d.i2), Sign::of(d.r2))
}

/// The line `I2 + eps R2 = N(1 - 1/R1)` on which the closure switches branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingLine {
    pub intercept_i2: f64,
    pub epsilon: f64,
    /// Endpoints of the part of the line inside the triangle.
    pub start: ReducedState,
    pub end: ReducedState,
}

/// The switching line clipped to the triangle, when `R1 > 1`.
pub fn switching_line(p: &ModelParams) -> Option<SwitchingLine> {
    if !(p.beta1 > p.gamma1) {
        return None;
    }
    let n = p.n_pop;
    let c = p.switching_level();
    let eps = p.epsilon;
    // walk up from (c, 0) until hitting the R2-axis or the hypotenuse
    let to_axis = if eps > 0.0 { c / eps } else { f64::INFINITY };
    let to_hypotenuse = if eps < 1.0 { (n - c) / (1.0 - eps) } else { f64::INFINITY };
    let r2 = to_axis.min(to_hypotenuse);
    Some(SwitchingLine {
        intercept_i2: c,
        epsilon: eps,
        start: ReducedState { i2: c, r2: 0.0 },
        end: ReducedState { i2: (c - eps * r2).max(0.0), r2 },
    })
}

/// Divergence of the reduced field weighted by `1/I2`.
///
/// ```text
/// -beta2/N (d omega/d I2 + 1) - sigma2/I2 - beta1 (1 - eps)/(N I2) (d omega/d R2 R2 + omega)
/// ```
///
/// On the switching line the branch beyond the line is used.
pub fn dulac_expression(p: &ModelParams, y: &ReducedState) -> f64 {
    let n = p.n_pop;
    let w = omega(p, y);
    let (w_i, w_r) = omega_gradient(p, y);
    -p.beta2 / n * (w_i + 1.0)
        - p.sigma2 / y.i2
        - p.beta1 * (1.0 - p.epsilon) / (n * y.i2) * (w_r * y.r2 + w)
}

/// Result of evaluating the Dulac expression on an interior grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DulacScan {
    pub max_value: f64,
    pub argmax: ReducedState,
    pub points_evaluated: usize,
    pub points_skipped: usize,
    pub all_negative: bool,
}

/// Evaluates [`dulac_expression`] on an `n x n` cell-centred grid over the
/// triangle interior, skipping points within `band` of the switching line.
pub fn dulac_grid_scan(p: &ModelParams, n: usize, band: f64) -> Result<DulacScan, PhaseError> {
    if n == 0 {
        return Err(PhaseError::EmptyGrid);
    }
    let pop = p.n_pop;
    let level = p.switching_level();
    let on_line = |y: &ReducedState| p.beta1 > p.gamma1 && (y.i2 + p.epsilon * y.r2 - level).abs() < band;
    let mut scan = DulacScan {
        max_value: f64::NEG_INFINITY,
        argmax: ReducedState { i2: 0.0, r2: 0.0 },
        points_evaluated: 0,
        points_skipped: 0,
        all_negative: true,
    };
    for a in 0..n {
        for b in 0..n {
            let y = ReducedState {
                i2: pop * (a as f64 + 0.5) / n as f64,
                r2: pop * (b as f64 + 0.5) / n as f64,
            };
            if y.i2 + y.r2 >= pop {
                continue;
            }
            if on_line(&y) {
                scan.points_skipped += 1;
                continue;
            }
            let v = dulac_expression(p, &y);
            scan.points_evaluated += 1;
            if !(v < 0.0) {
                scan.all_negative = false;
            }
            if v > scan.max_value || v.is_nan() {
                scan.max_value = v;
                scan.argmax = y;
            }
        }
    }
    Ok(scan)
}

/// One sample of the reduced vector field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub point: ReducedState,
    pub derivative: ReducedState,
}

impl FieldSample {
    pub fn magnitude(&self) -> f64 {
        self.derivative.i2.hypot(self.derivative.r2)
    }
}

/// Samples the reduced field on an evenly spaced `n_i2 x n_r2` grid over
/// `[0, N]^2` (inclusive endpoints), keeping points inside the triangle.
/// Rows are ordered with `I2` outer and `R2` inner.
pub fn sample_vector_field(p: &ModelParams, n_i2: usize, n_r2: usize) -> Result<Vec<FieldSample>, PhaseError> {
    if n_i2 == 0 || n_r2 == 0 {
        return Err(PhaseError::EmptyGrid);
    }
    let axis = |k: usize, count: usize| {
        if count == 1 {
            0.0
        } else {
            p.n_pop * k as f64 / (count - 1) as f64
        }
    };
    let mut out = Vec::new();
    for a in 0..n_i2 {
        let i2 = axis(a, n_i2);
        for b in 0..n_r2 {
            let r2 = axis(b, n_r2);
            if i2 + r2 > p.n_pop {
                continue;
            }
            let point = ReducedState { i2, r2 };
            out.push(FieldSample { point, derivative: reduced_rhs(p, &point) });
        }
    }
    Ok(out)
}

/// Finite-difference linearisation at a steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub jacobian: [[f64; 2]; 2],
    pub trace: f64,
    pub determinant: f64,
    /// Whether the Jacobian has signs `[[-, -], [+, -]]`.
    pub sign_pattern_ok: bool,
    pub step_used: f64,
}

impl StabilityReport {
    pub fn locally_stable(&self) -> bool {
        self.trace < 0.0 && self.determinant > 0.0
    }
}

/// Central-difference Jacobian of the reduced field at `y_star` with step
/// `1e-5 N`. The step is shrunk tenfold up to three times when the stencil
/// crosses the switching line.
pub fn stability_sign_check(p: &ModelParams, y_star: &ReducedState) -> Result<StabilityReport, PhaseError> {
    let residual = reduced_residual(p, y_star);
    let tolerance = residual_tolerance(p);
    if !(residual <= tolerance) {
        return Err(PhaseError::NotSteadyState { residual, tolerance });
    }
    let branch = omega_branch(p, y_star);
    let mut step = 1e-5 * p.n_pop;
    for attempt in 0..=3 {
        if attempt > 0 {
            step /= 10.0;
        }
        let stencil = [
            ReducedState { i2: y_star.i2 + step, r2: y_star.r2 },
            ReducedState { i2: y_star.i2 - step, r2: y_star.r2 },
            ReducedState { i2: y_star.i2, r2: y_star.r2 + step },
            ReducedState { i2: y_star.i2, r2: y_star.r2 - step },
        ];
        if stencil.iter().any(|y| omega_branch(p, y) != branch) {
            continue;
        }
        let d: Vec<ReducedState> = stencil.iter().map(|y| reduced_rhs(p, y)).collect();
        let j = Matrix2::new(
            (d[0].i2 - d[1].i2) / (2.0 * step),
            (d[2].i2 - d[3].i2) / (2.0 * step),
            (d[0].r2 - d[1].r2) / (2.0 * step),
            (d[2].r2 - d[3].r2) / (2.0 * step),
        );
        return Ok(StabilityReport {
            jacobian: [[j[(0, 0)], j[(0, 1)]], [j[(1, 0)], j[(1, 1)]]],
            trace: j.trace(),
            determinant: j.determinant(),
            sign_pattern_ok: j[(0, 0)] < 0.0 && j[(0, 1)] < 0.0 && j[(1, 0)] > 0.0 && j[(1, 1)] < 0.0,
            step_used: step,
        });
    }
    Err(PhaseError::OnSwitchingLine { step })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::solve_reduced_steady_state;

    fn reference(beta1: f64, epsilon: f64) -> ModelParams {
        ModelParams::new(beta1, 0.6, 0.2, 0.1, 0.1, 0.1, epsilon, 10000.0).unwrap()
    }

    #[test]
    fn r2_nullcline_starts_at_origin() {
        assert_eq!(r2_nullcline_at(&reference(0.4, 0.0), 0.0), ColumnRoot::Inside(0.0));
    }

    #[test]
    fn i2_nullcline_axis_value() {
        let p = reference(0.4, 0.0);
        let closed = i2_nullcline_axis_intercept(&p);
        assert!((closed - 6666.67).abs() < 0.01);
        let sampled = i2_nullcline_at(&p, 0.0).value().unwrap();
        assert!((sampled - closed).abs() < 1e-6 * p.n_pop);
    }

    #[test]
    fn nullclines_are_monotone_for_extreme_epsilon() {
        for p in [reference(0.4, 0.0), reference(0.3, 0.0), reference(0.4, 1.0)] {
            let grid: Vec<f64> = (1..200).map(|k| p.n_pop * k as f64 / 200.0).collect();
            let pair = sample_nullclines(&p, &grid);
            assert!(pair.hypotheses_hold);
            assert!(pair.i2_nullcline.strictly_decreasing, "{p:?}");
            assert!(pair.r2_nullcline.strictly_increasing, "{p:?}");
            let tol = residual_tolerance(&p);
            for y in &pair.i2_nullcline.points {
                assert!((reduced_rhs(&p, y).i2).abs() <= tol);
            }
            for y in &pair.r2_nullcline.points {
                assert!((reduced_rhs(&p, y).r2).abs() <= tol);
            }
        }
    }

    #[test]
    fn nullcline_crossing_matches_solver() {
        let p = reference(0.4, 0.0);
        let star = solve_reduced_steady_state(&p).unwrap().state;
        let i_curve = i2_nullcline_at(&p, star.i2).value().unwrap();
        let r_curve = r2_nullcline_at(&p, star.i2).value().unwrap();
        assert!((i_curve - star.r2).abs() <= 1e-6 * p.n_pop);
        assert!((r_curve - star.r2).abs() <= 1e-6 * p.n_pop);
    }

    #[test]
    fn direction_quadrants() {
        let p = reference(0.4, 0.0);
        assert_eq!(
            region_direction(&p, &ReducedState { i2: 4000.0, r2: 5500.0 }),
            (Sign::Negative, Sign::Negative)
        );
        assert_eq!(
            region_direction(&p, &ReducedState { i2: 500.0, r2: 100.0 }),
            (Sign::Positive, Sign::Positive)
        );
    }

    #[test]
    fn switching_line_geometry() {
        let p = reference(0.4, 0.0);
        let line = switching_line(&p).unwrap();
        assert_eq!(line.intercept_i2, 5000.0);
        assert_eq!(line.end, ReducedState { i2: 5000.0, r2: 5000.0 });
        let line = switching_line(&reference(0.4, 1.0)).unwrap();
        assert_eq!(line.end, ReducedState { i2: 0.0, r2: 5000.0 });
        assert!(switching_line(&reference(0.15, 0.0)).is_none());
    }

    #[test]
    fn dulac_with_complete_cross_immunity() {
        let p = reference(0.4, 1.0);
        let y = ReducedState { i2: 1200.0, r2: 800.0 };
        let (w_i, _) = omega_gradient(&p, &y);
        let expected = -(p.beta2 / p.n_pop) * (w_i + 1.0) - p.sigma2 / y.i2;
        assert!((dulac_expression(&p, &y) - expected).abs() < 1e-15);
    }

    #[test]
    fn dulac_negative_on_reference_grids() {
        for p in [reference(0.4, 0.0), reference(0.3, 0.0), reference(0.4, 1.0)] {
            let scan = dulac_grid_scan(&p, 50, 1e-3 * p.n_pop).unwrap();
            assert!(scan.all_negative, "{scan:?}");
            assert!(scan.points_evaluated > 1000);
        }
    }

    #[test]
    fn vector_field_on_axis() {
        let p = reference(0.4, 0.0);
        let field = sample_vector_field(&p, 11, 11).unwrap();
        assert_eq!(field.len(), 66);
        for s in field.iter().filter(|s| s.point.i2 == 0.0) {
            assert_eq!(s.derivative.i2, 0.0);
        }
    }

    #[test]
    fn stability_at_solved_states() {
        for p in [reference(0.4, 0.0), reference(0.3, 0.0)] {
            let star = solve_reduced_steady_state(&p).unwrap().state;
            let report = stability_sign_check(&p, &star).unwrap();
            assert!(report.locally_stable(), "{report:?}");
        }
        let p = reference(0.4, 0.0);
        let star = solve_reduced_steady_state(&p).unwrap().state;
        assert!(stability_sign_check(&p, &star).unwrap().sign_pattern_ok);
    }

    #[test]
    fn stability_rejects_non_steady_point() {
        let p = reference(0.4, 0.0);
        let err = stability_sign_check(&p, &ReducedState { i2: 2000.0, r2: 1000.0 }).unwrap_err();
        assert!(matches!(err, PhaseError::NotSteadyState { .. }));
    }
}
