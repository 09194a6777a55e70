//! The five subcommands. Each writes its files into an [`OutputDir`] and
//! returns their paths.

use std::path::PathBuf;

use serde_json::json;
use twostrain_core::bifurcation::{classify_reproduction, scan_regions, scan_scalar, Region};
use twostrain_core::data::{load_case_data, load_variant_shares};
use twostrain_core::dynamics::{lift_reduced, omega, simulate_full, simulate_reduced, ModelKind};
use twostrain_core::equilibria::{
    boundary_steady_states, solve_coexistence_full, solve_reduced_steady_state, EquilibriumError,
};
use twostrain_core::fitting::{aggregate_biweekly, fit, FitResult};
use twostrain_core::phase::{
    dulac_grid_scan, sample_nullclines, sample_vector_field, stability_sign_check, switching_line, uniform_i2_grid,
};
use twostrain_core::reproduction::closed_form_reproduction;
use twostrain_core::{FullState, ModelParams, ReducedState};

use crate::config::{missing, PhaseConfig, RunConfig};
use crate::error::CliError;
use crate::output::{
    FieldRow, FitRow, FullTrajectoryRow, LineEnd, NullclineRow, OutputDir, ReducedTrajectoryRow, ScanRow,
    SwitchingLineRow, FIELD_HEADER, FIT_HEADER, NULLCLINE_HEADER, SCAN_HEADER, SWITCHING_LINE_HEADER,
    TRAJECTORY_FULL_HEADER, TRAJECTORY_REDUCED_HEADER,
};

/// Half-width, as a fraction of `N`, of the band around the switching line
/// left out of the Dulac scan.
const DULAC_BAND: f64 = 1e-3;
const DULAC_GRID: usize = 50;

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out: OutputDir,
    /// Seed given on the command line, overriding the config.
    pub seed: Option<u64>,
}

fn header(command: &str, p: &ModelParams, ctx: &RunContext) -> Result<serde_json::Value, CliError> {
    let rs = closed_form_reproduction(p)?;
    Ok(json!({
        "command": command,
        "seed": ctx.seed,
        "params": p,
        "reproduction": rs,
        "region": classify_reproduction(&rs),
    }))
}

fn merge(mut base: serde_json::Value, extra: serde_json::Value) -> serde_json::Value {
    if let (Some(a), serde_json::Value::Object(b)) = (base.as_object_mut(), extra) {
        a.extend(b);
    }
    base
}

pub fn simulate(config: &RunConfig, ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let p = config.params()?;
    let sim = config.simulate.as_ref().ok_or_else(|| missing("simulate"))?;
    if !(sim.t_end.is_finite() && sim.t_end > 0.0) {
        return Err(CliError::Config(format!("t_end must be positive, got {}", sim.t_end)));
    }
    let init = sim.initial;
    let reduced0 = ReducedState::new(init.i2, init.r2, p.n_pop)?;
    let (csv, initial, terminal, rows) = match sim.model {
        ModelKind::Full => {
            let x0 = match (init.i1, init.r1) {
                (None, None) => lift_reduced(&p, &reduced0),
                (i1, r1) => FullState::from_infected(p.n_pop, i1.unwrap_or(0.0), r1.unwrap_or(0.0), init.i2, init.r2)?,
            };
            let traj = simulate_full(&p, &x0, (0.0, sim.t_end), sim.step)?;
            let rows: Vec<FullTrajectoryRow> =
                traj.times.iter().zip(&traj.states).map(|(&t, x)| FullTrajectoryRow::new(t, x)).collect();
            let path = ctx.out.write_csv("trajectory.csv", &TRAJECTORY_FULL_HEADER, &rows)?;
            let (_, end) = traj.last().expect("trajectory has its initial point");
            (path, json!(x0), json!(end), rows.len())
        }
        ModelKind::Reduced => {
            if init.i1.is_some() || init.r1.is_some() {
                return Err(CliError::Config(
                    "the reduced model derives I1 and R1; remove them from [simulate.initial]".into(),
                ));
            }
            let traj = simulate_reduced(&p, &reduced0, (0.0, sim.t_end), sim.step)?;
            let rows: Vec<ReducedTrajectoryRow> = traj
                .times
                .iter()
                .zip(&traj.states)
                .map(|(&t, y)| ReducedTrajectoryRow { t, i2: y.i2, r2: y.r2, omega: omega(&p, y) })
                .collect();
            let path = ctx.out.write_csv("trajectory.csv", &TRAJECTORY_REDUCED_HEADER, &rows)?;
            let (_, end) = traj.last().expect("trajectory has its initial point");
            let lifted = lift_reduced(&p, &end);
            (path, json!(reduced0), json!({ "reduced": end, "omega": lifted.i1, "lifted": lifted }), rows.len())
        }
    };
    let summary = merge(
        header("simulate", &p, ctx)?,
        json!({
            "model": sim.model,
            "t_end": sim.t_end,
            "step": sim.step,
            "rows": rows,
            "initial": initial,
            "terminal": terminal,
        }),
    );
    let json_path = ctx.out.write_json("simulate.json", &summary)?;
    Ok(vec![csv, json_path])
}

/// The reduced steady state, or why it was not computed.
fn reduced_steady_state_report(p: &ModelParams) -> Result<serde_json::Value, CliError> {
    match solve_reduced_steady_state(p) {
        Ok(ss) => Ok(json!(ss)),
        Err(EquilibriumError::PreconditionFailed(t)) => {
            Ok(json!({ "skipped": format!("{t} is not above one") }))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn analyze(config: &RunConfig, ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let p = config.params()?;
    let report = merge(
        header("analyze", &p, ctx)?,
        json!({
            "boundary_states": boundary_steady_states(&p),
            "coexistence": solve_coexistence_full(&p)?,
            "reduced_steady_state": reduced_steady_state_report(&p)?,
        }),
    );
    Ok(vec![ctx.out.write_json("analysis.json", &report)?])
}

pub fn phase(config: &RunConfig, ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let p = config.params()?;
    let settings = config.phase.clone().unwrap_or_default();
    let PhaseConfig { nullcline_points, field_points } = settings;
    let mut warnings = Vec::new();

    let pair = sample_nullclines(&p, &uniform_i2_grid(&p, nullcline_points));
    if !pair.hypotheses_hold {
        warnings.push("R1, R2 and R21 are not all above one: the nullclines need not cross inside the triangle".to_string());
    }
    let nullcline_rows: Vec<NullclineRow> = [&pair.i2_nullcline, &pair.r2_nullcline]
        .into_iter()
        .flat_map(|s| s.points.iter().map(|y| NullclineRow { which: s.which, i2: y.i2, r2: y.r2 }))
        .collect();
    let field: Vec<FieldRow> = sample_vector_field(&p, field_points, field_points)?.iter().map(FieldRow::from).collect();
    let line = switching_line(&p);
    if line.is_none() {
        warnings.push("R1 is not above one: there is no switching line".to_string());
    }
    let line_rows: Vec<SwitchingLineRow> = line
        .iter()
        .flat_map(|l| {
            [
                SwitchingLineRow { end: LineEnd::Start, i2: l.start.i2, r2: l.start.r2 },
                SwitchingLineRow { end: LineEnd::End, i2: l.end.i2, r2: l.end.r2 },
            ]
        })
        .collect();

    let steady = if pair.hypotheses_hold { Some(solve_reduced_steady_state(&p)?) } else { None };
    let stability = match &steady {
        Some(ss) => match stability_sign_check(&p, &ss.state) {
            Ok(report) => json!(report),
            Err(e) => {
                warnings.push(format!("stability check skipped: {e}"));
                serde_json::Value::Null
            }
        },
        None => serde_json::Value::Null,
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let paths = vec![
        ctx.out.write_csv("nullclines.csv", &NULLCLINE_HEADER, &nullcline_rows)?,
        ctx.out.write_csv("field.csv", &FIELD_HEADER, &field)?,
        ctx.out.write_csv("switching_line.csv", &SWITCHING_LINE_HEADER, &line_rows)?,
    ];
    let nullcline_summary = |s: &twostrain_core::phase::NullclineSample| {
        json!({
            "points": s.points.len(),
            "missing_columns": s.missing.len(),
            "strictly_decreasing": s.strictly_decreasing,
            "strictly_increasing": s.strictly_increasing,
        })
    };
    let summary = merge(
        header("phase", &p, ctx)?,
        json!({
            "hypotheses_hold": pair.hypotheses_hold,
            "warnings": warnings,
            "i2_nullcline": nullcline_summary(&pair.i2_nullcline),
            "r2_nullcline": nullcline_summary(&pair.r2_nullcline),
            "field_points": field.len(),
            "switching_line": line,
            "steady_state": steady,
            "stability": stability,
            "dulac": dulac_grid_scan(&p, DULAC_GRID, DULAC_BAND * p.n_pop)?,
        }),
    );
    let mut paths = paths;
    paths.push(ctx.out.write_json("phase.json", &summary)?);
    Ok(paths)
}

pub fn scan(config: &RunConfig, ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let p = config.params()?;
    let scan = config.scan.as_ref().ok_or_else(|| missing("scan"))?;
    let (axis1, axis2) = (scan.axis1.to_spec()?, scan.axis2.to_spec()?);
    let (csv, counts) = match scan.value.scalar() {
        None => {
            let grid = scan_regions(&p, &axis1, &axis2)?;
            let rows: Vec<ScanRow<Region>> =
                grid.rows().map(|(a, b, label)| ScanRow { axis1: a, axis2: b, value: label.region }).collect();
            let counts: serde_json::Map<String, serde_json::Value> = [Region::I, Region::II, Region::III, Region::IV]
                .into_iter()
                .map(|r| (r.as_str().to_string(), json!(rows.iter().filter(|row| row.value == r).count())))
                .collect();
            (ctx.out.write_csv("scan.csv", &SCAN_HEADER, &rows)?, json!(counts))
        }
        Some(quantity) => {
            let grid = scan_scalar(&p, &axis1, &axis2, quantity)?;
            let rows: Vec<ScanRow<f64>> =
                grid.rows().map(|(a, b, &v)| ScanRow { axis1: a, axis2: b, value: v }).collect();
            (ctx.out.write_csv("scan.csv", &SCAN_HEADER, &rows)?, serde_json::Value::Null)
        }
    };
    let summary = merge(
        header("scan", &p, ctx)?,
        json!({
            "axis1": scan.axis1,
            "axis2": scan.axis2,
            "value": scan.value,
            "cells": axis1.values.len() * axis2.values.len(),
            "region_counts": counts,
        }),
    );
    Ok(vec![csv, ctx.out.write_json("scan.json", &summary)?])
}

/// The fitted parameter block with its reproduction numbers recomputed from
/// the fitted rates.
fn fit_report(result: &FitResult, ctx: &RunContext) -> Result<serde_json::Value, CliError> {
    let p = result.params;
    let rs = closed_form_reproduction(&p)?;
    let t = &result.theta;
    Ok(json!({
        "command": "fit",
        "model": result.model,
        "seed": result.rng_seed,
        "seed_from_command_line": ctx.seed.is_some(),
        "status": result.status,
        "iterations": result.iterations_used,
        "sse": result.sse,
        "n_pop": t.n_pop,
        "initial_state": {
            "i1": result.initial_state.i1,
            "r1": result.initial_state.r1,
            "i2": result.initial_state.i2,
            "r2": result.initial_state.r2,
        },
        "beta1": p.beta1,
        "beta2": p.beta2,
        "gamma": t.gamma,
        "sigma1": p.sigma1,
        "sigma2": p.sigma2,
        "epsilon": p.epsilon,
        "reproduction": {
            "r1": rs.r1,
            "r2": rs.r2,
            "r12": rs.r12,
            "r21": rs.r21,
        },
        "region": classify_reproduction(&rs).region,
        "accepted_sse": result.accepted_sse,
    }))
}

pub fn fit_command(config: &RunConfig, ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let fc = config.fit.as_ref().ok_or_else(|| missing("fit"))?;
    let daily = load_case_data(&fc.case_data)?;
    let shares = load_variant_shares(&fc.variant_shares)?;
    let data = aggregate_biweekly(&daily, &shares, fc.start, fc.end)?;
    let mut spec = fc.spec.clone();
    if let Some(seed) = ctx.seed {
        spec.rng_seed = seed;
    }
    let result = fit(&spec, &data, &fc.initial_guess)?;
    let rows: Vec<FitRow> = (0..data.len())
        .map(|k| FitRow {
            window: data.window_end_dates[k],
            x: data.original_cases[k],
            x_hat: result.predictions.original[k],
            y: data.emerging_cases[k],
            y_hat: result.predictions.emerging[k],
        })
        .collect();
    Ok(vec![
        ctx.out.write_csv("fit.csv", &FIT_HEADER, &rows)?,
        ctx.out.write_json("fit.json", &fit_report(&result, ctx)?)?,
    ])
}
