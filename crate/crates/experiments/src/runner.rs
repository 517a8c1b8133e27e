//! Time integration driven by a [`RunConfig`], with CSV and snapshot output.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use pks_core::diagnostics::{initial_record, record, DiagnosticsRecord, DiagnosticsWriter};
use pks_core::snapshot::write_snapshot;
use pks_core::stepper::{SimState, SourceTerms, StepReport, Stepper};
use pks_core::{Grid, StepError};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::convergence::ConvergenceTable;
use crate::ic::InitialCondition;
use crate::manufactured;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot set up the run: {0}")]
    Setup(StepError),
    #[error("step {step} (t = {time}) failed: {source}")]
    Step { step: usize, time: f64, source: StepError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    /// Process exit status: 2 for configuration problems, 3 for solver
    /// failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Setup(_) => 2,
            RunError::Step { .. } => 3,
            RunError::Io { .. } => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

pub fn build_grid(cfg: &RunConfig) -> Result<Grid, RunError> {
    let g = &cfg.grid;
    Grid::new(g.dim, g.n, &g.origin[..g.dim], g.length).map_err(|e| RunError::Setup(e.into()))
}

pub fn build_sources(cfg: &RunConfig) -> SourceTerms {
    if cfg.sources.enabled {
        manufactured::source_terms(cfg.grid.dim, cfg.params, cfg.sources.f1, cfg.sources.f2)
    } else {
        SourceTerms::none()
    }
}

pub fn build_stepper(cfg: &RunConfig) -> Result<Stepper, RunError> {
    Stepper::new(build_grid(cfg)?, cfg.params, cfg.model, build_sources(cfg)).map_err(RunError::Setup)
}

pub fn initial_state(cfg: &RunConfig, stepper: &Stepper) -> Result<SimState, RunError> {
    let (rho, phi) = cfg.ic.sample(*stepper.grid(), 0.0);
    stepper.bootstrap_first_step(rho, phi).map_err(RunError::Setup)
}

/// Step count for `[0, t_final]`: full steps plus the length of a final
/// shortened step, if `t_final` is not a multiple of `dt`.
pub fn step_plan(t_final: f64, dt: f64) -> (usize, Option<f64>) {
    let ratio = t_final / dt;
    let full = (ratio + 1e-9).floor() as usize;
    let rest = t_final - full as f64 * dt;
    if rest > 1e-9 * dt {
        (full, Some(rest))
    } else {
        (full, None)
    }
}

/// Per-step diagnostics of a whole run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub final_state: SimState,
    /// Row 0 is the initial state; row `k` describes step `k`.
    pub records: Vec<DiagnosticsRecord>,
    pub reports: Vec<StepReport>,
    pub shortened_last_step: Option<f64>,
}

/// Integrates from `state` to `t_final`, calling `observe` after the initial
/// state and after every step.
pub fn integrate(
    stepper: &Stepper,
    state: SimState,
    t_final: f64,
    mut observe: impl FnMut(&SimState, &DiagnosticsRecord) -> Result<(), RunError>,
) -> Result<Trajectory, RunError> {
    let model = *stepper.model();
    let params = *stepper.params();
    let (full, rest) = step_plan(t_final - state.time, params.dt);
    let last = match rest {
        Some(dt) => Some(
            Stepper::new(*stepper.grid(), params.with_dt(dt), model, stepper.sources().clone())
                .map_err(RunError::Setup)?,
        ),
        None => None,
    };
    let first = initial_record(&state, &model, &params).map_err(RunError::Setup)?;
    observe(&state, &first)?;
    let mut records = vec![first];
    let mut reports = Vec::with_capacity(full + 1);
    let mut state = state;
    for k in 0..full + usize::from(rest.is_some()) {
        let s = if k < full { stepper } else { last.as_ref().expect("planned") };
        let fail = |source| RunError::Step { step: state.step_index + 1, time: state.time, source };
        let mobility = s.mobility_faces(&state);
        let (next, report) = s.step(&state).map_err(fail)?;
        let energy_old = records.last().map(|r| r.energy);
        let rec = record(&state, &next, &report, &mobility, &model, s.params(), energy_old).map_err(fail)?;
        observe(&next, &rec)?;
        records.push(rec);
        reports.push(report);
        state = next;
    }
    Ok(Trajectory { final_state: state, records, reports, shortened_last_step: rest })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub trajectory: Trajectory,
    /// Max-norm errors at the final time, for manufactured runs.
    pub errors: Option<(f64, f64)>,
    pub snapshots: Vec<PathBuf>,
}

pub fn snapshot_name(field: &str, time: f64) -> String {
    format!("{field}_T{time}.snap")
}

/// Runs one configuration and writes `diagnostics.csv` and the requested
/// snapshots into the output directory.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    let stepper = build_stepper(cfg)?;
    let state = initial_state(cfg, &stepper)?;
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_path = dir.join("diagnostics.csv");
    let file = File::create(&csv_path).map_err(io_err(&csv_path))?;
    let mut writer = DiagnosticsWriter::new(BufWriter::new(file)).map_err(io_err(&csv_path))?;

    let dt = cfg.params.dt;
    let (full, rest) = step_plan(cfg.t_final, dt);
    let total = full + usize::from(rest.is_some());
    // requested time -> step index of the nearest step
    let schedule: Vec<(f64, usize)> = cfg
        .output
        .snapshot_times
        .iter()
        .map(|&t| (t, ((t / dt).round() as usize).min(total)))
        .collect();
    let every = cfg.output.diagnostics_every;
    let mut snapshots = Vec::new();

    let trajectory = integrate(&stepper, state, cfg.t_final, |state, rec| {
        let k = state.step_index;
        if k % every == 0 || k == total {
            writer.write(rec).map_err(io_err(&csv_path))?;
        }
        for &(t, _) in schedule.iter().filter(|(_, s)| *s == k) {
            for (name, field) in [("rho", &state.rho_curr), ("phi", &state.phi_curr)] {
                let path = dir.join(snapshot_name(name, t));
                write_snapshot(field, state.time, &path).map_err(|e| RunError::Io {
                    path: path.clone(),
                    source: io::Error::other(e.to_string()),
                })?;
                snapshots.push(path);
            }
        }
        Ok(())
    })?;
    writer.into_inner().and_then(|mut w| w.flush()).map_err(io_err(&csv_path))?;
    if let Some(last) = trajectory.shortened_last_step {
        eprintln!("note: final step shortened to dt = {last:e} to end exactly at T = {}", cfg.t_final);
    }
    let errors = (cfg.ic == InitialCondition::Manufactured).then(|| {
        let s = &trajectory.final_state;
        manufactured::manufactured_errors(&s.rho_curr, &s.phi_curr, s.time)
    });
    Ok(RunSummary { trajectory, errors, snapshots })
}

/// Runs every sweep resolution (concurrently) and writes `convergence.csv`.
pub fn sweep(cfg: &RunConfig) -> Result<ConvergenceTable, RunError> {
    let Some(resolutions) = &cfg.sweep else {
        return Err(ConfigError::Invalid("no [sweep] section in the configuration".into()).into());
    };
    let results: Vec<Result<(f64, f64, f64, f64), RunError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = resolutions
            .iter()
            .map(|&n| {
                let sub = cfg.for_resolution(n);
                scope.spawn(move || {
                    let summary = run(&sub)?;
                    let (er, ep) = summary.errors.expect("sweeps are manufactured runs");
                    Ok((sub.grid.length / n as f64, sub.params.dt, er, ep))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let entries = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let table = ConvergenceTable::from_errors(entries);
    let path = cfg.output.dir.join("convergence.csv");
    std::fs::create_dir_all(&cfg.output.dir).map_err(io_err(&cfg.output.dir))?;
    table.write(&path).map_err(io_err(&path))?;
    Ok(table)
}

/// Validates a configuration without stepping: parameters, grid, initial
/// data admissibility and source finiteness.
pub fn check(cfg: &RunConfig) -> Result<(), RunError> {
    let resolutions = cfg.sweep.clone().unwrap_or_else(|| vec![cfg.grid.n]);
    for n in resolutions {
        let sub = if cfg.sweep.is_some() { cfg.for_resolution(n) } else { cfg.clone() };
        let stepper = build_stepper(&sub)?;
        let state = initial_state(&sub, &stepper)?;
        stepper.sample_f1(&state).map_err(RunError::Setup)?;
        stepper.sample_f2(&state).map_err(RunError::Setup)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_plans() {
        assert_eq!(step_plan(0.1, 0.1 / 16.0), (16, None));
        assert_eq!(step_plan(0.05, 1e-5), (5000, None));
        let (n, rest) = step_plan(1.0, 0.3);
        assert_eq!(n, 3);
        assert!((rest.unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn snapshot_names() {
        assert_eq!(snapshot_name("rho", 0.0), "rho_T0.snap");
        assert_eq!(snapshot_name("phi", 0.12), "phi_T0.12.snap");
    }
}
