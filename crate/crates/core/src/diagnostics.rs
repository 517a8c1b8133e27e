//! Discrete free energy, mass and the two sides of the dissipation
//! inequality, plus the `diagnostics.csv` schema.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use crate::entropy::{s_half, EntropyModel};
use crate::error::StepError;
use crate::grid::{CellField, FaceField};
use crate::ops::{face_inner, grad, grad_l2_norm, inner, l2_norm};
use crate::params::SchemeParams;
use crate::stepper::{SimState, StepReport};

pub const CSV_HEADER: &str =
    "step,time,mass,energy,rho_min,rho_max,diss_lhs,diss_rhs,newton_iters,mean_correction";

/// `F = gamma <f(rho), 1> - chi <rho, phi> + (mu/2) ||grad phi||^2 + (alpha/2) ||phi||^2`.
pub fn discrete_energy(
    rho: &CellField,
    phi: &CellField,
    model: &EntropyModel,
    params: &SchemeParams,
) -> Result<f64, StepError> {
    model.check_field(rho)?;
    let entropy: f64 = rho.values().iter().map(|&r| model.f_unchecked(r)).sum::<f64>() * rho.grid().cell_volume();
    let gphi = grad_l2_norm(phi);
    let nphi = l2_norm(phi);
    Ok(params.gamma * entropy - params.chi * inner(rho, phi)? + 0.5 * params.mu * gphi * gphi
        + 0.5 * params.alpha * nphi * nphi)
}

/// Right side of the one-step dissipation inequality,
///
/// ```text
/// -dt [D grad v, grad v] - (theta/dt) ||phi^{n+1} - phi^n||^2 - c ||rho^{n+1} - rho^n||^2
/// ```
///
/// with `v = gamma S - (chi/2)(phi^{n+1} + phi^n) + c (rho^{n+1} - rho^n)` and
/// `c` the configured stabilization coefficient. Never positive.
pub fn dissipation_rhs(
    old: &SimState,
    new: &SimState,
    mobility: &FaceField,
    model: &EntropyModel,
    params: &SchemeParams,
) -> Result<f64, StepError> {
    let c = params.stabilization_coefficient();
    let drho = &new.rho_curr - &old.rho_curr;
    let dphi = &new.phi_curr - &old.phi_curr;
    let mut v = &s_half(&new.rho_curr, &old.rho_curr, model)? * params.gamma;
    v.axpy(-0.5 * params.chi, &new.phi_curr);
    v.axpy(-0.5 * params.chi, &old.phi_curr);
    v.axpy(c, &drho);
    let gv = grad(&v);
    let flux = face_inner(&mobility.product(&gv), &gv)?;
    let nphi = l2_norm(&dphi);
    let nrho = l2_norm(&drho);
    Ok(-params.dt * flux - params.theta / params.dt * nphi * nphi - c * nrho * nrho)
}

/// Allowed excess of `diss_lhs` over `diss_rhs` from inexact solves.
pub fn dissipation_slack(energy_old: f64, params: &SchemeParams) -> f64 {
    100.0 * params.newton_tol * (1.0 + energy_old.abs())
}

/// One row of `diagnostics.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    pub energy: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub diss_lhs: f64,
    pub diss_rhs: f64,
    pub newton_iters: usize,
    pub mean_correction: f64,
}

fn mass(rho: &CellField) -> f64 {
    rho.sum() * rho.grid().cell_volume()
}

/// Row for a state with no preceding step.
pub fn initial_record(state: &SimState, model: &EntropyModel, params: &SchemeParams) -> Result<DiagnosticsRecord, StepError> {
    Ok(DiagnosticsRecord {
        step: state.step_index,
        time: state.time,
        mass: mass(&state.rho_curr),
        energy: discrete_energy(&state.rho_curr, &state.phi_curr, model, params)?,
        rho_min: state.rho_curr.min(),
        rho_max: state.rho_curr.max(),
        diss_lhs: 0.0,
        diss_rhs: 0.0,
        newton_iters: 0,
        mean_correction: 0.0,
    })
}

/// Row for the step `old -> new`. `mobility` is the face mobility the step
/// used; `energy_old` may be passed to avoid recomputing it.
pub fn record(
    old: &SimState,
    new: &SimState,
    report: &StepReport,
    mobility: &FaceField,
    model: &EntropyModel,
    params: &SchemeParams,
    energy_old: Option<f64>,
) -> Result<DiagnosticsRecord, StepError> {
    let e_old = match energy_old {
        Some(e) => e,
        None => discrete_energy(&old.rho_curr, &old.phi_curr, model, params)?,
    };
    let energy = discrete_energy(&new.rho_curr, &new.phi_curr, model, params)?;
    Ok(DiagnosticsRecord {
        step: new.step_index,
        time: new.time,
        mass: mass(&new.rho_curr),
        energy,
        rho_min: new.rho_curr.min(),
        rho_max: new.rho_curr.max(),
        diss_lhs: energy - e_old,
        diss_rhs: dissipation_rhs(old, new, mobility, model, params)?,
        newton_iters: report.newton_iterations,
        mean_correction: report.mean_correction_magnitude,
    })
}

impl DiagnosticsRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
            self.step,
            self.time,
            self.mass,
            self.energy,
            self.rho_min,
            self.rho_max,
            self.diss_lhs,
            self.diss_rhs,
            self.newton_iters,
            self.mean_correction
        )
    }

    /// Whether the step satisfies the dissipation inequality within
    /// [`dissipation_slack`] of the previous energy.
    pub fn dissipates(&self, energy_old: f64, params: &SchemeParams) -> bool {
        self.diss_lhs <= self.diss_rhs + dissipation_slack(energy_old, params)
    }
}

pub fn format_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity(200 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{}", r.to_csv_row());
    }
    out
}

/// Streams rows to a writer, header first.
pub struct DiagnosticsWriter<W: Write> {
    inner: W,
}

impl<W: Write> DiagnosticsWriter<W> {
    pub fn new(mut inner: W) -> io::Result<Self> {
        writeln!(inner, "{CSV_HEADER}")?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, record: &DiagnosticsRecord) -> io::Result<()> {
        writeln!(self.inner, "{}", record.to_csv_row())
    }

    pub fn into_inner(mut self) -> io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Parses `diagnostics.csv` text; errors carry the 1-based line number.
pub fn parse_csv(text: &str) -> Result<Vec<DiagnosticsRecord>, (usize, String)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        Some((_, h)) => return Err((1, format!("unexpected header `{h}`"))),
        None => return Err((1, "empty file".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 10 {
            return Err((lineno, format!("expected 10 columns, got {}", cols.len())));
        }
        let real = |k: usize| cols[k].parse::<f64>().map_err(|e| (lineno, format!("column {}: {e}", k + 1)));
        let int = |k: usize| cols[k].parse::<usize>().map_err(|e| (lineno, format!("column {}: {e}", k + 1)));
        out.push(DiagnosticsRecord {
            step: int(0)?,
            time: real(1)?,
            mass: real(2)?,
            energy: real(3)?,
            rho_min: real(4)?,
            rho_max: real(5)?,
            diss_lhs: real(6)?,
            diss_rhs: real(7)?,
            newton_iters: int(8)?,
            mean_correction: real(9)?,
        });
    }
    Ok(out)
}

pub fn write_csv(records: &[DiagnosticsRecord], path: &Path) -> io::Result<()> {
    std::fs::write(path, format_csv(records))
}

pub fn read_csv(path: &Path) -> io::Result<Vec<DiagnosticsRecord>> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text).map_err(|(line, msg)| {
        io::Error::new(io::ErrorKind::InvalidData, format!("{}:{line}: {msg}", path.display()))
    })
}
