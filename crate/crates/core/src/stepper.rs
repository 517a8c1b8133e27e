//! One step of the second-order density/chemoattractant scheme.
//!
//! With `c` the stabilization coefficient, `G = c - (chi^2/4) L1^{-1}`, the
//! face mobility `D = A(eta(rho_hat))` and the known field
//!
//! ```text
//! b = L1^{-1}[(chi/2) L2 phi^n + (chi^2/4) rho^n + (chi/2) f2] + (chi/2) phi^n + c rho^n
//! ```
//!
//! the new density is the root of
//!
//! ```text
//! R(rho) = (rho - rho^n)/dt - div(D grad(gamma S(rho, rho^n) + G rho - b)) - f1
//! ```
//!
//! and `phi^{n+1} = L1^{-1}[L2 phi^n + (chi/2)(rho^{n+1} + rho^n) + f2]`.
//! `R = 0` is the optimality condition of a strictly convex functional on
//! the fixed-mean admissible set, which is what the solver falls back to
//! when Newton stalls.

use std::fmt;
use std::sync::Arc;

use crate::elliptic::{HelmholtzOps, NeumannSolver};
use crate::entropy::EntropyModel;
use crate::error::StepError;
use crate::grid::{CellField, FaceField, Grid};
use crate::krylov::gmres;
use crate::ops::{face_average, inner_unchecked, l2_norm, variable_laplacian_diagonal, variable_laplacian_into};
use crate::params::SchemeParams;
use crate::spectral::CosineTransform;

/// Source term evaluated at a point and time.
pub type SourceFn = Arc<dyn Fn([f64; 3], f64) -> f64 + Send + Sync>;

/// Optional right-hand sides `f1` (density) and `f2` (chemoattractant),
/// sampled at cell centers at the half time level.
#[derive(Clone, Default)]
pub struct SourceTerms {
    pub f1: Option<SourceFn>,
    pub f2: Option<SourceFn>,
}

impl fmt::Debug for SourceTerms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceTerms")
            .field("f1", &self.f1.is_some())
            .field("f2", &self.f2.is_some())
            .finish()
    }
}

impl SourceTerms {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(
        f1: impl Fn([f64; 3], f64) -> f64 + Send + Sync + 'static,
        f2: impl Fn([f64; 3], f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { f1: Some(Arc::new(f1)), f2: Some(Arc::new(f2)) }
    }

    pub fn is_empty(&self) -> bool {
        self.f1.is_none() && self.f2.is_none()
    }

    fn sample(f: &Option<SourceFn>, name: &str, grid: Grid, t: f64) -> Result<Option<CellField>, StepError> {
        let Some(f) = f else { return Ok(None) };
        let field = CellField::from_fn(grid, |x| f(x, t));
        if let Some(i) = field.values().iter().position(|v| !v.is_finite()) {
            return Err(StepError::InvalidParams(format!(
                "source {name} is not finite at cell {i} (t = {t})"
            )));
        }
        Ok(Some(field))
    }
}

/// `rho^n`, `rho^{n-1}`, `phi^n` and the clock.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub time: f64,
    pub rho_curr: CellField,
    pub rho_prev: CellField,
    pub phi_curr: CellField,
    pub step_index: usize,
}

/// Solver statistics for one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub newton_iterations: usize,
    /// `||dt R||_2 / max(1, ||rho^n||_2)` at the returned density.
    pub final_residual: f64,
    /// Step clips and backtracking halvings.
    pub damping_events: usize,
    /// Largest pointwise change made by the final mean restoration.
    pub mean_correction_magnitude: f64,
    pub linear_iterations: usize,
    pub descent_iterations: usize,
    pub used_fallback: bool,
}

/// `sqrt((3/2 rho^n - 1/2 rho^{n-1})^2 + dt^8)`, pointwise.
pub fn extrapolated_mobility_arg(rho_curr: &CellField, rho_prev: &CellField, dt: f64) -> CellField {
    let floor = dt.powi(4);
    rho_curr.zip_map(rho_prev, |a, b| (1.5 * a - 0.5 * b).hypot(floor))
}

/// Cell mobility at the extrapolated density. For the saturation entropy the
/// distance to the cap is regularized the same way as the density itself, so
/// the result is strictly positive even when the extrapolation overshoots.
pub fn extrapolated_mobility(
    rho_curr: &CellField,
    rho_prev: &CellField,
    dt: f64,
    model: &EntropyModel,
) -> CellField {
    let floor = dt.powi(4);
    rho_curr.zip_map(rho_prev, |a, b| {
        let x = 1.5 * a - 0.5 * b;
        let r = x.hypot(floor);
        match *model {
            EntropyModel::Classical => r,
            EntropyModel::BoundedMobility { kappa } => r / (kappa * r + 1.0),
            EntropyModel::Saturation { max_density: m } => r * (m - x).hypot(floor) / m,
        }
    })
}

/// Face mobility `A(eta(rho_hat))`.
pub fn mobility_faces(rho_curr: &CellField, rho_prev: &CellField, dt: f64, model: &EntropyModel) -> FaceField {
    face_average(&extrapolated_mobility(rho_curr, rho_prev, dt, model))
}

/// Advances [`SimState`]s for fixed parameters, model, grid and sources.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    params: SchemeParams,
    model: EntropyModel,
    sources: SourceTerms,
    helmholtz: HelmholtzOps,
    neumann: NeumannSolver,
}

impl Stepper {
    pub fn new(grid: Grid, params: SchemeParams, model: EntropyModel, sources: SourceTerms) -> Result<Self, StepError> {
        params.validate()?;
        let transform = CosineTransform::new(grid);
        Ok(Self {
            grid,
            params,
            model,
            sources,
            helmholtz: HelmholtzOps::with_transform(transform.clone(), &params),
            neumann: NeumannSolver::from_transform(transform),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn model(&self) -> &EntropyModel {
        &self.model
    }

    pub fn sources(&self) -> &SourceTerms {
        &self.sources
    }

    pub fn helmholtz(&self) -> &HelmholtzOps {
        &self.helmholtz
    }

    pub fn neumann(&self) -> &NeumannSolver {
        &self.neumann
    }

    /// Initial state with `rho^{-1} := rho^0`, at time 0.
    pub fn bootstrap_first_step(&self, rho0: CellField, phi0: CellField) -> Result<SimState, StepError> {
        self.bootstrap_at(rho0, phi0, 0.0)
    }

    pub fn bootstrap_at(&self, rho0: CellField, phi0: CellField, time: f64) -> Result<SimState, StepError> {
        self.grid.check_same(rho0.grid())?;
        self.grid.check_same(phi0.grid())?;
        if let Err(e) = self.model.check_field(&rho0) {
            return Err(StepError::InvalidInitialData(e.to_string()));
        }
        if let Some(i) = phi0.values().iter().position(|v| !v.is_finite()) {
            return Err(StepError::InvalidInitialData(format!(
                "chemoattractant is not finite at cell {i}: {}",
                phi0.values()[i]
            )));
        }
        Ok(SimState { time, rho_prev: rho0.clone(), rho_curr: rho0, phi_curr: phi0, step_index: 0 })
    }

    fn half_time(&self, state: &SimState) -> f64 {
        state.time + 0.5 * self.params.dt
    }

    /// `f1` at the half time level of the step leaving `state`.
    pub fn sample_f1(&self, state: &SimState) -> Result<Option<CellField>, StepError> {
        SourceTerms::sample(&self.sources.f1, "f1", self.grid, self.half_time(state))
    }

    pub fn sample_f2(&self, state: &SimState) -> Result<Option<CellField>, StepError> {
        SourceTerms::sample(&self.sources.f2, "f2", self.grid, self.half_time(state))
    }

    pub fn mobility_faces(&self, state: &SimState) -> FaceField {
        mobility_faces(&state.rho_curr, &state.rho_prev, self.params.dt, &self.model)
    }

    /// The known field `b` of the density equation.
    pub fn assemble_known(&self, state: &SimState) -> Result<CellField, StepError> {
        let f2 = self.sample_f2(state)?;
        Ok(self.assemble_known_with(state, f2.as_ref()))
    }

    fn assemble_known_with(&self, state: &SimState, f2: Option<&CellField>) -> CellField {
        let p = &self.params;
        let ops = &self.helmholtz;
        let mut rhs = &ops.apply_l2(&state.phi_curr) * (0.5 * p.chi);
        rhs.axpy(0.25 * p.chi * p.chi, &state.rho_curr);
        if let Some(f2) = f2 {
            rhs.axpy(0.5 * p.chi, f2);
        }
        let mut b = ops.solve_l1(&rhs);
        b.axpy(0.5 * p.chi, &state.phi_curr);
        b.axpy(ops.stabilization_coefficient(), &state.rho_curr);
        b
    }

    /// `phi^{n+1}` from `rho^{n+1}`.
    pub fn update_phi(&self, rho_new: &CellField, state: &SimState) -> Result<CellField, StepError> {
        let f2 = self.sample_f2(state)?;
        Ok(self.update_phi_with(rho_new, state, f2.as_ref()))
    }

    fn update_phi_with(&self, rho_new: &CellField, state: &SimState, f2: Option<&CellField>) -> CellField {
        let chi = self.params.chi;
        let mut rhs = self.helmholtz.apply_l2(&state.phi_curr);
        rhs.axpy(0.5 * chi, rho_new);
        rhs.axpy(0.5 * chi, &state.rho_curr);
        if let Some(f2) = f2 {
            rhs.axpy(1.0, f2);
        }
        self.helmholtz.solve_l1(&rhs)
    }

    /// Everything about the density equation that does not depend on the
    /// unknown.
    pub fn prepare<'a>(&'a self, state: &'a SimState) -> Result<StepProblem<'a>, StepError> {
        self.grid.check_same(state.rho_curr.grid())?;
        self.grid.check_same(state.rho_prev.grid())?;
        self.grid.check_same(state.phi_curr.grid())?;
        self.model.check_field(&state.rho_curr)?;
        let f1 = self.sample_f1(state)?;
        let f2 = self.sample_f2(state)?;
        let mobility = self.mobility_faces(state);
        let known = self.assemble_known_with(state, f2.as_ref());
        let lap_diag = variable_laplacian_diagonal(&mobility).into_iter().map(|v| -v).collect();
        let target_mean = state.rho_curr.mean() + f1.as_ref().map_or(0.0, |f| self.params.dt * f.mean());
        let scale = l2_norm(&state.rho_curr).max(1.0);
        Ok(StepProblem { stepper: self, state, mobility, known, f1, f2, lap_diag, target_mean, scale })
    }

    /// Advances one step.
    pub fn step(&self, state: &SimState) -> Result<(SimState, StepReport), StepError> {
        let problem = self.prepare(state)?;
        let (rho_new, report) = problem.solve()?;
        let phi_new = self.update_phi_with(&rho_new, state, problem.f2.as_ref());
        let next = SimState {
            time: state.time + self.params.dt,
            rho_prev: state.rho_curr.clone(),
            rho_curr: rho_new,
            phi_curr: phi_new,
            step_index: state.step_index + 1,
        };
        Ok((next, report))
    }
}

/// The nonlinear density equation of one step.
#[derive(Debug)]
pub struct StepProblem<'a> {
    stepper: &'a Stepper,
    state: &'a SimState,
    mobility: FaceField,
    known: CellField,
    f1: Option<CellField>,
    f2: Option<CellField>,
    /// Diagonal of `-div(D grad .)`.
    lap_diag: Vec<f64>,
    target_mean: f64,
    scale: f64,
}

/// Newton gave up; carries the best admissible iterate reached.
struct Stagnated(CellField);

impl<'a> StepProblem<'a> {
    pub fn mobility(&self) -> &FaceField {
        &self.mobility
    }

    pub fn known(&self) -> &CellField {
        &self.known
    }

    pub fn f1(&self) -> Option<&CellField> {
        self.f1.as_ref()
    }

    /// Mean every admissible solution must have.
    pub fn target_mean(&self) -> f64 {
        self.target_mean
    }

    /// Absolute tolerance on `||dt R||_2`.
    pub fn tolerance(&self) -> f64 {
        self.stepper.params.newton_tol * self.scale
    }

    fn rho_old(&self) -> &CellField {
        &self.state.rho_curr
    }

    fn grid(&self) -> &Grid {
        &self.stepper.grid
    }

    fn dt(&self) -> f64 {
        self.stepper.params.dt
    }

    /// `gamma S(rho, rho^n) + G rho - b`.
    fn potential_into(&self, rho: &[f64], out: &mut [f64]) {
        let p = &self.stepper.params;
        let model = &self.stepper.model;
        self.stepper.helmholtz.apply_gh_into(rho, out);
        for (((o, &r), &r0), &b) in out.iter_mut().zip(rho).zip(self.rho_old().values()).zip(self.known.values()) {
            *o += p.gamma * model.s_half_unchecked(r, r0) - b;
        }
    }

    /// `dt R(rho)` into `out`; `rho` must be admissible.
    fn scaled_residual_into(&self, rho: &[f64], out: &mut [f64], work: &mut [f64]) {
        let dt = self.dt();
        self.potential_into(rho, work);
        variable_laplacian_into(&self.mobility, work, out);
        for ((o, &r), &r0) in out.iter_mut().zip(rho).zip(self.rho_old().values()) {
            *o = r - r0 - dt * *o;
        }
        if let Some(f1) = &self.f1 {
            for (o, &f) in out.iter_mut().zip(f1.values()) {
                *o -= dt * f;
            }
        }
    }

    fn check(&self, rho: &CellField) -> Result<(), StepError> {
        self.grid().check_same(rho.grid())?;
        Ok(self.stepper.model.check_field(rho)?)
    }

    /// `R(rho)`.
    pub fn density_residual(&self, rho: &CellField) -> Result<CellField, StepError> {
        self.check(rho)?;
        let mut out = CellField::zeros(*self.grid());
        let mut work = vec![0.0; rho.len()];
        self.scaled_residual_into(rho.values(), out.values_mut(), &mut work);
        out.scale(1.0 / self.dt());
        Ok(out)
    }

    fn jacobian_weight(&self, rho: &[f64]) -> Vec<f64> {
        let gamma = self.stepper.params.gamma;
        let model = &self.stepper.model;
        rho.iter().zip(self.rho_old().values()).map(|(&r, &r0)| gamma * model.s_half_derivative_unchecked(r, r0)).collect()
    }

    /// `x - dt div(D grad(w x + G x))` with `w = gamma dS/drho`.
    fn scaled_jacobian_into(&self, weight: &[f64], x: &[f64], out: &mut [f64], work: &mut [f64]) {
        let dt = self.dt();
        self.stepper.helmholtz.apply_gh_into(x, work);
        for ((wk, &w), &xi) in work.iter_mut().zip(weight).zip(x) {
            *wk += w * xi;
        }
        variable_laplacian_into(&self.mobility, work, out);
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = xi - dt * *o;
        }
    }

    /// `R'(rho) d`.
    pub fn jacobian_apply(&self, rho: &CellField, d: &CellField) -> Result<CellField, StepError> {
        self.check(rho)?;
        self.grid().check_same(d.grid())?;
        let weight = self.jacobian_weight(rho.values());
        let mut out = CellField::zeros(*self.grid());
        let mut work = vec![0.0; rho.len()];
        self.scaled_jacobian_into(&weight, d.values(), out.values_mut(), &mut work);
        out.scale(1.0 / self.dt());
        Ok(out)
    }

    /// `rho - rho^n - dt f1`, which is mean-zero on the admissible set.
    fn increment(&self, rho: &CellField) -> CellField {
        let mut g = rho - self.rho_old();
        if let Some(f1) = &self.f1 {
            g.axpy(-self.dt(), f1);
        }
        g
    }

    fn solve_ld(&self, g: &CellField) -> Result<CellField, StepError> {
        let p = &self.stepper.params;
        let (u, _) = self.stepper.neumann.solve_variable(&self.mobility, g, p.elliptic_tol, p.elliptic_max_iters)?;
        Ok(u)
    }

    /// The convex functional whose minimizer over densities with mean
    /// [`Self::target_mean`] solves the step:
    ///
    /// ```text
    /// J(rho) = ||rho - rho^n - dt f1||^2_{L_D^{-1}} / (2 dt) + gamma <Phi(rho), 1>
    ///          + <rho, G rho> / 2 - <b, rho>
    /// ```
    ///
    /// with `L_D = -div(D grad .)` and `Phi` the antiderivative of `S`.
    pub fn functional(&self, rho: &CellField) -> Result<f64, StepError> {
        self.check(rho)?;
        let grid = *self.grid();
        let p = &self.stepper.params;
        let model = &self.stepper.model;
        let g = self.increment(rho);
        let u = self.solve_ld(&g)?;
        let phi_sum: f64 = rho
            .values()
            .iter()
            .zip(self.rho_old().values())
            .map(|(&r, &r0)| model.s_half_antiderivative_unchecked(r, r0))
            .sum::<f64>()
            * grid.cell_volume();
        let grho = self.stepper.helmholtz.apply_gh(rho);
        Ok(inner_unchecked(&grid, g.values(), u.values()) / (2.0 * self.dt()) + p.gamma * phi_sum
            + 0.5 * inner_unchecked(&grid, rho.values(), grho.values())
            - inner_unchecked(&grid, self.known.values(), rho.values()))
    }

    /// Gradient of [`Self::functional`] in the discrete `L2` inner product,
    /// projected onto mean-zero fields (the tangent space of the constraint).
    pub fn functional_gradient(&self, rho: &CellField) -> Result<CellField, StepError> {
        self.check(rho)?;
        let g = self.increment(rho);
        let mut grad = self.solve_ld(&g)?;
        grad.scale(1.0 / self.dt());
        let mut pot = CellField::zeros(*self.grid());
        self.potential_into(rho.values(), pot.values_mut());
        grad.axpy(1.0, &pot);
        grad.project_mean_zero();
        Ok(grad)
    }

    fn admissible(&self, rho: &[f64]) -> bool {
        rho.iter().all(|&r| self.stepper.model.is_admissible(r))
    }

    /// Largest step `s <= 1` along `d` keeping the safeguard margin.
    fn safeguard_step(&self, rho: &[f64], d: &[f64], limit: f64) -> f64 {
        let sigma = self.stepper.params.safeguard_sigma;
        let upper = self.stepper.model.upper_bound();
        let mut s = limit;
        for (&r, &di) in rho.iter().zip(d) {
            if di < 0.0 {
                s = s.min(sigma * r / -di);
            } else if let (Some(m), true) = (upper, di > 0.0) {
                s = s.min(sigma * (m - r) / di);
            }
        }
        s
    }

    fn norm(&self, v: &[f64]) -> f64 {
        inner_unchecked(self.grid(), v, v).sqrt()
    }

    /// Damped inexact Newton from `guess`.
    fn newton(&self, guess: CellField, report: &mut StepReport) -> Result<CellField, Stagnated> {
        let p = &self.stepper.params;
        let n = guess.len();
        let tol = self.tolerance();
        let mut rho = guess;
        let mut r = vec![0.0; n];
        let mut work = vec![0.0; n];
        self.scaled_residual_into(rho.values(), &mut r, &mut work);
        let mut rn = self.norm(&r);
        let mut trial = rho.clone();
        let mut rt = vec![0.0; n];
        let mut d = vec![0.0; n];
        let rhs_mean_fix = |d: &mut [f64], r: &[f64]| {
            let shift = -r.iter().sum::<f64>() / n as f64 - d.iter().sum::<f64>() / n as f64;
            d.iter_mut().for_each(|v| *v += shift);
        };
        for _ in 0..p.newton_max_iters {
            if rn <= tol {
                report.final_residual = rn / self.scale;
                return Ok(rho);
            }
            report.newton_iterations += 1;
            let weight = self.jacobian_weight(rho.values());
            let precond = self.preconditioner(&weight);
            let b: Vec<f64> = r.iter().map(|v| -v).collect();
            let forcing = (0.1 * tol / rn).clamp(1e-8, 1e-4);
            d.iter_mut().for_each(|v| *v = 0.0);
            let mut jwork = vec![0.0; n];
            let kr = gmres(
                |x, y| self.scaled_jacobian_into(&weight, x, y, &mut jwork),
                |x, y| precond.apply(x, y),
                &b,
                &mut d,
                forcing,
                40,
                400,
            );
            report.linear_iterations += kr.iterations;
            // the mean of an exact Newton step is known in closed form
            rhs_mean_fix(&mut d, &r);
            if d.iter().any(|v| !v.is_finite()) {
                return Err(Stagnated(rho));
            }
            let mut step = self.safeguard_step(rho.values(), &d, 1.0);
            if step < 1.0 {
                report.damping_events += 1;
            }
            loop {
                for ((t, &x), &di) in trial.values_mut().iter_mut().zip(rho.values()).zip(&d) {
                    *t = x + step * di;
                }
                if self.admissible(trial.values()) {
                    self.scaled_residual_into(trial.values(), &mut rt, &mut work);
                    let rtn = self.norm(&rt);
                    if rtn <= (1.0 - 1e-4 * step) * rn || rtn <= tol {
                        std::mem::swap(&mut rho, &mut trial);
                        std::mem::swap(&mut r, &mut rt);
                        rn = rtn;
                        break;
                    }
                }
                step *= 0.5;
                report.damping_events += 1;
                if step < 1e-12 {
                    return Err(Stagnated(rho));
                }
            }
        }
        if rn <= tol {
            report.final_residual = rn / self.scale;
            return Ok(rho);
        }
        Err(Stagnated(rho))
    }

    /// Approximate inverse of `I + dt L_D W` with `W ~ diag(w + c)`:
    /// `J ~ (W^{-1} + dt L_D) W`, and `W^{-1} + dt L_D` is replaced by its
    /// diagonal scaling `Sigma` around a constant-coefficient blend of the
    /// identity and the normalized Laplacian.
    fn preconditioner(&self, weight: &[f64]) -> Preconditioner<'_> {
        let dt = self.dt();
        let c = self.stepper.helmholtz.stabilization_coefficient();
        let grid = self.grid();
        let inv_w: Vec<f64> = weight.iter().map(|w| 1.0 / (w + c.max(0.0))).collect();
        let sigma: Vec<f64> = inv_w.iter().zip(&self.lap_diag).map(|(iw, l)| iw + dt * l).collect();
        let a = inv_w.iter().zip(&sigma).map(|(iw, s)| iw / s).sum::<f64>() / weight.len() as f64;
        let lap_scale = grid.h() * grid.h() / (2.0 * grid.dim() as f64);
        Preconditioner {
            transform: self.stepper.helmholtz.transform(),
            left: inv_w.iter().zip(&sigma).map(|(iw, s)| iw / s.sqrt()).collect(),
            right: sigma.iter().map(|s| 1.0 / s.sqrt()).collect(),
            a,
            b: (1.0 - a) * lap_scale,
            scratch: std::cell::RefCell::new(vec![0.0; weight.len()]),
        }
    }

    /// Steepest descent on [`Self::functional`] in the `L_D` metric, where
    /// the descent direction is `-R`, with an exact line search.
    fn descent(&self, guess: CellField, report: &mut StepReport) -> Result<CellField, StepError> {
        let p = &self.stepper.params;
        let model = &self.stepper.model;
        let grid = *self.grid();
        let dt = self.dt();
        let tol = self.tolerance();
        let n = guess.len();
        let mut rho = guess;
        self.restore_mean(&mut rho).map_err(|_| StepError::PositivityBreakdown(*report))?;
        let mut r = vec![0.0; n];
        let mut work = vec![0.0; n];
        for _ in 0..p.descent_max_iters {
            self.scaled_residual_into(rho.values(), &mut r, &mut work);
            let rn = self.norm(&r);
            report.final_residual = rn / self.scale;
            if rn <= tol {
                return Ok(rho);
            }
            report.descent_iterations += 1;
            let mut d = CellField::from_values(grid, r.iter().map(|v| -v).collect())?;
            d.project_mean_zero();
            let mut g = self.increment(&rho);
            g.project_mean_zero();
            let ug = self.solve_ld(&g)?;
            let ud = self.solve_ld(&d)?;
            let gr = self.stepper.helmholtz.apply_gh(&rho);
            let gd = self.stepper.helmholtz.apply_gh(&d);
            let dot = |a: &CellField, b: &CellField| inner_unchecked(&grid, a.values(), b.values());
            let lin0 = dot(&d, &ug) / dt + dot(&d, &gr) - dot(&d, &self.known);
            let lin1 = dot(&d, &ud) / dt + dot(&d, &gd);
            let slope = |s: f64| -> f64 {
                let ent: f64 = rho
                    .values()
                    .iter()
                    .zip(d.values())
                    .zip(self.rho_old().values())
                    .map(|((&x, &di), &x0)| model.s_half_unchecked(x + s * di, x0) * di)
                    .sum::<f64>()
                    * grid.cell_volume();
                lin0 + s * lin1 + p.gamma * ent
            };
            let s_max = self.safeguard_step(rho.values(), d.values(), f64::INFINITY);
            if !(s_max > 0.0) || !s_max.is_finite() {
                return Err(StepError::PositivityBreakdown(*report));
            }
            let s = if slope(s_max) <= 0.0 {
                report.damping_events += 1;
                s_max
            } else {
                // slope is increasing in s: bracketed root by regula falsi (Illinois)
                let (mut lo, mut hi) = (0.0, s_max);
                let (mut flo, mut fhi) = (slope(lo), slope(hi));
                if flo >= 0.0 {
                    break;
                }
                let mut side = 0;
                let mut mid = lo;
                for _ in 0..200 {
                    mid = (lo * fhi - hi * flo) / (fhi - flo);
                    if !(mid > lo && mid < hi) {
                        mid = 0.5 * (lo + hi);
                    }
                    let fm = slope(mid);
                    if fm == 0.0 || (hi - lo) <= 1e-15 * hi {
                        break;
                    }
                    if fm < 0.0 {
                        lo = mid;
                        flo = fm;
                        if side == -1 {
                            fhi *= 0.5;
                        }
                        side = -1;
                    } else {
                        hi = mid;
                        fhi = fm;
                        if side == 1 {
                            flo *= 0.5;
                        }
                        side = 1;
                    }
                }
                mid
            };
            rho.axpy(s, &d);
        }
        self.scaled_residual_into(rho.values(), &mut r, &mut work);
        report.final_residual = self.norm(&r) / self.scale;
        if report.final_residual * self.scale <= tol {
            return Ok(rho);
        }
        Err(StepError::NonConvergence(*report))
    }

    /// Shifts `rho` to the target mean; scales it instead if the shift would
    /// leave the admissible set. Returns the largest pointwise change.
    fn restore_mean(&self, rho: &mut CellField) -> Result<f64, ()> {
        let shift = self.target_mean - rho.mean();
        if shift == 0.0 {
            return Ok(0.0);
        }
        if rho.values().iter().all(|&r| self.stepper.model.is_admissible(r + shift)) {
            rho.add_constant(shift);
            return Ok(shift.abs());
        }
        let factor = self.target_mean / rho.mean();
        let scaled = rho.map(|r| r * factor);
        if factor > 0.0 && self.admissible(scaled.values()) {
            let change = linf_diff(rho, &scaled);
            *rho = scaled;
            return Ok(change);
        }
        Err(())
    }

    /// Newton from `rho^n`, steepest descent if it stalls, then exact mean
    /// restoration.
    pub fn solve(&self) -> Result<(CellField, StepReport), StepError> {
        self.solve_from(self.rho_old().clone())
    }

    /// Same as [`Self::solve`] from an arbitrary admissible initial guess.
    pub fn solve_from(&self, guess: CellField) -> Result<(CellField, StepReport), StepError> {
        self.check(&guess)?;
        let mut report = StepReport::default();
        if !self.stepper.model.is_admissible(self.target_mean) {
            return Err(StepError::PositivityBreakdown(report));
        }
        let rho = match self.newton(guess, &mut report) {
            Ok(rho) => rho,
            Err(Stagnated(best)) => {
                report.used_fallback = true;
                self.descent(best, &mut report)?
            }
        };
        self.finish(rho, report)
    }

    /// Descent only, for cross-checking the Newton solution.
    pub fn solve_by_descent(&self, guess: CellField) -> Result<(CellField, StepReport), StepError> {
        self.check(&guess)?;
        let mut report = StepReport { used_fallback: true, ..Default::default() };
        let rho = self.descent(guess, &mut report)?;
        self.finish(rho, report)
    }

    fn finish(&self, mut rho: CellField, mut report: StepReport) -> Result<(CellField, StepReport), StepError> {
        report.mean_correction_magnitude =
            self.restore_mean(&mut rho).map_err(|_| StepError::PositivityBreakdown(report))?;
        let mut r = vec![0.0; rho.len()];
        let mut work = vec![0.0; rho.len()];
        self.scaled_residual_into(rho.values(), &mut r, &mut work);
        report.final_residual = self.norm(&r) / self.scale;
        if !(report.final_residual <= self.stepper.params.newton_tol) {
            return Err(StepError::NonConvergence(report));
        }
        Ok((rho, report))
    }
}

fn linf_diff(a: &CellField, b: &CellField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

struct Preconditioner<'a> {
    transform: &'a CosineTransform,
    left: Vec<f64>,
    right: Vec<f64>,
    a: f64,
    b: f64,
    scratch: std::cell::RefCell<Vec<f64>>,
}

impl Preconditioner<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut s = self.scratch.borrow_mut();
        for ((si, &xi), &ri) in s.iter_mut().zip(x).zip(&self.right) {
            *si = xi * ri;
        }
        self.transform.solve_symbol(&s, y, |lam| self.a + self.b * lam);
        for (yi, &li) in y.iter_mut().zip(&self.left) {
            *yi *= li;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mobility_arg_floor() {
        let g = Grid::unit_square(4).unwrap();
        let a = CellField::constant(g, 1.0);
        let b = CellField::constant(g, 3.0);
        let out = extrapolated_mobility_arg(&a, &b, 0.1);
        assert!(out.values().iter().all(|&v| (v - 1e-4).abs() < 1e-18));
        let c = extrapolated_mobility_arg(&b, &b, 0.1);
        assert!(c.values().iter().all(|&v| (v - (9.0f64 + 1e-8).sqrt()).abs() < 1e-15));
    }

    #[test]
    fn saturation_mobility_stays_positive() {
        let g = Grid::unit_square(4).unwrap();
        let m = EntropyModel::Saturation { max_density: 1.0 };
        // extrapolation overshoots the cap
        let cur = CellField::constant(g, 0.99);
        let prev = CellField::constant(g, 0.9);
        let eta = extrapolated_mobility(&cur, &prev, 1e-2, &m);
        assert!(eta.min() > 0.0);
        let cur = CellField::constant(g, 0.5);
        let eta = extrapolated_mobility(&cur, &cur, 1e-3, &m);
        assert!(eta.values().iter().all(|&v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn bootstrap_rejects_boundary() {
        let g = Grid::unit_square(4).unwrap();
        let s = Stepper::new(g, SchemeParams::default(), EntropyModel::Classical, SourceTerms::none()).unwrap();
        let mut rho = CellField::constant(g, 1.0);
        rho.values_mut()[3] = 1e-6;
        assert!(s.bootstrap_first_step(rho.clone(), CellField::zeros(g)).is_ok());
        rho.values_mut()[3] = 0.0;
        match s.bootstrap_first_step(rho, CellField::zeros(g)) {
            Err(StepError::InvalidInitialData(msg)) => assert!(msg.contains("cell 3"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }
}
