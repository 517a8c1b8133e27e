//! Neumann elliptic operators and solvers.
//!
//! Constant-coefficient problems (`-Delta_h`, `L1`) are solved exactly with
//! the cosine transform. Variable-coefficient problems
//! `-div(D grad u) = g` use conjugate gradients on the mean-zero subspace,
//! preconditioned by the Poisson solve scaled by the mean face coefficient.
//!
//! The chemoattractant half step is carried by
//!
//! ```text
//! L1 = theta/dt + alpha/2 - (mu/2) Delta_h
//! L2 = theta/dt - alpha/2 + (mu/2) Delta_h
//! G  = c_stab - (chi^2 / 4) L1^{-1}
//! ```
//!
//! where `c_stab` is the stabilization coefficient (`chi^2 dt / (4 theta)`
//! by default). `L1 + L2 = 2 theta / dt` and `G` is monotone.

use crate::error::EllipticError;
use crate::grid::{CellField, FaceField, Grid};
use crate::krylov::{pcg, KrylovReport};
use crate::ops::{inner_unchecked, l2_norm, laplacian, variable_laplacian_into};
use crate::params::SchemeParams;
use crate::spectral::CosineTransform;

/// Outcome of a variable-coefficient solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticSolveReport {
    pub iterations: usize,
    /// `||L_D u - g||_2 / ||g||_2`.
    pub final_residual_l2: f64,
    pub converged: bool,
}

impl From<KrylovReport> for EllipticSolveReport {
    fn from(r: KrylovReport) -> Self {
        Self { iterations: r.iterations, final_residual_l2: r.relative_residual, converged: r.converged }
    }
}

/// `L1`, `L2`, `G` and the exact `L1` inverse for fixed scheme constants.
#[derive(Debug, Clone)]
pub struct HelmholtzOps {
    transform: CosineTransform,
    theta: f64,
    dt: f64,
    alpha: f64,
    mu: f64,
    chi: f64,
    stab: f64,
}

impl HelmholtzOps {
    pub fn new(grid: Grid, params: &SchemeParams) -> Self {
        Self::with_transform(CosineTransform::new(grid), params)
    }

    pub fn with_transform(transform: CosineTransform, params: &SchemeParams) -> Self {
        Self {
            transform,
            theta: params.theta,
            dt: params.dt,
            alpha: params.alpha,
            mu: params.mu,
            chi: params.chi,
            stab: params.stabilization_coefficient(),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.transform.grid()
    }

    pub fn transform(&self) -> &CosineTransform {
        &self.transform
    }

    /// Stabilization coefficient `c_stab` entering `G`.
    pub fn stabilization_coefficient(&self) -> f64 {
        self.stab
    }

    /// Eigenvalue of `L1` on a mode where `-Delta_h` has eigenvalue `lam`.
    pub fn l1_symbol(&self, lam: f64) -> f64 {
        self.theta / self.dt + 0.5 * self.alpha + 0.5 * self.mu * lam
    }

    pub fn apply_l1(&self, f: &CellField) -> CellField {
        let mut out = f * (self.theta / self.dt + 0.5 * self.alpha);
        out.axpy(-0.5 * self.mu, &laplacian(f));
        out
    }

    pub fn apply_l2(&self, f: &CellField) -> CellField {
        let mut out = f * (self.theta / self.dt - 0.5 * self.alpha);
        out.axpy(0.5 * self.mu, &laplacian(f));
        out
    }

    pub fn solve_l1(&self, g: &CellField) -> CellField {
        let mut out = g.clone();
        self.solve_l1_into(g.values(), out.values_mut());
        out
    }

    pub(crate) fn solve_l1_into(&self, g: &[f64], out: &mut [f64]) {
        self.transform.solve_symbol(g, out, |lam| self.l1_symbol(lam));
    }

    /// `G f = c_stab f - (chi^2 / 4) L1^{-1} f`.
    pub fn apply_gh(&self, f: &CellField) -> CellField {
        let mut out = f.clone();
        self.apply_gh_into(f.values(), out.values_mut());
        out
    }

    pub(crate) fn apply_gh_into(&self, f: &[f64], out: &mut [f64]) {
        self.solve_l1_into(f, out);
        let q = 0.25 * self.chi * self.chi;
        for (o, &v) in out.iter_mut().zip(f) {
            *o = self.stab * v - q * *o;
        }
    }

    /// Eigenvalue of `G` on the constant mode.
    pub fn gh_constant_symbol(&self) -> f64 {
        self.stab - 0.25 * self.chi * self.chi / self.l1_symbol(0.0)
    }
}

/// Neumann solvers sharing one cosine transform.
#[derive(Debug, Clone)]
pub struct NeumannSolver {
    transform: CosineTransform,
}

fn check_mean_zero(g: &CellField) -> Result<(), EllipticError> {
    let mean = g.mean();
    let norm = l2_norm(g);
    let scale = norm / g.grid().volume().sqrt();
    if mean.abs() > 1e-12 * scale {
        return Err(EllipticError::NotMeanZero { mean, norm });
    }
    Ok(())
}

fn check_positive_interior(coeff: &FaceField) -> Result<(), EllipticError> {
    let grid = *coeff.grid();
    let n = grid.n();
    for axis in 0..grid.dim() {
        let s = grid.face_shape(axis);
        let c = coeff.component(axis);
        for k in 0..s[2] {
            for j in 0..s[1] {
                for i in 0..s[0] {
                    let p = [i, j, k][axis];
                    let index = i + s[0] * (j + s[1] * k);
                    if p != 0 && p != n && !(c[index] > 0.0 && c[index].is_finite()) {
                        return Err(EllipticError::NonPositiveCoefficient { axis, index, value: c[index] });
                    }
                }
            }
        }
    }
    Ok(())
}

impl NeumannSolver {
    pub fn new(grid: Grid) -> Self {
        Self { transform: CosineTransform::new(grid) }
    }

    pub fn from_transform(transform: CosineTransform) -> Self {
        Self { transform }
    }

    pub fn grid(&self) -> &Grid {
        self.transform.grid()
    }

    /// Mean-zero `u` with `-Delta_h u = g`.
    pub fn solve_poisson(&self, g: &CellField) -> Result<CellField, EllipticError> {
        self.grid().check_same(g.grid())?;
        check_mean_zero(g)?;
        let mut out = g.clone();
        self.transform.solve_symbol(g.values(), out.values_mut(), |lam| lam);
        Ok(out)
    }

    /// `||g||_{-1,h} = sqrt(<g, (-Delta_h)^{-1} g>)`.
    pub fn norm_hm1(&self, g: &CellField) -> Result<f64, EllipticError> {
        let u = self.solve_poisson(g)?;
        Ok(inner_unchecked(g.grid(), g.values(), u.values()).max(0.0).sqrt())
    }

    /// Mean-zero `u` with `-div(D grad u) = g`, to relative residual `tol`.
    pub fn solve_variable(
        &self,
        coeff: &FaceField,
        g: &CellField,
        tol: f64,
        max_iters: usize,
    ) -> Result<(CellField, EllipticSolveReport), EllipticError> {
        self.grid().check_same(coeff.grid())?;
        self.grid().check_same(g.grid())?;
        check_positive_interior(coeff)?;
        check_mean_zero(g)?;
        let mut g0 = g.clone();
        g0.project_mean_zero();
        let (u, report) = self.solve_variable_unchecked(coeff, &g0, tol, max_iters);
        if report.converged {
            Ok((u, report))
        } else {
            Err(EllipticError::NotConverged(report))
        }
    }

    /// Same as [`Self::solve_variable`] without input validation; `g` must be
    /// mean-zero and `coeff` positive on interior faces.
    pub(crate) fn solve_variable_unchecked(
        &self,
        coeff: &FaceField,
        g: &CellField,
        tol: f64,
        max_iters: usize,
    ) -> (CellField, EllipticSolveReport) {
        let scale = coeff.interior_mean();
        let op = |x: &[f64], y: &mut [f64]| {
            variable_laplacian_into(coeff, x, y);
            y.iter_mut().for_each(|v| *v = -*v);
        };
        let precond = |r: &[f64], z: &mut [f64]| {
            self.transform.solve_symbol(r, z, |lam| scale * lam);
        };
        let mut u = CellField::zeros(*g.grid());
        let report = pcg(op, precond, g.values(), u.values_mut(), tol, max_iters, true);
        (u, report.into())
    }

    /// `||g||_{L_D^{-1}} = sqrt(<g, L_D^{-1} g>)`.
    pub fn norm_weighted_hm1(
        &self,
        coeff: &FaceField,
        g: &CellField,
        tol: f64,
        max_iters: usize,
    ) -> Result<f64, EllipticError> {
        if g.values().iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let (u, _) = self.solve_variable(coeff, g, tol, max_iters)?;
        Ok(inner_unchecked(g.grid(), g.values(), u.values()).max(0.0).sqrt())
    }
}

/// Mean-zero solution of `-Delta_h u = g`.
pub fn solve_poisson_neumann(g: &CellField) -> Result<CellField, EllipticError> {
    NeumannSolver::new(*g.grid()).solve_poisson(g)
}

/// Mean-zero solution of `-div(D grad u) = g` with a default iteration cap.
pub fn solve_variable_elliptic(
    coeff: &FaceField,
    g: &CellField,
    tol: f64,
) -> Result<(CellField, EllipticSolveReport), EllipticError> {
    NeumannSolver::new(*g.grid()).solve_variable(coeff, g, tol, 1000)
}

pub fn norm_weighted_hm1(coeff: &FaceField, g: &CellField, tol: f64) -> Result<f64, EllipticError> {
    NeumannSolver::new(*g.grid()).norm_weighted_hm1(coeff, g, tol, 1000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{div_coeff, face_average, grad};

    fn params() -> SchemeParams {
        SchemeParams { theta: 0.7, dt: 0.05, alpha: 1.3, mu: 0.9, chi: 1.1, ..Default::default() }
    }

    fn field(grid: Grid, seed: u64) -> CellField {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        CellField::from_fn(grid, |_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn l1_of_constant() {
        let g = Grid::unit_square(6).unwrap();
        let ops = HelmholtzOps::new(g, &params());
        let c = CellField::constant(g, 2.0);
        let expect = (0.7 / 0.05 + 0.65) * 2.0;
        assert!(ops.apply_l1(&c).values().iter().all(|v| (v - expect).abs() < 1e-12));
        let s = ops.solve_l1(&c);
        assert!(s.values().iter().all(|v| (v - 2.0 / (0.7 / 0.05 + 0.65)).abs() < 1e-13));
    }

    #[test]
    fn l1_plus_l2_is_scaled_identity() {
        let g = Grid::unit_cube(5).unwrap();
        let ops = HelmholtzOps::new(g, &params());
        let f = field(g, 3);
        let sum = &ops.apply_l1(&f) + &ops.apply_l2(&f);
        for (a, b) in sum.values().iter().zip(f.values()) {
            assert!((a - 2.0 * 0.7 / 0.05 * b).abs() < 1e-11);
        }
    }

    #[test]
    fn solve_l1_roundtrip_on_32_squared() {
        let g = Grid::unit_square(32).unwrap();
        let ops = HelmholtzOps::new(g, &params());
        let f = field(g, 9);
        let back = ops.apply_l1(&ops.solve_l1(&f));
        let err = l2_norm(&(&back - &f)) / l2_norm(&f);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn gh_constant_mode() {
        let g = Grid::unit_square(4).unwrap();
        let p = params();
        let ops = HelmholtzOps::new(g, &p);
        let c = CellField::constant(g, 1.5);
        let chi2 = p.chi * p.chi;
        let expect = (chi2 * p.dt / (4.0 * p.theta) - 0.25 * chi2 / (p.theta / p.dt + p.alpha / 2.0)) * 1.5;
        assert!(ops.apply_gh(&c).values().iter().all(|v| (v - expect).abs() < 1e-14));
        let p0 = SchemeParams { alpha: 0.0, ..p };
        assert!(HelmholtzOps::new(g, &p0).gh_constant_symbol().abs() < 1e-17);
    }

    #[test]
    fn poisson_zero_and_rejection() {
        let g = Grid::unit_square(8).unwrap();
        let s = NeumannSolver::new(g);
        let z = s.solve_poisson(&CellField::zeros(g)).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert!(matches!(
            s.solve_poisson(&CellField::constant(g, 1.0)),
            Err(EllipticError::NotMeanZero { .. })
        ));
        assert_eq!(s.norm_hm1(&CellField::zeros(g)).unwrap(), 0.0);
    }

    #[test]
    fn variable_solver_reduces_to_poisson() {
        let g = Grid::unit_square(16).unwrap();
        let s = NeumannSolver::new(g);
        let mut rhs = field(g, 5);
        rhs.project_mean_zero();
        let ones = FaceField::constant(g, 1.0);
        let (u, rep) = s.solve_variable(&ones, &rhs, 1e-12, 100).unwrap();
        assert!(rep.iterations <= 2, "{rep:?}");
        let p = s.solve_poisson(&rhs).unwrap();
        assert!(l2_norm(&(&u - &p)) <= 1e-10 * l2_norm(&p));
    }

    #[test]
    fn variable_solver_rejects_bad_inputs() {
        let g = Grid::unit_square(6).unwrap();
        let s = NeumannSolver::new(g);
        let mut d = FaceField::constant(g, 1.0);
        let f = d.face_index(0, 3, 2, 0);
        d.component_mut(0)[f] = 0.0;
        let mut rhs = field(g, 1);
        rhs.project_mean_zero();
        assert!(matches!(
            s.solve_variable(&d, &rhs, 1e-10, 100),
            Err(EllipticError::NonPositiveCoefficient { axis: 0, .. })
        ));
        let d = FaceField::constant(g, 1.0);
        assert!(matches!(
            s.solve_variable(&d, &CellField::constant(g, 1.0), 1e-10, 100),
            Err(EllipticError::NotMeanZero { .. })
        ));
        // one iteration is not enough for a rough coefficient
        let coeff = face_average(&field(g, 8).map(|v| 1.0 + 0.9 * v));
        assert!(matches!(
            s.solve_variable(&coeff, &rhs, 1e-14, 1),
            Err(EllipticError::NotConverged(_))
        ));
    }

    #[test]
    fn variable_solver_residual() {
        let g = Grid::unit_square(24).unwrap();
        let s = NeumannSolver::new(g);
        let coeff = face_average(&field(g, 2).map(|v| 1.25 + 0.75 * v));
        let mut rhs = field(g, 4);
        rhs.project_mean_zero();
        let (u, rep) = s.solve_variable(&coeff, &rhs, 1e-10, 500).unwrap();
        let lu = div_coeff(&coeff, &grad(&u)).unwrap();
        let res = l2_norm(&(&lu + &rhs)) / l2_norm(&rhs);
        assert!(res <= 1e-9, "{res} {rep:?}");
        assert!(u.mean().abs() < 1e-14);
    }

    #[test]
    fn weighted_norm_scaling() {
        let g = Grid::unit_square(12).unwrap();
        let s = NeumannSolver::new(g);
        let coeff = face_average(&field(g, 6).map(|v| 1.0 + 0.5 * v));
        let mut rhs = field(g, 7);
        rhs.project_mean_zero();
        let a = s.norm_weighted_hm1(&coeff, &rhs, 1e-13, 500).unwrap();
        let b = s.norm_weighted_hm1(&coeff.scaled(4.0), &rhs, 1e-13, 500).unwrap();
        assert!((b - a / 2.0).abs() < 1e-10 * a);
        let ones = FaceField::constant(g, 1.0);
        let c = s.norm_weighted_hm1(&ones, &rhs, 1e-13, 500).unwrap();
        assert!((c - s.norm_hm1(&rhs).unwrap()).abs() < 1e-10 * c);
        assert_eq!(s.norm_weighted_hm1(&coeff, &CellField::zeros(g), 1e-10, 10).unwrap(), 0.0);
    }
}
