//! Smooth exact solution used for convergence studies:
//! `rho_e = phi_e = 0.1 e^{-t} prod_d cos(pi x_d) + 0.2`, with the source
//! terms that make it solve the system for arbitrary model constants.

use std::f64::consts::PI;

use pks_core::stepper::SourceTerms;
use pks_core::{CellField, Grid, SchemeParams};

const AMP: f64 = 0.1;
const OFFSET: f64 = 0.2;

fn cos_product(x: [f64; 3], dim: usize) -> f64 {
    (0..dim).map(|d| (PI * x[d]).cos()).product()
}

/// `|grad prod cos(pi x_d)|^2`.
fn grad_cos_product_sq(x: [f64; 3], dim: usize) -> f64 {
    (0..dim)
        .map(|d| {
            let rest: f64 = (0..dim).filter(|&e| e != d).map(|e| (PI * x[e]).cos()).product();
            let g = PI * (PI * x[d]).sin() * rest;
            g * g
        })
        .sum()
}

/// Exact density (and chemoattractant) at `x`, `t`.
pub fn exact(x: [f64; 3], t: f64, dim: usize) -> f64 {
    AMP * (-t).exp() * cos_product(x, dim) + OFFSET
}

pub fn exact_field(grid: Grid, t: f64) -> CellField {
    let dim = grid.dim();
    CellField::from_fn(grid, |x| exact(x, t, dim))
}

/// `(f1, f2)` at `x`, `t`:
///
/// ```text
/// f1 = u_t - gamma Lap u + chi (|grad u|^2 + u Lap u)
/// f2 = theta u_t - mu Lap u + alpha u - chi u
/// ```
///
/// with `u = rho_e = phi_e`.
pub fn sources(x: [f64; 3], t: f64, dim: usize, p: &SchemeParams) -> (f64, f64) {
    let a = AMP * (-t).exp();
    let c = cos_product(x, dim);
    let u = a * c + OFFSET;
    let u_t = -a * c;
    let lap = -(dim as f64) * PI * PI * a * c;
    let grad_sq = a * a * grad_cos_product_sq(x, dim);
    let f1 = u_t - p.gamma * lap + p.chi * (grad_sq + u * lap);
    let f2 = p.theta * u_t - p.mu * lap + p.alpha * u - p.chi * u;
    (f1, f2)
}

/// Source hooks for the stepper; `with_f1 = false` drops the density source
/// (mass is then conserved exactly).
pub fn source_terms(dim: usize, params: SchemeParams, with_f1: bool, with_f2: bool) -> SourceTerms {
    let f1 = move |x: [f64; 3], t: f64| sources(x, t, dim, &params).0;
    let f2 = move |x: [f64; 3], t: f64| sources(x, t, dim, &params).1;
    let mut s = SourceTerms::new(f1, f2);
    if !with_f1 {
        s.f1 = None;
    }
    if !with_f2 {
        s.f2 = None;
    }
    s
}

/// Max-norm errors of the numerical fields against the exact solution.
pub fn manufactured_errors(rho: &CellField, phi: &CellField, t: f64) -> (f64, f64) {
    let exact = exact_field(*rho.grid(), t);
    let err = |f: &CellField| {
        f.values().iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    (err(rho), err(phi))
}
