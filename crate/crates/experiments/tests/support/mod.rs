//! Numerical-differentiation oracle for the manufactured problem and helpers
//! to load the shipped configurations.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use pks_core::SchemeParams;
use pks_experiments::manufactured::{exact, sources};
use pks_experiments::RunConfig;

pub fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// A shipped configuration with its output redirected to `out`.
pub fn load_config(name: &str, out: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_path(&config_path(name)).unwrap();
    cfg.output.dir = out.to_path_buf();
    cfg
}

const H: f64 = 1e-3;

/// Fourth-order central difference of `f` along `axis`.
fn d1(f: &dyn Fn([f64; 3]) -> f64, x: [f64; 3], axis: usize) -> f64 {
    let at = |s: f64| {
        let mut y = x;
        y[axis] += s * H;
        f(y)
    };
    (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * H)
}

fn d2(f: &dyn Fn([f64; 3]) -> f64, x: [f64; 3], axis: usize) -> f64 {
    let at = |s: f64| {
        let mut y = x;
        y[axis] += s * H;
        f(y)
    };
    (-at(2.0) + 16.0 * at(1.0) - 30.0 * at(0.0) + 16.0 * at(-1.0) - at(-2.0)) / (12.0 * H * H)
}

/// Residuals of both equations of the continuous system (classical
/// entropy) at `(x, t)`, with the exact solution inserted for both fields
/// and every derivative taken numerically.
pub fn continuous_residuals(x: [f64; 3], t: f64, dim: usize, p: &SchemeParams) -> (f64, f64) {
    let u = |y: [f64; 3]| exact(y, t, dim);
    let ut = {
        let at = |s: f64| exact(x, t + s * H, dim);
        (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * H)
    };
    let lap: f64 = (0..dim).map(|a| d2(&u, x, a)).sum();
    // div(rho grad phi), with the inner derivative also numerical
    let div_flux: f64 = (0..dim)
        .map(|a| {
            let flux = move |y: [f64; 3]| u(y) * d1(&u, y, a);
            d1(&flux, x, a)
        })
        .sum();
    let (f1, f2) = sources(x, t, dim, p);
    let rho = u(x);
    let r1 = ut - p.gamma * lap + p.chi * div_flux - f1;
    let r2 = p.theta * ut - p.mu * lap + p.alpha * rho - p.chi * rho - f2;
    (r1, r2)
}
