//! Difference, average and inner-product operators under homogeneous
//! Neumann closure.
//!
//! Gradients are evaluated on faces with boundary faces pinned to zero,
//! which is the same as mirroring a ghost cell (`u_0 = u_1`,
//! `u_{N+1} = u_N`). With that closure both summation-by-parts identities
//!
//! ```text
//! <f, div F>              = -[grad f, F]
//! <g, div(D grad f)>      = -[grad g, D grad f]
//! ```
//!
//! hold to roundoff. The face inner product `[F, G]` weights interior faces
//! by `h^dim` and boundary faces by `h^dim / 2`, which is what averaging the
//! face products back onto cells produces.

use crate::error::GridError;
use crate::grid::{CellField, FaceField, Grid};

/// Face gradient `D_d f` on interior faces, zero on boundary faces.
pub fn grad(f: &CellField) -> FaceField {
    let grid = *f.grid();
    let mut out = FaceField::zeros(grid);
    let n = grid.n();
    let inv_h = 1.0 / grid.h();
    let v = f.values();
    for axis in 0..grid.dim() {
        let s = grid.face_shape(axis);
        let stride = grid.stride(axis);
        let comp = out.component_mut(axis);
        for k in 0..s[2] {
            for j in 0..s[1] {
                for i in 0..s[0] {
                    let p = [i, j, k][axis];
                    if p == 0 || p == n {
                        continue;
                    }
                    let hi = grid.index(i, j, k);
                    comp[i + s[0] * (j + s[1] * k)] = (v[hi] - v[hi - stride]) * inv_h;
                }
            }
        }
    }
    out
}

/// Cell divergence `sum_d d_d F^d`.
pub fn div(flux: &FaceField) -> CellField {
    let grid = *flux.grid();
    let mut out = vec![0.0; grid.len()];
    div_into(&grid, |axis| flux.component(axis), &mut out);
    CellField::from_values(grid, out).expect("divergence of finite faces is finite")
}

fn div_into<'a>(grid: &Grid, comp: impl Fn(usize) -> &'a [f64], out: &mut [f64]) {
    let [nx, ny, nz] = grid.shape();
    let inv_h = 1.0 / grid.h();
    out.iter_mut().for_each(|o| *o = 0.0);
    for axis in 0..grid.dim() {
        let s = grid.face_shape(axis);
        let c = comp(axis);
        let step = [1, s[0], s[0] * s[1]][axis];
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let lo = i + s[0] * (j + s[1] * k);
                    out[grid.index(i, j, k)] += (c[lo + step] - c[lo]) * inv_h;
                }
            }
        }
    }
}

/// Standard five/seven point Neumann Laplacian `div(grad f)`.
pub fn laplacian(f: &CellField) -> CellField {
    div(&grad(f))
}

/// Face average `A_d f`; boundary faces take the adjacent cell value.
pub fn face_average(f: &CellField) -> FaceField {
    let grid = *f.grid();
    let mut out = FaceField::zeros(grid);
    let n = grid.n();
    let v = f.values();
    for axis in 0..grid.dim() {
        let s = grid.face_shape(axis);
        let stride = grid.stride(axis);
        let comp = out.component_mut(axis);
        for k in 0..s[2] {
            for j in 0..s[1] {
                for i in 0..s[0] {
                    let p = [i, j, k][axis];
                    let fi = i + s[0] * (j + s[1] * k);
                    comp[fi] = if p == 0 {
                        v[grid.index(i, j, k)]
                    } else if p == n {
                        let mut c = [i, j, k];
                        c[axis] -= 1;
                        v[grid.index(c[0], c[1], c[2])]
                    } else {
                        let hi = grid.index(i, j, k);
                        0.5 * (v[hi] + v[hi - stride])
                    };
                }
            }
        }
    }
    out
}

/// `div(D * G)` for a nonnegative face coefficient `D`.
pub fn div_coeff(coeff: &FaceField, flux: &FaceField) -> Result<CellField, GridError> {
    coeff.grid().check_same(flux.grid())?;
    check_nonnegative(coeff)?;
    Ok(div(&coeff.product(flux)))
}

pub(crate) fn check_nonnegative(coeff: &FaceField) -> Result<(), GridError> {
    for axis in 0..coeff.grid().dim() {
        if let Some((index, &value)) =
            coeff.component(axis).iter().enumerate().find(|(_, v)| !(**v >= 0.0))
        {
            return Err(GridError::NegativeCoefficient { axis, index, value });
        }
    }
    Ok(())
}

/// `out = div(D grad f)` without intermediate allocations; `D` is trusted.
pub(crate) fn variable_laplacian_into(coeff: &FaceField, f: &[f64], out: &mut [f64]) {
    let grid = *coeff.grid();
    let [nx, ny, nz] = grid.shape();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    out.iter_mut().for_each(|o| *o = 0.0);
    for axis in 0..grid.dim() {
        let s = grid.face_shape(axis);
        let step = [1, s[0], s[0] * s[1]][axis];
        let stride = grid.stride(axis);
        let d = coeff.component(axis);
        let n_axis = [nx, ny, nz][axis];
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let c = grid.index(i, j, k);
                    let p = [i, j, k][axis];
                    let lo = i + s[0] * (j + s[1] * k);
                    let mut acc = 0.0;
                    if p + 1 < n_axis {
                        acc += d[lo + step] * (f[c + stride] - f[c]);
                    }
                    if p > 0 {
                        acc -= d[lo] * (f[c] - f[c - stride]);
                    }
                    out[c] += acc * inv_h2;
                }
            }
        }
    }
}

/// Diagonal of `f -> div(D grad f)` (nonpositive).
pub(crate) fn variable_laplacian_diagonal(coeff: &FaceField) -> Vec<f64> {
    let grid = *coeff.grid();
    let [nx, ny, nz] = grid.shape();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut out = vec![0.0; grid.len()];
    for axis in 0..grid.dim() {
        let s = grid.face_shape(axis);
        let step = [1, s[0], s[0] * s[1]][axis];
        let d = coeff.component(axis);
        let n_axis = [nx, ny, nz][axis];
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let p = [i, j, k][axis];
                    let lo = i + s[0] * (j + s[1] * k);
                    let mut acc = 0.0;
                    if p + 1 < n_axis {
                        acc -= d[lo + step];
                    }
                    if p > 0 {
                        acc -= d[lo];
                    }
                    out[grid.index(i, j, k)] += acc * inv_h2;
                }
            }
        }
    }
    out
}

/// Discrete L2 inner product `h^dim sum f g`.
pub fn inner(f: &CellField, g: &CellField) -> Result<f64, GridError> {
    f.grid().check_same(g.grid())?;
    Ok(inner_unchecked(f.grid(), f.values(), g.values()))
}

pub(crate) fn inner_unchecked(grid: &Grid, f: &[f64], g: &[f64]) -> f64 {
    grid.cell_volume() * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
}

/// Face inner product `[F, G]`: interior faces weigh `h^dim`, boundary
/// faces `h^dim / 2`.
pub fn face_inner(f: &FaceField, g: &FaceField) -> Result<f64, GridError> {
    f.grid().check_same(g.grid())?;
    let grid = *f.grid();
    let n = grid.n();
    let mut total = 0.0;
    for axis in 0..grid.dim() {
        let s = grid.face_shape(axis);
        let (a, b) = (f.component(axis), g.component(axis));
        for k in 0..s[2] {
            for j in 0..s[1] {
                for i in 0..s[0] {
                    let p = [i, j, k][axis];
                    let fi = i + s[0] * (j + s[1] * k);
                    let w = if p == 0 || p == n { 0.5 } else { 1.0 };
                    total += w * a[fi] * b[fi];
                }
            }
        }
    }
    Ok(total * grid.cell_volume())
}

/// Norms of a cell field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub lp: f64,
    pub linf: f64,
    pub grad_l2: f64,
    pub mean: f64,
}

/// `||f||_2`, `||f||_p`, `||f||_inf`, `||grad_h f||_2` and the mean.
pub fn norms(f: &CellField, p: f64) -> Result<Norms, GridError> {
    Ok(Norms {
        l2: l2_norm(f),
        lp: lp_norm(f, p)?,
        linf: linf_norm(f),
        grad_l2: grad_l2_norm(f),
        mean: f.mean(),
    })
}

pub fn l2_norm(f: &CellField) -> f64 {
    inner_unchecked(f.grid(), f.values(), f.values()).sqrt()
}

pub fn lp_norm(f: &CellField, p: f64) -> Result<f64, GridError> {
    if !(p >= 1.0) {
        return Err(GridError::InvalidExponent(p));
    }
    let s: f64 = f.values().iter().map(|v| v.abs().powf(p)).sum();
    Ok((f.grid().cell_volume() * s).powf(1.0 / p))
}

pub fn linf_norm(f: &CellField) -> f64 {
    f.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn grad_l2_norm(f: &CellField) -> f64 {
    let g = grad(f);
    face_inner(&g, &g).expect("same grid").sqrt()
}
