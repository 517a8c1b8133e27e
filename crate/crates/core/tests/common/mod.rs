//! Dense reference implementations assembled straight from the stencils.
#![allow(dead_code, clippy::needless_range_loop)]

use pks_core::{CellField, FaceField, Grid};

pub type Dense = Vec<Vec<f64>>;

pub fn identity(n: usize) -> Dense {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Neighbor pairs `(cell, neighbor, axis, face index)` over interior faces.
fn interior_faces(grid: &Grid) -> Vec<(usize, usize, usize, usize)> {
    let n = grid.n();
    let mut out = Vec::new();
    for idx in 0..grid.len() {
        let c = grid.coords(idx);
        for axis in 0..grid.dim() {
            if c[axis] + 1 < n {
                let mut nb = c;
                nb[axis] += 1;
                let s = grid.face_shape(axis);
                let mut f = c;
                f[axis] += 1;
                let face = f[0] + s[0] * (f[1] + s[1] * f[2]);
                out.push((idx, grid.index(nb[0], nb[1], nb[2]), axis, face));
            }
        }
    }
    out
}

/// Matrix of `f -> div(D grad f)` with homogeneous Neumann closure.
pub fn variable_laplacian(grid: &Grid, coeff: &FaceField) -> Dense {
    laplacian_with(grid, |_, _, axis, face| coeff.component(axis)[face])
}

/// Same, with the face coefficient given as a function of the two adjacent
/// cells, the axis and the face index.
pub fn laplacian_with(grid: &Grid, coeff: impl Fn(usize, usize, usize, usize) -> f64) -> Dense {
    let m = grid.len();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut a = vec![vec![0.0; m]; m];
    for (i, j, axis, face) in interior_faces(grid) {
        let d = coeff(i, j, axis, face) * inv_h2;
        a[i][i] -= d;
        a[j][j] -= d;
        a[i][j] += d;
        a[j][i] += d;
    }
    a
}

pub fn laplacian(grid: &Grid) -> Dense {
    variable_laplacian(grid, &FaceField::constant(*grid, 1.0))
}

pub fn matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn lin_comb(a: f64, x: &Dense, b: f64, y: &Dense) -> Dense {
    x.iter().zip(y).map(|(r, s)| r.iter().zip(s).map(|(p, q)| a * p + b * q).collect()).collect()
}

/// Gaussian elimination with partial pivoting.
pub fn solve(a: &Dense, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Dense = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| m[p][col].abs().total_cmp(&m[q][col].abs())).unwrap();
        m.swap(col, piv);
        x.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                x[row] -= f * x[col];
            }
        }
    }
    for row in (0..n).rev() {
        let mut s = x[row];
        for k in row + 1..n {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    x
}

/// Mean-zero solution of the singular Neumann system `a x = b` (mean-zero
/// `b`), via the bordered matrix `a + 1 1^T / n`.
pub fn solve_neumann(a: &Dense, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let bordered: Dense = a.iter().map(|row| row.iter().map(|v| v + 1.0 / n as f64).collect()).collect();
    let mut x = solve(&bordered, b);
    let mean = x.iter().sum::<f64>() / n as f64;
    x.iter_mut().for_each(|v| *v -= mean);
    x
}

pub fn norm(grid: &Grid, v: &[f64]) -> f64 {
    (grid.cell_volume() * v.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

pub fn diff_norm(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(grid, &d)
}

/// Deterministic smooth-ish random field in `[lo, hi]`.
pub fn random_field(grid: Grid, seed: u64, lo: f64, hi: f64) -> CellField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    CellField::from_fn(grid, |_| rng.random_range(lo..hi))
}

pub fn mean_zero_field(grid: Grid, seed: u64) -> CellField {
    let mut f = random_field(grid, seed, -1.0, 1.0);
    f.project_mean_zero();
    f
}
