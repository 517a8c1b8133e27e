//! Cosine-transform diagonalization of the cell-centered Neumann Laplacian.
//!
//! The vectors `cos(k pi (i + 1/2) / N)`, `k = 0..N`, are eigenvectors of the
//! one-dimensional Neumann `Delta_h` with eigenvalue
//! `-(4 / h^2) sin^2(k pi / (2N))`; they are exactly the DCT-II basis. Tensor
//! products diagonalize the operator in 2D/3D, so any polynomial in
//! `Delta_h` is inverted by a forward DCT-II, a pointwise division and a
//! scaled DCT-III.

use std::fmt;
use std::sync::Arc;

use rustdct::{Dct2, Dct3, DctPlanner};

use crate::grid::Grid;

/// Separable DCT-II/III pair on a grid plus the Laplacian symbol table.
#[derive(Clone)]
pub struct CosineTransform {
    grid: Grid,
    dct2: Arc<dyn Dct2<f64>>,
    dct3: Arc<dyn Dct3<f64>>,
    /// Eigenvalues of `-Delta_h` in transform order (all >= 0, zero mode first).
    neg_laplacian_symbol: Vec<f64>,
}

impl fmt::Debug for CosineTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CosineTransform").field("grid", &self.grid).finish_non_exhaustive()
    }
}

impl CosineTransform {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n();
        let mut planner = DctPlanner::new();
        let dct2 = planner.plan_dct2(n);
        let dct3 = planner.plan_dct3(n);
        let h = grid.h();
        let axis_symbol: Vec<f64> = (0..n)
            .map(|k| {
                let s = (k as f64 * std::f64::consts::PI / (2.0 * n as f64)).sin();
                4.0 * s * s / (h * h)
            })
            .collect();
        let neg_laplacian_symbol = (0..grid.len())
            .map(|idx| {
                let c = grid.coords(idx);
                (0..grid.dim()).map(|d| axis_symbol[c[d]]).sum()
            })
            .collect();
        Self { grid, dct2, dct3, neg_laplacian_symbol }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Eigenvalues of `-Delta_h`, indexed like the transformed coefficients.
    pub fn neg_laplacian_symbol(&self) -> &[f64] {
        &self.neg_laplacian_symbol
    }

    /// Unnormalized DCT-II along every active axis, in place.
    pub fn forward(&self, data: &mut [f64]) {
        self.sweep(data, |line, scratch| self.dct2.process_dct2_with_scratch(line, scratch));
    }

    /// Exact inverse of [`Self::forward`], in place.
    pub fn inverse(&self, data: &mut [f64]) {
        self.sweep(data, |line, scratch| self.dct3.process_dct3_with_scratch(line, scratch));
        let scale = (2.0 / self.grid.n() as f64).powi(self.grid.dim() as i32);
        data.iter_mut().for_each(|v| *v *= scale);
    }

    fn sweep(&self, data: &mut [f64], transform: impl Fn(&mut [f64], &mut [f64])) {
        assert_eq!(data.len(), self.grid.len());
        let n = self.grid.n();
        let scratch_len = self.dct2.get_scratch_len().max(self.dct3.get_scratch_len());
        let mut scratch = vec![0.0; scratch_len];
        for row in data.chunks_exact_mut(n) {
            transform(row, &mut scratch);
        }
        let mut line = vec![0.0; n];
        for axis in 1..self.grid.dim() {
            let stride = self.grid.stride(axis);
            let block = stride * n;
            for chunk in data.chunks_exact_mut(block) {
                for offset in 0..stride {
                    for (m, l) in line.iter_mut().enumerate() {
                        *l = chunk[offset + m * stride];
                    }
                    transform(&mut line, &mut scratch);
                    for (m, l) in line.iter().enumerate() {
                        chunk[offset + m * stride] = *l;
                    }
                }
            }
        }
    }

    /// Applies `p(-Delta_h)^{-1}` for a symbol `p` given as a function of the
    /// eigenvalue of `-Delta_h`. The zero mode is mapped to zero when
    /// `p(0) == 0`.
    pub fn solve_symbol(&self, rhs: &[f64], out: &mut [f64], symbol: impl Fn(f64) -> f64) {
        out.copy_from_slice(rhs);
        self.forward(out);
        for (v, &lam) in out.iter_mut().zip(&self.neg_laplacian_symbol) {
            let p = symbol(lam);
            *v = if p == 0.0 { 0.0 } else { *v / p };
        }
        self.inverse(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellField;
    use crate::ops::laplacian;

    #[test]
    fn forward_inverse_roundtrip() {
        for grid in [Grid::unit_square(7).unwrap(), Grid::unit_cube(6).unwrap()] {
            let t = CosineTransform::new(grid);
            let orig: Vec<f64> = (0..grid.len()).map(|i| ((i * 37 % 11) as f64).sin()).collect();
            let mut d = orig.clone();
            t.forward(&mut d);
            t.inverse(&mut d);
            for (a, b) in d.iter().zip(&orig) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cosine_modes_are_laplacian_eigenvectors() {
        let grid = Grid::unit_square(8).unwrap();
        let t = CosineTransform::new(grid);
        let (kx, ky) = (3usize, 5usize);
        let pi = std::f64::consts::PI;
        let f = CellField::from_fn(grid, |x| (kx as f64 * pi * x[0]).cos() * (ky as f64 * pi * x[1]).cos());
        let lf = laplacian(&f);
        let lam = t.neg_laplacian_symbol()[grid.index(kx, ky, 0)];
        for (a, b) in lf.values().iter().zip(f.values()) {
            assert!((a + lam * b).abs() < 1e-10);
        }
    }
}
