//! Uniform cell-centered grids and the scalar/face fields that live on them.
//!
//! Cell values are stored x-fastest: the cell with zero-based indices
//! `(i, j, k)` lives at `i + n * (j + n * k)`. In two dimensions the third
//! axis is degenerate (`k = 0`, one layer). Cell centers sit at
//! `origin + (index + 1/2) * h` along every axis.
//!
//! Face components are stored per axis. The component normal to axis `d`
//! has `n + 1` entries along `d` and `n` along the other active axes, again
//! x-fastest. Face position `p` along `d` sits between cells `p - 1` and
//! `p`; positions `0` and `n` are the boundary faces.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::GridError;

/// A cubic (or square) box covered by `n^dim` equal cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    origin: [f64; 3],
    length: f64,
    h: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, origin: &[f64], length: f64) -> Result<Self, GridError> {
        if dim != 2 && dim != 3 {
            return Err(GridError::InvalidGrid(format!("dim must be 2 or 3, got {dim}")));
        }
        if n == 0 {
            return Err(GridError::InvalidGrid("cells per axis must be positive".into()));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(GridError::InvalidGrid(format!("domain length must be positive, got {length}")));
        }
        if origin.len() != dim || origin.iter().any(|a| !a.is_finite()) {
            return Err(GridError::InvalidGrid(format!(
                "origin must have {dim} finite coordinates, got {origin:?}"
            )));
        }
        let mut o = [0.0; 3];
        o[..dim].copy_from_slice(origin);
        Ok(Self { dim, n, origin: o, length, h: length / n as f64 })
    }

    /// `(0, 1)^2` with `n` cells per axis.
    pub fn unit_square(n: usize) -> Result<Self, GridError> {
        Self::new(2, n, &[0.0, 0.0], 1.0)
    }

    /// `(0, 1)^3` with `n` cells per axis.
    pub fn unit_cube(n: usize) -> Result<Self, GridError> {
        Self::new(3, n, &[0.0, 0.0, 0.0], 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dim]
    }

    /// Cell counts along x, y, z (z is 1 in two dimensions).
    pub fn shape(&self) -> [usize; 3] {
        [self.n, self.n, if self.dim == 3 { self.n } else { 1 }]
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Stride between neighbouring cells along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow(axis as u32)
    }

    /// `h^dim`, the weight of one cell in discrete inner products.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// `|Omega|`.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    /// Zero-based `(i, j, k)` of a linear cell index.
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    /// Physical coordinates of a cell center; unused axes are zero.
    pub fn cell_center(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let mut x = [0.0; 3];
        for d in 0..self.dim {
            x[d] = self.origin[d] + (c[d] as f64 + 0.5) * self.h;
        }
        x
    }

    /// Entry counts of the face component normal to `axis`.
    pub fn face_shape(&self, axis: usize) -> [usize; 3] {
        let mut s = self.shape();
        s[axis] += 1;
        s
    }

    pub fn face_len(&self, axis: usize) -> usize {
        self.face_shape(axis).iter().product()
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<(), GridError> {
        if self == other {
            Ok(())
        } else {
            Err(GridError::GridMismatch)
        }
    }
}

/// Scalar grid function on cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: Grid,
    values: Vec<f64>,
}

impl CellField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { index: idx, value: values[idx] });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.cell_center(idx))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Arithmetic mean, i.e. `h^dim / |Omega| * sum`.
    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &CellField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values }
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &CellField) {
        debug_assert_eq!(self.grid, x.grid);
        for (y, &xv) in self.values.iter_mut().zip(&x.values) {
            *y += a * xv;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    pub fn add_constant(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v += c);
    }

    /// Removes the mean so the field lies in the mean-zero subspace.
    pub fn project_mean_zero(&mut self) {
        let m = self.mean();
        self.add_constant(-m);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl Add for &CellField {
    type Output = CellField;
    fn add(self, rhs: &CellField) -> CellField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &CellField {
    type Output = CellField;
    fn sub(self, rhs: &CellField) -> CellField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &CellField {
    type Output = CellField;
    fn mul(self, rhs: f64) -> CellField {
        self.map(|a| a * rhs)
    }
}

impl Neg for &CellField {
    type Output = CellField;
    fn neg(self) -> CellField {
        self.map(|a| -a)
    }
}

/// Vector grid function on cell faces, one component per active axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    grid: Grid,
    components: Vec<Vec<f64>>,
}

impl FaceField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Every face, boundary faces included, set to `c`.
    pub fn constant(grid: Grid, c: f64) -> Self {
        let components = (0..grid.dim()).map(|d| vec![c; grid.face_len(d)]).collect();
        Self { grid, components }
    }

    pub fn from_components(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self, GridError> {
        if components.len() != grid.dim() {
            return Err(GridError::LengthMismatch { expected: grid.dim(), got: components.len() });
        }
        for (d, c) in components.iter().enumerate() {
            if c.len() != grid.face_len(d) {
                return Err(GridError::LengthMismatch { expected: grid.face_len(d), got: c.len() });
            }
        }
        Ok(Self { grid, components })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub fn component_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.components[axis]
    }

    /// Linear index of face `(i, j, k)` in the component normal to `axis`.
    pub fn face_index(&self, axis: usize, i: usize, j: usize, k: usize) -> usize {
        let s = self.grid.face_shape(axis);
        i + s[0] * (j + s[1] * k)
    }

    /// Sets every boundary entry to zero (homogeneous Neumann closure).
    pub fn close_boundary(&mut self) {
        let grid = self.grid;
        let n = grid.n();
        for axis in 0..grid.dim() {
            let s = grid.face_shape(axis);
            let comp = &mut self.components[axis];
            for k in 0..s[2] {
                for j in 0..s[1] {
                    for i in 0..s[0] {
                        let p = [i, j, k][axis];
                        if p == 0 || p == n {
                            comp[i + s[0] * (j + s[1] * k)] = 0.0;
                        }
                    }
                }
            }
        }
    }

    /// Pointwise product of two face fields.
    pub fn product(&self, other: &FaceField) -> FaceField {
        debug_assert_eq!(self.grid, other.grid);
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).collect())
            .collect();
        FaceField { grid: self.grid, components }
    }

    pub fn scaled(&self, a: f64) -> FaceField {
        let components = self.components.iter().map(|c| c.iter().map(|v| v * a).collect()).collect();
        FaceField { grid: self.grid, components }
    }

    pub fn min(&self) -> f64 {
        self.components.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    /// Mean over interior faces only.
    pub fn interior_mean(&self) -> f64 {
        let n = self.grid.n();
        let mut sum = 0.0;
        let mut count = 0usize;
        for axis in 0..self.grid.dim() {
            let s = self.grid.face_shape(axis);
            for k in 0..s[2] {
                for j in 0..s[1] {
                    for i in 0..s[0] {
                        let p = [i, j, k][axis];
                        if p != 0 && p != n {
                            sum += self.components[axis][i + s[0] * (j + s[1] * k)];
                            count += 1;
                        }
                    }
                }
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    pub fn is_boundary_closed(&self) -> bool {
        let mut closed = self.clone();
        closed.close_boundary();
        closed == *self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_roundtrip() {
        let g = Grid::unit_cube(4).unwrap();
        for idx in 0..g.len() {
            let [i, j, k] = g.coords(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
        assert_eq!(g.len(), 64);
        assert_eq!(g.cell_center(0), [0.125, 0.125, 0.125]);
    }

    #[test]
    fn two_dimensional_grid_degenerates_third_axis() {
        let g = Grid::unit_square(5).unwrap();
        assert_eq!(g.shape(), [5, 5, 1]);
        assert_eq!(g.len(), 25);
        assert_eq!(g.face_len(0), 30);
        assert_eq!(g.face_len(1), 30);
        assert!((g.cell_volume() - 0.04).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(1, 4, &[0.0], 1.0).is_err());
        assert!(Grid::new(2, 0, &[0.0, 0.0], 1.0).is_err());
        assert!(Grid::new(2, 4, &[0.0, 0.0], -1.0).is_err());
        assert!(Grid::new(2, 4, &[0.0], 1.0).is_err());
    }

    #[test]
    fn field_rejects_wrong_length_and_nan() {
        let g = Grid::unit_square(2).unwrap();
        assert!(CellField::from_values(g, vec![0.0; 3]).is_err());
        assert!(CellField::from_values(g, vec![0.0, 1.0, f64::NAN, 2.0]).is_err());
    }

    #[test]
    fn interior_mean_ignores_boundary() {
        let g = Grid::unit_square(3).unwrap();
        let mut f = FaceField::constant(g, 2.0);
        f.close_boundary();
        assert_eq!(f.interior_mean(), 2.0);
        assert!(f.is_boundary_closed());
    }
}
