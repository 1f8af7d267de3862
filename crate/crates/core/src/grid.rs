//! Uniform node-centred Cartesian grid on the reference box `[-L, L]^d`
//! and the scalar/vector fields that live on it.

use crate::error::{Error, Result};

/// Uniform grid of the reference box. `half_extent` is the half-width `L = 2R`
/// of the box, so every admissible datum is supported in `|x| < L / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n_cells: usize,
    half_extent: f64,
    h: f64,
}

impl Grid {
    pub const MIN_CELLS: usize = 8;

    pub fn new(dim: usize, n_cells: usize, half_extent: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Config(format!("grid.dim must be 2 or 3, got {dim}")));
        }
        if n_cells < Self::MIN_CELLS {
            return Err(Error::Config(format!("grid.n_cells must be >= {}, got {n_cells}", Self::MIN_CELLS)));
        }
        if !(half_extent > 0.0 && half_extent.is_finite()) {
            return Err(Error::Config(format!("grid.half_extent must be positive, got {half_extent}")));
        }
        Ok(Grid { dim, n_cells, half_extent, h: 2.0 * half_extent / n_cells as f64 })
    }

    /// Grid with spacing `h` on the box of half-width `half_extent`.
    pub fn with_spacing(dim: usize, half_extent: f64, h: f64) -> Result<Self> {
        let n = (2.0 * half_extent / h).round();
        if (n * h - 2.0 * half_extent).abs() > 1e-9 * half_extent {
            return Err(Error::Config(format!("spacing {h} does not divide box width {}", 2.0 * half_extent)));
        }
        Grid::new(dim, n as usize, half_extent)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }
    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }
    /// Radius `R` of the ball that must contain all data.
    pub fn support_radius(&self) -> f64 {
        0.5 * self.half_extent
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    /// Nodes per axis.
    pub fn np(&self) -> usize {
        self.n_cells + 1
    }
    pub fn len(&self) -> usize {
        self.np().pow(self.dim as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    /// Volume of one node's control cell.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }
    /// Linear index stride along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.np().pow(axis as u32)
    }

    pub fn index(&self, ijk: [usize; 3]) -> usize {
        let np = self.np();
        match self.dim {
            2 => ijk[0] + np * ijk[1],
            _ => ijk[0] + np * (ijk[1] + np * ijk[2]),
        }
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let np = self.np();
        match self.dim {
            2 => [idx % np, idx / np, 0],
            _ => [idx % np, (idx / np) % np, idx / (np * np)],
        }
    }

    pub fn coord_1d(&self, i: usize) -> f64 {
        -self.half_extent + i as f64 * self.h
    }

    /// Physical coordinates of node `idx`; unused trailing entries are zero.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let mut x = [0.0; 3];
        for (a, xa) in x.iter_mut().enumerate().take(self.dim) {
            *xa = self.coord_1d(m[a]);
        }
        x
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        let last = self.n_cells;
        m.iter().take(self.dim).any(|&i| i == 0 || i == last)
    }

    /// Neighbour of `idx` one node along `axis` in direction `dir` (+1/-1), if inside.
    pub fn neighbor(&self, idx: usize, axis: usize, dir: i32) -> Option<usize> {
        let m = self.multi_index(idx);
        let s = self.stride(axis);
        if dir > 0 {
            (m[axis] < self.n_cells).then(|| idx + s)
        } else {
            (m[axis] > 0).then(|| idx - s)
        }
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Scalar nodal field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        ScalarField { grid, data: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        ScalarField { grid, data }
    }

    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField { grid, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { grid: self.grid, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Riemann sum `Σ f h^d`.
    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn integral_weighted(&self, weight: &ScalarField) -> f64 {
        self.data.iter().zip(&weight.data).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for ScalarField {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Nodal vector field stored component-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    comps: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        VectorField { grid, comps: vec![vec![0.0; grid.len()]; grid.dim()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut v = Self::zeros(grid);
        for i in 0..grid.len() {
            let val = f(grid.coords(i));
            for a in 0..grid.dim() {
                v.comps[a][i] = val[a];
            }
        }
        v
    }

    pub fn from_components(grid: Grid, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != grid.dim() || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch);
        }
        Ok(VectorField { grid, comps })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn comp(&self, axis: usize) -> &[f64] {
        &self.comps[axis]
    }
    pub fn comp_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.comps[axis]
    }

    pub fn at(&self, idx: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (a, c) in self.comps.iter().enumerate() {
            out[a] = c[idx];
        }
        out
    }

    pub fn set(&mut self, idx: usize, val: [f64; 3]) {
        for (a, c) in self.comps.iter_mut().enumerate() {
            c[idx] = val[a];
        }
    }

    pub fn norm_at(&self, idx: usize) -> f64 {
        self.comps.iter().map(|c| c[idx] * c[idx]).sum::<f64>().sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.grid.len()).map(|i| self.norm_at(i)).fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.comps.iter().flat_map(|c| c.iter()).map(|v| v * v).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flat_map(|c| c.iter()).all(|v| v.is_finite())
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        let comps =
            self.comps.iter().zip(&other.comps).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
        VectorField { grid: self.grid, comps }
    }
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_counts() {
        let g = Grid::new(2, 64, 1.0).unwrap();
        assert_eq!(g.h(), 1.0 / 32.0);
        assert_eq!(g.len(), 65 * 65);
        assert_eq!(g.support_radius(), 0.5);
        let g3 = Grid::with_spacing(3, 0.5, 1.0 / 32.0).unwrap();
        assert_eq!(g3.n_cells(), 32);
    }

    #[test]
    fn rejects_small_or_bad_grids() {
        assert!(Grid::new(2, 4, 1.0).is_err());
        assert!(Grid::new(1, 16, 1.0).is_err());
        assert!(Grid::new(2, 16, 0.0).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        for idx in [0, 5, 81, g.len() - 1] {
            assert_eq!(g.index(g.multi_index(idx)), idx);
        }
        assert!(g.is_boundary(0));
        assert!(!g.is_boundary(g.index([4, 4, 4])));
        assert_eq!(g.coords(g.index([4, 4, 4])), [0.0, 0.0, 0.0]);
    }
}
