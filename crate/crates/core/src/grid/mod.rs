//! Product dyadic geometry on the unit cube `[0,1)^{n_1} x ... x [0,1)^{n_d}`.
//!
//! Cells are addressed by a single index in canonical order: mixed radix over
//! the factors (factor 0 most significant), and within a factor mixed radix
//! over its coordinates (coordinate 0 most significant). Equivalently, a
//! row-major index over the `n = n_1 + ... + n_d` axes, where the axes of
//! factor `i` each have `2^{J_i}` cells.

mod function;
mod mask;
mod rect;

pub use function::GridFunction;
pub use mask::{slice_mask, OpenSetMask};
pub use rect::{
    eligible_rectangle_count, enumerate_rectangles, enumerate_rectangles_capped, rectangles_in,
    slice_family, DyadicCube, DyadicRectangle, RectangleFamily, DEFAULT_RECTANGLE_CAP,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::pow2;

/// Largest supported `log2` of the finest-cell count.
pub const MAX_LOG2_CELLS: usize = 26;

/// The JSON grid descriptor `{"factor_dims":[...], "depths":[...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDescriptor {
    pub factor_dims: Vec<usize>,
    pub depths: Vec<usize>,
}

/// A d-parameter product of unit cubes, each refined dyadically to a fixed depth.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GridDescriptor", into = "GridDescriptor")]
pub struct ProductGrid {
    factor_dims: Vec<usize>,
    depths: Vec<usize>,
    factor_cells: Vec<usize>,
    strides: Vec<usize>,
}

impl TryFrom<GridDescriptor> for ProductGrid {
    type Error = Error;

    fn try_from(desc: GridDescriptor) -> Result<Self> {
        ProductGrid::new(desc.factor_dims, desc.depths)
    }
}

impl From<ProductGrid> for GridDescriptor {
    fn from(grid: ProductGrid) -> Self {
        GridDescriptor {
            factor_dims: grid.factor_dims,
            depths: grid.depths,
        }
    }
}

impl ProductGrid {
    pub fn new(factor_dims: Vec<usize>, depths: Vec<usize>) -> Result<Self> {
        if factor_dims.is_empty() {
            return Err(Error::InvalidGrid("at least one factor is required".into()));
        }
        if factor_dims.len() != depths.len() {
            return Err(Error::InvalidGrid(format!(
                "factor_dims has {} entries but depths has {}",
                factor_dims.len(),
                depths.len()
            )));
        }
        if let Some(i) = factor_dims.iter().position(|&n| n == 0) {
            return Err(Error::InvalidGrid(format!("factor {i} has dimension 0")));
        }
        if let Some(i) = depths.iter().position(|&j| j == 0) {
            return Err(Error::InvalidGrid(format!("factor {i} has depth 0")));
        }
        let log2: usize = factor_dims.iter().zip(&depths).map(|(n, j)| n * j).sum();
        if log2 > MAX_LOG2_CELLS {
            return Err(Error::ResourceLimit {
                what: "finest-cell count (log2)",
                count: log2,
                cap: MAX_LOG2_CELLS,
                hint: "",
            });
        }
        let factor_cells: Vec<usize> = factor_dims
            .iter()
            .zip(&depths)
            .map(|(n, j)| 1usize << (n * j))
            .collect();
        let mut strides = vec![1usize; factor_dims.len()];
        for i in (0..factor_dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * factor_cells[i + 1];
        }
        Ok(ProductGrid {
            factor_dims,
            depths,
            factor_cells,
            strides,
        })
    }

    /// `d` identical factors of dimension `n`, all refined to `depth`.
    pub fn uniform(d: usize, n: usize, depth: usize) -> Result<Self> {
        Self::new(vec![n; d], vec![depth; d])
    }

    pub fn d(&self) -> usize {
        self.factor_dims.len()
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn depths(&self) -> &[usize] {
        &self.depths
    }

    pub fn factor_dim(&self, i: usize) -> usize {
        self.factor_dims[i]
    }

    pub fn depth(&self, i: usize) -> usize {
        self.depths[i]
    }

    /// `n = n_1 + ... + n_d`.
    pub fn total_dim(&self) -> usize {
        self.factor_dims.iter().sum()
    }

    pub fn factor_cells(&self, i: usize) -> usize {
        self.factor_cells[i]
    }

    pub fn cell_count(&self) -> usize {
        self.factor_cells.iter().product()
    }

    pub fn log2_cell_count(&self) -> usize {
        self.factor_dims
            .iter()
            .zip(&self.depths)
            .map(|(n, j)| n * j)
            .sum()
    }

    pub fn cell_volume(&self) -> f64 {
        pow2(-(self.log2_cell_count() as i32))
    }

    /// Volume of one finest cell of factor `i` alone.
    pub fn factor_cell_volume(&self, i: usize) -> f64 {
        pow2(-((self.factor_dims[i] * self.depths[i]) as i32))
    }

    /// Side length of a finest cell in factor `i`.
    pub fn cell_side(&self, i: usize) -> f64 {
        pow2(-(self.depths[i] as i32))
    }

    /// Cells per axis, in canonical axis order (length `n`).
    pub fn axis_sizes(&self) -> Vec<usize> {
        self.factor_dims
            .iter()
            .zip(&self.depths)
            .flat_map(|(&n, &j)| std::iter::repeat(1usize << j).take(n))
            .collect()
    }

    /// Factor owning each axis (length `n`).
    pub fn axis_factors(&self) -> Vec<usize> {
        self.factor_dims
            .iter()
            .enumerate()
            .flat_map(|(i, &n)| std::iter::repeat(i).take(n))
            .collect()
    }

    pub fn stride(&self, i: usize) -> usize {
        self.strides[i]
    }

    pub(crate) fn check_factor(&self, i: usize) -> Result<()> {
        if i >= self.d() {
            Err(Error::FactorIndex {
                index: i,
                d: self.d(),
            })
        } else {
            Ok(())
        }
    }

    /// Local (within-factor) cell index of factor `i` for a global cell.
    #[inline]
    pub fn factor_local(&self, cell: usize, i: usize) -> usize {
        (cell / self.strides[i]) % self.factor_cells[i]
    }

    pub fn split(&self, cell: usize) -> Vec<usize> {
        (0..self.d()).map(|i| self.factor_local(cell, i)).collect()
    }

    pub fn join(&self, locals: &[usize]) -> usize {
        locals
            .iter()
            .zip(&self.strides)
            .map(|(l, s)| l * s)
            .sum()
    }

    /// Coordinates of a local cell of factor `i`, each in `[0, 2^{J_i})`.
    pub fn local_coords(&self, i: usize, local: usize) -> Vec<usize> {
        let j = self.depths[i];
        let n = self.factor_dims[i];
        let mask = (1usize << j) - 1;
        (0..n).map(|k| (local >> (j * (n - 1 - k))) & mask).collect()
    }

    pub fn local_from_coords(&self, i: usize, coords: &[usize]) -> usize {
        let j = self.depths[i];
        coords.iter().fold(0, |acc, &c| (acc << j) | c)
    }

    /// Per-axis coordinates of a global cell (length `n`).
    pub fn cell_coords(&self, cell: usize) -> Vec<usize> {
        (0..self.d())
            .flat_map(|i| self.local_coords(i, self.factor_local(cell, i)))
            .collect()
    }

    pub fn cell_from_coords(&self, coords: &[usize]) -> usize {
        let sizes = self.axis_sizes();
        coords
            .iter()
            .zip(&sizes)
            .fold(0, |acc, (&c, &s)| acc * s + c)
    }

    /// Center of a finest cell in `[0,1)^n`.
    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        let factors = self.axis_factors();
        self.cell_coords(cell)
            .into_iter()
            .zip(factors)
            .map(|(c, i)| (c as f64 + 0.5) * self.cell_side(i))
            .collect()
    }

    /// Finest cell containing a point of `[0,1)^n`; coordinates are clamped into the domain.
    pub fn cell_at(&self, point: &[f64]) -> Result<usize> {
        let sizes = self.axis_sizes();
        if point.len() != sizes.len() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, grid has {} axes",
                point.len(),
                sizes.len()
            )));
        }
        let coords: Vec<usize> = point
            .iter()
            .zip(&sizes)
            .map(|(&x, &s)| ((x * s as f64).floor().max(0.0) as usize).min(s - 1))
            .collect();
        Ok(self.cell_from_coords(&coords))
    }

    /// The `(d-1)`-parameter grid with factor `i` removed.
    pub fn without(&self, i: usize) -> Result<ProductGrid> {
        self.check_factor(i)?;
        if self.d() < 2 {
            return Err(Error::NeedsMultiparameter(self.d()));
        }
        let mut dims = self.factor_dims.clone();
        let mut depths = self.depths.clone();
        dims.remove(i);
        depths.remove(i);
        ProductGrid::new(dims, depths)
    }

    /// Maps a full-grid cell to the reduced grid with factor `i` removed.
    #[inline]
    pub fn drop_factor(&self, cell: usize, i: usize) -> usize {
        let lo = cell % self.strides[i];
        let hi = cell / (self.strides[i] * self.factor_cells[i]);
        hi * self.strides[i] + lo
    }

    /// Inverse of [`ProductGrid::drop_factor`]: reinserts factor `i` at `local`.
    #[inline]
    pub fn insert_factor(&self, reduced: usize, i: usize, local: usize) -> usize {
        let lo = reduced % self.strides[i];
        let hi = reduced / self.strides[i];
        (hi * self.factor_cells[i] + local) * self.strides[i] + lo
    }

    pub(crate) fn ensure_same(&self, other: &ProductGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{:?}/{:?} vs {:?}/{:?}",
                self.factor_dims, self.depths, other.factor_dims, other.depths
            )))
        }
    }
}
