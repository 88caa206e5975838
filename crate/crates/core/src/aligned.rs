//! Grid-aligned rectangles (products of per-factor cubes of any integer cell
//! side, at any cell corner) and summed-area tables over the grid axes.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ProductGrid;

/// Which rectangles a sup over "rectangles" ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RectClass {
    /// Products of dyadic cubes, levels `0..=J_i`.
    Dyadic,
    /// Products of cell-aligned cubes of any side, fully inside the domain.
    Aligned,
}

impl std::str::FromStr for RectClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dyadic" => Ok(RectClass::Dyadic),
            "aligned" => Ok(RectClass::Aligned),
            _ => Err(Error::invalid(format!("unknown rectangle class {s:?}"))),
        }
    }
}

/// A product of cubes in cell units: `start` per axis, `side` per factor.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignedRectangle {
    pub start: Vec<usize>,
    pub side: Vec<usize>,
}

impl AlignedRectangle {
    /// Side length in cells along each axis.
    pub fn lengths(&self, grid: &ProductGrid) -> Vec<usize> {
        grid.axis_factors().iter().map(|&i| self.side[i]).collect()
    }

    pub fn cell_count(&self, grid: &ProductGrid) -> usize {
        self.lengths(grid).iter().product()
    }

    pub fn measure(&self, grid: &ProductGrid) -> f64 {
        self.cell_count(grid) as f64 * grid.cell_volume()
    }

    pub fn validate(&self, grid: &ProductGrid) -> Result<()> {
        let sizes = grid.axis_sizes();
        if self.side.len() != grid.d() || self.start.len() != sizes.len() {
            return Err(Error::invalid("aligned rectangle does not match grid shape"));
        }
        let lens = self.lengths(grid);
        for a in 0..sizes.len() {
            if lens[a] == 0 || self.start[a] + lens[a] > sizes[a] {
                return Err(Error::invalid(format!("aligned rectangle leaves the domain on axis {a}")));
            }
        }
        Ok(())
    }

    pub fn contains_cell(&self, grid: &ProductGrid, cell: usize) -> bool {
        let lens = self.lengths(grid);
        grid.cell_coords(cell)
            .iter()
            .zip(&self.start)
            .zip(&lens)
            .all(|((&c, &s), &l)| c >= s && c < s + l)
    }

    /// Cells in canonical order.
    pub fn cells(&self, grid: &ProductGrid) -> Vec<usize> {
        let lens = self.lengths(grid);
        let mut out = Vec::with_capacity(lens.iter().product());
        let mut off = vec![0usize; lens.len()];
        let coords = |off: &[usize]| -> Vec<usize> {
            self.start.iter().zip(off).map(|(s, o)| s + o).collect()
        };
        loop {
            out.push(grid.cell_from_coords(&coords(&off)));
            let mut a = lens.len();
            loop {
                if a == 0 {
                    return out;
                }
                a -= 1;
                off[a] += 1;
                if off[a] < lens[a] {
                    break;
                }
                off[a] = 0;
            }
        }
    }
}

/// The cubes of factor `i` in a class, as `(start coords, side)` in cell units.
pub fn factor_cubes(grid: &ProductGrid, i: usize, class: RectClass) -> Vec<(Vec<usize>, usize)> {
    let n = grid.factor_dim(i);
    let size = 1usize << grid.depth(i);
    let mut out = Vec::new();
    let sides: Vec<usize> = match class {
        RectClass::Dyadic => (0..=grid.depth(i)).map(|j| size >> j).collect(),
        RectClass::Aligned => (1..=size).rev().collect(),
    };
    for side in sides {
        let step = if class == RectClass::Dyadic { side } else { 1 };
        let per_axis = (size - side) / step + 1;
        let total = per_axis.pow(n as u32);
        for k in 0..total {
            let mut rest = k;
            let mut start = vec![0usize; n];
            for a in (0..n).rev() {
                start[a] = (rest % per_axis) * step;
                rest /= per_axis;
            }
            out.push((start, side));
        }
    }
    out
}

/// Every rectangle of the class, factor 0 varying slowest.
pub fn all_rectangles(grid: &ProductGrid, class: RectClass) -> Vec<AlignedRectangle> {
    let lists: Vec<_> = (0..grid.d()).map(|i| factor_cubes(grid, i, class)).collect();
    let mut out = vec![AlignedRectangle {
        start: Vec::new(),
        side: Vec::new(),
    }];
    for list in &lists {
        let mut next = Vec::with_capacity(out.len() * list.len());
        for r in &out {
            for (start, side) in list {
                let mut s = r.start.clone();
                s.extend_from_slice(start);
                let mut sd = r.side.clone();
                sd.push(*side);
                next.push(AlignedRectangle { start: s, side: sd });
            }
        }
        out = next;
    }
    out
}

/// Number of rectangles in a class.
pub fn rectangle_count(grid: &ProductGrid, class: RectClass) -> usize {
    (0..grid.d())
        .map(|i| {
            let size = 1usize << grid.depth(i);
            let n = grid.factor_dim(i) as u32;
            match class {
                RectClass::Dyadic => (0..=grid.depth(i)).map(|j| 1usize << (j * n as usize)).sum::<usize>(),
                RectClass::Aligned => (1..=size).map(|s| (size - s + 1).pow(n)).sum(),
            }
        })
        .product()
}

/// An `n`-axis summed-area table: `box_sum` costs `2^n` lookups.
pub(crate) struct Prefix<T> {
    dims: Vec<usize>,
    strides: Vec<usize>,
    data: Vec<T>,
}

impl<T> Prefix<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T>,
{
    pub fn new(grid: &ProductGrid, values: &[T]) -> Self {
        let sizes = grid.axis_sizes();
        let dims: Vec<usize> = sizes.iter().map(|s| s + 1).collect();
        let mut strides = vec![1usize; dims.len()];
        for a in (0..dims.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        let total: usize = dims.iter().product();
        let mut data = vec![T::default(); total];
        // scatter values at offset +1 on every axis
        let mut coords = vec![0usize; sizes.len()];
        for v in values {
            let idx: usize = coords.iter().zip(&strides).map(|(c, s)| (c + 1) * s).sum();
            data[idx] = *v;
            for a in (0..sizes.len()).rev() {
                coords[a] += 1;
                if coords[a] < sizes[a] {
                    break;
                }
                coords[a] = 0;
            }
        }
        for a in 0..dims.len() {
            let s = strides[a];
            for idx in 0..total {
                if (idx / s) % dims[a] > 0 {
                    data[idx] = data[idx] + data[idx - s];
                }
            }
        }
        Prefix {
            dims,
            strides,
            data,
        }
    }

    /// Sum over the box `[start, start + len)`.
    pub fn box_sum(&self, start: &[usize], len: &[usize]) -> T {
        let n = self.dims.len();
        let mut plus = T::default();
        let mut minus = T::default();
        for corner in 0..(1usize << n) {
            let mut idx = 0;
            let mut odd = false;
            for a in 0..n {
                let c = if corner >> a & 1 == 1 {
                    odd = !odd;
                    start[a]
                } else {
                    start[a] + len[a]
                };
                idx += c * self.strides[a];
            }
            if odd {
                minus = minus + self.data[idx];
            } else {
                plus = plus + self.data[idx];
            }
        }
        plus - minus
    }
}
