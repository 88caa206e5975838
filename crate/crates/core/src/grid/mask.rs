use serde::{Deserialize, Serialize};

use super::{DyadicRectangle, ProductGrid};
use crate::error::{Error, Result};

/// A union of finest cells, standing in for an open set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpenSetMask {
    grid: ProductGrid,
    member: Vec<bool>,
    count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaskRepr {
    grid: ProductGrid,
    cells: Vec<usize>,
}

impl Serialize for OpenSetMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MaskRepr {
            grid: self.grid.clone(),
            cells: self.cells(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OpenSetMask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = MaskRepr::deserialize(d)?;
        OpenSetMask::from_cells(repr.grid, repr.cells).map_err(serde::de::Error::custom)
    }
}

impl OpenSetMask {
    pub fn empty(grid: ProductGrid) -> Self {
        let member = vec![false; grid.cell_count()];
        OpenSetMask {
            grid,
            member,
            count: 0,
        }
    }

    pub fn full(grid: ProductGrid) -> Self {
        let count = grid.cell_count();
        OpenSetMask {
            grid,
            member: vec![true; count],
            count,
        }
    }

    pub fn from_cells(grid: ProductGrid, cells: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = OpenSetMask::empty(grid);
        for c in cells {
            if c >= mask.member.len() {
                return Err(Error::invalid(format!(
                    "cell {c} out of range ({} cells)",
                    mask.member.len()
                )));
            }
            mask.insert(c);
        }
        Ok(mask)
    }

    pub fn from_fn(grid: ProductGrid, mut pred: impl FnMut(usize) -> bool) -> Self {
        let member: Vec<bool> = (0..grid.cell_count()).map(&mut pred).collect();
        let count = member.iter().filter(|&&b| b).count();
        OpenSetMask {
            grid,
            member,
            count,
        }
    }

    /// Mask of a dyadic rectangle's cells.
    pub fn from_rectangle(grid: ProductGrid, r: &DyadicRectangle) -> Result<Self> {
        r.validate(&grid)?;
        let cells = r.cells(&grid);
        OpenSetMask::from_cells(grid, cells)
    }

    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    #[inline]
    pub fn contains(&self, cell: usize) -> bool {
        self.member[cell]
    }

    pub fn insert(&mut self, cell: usize) -> bool {
        let fresh = !self.member[cell];
        if fresh {
            self.member[cell] = true;
            self.count += 1;
        }
        fresh
    }

    pub fn remove(&mut self, cell: usize) -> bool {
        let present = self.member[cell];
        if present {
            self.member[cell] = false;
            self.count -= 1;
        }
        present
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// `|Ω|`.
    pub fn measure(&self) -> f64 {
        self.count as f64 * self.grid.cell_volume()
    }

    /// Sorted cell indices.
    pub fn cells(&self) -> Vec<usize> {
        self.member
            .iter()
            .enumerate()
            .filter_map(|(c, &b)| b.then_some(c))
            .collect()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.member
    }

    pub fn is_subset(&self, other: &OpenSetMask) -> bool {
        self.grid == other.grid && self.member.iter().zip(&other.member).all(|(&a, &b)| !a || b)
    }

    pub fn union(&self, other: &OpenSetMask) -> Result<OpenSetMask> {
        self.grid.ensure_same(&other.grid)?;
        Ok(OpenSetMask::from_fn(self.grid.clone(), |c| {
            self.member[c] || other.member[c]
        }))
    }

    pub fn contains_rectangle(&self, r: &DyadicRectangle) -> bool {
        r.cells(&self.grid).iter().all(|&c| self.member[c])
    }

    /// The slice `{x' : (.., x_i, ..) ∈ Ω}` at the finest cell `local` of factor `i`.
    pub fn slice(&self, i: usize, local: usize) -> Result<OpenSetMask> {
        let reduced = self.grid.without(i)?;
        if local >= self.grid.factor_cells(i) {
            return Err(Error::invalid(format!("cell {local} out of range for factor {i}")));
        }
        let grid = &self.grid;
        Ok(OpenSetMask::from_fn(reduced, |r| {
            self.member[grid.insert_factor(r, i, local)]
        }))
    }
}

/// Free-function form of [`OpenSetMask::slice`].
pub fn slice_mask(omega: &OpenSetMask, i: usize, local: usize) -> Result<OpenSetMask> {
    omega.slice(i, local)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g22() -> ProductGrid {
        ProductGrid::new(vec![1, 1], vec![1, 1]).unwrap()
    }

    #[test]
    fn measure_and_membership() {
        let g = g22();
        let e = OpenSetMask::empty(g.clone());
        assert_eq!(e.measure(), 0.0);
        assert!(e.is_empty());
        let m = OpenSetMask::from_cells(g.clone(), [3, 0, 3]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.measure(), 0.5);
        assert_eq!(m.cells(), vec![0, 3]);
        assert!(OpenSetMask::from_cells(g, [4]).is_err());
    }

    #[test]
    fn slice_examples() {
        let g = g22();
        let full = OpenSetMask::full(g.clone());
        let reduced = g.without(0).unwrap();
        assert_eq!(full.slice(0, 1).unwrap(), OpenSetMask::full(reduced.clone()));
        assert_eq!(
            OpenSetMask::empty(g.clone()).slice(1, 0).unwrap(),
            OpenSetMask::empty(reduced.clone())
        );
        // diagonal: cells (0,0) and (1,1)
        let diag = OpenSetMask::from_cells(g.clone(), [0, 3]).unwrap();
        assert_eq!(diag.slice(0, 0).unwrap().cells(), vec![0]);
        assert_eq!(diag.slice(0, 1).unwrap().cells(), vec![1]);
        assert_eq!(slice_mask(&diag, 1, 1).unwrap().cells(), vec![1]);
        assert!(diag.slice(2, 0).is_err());
        let one = ProductGrid::new(vec![1], vec![2]).unwrap();
        assert!(matches!(
            OpenSetMask::full(one).slice(0, 0),
            Err(Error::NeedsMultiparameter(1))
        ));
    }

    #[test]
    fn json_is_sorted_cells() {
        let m = OpenSetMask::from_cells(g22(), [2, 1]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"grid":{"factor_dims":[1,1],"depths":[1,1]},"cells":[1,2]}"#);
        let back: OpenSetMask = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
