use serde::{Deserialize, Serialize};

use super::{OpenSetMask, ProductGrid};
use crate::error::{Error, Result};
use crate::sum::sum;

/// A real function, constant on each finest cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridFunction {
    grid: ProductGrid,
    values: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionRepr {
    grid: ProductGrid,
    values: Vec<f64>,
}

impl<'de> Deserialize<'de> for GridFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = FunctionRepr::deserialize(d)?;
        GridFunction::new(repr.grid, repr.values).map_err(serde::de::Error::custom)
    }
}

impl GridFunction {
    pub fn new(grid: ProductGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::invalid(format!(
                "expected {} cell values, got {}",
                grid.cell_count(),
                values.len()
            )));
        }
        if let Some(c) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("value at cell {c} is not finite")));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: ProductGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: ProductGrid, c: f64) -> Self {
        let values = vec![c; grid.cell_count()];
        GridFunction { grid, values }
    }

    pub fn from_fn(grid: ProductGrid, f: impl FnMut(usize) -> f64) -> Self {
        let values = (0..grid.cell_count()).map(f).collect();
        GridFunction { grid, values }
    }

    /// Samples `f` at cell centers.
    pub fn sample(grid: ProductGrid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..grid.cell_count())
            .map(|c| f(&grid.cell_center(c)))
            .collect();
        GridFunction { grid, values }
    }

    pub fn indicator(mask: &OpenSetMask) -> Self {
        GridFunction::from_fn(mask.grid().clone(), |c| if mask.contains(c) { 1.0 } else { 0.0 })
    }

    pub fn grid(&self) -> &ProductGrid {
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

    #[inline]
    pub fn value(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    /// `∫ f`.
    pub fn integral(&self) -> f64 {
        sum(self.values.iter().copied()) * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.integral()
    }

    /// `‖f‖₂²`.
    pub fn l2_norm_sq(&self) -> f64 {
        sum(self.values.iter().map(|v| v * v)) * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        sum(self.values.iter().map(|v| v.abs())) * self.grid.cell_volume()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `⟨f, g⟩ = ∫ f g`.
    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(sum(self.values.iter().zip(&other.values).map(|(a, b)| a * b)) * self.grid.cell_volume())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        self.grid.ensure_same(&other.grid)?;
        Ok(GridFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> GridFunction {
        self.map(f64::abs)
    }

    /// `{x : f(x) != 0}` as a mask.
    pub fn support(&self) -> OpenSetMask {
        OpenSetMask::from_fn(self.grid.clone(), |c| self.values[c] != 0.0)
    }

    /// Restriction with the factor-`i` variable frozen at finest cell `local`.
    pub fn slice(&self, i: usize, local: usize) -> Result<GridFunction> {
        let reduced = self.grid.without(i)?;
        if local >= self.grid.factor_cells(i) {
            return Err(Error::invalid(format!("cell {local} out of range for factor {i}")));
        }
        let grid = &self.grid;
        let values = (0..reduced.cell_count())
            .map(|r| self.values[grid.insert_factor(r, i, local)])
            .collect();
        Ok(GridFunction {
            grid: reduced,
            values,
        })
    }

    /// Cyclic translate: `g(y) = f((y + shift) mod N)` per axis.
    pub fn roll(&self, shift: &[i64]) -> Result<GridFunction> {
        let sizes = self.grid.axis_sizes();
        if shift.len() != sizes.len() {
            return Err(Error::InvalidShift(format!(
                "expected {} per-axis offsets, got {}",
                sizes.len(),
                shift.len()
            )));
        }
        let grid = &self.grid;
        Ok(GridFunction::from_fn(grid.clone(), |c| {
            let coords: Vec<usize> = grid
                .cell_coords(c)
                .iter()
                .zip(shift)
                .zip(&sizes)
                .map(|((&y, &s), &n)| (y as i64 + s).rem_euclid(n as i64) as usize)
                .collect();
            self.values[grid.cell_from_coords(&coords)]
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_integrals() {
        let g = ProductGrid::new(vec![1], vec![1]).unwrap();
        let f = GridFunction::new(g.clone(), vec![1.0, 3.0]).unwrap();
        assert_eq!(f.integral(), 2.0);
        assert_eq!(f.l2_norm_sq(), 5.0);
        assert!(GridFunction::new(g.clone(), vec![1.0]).is_err());
        assert!(GridFunction::new(g, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn slice_freezes_factor() {
        let g = ProductGrid::new(vec![1, 1], vec![1, 2]).unwrap();
        let f = GridFunction::from_fn(g, |c| c as f64);
        assert_eq!(f.slice(0, 1).unwrap().values(), &[4.0, 5.0, 6.0, 7.0]);
        assert_eq!(f.slice(1, 2).unwrap().values(), &[2.0, 6.0]);
    }

    #[test]
    fn roll_is_cyclic() {
        let g = ProductGrid::new(vec![1], vec![2]).unwrap();
        let f = GridFunction::from_fn(g, |c| c as f64);
        assert_eq!(f.roll(&[1]).unwrap().values(), &[1.0, 2.0, 3.0, 0.0]);
        assert_eq!(f.roll(&[-1]).unwrap().values(), &[3.0, 0.0, 1.0, 2.0]);
        assert!(matches!(f.roll(&[1, 2]), Err(Error::InvalidShift(_))));
    }
}
