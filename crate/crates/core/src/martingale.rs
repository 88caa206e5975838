//! Expectation and difference operators, the tensor-product Haar decomposition,
//! and its inverse.
//!
//! Levels run from `0` (the unit cube) to `J_i` (finest cells). For a cube `Q`
//! at level `j`, `Δ_Q f = (E_{j+1} - E_j) f · χ_Q`, and `Δ_R` is the tensor
//! product of the per-factor operators. On the unit cube each factor splits as
//! `I = E_0 + Σ_j Δ_j`, so the product over factors produces, besides the pure
//! `Δ_R` terms, one hybrid component for each proper subset `T` of refined
//! factors: `⊗_{i∈T} (I - E_0) ⊗_{i∉T} E_0 f`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    eligible_rectangle_count, DyadicCube, DyadicRectangle, GridFunction, ProductGrid,
    DEFAULT_RECTANGLE_CAP,
};
use crate::sum::{sum, Neumaier};

/// Blocks whose largest entry falls below this are dropped from a [`Decomposition`].
pub const PRUNE_THRESHOLD: f64 = 1e-14;

/// `Δ_R f`, stored as one value per combination of immediate children of the cubes of `R`.
///
/// The block is row-major over factors; within factor `i` the `2^{n_i}` children
/// are ordered coordinate-major (the child's bit along coordinate 0 is most significant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HaarCoefficient {
    pub rectangle: DyadicRectangle,
    pub block: Vec<f64>,
}

impl HaarCoefficient {
    pub fn block_shape(&self) -> Vec<usize> {
        self.rectangle.cubes.iter().map(|q| 1usize << q.dim()).collect()
    }

    /// Volume of one child product.
    pub fn child_volume(&self) -> f64 {
        self.rectangle.measure() / self.block.len() as f64
    }

    /// `‖Δ_R f‖₂²`.
    pub fn energy(&self) -> f64 {
        sum(self.block.iter().map(|b| b * b)) * self.child_volume()
    }

    /// Value of `Δ_R f` at a finest cell (zero off `R`).
    pub fn value_at(&self, grid: &ProductGrid, cell: usize) -> f64 {
        if !self.rectangle.contains_cell(grid, cell) {
            return 0.0;
        }
        self.block[child_index(grid, &self.rectangle, cell)]
    }

    /// `Δ_R f` as a function on the full grid.
    pub fn to_function(&self, grid: &ProductGrid) -> GridFunction {
        let mut values = vec![0.0; grid.cell_count()];
        for c in self.rectangle.cells(grid) {
            values[c] = self.block[child_index(grid, &self.rectangle, c)];
        }
        GridFunction::new(grid.clone(), values).expect("length matches grid")
    }

    fn validate(&self, grid: &ProductGrid) -> Result<()> {
        self.rectangle.validate_eligible(grid)?;
        let expected = 1usize << grid.total_dim();
        if self.block.len() != expected {
            return Err(Error::invalid(format!(
                "block for {} has {} entries, expected {expected}",
                self.rectangle,
                self.block.len()
            )));
        }
        Ok(())
    }
}

/// Index of the child product of `r` containing `cell` (which must lie in `r`).
fn child_index(grid: &ProductGrid, r: &DyadicRectangle, cell: usize) -> usize {
    let mut idx = 0usize;
    for q in &r.cubes {
        let i = q.factor;
        let shift = grid.depth(i) - q.level - 1;
        for c in grid.local_coords(i, grid.factor_local(cell, i)) {
            idx = (idx << 1) | ((c >> shift) & 1);
        }
    }
    idx
}

/// Subtracts the mean along every axis of a row-major block: the tensor
/// product of `(E_child - E_parent)` over the factors.
fn center_block(block: &mut [f64], shape: &[usize]) {
    let total = block.len();
    let mut stride = total;
    for &len in shape {
        stride /= len;
        let outer = total / (len * stride);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * len * stride + inner;
                let mean = (0..len).map(|k| block[base + k * stride]).sum::<f64>() / len as f64;
                for k in 0..len {
                    block[base + k * stride] -= mean;
                }
            }
        }
    }
}

/// Level-`j` cube index of a local cell of factor `i`.
fn cube_index(grid: &ProductGrid, i: usize, local: usize, level: usize) -> usize {
    let shift = grid.depth(i) - level;
    grid.local_coords(i, local)
        .iter()
        .fold(0, |acc, &c| (acc << level) | (c >> shift))
}

/// `E_j` along factor `i`: averages over level-`j` cubes of factor `i`.
pub fn expectation(f: &GridFunction, i: usize, level: usize) -> Result<GridFunction> {
    let grid = f.grid();
    grid.check_factor(i)?;
    if level > grid.depth(i) {
        return Err(Error::LevelOutOfRange {
            factor: i,
            level,
            max: grid.depth(i),
        });
    }
    if level == grid.depth(i) {
        return Ok(f.clone());
    }
    let n = grid.factor_dim(i);
    let cubes = 1usize << (n * level);
    let per_cube = grid.factor_cells(i) / cubes;
    let reduced = grid.cell_count() / grid.factor_cells(i);
    let cube_of: Vec<usize> = (0..grid.factor_cells(i))
        .map(|l| cube_index(grid, i, l, level))
        .collect();
    let key = |cell: usize| grid.drop_factor(cell, i) * cubes + cube_of[grid.factor_local(cell, i)];
    let mut sums = vec![0.0; reduced * cubes];
    for (cell, v) in f.values().iter().enumerate() {
        sums[key(cell)] += v;
    }
    Ok(GridFunction::from_fn(grid.clone(), |cell| {
        sums[key(cell)] / per_cube as f64
    }))
}

/// `Δ_R f` computed directly from the cells of `R`.
pub fn delta_r(f: &GridFunction, r: &DyadicRectangle) -> Result<HaarCoefficient> {
    let grid = f.grid();
    r.validate_eligible(grid)?;
    let shape: Vec<usize> = r.cubes.iter().map(|q| 1usize << q.dim()).collect();
    let len: usize = shape.iter().product();
    let cells = r.cells(grid);
    let per_child = (cells.len() / len) as f64;
    let mut block = vec![0.0; len];
    for &c in &cells {
        block[child_index(grid, r, c)] += f.value(c);
    }
    for b in &mut block {
        *b /= per_child;
    }
    center_block(&mut block, &shape);
    Ok(HaarCoefficient {
        rectangle: r.clone(),
        block,
    })
}

/// `Δ_R f` as a full-grid function.
pub fn delta_function(f: &GridFunction, r: &DyadicRectangle) -> Result<GridFunction> {
    Ok(delta_r(f, r)?.to_function(f.grid()))
}

/// Per-level-tuple bulk evaluation of all `Δ_R f` at once.
pub(crate) struct Sweep<'a> {
    grid: &'a ProductGrid,
    // [factor][level][local] -> (cube index, child index)
    tables: Vec<Vec<Vec<(u32, u32)>>>,
    block_shape: Vec<usize>,
}

/// All blocks for one tuple of levels, `rects x block_len` row-major.
pub(crate) struct LevelBlocks {
    pub block_len: usize,
    pub data: Vec<f64>,
}

impl LevelBlocks {
    pub fn rect_count(&self) -> usize {
        self.data.len() / self.block_len
    }

    pub fn block(&self, rect: usize) -> &[f64] {
        &self.data[rect * self.block_len..(rect + 1) * self.block_len]
    }
}

impl<'a> Sweep<'a> {
    pub fn new(grid: &'a ProductGrid) -> Self {
        let tables = (0..grid.d())
            .map(|i| {
                let n = grid.factor_dim(i);
                (0..grid.depth(i))
                    .map(|j| {
                        let shift = grid.depth(i) - j - 1;
                        (0..grid.factor_cells(i))
                            .map(|l| {
                                let coords = grid.local_coords(i, l);
                                let cube = coords.iter().fold(0usize, |a, &c| (a << j) | (c >> (shift + 1)));
                                let child = coords.iter().fold(0usize, |a, &c| (a << 1) | ((c >> shift) & 1));
                                debug_assert!(child < 1 << n);
                                (cube as u32, child as u32)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let block_shape = (0..grid.d()).map(|i| 1usize << grid.factor_dim(i)).collect();
        Sweep {
            grid,
            tables,
            block_shape,
        }
    }

    /// Every tuple `(j_1..j_d)` with `j_i < J_i`, lexicographic.
    pub fn level_tuples(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for i in 0..self.grid.d() {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..self.grid.depth(i)).map(move |j| {
                        let mut p = p.clone();
                        p.push(j);
                        p
                    })
                })
                .collect();
        }
        out
    }

    /// `(rect index, child index)` of `cell` at the given levels.
    #[inline]
    pub fn locate(&self, cell: usize, levels: &[usize]) -> (usize, usize) {
        let mut rect = 0usize;
        let mut child = 0usize;
        for (i, &j) in levels.iter().enumerate() {
            let (q, c) = self.tables[i][j][self.grid.factor_local(cell, i)];
            rect = (rect << (self.grid.factor_dim(i) * j)) | q as usize;
            child = (child << self.grid.factor_dim(i)) | c as usize;
        }
        (rect, child)
    }

    pub fn blocks(&self, f: &[f64], levels: &[usize]) -> LevelBlocks {
        let block_len: usize = self.block_shape.iter().product();
        let rects: usize = levels
            .iter()
            .enumerate()
            .map(|(i, &j)| 1usize << (self.grid.factor_dim(i) * j))
            .product();
        let mut data = vec![0.0; rects * block_len];
        for (cell, v) in f.iter().enumerate() {
            let (r, c) = self.locate(cell, levels);
            data[r * block_len + c] += v;
        }
        let per_child = (f.len() / (rects * block_len)) as f64;
        for chunk in data.chunks_mut(block_len) {
            for b in chunk.iter_mut() {
                *b /= per_child;
            }
            center_block(chunk, &self.block_shape);
        }
        LevelBlocks {
            block_len,
            data,
        }
    }

    pub fn rectangle(&self, levels: &[usize], mut rect: usize) -> DyadicRectangle {
        let mut cubes = Vec::with_capacity(levels.len());
        for i in (0..levels.len()).rev() {
            let n = self.grid.factor_dim(i);
            let j = levels[i];
            let bits = n * j;
            let q = rect & ((1usize << bits) - 1);
            rect >>= bits;
            let mask = (1usize << j) - 1;
            let coords = (0..n).map(|k| (q >> (j * (n - 1 - k))) & mask).collect();
            cubes.push(DyadicCube::new(i, j, coords));
        }
        cubes.reverse();
        DyadicRectangle::new(cubes)
    }

    /// Every eligible `Δ_R f` with its energy, in canonical rectangle order.
    pub fn coefficients(&self, f: &GridFunction) -> Vec<HaarCoefficient> {
        let tuples = self.level_tuples();
        let mut out: Vec<HaarCoefficient> = tuples
            .par_iter()
            .flat_map_iter(|levels| {
                let lb = self.blocks(f.values(), levels);
                (0..lb.rect_count())
                    .map(|r| HaarCoefficient {
                        rectangle: self.rectangle(levels, r),
                        block: lb.block(r).to_vec(),
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        out.sort_by(|a, b| a.rectangle.cmp(&b.rectangle));
        out
    }
}

/// `(R, ‖Δ_R f‖₂²)` for every eligible `R`, canonical order, nothing pruned.
pub fn rectangle_energies(f: &GridFunction) -> Result<Vec<(DyadicRectangle, f64)>> {
    check_cap(f.grid())?;
    Ok(Sweep::new(f.grid())
        .coefficients(f)
        .into_iter()
        .map(|c| {
            let e = c.energy();
            (c.rectangle, e)
        })
        .collect())
}

fn check_cap(grid: &ProductGrid) -> Result<()> {
    let count = eligible_rectangle_count(grid);
    if count > DEFAULT_RECTANGLE_CAP {
        return Err(Error::ResourceLimit {
            what: "rectangle count",
            count,
            cap: DEFAULT_RECTANGLE_CAP,
            hint: "",
        });
    }
    Ok(())
}

/// The hybrid component for refined factor set `refined`:
/// `Π_{i∈T} (I - E_0^{(i)}) Π_{i∉T} E_0^{(i)} f`.
pub fn hybrid_component(f: &GridFunction, refined: &[usize]) -> Result<GridFunction> {
    let d = f.grid().d();
    let mut g = f.clone();
    for i in (0..d).filter(|i| !refined.contains(i)) {
        g = expectation(&g, i, 0)?;
    }
    for &i in refined {
        f.grid().check_factor(i)?;
        let avg = expectation(&g, i, 0)?;
        g = g.sub(&avg)?;
    }
    Ok(g)
}

/// `Σ_R Δ_R f = Π_i (I - E_0^{(i)}) f`.
pub fn pure_part(f: &GridFunction) -> Result<GridFunction> {
    let all: Vec<usize> = (0..f.grid().d()).collect();
    hybrid_component(f, &all)
}

/// Proper subsets of `0..d`, each sorted, in increasing bitmask order.
pub fn proper_subsets(d: usize) -> Vec<Vec<usize>> {
    (0..(1usize << d) - 1)
        .map(|m| (0..d).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

/// The full orthogonal decomposition of a grid function.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    grid: ProductGrid,
    pub pure: BTreeMap<DyadicRectangle, HaarCoefficient>,
    /// Keyed by the sorted set of refined factors; `[]` is the grand average.
    pub hybrid: BTreeMap<Vec<usize>, GridFunction>,
}

impl Decomposition {
    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    /// An all-zero decomposition.
    pub fn zero(grid: ProductGrid) -> Self {
        let hybrid = proper_subsets(grid.d())
            .into_iter()
            .map(|t| (t, GridFunction::zeros(grid.clone())))
            .collect();
        Decomposition {
            grid,
            pure: BTreeMap::new(),
            hybrid,
        }
    }

    pub fn pure_energy(&self) -> f64 {
        sum(self.pure.values().map(HaarCoefficient::energy))
    }

    pub fn hybrid_energy(&self) -> f64 {
        sum(self.hybrid.values().map(GridFunction::l2_norm_sq))
    }

    pub fn total_energy(&self) -> f64 {
        self.pure_energy() + self.hybrid_energy()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&DecompositionRepr::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let repr: DecompositionRepr = serde_json::from_str(s)?;
        repr.try_into()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HybridRepr {
    refined: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecompositionRepr {
    grid: ProductGrid,
    pure: Vec<HaarCoefficient>,
    hybrid: Vec<HybridRepr>,
}

impl From<&Decomposition> for DecompositionRepr {
    fn from(d: &Decomposition) -> Self {
        DecompositionRepr {
            grid: d.grid.clone(),
            pure: d.pure.values().cloned().collect(),
            hybrid: d
                .hybrid
                .iter()
                .map(|(t, g)| HybridRepr {
                    refined: t.clone(),
                    values: g.values().to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<DecompositionRepr> for Decomposition {
    type Error = Error;

    fn try_from(repr: DecompositionRepr) -> Result<Self> {
        let grid = repr.grid;
        let mut pure = BTreeMap::new();
        for c in repr.pure {
            c.validate(&grid)?;
            pure.insert(c.rectangle.clone(), c);
        }
        let mut hybrid = BTreeMap::new();
        for h in repr.hybrid {
            validate_refined(&grid, &h.refined)?;
            hybrid.insert(h.refined, GridFunction::new(grid.clone(), h.values)?);
        }
        Ok(Decomposition { grid, pure, hybrid })
    }
}

fn validate_refined(grid: &ProductGrid, t: &[usize]) -> Result<()> {
    let sorted = t.windows(2).all(|w| w[0] < w[1]);
    if !sorted || t.iter().any(|&i| i >= grid.d()) || t.len() >= grid.d() {
        return Err(Error::invalid(format!(
            "hybrid key {t:?} is not a sorted proper subset of 0..{}",
            grid.d()
        )));
    }
    Ok(())
}

/// Pure coefficients for every eligible rectangle plus every hybrid component.
pub fn decompose(f: &GridFunction) -> Result<Decomposition> {
    let grid = f.grid();
    check_cap(grid)?;
    let pure = Sweep::new(grid)
        .coefficients(f)
        .into_iter()
        .filter(|c| c.block.iter().any(|b| b.abs() >= PRUNE_THRESHOLD))
        .map(|c| (c.rectangle.clone(), c))
        .collect();
    let hybrid = proper_subsets(grid.d())
        .into_iter()
        .map(|t| {
            let g = hybrid_component(f, &t)?;
            Ok((t, g))
        })
        .collect::<Result<_>>()?;
    Ok(Decomposition {
        grid: grid.clone(),
        pure,
        hybrid,
    })
}

/// Sum of all pure and hybrid components.
pub fn reconstruct(d: &Decomposition) -> Result<GridFunction> {
    let grid = d.grid();
    let mut acc = vec![Neumaier::new(); grid.cell_count()];
    for (r, c) in &d.pure {
        if r != &c.rectangle {
            return Err(Error::invalid(format!("coefficient keyed {r} holds {}", c.rectangle)));
        }
        c.validate(grid)?;
        for cell in r.cells(grid) {
            acc[cell].add(c.block[child_index(grid, r, cell)]);
        }
    }
    for (t, g) in &d.hybrid {
        validate_refined(grid, t)?;
        grid.ensure_same(g.grid())?;
        for (a, v) in acc.iter_mut().zip(g.values()) {
            a.add(*v);
        }
    }
    GridFunction::new(grid.clone(), acc.iter().map(Neumaier::value).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::enumerate_rectangles;

    fn grid(dims: &[usize], depths: &[usize]) -> ProductGrid {
        ProductGrid::new(dims.to_vec(), depths.to_vec()).unwrap()
    }

    #[test]
    fn expectation_examples() {
        let g = grid(&[1], &[1]);
        let f = GridFunction::new(g.clone(), vec![1.0, 3.0]).unwrap();
        assert_eq!(expectation(&f, 0, 0).unwrap().values(), &[2.0, 2.0]);
        assert_eq!(expectation(&f, 0, 1).unwrap(), f);
        assert!(matches!(
            expectation(&f, 0, 2),
            Err(Error::LevelOutOfRange { .. })
        ));
        let c = GridFunction::constant(grid(&[2, 1], &[1, 2]), 3.5);
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_eq!(expectation(&c, i, j).unwrap(), c);
        }
    }

    #[test]
    fn expectation_is_idempotent() {
        let g = grid(&[2, 1], &[2, 2]);
        let f = GridFunction::from_fn(g, |c| ((c * 37) % 11) as f64);
        for i in 0..2 {
            for j in 0..=2 {
                let e = expectation(&f, i, j).unwrap();
                assert_eq!(expectation(&e, i, j).unwrap(), e);
            }
        }
    }

    #[test]
    fn single_interval_block() {
        let g = grid(&[1], &[1]);
        let f = GridFunction::new(g.clone(), vec![1.0, 3.0]).unwrap();
        let c = delta_r(&f, &DyadicRectangle::unit(&g)).unwrap();
        assert_eq!(c.block, vec![-1.0, 1.0]);
        assert_eq!(c.energy(), 1.0);
    }

    #[test]
    fn constants_have_zero_blocks() {
        let g = grid(&[1, 2], &[2, 1]);
        let f = GridFunction::constant(g.clone(), -2.25);
        for r in enumerate_rectangles(&g).unwrap().iter() {
            assert!(delta_r(&f, r).unwrap().block.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn ineligible_rectangle_errors() {
        let g = grid(&[1], &[1]);
        let f = GridFunction::zeros(g);
        let r: DyadicRectangle = "0:1:(0)".parse().unwrap();
        assert!(matches!(delta_r(&f, &r), Err(Error::IneligibleRectangle(_))));
    }

    #[test]
    fn sweep_matches_direct() {
        let g = grid(&[2, 1], &[2, 2]);
        let f = GridFunction::from_fn(g.clone(), |c| ((c * 7919) % 13) as f64 - 6.0);
        let bulk = Sweep::new(&g).coefficients(&f);
        let fam = enumerate_rectangles(&g).unwrap();
        assert_eq!(bulk.len(), fam.len());
        for (c, r) in bulk.iter().zip(fam.iter()) {
            assert_eq!(&c.rectangle, r);
            assert_eq!(c, &delta_r(&f, r).unwrap());
        }
    }

    #[test]
    fn checkerboard_is_one_pure_atom() {
        let g = grid(&[1, 1], &[1, 1]);
        let f = GridFunction::new(g.clone(), vec![1.0, -1.0, -1.0, 1.0]).unwrap();
        let d = decompose(&f).unwrap();
        assert_eq!(d.pure.len(), 1);
        assert_eq!(d.pure_energy(), f.l2_norm_sq());
        assert_eq!(d.hybrid.len(), 3);
        assert!(d.hybrid.values().all(|h| h.sup_norm() == 0.0));
    }

    #[test]
    fn zero_function_decomposes_to_zero() {
        let g = grid(&[1, 1], &[2, 1]);
        let d = decompose(&GridFunction::zeros(g.clone())).unwrap();
        assert!(d.pure.is_empty());
        assert_eq!(d.total_energy(), 0.0);
        assert_eq!(reconstruct(&Decomposition::zero(g.clone())).unwrap(), GridFunction::zeros(g));
    }

    #[test]
    fn removing_a_coefficient_removes_its_function() {
        let g = grid(&[1, 1], &[2, 2]);
        let f = GridFunction::from_fn(g.clone(), |c| (c as f64).sin());
        let mut d = decompose(&f).unwrap();
        let r: DyadicRectangle = "0:1:(1)|1:0:(0)".parse().unwrap();
        let removed = d.pure.remove(&r).unwrap();
        let back = reconstruct(&d).unwrap();
        let delta = removed.to_function(&g);
        for c in 0..g.cell_count() {
            assert!((f.value(c) - back.value(c) - delta.value(c)).abs() < 1e-14);
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let g = grid(&[1, 2], &[2, 1]);
        let f = GridFunction::from_fn(g, |c| (c as f64 * 0.37).cos() / 3.0);
        let d = decompose(&f).unwrap();
        let s = d.to_json().unwrap();
        let back = Decomposition::from_json(&s).unwrap();
        assert_eq!(back, d);
        assert!(s.contains("\"rectangle\":\"0:0:(0)|1:0:(0,0)\""));
    }

    #[test]
    fn reconstruct_rejects_mismatched_grids() {
        let g = grid(&[1, 1], &[1, 1]);
        let mut d = Decomposition::zero(g);
        d.hybrid.insert(vec![0], GridFunction::zeros(grid(&[1, 1], &[1, 2])));
        assert!(matches!(reconstruct(&d), Err(Error::GridMismatch(_))));
    }
}
