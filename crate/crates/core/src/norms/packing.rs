use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DyadicRectangle, GridFunction, OpenSetMask, ProductGrid};
use crate::martingale::rectangle_energies;
use crate::sum::Neumaier;

/// Default largest finest-cell count accepted by the exact oracle.
pub const DEFAULT_EXACT_CAP: usize = 22;

/// Ratios closer than this (relative) count as ties.
pub(crate) const TIE_TOL: f64 = 1e-12;

/// The exact-oracle cap, overridable through `DH_CAP_CELLS`.
pub fn exact_cell_cap() -> usize {
    std::env::var("DH_CAP_CELLS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_EXACT_CAP)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PackingMode {
    Exact,
    Heuristic,
}

/// A packing ratio `Σ_{R⊂Ω} ‖Δ_R f‖₂² / |Ω|` together with the `Ω` attaining it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingResult {
    pub value: f64,
    pub witness: OpenSetMask,
    pub mode: PackingMode,
}

/// Rectangles with nonzero energy, their cells, and the reverse cell index.
#[derive(Clone, Debug)]
pub struct RectangleIndex {
    grid: ProductGrid,
    pub(crate) rects: Vec<DyadicRectangle>,
    pub(crate) energy: Vec<f64>,
    pub(crate) cells: Vec<Vec<u32>>,
    pub(crate) by_cell: Vec<Vec<u32>>,
}

impl RectangleIndex {
    /// Index of `f`'s rectangles, keeping only `|R| ≤ size_cap` when given.
    pub fn new(f: &GridFunction, size_cap: Option<f64>) -> Result<Self> {
        if let Some(a) = size_cap {
            if !(a > 0.0) {
                return Err(Error::invalid(format!("size cap must be positive, got {a}")));
            }
        }
        let energies = rectangle_energies(f)?;
        Ok(Self::from_energies(f.grid().clone(), energies, size_cap))
    }

    pub fn from_energies(
        grid: ProductGrid,
        energies: Vec<(DyadicRectangle, f64)>,
        size_cap: Option<f64>,
    ) -> Self {
        let mut rects = Vec::new();
        let mut energy = Vec::new();
        let mut cells = Vec::new();
        let mut by_cell = vec![Vec::new(); grid.cell_count()];
        for (r, e) in energies {
            if e <= 0.0 || size_cap.is_some_and(|a| r.measure() > a) {
                continue;
            }
            let id = rects.len() as u32;
            let cs: Vec<u32> = r.cells(&grid).into_iter().map(|c| c as u32).collect();
            for &c in &cs {
                by_cell[c as usize].push(id);
            }
            rects.push(r);
            energy.push(e);
            cells.push(cs);
        }
        RectangleIndex {
            grid,
            rects,
            energy,
            cells,
            by_cell,
        }
    }

    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.rects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }

    pub fn total_energy(&self) -> f64 {
        self.energy.iter().copied().collect::<Neumaier>().value()
    }

    /// `Σ_{R⊂Ω} ‖Δ_R f‖₂²`, summed in canonical rectangle order.
    pub fn energy_in(&self, omega: &OpenSetMask) -> f64 {
        let inside = omega.as_slice();
        (0..self.rects.len())
            .filter(|&k| self.cells[k].iter().all(|&c| inside[c as usize]))
            .map(|k| self.energy[k])
            .collect::<Neumaier>()
            .value()
    }

    pub fn ratio(&self, omega: &OpenSetMask) -> Result<f64> {
        self.grid.ensure_same(omega.grid())?;
        if omega.is_empty() {
            return Err(Error::EmptyMask);
        }
        Ok(self.energy_in(omega) / omega.measure())
    }

    /// `(R, ‖Δ_R f‖₂²)` for every indexed rectangle.
    pub fn entries(&self) -> impl Iterator<Item = (&DyadicRectangle, f64)> {
        self.rects.iter().zip(self.energy.iter().copied())
    }
}

/// `Σ ‖Δ_R f‖₂²` over eligible `R ⊂ Ω` with `|R| ≤ α` when a cap is given.
pub fn packing_energy(f: &GridFunction, omega: &OpenSetMask, size_cap: Option<f64>) -> Result<f64> {
    f.grid().ensure_same(omega.grid())?;
    Ok(RectangleIndex::new(f, size_cap)?.energy_in(omega))
}

/// `packing_energy / |Ω|`.
pub fn packing_ratio(f: &GridFunction, omega: &OpenSetMask, size_cap: Option<f64>) -> Result<f64> {
    f.grid().ensure_same(omega.grid())?;
    RectangleIndex::new(f, size_cap)?.ratio(omega)
}

/// Preference between two candidate witnesses: higher ratio, then fewer
/// cells, then the lexicographically smaller sorted cell list.
pub(crate) fn prefer(a: (f64, &[usize]), b: (f64, &[usize])) -> Ordering {
    let (ra, ca) = a;
    let (rb, cb) = b;
    let scale = ra.abs().max(rb.abs());
    if (ra - rb).abs() > TIE_TOL * scale {
        return if ra > rb { Ordering::Less } else { Ordering::Greater };
    }
    ca.len().cmp(&cb.len()).then_with(|| ca.cmp(cb))
}

/// Exact `sup_Ω` of the packing ratio by enumeration of all nonempty cell masks.
pub fn bmo_d_norm_exact(f: &GridFunction) -> Result<PackingResult> {
    bmo_d_norm_exact_with(f, None, exact_cell_cap())
}

pub fn bmo_d_norm_exact_with(
    f: &GridFunction,
    size_cap: Option<f64>,
    cell_cap: usize,
) -> Result<PackingResult> {
    let grid = f.grid();
    let m = grid.cell_count();
    if m > cell_cap || m > 30 {
        return Err(Error::ResourceLimit {
            what: "finest-cell count for exact BMO_d",
            count: m,
            cap: cell_cap.min(30),
            hint: "; use the search mode instead",
        });
    }
    let index = RectangleIndex::new(f, size_cap)?;
    // subset-sum (zeta) transform: g[S] = Σ_{R : cells(R) ⊆ S} e_R
    let mut g = vec![0.0f64; 1usize << m];
    for (cs, e) in index.cells.iter().zip(&index.energy) {
        let mask = cs.iter().fold(0usize, |acc, &c| acc | 1usize << c);
        g[mask] += e;
    }
    for bit in 0..m {
        let step = 1usize << bit;
        g.par_chunks_mut(step << 1).for_each(|chunk| {
            let (lo, hi) = chunk.split_at_mut(step);
            for (h, l) in hi.iter_mut().zip(lo.iter()) {
                *h += *l;
            }
        });
    }
    let vol = grid.cell_volume();
    let ratio = |s: usize| g[s] / (s.count_ones() as f64 * vol);
    let best = (1..g.len())
        .into_par_iter()
        .map(ratio)
        .reduce(|| 0.0, f64::max);
    let floor = best - TIE_TOL * best.abs();
    let chosen = (1..g.len())
        .into_par_iter()
        .filter(|&s| ratio(s) >= floor)
        .min_by(|&a, &b| {
            a.count_ones()
                .cmp(&b.count_ones())
                .then_with(|| canonical_cmp(a, b))
        })
        .expect("at least one nonempty mask");
    let witness = OpenSetMask::from_cells(grid.clone(), mask_cells(chosen, m))?;
    Ok(PackingResult {
        value: index.ratio(&witness)?,
        witness,
        mode: PackingMode::Exact,
    })
}

/// Same-size masks compare like their sorted cell lists: the one holding the
/// lowest differing cell comes first.
fn canonical_cmp(a: usize, b: usize) -> Ordering {
    let x = a ^ b;
    if x == 0 {
        Ordering::Equal
    } else if a & x & x.wrapping_neg() != 0 {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

fn mask_cells(s: usize, m: usize) -> Vec<usize> {
    (0..m).filter(|&c| s >> c & 1 == 1).collect()
}
