//! Seeded local search for the packing supremum.
//!
//! Candidates come from superlevel sets of the energy density
//! `e(x) = Σ_{R∋x} ‖Δ_R f‖₂² / |R|`, from single high-density rectangles, from a
//! parametric max-weight-closure (Dinkelbach) iteration, and from random unions
//! of rectangles. Each candidate is polished by greedy cell and rectangle moves.

use std::cmp::Ordering;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::FlowGraph;
use super::packing::{prefer, PackingMode, PackingResult, RectangleIndex, TIE_TOL};
use crate::error::Result;
use crate::grid::{GridFunction, OpenSetMask};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Only rectangles with `|R| ≤ size_cap` count.
    pub size_cap: Option<f64>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            restarts: 8,
            seed: 0,
            size_cap: None,
        }
    }
}

/// A lower bound for the packing supremum; `value` is exactly the ratio of `witness`.
pub fn bmo_d_norm_search(f: &GridFunction, restarts: usize, seed: u64) -> Result<PackingResult> {
    bmo_d_norm_search_with(
        f,
        &SearchOptions {
            restarts,
            seed,
            size_cap: None,
        },
    )
}

pub fn bmo_d_norm_search_with(f: &GridFunction, opts: &SearchOptions) -> Result<PackingResult> {
    let index = RectangleIndex::new(f, opts.size_cap)?;
    search_index(&index, opts)
}

/// Search with the dyadic lattice translated by whole cells (cyclically).
///
/// `shift` has one entry per axis. The witness is reported in the original
/// coordinates.
pub fn shifted_packing(f: &GridFunction, shift: &[i64], opts: &SearchOptions) -> Result<PackingResult> {
    let g = f.roll(shift)?;
    let r = bmo_d_norm_search_with(&g, opts)?;
    let grid = f.grid();
    let sizes = grid.axis_sizes();
    let cells = r.witness.cells().into_iter().map(|y| {
        let coords: Vec<usize> = grid
            .cell_coords(y)
            .iter()
            .zip(shift)
            .zip(&sizes)
            .map(|((&c, &s), &n)| (c as i64 + s).rem_euclid(n as i64) as usize)
            .collect();
        grid.cell_from_coords(&coords)
    });
    Ok(PackingResult {
        value: r.value,
        witness: OpenSetMask::from_cells(grid.clone(), cells)?,
        mode: r.mode,
    })
}

pub(crate) fn search_index(ix: &RectangleIndex, opts: &SearchOptions) -> Result<PackingResult> {
    let grid = ix.grid().clone();
    if ix.is_empty() {
        let witness = OpenSetMask::from_cells(grid, [0])?;
        return Ok(PackingResult {
            value: 0.0,
            witness,
            mode: PackingMode::Heuristic,
        });
    }
    let m = grid.cell_count();
    let mut seeds: Vec<Vec<usize>> = Vec::new();
    seeds.push(superlevel_seed(ix));
    let mut by_density: Vec<usize> = (0..ix.len()).collect();
    let dens = |k: usize| ix.energy[k] / ix.cells[k].len() as f64;
    by_density.sort_by(|&a, &b| dens(b).partial_cmp(&dens(a)).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    for &k in by_density.iter().take(16) {
        seeds.push(ix.cells[k].iter().map(|&c| c as usize).collect());
    }
    let start = best_of(ix, seeds.iter().cloned());
    seeds.push(dinkelbach(ix, &start));

    let weights: Vec<f64> = {
        let top = dens(by_density[0]);
        (0..ix.len()).map(|k| dens(k) / top).collect()
    };
    let dist = WeightedIndex::new(&weights).ok();
    let random: Vec<Vec<usize>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut inside = vec![false; m];
            let picks = rng.gen_range(1..=3);
            for _ in 0..picks {
                let k = match &dist {
                    Some(d) => d.sample(&mut rng),
                    None => rng.gen_range(0..ix.len()),
                };
                for &c in &ix.cells[k] {
                    inside[c as usize] = true;
                }
            }
            (0..m).filter(|&c| inside[c]).collect()
        })
        .collect();
    seeds.extend(random);

    let polished: Vec<Vec<usize>> = seeds.par_iter().map(|s| greedy(ix, s)).collect();
    let best = best_of(ix, polished.into_iter());
    let witness = OpenSetMask::from_cells(grid, best)?;
    Ok(PackingResult {
        value: ix.ratio(&witness)?,
        witness,
        mode: PackingMode::Heuristic,
    })
}

/// Best candidate by directly recomputed ratio, ties to fewer then lexicographically smaller cells.
fn best_of(ix: &RectangleIndex, cands: impl Iterator<Item = Vec<usize>>) -> Vec<usize> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mut c in cands {
        if c.is_empty() {
            continue;
        }
        c.sort_unstable();
        c.dedup();
        let mask = OpenSetMask::from_cells(ix.grid().clone(), c.iter().copied()).expect("cells in range");
        let r = ix.ratio(&mask).expect("nonempty");
        let better = match &best {
            None => true,
            Some((br, bc)) => prefer((r, &c), (*br, bc)) == Ordering::Less,
        };
        if better {
            best = Some((r, c));
        }
    }
    best.map(|b| b.1).unwrap_or_else(|| vec![0])
}

fn improves(new: f64, old: f64) -> bool {
    new > old && new - old > TIE_TOL * old.abs()
}

/// Incrementally maintained packing energy of a cell set.
struct State<'a> {
    ix: &'a RectangleIndex,
    inside: Vec<bool>,
    count: usize,
    missing: Vec<u32>,
    energy: f64,
}

impl<'a> State<'a> {
    fn new(ix: &'a RectangleIndex, cells: &[usize]) -> Self {
        let mut s = State {
            ix,
            inside: vec![false; ix.grid().cell_count()],
            count: 0,
            missing: ix.cells.iter().map(|c| c.len() as u32).collect(),
            energy: 0.0,
        };
        for &c in cells {
            s.add(c);
        }
        s
    }

    /// Energy per cell; the volume factor is common to all comparisons.
    fn ratio(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.energy / self.count as f64
        }
    }

    fn add(&mut self, c: usize) {
        if self.inside[c] {
            return;
        }
        self.inside[c] = true;
        self.count += 1;
        for &r in &self.ix.by_cell[c] {
            let r = r as usize;
            self.missing[r] -= 1;
            if self.missing[r] == 0 {
                self.energy += self.ix.energy[r];
            }
        }
    }

    fn remove(&mut self, c: usize) {
        if !self.inside[c] {
            return;
        }
        self.inside[c] = false;
        self.count -= 1;
        for &r in &self.ix.by_cell[c] {
            let r = r as usize;
            if self.missing[r] == 0 {
                self.energy -= self.ix.energy[r];
            }
            self.missing[r] += 1;
        }
    }

    fn add_gain(&self, c: usize) -> f64 {
        self.ix.by_cell[c]
            .iter()
            .filter(|&&r| self.missing[r as usize] == 1)
            .map(|&r| self.ix.energy[r as usize])
            .sum()
    }

    fn remove_loss(&self, c: usize) -> f64 {
        self.ix.by_cell[c]
            .iter()
            .filter(|&&r| self.missing[r as usize] == 0)
            .map(|&r| self.ix.energy[r as usize])
            .sum()
    }

    fn cells(&self) -> Vec<usize> {
        (0..self.inside.len()).filter(|&c| self.inside[c]).collect()
    }
}

fn superlevel_seed(ix: &RectangleIndex) -> Vec<usize> {
    let m = ix.grid().cell_count();
    let density: Vec<f64> = (0..m)
        .map(|c| {
            ix.by_cell[c]
                .iter()
                .map(|&r| ix.energy[r as usize] / ix.cells[r as usize].len() as f64)
                .sum()
        })
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| density[b].partial_cmp(&density[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let mut state = State::new(ix, &[]);
    let mut best = (0.0, 1);
    for (k, &c) in order.iter().enumerate() {
        if density[c] <= 0.0 {
            break;
        }
        state.add(c);
        if improves(state.ratio(), best.0) {
            best = (state.ratio(), k + 1);
        }
    }
    order[..best.1].to_vec()
}

/// Parametric max-weight closure: at cost `λ` per cell, the set maximizing
/// `Σ_{R⊂Ω} e_R - λ #Ω` is a minimum cut; iterate `λ ← ratio(Ω)` until it stalls.
fn dinkelbach(ix: &RectangleIndex, start: &[usize]) -> Vec<usize> {
    let m = ix.grid().cell_count();
    let nr = ix.len();
    let total = ix.total_energy();
    let mut current = start.to_vec();
    let mut lambda = State::new(ix, &current).ratio();
    for _ in 0..64 {
        let mut g = FlowGraph::new(2 + nr + m, 1e-13 * total);
        for r in 0..nr {
            g.add_edge(0, 2 + r, ix.energy[r]);
            for &c in &ix.cells[r] {
                g.add_edge(2 + r, 2 + nr + c as usize, f64::INFINITY);
            }
        }
        for c in 0..m {
            if !ix.by_cell[c].is_empty() {
                g.add_edge(2 + nr + c, 1, lambda);
            }
        }
        let side = g.min_cut_source_side(0, 1);
        let omega: Vec<usize> = (0..m).filter(|&c| side[2 + nr + c]).collect();
        if omega.is_empty() {
            break;
        }
        let r = State::new(ix, &omega).ratio();
        if !improves(r, lambda) {
            break;
        }
        current = omega;
        lambda = r;
    }
    current
}

/// Best-improvement hill climbing over single-cell moves, falling back to
/// adding or removing the cells of one rectangle.
fn greedy(ix: &RectangleIndex, seed: &[usize]) -> Vec<usize> {
    let m = ix.grid().cell_count();
    let mut s = State::new(ix, seed);
    if s.count == 0 {
        s.add(0);
    }
    for _ in 0..(8 * m + 64) {
        let cur = s.ratio();
        let mut best: Option<(f64, Move)> = None;
        for c in 0..m {
            let val = if s.inside[c] {
                if s.count == 1 {
                    continue;
                }
                (s.energy - s.remove_loss(c)) / (s.count - 1) as f64
            } else {
                (s.energy + s.add_gain(c)) / (s.count + 1) as f64
            };
            if improves(val, best.as_ref().map_or(cur, |b| b.0)) {
                best = Some((val, Move::Cell(c)));
            }
        }
        if best.is_none() {
            for r in 0..ix.len() {
                let cells: Vec<usize> = ix.cells[r].iter().map(|&c| c as usize).collect();
                let missing = s.missing[r] as usize;
                if missing > 0 {
                    let added: Vec<usize> = cells.iter().copied().filter(|&c| !s.inside[c]).collect();
                    for &c in &added {
                        s.add(c);
                    }
                    let val = s.ratio();
                    for &c in &added {
                        s.remove(c);
                    }
                    if improves(val, best.as_ref().map_or(cur, |b| b.0)) {
                        best = Some((val, Move::AddRect(r)));
                    }
                }
                if missing < cells.len() {
                    let removed: Vec<usize> = cells.iter().copied().filter(|&c| s.inside[c]).collect();
                    if removed.len() == s.count {
                        continue;
                    }
                    for &c in &removed {
                        s.remove(c);
                    }
                    let val = s.ratio();
                    for &c in &removed {
                        s.add(c);
                    }
                    if improves(val, best.as_ref().map_or(cur, |b| b.0)) {
                        best = Some((val, Move::RemoveRect(r)));
                    }
                }
            }
        }
        match best {
            None => break,
            Some((_, Move::Cell(c))) => {
                if s.inside[c] {
                    s.remove(c)
                } else {
                    s.add(c)
                }
            }
            Some((_, Move::AddRect(r))) => {
                for &c in &ix.cells[r] {
                    s.add(c as usize);
                }
            }
            Some((_, Move::RemoveRect(r))) => {
                for &c in &ix.cells[r] {
                    s.remove(c as usize);
                }
            }
        }
    }
    s.cells()
}

enum Move {
    Cell(usize),
    AddRect(usize),
    RemoveRect(usize),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ProductGrid;
    use crate::norms::bmo_d_norm_exact;

    #[test]
    fn matches_exact_on_small_grids() {
        for (dims, depths) in [(vec![1], vec![4]), (vec![1, 1], vec![2, 2]), (vec![2], vec![2])] {
            let g = ProductGrid::new(dims, depths).unwrap();
            for t in 0..20u64 {
                let f = GridFunction::from_fn(g.clone(), |c| {
                    (((c as u64 + 3) * (t * 2654435761 + 17)) % 1009) as f64 / 1009.0 - 0.5
                });
                let e = bmo_d_norm_exact(&f).unwrap();
                let s = bmo_d_norm_search(&f, 4, t).unwrap();
                assert!((e.value - s.value).abs() <= 1e-10 * e.value, "{} vs {}", e.value, s.value);
            }
        }
    }

    #[test]
    fn zero_shift_is_plain_search() {
        let g = ProductGrid::new(vec![1], vec![3]).unwrap();
        let f = GridFunction::from_fn(g, |c| if c == 2 { 1.0 } else if c == 3 { -1.0 } else { 0.0 });
        let opts = SearchOptions::default();
        let a = shifted_packing(&f, &[0], &opts).unwrap();
        let b = bmo_d_norm_search_with(&f, &opts).unwrap();
        assert_eq!(a, b);
        let s = shifted_packing(&f, &[1], &opts).unwrap();
        assert!(s.value > 0.0);
    }
}
