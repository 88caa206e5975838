//! Built-in test data: constants, Haar atoms, random functions and masks,
//! smooth bumps, and the two indexed sequences used by the theorem demo.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DyadicCube, DyadicRectangle, GridFunction, OpenSetMask, ProductGrid};
use crate::io;
use crate::norms::h1_norm;

/// A generator request, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Constant {
        value: f64,
    },
    /// `±1` tensor Haar function on `rectangle` (default: the unit rectangle),
    /// divided by its H¹ norm when `normalize` is set.
    HaarAtom {
        #[serde(default)]
        rectangle: Option<DyadicRectangle>,
        #[serde(default = "yes")]
        normalize: bool,
    },
    RandomUniform {
        #[serde(default = "minus_one")]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
    },
    SmoothBump(BumpSpec),
    /// Member `n`: mass-one indicator of the dyadic box of measure `2^{-n}` containing `x0`.
    SpikeSequence {
        #[serde(default)]
        x0: Option<Vec<f64>>,
        member: usize,
    },
    /// Member `n`: `f + amplitude · a_{R_n}` with `f = amplitude · a_{unit}`.
    H1BoundedSequence {
        #[serde(default)]
        x0: Option<Vec<f64>>,
        member: usize,
        #[serde(default = "half")]
        amplitude: f64,
    },
    RandomMask {
        #[serde(default = "half")]
        density: f64,
    },
    CellMask {
        cells: Vec<usize>,
    },
    Full,
    /// A function read from a JSON or CSV file.
    File {
        path: PathBuf,
    },
}

fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}
fn minus_one() -> f64 {
    -1.0
}
fn half() -> f64 {
    0.5
}

/// `A ∏_a sin²(π(x_a - lo)/w)` on `[lo, hi]^n`, zero elsewhere, `w = hi - lo`,
/// with `A = margin · w / (π max_i n_i)` so each per-factor gradient has `ℓ¹` norm at most `margin`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BumpSpec {
    pub lo: f64,
    pub hi: f64,
    pub margin: f64,
}

impl Default for BumpSpec {
    fn default() -> Self {
        BumpSpec {
            lo: 0.125,
            hi: 0.875,
            margin: 0.9,
        }
    }
}

/// What a generator produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Generated {
    Function(GridFunction),
    Mask(OpenSetMask),
}

impl Generated {
    pub fn into_function(self) -> Result<GridFunction> {
        match self {
            Generated::Function(f) => Ok(f),
            Generated::Mask(m) => Ok(GridFunction::indicator(&m)),
        }
    }

    pub fn into_mask(self) -> Result<OpenSetMask> {
        match self {
            Generated::Mask(m) => Ok(m),
            Generated::Function(f) => Ok(f.support()),
        }
    }
}

pub fn generate(spec: &GeneratorSpec, grid: &ProductGrid, seed: u64) -> Result<Generated> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = grid.clone();
    Ok(match spec {
        GeneratorSpec::Constant { value } => Generated::Function(GridFunction::constant(grid, *value)),
        GeneratorSpec::HaarAtom { rectangle, normalize } => {
            let r = rectangle.clone().unwrap_or_else(|| DyadicRectangle::unit(&grid));
            let h = haar_function(&grid, &r)?;
            Generated::Function(if *normalize { normalize_h1(&h) } else { h })
        }
        GeneratorSpec::RandomUniform { lo, hi } => {
            if !(lo < hi) {
                return Err(Error::invalid(format!("need lo < hi, got [{lo}, {hi}]")));
            }
            Generated::Function(random_uniform(&grid, *lo, *hi, &mut rng))
        }
        GeneratorSpec::SmoothBump(b) => Generated::Function(smooth_bump(&grid, b)?),
        GeneratorSpec::SpikeSequence { x0, member } => {
            let x0 = point_or_default(&grid, x0)?;
            Generated::Function(spike(&grid, &x0, *member)?)
        }
        GeneratorSpec::H1BoundedSequence { x0, member, amplitude } => {
            let x0 = point_or_default(&grid, x0)?;
            Generated::Function(h1_bounded_member(&grid, &x0, *member, *amplitude)?.0)
        }
        GeneratorSpec::RandomMask { density } => Generated::Mask(random_mask(&grid, *density, &mut rng)),
        GeneratorSpec::CellMask { cells } => Generated::Mask(OpenSetMask::from_cells(grid, cells.iter().copied())?),
        GeneratorSpec::Full => Generated::Mask(OpenSetMask::full(grid)),
        GeneratorSpec::File { path } => {
            let f = io::read_function(path)?;
            f.grid().ensure_same(&grid)?;
            Generated::Function(f)
        }
    })
}

/// The default spike location `(0.45, …, 0.45)`.
pub fn default_point(grid: &ProductGrid) -> Vec<f64> {
    vec![0.45; grid.total_dim()]
}

fn point_or_default(grid: &ProductGrid, x0: &Option<Vec<f64>>) -> Result<Vec<f64>> {
    let p = x0.clone().unwrap_or_else(|| default_point(grid));
    grid.cell_at(&p)?;
    Ok(p)
}

pub fn random_uniform(grid: &ProductGrid, lo: f64, hi: f64, rng: &mut impl Rng) -> GridFunction {
    GridFunction::from_fn(grid.clone(), |_| rng.gen_range(lo..hi))
}

/// Each cell independently with probability `density`; never empty.
pub fn random_mask(grid: &ProductGrid, density: f64, rng: &mut impl Rng) -> OpenSetMask {
    let mut m = OpenSetMask::from_fn(grid.clone(), |_| rng.gen_bool(density.clamp(0.0, 1.0)));
    if m.is_empty() {
        m.insert(rng.gen_range(0..grid.cell_count()));
    }
    m
}

/// `h_R = χ_R ∏_i s_i`, where `s_i = +1` on the lower half of `Q_i` along the
/// first coordinate of factor `i` and `-1` on the upper half. `Δ_R h_R = h_R`.
pub fn haar_function(grid: &ProductGrid, r: &DyadicRectangle) -> Result<GridFunction> {
    r.validate_eligible(grid)?;
    let mut values = vec![0.0; grid.cell_count()];
    for c in r.cells(grid) {
        let mut s = 1.0;
        for q in &r.cubes {
            let i = q.factor;
            let x = grid.local_coords(i, grid.factor_local(c, i))[0];
            if (x >> (grid.depth(i) - q.level - 1)) & 1 == 1 {
                s = -s;
            }
        }
        values[c] = s;
    }
    GridFunction::new(grid.clone(), values)
}

/// `f / ‖f‖_{H¹}` (unchanged when the norm vanishes).
pub fn normalize_h1(f: &GridFunction) -> GridFunction {
    let h = h1_norm(f);
    if h > 0.0 {
        f.scale(1.0 / h)
    } else {
        f.clone()
    }
}

pub fn smooth_bump(grid: &ProductGrid, b: &BumpSpec) -> Result<GridFunction> {
    let BumpSpec { lo, hi, margin } = *b;
    if !(0.0 <= lo && lo < hi && hi <= 1.0 && margin > 0.0 && margin <= 1.0) {
        return Err(Error::invalid(format!("bump needs 0 <= lo < hi <= 1 and 0 < margin <= 1, got {b:?}")));
    }
    let w = hi - lo;
    let nmax = *grid.factor_dims().iter().max().expect("d >= 1") as f64;
    let amp = margin * w / (std::f64::consts::PI * nmax);
    Ok(GridFunction::sample(grid.clone(), |x| {
        x.iter()
            .map(|&t| {
                if t <= lo || t >= hi {
                    0.0
                } else {
                    (std::f64::consts::PI * (t - lo) / w).sin().powi(2)
                }
            })
            .product::<f64>()
            * amp
    }))
}

/// Per-axis levels for `n` halvings taken round-robin over the axes.
fn axis_levels(grid: &ProductGrid, n: usize) -> Result<Vec<usize>> {
    let sizes = grid.axis_sizes();
    let k = sizes.len();
    let levels: Vec<usize> = (0..k).map(|a| n / k + usize::from(a < n % k)).collect();
    if levels.iter().zip(&sizes).any(|(&l, &s)| (1usize << l) > s) {
        return Err(Error::invalid(format!("spike member {n} is finer than the grid")));
    }
    Ok(levels)
}

/// Largest spike member index the grid can resolve.
pub fn spike_horizon(grid: &ProductGrid) -> usize {
    grid.log2_cell_count()
}

/// The dyadic box of measure `2^{-n}` containing `x0`.
pub fn spike_support(grid: &ProductGrid, x0: &[f64], n: usize) -> Result<OpenSetMask> {
    let levels = axis_levels(grid, n)?;
    let sizes = grid.axis_sizes();
    let home = grid.cell_coords(grid.cell_at(x0)?);
    Ok(OpenSetMask::from_fn(grid.clone(), |c| {
        grid.cell_coords(c)
            .iter()
            .zip(&home)
            .zip(levels.iter().zip(&sizes))
            .all(|((&y, &h), (&l, &s))| {
                let shift = s.trailing_zeros() as usize - l;
                y >> shift == h >> shift
            })
    }))
}

/// Mass-one spike: `χ_B / |B|` for the box `B` of [`spike_support`].
pub fn spike(grid: &ProductGrid, x0: &[f64], n: usize) -> Result<GridFunction> {
    let b = spike_support(grid, x0, n)?;
    let h = 1.0 / b.measure();
    Ok(GridFunction::from_fn(grid.clone(), |c| if b.contains(c) { h } else { 0.0 }))
}

/// Per-factor levels after `n` refinements taken round-robin over factors,
/// each capped at `J_i - 1`.
fn factor_levels(grid: &ProductGrid, n: usize) -> Result<Vec<usize>> {
    let mut levels = vec![0usize; grid.d()];
    let mut i = 0;
    for _ in 0..n {
        let mut tried = 0;
        while levels[i] + 1 >= grid.depth(i) {
            i = (i + 1) % grid.d();
            tried += 1;
            if tried > grid.d() {
                return Err(Error::invalid(format!("sequence member {n} is finer than the grid")));
            }
        }
        levels[i] += 1;
        i = (i + 1) % grid.d();
    }
    Ok(levels)
}

/// Largest H¹-bounded member index the grid can resolve.
pub fn h1_horizon(grid: &ProductGrid) -> usize {
    (0..grid.d()).map(|i| grid.depth(i) - 1).sum()
}

/// The eligible rectangle for member `n` of the H¹-bounded sequence.
pub fn h1_member_rectangle(grid: &ProductGrid, x0: &[f64], n: usize) -> Result<DyadicRectangle> {
    let levels = factor_levels(grid, n)?;
    let home = grid.split(grid.cell_at(x0)?);
    Ok(DyadicRectangle::new(
        (0..grid.d())
            .map(|i| {
                let shift = grid.depth(i) - levels[i];
                let coords = grid.local_coords(i, home[i]).iter().map(|c| c >> shift).collect();
                DyadicCube::new(i, levels[i], coords)
            })
            .collect(),
    ))
}

/// The limit `f = amplitude · a_{unit}` of the H¹-bounded sequence.
pub fn h1_base(grid: &ProductGrid, amplitude: f64) -> Result<GridFunction> {
    Ok(normalize_h1(&haar_function(grid, &DyadicRectangle::unit(grid))?).scale(amplitude))
}

/// Member `n`: `f + amplitude · a_{R_n}`, divided by its H¹ norm only if that
/// exceeds one. Returns the member and whether it was rescaled.
pub fn h1_bounded_member(grid: &ProductGrid, x0: &[f64], n: usize, amplitude: f64) -> Result<(GridFunction, bool)> {
    let base = h1_base(grid, amplitude)?;
    let r = h1_member_rectangle(grid, x0, n)?;
    let bump = normalize_h1(&haar_function(grid, &r)?).scale(amplitude);
    let f = base.add(&bump)?;
    let h = h1_norm(&f);
    if h > 1.0 {
        Ok((f.scale(1.0 / h), true))
    } else {
        Ok((f, false))
    }
}
