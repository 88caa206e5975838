//! Seeded random instances for Monte-Carlo certification runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    check_abs_bmo, check_lemma_a, check_lemma_b, lemma_b_base_case, split_family, BaseCaseReport,
    InequalityReport, SplitReport,
};
use crate::error::Result;
use crate::generate::{haar_function, random_mask, random_uniform, smooth_bump, BumpSpec};
use crate::grid::{enumerate_rectangles, GridFunction, OpenSetMask, ProductGrid, RectangleFamily};

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random grid with `d` factors (`n_i ∈ {1,2}`, `J_i ∈ 1..=max_depth`) and
/// at most `2^{max_log2}` cells.
pub fn random_grid(rng: &mut impl Rng, d: usize, max_depth: usize, max_log2: usize) -> ProductGrid {
    loop {
        let dims: Vec<usize> = (0..d).map(|_| if rng.gen_bool(0.25) { 2 } else { 1 }).collect();
        let depths: Vec<usize> = (0..d).map(|_| rng.gen_range(1..=max_depth)).collect();
        let log2: usize = dims.iter().zip(&depths).map(|(n, j)| n * j).sum();
        if log2 <= max_log2 {
            return ProductGrid::new(dims, depths).expect("valid by construction");
        }
    }
}

/// Each eligible rectangle independently with probability `p`.
pub fn random_family(grid: &ProductGrid, p: f64, rng: &mut impl Rng) -> RectangleFamily {
    let all = enumerate_rectangles(grid).expect("desk-scale grid");
    all.filter(|_| rng.gen_bool(p))
}

pub fn lemma_a_trial(seed: u64) -> Result<InequalityReport> {
    let mut rng = rng_for(seed);
    let d = rng.gen_range(2..=3);
    let grid = random_grid(&mut rng, d, 3, 8);
    let f = random_uniform(&grid, -1.0, 1.0, &mut rng);
    let p = rng.gen_range(0.05..0.6);
    let family = random_family(&grid, p, &mut rng);
    let i = rng.gen_range(0..d);
    check_lemma_a(&f, &family, i)
}

pub fn split_trial(seed: u64) -> Result<SplitReport> {
    let mut rng = rng_for(seed);
    let d = rng.gen_range(2..=3);
    let grid = random_grid(&mut rng, d, 3, 9);
    let alpha = f64::powf(2.0, -rng.gen_range(0.5..grid.log2_cell_count() as f64));
    let p = rng.gen_range(0.1..0.9);
    let family = random_family(&grid, p, &mut rng).filter(|r| r.measure() < alpha);
    split_family(&family, alpha)
}

/// A random `b` with `‖b‖_∞ ≤ 1`, drawn from several shapes.
fn random_b(grid: &ProductGrid, rng: &mut impl Rng) -> GridFunction {
    match rng.gen_range(0..5) {
        0 => GridFunction::constant(grid.clone(), rng.gen_range(-1.0..1.0)),
        1 => {
            let rects: Vec<_> = enumerate_rectangles(grid).expect("desk scale").iter().cloned().collect();
            let r = rects.choose(rng).expect("nonempty");
            haar_function(grid, r).expect("eligible")
        }
        2 => random_uniform(grid, -1.0, 1.0, rng),
        3 => {
            let freq: Vec<f64> = (0..grid.total_dim()).map(|_| rng.gen_range(0.0..3.0)).collect();
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            GridFunction::sample(grid.clone(), |x| {
                let t: f64 = x.iter().zip(&freq).map(|(a, b)| a * b).sum();
                (std::f64::consts::TAU * t + phase).cos()
            })
        }
        _ => {
            let amp = rng.gen_range(0.0..0.2);
            let base = rng.gen_range(-0.8..0.8);
            GridFunction::from_fn(grid.clone(), |_| base + amp * rng.gen_range(-1.0..1.0))
        }
    }
}

fn random_omega(grid: &ProductGrid, rng: &mut impl Rng) -> OpenSetMask {
    match rng.gen_range(0..3) {
        0 => OpenSetMask::full(grid.clone()),
        1 => random_mask(grid, rng.gen_range(0.2..0.9), rng),
        _ => {
            let rects: Vec<_> = enumerate_rectangles(grid).expect("desk scale").iter().cloned().collect();
            let mut m = OpenSetMask::empty(grid.clone());
            for _ in 0..rng.gen_range(1..=3) {
                for c in rects.choose(rng).expect("nonempty").cells(grid) {
                    m.insert(c);
                }
            }
            m
        }
    }
}

/// A hypothesis-satisfying Lemma B instance; the base-case chain is included when `d = 1`.
pub fn lemma_b_trial(seed: u64) -> Result<(InequalityReport, Option<BaseCaseReport>)> {
    let mut rng = rng_for(seed);
    let d = rng.gen_range(1..=2);
    let grid = random_grid(&mut rng, d, 4, 8);
    let lo = rng.gen_range(0.0..0.4);
    let hi = rng.gen_range(0.6..1.0);
    let margin = rng.gen_range(0.3..0.9);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let phi = smooth_bump(&grid, &BumpSpec { lo, hi, margin })?.scale(sign);
    let b = random_b(&grid, &mut rng);
    let omega = random_omega(&grid, &mut rng);
    let alpha = if rng.gen_bool(0.5) {
        f64::powi(2.0, -rng.gen_range(1..=grid.log2_cell_count() as i32))
    } else {
        rng.gen_range(0.01..0.99)
    };
    let report = check_lemma_b(&phi, &b, &omega, alpha)?;
    let base = if d == 1 {
        Some(lemma_b_base_case(&phi, &b, &omega, alpha)?)
    } else {
        None
    };
    Ok((report, base))
}

pub fn abs_bmo_trial(seed: u64) -> Result<InequalityReport> {
    let mut rng = rng_for(seed);
    let depths = [(2, 2), (2, 3), (3, 2), (3, 3)][rng.gen_range(0..4)];
    let grid = ProductGrid::new(vec![1, 1], vec![depths.0, depths.1])?;
    let shift_f = rng.gen_range(-0.5..0.5);
    let shift_g = rng.gen_range(-0.5..0.5);
    let f = random_uniform(&grid, -1.0 + shift_f, 1.0 + shift_f, &mut rng);
    let g = random_uniform(&grid, -1.0 + shift_g, 1.0 + shift_g, &mut rng);
    check_abs_bmo(&f, &g)
}
