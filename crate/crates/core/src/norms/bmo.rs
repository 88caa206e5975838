use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aligned::{all_rectangles, AlignedRectangle, Prefix, RectClass};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::sum::sum;

/// A little-bmo norm with its maximizing rectangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmoResult {
    pub value: f64,
    pub witness: AlignedRectangle,
}

/// `((1/|R|) ∫_R |f - f_R|^p)^{1/p}` computed directly from the cells of `R`.
pub fn mean_oscillation(f: &GridFunction, r: &AlignedRectangle, p: u32) -> Result<f64> {
    r.validate(f.grid())?;
    let vals: Vec<f64> = r.cells(f.grid()).iter().map(|&c| f.value(c)).collect();
    Ok(oscillation(&vals, p))
}

pub(crate) fn oscillation(vals: &[f64], p: u32) -> f64 {
    let k = vals.len() as f64;
    let mean = sum(vals.iter().copied()) / k;
    match p {
        1 => sum(vals.iter().map(|v| (v - mean).abs())) / k,
        _ => (sum(vals.iter().map(|v| (v - mean) * (v - mean))) / k).sqrt(),
    }
}

/// `sup_R` of the `p`-mean oscillation over the chosen rectangle class.
///
/// `p = 2` scans with summed-area tables and recomputes the winner directly;
/// `p = 1` evaluates every rectangle directly.
pub fn little_bmo_norm(f: &GridFunction, p: u32, class: RectClass) -> Result<BmoResult> {
    if p != 1 && p != 2 {
        return Err(Error::invalid(format!("p must be 1 or 2, got {p}")));
    }
    let grid = f.grid();
    let rects = all_rectangles(grid, class);
    let scores: Vec<f64> = if p == 2 {
        let mean = f.mean();
        let centered: Vec<f64> = f.values().iter().map(|v| v - mean).collect();
        let squares: Vec<f64> = centered.iter().map(|v| v * v).collect();
        let s1 = Prefix::new(grid, &centered);
        let s2 = Prefix::new(grid, &squares);
        rects
            .par_iter()
            .map(|r| {
                let lens = r.lengths(grid);
                let k = lens.iter().product::<usize>() as f64;
                let m = s1.box_sum(&r.start, &lens) / k;
                (s2.box_sum(&r.start, &lens) / k - m * m).max(0.0)
            })
            .collect()
    } else {
        rects
            .par_iter()
            .map(|r| {
                let vals: Vec<f64> = r.cells(grid).iter().map(|&c| f.value(c)).collect();
                oscillation(&vals, 1)
            })
            .collect()
    };
    let mut best = 0;
    for (k, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = k;
        }
    }
    let witness = rects[best].clone();
    let value = mean_oscillation(f, &witness, p)?;
    Ok(BmoResult { value, witness })
}
