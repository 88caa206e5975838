//! Square function, dyadic H¹, little bmo, and the dyadic product-BMO packing constant.

mod bmo;
mod flow;
mod packing;
mod search;

pub use bmo::{little_bmo_norm, mean_oscillation, BmoResult};
pub(crate) use bmo::oscillation;
pub use packing::{
    bmo_d_norm_exact, bmo_d_norm_exact_with, exact_cell_cap, packing_energy, packing_ratio,
    PackingMode, PackingResult, RectangleIndex, DEFAULT_EXACT_CAP,
};
pub use search::{bmo_d_norm_search, bmo_d_norm_search_with, shifted_packing, SearchOptions};

use rayon::prelude::*;

use crate::grid::GridFunction;
use crate::martingale::Sweep;

/// `Sf = (Σ_R |Δ_R f|²)^{1/2}` over all eligible `R`.
pub fn square_function(f: &GridFunction) -> GridFunction {
    let grid = f.grid();
    let sweep = Sweep::new(grid);
    let tuples = sweep.level_tuples();
    let per_tuple: Vec<Vec<f64>> = tuples
        .par_iter()
        .map(|levels| {
            let lb = sweep.blocks(f.values(), levels);
            (0..grid.cell_count())
                .map(|c| {
                    let (r, k) = sweep.locate(c, levels);
                    let v = lb.block(r)[k];
                    v * v
                })
                .collect()
        })
        .collect();
    let mut acc = vec![0.0; grid.cell_count()];
    for t in &per_tuple {
        for (a, v) in acc.iter_mut().zip(t) {
            *a += v;
        }
    }
    GridFunction::new(grid.clone(), acc.into_iter().map(f64::sqrt).collect()).expect("finite")
}

/// `‖f‖_{H¹} = ∫ Sf`.
pub fn h1_norm(f: &GridFunction) -> f64 {
    h1_norm_with(f, false)
}

/// As [`h1_norm`], optionally adding `|∫ f|` so constants are not annihilated.
pub fn h1_norm_with(f: &GridFunction, include_grand_average: bool) -> f64 {
    let s = square_function(f).integral();
    if include_grand_average {
        s + f.integral().abs()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ProductGrid;

    #[test]
    fn two_cell_example() {
        let g = ProductGrid::new(vec![1], vec![1]).unwrap();
        let f = GridFunction::new(g.clone(), vec![1.0, 3.0]).unwrap();
        assert_eq!(square_function(&f).values(), &[1.0, 1.0]);
        assert_eq!(h1_norm(&f), 1.0);
        assert_eq!(h1_norm_with(&f, true), 3.0);
        let c = GridFunction::constant(g, 4.0);
        assert_eq!(h1_norm(&c), 0.0);
    }

    #[test]
    fn square_function_l2_is_pure_energy() {
        let g = ProductGrid::new(vec![1, 2], vec![2, 1]).unwrap();
        let f = GridFunction::from_fn(g, |c| ((c * 37 + 11) % 17) as f64 - 8.0);
        let sf = square_function(&f);
        let pure = crate::martingale::decompose(&f).unwrap().pure_energy();
        assert!((sf.l2_norm_sq() - pure).abs() <= 1e-12 * pure);
        assert!(sf.integral() <= sf.l2_norm() * (1.0 + 1e-15));
    }
}
