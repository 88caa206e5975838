//! The packing (product BMO) norm: exact enumeration against the seeded
//! search, and the search on a translated lattice.

use dyadic_hardy::generate::random_uniform;
use dyadic_hardy::grid::ProductGrid;
use dyadic_hardy::norms::{bmo_d_norm_exact, bmo_d_norm_search, shifted_packing, SearchOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dyadic_hardy::Result<()> {
    let grid = ProductGrid::new(vec![1, 1], vec![2, 2])?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..5 {
        let f = random_uniform(&grid, -1.0, 1.0, &mut rng);
        let exact = bmo_d_norm_exact(&f)?;
        let search = bmo_d_norm_search(&f, 8, k)?;
        println!(
            "exact {:.12} on {:?}   search {:.12} on {:?}",
            exact.value,
            exact.witness.cells(),
            search.value,
            search.witness.cells()
        );
    }

    let big = ProductGrid::new(vec![1, 1], vec![5, 5])?;
    let f = random_uniform(&big, -1.0, 1.0, &mut rng);
    let opts = SearchOptions::default();
    match bmo_d_norm_exact(&f) {
        Ok(_) => unreachable!(),
        Err(e) => println!("{} cells: {e}", big.cell_count()),
    }
    for shift in [[0i64, 0], [1, 0], [3, 5]] {
        let r = shifted_packing(&f, &shift, &opts)?;
        println!("shift {shift:?}: {:.6} (|Ω| = {})", r.value, r.witness.measure());
    }
    Ok(())
}
