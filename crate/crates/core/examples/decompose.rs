//! Martingale decomposition of a random function on a 3-parameter grid:
//! energies, the Parseval identity, and exact reconstruction.

use dyadic_hardy::generate::random_uniform;
use dyadic_hardy::grid::ProductGrid;
use dyadic_hardy::martingale::{decompose, reconstruct};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dyadic_hardy::Result<()> {
    let grid = ProductGrid::new(vec![1, 2, 1], vec![3, 2, 2])?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = random_uniform(&grid, -1.0, 1.0, &mut rng);

    let d = decompose(&f)?;
    println!("grid: {} cells, {} pure coefficients", grid.cell_count(), d.pure.len());
    println!("‖f‖²          = {:.15}", f.l2_norm_sq());
    println!("pure energy   = {:.15}", d.pure_energy());
    println!("hybrid energy = {:.15}", d.hybrid_energy());
    for (refined, h) in &d.hybrid {
        println!("  hybrid {refined:?}: {:.6}", h.l2_norm_sq());
    }

    let mut top: Vec<_> = d.pure.values().collect();
    top.sort_by(|a, b| b.energy().total_cmp(&a.energy()));
    for c in top.iter().take(3) {
        println!("  {}  energy {:.6}", c.rectangle, c.energy());
    }

    let back = reconstruct(&d)?;
    let err = back.sub(&f)?.sup_norm();
    println!("max reconstruction error = {err:.3e}");
    Ok(())
}
