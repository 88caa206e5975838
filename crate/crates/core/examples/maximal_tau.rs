//! Strong maximal function, the A₁ weight of a small set, and the cutoff τ
//! across a sweep of δ.

use dyadic_hardy::grid::{GridFunction, OpenSetMask, ProductGrid};
use dyadic_hardy::maximal::{a1_weight, strong_maximal, tau_build, TauParams};

fn main() -> dyadic_hardy::Result<()> {
    let grid = ProductGrid::new(vec![1, 1], vec![3, 3])?;
    let e = OpenSetMask::from_cells(grid.clone(), [27, 28, 35, 36])?;
    let m1 = strong_maximal(&GridFunction::indicator(&e));
    println!("M χ_E: min {:.4}, max {:.4}", m1.min(), m1.max());

    let w = a1_weight(&e, &TauParams::default())?;
    println!(
        "A₁ weight: {} terms, c = {}, m ∈ [{:.4}, {:.4}]",
        w.terms_used,
        w.c_used,
        w.m.min(),
        w.m.max()
    );

    println!("   δ     |supp τ|   ‖τ‖_bmo   ‖τ‖_bmo/δ   C₂");
    for delta in [0.5, 0.25, 0.125] {
        let r = tau_build(&e, &TauParams { delta, ..Default::default() })?;
        println!(
            "{delta:6}  {:9.5}  {:8.5}  {:10.5}  {:.3e}",
            r.support_measure,
            r.bmo_norm_measured,
            r.bmo_norm_measured / delta,
            r.c2_measured
        );
    }
    Ok(())
}
