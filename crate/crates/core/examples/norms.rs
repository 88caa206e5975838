//! Square function, dyadic H¹ norm, and little bmo of a few test functions.

use dyadic_hardy::aligned::RectClass;
use dyadic_hardy::generate::{haar_function, normalize_h1, smooth_bump, BumpSpec};
use dyadic_hardy::grid::{DyadicRectangle, GridFunction, ProductGrid};
use dyadic_hardy::norms::{h1_norm, little_bmo_norm, square_function};

fn main() -> dyadic_hardy::Result<()> {
    let grid = ProductGrid::new(vec![1, 1], vec![4, 4])?;
    let r = DyadicRectangle::from_parts(&[1, 2], &[vec![1], vec![2]]);
    let atom = normalize_h1(&haar_function(&grid, &r)?);
    let bump = smooth_bump(&grid, &BumpSpec::default())?;
    let log = GridFunction::sample(grid.clone(), |x| -(x[0] * x[1] + 1e-3).ln());

    for (name, f) in [("atom", &atom), ("bump", &bump), ("log", &log)] {
        let s = square_function(f);
        let osc = little_bmo_norm(f, 2, RectClass::Aligned)?;
        let osc_dyadic = little_bmo_norm(f, 2, RectClass::Dyadic)?;
        println!(
            "{name:>5}: h1 = {:.6}  max S = {:.4}  bmo(aligned) = {:.4}  bmo(dyadic) = {:.4}",
            h1_norm(f),
            s.max(),
            osc.value,
            osc_dyadic.value
        );
    }
    Ok(())
}
