//! Built-in generators and the file formats.

use dyadic_hardy::generate::{generate, GeneratorSpec};
use dyadic_hardy::grid::ProductGrid;
use dyadic_hardy::io::{function_from_csv, function_to_csv};
use dyadic_hardy::norms::h1_norm;

fn main() -> dyadic_hardy::Result<()> {
    let grid = ProductGrid::new(vec![1, 1], vec![3, 3])?;
    let specs = [
        r#"{"kind":"constant","value":1}"#,
        r#"{"kind":"haar-atom"}"#,
        r#"{"kind":"random-uniform","lo":0,"hi":2}"#,
        r#"{"kind":"smooth-bump","margin":0.5}"#,
        r#"{"kind":"spike-sequence","member":4}"#,
        r#"{"kind":"h1-bounded-sequence","member":3}"#,
    ];
    for text in specs {
        let spec: GeneratorSpec = serde_json::from_str(text)?;
        let f = generate(&spec, &grid, 42)?.into_function()?;
        println!(
            "{text:48} ∫f = {:8.4}  sup = {:7.4}  h1 = {:.4}",
            f.integral(),
            f.sup_norm(),
            h1_norm(&f)
        );
        let back = function_from_csv(&function_to_csv(&f))?;
        assert_eq!(back, f);
    }
    let mask = generate(&serde_json::from_str(r#"{"kind":"random-mask","density":0.3}"#)?, &grid, 1)?.into_mask()?;
    println!("random mask: {} cells, |Ω| = {}", mask.len(), mask.measure());
    Ok(())
}
