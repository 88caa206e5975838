//! Pairings against a smooth bump along an H¹-bounded sequence (which
//! converges) and along L¹-normalized spikes (which do not).

use dyadic_hardy::verify::{theorem_demo, SequenceKind, TheoremRunConfig};

fn main() -> dyadic_hardy::Result<()> {
    for sequence in [SequenceKind::H1Bounded, SequenceKind::Spike] {
        let report = theorem_demo(&TheoremRunConfig {
            sequence,
            ..Default::default()
        })?;
        println!("{sequence:?}: burn-in {:?}, φ(x0) = {:.4}", report.burn_in, report.phi_at_x0);
        println!("   n     h1        gap       |E_n|     t1        t2        t3");
        for m in &report.members {
            let t = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.2e}"));
            println!(
                "{:4}  {:8.4}  {:.2e}  {:.2e}  {:>8}  {:>8}  {:>8}",
                m.n,
                m.h1_norm,
                m.gap,
                m.e_measure,
                t(m.t1),
                t(m.t2),
                t(m.t3)
            );
        }
        println!("converged: {}\n", report.converged);
    }
    Ok(())
}
