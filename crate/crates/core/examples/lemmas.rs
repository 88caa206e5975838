//! Randomized certificates for the slicing inequality, the pigeonhole split,
//! the truncated packing bound, and the max-of-bmo step.

use dyadic_hardy::verify::{lemma_b_fixture, trials};

fn main() -> dyadic_hardy::Result<()> {
    let n = 100;
    let mut worst = 0.0f64;
    for s in 0..n {
        let r = trials::lemma_a_trial(s)?;
        assert!(r.passed());
        worst = worst.max(r.lhs / r.rhs.max(f64::MIN_POSITIVE));
    }
    println!("slicing: {n} trials, worst lhs/rhs = {worst:.4}");

    let uncovered: usize = (0..n).map(|s| trials::split_trial(s).map(|r| r.uncovered.len())).sum::<Result<_, _>>()?;
    println!("split: {n} trials, {uncovered} uncovered rectangles");

    let mut worst = 0.0f64;
    for s in 0..n {
        let (r, base) = trials::lemma_b_trial(s)?;
        assert!(r.passed() && base.map_or(true, |b| b.ok));
        worst = worst.max(r.lhs / r.rhs);
    }
    println!("truncated packing: {n} trials, worst lhs/rhs = {worst:.4}");

    let fx = lemma_b_fixture()?.check()?;
    println!("fixture: lhs {:.6} ≤ rhs {:.6}", fx.lhs, fx.rhs);

    let r = trials::abs_bmo_trial(1)?;
    println!("max of two: {:.4} ≤ {:.4}, witness {}", r.lhs, r.rhs, r.witness);
    Ok(())
}
