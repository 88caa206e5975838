//! Numerical certificates for the slicing inequality, the pigeonhole split,
//! the truncated packing bound, the max-of-bmo step, and the convergence demo.

mod theorem;
pub mod trials;

pub use theorem::{theorem_demo, MemberReport, PackingCheck, SequenceKind, TheoremReport, TheoremRunConfig};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::aligned::{all_rectangles, RectClass};
use crate::error::{Error, Result};
use crate::grid::{
    slice_family, DyadicCube, DyadicRectangle, GridFunction, OpenSetMask, RectangleFamily,
};
use crate::martingale::delta_r;
use crate::norms::{little_bmo_norm, packing_energy};
use crate::sum::{pow2, sum, Neumaier};

/// Relative slack allowed when comparing the two sides.
pub const SLACK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub label: String,
    pub ok: bool,
    pub value: f64,
}

impl Hypothesis {
    fn at_most(label: &str, value: f64, bound: f64) -> Self {
        Hypothesis {
            label: label.to_string(),
            ok: value <= bound,
            value,
        }
    }
}

/// `lhs ≤ rhs` with the data that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub hypotheses: Vec<Hypothesis>,
    pub witness: serde_json::Value,
}

impl InequalityReport {
    fn new(check: &str, lhs: f64, rhs: f64, hypotheses: Vec<Hypothesis>, witness: serde_json::Value) -> Self {
        InequalityReport {
            check: check.to_string(),
            lhs,
            rhs,
            slack: rhs - lhs,
            hypotheses,
            witness,
        }
    }

    pub fn hypotheses_ok(&self) -> bool {
        self.hypotheses.iter().all(|h| h.ok)
    }

    pub fn inequality_holds(&self) -> bool {
        self.lhs <= self.rhs + SLACK_TOL * self.rhs.max(1.0)
    }

    pub fn passed(&self) -> bool {
        self.inequality_holds() && self.hypotheses_ok()
    }
}

fn energy_sum<'a>(f: &GridFunction, rects: impl Iterator<Item = &'a DyadicRectangle>) -> Result<f64> {
    let mut acc = Neumaier::new();
    for r in rects {
        acc.add(delta_r(f, r)?.energy());
    }
    Ok(acc.value())
}

/// `Σ_{R∈F} ‖Δ_R f‖₂² ≤ ∫ Σ_{R'∈F_{x_i}} ‖Δ_{R'} f(x_i, ·)‖₂² dx_i`.
pub fn check_lemma_a(f: &GridFunction, family: &RectangleFamily, i: usize) -> Result<InequalityReport> {
    let grid = f.grid();
    grid.ensure_same(family.grid())?;
    grid.check_factor(i)?;
    if grid.d() < 2 {
        return Err(Error::NeedsMultiparameter(grid.d()));
    }
    let lhs = energy_sum(f, family.iter())?;
    let vol = grid.factor_cell_volume(i);
    let mut rhs = Neumaier::new();
    for x in 0..grid.factor_cells(i) {
        let sliced = slice_family(family, i, x)?;
        if sliced.is_empty() {
            continue;
        }
        let fx = f.slice(i, x)?;
        rhs.add(vol * energy_sum(&fx, sliced.iter())?);
    }
    Ok(InequalityReport::new(
        "lemma-a",
        lhs,
        rhs.value(),
        Vec::new(),
        json!({ "factor": i, "family_size": family.len() }),
    ))
}

/// The pigeonhole split `F = F¹ ∪ … ∪ F^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub alpha: f64,
    /// `N_i = (n - n_i) / n`.
    pub exponents: Vec<f64>,
    /// `α^{N_i}`.
    pub thresholds: Vec<f64>,
    /// `F^i = {R ∈ F : |R'_i| < α^{N_i}}`, `R'_i` being `R` with factor `i` removed.
    pub families: Vec<RectangleFamily>,
    pub uncovered: Vec<DyadicRectangle>,
}

impl SplitReport {
    pub fn covered(&self) -> bool {
        self.uncovered.is_empty()
    }
}

pub fn split_family(family: &RectangleFamily, alpha: f64) -> Result<SplitReport> {
    let grid = family.grid();
    if grid.d() < 2 {
        return Err(Error::NeedsMultiparameter(grid.d()));
    }
    if let Some(r) = family.iter().find(|r| r.measure() >= alpha) {
        return Err(Error::Precondition(format!(
            "|R| = {} is not below α = {alpha} for R = {r}",
            r.measure()
        )));
    }
    let n = grid.total_dim() as f64;
    let exponents: Vec<f64> = (0..grid.d()).map(|i| (n - grid.factor_dim(i) as f64) / n).collect();
    let thresholds: Vec<f64> = exponents.iter().map(|&e| alpha.powf(e)).collect();
    let families: Vec<RectangleFamily> = (0..grid.d())
        .map(|i| family.filter(|r| r.measure() / r.cubes[i].measure() < thresholds[i]))
        .collect();
    let uncovered = family
        .iter()
        .filter(|r| families.iter().all(|fi| !fi.contains(r)))
        .cloned()
        .collect();
    Ok(SplitReport {
        alpha,
        exponents,
        thresholds,
        families,
        uncovered,
    })
}

/// Per factor: max over cells of `Σ_{axes of i} |φ(x + e_a) - φ(x)| / h_i`.
pub fn gradient_bounds(phi: &GridFunction) -> Vec<f64> {
    let grid = phi.grid();
    let sizes = grid.axis_sizes();
    let factors = grid.axis_factors();
    let mut out = vec![0.0f64; grid.d()];
    for c in 0..grid.cell_count() {
        let coords = grid.cell_coords(c);
        let mut per = vec![0.0f64; grid.d()];
        for a in 0..sizes.len() {
            if coords[a] + 1 < sizes[a] {
                let mut next = coords.clone();
                next[a] += 1;
                let diff = phi.value(grid.cell_from_coords(&next)) - phi.value(c);
                per[factors[a]] += diff.abs() / grid.cell_side(factors[a]);
            }
        }
        for (o, p) in out.iter_mut().zip(per) {
            *o = o.max(p);
        }
    }
    out
}

fn factorial(d: usize) -> f64 {
    (1..=d).map(|k| k as f64).product()
}

/// `Σ_{R⊂Ω, |R|≤α} ‖Δ_R(φb)‖₂² ≤ 2 d! (‖b‖²_bmo + α^{2/n}) |Ω|`.
///
/// Hypotheses are evaluated and reported; the inequality is computed regardless.
pub fn check_lemma_b(phi: &GridFunction, b: &GridFunction, omega: &OpenSetMask, alpha: f64) -> Result<InequalityReport> {
    let grid = phi.grid();
    grid.ensure_same(b.grid())?;
    grid.ensure_same(omega.grid())?;
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("α must be positive, got {alpha}")));
    }
    let mut hyps = vec![
        Hypothesis::at_most("sup|phi| <= 1", phi.sup_norm(), 1.0),
        Hypothesis::at_most("sup|b| <= 1", b.sup_norm(), 1.0),
    ];
    for (i, g) in gradient_bounds(phi).into_iter().enumerate() {
        hyps.push(Hypothesis::at_most(&format!("grad_{i} phi l1 <= 1"), g, 1.0));
    }
    hyps.push(Hypothesis {
        label: "alpha < 1".into(),
        ok: alpha < 1.0,
        value: alpha,
    });
    let d = grid.d();
    let n = grid.total_dim() as f64;
    let bmo = little_bmo_norm(b, 2, RectClass::Aligned)?.value;
    let product = phi.mul(b)?;
    let lhs = packing_energy(&product, omega, Some(alpha))?;
    let constant = 2.0 * factorial(d);
    let rhs = constant * (bmo * bmo + alpha.powf(2.0 / n)) * omega.measure();
    Ok(InequalityReport::new(
        "lemma-b",
        lhs,
        rhs,
        hyps,
        json!({
            "d": d,
            "n": grid.total_dim(),
            "alpha": alpha,
            "constant": constant,
            "bmo_b": bmo,
            "omega_measure": omega.measure(),
        }),
    ))
}

/// One maximal dyadic cube of the one-parameter argument and the chain of
/// quantities bounding its packing energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeChain {
    pub cube: DyadicCube,
    pub measure: f64,
    /// `Σ_{Q⊂Q_0} ‖Δ_Q(φb)‖₂²`.
    pub energy: f64,
    /// `∫_{Q_0} |φb - (φb)_{Q_0}|²`.
    pub variance: f64,
    /// `∫_{Q_0} |φb - φ_{Q_0} b_{Q_0}|²`.
    pub split_variance: f64,
    /// `∫_{Q_0} |φb - φ b_{Q_0}|²`.
    pub b_term: f64,
    /// `∫_{Q_0} |b_{Q_0}(φ - φ_{Q_0})|²`.
    pub phi_term: f64,
    /// `osc₂(b, Q_0)² |Q_0|`.
    pub b_bound: f64,
    /// `α^{2/n_1} |Q_0|`.
    pub phi_bound: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseCaseReport {
    pub alpha: f64,
    pub bmo_b: f64,
    pub cubes: Vec<CubeChain>,
    /// Packing energy of `φb` over `R ⊂ Ω`, `|R| ≤ α`.
    pub total_energy: f64,
    /// `Σ` of the per-cube energies; equals `total_energy`.
    pub chain_energy: f64,
    pub ok: bool,
}

/// Maximal dyadic cubes of `Ω` (one-parameter grid) with measure at most `α`.
pub fn maximal_cubes(omega: &OpenSetMask, alpha: f64) -> Result<Vec<DyadicCube>> {
    let grid = omega.grid();
    if grid.d() != 1 {
        return Err(Error::invalid("maximal cube decomposition needs a one-parameter grid"));
    }
    let depth = grid.depth(0);
    let n = grid.factor_dim(0);
    let mut covered = vec![false; grid.cell_count()];
    let mut out = Vec::new();
    for level in 0..=depth {
        let q_measure = pow2(-((n * level) as i32));
        if q_measure > alpha {
            continue;
        }
        for k in 0..(1usize << (n * level)) {
            let coords: Vec<usize> = (0..n).map(|a| (k >> (level * (n - 1 - a))) & ((1 << level) - 1)).collect();
            let q = DyadicCube::new(0, level, coords);
            let cells = q.local_cells(grid);
            if cells.iter().all(|&c| omega.contains(c) && !covered[c]) {
                for c in cells {
                    covered[c] = true;
                }
                out.push(q);
            }
        }
    }
    Ok(out)
}

/// The one-parameter argument cube by cube: energy equals the variance on
/// `Q_0`, which is at most the variance about `φ_{Q_0} b_{Q_0}`, at most twice
/// the sum of the `b` and `φ` terms, each under its own bound.
pub fn lemma_b_base_case(phi: &GridFunction, b: &GridFunction, omega: &OpenSetMask, alpha: f64) -> Result<BaseCaseReport> {
    let grid = phi.grid();
    grid.ensure_same(b.grid())?;
    grid.ensure_same(omega.grid())?;
    let n1 = grid.factor_dim(0) as f64;
    let bmo = little_bmo_norm(b, 2, RectClass::Aligned)?.value;
    let pb = phi.mul(b)?;
    let vol = grid.cell_volume();
    let tol = |x: f64| 1e-12 * x.abs().max(1e-300) + 1e-300;
    let mut cubes = Vec::new();
    for q in maximal_cubes(omega, alpha)? {
        let cells = q.local_cells(grid);
        let measure = q.measure();
        let mean = |g: &GridFunction| sum(cells.iter().map(|&c| g.value(c))) / cells.len() as f64;
        let (pb_q, phi_q, b_q) = (mean(&pb), mean(phi), mean(b));
        let integral = |h: &dyn Fn(usize) -> f64| sum(cells.iter().map(|&c| h(c))) * vol;
        let energy = if q.level < grid.depth(0) {
            let r = DyadicRectangle::new(vec![q.clone()]);
            let inside: Vec<DyadicRectangle> = crate::grid::enumerate_rectangles(grid)?
                .iter()
                .filter(|s| s.cubes[0].is_within(&r.cubes[0]))
                .cloned()
                .collect();
            energy_sum(&pb, inside.iter())?
        } else {
            0.0
        };
        let variance = integral(&|c| (pb.value(c) - pb_q).powi(2));
        let split_variance = integral(&|c| (pb.value(c) - phi_q * b_q).powi(2));
        let b_term = integral(&|c| (pb.value(c) - phi.value(c) * b_q).powi(2));
        let phi_term = integral(&|c| (b_q * (phi.value(c) - phi_q)).powi(2));
        let b_bound = integral(&|c| (b.value(c) - b_q).powi(2));
        let phi_bound = alpha.powf(2.0 / n1) * measure;
        let ok = (energy - variance).abs() <= tol(variance).max(1e-15 * measure)
            && variance <= split_variance + tol(split_variance)
            && split_variance <= 2.0 * (b_term + phi_term) + tol(split_variance)
            && b_term <= b_bound + tol(b_bound)
            && b_bound <= bmo * bmo * measure + tol(b_bound)
            && phi_term <= phi_bound + tol(phi_bound);
        cubes.push(CubeChain {
            cube: q,
            measure,
            energy,
            variance,
            split_variance,
            b_term,
            phi_term,
            b_bound,
            phi_bound,
            ok,
        });
    }
    let total_energy = packing_energy(&pb, omega, Some(alpha))?;
    let chain_energy = sum(cubes.iter().map(|c| c.energy));
    let ok = cubes.iter().all(|c| c.ok) && (total_energy - chain_energy).abs() <= 1e-12 * total_energy.max(1e-300);
    Ok(BaseCaseReport {
        alpha,
        bmo_b: bmo,
        cubes,
        total_energy,
        chain_energy,
        ok,
    })
}

/// Per aligned rectangle `osc₁(|f|) ≤ 2 osc₁(f)` (for `f` and `g`), and
/// `‖max(f,g)‖_bmo ≤ (‖f‖_bmo + ‖g‖_bmo + ‖|f-g|‖_bmo) / 2`, all with `p = 1`.
///
/// The witness records how often the factor-one version `osc₁(|f|) ≤ osc₁(f)` held.
pub fn check_abs_bmo(f: &GridFunction, g: &GridFunction) -> Result<InequalityReport> {
    let grid = f.grid();
    grid.ensure_same(g.grid())?;
    let rects = all_rectangles(grid, RectClass::Aligned);
    let mut violations2 = 0usize;
    let mut holds1 = 0usize;
    let mut worst = 0.0f64;
    let osc = |h: &GridFunction, cells: &[usize]| {
        let vals: Vec<f64> = cells.iter().map(|&c| h.value(c)).collect();
        crate::norms::oscillation(&vals, 1)
    };
    let (fa, ga) = (f.abs(), g.abs());
    for r in &rects {
        let cells = r.cells(grid);
        for (h, ha) in [(f, &fa), (g, &ga)] {
            let (o, oa) = (osc(h, &cells), osc(ha, &cells));
            if oa > 2.0 * o + 1e-12 * o.max(1e-300) + 1e-300 {
                violations2 += 1;
            }
            if oa <= o * (1.0 + 1e-12) + 1e-300 {
                holds1 += 1;
            }
            if o > 0.0 {
                worst = worst.max(oa / o);
            }
        }
    }
    let bmo1 = |h: &GridFunction| little_bmo_norm(h, 1, RectClass::Aligned).map(|r| r.value);
    let mx = f.zip_with(g, f64::max)?;
    let diff = f.sub(g)?.abs();
    let lhs = bmo1(&mx)?;
    let (bf, bg, bd) = (bmo1(f)?, bmo1(g)?, bmo1(&diff)?);
    let rhs = (bf + bg + bd) / 2.0;
    let checked = 2 * rects.len();
    Ok(InequalityReport::new(
        "abs-bmo",
        lhs,
        rhs,
        vec![Hypothesis {
            label: "osc1(|h|) <= 2 osc1(h) on every aligned rectangle".into(),
            ok: violations2 == 0,
            value: violations2 as f64,
        }],
        json!({
            "rectangles": rects.len(),
            "factor_one_pass_rate": holds1 as f64 / checked as f64,
            "worst_ratio": worst,
            "bmo_f": bf,
            "bmo_g": bg,
            "bmo_abs_diff": bd,
        }),
    ))
}

/// A stored `(φ, b, Ω, α)` instance for the truncated packing bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaBFixture {
    pub phi: GridFunction,
    pub b: GridFunction,
    pub omega: OpenSetMask,
    pub alpha: f64,
}

impl LemmaBFixture {
    pub fn check(&self) -> Result<InequalityReport> {
        check_lemma_b(&self.phi, &self.b, &self.omega, self.alpha)
    }
}

/// The shipped two-parameter instance: default bump, an oscillating `b`, and
/// `Ω` a union of two overlapping rectangles on the 8×8 grid.
pub fn lemma_b_fixture() -> Result<LemmaBFixture> {
    let grid = crate::grid::ProductGrid::new(vec![1, 1], vec![3, 3])?;
    let phi = crate::generate::smooth_bump(&grid, &Default::default())?;
    let b = GridFunction::sample(grid.clone(), |x| {
        (std::f64::consts::TAU * (2.0 * x[0] + x[1])).cos() * 0.75
    });
    let mut omega = OpenSetMask::empty(grid.clone());
    for r in [
        DyadicRectangle::from_parts(&[1, 2], &[vec![0], vec![1]]),
        DyadicRectangle::from_parts(&[2, 1], &[vec![1], vec![0]]),
    ] {
        for c in r.cells(&grid) {
            omega.insert(c);
        }
    }
    Ok(LemmaBFixture {
        phi,
        b,
        omega,
        alpha: 0.125,
    })
}
