//! The strong maximal function over grid-aligned rectangles, its iterates,
//! the A₁ weight `m = K⁻¹ Σ_k c^k M^{(k)} χ_E`, and the cutoff
//! `τ = max(0, 1 + δ log m)`.
//!
//! Rectangle sums are taken in exact fixed point (`i128`), so every average is
//! a deterministic function of the integer box sum and the cell count. A naive
//! loop that forms the same sums directly agrees bit for bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aligned::{Prefix, RectClass};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, OpenSetMask, ProductGrid};
use crate::norms::little_bmo_norm;
use crate::sum::sum;

/// Bits of headroom kept free in the `i128` accumulators.
const ACC_BITS: i32 = 124;

/// Nonnegative values as integers times a common power of two.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPoint {
    pub values: Vec<i128>,
    pub exponent: i32,
}

/// `|v| = mantissa · 2^exp` with an integer mantissa below `2^53`.
fn split(v: f64) -> (u64, i32) {
    let bits = v.abs().to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    }
}

/// `x · 2^e` without intermediate overflow or underflow of the scale factor.
pub(crate) fn ldexp(mut x: f64, mut e: i32) -> f64 {
    while e > 1000 {
        x *= f64::powi(2.0, 1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= f64::powi(2.0, -1000);
        e += 1000;
    }
    x * f64::powi(2.0, e)
}

/// Quantizes `|v|` for every entry. Exact unless the dynamic range exceeds
/// what fits beside the cell count in an `i128`, in which case the smallest
/// values are rounded.
pub fn quantize(values: &[f64]) -> FixedPoint {
    let parts: Vec<(u64, i32)> = values.iter().map(|&v| split(v)).collect();
    let nonzero = parts.iter().filter(|p| p.0 != 0);
    let (Some(lo), Some(hi)) = (
        nonzero.clone().map(|p| p.1).min(),
        nonzero.map(|p| p.1 + 53).max(),
    ) else {
        return FixedPoint {
            values: vec![0; values.len()],
            exponent: 0,
        };
    };
    let count_bits = usize::BITS as i32 - values.len().leading_zeros() as i32;
    let exponent = lo.max(hi + count_bits - ACC_BITS);
    let values = parts
        .iter()
        .map(|&(m, e)| {
            if m == 0 {
                0
            } else if e >= exponent {
                (m as i128) << (e - exponent)
            } else {
                let s = exponent - e;
                if s >= 64 {
                    0
                } else {
                    ((m as i128) + (1i128 << (s - 1))) >> s
                }
            }
        })
        .collect();
    FixedPoint { values, exponent }
}

/// The average `sum · 2^exponent / count`, rounded the same way everywhere.
pub fn mean_from_sum(sum: i128, count: usize, exponent: i32) -> f64 {
    let n = count as i128;
    let q = sum / n;
    let r = sum % n;
    ldexp(q as f64 + r as f64 / count as f64, exponent)
}

/// `Mf(x) = max` over aligned rectangles `R ∋ x` of the average of `|f|` on `R`.
pub fn strong_maximal(f: &GridFunction) -> GridFunction {
    let grid = f.grid();
    let fixed = quantize(f.values());
    let table = Prefix::new(grid, &fixed.values);
    let sizes = grid.axis_sizes();
    let factors = grid.axis_factors();
    let tuples = side_tuples(grid);
    let out = tuples
        .par_iter()
        .fold(
            || vec![0.0f64; grid.cell_count()],
            |mut acc, side| {
                let lens: Vec<usize> = factors.iter().map(|&i| side[i]).collect();
                let window = window_max(&table, &sizes, &lens, fixed.exponent);
                for (a, w) in acc.iter_mut().zip(window) {
                    if w > *a {
                        *a = w;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0.0f64; grid.cell_count()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    if y > *x {
                        *x = y;
                    }
                }
                a
            },
        );
    GridFunction::new(grid.clone(), out).expect("finite averages")
}

/// Every per-factor side tuple `(s_1..s_d)`, `1 ≤ s_i ≤ 2^{J_i}`.
fn side_tuples(grid: &ProductGrid) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for i in 0..grid.d() {
        let top = 1usize << grid.depth(i);
        out = out
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                (1..=top).map(move |s| {
                    let mut p = p.clone();
                    p.push(s);
                    p
                })
            })
            .collect();
    }
    out
}

/// For one rectangle shape: the largest average over placements covering each cell.
fn window_max(table: &Prefix<i128>, sizes: &[usize], lens: &[usize], exponent: i32) -> Vec<f64> {
    let n = sizes.len();
    let count: usize = lens.iter().product();
    let mut dims: Vec<usize> = sizes.iter().zip(lens).map(|(s, l)| s - l + 1).collect();
    let corners: usize = dims.iter().product();
    let mut data = Vec::with_capacity(corners);
    let mut pos = vec![0usize; n];
    for _ in 0..corners {
        data.push(mean_from_sum(table.box_sum(&pos, lens), count, exponent));
        for a in (0..n).rev() {
            pos[a] += 1;
            if pos[a] < dims[a] {
                break;
            }
            pos[a] = 0;
        }
    }
    for a in 0..n {
        data = expand_axis(&data, &dims, a, sizes[a], lens[a]);
        dims[a] = sizes[a];
    }
    data
}

/// Along axis `a`: `out[x] = max { data[c] : c ≤ x < c + len }`.
fn expand_axis(data: &[f64], dims: &[usize], a: usize, size: usize, len: usize) -> Vec<f64> {
    let inner: usize = dims[a + 1..].iter().product();
    let outer: usize = dims[..a].iter().product();
    let d = dims[a];
    let mut out = vec![0.0; outer * size * inner];
    let mut deque = std::collections::VecDeque::with_capacity(d);
    for o in 0..outer {
        for i in 0..inner {
            let at = |c: usize| data[(o * d + c) * inner + i];
            deque.clear();
            let mut next = 0;
            for x in 0..size {
                // admit corners c <= x, retire corners c < x + 1 - len
                while next < d && next <= x {
                    while deque.back().is_some_and(|&b| at(b) <= at(next)) {
                        deque.pop_back();
                    }
                    deque.push_back(next);
                    next += 1;
                }
                while deque.front().is_some_and(|&f| f + len <= x) {
                    deque.pop_front();
                }
                out[(o * size + x) * inner + i] = at(*deque.front().expect("window is never empty"));
            }
        }
    }
    out
}

/// `M^{(k)} f`.
pub fn iterate_maximal(f: &GridFunction, k: usize) -> GridFunction {
    let mut g = f.abs();
    for _ in 0..k {
        g = strong_maximal(&g);
    }
    g
}

/// Parameters of the A₁ series and the cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TauParams {
    pub delta: f64,
    pub c: f64,
    pub tol: f64,
    pub kmax: usize,
    pub q: f64,
}

impl Default for TauParams {
    fn default() -> Self {
        TauParams {
            delta: 0.25,
            c: 0.5,
            tol: 1e-10,
            kmax: 60,
            q: 0.9,
        }
    }
}

impl TauParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.delta > 0.0
            && self.c > 0.0
            && self.c < 1.0
            && self.tol > 0.0
            && self.q > 0.0
            && self.q < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "need δ > 0, 0 < c < 1, tol > 0, 0 < q < 1; got {self:?}"
            )))
        }
    }
}

/// The weight `m` and how the series was truncated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A1Weight {
    pub m: GridFunction,
    pub terms_used: usize,
    pub c_used: f64,
    pub halvings: usize,
    /// `‖M^{(k+1)}χ_E‖₂ / ‖M^{(k)}χ_E‖₂` for each iterate computed.
    pub contraction_ratios: Vec<f64>,
}

/// `m = K⁻¹ Σ_{k≤k*} c^k M^{(k)} χ_E`, `K = Σ_{k≤k*} c^k`.
///
/// `c` is halved while `c · ‖M^{(k+1)}χ_E‖₂ / ‖M^{(k)}χ_E‖₂ > q`. The series
/// stops at the first `k` with `c^k ‖M^{(k)}χ_E‖_∞ < tol`, or at `kmax`.
pub fn a1_weight(e: &OpenSetMask, params: &TauParams) -> Result<A1Weight> {
    params.validate()?;
    if e.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut c = params.c;
    let mut halvings = 0;
    let mut ratios = Vec::new();
    let mut iterates = vec![GridFunction::indicator(e)];
    loop {
        let k = iterates.len() - 1;
        if c.powi(k as i32) * iterates[k].sup_norm() < params.tol || k == params.kmax {
            break;
        }
        let next = strong_maximal(&iterates[k]);
        let ratio = next.l2_norm() / iterates[k].l2_norm();
        ratios.push(ratio);
        while c * ratio > params.q {
            c /= 2.0;
            halvings += 1;
            if halvings > 40 {
                return Err(Error::ContractionFailure {
                    ratio,
                    c,
                    q: params.q,
                });
            }
        }
        iterates.push(next);
    }
    let weights: Vec<f64> = (0..iterates.len()).map(|k| c.powi(k as i32)).collect();
    let norm = sum(weights.iter().copied());
    let grid = e.grid().clone();
    let m = GridFunction::from_fn(grid, |x| {
        sum(iterates.iter().zip(&weights).map(|(it, w)| w * it.value(x))) / norm
    });
    Ok(A1Weight {
        m,
        terms_used: iterates.len(),
        c_used: c,
        halvings,
        contraction_ratios: ratios,
    })
}

fn little_bmo_norm_aligned(f: &GridFunction) -> Result<f64> {
    Ok(little_bmo_norm(f, 2, RectClass::Aligned)?.value)
}

/// Everything measured while building `τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauReport {
    pub tau: GridFunction,
    pub m: GridFunction,
    pub delta: f64,
    pub set_measure: f64,
    /// `‖τ‖_bmo`, p = 2, aligned rectangles.
    pub bmo_norm_measured: f64,
    pub support_measure: f64,
    pub terms_used: usize,
    pub c_used: f64,
    pub contraction_ratios: Vec<f64>,
    pub m_l2: f64,
    /// `C` in `‖m‖₂ = C |E|^{1/2}`.
    pub l2_constant: f64,
    /// `C² e^{2/δ} |E|`, which bounds `|supp τ|` by Chebyshev.
    pub chebyshev_bound: f64,
    /// `|supp τ| / (e^{2/δ} |E|)`.
    pub c2_measured: f64,
    /// `‖log m‖_bmo` (p = 2, aligned) when `m > 0` everywhere.
    pub log_m_bmo: Option<f64>,
    /// `max Mm / m` when `m > 0` everywhere.
    pub a1_constant: Option<f64>,
}

/// `τ = max(0, 1 + δ log m)` for the A₁ weight of `E`.
pub fn tau_build(e: &OpenSetMask, params: &TauParams) -> Result<TauReport> {
    let w = a1_weight(e, params)?;
    let delta = params.delta;
    let tau = w.m.map(|v| (1.0 + delta * v.ln()).max(0.0));
    let support_measure = tau.support().measure();
    let set_measure = e.measure();
    let m_l2 = w.m.l2_norm();
    let l2_constant = m_l2 / set_measure.sqrt();
    let growth = (2.0 / delta).exp() * set_measure;
    let positive = w.m.min() > 0.0;
    let (log_m_bmo, a1_constant) = if positive {
        (
            Some(little_bmo_norm_aligned(&w.m.map(f64::ln))?),
            Some(check_a1(&w.m)?),
        )
    } else {
        (None, None)
    };
    Ok(TauReport {
        bmo_norm_measured: little_bmo_norm_aligned(&tau)?,
        tau,
        m: w.m,
        delta,
        set_measure,
        support_measure,
        terms_used: w.terms_used,
        c_used: w.c_used,
        contraction_ratios: w.contraction_ratios,
        m_l2,
        l2_constant,
        chebyshev_bound: l2_constant * l2_constant * growth,
        c2_measured: support_measure / growth,
        log_m_bmo,
        a1_constant,
    })
}

/// The empirical A₁ constant `max_x Mw(x) / w(x)`.
pub fn check_a1(w: &GridFunction) -> Result<f64> {
    if let Some(cell) = w.values().iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NonPositiveWeight {
            cell,
            value: w.value(cell),
        });
    }
    let mw = strong_maximal(w);
    Ok(mw
        .values()
        .iter()
        .zip(w.values())
        .map(|(a, b)| a / b)
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line4() -> ProductGrid {
        ProductGrid::new(vec![1], vec![2]).unwrap()
    }

    #[test]
    fn indicator_of_first_cell() {
        let f = GridFunction::new(line4(), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let mf = strong_maximal(&f);
        assert_eq!(mf.values(), &[1.0, 0.5, 1.0 / 3.0, 0.25]);
        assert_eq!(strong_maximal(&f.scale(-1.0)), mf);
        let c = GridFunction::constant(line4(), 0.7);
        assert_eq!(strong_maximal(&c), c);
    }

    #[test]
    fn two_term_series() {
        let e = OpenSetMask::from_cells(line4(), [0]).unwrap();
        let p = TauParams {
            kmax: 1,
            ..TauParams::default()
        };
        let w = a1_weight(&e, &p).unwrap();
        assert_eq!(w.terms_used, 2);
        assert_eq!(w.c_used, 0.5);
        let expect = [1.0, 1.0 / 6.0, 1.0 / 9.0, 1.0 / 12.0];
        for (a, b) in w.m.values().iter().zip(expect) {
            assert!((a - b).abs() <= 1e-15, "{a} vs {b}");
        }
        assert_eq!(w.m.value(0), 1.0);
    }

    #[test]
    fn full_set_gives_unit_weight() {
        let e = OpenSetMask::full(line4());
        let w = a1_weight(&e, &TauParams::default()).unwrap();
        assert!(w.m.values().iter().all(|&v| v == 1.0));
        assert_eq!(check_a1(&w.m).unwrap(), 1.0);
    }

    #[test]
    fn quantize_is_exact_for_moderate_range() {
        let v = [0.1, 3.0, 0.0, -2.5e-7];
        let q = quantize(&v);
        for (x, &n) in v.iter().zip(&q.values) {
            assert_eq!(mean_from_sum(n, 1, q.exponent), x.abs());
        }
    }

    #[test]
    fn a1_rejects_nonpositive() {
        let w = GridFunction::new(line4(), vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(matches!(check_a1(&w), Err(Error::NonPositiveWeight { cell: 1, .. })));
    }
}
