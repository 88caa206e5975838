//! Brute-force reference computations shared by the integration tests.
//! Everything here works from cell coordinates alone.

#![allow(dead_code)]

use dyadic_hardy::grid::{DyadicRectangle, GridFunction, ProductGrid};
use rand::Rng;

/// Every grid with at most `2^max_log2` cells, `n_i ≤ 2`, up to four factors.
pub fn all_grids(max_log2: usize) -> Vec<ProductGrid> {
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<usize>, Vec<usize>, usize)> = vec![(vec![], vec![], 0)];
    while let Some((dims, depths, used)) = stack.pop() {
        if !dims.is_empty() {
            out.push(ProductGrid::new(dims.clone(), depths.clone()).unwrap());
        }
        if dims.len() == 4 {
            continue;
        }
        for n in 1..=2 {
            for j in 1.. {
                if used + n * j > max_log2 {
                    break;
                }
                let mut d2 = dims.clone();
                d2.push(n);
                let mut j2 = depths.clone();
                j2.push(j);
                stack.push((d2, j2, used + n * j));
            }
        }
    }
    out.sort_by_key(|g| (g.cell_count(), g.d(), g.factor_dims().to_vec(), g.depths().to_vec()));
    out
}

pub fn random_values(grid: &ProductGrid, rng: &mut impl Rng) -> GridFunction {
    GridFunction::from_fn(grid.clone(), |_| rng.gen_range(-1.0..1.0))
}

/// Axis ranges `[lo, lo + len)` of a dyadic rectangle, or of a child box.
fn axis_box(grid: &ProductGrid, levels: &[usize], coords: &[Vec<usize>]) -> (Vec<usize>, Vec<usize>) {
    let mut lo = Vec::new();
    let mut len = Vec::new();
    for i in 0..grid.d() {
        let side = 1usize << (grid.depth(i) - levels[i]);
        for &c in &coords[i] {
            lo.push(c * side);
            len.push(side);
        }
    }
    (lo, len)
}

fn in_box(x: &[usize], lo: &[usize], len: &[usize]) -> bool {
    x.iter().zip(lo).zip(len).all(|((&x, &l), &n)| x >= l && x < l + n)
}

pub fn box_mean(f: &GridFunction, lo: &[usize], len: &[usize]) -> f64 {
    let grid = f.grid();
    let mut s = 0.0;
    let mut k = 0usize;
    for c in 0..grid.cell_count() {
        if in_box(&grid.cell_coords(c), lo, len) {
            s += f.value(c);
            k += 1;
        }
    }
    s / k as f64
}

/// `‖Δ_R f‖₂²` by inclusion–exclusion over which factors are refined.
pub fn delta_energy(f: &GridFunction, r: &DyadicRectangle) -> f64 {
    let grid = f.grid();
    let d = grid.d();
    let levels: Vec<usize> = r.cubes.iter().map(|q| q.level).collect();
    let coords: Vec<Vec<usize>> = r.cubes.iter().map(|q| q.coords.clone()).collect();
    let (lo, len) = axis_box(grid, &levels, &coords);
    let mut energy = 0.0;
    for c in 0..grid.cell_count() {
        let x = grid.cell_coords(c);
        if !in_box(&x, &lo, &len) {
            continue;
        }
        let mut v = 0.0;
        for s in 0..(1usize << d) {
            let mut lv = levels.clone();
            let mut cs = coords.clone();
            let mut axis = 0;
            for i in 0..d {
                let n = grid.factor_dim(i);
                if s >> i & 1 == 1 {
                    lv[i] += 1;
                    let side = 1usize << (grid.depth(i) - lv[i]);
                    cs[i] = (0..n).map(|a| x[axis + a] / side).collect();
                }
                axis += n;
            }
            let (blo, blen) = axis_box(grid, &lv, &cs);
            let sign = if (d - s.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
            v += sign * box_mean(f, &blo, &blen);
        }
        energy += v * v;
    }
    energy * grid.cell_volume()
}

/// All rectangles admitting a difference operator.
pub fn eligible_rectangles(grid: &ProductGrid) -> Vec<DyadicRectangle> {
    let mut out: Vec<(Vec<usize>, Vec<Vec<usize>>)> = vec![(vec![], vec![])];
    for i in 0..grid.d() {
        let n = grid.factor_dim(i);
        let mut next = Vec::new();
        for (lv, cs) in &out {
            for j in 0..grid.depth(i) {
                let per = 1usize << j;
                for k in 0..per.pow(n as u32) {
                    let coords: Vec<usize> = (0..n).map(|a| (k / per.pow((n - 1 - a) as u32)) % per).collect();
                    let mut lv2 = lv.clone();
                    lv2.push(j);
                    let mut cs2 = cs.clone();
                    cs2.push(coords);
                    next.push((lv2, cs2));
                }
            }
        }
        out = next;
    }
    out.iter().map(|(lv, cs)| DyadicRectangle::from_parts(lv, cs)).collect()
}

/// `Σ_{R ⊂ Ω} ‖Δ_R f‖₂² / |Ω|` with `Ω` given by its cells.
pub fn packing_ratio(f: &GridFunction, cells: &[usize]) -> f64 {
    let grid = f.grid();
    let inside = |r: &DyadicRectangle| {
        let levels: Vec<usize> = r.cubes.iter().map(|q| q.level).collect();
        let coords: Vec<Vec<usize>> = r.cubes.iter().map(|q| q.coords.clone()).collect();
        let (lo, len) = axis_box(grid, &levels, &coords);
        (0..grid.cell_count())
            .filter(|&c| in_box(&grid.cell_coords(c), &lo, &len))
            .all(|c| cells.contains(&c))
    };
    let e: f64 = eligible_rectangles(grid)
        .iter()
        .filter(|r| inside(r))
        .map(|r| delta_energy(f, r))
        .sum();
    e / (cells.len() as f64 * grid.cell_volume())
}

/// Exact maximum of the packing ratio over all nonempty cell sets (≤ 16 cells).
pub fn brute_force_packing(f: &GridFunction) -> f64 {
    let grid = f.grid();
    let m = grid.cell_count();
    assert!(m <= 16);
    let rects = eligible_rectangles(grid);
    let masks: Vec<(u32, f64)> = rects
        .iter()
        .map(|r| {
            let mask = r.cells(grid).iter().fold(0u32, |a, &c| a | 1 << c);
            (mask, delta_energy(f, r))
        })
        .collect();
    let mut best = 0.0f64;
    for s in 1u32..(1 << m) {
        let e: f64 = masks.iter().filter(|(k, _)| k & s == *k).map(|(_, e)| e).sum();
        best = best.max(e / (s.count_ones() as f64 * grid.cell_volume()));
    }
    best
}

/// Strong maximal function by looping over every rectangle and every cell,
/// with averages formed from exact integer sums.
pub fn naive_maximal(f: &GridFunction) -> Vec<f64> {
    use dyadic_hardy::maximal::{mean_from_sum, quantize};
    let grid = f.grid();
    let fixed = quantize(f.values());
    let sizes = grid.axis_sizes();
    let factors = grid.axis_factors();
    let coords: Vec<Vec<usize>> = (0..grid.cell_count()).map(|c| grid.cell_coords(c)).collect();
    // per factor: every (start per axis, side)
    let mut shapes: Vec<(Vec<usize>, Vec<usize>)> = vec![(vec![], vec![])];
    for i in 0..grid.d() {
        let size = 1usize << grid.depth(i);
        let axes: Vec<usize> = (0..sizes.len()).filter(|&a| factors[a] == i).collect();
        let mut next = Vec::new();
        for (lo, len) in &shapes {
            for side in 1..=size {
                let per = size - side + 1;
                for k in 0..per.pow(axes.len() as u32) {
                    let mut lo2 = lo.clone();
                    let mut len2 = len.clone();
                    for a in 0..axes.len() {
                        lo2.push((k / per.pow((axes.len() - 1 - a) as u32)) % per);
                        len2.push(side);
                    }
                    next.push((lo2, len2));
                }
            }
        }
        shapes = next;
    }
    let mut out = vec![0.0f64; grid.cell_count()];
    for (lo, len) in &shapes {
        let members: Vec<usize> = (0..grid.cell_count()).filter(|&c| in_box(&coords[c], lo, len)).collect();
        let s: i128 = members.iter().map(|&c| fixed.values[c]).sum();
        let avg = mean_from_sum(s, members.len(), fixed.exponent);
        for &c in &members {
            if avg > out[c] {
                out[c] = avg;
            }
        }
    }
    out
}

/// The `±1` tensor Haar function of `r` (one-dimensional factors only).
pub fn tensor_haar(grid: &ProductGrid, r: &DyadicRectangle) -> GridFunction {
    GridFunction::from_fn(grid.clone(), |c| {
        let x = grid.cell_coords(c);
        let mut v = 1.0;
        for (i, q) in r.cubes.iter().enumerate() {
            assert_eq!(grid.factor_dim(i), 1);
            let side = 1usize << (grid.depth(i) - q.level);
            let lo = q.coords[0] * side;
            if x[i] < lo || x[i] >= lo + side {
                return 0.0;
            }
            v *= if x[i] < lo + side / 2 { 1.0 } else { -1.0 };
        }
        v
    })
}
