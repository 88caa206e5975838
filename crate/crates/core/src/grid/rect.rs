use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{OpenSetMask, ProductGrid};
use crate::error::{Error, Result};
use crate::sum::pow2;

/// Default cap on the number of rectangles materialized at once.
pub const DEFAULT_RECTANGLE_CAP: usize = 1 << 22;

/// A dyadic cube of one factor: side `2^{-level}`, corner `coords * 2^{-level}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicCube {
    pub factor: usize,
    pub level: usize,
    pub coords: Vec<usize>,
}

impl DyadicCube {
    pub fn new(factor: usize, level: usize, coords: Vec<usize>) -> Self {
        DyadicCube {
            factor,
            level,
            coords,
        }
    }

    /// The whole factor `[0,1)^{n_i}`.
    pub fn unit(factor: usize, dim: usize) -> Self {
        DyadicCube::new(factor, 0, vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn measure(&self) -> f64 {
        pow2(-((self.dim() * self.level) as i32))
    }

    pub fn validate(&self, grid: &ProductGrid) -> Result<()> {
        grid.check_factor(self.factor)?;
        let i = self.factor;
        if self.coords.len() != grid.factor_dim(i) {
            return Err(Error::invalid(format!(
                "cube {self} has {} coordinates, factor {i} has dimension {}",
                self.coords.len(),
                grid.factor_dim(i)
            )));
        }
        if self.level > grid.depth(i) {
            return Err(Error::LevelOutOfRange {
                factor: i,
                level: self.level,
                max: grid.depth(i),
            });
        }
        if self.coords.iter().any(|&c| c >> self.level != 0) {
            return Err(Error::invalid(format!("cube {self} lies outside the unit cube")));
        }
        Ok(())
    }

    /// Whether the finest local cell `local` of this cube's factor lies in the cube.
    pub fn contains_local(&self, grid: &ProductGrid, local: usize) -> bool {
        let shift = grid.depth(self.factor) - self.level;
        grid.local_coords(self.factor, local)
            .iter()
            .zip(&self.coords)
            .all(|(&c, &q)| c >> shift == q)
    }

    /// Local finest-cell indices of this cube within its factor, ascending.
    pub fn local_cells(&self, grid: &ProductGrid) -> Vec<usize> {
        let i = self.factor;
        let shift = grid.depth(i) - self.level;
        let side = 1usize << shift;
        let n = self.dim();
        let mut out = Vec::with_capacity(side.pow(n as u32));
        let mut offset = vec![0usize; n];
        loop {
            let coords: Vec<usize> = self
                .coords
                .iter()
                .zip(&offset)
                .map(|(&q, &o)| (q << shift) + o)
                .collect();
            out.push(grid.local_from_coords(i, &coords));
            // odometer over the offsets, last coordinate fastest
            let mut k = n;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                offset[k] += 1;
                if offset[k] < side {
                    break;
                }
                offset[k] = 0;
            }
        }
    }

    /// The cube containing this one at a coarser `level`.
    pub fn ancestor(&self, level: usize) -> DyadicCube {
        assert!(level <= self.level);
        let shift = self.level - level;
        DyadicCube::new(
            self.factor,
            level,
            self.coords.iter().map(|c| c >> shift).collect(),
        )
    }

    /// Whether `self ⊆ other` (same factor).
    pub fn is_within(&self, other: &DyadicCube) -> bool {
        self.factor == other.factor && self.level >= other.level && self.ancestor(other.level) == *other
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:(", self.factor, self.level)?;
        for (k, c) in self.coords.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for DyadicCube {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("malformed cube key {s:?}"));
        let mut parts = s.splitn(3, ':');
        let factor = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let level = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let rest = parts.next().ok_or_else(bad)?.trim();
        let inner = rest
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let coords = inner
            .split(',')
            .map(|c| c.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        Ok(DyadicCube::new(factor, level, coords))
    }
}

/// A product of one dyadic cube per factor.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicRectangle {
    pub cubes: Vec<DyadicCube>,
}

impl DyadicRectangle {
    pub fn new(cubes: Vec<DyadicCube>) -> Self {
        DyadicRectangle { cubes }
    }

    /// The whole domain.
    pub fn unit(grid: &ProductGrid) -> Self {
        DyadicRectangle::new(
            (0..grid.d())
                .map(|i| DyadicCube::unit(i, grid.factor_dim(i)))
                .collect(),
        )
    }

    /// Rectangle from per-factor levels and per-factor coordinate lists.
    pub fn from_parts(levels: &[usize], coords: &[Vec<usize>]) -> Self {
        DyadicRectangle::new(
            levels
                .iter()
                .zip(coords)
                .enumerate()
                .map(|(i, (&j, c))| DyadicCube::new(i, j, c.clone()))
                .collect(),
        )
    }

    pub fn measure(&self) -> f64 {
        self.cubes.iter().map(DyadicCube::measure).product()
    }

    pub fn levels(&self) -> Vec<usize> {
        self.cubes.iter().map(|q| q.level).collect()
    }

    pub fn validate(&self, grid: &ProductGrid) -> Result<()> {
        if self.cubes.len() != grid.d() {
            return Err(Error::invalid(format!(
                "rectangle {self} has {} cubes for a {}-parameter grid",
                self.cubes.len(),
                grid.d()
            )));
        }
        for (i, q) in self.cubes.iter().enumerate() {
            if q.factor != i {
                return Err(Error::invalid(format!("rectangle {self}: cube {i} names factor {}", q.factor)));
            }
            q.validate(grid)?;
        }
        Ok(())
    }

    /// Valid, and every cube strictly coarser than the finest level.
    pub fn validate_eligible(&self, grid: &ProductGrid) -> Result<()> {
        self.validate(grid)?;
        if self
            .cubes
            .iter()
            .any(|q| q.level >= grid.depth(q.factor))
        {
            return Err(Error::IneligibleRectangle(self.to_string()));
        }
        Ok(())
    }

    pub fn is_eligible(&self, grid: &ProductGrid) -> bool {
        self.validate_eligible(grid).is_ok()
    }

    pub fn contains_cell(&self, grid: &ProductGrid, cell: usize) -> bool {
        self.cubes
            .iter()
            .all(|q| q.contains_local(grid, grid.factor_local(cell, q.factor)))
    }

    /// Global finest-cell indices covered by the rectangle, ascending.
    pub fn cells(&self, grid: &ProductGrid) -> Vec<usize> {
        let per_factor: Vec<Vec<usize>> = self.cubes.iter().map(|q| q.local_cells(grid)).collect();
        let mut out = vec![0usize];
        for (i, locals) in per_factor.iter().enumerate() {
            let stride = grid.stride(i);
            out = out
                .iter()
                .flat_map(|&base| locals.iter().map(move |&l| base + l * stride))
                .collect();
        }
        out
    }

    /// Drops factor `i`, renumbering the remaining cubes.
    pub fn without(&self, i: usize) -> DyadicRectangle {
        DyadicRectangle::new(
            self.cubes
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i)
                .map(|(_, q)| {
                    let mut q = q.clone();
                    if q.factor > i {
                        q.factor -= 1;
                    }
                    q
                })
                .collect(),
        )
    }

    /// Canonical key `"i:j:(coords)|..."`.
    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for DyadicRectangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, q) in self.cubes.iter().enumerate() {
            if k > 0 {
                write!(f, "|")?;
            }
            write!(f, "{q}")?;
        }
        Ok(())
    }
}

impl FromStr for DyadicRectangle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(DyadicRectangle::new(
            s.split('|').map(str::parse).collect::<Result<Vec<_>>>()?,
        ))
    }
}

impl Serialize for DyadicCube {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DyadicCube {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Serialize for DyadicRectangle {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.key())
    }
}

impl<'de> Deserialize<'de> for DyadicRectangle {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A finite set of Δ-eligible dyadic rectangles over one grid, in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RectangleFamily {
    grid: ProductGrid,
    members: BTreeSet<DyadicRectangle>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyRepr {
    grid: ProductGrid,
    members: Vec<DyadicRectangle>,
}

impl<'de> Deserialize<'de> for RectangleFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = FamilyRepr::deserialize(d)?;
        RectangleFamily::new(repr.grid, repr.members).map_err(serde::de::Error::custom)
    }
}

impl RectangleFamily {
    pub fn empty(grid: ProductGrid) -> Self {
        RectangleFamily {
            grid,
            members: BTreeSet::new(),
        }
    }

    /// Builds a family, validating every member and dropping duplicates.
    pub fn new(grid: ProductGrid, members: impl IntoIterator<Item = DyadicRectangle>) -> Result<Self> {
        let mut family = RectangleFamily::empty(grid);
        for r in members {
            family.insert(r)?;
        }
        Ok(family)
    }

    pub fn insert(&mut self, r: DyadicRectangle) -> Result<bool> {
        r.validate_eligible(&self.grid)?;
        Ok(self.members.insert(r))
    }

    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, r: &DyadicRectangle) -> bool {
        self.members.contains(r)
    }

    pub fn iter(&self) -> impl Iterator<Item = &DyadicRectangle> {
        self.members.iter()
    }

    pub fn members(&self) -> &BTreeSet<DyadicRectangle> {
        &self.members
    }

    pub fn is_subset(&self, other: &RectangleFamily) -> bool {
        self.members.is_subset(&other.members)
    }

    pub fn filter(&self, mut keep: impl FnMut(&DyadicRectangle) -> bool) -> RectangleFamily {
        RectangleFamily {
            grid: self.grid.clone(),
            members: self.members.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a RectangleFamily {
    type Item = &'a DyadicRectangle;
    type IntoIter = std::collections::btree_set::Iter<'a, DyadicRectangle>;

    fn into_iter(self) -> Self::IntoIter {
        self.members.iter()
    }
}

/// Number of Δ-eligible rectangles: `prod_i sum_{j<J_i} 2^{n_i j}`.
pub fn eligible_rectangle_count(grid: &ProductGrid) -> usize {
    (0..grid.d())
        .map(|i| {
            (0..grid.depth(i))
                .map(|j| 1usize << (grid.factor_dim(i) * j))
                .sum::<usize>()
        })
        .product()
}

/// Every Δ-eligible cube of factor `i`, level-major then coordinate-lexicographic.
fn eligible_cubes(grid: &ProductGrid, i: usize) -> Vec<DyadicCube> {
    let n = grid.factor_dim(i);
    let mut out = Vec::new();
    for level in 0..grid.depth(i) {
        let count = 1usize << (n * level);
        let mask = (1usize << level) - 1;
        for idx in 0..count {
            let coords = (0..n)
                .map(|k| (idx >> (level * (n - 1 - k))) & mask)
                .collect();
            out.push(DyadicCube::new(i, level, coords));
        }
    }
    out
}

pub fn enumerate_rectangles(grid: &ProductGrid) -> Result<RectangleFamily> {
    enumerate_rectangles_capped(grid, DEFAULT_RECTANGLE_CAP)
}

/// All Δ-eligible rectangles (cube levels `0..J_i`), refusing more than `cap`.
pub fn enumerate_rectangles_capped(grid: &ProductGrid, cap: usize) -> Result<RectangleFamily> {
    let count = eligible_rectangle_count(grid);
    if count > cap {
        return Err(Error::ResourceLimit {
            what: "rectangle count",
            count,
            cap,
            hint: "",
        });
    }
    let per_factor: Vec<Vec<DyadicCube>> = (0..grid.d()).map(|i| eligible_cubes(grid, i)).collect();
    let mut rects: Vec<Vec<DyadicCube>> = vec![Vec::new()];
    for cubes in &per_factor {
        rects = rects
            .into_iter()
            .flat_map(|prefix| {
                cubes.iter().map(move |q| {
                    let mut r = prefix.clone();
                    r.push(q.clone());
                    r
                })
            })
            .collect();
    }
    Ok(RectangleFamily {
        grid: grid.clone(),
        members: rects.into_iter().map(DyadicRectangle::new).collect(),
    })
}

/// The slice of `family` at the finest cell `local` of factor `i`: every
/// reduced rectangle `R'` such that some `Q_i ∋ x_i` has `Q_i x R' ∈ family`.
pub fn slice_family(family: &RectangleFamily, i: usize, local: usize) -> Result<RectangleFamily> {
    let grid = family.grid();
    let reduced = grid.without(i)?;
    if local >= grid.factor_cells(i) {
        return Err(Error::invalid(format!(
            "cell {local} out of range for factor {i} ({} cells)",
            grid.factor_cells(i)
        )));
    }
    let members = family
        .iter()
        .filter(|r| r.cubes[i].contains_local(grid, local))
        .map(|r| r.without(i))
        .collect();
    Ok(RectangleFamily {
        grid: reduced,
        members,
    })
}

/// Members of `family` lying inside `omega`, optionally with `|R| <= cap`.
pub fn rectangles_in(family: &RectangleFamily, omega: &OpenSetMask, cap: Option<f64>) -> Result<RectangleFamily> {
    family.grid().ensure_same(omega.grid())?;
    if let Some(a) = cap {
        if !(a > 0.0) {
            return Err(Error::invalid(format!("size cap must be positive, got {a}")));
        }
    }
    let grid = family.grid();
    Ok(family.filter(|r| {
        cap.map_or(true, |a| r.measure() <= a) && r.cells(grid).iter().all(|&c| omega.contains(c))
    }))
}
