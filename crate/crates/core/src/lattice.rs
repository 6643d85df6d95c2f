//! Point configurations: integer grids, centered sub-blocks, lattice points
//! on spheres, the doubly exponential grid schedule and uniform thickenings.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        LatticePoint(v)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// How a point set was produced. Carried along so that operations which
/// need a full cube (e.g. [`middle_block`]) can check their input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SetKind {
    /// `{1..side}^d`
    Grid {
        side: u64,
    },
    /// Centered sub-cube `{offset+1 .. offset+side}^d` of a grid.
    Block {
        parent_side: u64,
        side: u64,
        offset: u64,
    },
    /// `{k in Z^d : |k|^2 = r2}`
    Sphere {
        r2: u64,
    },
    Explicit,
}

impl SetKind {
    pub fn label(&self) -> &'static str {
        match self {
            SetKind::Grid { .. } => "grid",
            SetKind::Block { .. } => "block",
            SetKind::Sphere { .. } => "sphere",
            SetKind::Explicit => "explicit",
        }
    }

    /// Side length for cubes, squared radius for spheres, 0 otherwise.
    pub fn side_or_r2(&self) -> u64 {
        match *self {
            SetKind::Grid { side } | SetKind::Block { side, .. } => side,
            SetKind::Sphere { r2 } => r2,
            SetKind::Explicit => 0,
        }
    }
}

/// A finite set of pairwise distinct lattice points of a common dimension.
///
/// Coordinates are stored row-major in one flat buffer; `point(i)` borrows
/// the `i`-th point as a slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticePointSet {
    dim: usize,
    kind: SetKind,
    coords: Vec<i64>,
}

impl LatticePointSet {
    /// Builds an explicit set, rejecting wrong dimensions and duplicates.
    pub fn new(dim: usize, points: Vec<Vec<i64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Range("dimension must be at least 1".into()));
        }
        let mut seen = HashSet::with_capacity(points.len());
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: p.len(),
                });
            }
            if !seen.insert(p.as_slice()) {
                return Err(Error::Degenerate(format!(
                    "duplicate point {}",
                    LatticePoint(p.clone())
                )));
            }
            coords.extend_from_slice(p);
        }
        Ok(Self {
            dim,
            kind: SetKind::Explicit,
            coords,
        })
    }

    fn from_parts(dim: usize, kind: SetKind, coords: Vec<i64>) -> Self {
        debug_assert_eq!(coords.len() % dim, 0);
        Self { dim, kind, coords }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> SetKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[i64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[i64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn to_points(&self) -> Vec<LatticePoint> {
        self.iter().map(|p| LatticePoint(p.to_vec())).collect()
    }

    /// Hash index over the points for membership lookups.
    pub fn index(&self) -> HashSet<&[i64]> {
        self.iter().collect()
    }

    /// Componentwise minimum and maximum, `None` for an empty set.
    pub fn bounding_box(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        let mut it = self.iter();
        let first = it.next()?;
        let (mut lo, mut hi) = (first.to_vec(), first.to_vec());
        for p in it {
            for (i, &c) in p.iter().enumerate() {
                lo[i] = lo[i].min(c);
                hi[i] = hi[i].max(c);
            }
        }
        Some((lo, hi))
    }

    /// Minimum squared distance between two distinct points, `None` when
    /// fewer than two points exist.
    pub fn min_squared_distance(&self) -> Option<i128> {
        let n = self.len();
        if n < 2 {
            return None;
        }
        (0..n)
            .into_par_iter()
            .filter_map(|i| {
                let p = self.point(i);
                ((i + 1)..n)
                    .map(|j| squared_distance(p, self.point(j)))
                    .min()
            })
            .min()
    }

    /// Writes the set as CSV: a `dim,side_or_r2,kind` header record, one
    /// metadata record, then one record of `d` integers per point.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["dim", "side_or_r2", "kind"]).map_err(io)?;
        w.write_record([
            self.dim.to_string(),
            self.kind.side_or_r2().to_string(),
            self.kind.label().to_string(),
        ])
        .map_err(io)?;
        for p in self.iter() {
            w.write_record(p.iter().map(|c| c.to_string()))
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }

    /// Reads a set written by [`write_csv`](Self::write_csv). The kind is
    /// restored for grids and spheres; blocks come back as explicit sets.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .flexible(true)
            .has_headers(true)
            .from_reader(input);
        let mut records = r.records();
        let meta = records
            .next()
            .ok_or_else(|| Error::Parse("missing metadata record".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        if meta.len() != 3 {
            return Err(Error::Parse("metadata record must have 3 fields".into()));
        }
        let dim: usize = meta[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad dim {:?}", &meta[0])))?;
        let tag: u64 = meta[1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad side_or_r2 {:?}", &meta[1])))?;
        let mut points = Vec::new();
        for rec in records {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let p = rec
                .iter()
                .map(|f| f.trim().parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(e.to_string()))?;
            points.push(p);
        }
        let mut set = Self::new(dim, points)?;
        set.kind = match &meta[2] {
            "grid" => SetKind::Grid { side: tag },
            "sphere" => SetKind::Sphere { r2: tag },
            _ => SetKind::Explicit,
        };
        Ok(set)
    }
}

pub(crate) fn squared_distance(a: &[i64], b: &[i64]) -> i128 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as i128 - y as i128;
            d * d
        })
        .sum()
}

/// `{1..side}^d` in lexicographic order.
pub fn generate_grid(d: usize, side: u64) -> Result<LatticePointSet> {
    if d < 2 {
        return Err(Error::Range(format!("dimension {d} < 2")));
    }
    if side < 2 {
        return Err(Error::Range(format!("side {side} < 2")));
    }
    let n = side
        .checked_pow(d as u32)
        .filter(|&n| n <= i64::MAX as u64)
        .ok_or_else(|| Error::Size(format!("{side}^{d} does not fit in 64 bits")))?;
    let total = (n as usize)
        .checked_mul(d)
        .ok_or_else(|| Error::Size(format!("{side}^{d} points of dimension {d}")))?;
    let mut coords = Vec::with_capacity(total);
    let mut cur = vec![1i64; d];
    for _ in 0..n {
        coords.extend_from_slice(&cur);
        for c in cur.iter_mut().rev() {
            if (*c as u64) < side {
                *c += 1;
                break;
            }
            *c = 1;
        }
    }
    Ok(LatticePointSet::from_parts(
        d,
        SetKind::Grid { side },
        coords,
    ))
}

/// Centered sub-cube of side `⌊ρ·m⌋` of the grid `{1..m}^d`.
///
/// The block starts at `⌊(m - b)/2⌋ + 1` in every coordinate, which for
/// `ρ = 1/5` and `5 | m` is `{2m/5 + 1, .., 3m/5}^d`.
pub fn middle_block(grid: &LatticePointSet, fraction: Ratio<u64>) -> Result<LatticePointSet> {
    let m = match grid.kind() {
        SetKind::Grid { side } => side,
        other => {
            return Err(Error::Degenerate(format!(
                "middle_block needs a full grid, got a {} set",
                other.label()
            )))
        }
    };
    if *fraction.numer() == 0 || fraction > Ratio::from_integer(1) {
        return Err(Error::Range(format!(
            "block fraction {fraction} outside (0, 1]"
        )));
    }
    let b = (fraction * Ratio::from_integer(m)).to_integer();
    if b == 0 {
        return Err(Error::Degenerate(format!(
            "block fraction {fraction} of side {m} is empty"
        )));
    }
    let offset = (m - b) / 2;
    let d = grid.dim();
    let count = b.pow(d as u32) as usize;
    let mut coords = Vec::with_capacity(count * d);
    let lo = offset as i64 + 1;
    let hi = (offset + b) as i64;
    let mut cur = vec![lo; d];
    for _ in 0..count {
        coords.extend_from_slice(&cur);
        for c in cur.iter_mut().rev() {
            if *c < hi {
                *c += 1;
                break;
            }
            *c = lo;
        }
    }
    Ok(LatticePointSet::from_parts(
        d,
        SetKind::Block {
            parent_side: m,
            side: b,
            offset,
        },
        coords,
    ))
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r.checked_mul(r).is_none_or(|sq| sq > n) {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|sq| sq <= n) {
        r += 1;
    }
    r
}

/// All `k in Z^d` with `|k|^2 = r2`, in lexicographic order.
pub fn sphere_lattice(d: usize, r2: u64) -> Result<LatticePointSet> {
    if d < 2 {
        return Err(Error::Range(format!("dimension {d} < 2")));
    }
    if r2 == 0 {
        return Err(Error::Range("squared radius must be positive".into()));
    }
    if r2 > i64::MAX as u64 / 2 {
        return Err(Error::Size(format!("squared radius {r2} too large")));
    }
    fn descend(d: usize, rem: u64, cur: &mut Vec<i64>, out: &mut Vec<i64>) {
        if cur.len() + 1 == d {
            if rem == 0 {
                cur.push(0);
                out.extend_from_slice(cur);
                cur.pop();
            } else {
                let r = isqrt(rem);
                if r * r == rem {
                    for x in [-(r as i64), r as i64] {
                        cur.push(x);
                        out.extend_from_slice(cur);
                        cur.pop();
                    }
                }
            }
            return;
        }
        let r = isqrt(rem) as i64;
        for x in -r..=r {
            cur.push(x);
            descend(d, rem - (x * x) as u64, cur, out);
            cur.pop();
        }
    }
    let mut coords = Vec::new();
    descend(d, r2, &mut Vec::with_capacity(d), &mut coords);
    Ok(LatticePointSet::from_parts(
        d,
        SetKind::Sphere { r2 },
        coords,
    ))
}

/// `n` has no repeated prime factor.
pub fn is_square_free(mut n: u64) -> bool {
    if n == 0 {
        return false;
    }
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return false;
            }
        }
        p += 1;
    }
    true
}

/// One level of the nested grid family: `n = 2^{d·2^k}` points on a grid
/// of side `2^{2^k}`, thickened by `n^{-1/s}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridLevel {
    pub k: u32,
    pub side: u64,
    pub n: u64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestedGridSchedule {
    pub d: usize,
    pub s: f64,
    pub start: u32,
    pub levels: Vec<GridLevel>,
}

/// Finite prefix `k = start, .., start + depth - 1` of the nested grid
/// sequence. Fails once `n_k` no longer fits in 64 bits.
pub fn nested_grid_schedule(
    d: usize,
    s: f64,
    start: u32,
    depth: u32,
) -> Result<NestedGridSchedule> {
    if d < 2 {
        return Err(Error::Range(format!("dimension {d} < 2")));
    }
    if !(s > 0.0 && s < d as f64) {
        return Err(Error::Range(format!("s = {s} outside (0, {d})")));
    }
    let mut levels = Vec::with_capacity(depth as usize);
    for k in start..start.saturating_add(depth) {
        let side_bits = 1u64
            .checked_shl(k)
            .filter(|&b| b < 64)
            .ok_or_else(|| Error::Size(format!("side 2^(2^{k}) overflows")))?;
        let n_bits = side_bits * d as u64;
        if n_bits >= 64 {
            return Err(Error::Size(format!(
                "n = 2^{n_bits} at level k = {k} overflows 64 bits"
            )));
        }
        let n = 1u64 << n_bits;
        levels.push(GridLevel {
            k,
            side: 1u64 << side_bits,
            n,
            radius: (n as f64).powf(-1.0 / s),
        });
    }
    Ok(NestedGridSchedule {
        d,
        s,
        start,
        levels,
    })
}

/// Uniform thickening of a point set: each atom carries mass `1/N` spread
/// over a ball of radius `N^{-1/s}` around its scaled position.
#[derive(Debug, Clone)]
pub struct WeightedPointMeasure {
    pub base: LatticePointSet,
    /// Exact factor mapping integer offsets into `[0,1]^d`.
    pub scale: Ratio<i64>,
    pub s: f64,
    pub radius: f64,
    pub mass_per_atom: f64,
    /// Minimum scaled pairwise distance (infinite for a single atom).
    pub min_separation: f64,
    pub separated: bool,
}

impl WeightedPointMeasure {
    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn scale_f64(&self) -> f64 {
        *self.scale.numer() as f64 / *self.scale.denom() as f64
    }

    /// Scaled position of atom `i`, measured from the set's minimum corner.
    pub fn position(&self, i: usize) -> Vec<f64> {
        let (lo, _) = self.base.bounding_box().expect("non-empty measure");
        let sc = self.scale_f64();
        self.base
            .point(i)
            .iter()
            .zip(&lo)
            .map(|(&c, &l)| (c - l) as f64 * sc)
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass_per_atom * self.len() as f64
    }
}

/// Builds the uniform thickening `μ_P^s`.
///
/// The set is placed in `[0,1]^d` by translating its minimum corner to the
/// origin and multiplying by `scale`; the extent check is exact.
pub fn thicken(
    points: &LatticePointSet,
    s: f64,
    scale: Ratio<i64>,
) -> Result<WeightedPointMeasure> {
    let d = points.dim();
    if !(s > 0.0 && s < d as f64) {
        return Err(Error::Range(format!("s = {s} outside (0, {d})")));
    }
    if *scale.numer() <= 0 {
        return Err(Error::Range(format!("scale {scale} must be positive")));
    }
    let (lo, hi) = points
        .bounding_box()
        .ok_or_else(|| Error::Empty("cannot thicken an empty set".into()))?;
    let extent = lo.iter().zip(&hi).map(|(l, h)| h - l).max().unwrap_or(0);
    if Ratio::from_integer(extent) * scale > Ratio::from_integer(1) {
        return Err(Error::Range(format!(
            "scaled extent {extent}·{scale} exceeds the unit cube"
        )));
    }
    let n = points.len();
    let radius = (n as f64).powf(-1.0 / s);
    let sc = *scale.numer() as f64 / *scale.denom() as f64;
    let min_separation = points
        .min_squared_distance()
        .map_or(f64::INFINITY, |d2| (d2 as f64).sqrt() * sc);
    Ok(WeightedPointMeasure {
        base: points.clone(),
        scale,
        s,
        radius,
        mass_per_atom: 1.0 / n as f64,
        min_separation,
        separated: min_separation >= radius,
    })
}
