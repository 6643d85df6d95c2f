//! Angle counting over vertex-marked configurations `(q, {p, r})`.
//!
//! Every routine here loops over vertices in parallel and combines integer
//! partial counts, so results are identical for any worker count.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_angles::{self, AngleKey};
use crate::lattice::{squared_distance, LatticePoint, LatticePointSet, WeightedPointMeasure};

/// Largest set accepted by [`brute_force_census`].
pub const DEFAULT_BRUTE_CAP: usize = 600;
/// Largest set accepted by the per-vertex counters.
pub const DEFAULT_VERTEX_CAP: usize = 40_000;
/// Slack added on both sides of a cosine window.
pub const WINDOW_GUARD: f64 = 1e-12;

/// Number of configurations `(q, {p, r})` with `p, q, r` pairwise distinct:
/// `N(N-1)(N-2)/2`.
pub fn total_configurations(n: usize) -> u128 {
    if n < 3 {
        return 0;
    }
    let n = n as u128;
    n * (n - 1) * (n - 2) / 2
}

fn check_cap(what: &'static str, points: &LatticePointSet, cap: usize) -> Result<()> {
    if points.len() > cap {
        return Err(Error::Cap {
            what,
            n: points.len(),
            cap,
        });
    }
    Ok(())
}

/// Rays from one vertex to every other point, with exact squared norms.
struct Rays {
    dim: usize,
    coords: Vec<i64>,
    norms: Vec<u128>,
    small: bool,
}

impl Rays {
    fn from_vertex(points: &LatticePointSet, q: usize) -> Result<Self> {
        let dim = points.dim();
        let vertex = points.point(q);
        let mut coords = Vec::with_capacity((points.len() - 1) * dim);
        let mut norms = Vec::with_capacity(points.len() - 1);
        let mut max_abs = 0u64;
        for (i, p) in points.iter().enumerate() {
            if i == q {
                continue;
            }
            for (&a, &b) in p.iter().zip(vertex) {
                let c = a.checked_sub(b).ok_or(Error::Overflow)?;
                max_abs = max_abs.max(c.unsigned_abs());
                coords.push(c);
            }
            norms.push(exact_angles::squared_norm(&coords[coords.len() - dim..])?);
        }
        // dot products fit in i64 when d·max² < 2^62
        let small = (max_abs as u128)
            .checked_mul(max_abs as u128)
            .and_then(|m| m.checked_mul(dim as u128))
            .is_some_and(|m| m < 1u128 << 62);
        Ok(Self {
            dim,
            coords,
            norms,
            small,
        })
    }

    fn len(&self) -> usize {
        self.norms.len()
    }

    fn ray(&self, i: usize) -> &[i64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn dot(&self, i: usize, j: usize) -> Result<i128> {
        let (u, v) = (self.ray(i), self.ray(j));
        if self.small {
            Ok(u.iter().zip(v).map(|(&a, &b)| a * b).sum::<i64>() as i128)
        } else {
            exact_angles::dot(u, v)
        }
    }

    fn key(&self, i: usize, j: usize) -> Result<AngleKey> {
        AngleKey::from_dot_and_norms(self.dot(i, j)?, self.norms[i], self.norms[j])
    }

    fn cosine(&self, i: usize, j: usize) -> Result<f64> {
        let dot = self.dot(i, j)?;
        // orthogonal rays give exactly 0.0
        Ok(dot as f64 / ((self.norms[i] as f64) * (self.norms[j] as f64)).sqrt())
    }
}

/// Per-key configuration counts for one point set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CensusReport {
    pub n_points: usize,
    pub total: u128,
    pub counts: BTreeMap<AngleKey, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusSummary {
    pub n_points: usize,
    pub total: u128,
    pub distinct_keys: usize,
    pub max_key: Option<AngleKey>,
    pub max_count: u64,
}

impl CensusReport {
    pub fn distinct_keys(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, key: &AngleKey) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn sum_counts(&self) -> u128 {
        self.counts.values().map(|&c| c as u128).sum()
    }

    pub fn summary(&self) -> CensusSummary {
        let max = max_repetition(self).ok();
        CensusSummary {
            n_points: self.n_points,
            total: self.total,
            distinct_keys: self.distinct_keys(),
            max_key: max.map(|m| m.0),
            max_count: max.map_or(0, |m| m.1),
        }
    }

    /// `angle_key,count` rows in key order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["angle_key", "count"]).map_err(io)?;
        for (k, c) in &self.counts {
            w.write_record([k.to_string(), c.to_string()]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }

    fn from_counts(n_points: usize, counts: BTreeMap<AngleKey, u64>) -> Self {
        let report = Self {
            n_points,
            total: total_configurations(n_points),
            counts,
        };
        debug_assert_eq!(report.sum_counts(), report.total);
        report
    }
}

fn merge(a: HashMap<AngleKey, u64>, b: HashMap<AngleKey, u64>) -> HashMap<AngleKey, u64> {
    let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    for (k, c) in small {
        *big.entry(k).or_insert(0) += c;
    }
    big
}

/// Exhaustive census: every configuration is classified with
/// [`exact_angles::angle_key`] directly from the three points.
pub fn brute_force_census(points: &LatticePointSet) -> Result<CensusReport> {
    brute_force_census_with_cap(points, DEFAULT_BRUTE_CAP)
}

pub fn brute_force_census_with_cap(points: &LatticePointSet, cap: usize) -> Result<CensusReport> {
    check_cap("brute-force census", points, cap)?;
    let n = points.len();
    let counts = (0..n)
        .into_par_iter()
        .map(|q| -> Result<HashMap<AngleKey, u64>> {
            let mut local = HashMap::new();
            let vertex = points.point(q);
            for p in (0..n).filter(|&p| p != q) {
                for r in ((p + 1)..n).filter(|&r| r != q) {
                    let key = exact_angles::angle_key(vertex, points.point(p), points.point(r))?;
                    *local.entry(key).or_insert(0) += 1;
                }
            }
            Ok(local)
        })
        .try_reduce(HashMap::new, |a, b| Ok(merge(a, b)))?;
    Ok(CensusReport::from_counts(n, counts.into_iter().collect()))
}

/// Full census on the per-vertex path (precomputed rays and norms).
pub fn vertex_census(points: &LatticePointSet) -> Result<CensusReport> {
    vertex_census_with_cap(points, DEFAULT_VERTEX_CAP)
}

pub fn vertex_census_with_cap(points: &LatticePointSet, cap: usize) -> Result<CensusReport> {
    check_cap("vertex census", points, cap)?;
    let n = points.len();
    let counts = (0..n)
        .into_par_iter()
        .map(|q| -> Result<HashMap<AngleKey, u64>> {
            let rays = Rays::from_vertex(points, q)?;
            let mut local = HashMap::new();
            for i in 0..rays.len() {
                for j in (i + 1)..rays.len() {
                    *local.entry(rays.key(i, j)?).or_insert(0) += 1;
                }
            }
            Ok(local)
        })
        .try_reduce(HashMap::new, |a, b| Ok(merge(a, b)))?;
    Ok(CensusReport::from_counts(n, counts.into_iter().collect()))
}

fn per_vertex_sum<F>(points: &LatticePointSet, cap: usize, what: &'static str, f: F) -> Result<u64>
where
    F: Fn(&Rays, usize, usize) -> Result<bool> + Sync,
{
    check_cap(what, points, cap)?;
    if points.len() < 3 {
        return Ok(0);
    }
    (0..points.len())
        .into_par_iter()
        .map(|q| -> Result<u64> {
            let rays = Rays::from_vertex(points, q)?;
            let mut c = 0u64;
            for i in 0..rays.len() {
                for j in (i + 1)..rays.len() {
                    if f(&rays, i, j)? {
                        c += 1;
                    }
                }
            }
            Ok(c)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Number of configurations whose angle equals `key`.
pub fn count_key(points: &LatticePointSet, key: &AngleKey) -> Result<u64> {
    count_key_with_cap(points, key, DEFAULT_VERTEX_CAP)
}

pub fn count_key_with_cap(points: &LatticePointSet, key: &AngleKey, cap: usize) -> Result<u64> {
    if key.is_right() {
        return count_right_with_cap(points, cap);
    }
    let (num, den) = (key.num(), key.den());
    per_vertex_sum(points, cap, "count_key", |rays, i, j| {
        let dot = rays.dot(i, j)?;
        if dot.signum() as i8 != key.sign() {
            return Ok(false);
        }
        // dot^2 · den == num · |u|^2 |v|^2, falling back to reduction on overflow
        let lhs = dot
            .unsigned_abs()
            .checked_pow(2)
            .and_then(|d2| d2.checked_mul(den));
        let rhs = rays.norms[i]
            .checked_mul(rays.norms[j])
            .and_then(|nn| nn.checked_mul(num));
        match (lhs, rhs) {
            (Some(l), Some(r)) => Ok(l == r),
            _ => Ok(rays.key(i, j)? == *key),
        }
    })
}

/// Number of right-angle configurations, by exact zero dot products.
pub fn count_right(points: &LatticePointSet) -> Result<u64> {
    count_right_with_cap(points, DEFAULT_VERTEX_CAP)
}

pub fn count_right_with_cap(points: &LatticePointSet, cap: usize) -> Result<u64> {
    per_vertex_sum(points, cap, "count_right", |rays, i, j| {
        Ok(rays.dot(i, j)? == 0)
    })
}

/// Integer pieces of a windowed mass: unordered configurations with the
/// cosine inside the window, and ordered `(vertex, x = y)` pairs, which
/// have cosine 1 and count once each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowCounts {
    pub pairs: u64,
    pub coincident: u64,
}

impl WindowCounts {
    /// Ordered-triple count: each unordered pair counts twice.
    pub fn ordered(&self) -> u64 {
        2 * self.pairs + self.coincident
    }
}

pub fn in_window(cos: f64, t: f64, eps: f64) -> bool {
    cos >= t - eps - WINDOW_GUARD && cos <= t + eps + WINDOW_GUARD
}

pub fn window_counts(points: &LatticePointSet, t: f64, eps: f64) -> Result<WindowCounts> {
    if !(eps > 0.0) {
        return Err(Error::Range(format!("eps = {eps} must be positive")));
    }
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::Range(format!("t = {t} outside [-1, 1]")));
    }
    let n = points.len() as u64;
    let pairs = per_vertex_sum(points, DEFAULT_VERTEX_CAP, "windowed_mass", |rays, i, j| {
        Ok(in_window(rays.cosine(i, j)?, t, eps))
    })?;
    let coincident = if in_window(1.0, t, eps) && n >= 2 {
        n * (n - 1)
    } else {
        0
    };
    Ok(WindowCounts { pairs, coincident })
}

/// `μ×μ×μ` mass of ordered triples `(x, y, z)`, `x ≠ z`, `y ≠ z`, whose
/// cosine at `z` lies in `[t - eps, t + eps]`.
pub fn windowed_mass(measure: &WeightedPointMeasure, t: f64, eps: f64) -> Result<f64> {
    let counts = window_counts(&measure.base, t, eps)?;
    Ok(counts.ordered() as f64 * measure.mass_per_atom.powi(3))
}

/// Spheres centered at points of `Q`, through points of `Q`, with all their
/// points from `P`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SphereDecomposition {
    pub entries: BTreeMap<(LatticePoint, u64), Vec<LatticePoint>>,
    pub p_size: usize,
    pub q_size: usize,
}

impl SphereDecomposition {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `Σ_σ m_σ`
    pub fn total_members(&self) -> u64 {
        self.entries.values().map(|m| m.len() as u64).sum()
    }
}

pub fn build_sphere_decomposition(
    p: &LatticePointSet,
    q: &LatticePointSet,
) -> Result<SphereDecomposition> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let p_index = p.index();
    if let Some(missing) = q.iter().find(|x| !p_index.contains(x)) {
        return Err(Error::NotSubset(format!(
            "{} is in Q but not in P",
            LatticePoint(missing.to_vec())
        )));
    }
    let per_center: Vec<Vec<((LatticePoint, u64), Vec<LatticePoint>)>> = (0..q.len())
        .into_par_iter()
        .map(|ci| {
            let c = q.point(ci);
            let radii: HashSet<i128> = q
                .iter()
                .filter(|x| *x != c)
                .map(|x| squared_distance(x, c))
                .collect();
            let mut spheres: BTreeMap<u64, Vec<LatticePoint>> = BTreeMap::new();
            for x in p.iter() {
                let r2 = squared_distance(x, c);
                if r2 > 0 && radii.contains(&r2) {
                    spheres
                        .entry(r2 as u64)
                        .or_default()
                        .push(LatticePoint(x.to_vec()));
                }
            }
            spheres
                .into_iter()
                .map(|(r2, members)| ((LatticePoint(c.to_vec()), r2), members))
                .collect()
        })
        .collect();
    Ok(SphereDecomposition {
        entries: per_center.into_iter().flatten().collect(),
        p_size: p.len(),
        q_size: q.len(),
    })
}

fn antipode(center: &[i64], x: &[i64]) -> Vec<i64> {
    center.iter().zip(x).map(|(&c, &v)| 2 * c - v).collect()
}

/// Antipodal pairs `{p, 2c - p}` on one sphere, each pair once.
fn antipodal_pairs<'a>(
    center: &[i64],
    members: &'a [LatticePoint],
) -> Vec<(&'a LatticePoint, LatticePoint)> {
    let present: HashSet<&[i64]> = members.iter().map(|m| m.coords()).collect();
    members
        .iter()
        .filter_map(|m| {
            let other = antipode(center, m.coords());
            (present.contains(other.as_slice()) && m.coords() < other.as_slice())
                .then_some((m, LatticePoint(other)))
        })
        .collect()
}

/// Thales lower bound `Σ_σ A_σ (m_σ - 2)` on the number of right angles,
/// where `A_σ` counts antipodal pairs verified present in `P ∩ σ`.
pub fn antipodal_lower_bound(decomp: &SphereDecomposition, p: &LatticePointSet) -> Result<u128> {
    let p_index = p.index();
    let mut total = 0u128;
    for ((center, _), members) in &decomp.entries {
        if let Some(stray) = members.iter().find(|m| !p_index.contains(m.coords())) {
            return Err(Error::NotSubset(format!(
                "sphere member {stray} is not in P"
            )));
        }
        let m = members.len() as u128;
        if m < 3 {
            continue;
        }
        let pairs = antipodal_pairs(center.coords(), members);
        #[cfg(debug_assertions)]
        for (a, b) in &pairs {
            for q in members.iter().filter(|q| *q != *a && **q != *b) {
                debug_assert!(
                    exact_angles::is_right(q.coords(), a.coords(), b.coords()).unwrap_or(false),
                    "Thales violation at {q} for {a}, {b}"
                );
            }
        }
        total += pairs.len() as u128 * (m - 2);
    }
    Ok(total)
}

/// Every configuration `(q, {p, r})` counted by [`antipodal_lower_bound`].
pub fn thales_configurations(
    decomp: &SphereDecomposition,
) -> Vec<(LatticePoint, LatticePoint, LatticePoint)> {
    let mut out = Vec::new();
    for ((center, _), members) in &decomp.entries {
        for (a, b) in antipodal_pairs(center.coords(), members) {
            for q in members.iter().filter(|q| **q != *a && **q != b) {
                out.push((q.clone(), a.clone(), b.clone()));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DistinctAngles {
    pub keys: usize,
    pub dot_products: usize,
}

/// Distinct angle keys and distinct raw dot products `(p - q)·(r - q)`.
pub fn distinct_angles(points: &LatticePointSet) -> Result<DistinctAngles> {
    check_cap("distinct_angles", points, DEFAULT_VERTEX_CAP)?;
    let n = points.len();
    let (keys, dots) = (0..n)
        .into_par_iter()
        .map(|q| -> Result<(HashSet<AngleKey>, HashSet<i128>)> {
            let rays = Rays::from_vertex(points, q)?;
            let mut keys = HashSet::new();
            let mut dots = HashSet::new();
            for i in 0..rays.len() {
                for j in (i + 1)..rays.len() {
                    let dot = rays.dot(i, j)?;
                    dots.insert(dot);
                    keys.insert(AngleKey::from_dot_and_norms(
                        dot,
                        rays.norms[i],
                        rays.norms[j],
                    )?);
                }
            }
            Ok((keys, dots))
        })
        .try_reduce(
            || (HashSet::new(), HashSet::new()),
            |(mut ka, mut da), (kb, db)| {
                ka.extend(kb);
                da.extend(db);
                Ok((ka, da))
            },
        )?;
    Ok(DistinctAngles {
        keys: keys.len(),
        dot_products: dots.len(),
    })
}

/// Most frequent key; ties go to the key with the smallest cosine.
pub fn max_repetition(report: &CensusReport) -> Result<(AngleKey, u64)> {
    report
        .counts
        .iter()
        .fold(None::<(AngleKey, u64)>, |best, (&k, &c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((k, c)),
        })
        .ok_or_else(|| Error::Empty("census report has no configurations".into()))
}
