//! Riesz energies of point sets, s-adaptability, and dyadic shell counts on
//! lattice spheres.

use std::io::Write;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{squared_distance, LatticePointSet};
use crate::numeric::{ordered_sum, CompensatedSum};

/// Default bound on the normalized energy for an adaptable set.
pub const DEFAULT_ENERGY_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub s: f64,
    pub value: f64,
    pub min_separation: f64,
    pub adaptable: bool,
    pub n: usize,
}

/// Upper end of the `s` range on which lattice spheres are claimed to be
/// adaptable: `(d-1)/2`.
pub fn sphere_adaptability_limit(d: usize) -> f64 {
    (d as f64 - 1.0) / 2.0
}

/// Upper end of the `s` range on which the angle-set measure of thickened
/// spheres vanishes: `(d-2)/2`.
pub fn sphere_angle_limit(d: usize) -> f64 {
    (d as f64 - 2.0) / 2.0
}

/// `Σ_{j≠i} f(|p_i - p_j|^2)` for every `i`, each row compensated, rows
/// reduced in index order.
fn pair_sum<F>(points: &LatticePointSet, f: F) -> f64
where
    F: Fn(i128) -> f64 + Sync,
{
    let n = points.len();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = points.point(i);
            let mut acc = CompensatedSum::default();
            for (j, x) in points.iter().enumerate() {
                if j != i {
                    acc.add(f(squared_distance(p, x)));
                }
            }
            acc.value()
        })
        .collect();
    ordered_sum(&rows)
}

/// `N^{-2} Σ_{p≠p'} (scale·|p - p'|)^{-s}` with the default energy threshold.
pub fn riesz_energy(points: &LatticePointSet, s: f64, scale: Ratio<i64>) -> Result<EnergyReport> {
    riesz_energy_with_threshold(points, s, scale, DEFAULT_ENERGY_THRESHOLD)
}

/// As [`riesz_energy`]; the set is reported adaptable when it is
/// `N^{-1/s}`-separated after scaling and the energy is at most `threshold`.
pub fn riesz_energy_with_threshold(
    points: &LatticePointSet,
    s: f64,
    scale: Ratio<i64>,
    threshold: f64,
) -> Result<EnergyReport> {
    let d = points.dim();
    if !(s > 0.0 && s < d as f64) {
        return Err(Error::Range(format!("s = {s} outside (0, {d})")));
    }
    if *scale.numer() <= 0 {
        return Err(Error::Range(format!("scale {scale} must be positive")));
    }
    let n = points.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "energy needs at least 2 points, got {n}"
        )));
    }
    let sc = *scale.numer() as f64 / *scale.denom() as f64;
    let sum = pair_sum(points, |d2| (sc * (d2 as f64).sqrt()).powf(-s));
    let value = sum / (n as f64 * n as f64);
    let min_separation = points
        .min_squared_distance()
        .map_or(f64::INFINITY, |d2| (d2 as f64).sqrt() * sc);
    let adaptable = min_separation >= (n as f64).powf(-1.0 / s) && value <= threshold;
    Ok(EnergyReport {
        s,
        value,
        min_separation,
        adaptable,
        n,
    })
}

/// Dyadic shell counts `w_j(k)` on one lattice sphere.
///
/// Band `j` holds the points `l` with `4^j ≤ |k - l|^2 < 4^{j+1}`; bands run
/// up to the one containing the antipode, so the bands of each `k`
/// partition the other `m - 1` points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellCountReport {
    pub d: usize,
    pub r2: u64,
    pub m: usize,
    /// `shells[k][j] = w_j(k)`
    pub shells: Vec<Vec<u64>>,
    /// `max_{j,k} w_j(k) / 2^{j(d-2)}`
    pub max_ratio: f64,
    /// `R^{d-2}`, the nominal size the point count is compared against.
    pub nominal_size: f64,
}

impl ShellCountReport {
    pub fn bands(&self) -> usize {
        self.shells.first().map_or(0, Vec::len)
    }

    /// `r2,k_index,j,w_j` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["r2", "k_index", "j", "w_j"]).map_err(io)?;
        for (k, row) in self.shells.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                w.write_record([
                    self.r2.to_string(),
                    k.to_string(),
                    j.to_string(),
                    c.to_string(),
                ])
                .map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }
}

fn dyadic_band(d2: i128) -> usize {
    debug_assert!(d2 > 0);
    ((127 - d2.leading_zeros()) / 2) as usize
}

fn check_sphere(sphere: &LatticePointSet, r2: u64) -> Result<()> {
    if let Some(p) = sphere
        .iter()
        .find(|p| p.iter().map(|&c| c as i128 * c as i128).sum::<i128>() != r2 as i128)
    {
        return Err(Error::Range(format!(
            "point {p:?} is not on the sphere |k|^2 = {r2}"
        )));
    }
    Ok(())
}

pub fn shell_counts(sphere: &LatticePointSet, r2: u64) -> Result<ShellCountReport> {
    if sphere.is_empty() {
        return Err(Error::Empty(format!("no lattice points with |k|^2 = {r2}")));
    }
    check_sphere(sphere, r2)?;
    let d = sphere.dim();
    let bands = dyadic_band(4 * r2 as i128) + 1;
    let shells: Vec<Vec<u64>> = (0..sphere.len())
        .into_par_iter()
        .map(|k| {
            let p = sphere.point(k);
            let mut w = vec![0u64; bands];
            for (l, x) in sphere.iter().enumerate() {
                if l != k {
                    w[dyadic_band(squared_distance(p, x))] += 1;
                }
            }
            w
        })
        .collect();
    let max_ratio = shells
        .iter()
        .flat_map(|w| {
            w.iter()
                .enumerate()
                .map(|(j, &c)| c as f64 / 2f64.powi((j * (d - 2)) as i32))
        })
        .fold(0.0, f64::max);
    Ok(ShellCountReport {
        d,
        r2,
        m: sphere.len(),
        shells,
        max_ratio,
        nominal_size: (r2 as f64).powf((d as f64 - 2.0) / 2.0),
    })
}

/// Discrete cross term `m^{-2} R^s Σ_{k≠l} |k - l|^{-s}` over the sphere
/// points, normalized by the true point count `m`.
pub fn cross_term(sphere: &LatticePointSet, r2: u64, s: f64) -> Result<f64> {
    let d = sphere.dim();
    let limit = sphere_adaptability_limit(d);
    if !(s > 0.0 && s < limit) {
        return Err(Error::Range(format!("s = {s} outside (0, {limit})")));
    }
    let m = sphere.len();
    if m < 2 {
        return Err(Error::Empty(format!(
            "cross term needs 2 sphere points, got {m}"
        )));
    }
    check_sphere(sphere, r2)?;
    let sum = pair_sum(sphere, |d2| (d2 as f64).powf(-s / 2.0));
    Ok((r2 as f64).powf(s / 2.0) * sum / (m as f64 * m as f64))
}
