//! The windowed angle distribution
//! `ν^ε(t) = ε^{-1} μ×μ×μ{(x,y,z) : |cos∠(x - z, y - z) - t| ≤ ε}`
//! of a uniform atomic measure, its sup over `t`, and the covering estimate
//! of the angle set.

use std::io::Write;

use serde::Serialize;

use crate::census::{self, in_window, WINDOW_GUARD};
use crate::error::{Error, Result};
use crate::lattice::{LatticePointSet, WeightedPointMeasure};

/// `windowed_mass / eps`.
pub fn nu_epsilon(measure: &WeightedPointMeasure, t: f64, eps: f64) -> Result<f64> {
    Ok(census::windowed_mass(measure, t, eps)? / eps)
}

/// Sorted cosines of all configurations of a set, with multiplicities.
/// Built once from an exact census; windows are then prefix-sum lookups.
#[derive(Debug, Clone)]
pub struct CosineSpectrum {
    cosines: Vec<f64>,
    /// `prefix[i]` = number of configurations with index `< i`
    prefix: Vec<u64>,
    n: usize,
    atom_mass: f64,
}

impl CosineSpectrum {
    pub fn new(measure: &WeightedPointMeasure) -> Result<Self> {
        let report = census::vertex_census(&measure.base)?;
        let mut entries: Vec<(f64, u64)> = report
            .counts
            .iter()
            .map(|(k, &c)| (k.cosine(), c))
            .collect();
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut prefix = Vec::with_capacity(entries.len() + 1);
        prefix.push(0);
        let mut acc = 0;
        for &(_, c) in &entries {
            acc += c;
            prefix.push(acc);
        }
        Ok(Self {
            cosines: entries.into_iter().map(|e| e.0).collect(),
            prefix,
            n: measure.len(),
            atom_mass: measure.mass_per_atom,
        })
    }

    fn pairs_between(&self, lo: f64, hi: f64, include_hi: bool) -> u64 {
        let a = self.cosines.partition_point(|&c| c < lo);
        let b = if include_hi {
            self.cosines.partition_point(|&c| c <= hi)
        } else {
            self.cosines.partition_point(|&c| c < hi)
        };
        if b <= a {
            0
        } else {
            self.prefix[b] - self.prefix[a]
        }
    }

    fn coincident(&self) -> u64 {
        (self.n * self.n.saturating_sub(1)) as u64
    }

    fn cube(&self) -> f64 {
        self.atom_mass.powi(3)
    }

    /// Same window convention as [`census::windowed_mass`].
    pub fn window_mass(&self, t: f64, eps: f64) -> f64 {
        let pairs = self.pairs_between(t - eps - WINDOW_GUARD, t + eps + WINDOW_GUARD, true);
        let diag = if in_window(1.0, t, eps) {
            self.coincident()
        } else {
            0
        };
        (2 * pairs + diag) as f64 * self.cube()
    }

    /// Mass of the half-open cosine interval `[lo, hi)`, or `[lo, hi]` when
    /// `closed` is set. No guard band.
    pub fn interval_mass(&self, lo: f64, hi: f64, closed: bool) -> f64 {
        let pairs = self.pairs_between(lo, hi, closed);
        let diag = if lo <= 1.0 && (1.0 < hi || (closed && hi >= 1.0)) {
            self.coincident()
        } else {
            0
        };
        (2 * pairs + diag) as f64 * self.cube()
    }

    /// Mass of all ordered triples with `x ≠ z`, `y ≠ z`.
    pub fn total_mass(&self) -> f64 {
        let pairs = *self.prefix.last().unwrap_or(&0);
        (2 * pairs + self.coincident()) as f64 * self.cube()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub t: f64,
    pub nu: f64,
    /// Window reaches past ±1, where cosine and angle windows stop being
    /// comparable.
    pub endpoint: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleHistogram {
    pub eps: f64,
    pub bins: Vec<HistogramBin>,
    pub n: usize,
    /// Sum of masses over the partition of `[-1, 1]` into the histogram's
    /// cells; equals the total non-degenerate triple mass.
    pub total_mass_check: f64,
}

impl AngleHistogram {
    /// `t,nu` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["t", "nu"]).map_err(io)?;
        for b in &self.bins {
            w.write_record([b.t.to_string(), b.nu.to_string()])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }
}

/// `ν^ε` at the bin centers `t_i = -1 + (2i+1)/n_bins`.
pub fn nu_profile(
    measure: &WeightedPointMeasure,
    eps: f64,
    n_bins: usize,
) -> Result<AngleHistogram> {
    if n_bins == 0 {
        return Err(Error::Range("n_bins must be at least 1".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Range(format!("eps = {eps} must be positive")));
    }
    let spectrum = CosineSpectrum::new(measure)?;
    let width = 2.0 / n_bins as f64;
    let bins = (0..n_bins)
        .map(|i| {
            let t = ((2 * i + 1) as f64 - n_bins as f64) / n_bins as f64;
            HistogramBin {
                t,
                nu: spectrum.window_mass(t, eps) / eps,
                endpoint: t.abs() + eps > 1.0,
            }
        })
        .collect();
    let total_mass_check = (0..n_bins)
        .map(|i| {
            let lo = -1.0 + i as f64 * width;
            let last = i + 1 == n_bins;
            let hi = if last {
                1.0
            } else {
                -1.0 + (i + 1) as f64 * width
            };
            spectrum.interval_mass(lo, hi, last)
        })
        .sum();
    Ok(AngleHistogram {
        eps,
        bins,
        n: measure.len(),
        total_mass_check,
    })
}

/// Largest `ν^ε(t)` over `t ∈ {-1, -1 + ε/2, -1 + ε, ..} ∩ [-1, 1]`; the
/// first maximizer wins ties.
pub fn equitable_sup(measure: &WeightedPointMeasure, eps: f64) -> Result<(f64, f64)> {
    if !(eps > 0.0) {
        return Err(Error::Range(format!("eps = {eps} must be positive")));
    }
    let spectrum = CosineSpectrum::new(measure)?;
    let steps = (4.0 / eps).floor() as usize;
    let mut best = (-1.0, f64::NEG_INFINITY);
    for i in 0..=steps {
        let t = (-1.0 + i as f64 * eps / 2.0).min(1.0);
        let nu = spectrum.window_mass(t, eps) / eps;
        if nu > best.1 {
            best = (t, nu);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleSetEstimate {
    pub eps: f64,
    pub occupied_bins: usize,
    pub measure_estimate: f64,
    pub distinct_keys: usize,
}

/// Number of width-`eps` cosine bins of `[-1, 1]` hit by some
/// configuration, times `eps`.
pub fn angle_set_estimate(points: &LatticePointSet, eps: f64) -> Result<AngleSetEstimate> {
    if !(eps > 0.0) {
        return Err(Error::Range(format!("eps = {eps} must be positive")));
    }
    let report = census::vertex_census(points)?;
    let n_bins = (2.0 / eps).ceil().max(1.0) as usize;
    let mut hit = vec![false; n_bins];
    for key in report.counts.keys() {
        let idx = (((key.cosine() + 1.0) / eps).floor().max(0.0) as usize).min(n_bins - 1);
        hit[idx] = true;
    }
    let occupied_bins = hit.iter().filter(|&&h| h).count();
    Ok(AngleSetEstimate {
        eps,
        occupied_bins,
        measure_estimate: eps * occupied_bins as f64,
        distinct_keys: report.distinct_keys(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{sphere_lattice, thicken};
    use num_rational::Ratio;

    fn measure(pts: &[&[i64]]) -> WeightedPointMeasure {
        let set = LatticePointSet::new(2, pts.iter().map(|p| p.to_vec()).collect()).unwrap();
        let (lo, hi) = set.bounding_box().unwrap();
        let extent = lo.iter().zip(&hi).map(|(l, h)| h - l).max().unwrap().max(1);
        thicken(&set, 1.0, Ratio::new(1, extent)).unwrap()
    }

    fn triangle() -> WeightedPointMeasure {
        measure(&[&[0, 0], &[1, 0], &[0, 1]])
    }

    #[test]
    fn nu_examples() {
        let v = nu_epsilon(&triangle(), 0.0, 0.1).unwrap();
        assert!((v - 20.0 / 27.0).abs() < 1e-14);
        let v = nu_epsilon(&triangle(), 0.0, 2.0).unwrap();
        assert!((v - 6.0 / 27.0).abs() < 1e-14);
        assert_eq!(nu_epsilon(&measure(&[&[0, 0]]), 0.3, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn spectrum_agrees_with_direct_window() {
        let m = measure(&[&[0, 0], &[3, 1], &[1, 4], &[2, 2], &[4, 0]]);
        let sp = CosineSpectrum::new(&m).unwrap();
        for i in 0..=40 {
            let t = -1.0 + i as f64 * 0.05;
            for eps in [0.01, 0.1, 0.5] {
                let direct = census::windowed_mass(&m, t, eps).unwrap();
                assert_eq!(sp.window_mass(t, eps), direct, "t={t} eps={eps}");
            }
        }
    }

    #[test]
    fn triangle_profile() {
        let h = nu_profile(&triangle(), 0.1, 20).unwrap();
        assert_eq!(h.bins.len(), 20);
        assert!((h.total_mass_check - 12.0 / 27.0).abs() < 1e-15);
        // cosines present: 0 (twice, ordered) and √2/2 (4 ordered) plus diagonal at 1
        let at = |t: f64| h.bins.iter().find(|b| (b.t - t).abs() < 1e-9).unwrap().nu;
        assert!((at(0.05) - 20.0 / 27.0).abs() < 1e-12);
        assert!((at(-0.05) - 20.0 / 27.0).abs() < 1e-12);
        assert!((at(0.75) - 40.0 / 27.0).abs() < 1e-12);
        assert!((at(0.65) - 40.0 / 27.0).abs() < 1e-12);
        assert_eq!(at(-0.55), 0.0);
        assert!(h.bins.last().unwrap().endpoint);
        assert!(!h.bins[10].endpoint);
    }

    #[test]
    fn two_atoms_have_flat_profile() {
        let h = nu_profile(&measure(&[&[0, 0], &[1, 1]]), 0.1, 10).unwrap();
        // only x = y triples exist, at cosine 1
        assert!(h.bins[..9].iter().all(|b| b.nu == 0.0));
        let one = nu_profile(&measure(&[&[0, 0]]), 0.1, 10).unwrap();
        assert!(one.bins.iter().all(|b| b.nu == 0.0));
    }

    #[test]
    fn single_bin_holds_everything() {
        let h = nu_profile(&triangle(), 1.0, 1).unwrap();
        assert_eq!(h.bins.len(), 1);
        assert_eq!(h.bins[0].t, 0.0);
        assert!((h.bins[0].nu - 12.0 / 27.0).abs() < 1e-15);
        assert!(nu_profile(&triangle(), 1.0, 0).is_err());
    }

    #[test]
    fn sup_examples() {
        let (t, nu) = equitable_sup(&triangle(), 0.1).unwrap();
        // the diagonal at cosine 1 (6 ordered triples) dominates
        assert!((t - 0.9).abs() < 1e-9, "t = {t}");
        assert!((nu - (6.0 / 27.0) / 0.1).abs() < 1e-12);

        // cross {±e1, ±e2}: 4 right-angle configurations, 8 at 45°, 12
        // coincident pairs; the 45° family carries the largest window
        let cross = measure(&[&[1, 0], &[-1, 0], &[0, 1], &[0, -1]]);
        let (t, nu) = equitable_sup(&cross, 0.1).unwrap();
        assert!((t - 0.65).abs() < 1e-9, "t = {t}");
        assert!((nu - 16.0 / 64.0 / 0.1).abs() < 1e-12);
        let at_zero = nu_epsilon(&cross, 0.0, 0.1).unwrap();
        assert!((at_zero - 8.0 / 64.0 / 0.1).abs() < 1e-12);

        let (_, nu) = equitable_sup(&measure(&[&[0, 0]]), 0.1).unwrap();
        assert_eq!(nu, 0.0);
    }

    #[test]
    fn angle_set_examples() {
        let sq =
            LatticePointSet::new(2, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let e = angle_set_estimate(&sq, 0.05).unwrap();
        assert_eq!(e.occupied_bins, 2);
        assert!((e.measure_estimate - 0.1).abs() < 1e-15);
        assert_eq!(e.distinct_keys, 2);
        let e = angle_set_estimate(&sq, 2.5).unwrap();
        assert_eq!(e.occupied_bins, 1);
        assert_eq!(e.measure_estimate, 2.5);

        let s = sphere_lattice(4, 25).unwrap();
        let e = angle_set_estimate(&s, 0.01).unwrap();
        assert_eq!(
            e.distinct_keys,
            crate::census::distinct_angles(&s).unwrap().keys
        );
        assert!(e.measure_estimate <= 2.0 + 0.01);
    }

    #[test]
    fn covering_property() {
        let s = sphere_lattice(3, 29).unwrap();
        for eps in [0.003, 0.01, 0.05, 0.2] {
            let fine = angle_set_estimate(&s, eps).unwrap().occupied_bins;
            let coarse = angle_set_estimate(&s, 2.0 * eps).unwrap().occupied_bins;
            assert!(fine <= 2 * coarse + 2);
        }
    }
}
