//! Size-ladder experiments and log-log exponent fits.
//!
//! Each experiment measures one quantity on a geometric ladder of sizes,
//! fits `log value = intercept + slope · log size` and compares the slope
//! with the predicted exponent in the stated direction, within a slack.

use std::fmt;
use std::io::Write;

use num_rational::Ratio;
use serde::Serialize;

use crate::census;
use crate::energy;
use crate::error::{Error, Result};
use crate::exact_angles::AngleKey;
use crate::lattice::{self, generate_grid, middle_block, sphere_lattice, thicken};
use crate::spectrum;

pub const LOWER_BOUND_SLACK: f64 = 0.3;
pub const UPPER_BOUND_SLACK: f64 = 0.1;
pub const SHELL_BOUND_SLACK: f64 = 0.2;
/// Largest ratio max/min allowed for the cross term across a ladder.
pub const CROSS_TERM_BAND: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares on `(ln size, ln value)`.
pub fn fit_loglog(rows: &[(f64, f64)]) -> Result<LogLogFit> {
    if rows.len() < 3 {
        return Err(Error::Range(format!(
            "need at least 3 rows, got {}",
            rows.len()
        )));
    }
    if let Some(&(x, y)) = rows.iter().find(|&&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(Error::Range(format!(
            "non-positive row ({x}, {y}) in log-log fit"
        )));
    }
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all sizes are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<=")]
    AtMost,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::AtLeast => ">=",
            Direction::AtMost => "<=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub size: f64,
    pub value: f64,
}

/// A per-row side condition, e.g. the Thales bound not exceeding the exact
/// count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowCheck {
    pub size: f64,
    pub label: String,
    pub value: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub name: String,
    pub rows: Vec<ScalingRow>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `None` for informational runs with no predicted exponent.
    pub target_exponent: Option<f64>,
    pub direction: Direction,
    pub slack: f64,
    pub checks: Vec<RowCheck>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl ScalingReport {
    fn finish(
        name: &str,
        rows: Vec<ScalingRow>,
        target: Option<f64>,
        direction: Direction,
        slack: f64,
        checks: Vec<RowCheck>,
        notes: Vec<String>,
    ) -> Result<Self> {
        let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.size, r.value)).collect();
        let fit = fit_loglog(&pairs)?;
        let slope_ok = match (target, direction) {
            (None, _) => true,
            (Some(t), Direction::AtLeast) => fit.slope >= t - slack,
            (Some(t), Direction::AtMost) => fit.slope <= t + slack,
        };
        let pass = slope_ok && checks.iter().all(|c| c.ok);
        Ok(Self {
            name: name.to_string(),
            rows,
            slope: fit.slope,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            target_exponent: target,
            direction,
            slack,
            checks,
            notes,
            pass,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    /// `size,value` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["size", "value"]).map_err(io)?;
        for r in &self.rows {
            w.write_record([r.size.to_string(), r.value.to_string()])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }
}

/// Knobs shared by the experiments; `None` means the experiment default.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Settings {
    pub slack: Option<f64>,
    /// Middle-block fraction for the Thales cross-check (default 1/5).
    #[serde(serialize_with = "ser_ratio")]
    pub block_fraction: Option<Ratio<u64>>,
    pub energy_threshold: Option<f64>,
    /// Point-count cap for the per-vertex census paths.
    pub cap: Option<usize>,
}

impl Settings {
    fn cap(&self) -> usize {
        self.cap.unwrap_or(census::DEFAULT_VERTEX_CAP)
    }
}

fn ser_ratio<S: serde::Serializer>(
    r: &Option<Ratio<u64>>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.collect_str(r),
        None => s.serialize_none(),
    }
}

fn check_ladder(values: &[u64], what: &str) -> Result<()> {
    if values.len() < 3 {
        return Err(Error::Range(format!(
            "{what} ladder needs at least 3 entries, got {}",
            values.len()
        )));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Range(format!(
            "{what} ladder must be strictly increasing"
        )));
    }
    Ok(())
}

fn grid_scale(side: u64) -> Ratio<i64> {
    Ratio::new(1, side as i64 - 1)
}

/// Right-angle counts on `{1..m}^d` against `n = m^d`, with the Thales
/// sphere bound as a row-wise lower cross-check. Predicted exponent
/// `3 - 2/d`, from below.
pub fn run_right_angle_scaling(
    d: usize,
    sides: &[u64],
    settings: &Settings,
) -> Result<ScalingReport> {
    run_angle_family(d, sides, None, settings)
}

/// Counts of an arbitrary angle on grids, with no predicted exponent.
pub fn run_angle_scaling(
    d: usize,
    sides: &[u64],
    key: AngleKey,
    settings: &Settings,
) -> Result<ScalingReport> {
    if key.is_right() {
        return run_right_angle_scaling(d, sides, settings);
    }
    run_angle_family(d, sides, Some(key), settings)
}

fn run_angle_family(
    d: usize,
    sides: &[u64],
    key: Option<AngleKey>,
    settings: &Settings,
) -> Result<ScalingReport> {
    check_ladder(sides, "side")?;
    let default_fraction = Ratio::new(1, 5);
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    for &side in sides {
        let grid = generate_grid(d, side)?;
        let n = grid.len() as f64;
        match key {
            None => {
                let count = census::count_right_with_cap(&grid, settings.cap())?;
                rows.push(ScalingRow {
                    size: n,
                    value: count as f64,
                });

                let mut fraction = settings.block_fraction.unwrap_or(default_fraction);
                if (fraction * Ratio::from_integer(side)).to_integer() < 2 {
                    fraction = Ratio::new(2, side);
                    notes.push(format!(
                        "side {side}: block fraction raised to {fraction} so the block has side 2"
                    ));
                }
                let q = middle_block(&grid, fraction)?;
                let decomp = census::build_sphere_decomposition(&grid, &q)?;
                let bound = census::antipodal_lower_bound(&decomp, &grid)?;
                checks.push(RowCheck {
                    size: n,
                    label: "thales_bound <= count_right".into(),
                    value: bound as f64,
                    ok: bound <= count as u128,
                });
                checks.push(RowCheck {
                    size: n,
                    label: "thales_bound / count_right > 0".into(),
                    value: bound as f64 / count as f64,
                    ok: bound > 0,
                });
            }
            Some(k) => {
                let count = census::count_key_with_cap(&grid, &k, settings.cap())?;
                rows.push(ScalingRow {
                    size: n,
                    value: count as f64,
                });
            }
        }
    }
    let (name, target) = match key {
        None => ("right_angles".to_string(), Some(3.0 - 2.0 / d as f64)),
        Some(k) => {
            notes.push(format!(
                "angle {k}: informational run, no predicted exponent"
            ));
            (
                format!("angle_{}", k.to_string().replace([':', '/'], "_")),
                None,
            )
        }
    };
    ScalingReport::finish(
        &name,
        rows,
        target,
        Direction::AtLeast,
        settings.slack.unwrap_or(LOWER_BOUND_SLACK),
        checks,
        notes,
    )
}

/// `ν^{ε_n}(0)` on the thickened grid with `ε_n = n^{-1/s}`, `0 < s < d/2`.
/// Predicted growth exponent `1/s - 2/d`, from below.
pub fn run_equitable_violation(
    d: usize,
    s: f64,
    sides: &[u64],
    settings: &Settings,
) -> Result<ScalingReport> {
    if !(s > 0.0 && s < d as f64 / 2.0) {
        return Err(Error::Hypothesis(format!(
            "need 0 < s < d/2 = {}, got s = {s}",
            d as f64 / 2.0
        )));
    }
    check_ladder(sides, "side")?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut prev: Option<f64> = None;
    for &side in sides {
        let grid = generate_grid(d, side)?;
        let n = grid.len() as f64;
        let measure = thicken(&grid, s, grid_scale(side))?;
        let eps = n.powf(-1.0 / s);
        let nu = spectrum::nu_epsilon(&measure, 0.0, eps)?;
        rows.push(ScalingRow { size: n, value: nu });
        if let Some(p) = prev {
            checks.push(RowCheck {
                size: n,
                label: "nu increases".into(),
                value: nu - p,
                ok: nu > p,
            });
        }
        prev = Some(nu);
    }
    ScalingReport::finish(
        "equitable_violation",
        rows,
        Some(1.0 / s - 2.0 / d as f64),
        Direction::AtLeast,
        settings.slack.unwrap_or(LOWER_BOUND_SLACK),
        checks,
        vec![format!("eps_n = n^(-1/{s}), t = 0")],
    )
}

/// Largest single-angle repetition (ordered pairs) on `s`-adaptable grids,
/// `(d+1)/2 < s < d`. Predicted exponent `3 - 1/s`, from above.
pub fn run_repetition_bound(
    d: usize,
    s: f64,
    sides: &[u64],
    settings: &Settings,
) -> Result<ScalingReport> {
    let lo = (d as f64 + 1.0) / 2.0;
    if !(s > lo && s < d as f64) {
        return Err(Error::Hypothesis(format!(
            "need (d+1)/2 = {lo} < s < d = {d}, got s = {s}"
        )));
    }
    check_ladder(sides, "side")?;
    let threshold = settings
        .energy_threshold
        .unwrap_or(energy::DEFAULT_ENERGY_THRESHOLD);
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    for &side in sides {
        let grid = generate_grid(d, side)?;
        let n = grid.len() as f64;
        let report = census::vertex_census_with_cap(&grid, settings.cap())?;
        let (key, count) = census::max_repetition(&report)?;
        rows.push(ScalingRow {
            size: n,
            value: 2.0 * count as f64,
        });
        notes.push(format!(
            "N = {n}: most repeated angle {key} ({count} configurations)"
        ));
        let e = energy::riesz_energy_with_threshold(&grid, s, grid_scale(side), threshold)?;
        checks.push(RowCheck {
            size: n,
            label: "s-adaptable".into(),
            value: e.value,
            ok: e.adaptable,
        });
    }
    ScalingReport::finish(
        "repetition_bound",
        rows,
        Some(3.0 - 1.0 / s),
        Direction::AtMost,
        settings.slack.unwrap_or(UPPER_BOUND_SLACK),
        checks,
        notes,
    )
}

/// `r2` in dimension 4 must not be divisible by 4 for the point count to
/// scale like `R^2`.
pub fn is_admissible_r2(d: usize, r2: u64) -> bool {
    d != 4 || !r2.is_multiple_of(4)
}

/// Distinct angles among triples on `{|k|^2 = r2}` against `r2`, with the
/// distinct dot products checked against `2·r2 + 1` per row. Predicted
/// exponent at most 1.
pub fn run_sphere_angle_bound(
    d: usize,
    r2_ladder: &[u64],
    settings: &Settings,
) -> Result<ScalingReport> {
    if d < 4 {
        return Err(Error::Range(format!(
            "sphere angle bound needs d >= 4, got {d}"
        )));
    }
    check_ladder(r2_ladder, "r2")?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    for &r2 in r2_ladder {
        if !is_admissible_r2(d, r2) {
            notes.push(format!(
                "r2 = {r2} is divisible by 4 (inadmissible in d = 4)"
            ));
        }
        let sphere = sphere_lattice(d, r2)?;
        if sphere.len() < 3 {
            notes.push(format!(
                "r2 = {r2}: fewer than 3 lattice points, row skipped"
            ));
            continue;
        }
        let da = census::distinct_angles(&sphere)?;
        let size = r2 as f64;
        rows.push(ScalingRow {
            size,
            value: da.keys as f64,
        });
        checks.push(RowCheck {
            size,
            label: "distinct dot products <= 2*r2+1".into(),
            value: da.dot_products as f64,
            ok: da.dot_products as u64 <= 2 * r2 + 1,
        });
        checks.push(RowCheck {
            size,
            label: "distinct dot products <= 8*r2+1".into(),
            value: da.dot_products as f64,
            ok: da.dot_products as u64 <= 8 * r2 + 1,
        });
        if d >= 5 {
            let ratio = sphere.len() as f64 / (r2 as f64).powf((d as f64 - 2.0) / 2.0);
            notes.push(format!(
                "r2 = {r2}: {} points, ratio to r2^((d-2)/2) = {ratio:.4}",
                sphere.len()
            ));
        }
    }
    ScalingReport::finish(
        "sphere_angles",
        rows,
        Some(1.0),
        Direction::AtMost,
        settings.slack.unwrap_or(UPPER_BOUND_SLACK),
        checks,
        notes,
    )
}

/// `max_{j,k} w_j(k) / 2^{j(d-2)}` against `R = sqrt(r2)`; bounded, so the
/// predicted exponent is 0.
pub fn run_shell_bound(d: usize, r2_ladder: &[u64], settings: &Settings) -> Result<ScalingReport> {
    if !(4..=5).contains(&d) {
        return Err(Error::Range(format!(
            "shell bound runs in d = 4 or 5, got {d}"
        )));
    }
    check_ladder(r2_ladder, "r2")?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    for &r2 in r2_ladder {
        let sphere = sphere_lattice(d, r2)?;
        if sphere.is_empty() {
            notes.push(format!("r2 = {r2}: empty sphere, row skipped"));
            continue;
        }
        let rep = energy::shell_counts(&sphere, r2)?;
        let size = (r2 as f64).sqrt();
        let partition_ok = rep
            .shells
            .iter()
            .all(|w| w.iter().sum::<u64>() == rep.m as u64 - 1);
        rows.push(ScalingRow {
            size,
            value: rep.max_ratio,
        });
        checks.push(RowCheck {
            size,
            label: "sum_j w_j(k) = m - 1".into(),
            value: rep.m as f64 - 1.0,
            ok: partition_ok,
        });
    }
    ScalingReport::finish(
        "shell_bound",
        rows,
        Some(0.0),
        Direction::AtMost,
        settings.slack.unwrap_or(SHELL_BOUND_SLACK),
        checks,
        notes,
    )
}

/// Cross term over a ladder of spheres; passes when max/min stays within
/// [`CROSS_TERM_BAND`]. No exponent target.
pub fn run_cross_term(
    d: usize,
    s: f64,
    r2_ladder: &[u64],
    settings: &Settings,
) -> Result<ScalingReport> {
    check_ladder(r2_ladder, "r2")?;
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    if s >= energy::sphere_angle_limit(d) {
        notes.push(format!(
            "s = {s} is not below (d-2)/2; boundedness is not predicted"
        ));
    }
    for &r2 in r2_ladder {
        let sphere = sphere_lattice(d, r2)?;
        if sphere.len() < 2 {
            notes.push(format!("r2 = {r2}: fewer than 2 points, row skipped"));
            continue;
        }
        rows.push(ScalingRow {
            size: r2 as f64,
            value: energy::cross_term(&sphere, r2, s)?,
        });
    }
    let (lo, hi) = rows.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
        (lo.min(r.value), hi.max(r.value))
    });
    let band = hi / lo;
    let checks = vec![RowCheck {
        size: rows.last().map_or(0.0, |r| r.size),
        label: format!("max/min <= {CROSS_TERM_BAND}"),
        value: band,
        ok: band <= CROSS_TERM_BAND,
    }];
    ScalingReport::finish(
        "cross_term",
        rows,
        None,
        Direction::AtMost,
        settings.slack.unwrap_or(UPPER_BOUND_SLACK),
        checks,
        notes,
    )
}

/// Square-free `r2` values up to `max`, skipping those with no lattice
/// points in dimension `d`.
pub fn square_free_ladder(d: usize, max: u64) -> Vec<u64> {
    (1..=max)
        .filter(|&r| lattice::is_square_free(r) && sphere_lattice(d, r).is_ok_and(|s| s.len() >= 3))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fit_examples() {
        let f = fit_loglog(&[(2.0, 4.0), (4.0, 16.0), (8.0, 64.0)]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let f = fit_loglog(&[(1.0, 3.0), (2.0, 3.0), (4.0, 3.0)]).unwrap();
        assert_eq!(f.slope, 0.0);
        assert_eq!(f.r_squared, 1.0);
        assert!(fit_loglog(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_loglog(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
    }

    proptest! {
        #[test]
        fn fit_recovers_power_laws(a in 0.1f64..10.0, b in -3.0f64..3.0, x0 in 1.0f64..5.0) {
            let rows: Vec<(f64, f64)> = (0..6).map(|i| {
                let x = x0 * 1.7f64.powi(i);
                (x, a * x.powf(b))
            }).collect();
            let f = fit_loglog(&rows).unwrap();
            prop_assert!((f.slope - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ladders_are_validated() {
        let s = Settings::default();
        assert!(matches!(
            run_right_angle_scaling(2, &[2], &s),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            run_right_angle_scaling(2, &[4, 3, 5], &s),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            run_sphere_angle_bound(4, &[5], &s),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn hypotheses_are_enforced() {
        let s = Settings::default();
        assert!(matches!(
            run_equitable_violation(2, 1.0, &[4, 8, 16], &s),
            Err(Error::Hypothesis(_))
        ));
        assert!(matches!(
            run_repetition_bound(2, 1.4, &[4, 6, 8], &s),
            Err(Error::Hypothesis(_))
        ));
        assert!(matches!(
            run_repetition_bound(2, 1.5, &[4, 6, 8], &s),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn small_right_angle_run() {
        let r = run_right_angle_scaling(2, &[5, 6, 8], &Settings::default()).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.target_exponent, Some(2.0));
        assert!(r.checks.iter().all(|c| c.ok), "{:?}", r.checks);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("size,value\n25,"));
    }

    #[test]
    fn other_angles_are_informational() {
        let key = AngleKey::new(1, 1, 2).unwrap();
        let r = run_angle_scaling(2, &[4, 5, 6], key, &Settings::default()).unwrap();
        assert_eq!(r.target_exponent, None);
        assert!(r.pass);
        assert!(r.slope > 1.0);
    }

    #[test]
    fn equitable_small_ladder_in_three_dims() {
        let r = run_equitable_violation(3, 1.0, &[4, 6, 8], &Settings::default()).unwrap();
        assert!((r.target_exponent.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(r.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn repetition_target_in_three_dims() {
        let r = run_repetition_bound(3, 2.1, &[3, 4, 5], &Settings::default()).unwrap();
        assert!((r.target_exponent.unwrap() - (3.0 - 1.0 / 2.1)).abs() < 1e-15);
    }

    #[test]
    fn shell_bound_small_ladder() {
        let r = run_shell_bound(4, &[5, 13, 25], &Settings::default()).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.checks.iter().all(|c| c.ok));
        assert!(run_shell_bound(3, &[5, 13, 25], &Settings::default()).is_err());
    }

    #[test]
    fn square_free_ladder_values() {
        assert_eq!(
            square_free_ladder(4, 15),
            vec![1, 2, 3, 5, 6, 7, 10, 11, 13, 14, 15]
        );
    }
}
