//! Quadrature probe of the Fourier decay of the angle-shell measure
//! `{(u, v) ∈ [0,1]^d × [0,1]^d : |û·v̂ - t| ≤ ε}`.
//!
//! The shell is discretized on the midpoint grid of spacing `h`; cells with
//! `|u|` or `|v|` outside `[h, 1]` are dropped. Magnitudes of the Fourier
//! transform along a ray are fitted to a power law to estimate the decay
//! exponent.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scaling::fit_loglog;

/// Largest number of candidate cells `(1/h)^{2d}` a grid may scan.
pub const CELL_CAP: f64 = 5e8;
const CHUNK: usize = 8192;

/// Discrete probability measure on `R^d × R^d`.
#[derive(Debug, Clone)]
pub struct ShellMeasureGrid {
    pub d: usize,
    /// `None` for synthetic measures built with [`from_cells`](Self::from_cells).
    pub t: Option<f64>,
    pub eps: Option<f64>,
    pub h: f64,
    /// Cell centers `(u, v)` flattened with stride `2d`.
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl ShellMeasureGrid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn cell(&self, i: usize) -> (&[f64], &[f64], f64) {
        let c = &self.coords[i * 2 * self.d..(i + 1) * 2 * self.d];
        (&c[..self.d], &c[self.d..], self.weights[i])
    }

    /// Arbitrary weighted cells `(u, v, weight)` on a grid of spacing `h`;
    /// weights are normalized to total 1.
    pub fn from_cells(d: usize, h: f64, cells: Vec<(Vec<f64>, Vec<f64>, f64)>) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Range(format!("h = {h} must be positive")));
        }
        let total: f64 = cells.iter().map(|c| c.2).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Empty("cells carry no positive weight".into()));
        }
        let mut coords = Vec::with_capacity(cells.len() * 2 * d);
        let mut weights = Vec::with_capacity(cells.len());
        for (u, v, w) in cells {
            if u.len() != d || v.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: u.len().max(v.len()),
                });
            }
            coords.extend(u);
            coords.extend(v);
            weights.push(w / total);
        }
        Ok(Self {
            d,
            t: None,
            eps: None,
            h,
            coords,
            weights,
        })
    }

    /// Largest admissible frequency component: the per-axis Nyquist limit.
    pub fn frequency_limit(&self) -> f64 {
        1.0 / (2.0 * self.h)
    }
}

/// Normalized `eps`-shell around `û·v̂ = t` on the midpoint grid of
/// `[0,1]^d × [0,1]^d`.
pub fn build_shell_grid(d: usize, t: f64, eps: f64, h: f64) -> Result<ShellMeasureGrid> {
    if !(2..=3).contains(&d) {
        return Err(Error::Range(format!("dimension {d} outside 2..=3")));
    }
    if !(eps > 0.0 && eps <= 0.1) {
        return Err(Error::Range(format!("eps = {eps} outside (0, 0.1]")));
    }
    if !(h > 0.0 && h <= eps / 2.0) {
        return Err(Error::Range(format!(
            "h = {h} must lie in (0, eps/2 = {}]",
            eps / 2.0
        )));
    }
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::Range(format!("t = {t} outside [-1, 1]")));
    }
    let per_axis = (1.0 / h).round() as usize;
    if (per_axis as f64).powi(2 * d as i32) > CELL_CAP {
        return Err(Error::Size(format!(
            "{per_axis}^{} cells exceed the cap of {CELL_CAP:e}",
            2 * d
        )));
    }

    // admissible single-factor cells with their unit directions
    let mut base: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut idx = vec![0usize; d];
    'outer: loop {
        let x: Vec<f64> = idx.iter().map(|&i| (i as f64 + 0.5) * h).collect();
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r >= h && r <= 1.0 {
            let unit = x.iter().map(|c| c / r).collect();
            base.push((x, unit));
        }
        for i in (0..d).rev() {
            idx[i] += 1;
            if idx[i] < per_axis {
                continue 'outer;
            }
            idx[i] = 0;
        }
        break;
    }

    let rows: Vec<Vec<f64>> = base
        .par_iter()
        .map(|(u, uh)| {
            let mut out = Vec::new();
            for (v, vh) in &base {
                let c: f64 = uh.iter().zip(vh).map(|(a, b)| a * b).sum();
                if (c - t).abs() <= eps {
                    out.extend_from_slice(u);
                    out.extend_from_slice(v);
                }
            }
            out
        })
        .collect();
    let coords: Vec<f64> = rows.into_iter().flatten().collect();
    let count = coords.len() / (2 * d);
    if count == 0 {
        return Err(Error::Empty(format!(
            "no grid cells in the shell t = {t}, eps = {eps}, h = {h}"
        )));
    }
    Ok(ShellMeasureGrid {
        d,
        t: Some(t),
        eps: Some(eps),
        h,
        coords,
        weights: vec![1.0 / count as f64; count],
    })
}

fn check_guard(grid: &ShellMeasureGrid, xi: &[f64], eta: &[f64]) -> Result<()> {
    if xi.len() != grid.d || eta.len() != grid.d {
        return Err(Error::Dimension {
            expected: grid.d,
            got: xi.len().max(eta.len()),
        });
    }
    let limit = grid.frequency_limit();
    let top = xi.iter().chain(eta).fold(0.0f64, |m, c| m.max(c.abs()));
    if top > limit * (1.0 + 1e-12) {
        return Err(Error::Guard(format!(
            "frequency component {top} exceeds the Nyquist limit 1/(2h) = {limit}"
        )));
    }
    Ok(())
}

/// `|Σ_cells w · exp(-2πi(u·ξ + v·η))|`.
pub fn fourier_sample(grid: &ShellMeasureGrid, xi: &[f64], eta: &[f64]) -> Result<f64> {
    check_guard(grid, xi, eta)?;
    let d = grid.d;
    let stride = 2 * d;
    let partials: Vec<Complex64> = grid
        .coords
        .par_chunks(CHUNK * stride)
        .zip(grid.weights.par_chunks(CHUNK))
        .map(|(cells, weights)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, &w) in cells.chunks_exact(stride).zip(weights) {
                let phase: f64 = c[..d].iter().zip(xi).map(|(a, b)| a * b).sum::<f64>()
                    + c[d..].iter().zip(eta).map(|(a, b)| a * b).sum::<f64>();
                let (s, co) = (-2.0 * std::f64::consts::PI * phase.fract()).sin_cos();
                acc += Complex64::new(co, s) * w;
            }
            acc
        })
        .collect();
    Ok(partials
        .into_iter()
        .fold(Complex64::new(0.0, 0.0), |a, b| a + b)
        .norm())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub d: usize,
    pub t: Option<f64>,
    pub eps: Option<f64>,
    pub h: f64,
    pub ray: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub gamma_hat: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
}

impl DecayFit {
    /// `lambda,magnitude` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["lambda", "magnitude"]).map_err(err)?;
        for (l, m) in self.lambdas.iter().zip(&self.magnitudes) {
            w.write_record([l.to_string(), m.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Samples `|μ̂(λ·ray)|` for each `λ` and fits `log |μ̂| ≈ c - γ log λ`.
/// The ray is `(ξ, η)` concatenated and used as given.
pub fn decay_fit(grid: &ShellMeasureGrid, ray: &[f64], lambdas: &[f64]) -> Result<DecayFit> {
    let d = grid.d;
    if ray.len() != 2 * d {
        return Err(Error::Dimension {
            expected: 2 * d,
            got: ray.len(),
        });
    }
    if lambdas.len() < 4 {
        return Err(Error::Range(format!(
            "need at least 4 frequencies, got {}",
            lambdas.len()
        )));
    }
    if lambdas.windows(2).any(|w| w[0] >= w[1]) || lambdas[0] <= 0.0 {
        return Err(Error::Range(
            "frequencies must be positive and increasing".into(),
        ));
    }
    let mut magnitudes = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let f: Vec<f64> = ray.iter().map(|c| c * lambda).collect();
        magnitudes.push(fourier_sample(grid, &f[..d], &f[d..])?);
    }
    let rows: Vec<(f64, f64)> = lambdas
        .iter()
        .copied()
        .zip(magnitudes.iter().copied())
        .collect();
    let fit = fit_loglog(&rows)?;
    let residual = (rows
        .iter()
        .map(|&(x, y)| {
            let e = y.ln() - (fit.intercept + fit.slope * x.ln());
            e * e
        })
        .sum::<f64>()
        / rows.len() as f64)
        .sqrt();
    Ok(DecayFit {
        d,
        t: grid.t,
        eps: grid.eps,
        h: grid.h,
        ray: ray.to_vec(),
        lambdas: lambdas.to_vec(),
        magnitudes,
        gamma_hat: -fit.slope,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preconditions() {
        assert!(matches!(
            build_shell_grid(2, 0.0, 0.05, 0.05),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            build_shell_grid(4, 0.0, 0.05, 0.01),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            build_shell_grid(2, 0.0, 0.2, 0.01),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            build_shell_grid(3, 0.0, 0.1, 1.0 / 128.0),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn zero_frequency_and_symmetries() {
        let g = build_shell_grid(2, 0.0, 0.1, 1.0 / 32.0).unwrap();
        assert!(!g.is_empty());
        assert!((fourier_sample(&g, &[0.0, 0.0], &[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        let xi = [1.5, -2.0];
        let eta = [0.5, 3.0];
        let a = fourier_sample(&g, &xi, &eta).unwrap();
        let b = fourier_sample(&g, &[-1.5, 2.0], &[-0.5, -3.0]).unwrap();
        assert!((a - b).abs() < 1e-12);
        let c = fourier_sample(&g, &eta, &xi).unwrap();
        assert!((a - c).abs() < 1e-12);
    }

    #[test]
    fn support_is_swap_symmetric() {
        let g = build_shell_grid(2, 0.3, 0.1, 1.0 / 32.0).unwrap();
        let key = |u: &[f64], v: &[f64]| -> Vec<i64> {
            u.iter()
                .chain(v)
                .map(|c| (c * 64.0).round() as i64)
                .collect()
        };
        let cells: std::collections::HashSet<Vec<i64>> = (0..g.len())
            .map(|i| {
                let (u, v, _) = g.cell(i);
                key(u, v)
            })
            .collect();
        for i in 0..g.len() {
            let (u, v, _) = g.cell(i);
            assert!(cells.contains(&key(v, u)));
        }
    }

    #[test]
    fn near_parallel_shell() {
        let g = build_shell_grid(2, 1.0, 0.02, 1.0 / 100.0).unwrap();
        for i in (0..g.len()).step_by(97) {
            let (u, v, _) = g.cell(i);
            let cos = (u[0] * v[0] + u[1] * v[1])
                / ((u[0] * u[0] + u[1] * u[1]).sqrt() * (v[0] * v[0] + v[1] * v[1]).sqrt());
            assert!(cos >= 0.98 - 1e-12);
        }
    }

    #[test]
    fn guard_rejects_high_frequencies() {
        let g = build_shell_grid(2, 0.0, 0.1, 1.0 / 32.0).unwrap();
        assert!(fourier_sample(&g, &[16.0, 0.0], &[0.0, 16.0]).is_ok());
        assert!(matches!(
            fourier_sample(&g, &[16.5, 0.0], &[0.0, 0.0]),
            Err(Error::Guard(_))
        ));
        let ray = [1.0, 0.0, 0.0, 1.0];
        assert!(matches!(
            decay_fit(&g, &ray, &[4.0, 8.0, 16.0, 32.0]),
            Err(Error::Guard(_))
        ));
        assert!(matches!(
            decay_fit(&g, &ray, &[4.0, 8.0, 16.0]),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn single_cell_does_not_decay() {
        let g = ShellMeasureGrid::from_cells(
            2,
            1.0 / 64.0,
            vec![(vec![0.3, 0.1], vec![0.2, 0.7], 1.0)],
        )
        .unwrap();
        let fit = decay_fit(&g, &[1.0, 0.0, 0.0, 1.0], &[2.0, 4.0, 8.0, 16.0]).unwrap();
        assert!(fit.gamma_hat.abs() < 1e-9);
    }

    #[test]
    fn smooth_bump_decays_fast() {
        // weights Π sin²(π x_i) over the full grid of [0,1]^4
        let h = 1.0 / 32.0;
        let mut cells = Vec::new();
        let c = |i: usize| (i as f64 + 0.5) * h;
        let bump = |x: f64| (std::f64::consts::PI * x).sin().powi(2);
        for a in 0..32 {
            for b in 0..32 {
                for e in 0..32 {
                    for f in 0..32 {
                        let w = bump(c(a)) * bump(c(b)) * bump(c(e)) * bump(c(f));
                        cells.push((vec![c(a), c(b)], vec![c(e), c(f)], w));
                    }
                }
            }
        }
        let g = ShellMeasureGrid::from_cells(2, h, cells).unwrap();
        let fit = decay_fit(&g, &[1.0, 0.0, 0.0, 1.0], &[2.5, 4.5, 6.5, 8.5]).unwrap();
        assert!(fit.gamma_hat > 2.0, "gamma = {}", fit.gamma_hat);
    }

    #[test]
    fn right_angle_shell_decreases() {
        let g = build_shell_grid(2, 0.0, 0.05, 1.0 / 64.0).unwrap();
        let at = |l: f64| fourier_sample(&g, &[l, 0.0], &[0.0, l]).unwrap();
        let (m4, m16) = (at(4.0), at(16.0));
        // numpy quadrature: 0.49079 and 0.33404
        assert!((m4 - 0.490790).abs() < 1e-5, "{m4}");
        assert!((m16 - 0.334041).abs() < 1e-5, "{m16}");
        assert!(m16 < m4);
    }
}
