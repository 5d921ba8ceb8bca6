//! Edge-mode death and revival: the tridiagonal effective model, closed-form
//! boundary energies for the reduced edge drive and the two localization
//! thresholds. Each closed form comes with a numeric counterpart.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::band_edges;
use crate::bdg::{assemble, diagonalize, spectrum_point, Localization, SpectrumPoint};
use crate::error::{Error, Result};
use crate::gaussian::QuadraticCoefficients;
use crate::model::{Boundary, ChainConfig};
use crate::output::{CsvTable, Field};

/// Resolution of threshold bisections in `delta`.
/// Edge weight above which an unfittable mode is treated as compact.
const COMPACT_EDGE_WEIGHT: f64 = 0.99;

pub const THRESHOLD_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToeplitzSpectrum {
    /// `E_nu = omega_H + 2 t cos(pi nu / (M + 1))` for `nu = 1..=M`.
    pub energies: Vec<f64>,
    /// `gamma_nu(l) = sqrt(2/(M + 1)) sin(pi nu l / (M + 1))`, `l = 1..=M`.
    pub modes: Vec<Vec<f64>>,
}

pub fn toeplitz_matrix(n_modes: usize, omega_h: f64, t: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n_modes, n_modes, |i, j| {
        if i == j {
            omega_h
        } else if i.abs_diff(j) == 1 {
            t
        } else {
            0.0
        }
    })
}

/// Closed-form spectrum of the uniform chain of `n_modes` degenerate modes.
pub fn toeplitz_spectrum(n_modes: usize, omega_h: f64, t: f64) -> Result<ToeplitzSpectrum> {
    if n_modes == 0 {
        return Err(Error::InvalidConfig("need at least one mode".into()));
    }
    let d = (n_modes + 1) as f64;
    let energies = (1..=n_modes).map(|nu| omega_h + 2.0 * t * (PI * nu as f64 / d).cos()).collect();
    let norm = (2.0 / d).sqrt();
    let modes = (1..=n_modes)
        .map(|nu| (1..=n_modes).map(|l| norm * (PI * (nu * l) as f64 / d).sin()).collect())
        .collect();
    Ok(ToeplitzSpectrum { energies, modes })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbedEdge {
    /// `omega_H - delta_wH - t^2 / delta_wH`.
    pub perturbative: f64,
    /// Lowest eigenvalue of the chain with both end modes lowered by `delta_wH`.
    pub exact: f64,
}

/// Toeplitz chain with the two end modes shifted down by `delta_wh`.
pub fn impurity_matrix(n_modes: usize, omega_h: f64, t: f64, delta_wh: f64) -> DMatrix<f64> {
    let mut m = toeplitz_matrix(n_modes, omega_h, t);
    m[(0, 0)] -= delta_wh;
    m[(n_modes - 1, n_modes - 1)] -= delta_wh;
    m
}

#[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
pub fn perturbed_edge_energy(n_modes: usize, omega_h: f64, t: f64, delta_wh: f64) -> Result<PerturbedEdge> {
    if !(delta_wh > 0.0) || t.abs() >= delta_wh {
        return Err(Error::PerturbationInvalid { t, delta_wh });
    }
    if n_modes < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 modes, got {n_modes}")));
    }
    let eig = SymmetricEigen::new(impurity_matrix(n_modes, omega_h, t, delta_wh));
    Ok(PerturbedEdge {
        perturbative: omega_h - delta_wh - t * t / delta_wh,
        exact: eig.eigenvalues.min(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeEnergy {
    pub omega_e: f64,
    /// Above the lower band's upper edge at `delta = 1`.
    pub in_gap: bool,
}

/// Edge-mode energy at `delta = 1` with the boundary drive lowered by
/// `delta_lambda`: `omega_H sqrt((1 - dl/lambda)(1 - dl/(lambda - omega)))`.
pub fn edge_energy_delta1(cfg: &ChainConfig) -> Result<EdgeEnergy> {
    cfg.validate()?;
    cfg.require_homogeneous_ssb()?;
    let (l, w, dl) = (cfg.lambda, cfg.omega, cfg.delta_lambda);
    if dl >= l - w {
        return Err(Error::OutOfValidity(format!(
            "delta_lambda = {dl} must stay below lambda - omega = {}",
            l - w
        )));
    }
    let wh = cfg.omega_h().expect("above threshold");
    let omega_e = wh * ((1.0 - dl / l) * (1.0 - dl / (l - w))).sqrt();
    let lower = band_edges(&cfg.with_delta(1.0))?.e_minus_pi;
    Ok(EdgeEnergy { omega_e, in_gap: omega_e > lower })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpuriousEnergy {
    /// `omega_H (1 - (2 lambda - omega)/(4 (lambda - omega)) dl/lambda)`.
    pub leading_order: f64,
    /// Upper level of the isolated boundary pair `(A1, B1)` at `delta = -1`.
    pub exact: f64,
}

/// Boundary-pair energy at `delta = -1` with the drive on `A1` lowered.
pub fn spurious_energy(cfg: &ChainConfig) -> Result<SpuriousEnergy> {
    cfg.validate()?;
    cfg.require_homogeneous_ssb()?;
    let (l, w, dl) = (cfg.lambda, cfg.omega, cfg.delta_lambda);
    let wh = cfg.omega_h().expect("above threshold");
    let leading_order = wh * (1.0 - (2.0 * l - w) / (4.0 * (l - w)) * dl / l);
    // At delta = -1 the first cell is an isolated pair: x + mu y = g_1^2, y + mu x = g^2.
    let mu = cfg.mu();
    let two_el = 2.0 * cfg.eps_l;
    let g1 = (l - dl - w) / two_el;
    let g = (l - w) / two_el;
    let det = 1.0 - mu * mu;
    let x = (g1 - mu * g) / det;
    let y = (g - mu * g1) / det;
    let eps_1 = 2.0 * cfg.eps_l * mu;
    let pair = QuadraticCoefficients {
        boundary: Boundary::Open,
        omega_a: vec![l - dl + two_el * x],
        omega_b: vec![l + two_el * y],
        lambda_a: vec![l - dl - two_el * x],
        lambda_b: vec![l - two_el * y],
        j1: vec![eps_1 * (x * y).sqrt()],
        j2: vec![],
    };
    let sol = diagonalize(&assemble(&pair)?)?;
    Ok(SpuriousEnergy {
        leading_order,
        exact: sol.energies[1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSpur {
    /// `-1 + 2 (1/mu + 1) dl/lambda`.
    pub analytic: f64,
    /// Where the boundary levels leave the gap on the open chain, if found.
    pub numeric: Option<f64>,
}

fn has_gap_levels(cfg: &ChainConfig, delta: f64) -> bool {
    spectrum_point(&cfg.with_delta(delta)).map(|p| !p.in_gap().is_empty()).unwrap_or(false)
}

/// Threshold above which the impurity-bound boundary modes delocalize.
pub fn delta_spur(cfg: &ChainConfig) -> Result<DeltaSpur> {
    cfg.validate()?;
    cfg.require_homogeneous_ssb()?;
    let mu = cfg.mu();
    let analytic = -1.0 + 2.0 * (1.0 / mu + 1.0) * cfg.delta_lambda / cfg.lambda;
    Ok(DeltaSpur { analytic, numeric: delta_spur_numeric(cfg) })
}

/// First `delta` above `-1` at which the open chain has no in-gap level,
/// refined by bisection.
pub fn delta_spur_numeric(cfg: &ChainConfig) -> Option<f64> {
    if !has_gap_levels(cfg, -1.0) {
        return None;
    }
    let step = 0.01;
    let grid: Vec<f64> = (1..=100).map(|i| -1.0 + step * i as f64).collect();
    let flags: Vec<bool> = grid.par_iter().map(|&d| has_gap_levels(cfg, d)).collect();
    let first = flags.iter().position(|&f| !f)?;
    let (mut lo, mut hi) = (if first == 0 { -1.0 } else { grid[first - 1] }, grid[first]);
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if has_gap_levels(cfg, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Boundary-mode energy behind the spurious-length estimate, in units of
/// `omega_H`: `1 - dl/(2 lambda) - lambda/(8 dl) (mu (1 + delta)/(1 + mu))^2`.
fn spur_energy_estimate(mu: f64, r: f64, delta: f64) -> f64 {
    let hop = mu * (1.0 + delta) / (1.0 + mu);
    1.0 - 0.5 * r - hop * hop / (8.0 * r)
}

/// First `delta` above `-1` where the estimated boundary energy reaches the
/// upper band, i.e. where the closed-form length turns imaginary. Beyond it
/// the quadratic estimate falls back into the gap, which is an artifact.
pub fn xi_spur_validity_limit(cfg: &ChainConfig) -> Option<f64> {
    let mu = cfg.mu();
    let r = cfg.delta_lambda / cfg.lambda;
    if mu <= 0.0 || r <= 0.0 {
        return None;
    }
    let upper = |d: f64| ((1.0 + mu * d.abs()) / (1.0 + mu)).sqrt();
    let f = |d: f64| upper(d) - spur_energy_estimate(mu, r, d);
    let step = 1e-3;
    let mut prev = -1.0;
    let mut d = -1.0 + step;
    while d < 0.0 {
        if f(d) <= 0.0 {
            let (mut lo, mut hi) = (prev, d);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(hi);
        }
        prev = d;
        d += step;
    }
    None
}

/// Closed-form estimate of the spurious-mode length (derived for `omega = 0`).
/// `Extended` marks an imaginary result.
pub fn xi_spur_estimate(cfg: &ChainConfig, delta: f64) -> Localization {
    let mu = cfg.mu();
    let r = cfg.delta_lambda / cfg.lambda;
    if mu <= 0.0 || r <= 0.0 {
        return Localization::Extended;
    }
    if xi_spur_validity_limit(cfg).is_some_and(|limit| delta >= limit) {
        return Localization::Extended;
    }
    let e = spur_energy_estimate(mu, r, delta);
    let chi = (1.0 - (1.0 + mu) * e * e) / mu;
    let num = 1.0 - chi * chi;
    let den = 1.0 - delta * delta;
    if den <= 0.0 {
        return if num > 0.0 { Localization::Finite(0.0) } else { Localization::Extended };
    }
    let c = num / den;
    if c > 1.0 {
        Localization::Finite(1.0 / (2.0 * c.sqrt().acosh()))
    } else if c == 1.0 {
        Localization::Divergent
    } else {
        Localization::Extended
    }
}

/// SSH-chain length `1 / ln((1 + delta)/(1 - delta))`.
pub fn xi_ssh(delta: f64) -> f64 {
    1.0 / ((1.0 + delta) / (1.0 - delta)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InsufficientSupport(format!("{} points for a line fit", xs.len().min(ys.len()))));
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(LinearFit {
        slope,
        intercept,
        r_squared: if syy > 0.0 { 1.0 - ss_res / syy } else { 0.0 },
        points: xs.len(),
    })
}

/// Line fit of `1/xi` against `ln((1 + delta)/(1 - delta))`.
pub fn ssh_fit(points: &[(f64, f64)]) -> Result<LinearFit> {
    let xs: Vec<f64> = points.iter().map(|&(d, _)| ((1.0 + d) / (1.0 - d)).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, xi)| 1.0 / xi).collect();
    linear_fit(&xs, &ys)
}

/// Both in-gap modes carry an accepted fit with `xi <= N/2`. A mode too
/// compact to fit (no usable bulk points) counts when it sits on the edges.
fn top_localized(point: &SpectrumPoint, n_cells: usize) -> bool {
    let gap = point.in_gap();
    gap.len() == 2
        && gap.iter().all(|m| match m.xi_fit {
            Some(f) => f.exponential && f.xi <= 0.5 * n_cells as f64,
            None => m.weight_edge >= COMPACT_EDGE_WEIGHT,
        })
}

fn top_localized_at(cfg: &ChainConfig, delta: f64) -> bool {
    spectrum_point(&cfg.with_delta(delta)).map(|p| top_localized(&p, cfg.n_cells)).unwrap_or(false)
}

/// Smallest `delta` above which both topological modes stay localized
/// (`xi_fit <= N/2`) on the rest of the grid, refined to 1e-3.
pub fn delta_top_scan(cfg: &ChainConfig, delta_grid: &[f64]) -> Result<f64> {
    cfg.validate()?;
    cfg.require_homogeneous_ssb()?;
    let mut grid: Vec<f64> = delta_grid.iter().copied().filter(|d| *d > 0.0 && *d <= 1.0).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::InvalidConfig("delta grid has no points in (0, 1]".into()));
    }
    let flags: Vec<bool> = grid.par_iter().map(|&d| top_localized_at(cfg, d)).collect();
    // Start of the trailing run of localized grid points.
    let mut start = grid.len();
    while start > 0 && flags[start - 1] {
        start -= 1;
    }
    if start == grid.len() {
        return Err(Error::NoLocalizedModes);
    }
    if start == 0 {
        return Ok(grid[0]);
    }
    let (mut lo, mut hi) = (grid[start - 1], grid[start]);
    while hi - lo > THRESHOLD_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if top_localized_at(cfg, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiSource {
    Fit,
    Formula,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiCurvePoint {
    pub delta: f64,
    pub xi_topological: Option<f64>,
    pub xi_spurious: Option<f64>,
    pub source: XiSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeAnalysis {
    pub omega_e_top: Option<f64>,
    pub omega_spur: SpuriousEnergy,
    pub delta_spur_analytic: f64,
    pub delta_spur_numeric: Option<f64>,
    /// Absent when no localized topological modes were found.
    pub delta_top: Option<f64>,
    pub xi_curves: Vec<XiCurvePoint>,
    pub ssh_fit: Option<LinearFit>,
    pub warnings: Vec<String>,
}

/// Full edge report over `delta_grid` (both signs).
pub fn edge_analysis(cfg: &ChainConfig, delta_grid: &[f64]) -> Result<EdgeAnalysis> {
    cfg.validate()?;
    cfg.require_homogeneous_ssb()?;
    let mut warnings = Vec::new();
    let omega_e_top = match edge_energy_delta1(cfg) {
        Ok(e) => {
            if !e.in_gap {
                warnings.push(format!(
                    "edge energy {} at delta = 1 lies below the lower band edge; delta_lambda too large",
                    e.omega_e
                ));
            }
            Some(e.omega_e)
        }
        Err(e) => {
            warnings.push(e.to_string());
            None
        }
    };
    let omega_spur = spurious_energy(cfg)?;
    let spur = delta_spur(cfg)?;
    let delta_top = match delta_top_scan(cfg, delta_grid) {
        Ok(d) => Some(d),
        Err(Error::NoLocalizedModes) => {
            warnings.push("no localized topological modes on the grid".into());
            None
        }
        Err(e) => {
            warnings.push(e.to_string());
            None
        }
    };
    let points: Vec<(f64, Option<SpectrumPoint>)> = delta_grid
        .par_iter()
        .map(|&d| (d, spectrum_point(&cfg.with_delta(d)).ok()))
        .collect();
    let mut xi_curves = Vec::new();
    let mut ssh_points = Vec::new();
    for (d, point) in points {
        let topo = d > 0.0;
        let make = |xi: Option<f64>, source| XiCurvePoint {
            delta: d,
            xi_topological: if topo { xi } else { None },
            xi_spurious: if topo { None } else { xi },
            source,
        };
        if let Some(p) = point {
            let gap = p.in_gap();
            if gap.len() == 2 {
                let fits: Vec<f64> = gap.iter().filter_map(|m| m.xi_fit.filter(|f| f.exponential).map(|f| f.xi)).collect();
                if fits.len() == 2 {
                    let xi = 0.5 * (fits[0] + fits[1]);
                    xi_curves.push(make(Some(xi), XiSource::Fit));
                    if topo && d < 1.0 {
                        ssh_points.push((d, xi));
                    }
                }
                let formula: Vec<f64> = gap.iter().filter_map(|m| m.xi_formula.value()).collect();
                if formula.len() == 2 {
                    xi_curves.push(make(Some(0.5 * (formula[0] + formula[1])), XiSource::Formula));
                }
            }
        }
        if !topo {
            xi_curves.push(make(xi_spur_estimate(cfg, d).value(), XiSource::Analytic));
        }
    }
    Ok(EdgeAnalysis {
        omega_e_top,
        omega_spur,
        delta_spur_analytic: spur.analytic,
        delta_spur_numeric: spur.numeric,
        delta_top,
        xi_curves,
        ssh_fit: ssh_fit(&ssh_points).ok(),
        warnings,
    })
}

impl EdgeAnalysis {
    pub fn xi_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["delta", "xi_topological", "xi_spurious", "source"]);
        for p in &self.xi_curves {
            let source = match p.source {
                XiSource::Fit => "fit",
                XiSource::Formula => "formula",
                XiSource::Analytic => "analytic",
            };
            t.push(vec![
                Field::Float(p.delta),
                p.xi_topological.into(),
                p.xi_spurious.into(),
                Field::Text(source.into()),
            ]);
        }
        t
    }
}
