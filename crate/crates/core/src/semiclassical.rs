//! Broken-symmetry mean-field equilibria.
//!
//! Above threshold the displacement amplitudes are purely imaginary and the
//! equilibrium conditions are linear in the squared magnitudes
//! `x_n = |alpha_n|^2`, `y_n = |beta_n|^2`:
//!
//! ```text
//! x_n + a y_n + b y_{n-1} = g_n^2
//! y_n + a x_n + b x_{n+1} = g_n^2        a = mu (1 - delta)/2, b = mu (1 + delta)/2
//! ```
//!
//! with `y_0 = x_{N+1} = 0` on an open chain and cyclic indices on a ring.
//! `g_n^2 = (lambda_n - omega)/(2 eps_L)` carries the boundary drive reduction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{correlation_length, derive_params, Boundary, ChainConfig, DerivedParams, MaybeDefined};

pub const PBC_TOLERANCE: f64 = 1e-14;
pub const OBC_TOLERANCE: f64 = 1e-10;
pub const NEWTON_TOLERANCE: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 200;
const DAMPING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    AnalyticPbc,
    AnalyticObc,
    Newton,
}

/// Constants of the open-chain closed form
/// `|alpha_n|^2 = gbar^2 + c1 e^{-n/tau} + c2 e^{n/tau}`.
///
/// `c2` is tiny for long chains, so `ln_r` keeps
/// `R = mu e^{N/tau} [(1 - delta) e^{1/tau} + 1 + delta]` in log form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObcConstants {
    pub c1: f64,
    pub c2: f64,
    pub ln_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalProfile {
    /// `|alpha_n|^2`, index 0 is cell 1.
    pub alpha_sq: Vec<f64>,
    pub beta_sq: Vec<f64>,
    pub boundary: Boundary,
    pub source: ProfileSource,
    /// Max-norm equation defect in units of `g^2`.
    pub residual: f64,
    pub obc_constants: Option<ObcConstants>,
}

impl SemiclassicalProfile {
    pub fn n_cells(&self) -> usize {
        self.alpha_sq.len()
    }
}

/// Per-equation defects `F(z)` with `z = (x_1..x_N, y_1..y_N)`.
fn defects(cfg: &ChainConfig, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = cfg.n_cells;
    let mu = cfg.mu();
    let delta = cfg.delta_or_zero();
    let a = 0.5 * mu * (1.0 - delta);
    let b = 0.5 * mu * (1.0 + delta);
    let periodic = cfg.boundary == Boundary::Periodic;
    let g2 = |drive: f64| (drive - cfg.omega) / (2.0 * cfg.eps_l);
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let y_prev = match (i, periodic) {
            (0, true) => y[n - 1],
            (0, false) => 0.0,
            _ => y[i - 1],
        };
        out.push(x[i] + a * y[i] + b * y_prev - g2(cfg.drive_a(i)));
    }
    for i in 0..n {
        let x_next = match (i + 1 == n, periodic) {
            (true, true) => x[0],
            (true, false) => 0.0,
            _ => x[i + 1],
        };
        out.push(y[i] + a * x[i] + b * x_next - g2(cfg.drive_b(i)));
    }
    out
}

/// Max equation defect of `(alpha_sq, beta_sq)` divided by `g^2`, using the
/// closure implied by `cfg.boundary` and the reduced boundary drives.
pub fn mean_field_residual(cfg: &ChainConfig, alpha_sq: &[f64], beta_sq: &[f64]) -> Result<f64> {
    if alpha_sq.len() != cfg.n_cells || beta_sq.len() != cfg.n_cells {
        return Err(Error::Shape(format!(
            "profile has {}/{} entries, configuration has {} cells",
            alpha_sq.len(),
            beta_sq.len(),
            cfg.n_cells
        )));
    }
    let scale = cfg.g_sq().abs().max(f64::MIN_POSITIVE);
    Ok(defects(cfg, alpha_sq, beta_sq)
        .into_iter()
        .fold(0.0f64, |m, d| m.max(d.abs()))
        / scale)
}

/// Constant Jacobian of [`defects`].
fn jacobian(cfg: &ChainConfig) -> DMatrix<f64> {
    let n = cfg.n_cells;
    let mu = cfg.mu();
    let delta = cfg.delta_or_zero();
    let a = 0.5 * mu * (1.0 - delta);
    let b = 0.5 * mu * (1.0 + delta);
    let periodic = cfg.boundary == Boundary::Periodic;
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, i)] = 1.0;
        j[(i, n + i)] += a;
        if i > 0 {
            j[(i, n + i - 1)] += b;
        } else if periodic {
            j[(i, 2 * n - 1)] += b;
        }
        j[(n + i, n + i)] = 1.0;
        j[(n + i, i)] += a;
        if i + 1 < n {
            j[(n + i, i + 1)] += b;
        } else if periodic {
            j[(n + i, 0)] += b;
        }
    }
    j
}

fn require_above_threshold(cfg: &ChainConfig) -> Result<()> {
    if cfg.lambda <= cfg.omega {
        return Err(Error::Regime(format!(
            "no broken-symmetry solution below threshold (lambda = {} <= omega = {})",
            cfg.lambda, cfg.omega
        )));
    }
    Ok(())
}

pub fn solve_pbc(cfg: &ChainConfig) -> Result<SemiclassicalProfile> {
    cfg.validate()?;
    cfg.require_homogeneous_ssb()?;
    if cfg.boundary != Boundary::Periodic {
        return Err(Error::BoundaryMismatch {
            profile: Boundary::Periodic,
            config: cfg.boundary,
        });
    }
    let gbar_sq = cfg.g_sq() / (1.0 + cfg.mu());
    let alpha_sq = vec![gbar_sq; cfg.n_cells];
    let beta_sq = alpha_sq.clone();
    let residual = mean_field_residual(cfg, &alpha_sq, &beta_sq)?;
    Ok(SemiclassicalProfile {
        alpha_sq,
        beta_sq,
        boundary: Boundary::Periodic,
        source: ProfileSource::AnalyticPbc,
        residual,
        obc_constants: None,
    })
}

/// Closed-form open-chain profile. Exact up to corrections of relative order
/// `e^{-2N/tau}`; the stored residual measures them.
pub fn solve_obc_analytic(cfg: &ChainConfig) -> Result<SemiclassicalProfile> {
    cfg.validate()?;
    cfg.require_homogeneous_ssb()?;
    if cfg.boundary != Boundary::Open {
        return Err(Error::BoundaryMismatch {
            profile: Boundary::Open,
            config: cfg.boundary,
        });
    }
    if cfg.delta_lambda != 0.0 {
        return Err(Error::InvalidConfig(
            "the closed-form open-chain profile needs delta_lambda = 0; use the Newton solver".into(),
        ));
    }
    let mu = cfg.mu();
    let delta = cfg.delta().ok_or_else(|| Error::TauUndefined("no cross-Kerr coupling".into()))?;
    if delta.abs() >= 1.0 {
        return Err(Error::DegenerateDelta);
    }
    let tau = match correlation_length(mu, delta) {
        MaybeDefined::Defined { value } => value,
        MaybeDefined::Undefined { reason } => return Err(Error::TauUndefined(format!("{reason:?}"))),
    };
    let n = cfg.n_cells;
    let nf = n as f64;
    let gbar_sq = cfg.g_sq() / (1.0 + mu);
    let inv = 1.0 / tau;
    let s = (1.0 - delta) * inv.exp() + (1.0 + delta);
    let ln_r = mu.ln() + nf * inv + s.ln();
    let pref = 2.0 / (mu * s);
    let alpha_sq: Vec<f64> = (1..=n)
        .map(|i| {
            let m = (n + 1 - i) as f64;
            // 4 sinh(m/tau)/R rewritten without the overflowing e^{N/tau}.
            let edge = pref * (((1.0 - i as f64) * inv).exp() - (-(m + nf) * inv).exp());
            gbar_sq * (edge + 1.0 - (-m * inv).exp())
        })
        .collect();
    let beta_sq: Vec<f64> = alpha_sq.iter().rev().copied().collect();
    let constants = ObcConstants {
        c1: gbar_sq * pref * inv.exp(),
        c2: -gbar_sq * (1.0 + 2.0 * (-ln_r).exp()) * (-(nf + 1.0) * inv).exp(),
        ln_r,
    };
    let residual = mean_field_residual(cfg, &alpha_sq, &beta_sq)?;
    Ok(SemiclassicalProfile {
        alpha_sq,
        beta_sq,
        boundary: Boundary::Open,
        source: ProfileSource::AnalyticObc,
        residual,
        obc_constants: Some(constants),
    })
}

/// Starting point for Newton: the closed form where it exists, else `gbar^2`.
fn initial_guess(cfg: &ChainConfig) -> (Vec<f64>, Vec<f64>) {
    let plain = ChainConfig { delta_lambda: 0.0, ..*cfg };
    let analytic = match cfg.boundary {
        Boundary::Periodic => solve_pbc(&plain),
        Boundary::Open => solve_obc_analytic(&plain),
    };
    match analytic {
        Ok(p) => (p.alpha_sq, p.beta_sq),
        Err(_) => {
            let gbar_sq = cfg.g_sq() / (1.0 + cfg.mu());
            (vec![gbar_sq; cfg.n_cells], vec![gbar_sq; cfg.n_cells])
        }
    }
}

/// Damped Newton iteration on the `2N` squared magnitudes. Works for any
/// boundary, `|delta| = 1` and reduced boundary drives.
pub fn solve_newton(cfg: &ChainConfig) -> Result<SemiclassicalProfile> {
    cfg.validate()?;
    require_above_threshold(cfg)?;
    let n = cfg.n_cells;
    let scale = cfg.g_sq();
    let lu = jacobian(cfg).lu();
    let (x0, y0) = initial_guess(cfg);
    let mut z: Vec<f64> = x0.into_iter().chain(y0).collect();
    let norm = |f: &[f64]| f.iter().fold(0.0f64, |m, d| m.max(d.abs())) / scale;
    let mut f = defects(cfg, &z[..n], &z[n..]);
    let mut res = norm(&f);
    let mut iterations = 0;
    while res > NEWTON_TOLERANCE {
        if iterations == NEWTON_MAX_ITER {
            return Err(Error::NoConvergence { iterations, residual: res });
        }
        iterations += 1;
        let step = lu
            .solve(&DVector::from_vec(f.clone()))
            .ok_or(Error::NoConvergence { iterations, residual: res })?;
        // Full step first, then halve until the residual decreases.
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(zi, si)| zi - t * si).collect();
            let f_trial = defects(cfg, &trial[..n], &trial[n..]);
            let r_trial = norm(&f_trial);
            if r_trial < res || t < 1e-8 {
                z = trial;
                f = f_trial;
                res = r_trial;
                break;
            }
            t *= DAMPING;
        }
    }
    if let Some((index, &value)) = z.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeAmplitude { index, value });
    }
    let beta_sq = z.split_off(n);
    Ok(SemiclassicalProfile {
        alpha_sq: z,
        beta_sq,
        boundary: cfg.boundary,
        source: ProfileSource::Newton,
        residual: res,
        obc_constants: None,
    })
}

/// Analytic solver where it applies, Newton otherwise.
pub fn solve_auto(cfg: &ChainConfig) -> Result<SemiclassicalProfile> {
    let analytic = match cfg.boundary {
        Boundary::Periodic => solve_pbc(cfg),
        Boundary::Open => solve_obc_analytic(cfg),
    };
    match analytic {
        Ok(p) if p.residual <= OBC_TOLERANCE => Ok(p),
        _ => solve_newton(cfg),
    }
}

/// Cells `n_lo..=n_hi` (one-based) away from the edge inhomogeneity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BulkWindow {
    pub n_lo: usize,
    pub n_hi: usize,
}

impl BulkWindow {
    pub fn is_empty(&self) -> bool {
        self.n_lo > self.n_hi
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            self.n_hi - self.n_lo + 1
        }
    }

    /// Zero-based cell indices.
    pub fn indices(&self) -> std::ops::Range<usize> {
        if self.is_empty() {
            0..0
        } else {
            self.n_lo - 1..self.n_hi
        }
    }
}

/// `n_lo = ceil(10 tau)`, `n_hi = floor(N + 1 - 10 tau)`, clamped to `[1, N]`.
/// An empty window (`n_lo > n_hi`) is returned as is; check
/// [`BulkWindow::is_empty`].
pub fn bulk_window(derived: &DerivedParams, n_cells: usize) -> Result<BulkWindow> {
    let tau = derived
        .tau
        .value()
        .ok_or_else(|| Error::TauUndefined(format!("{:?}", derived.tau)))?;
    Ok(bulk_window_for_tau(tau, n_cells))
}

pub fn bulk_window_for_tau(tau: f64, n_cells: usize) -> BulkWindow {
    let n = n_cells as f64;
    let lo = (10.0 * tau).ceil().clamp(1.0, n) as usize;
    let hi = (n + 1.0 - 10.0 * tau).floor().clamp(1.0, n) as usize;
    BulkWindow { n_lo: lo, n_hi: hi }
}

/// Convenience: derived parameters plus the window for `cfg`.
pub fn bulk_window_for(cfg: &ChainConfig) -> Result<BulkWindow> {
    bulk_window(&derive_params(cfg)?, cfg.n_cells)
}
