//! Ring (periodic) chain in momentum space: two Bogoliubov bands, their
//! squeezing angles and the winding of the inter-band coupling `J_k`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::QuadraticCoefficients;
use crate::model::ChainConfig;
use crate::output::{CsvTable, Field};

pub const ZAK_CONTOUR_POINTS: usize = 4096;
const ZAK_MAX_POINTS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "+")]
    Plus,
}

impl Band {
    pub fn eta(self) -> f64 {
        match self {
            Band::Minus => -1.0,
            Band::Plus => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "points", rename_all = "snake_case")]
pub enum KGrid {
    /// `k = 2 pi s / N` over the first Brillouin zone.
    ExactFbz,
    /// `M` uniform points in `(-pi, pi]`.
    Dense(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStructure {
    pub grid: KGrid,
    pub k_values: Vec<f64>,
    pub e_minus: Vec<f64>,
    pub e_plus: Vec<f64>,
    pub j_k: Vec<Complex64>,
    pub nu_minus: Vec<f64>,
    pub nu_plus: Vec<f64>,
    /// Distinct one-particle levels once `E(k) = E(-k)` is used: `N + 2` for
    /// even `N` on the exact zone, `N + 1` for odd `N`.
    pub distinct_levels: usize,
}

/// Band energies at the gap (`k = pi`) and at the zone center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandEdges {
    pub e_minus_pi: f64,
    pub e_plus_pi: f64,
    pub e_minus_0: f64,
    pub e_plus_0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZakResult {
    pub band: Band,
    pub winding: i32,
    /// `eta` times the accumulated change of `theta_k = -arg J_k` over the zone.
    pub phase_accumulated: f64,
    pub delta: f64,
    pub contour_points: usize,
}

/// `J_k = mu (lambda - omega)/(1 + mu) [(1 - delta)/2 + (1 + delta)/2 e^{-ik}]`.
pub fn coupling(cfg: &ChainConfig, k: f64) -> Complex64 {
    let mu = cfg.mu();
    let delta = cfg.delta_or_zero();
    let amp = mu * (cfg.lambda - cfg.omega) / (1.0 + mu);
    amp * (Complex64::new(0.5 * (1.0 - delta), 0.0) + 0.5 * (1.0 + delta) * Complex64::new(0.0, -k).exp())
}

/// `(E_k^-, E_k^+)`.
pub fn dispersion(cfg: &ChainConfig, k: f64) -> Result<(f64, f64)> {
    cfg.validate()?;
    cfg.require_homogeneous_ssb()?;
    Ok(dispersion_unchecked(cfg, k))
}

fn dispersion_unchecked(cfg: &ChainConfig, k: f64) -> (f64, f64) {
    let mu = cfg.mu();
    let delta = cfg.delta_or_zero();
    let d2 = delta * delta;
    let wh = 2.0 * (cfg.lambda * (cfg.lambda - cfg.omega)).sqrt();
    let r = (0.5 * (1.0 + d2) + 0.5 * (1.0 - d2) * k.cos()).max(0.0).sqrt();
    let e = |eta: f64| wh * ((1.0 + eta * mu * r) / (1.0 + mu)).sqrt();
    (e(-1.0), e(1.0))
}

pub fn band_edges(cfg: &ChainConfig) -> Result<BandEdges> {
    let (e_minus_pi, e_plus_pi) = dispersion(cfg, PI)?;
    let (e_minus_0, e_plus_0) = dispersion(cfg, 0.0)?;
    Ok(BandEdges { e_minus_pi, e_plus_pi, e_minus_0, e_plus_0 })
}

/// The exact first-zone integers `s` with `k = 2 pi s / N`.
pub fn fbz_indices(n_cells: usize) -> std::ops::RangeInclusive<i64> {
    let n = n_cells as i64;
    if n % 2 == 0 {
        (-n / 2 + 1)..=(n / 2)
    } else {
        (-(n - 1) / 2)..=((n - 1) / 2)
    }
}

pub fn band_structure(cfg: &ChainConfig, grid: KGrid) -> Result<BandStructure> {
    cfg.validate()?;
    cfg.require_homogeneous_ssb()?;
    let k_values: Vec<f64> = match grid {
        KGrid::ExactFbz => {
            let n = cfg.n_cells as f64;
            fbz_indices(cfg.n_cells).map(|s| 2.0 * PI * s as f64 / n).collect()
        }
        KGrid::Dense(m) => {
            if m < 2 {
                return Err(Error::InvalidConfig(format!("dense grid needs at least 2 points, got {m}")));
            }
            (0..m).map(|j| -PI + 2.0 * PI * (j + 1) as f64 / m as f64).collect()
        }
    };
    let mut bs = BandStructure {
        grid,
        k_values: k_values.clone(),
        e_minus: Vec::with_capacity(k_values.len()),
        e_plus: Vec::with_capacity(k_values.len()),
        j_k: Vec::with_capacity(k_values.len()),
        nu_minus: Vec::with_capacity(k_values.len()),
        nu_plus: Vec::with_capacity(k_values.len()),
        distinct_levels: 0,
    };
    for &k in &k_values {
        let (em, ep) = dispersion_unchecked(cfg, k);
        bs.e_minus.push(em);
        bs.e_plus.push(ep);
        bs.j_k.push(coupling(cfg, k));
        bs.nu_minus.push(bogoliubov_angle(cfg, k, Band::Minus)?);
        bs.nu_plus.push(bogoliubov_angle(cfg, k, Band::Plus)?);
    }
    bs.distinct_levels = 2 * distinct_abs_k(&k_values);
    Ok(bs)
}

/// Number of distinct `|k|` classes (momenta equal up to sign and `2 pi`).
fn distinct_abs_k(ks: &[f64]) -> usize {
    let mut reps: Vec<f64> = ks
        .iter()
        .map(|&k| {
            let w = k.rem_euclid(2.0 * PI);
            w.min(2.0 * PI - w)
        })
        .collect();
    reps.sort_by(f64::total_cmp);
    reps.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    reps.len()
}

/// Squeezing angle `nu` with `tanh 2nu = (Lambda - eta|J_k|)/(Omega + eta|J_k|)`.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
pub fn bogoliubov_angle(cfg: &ChainConfig, k: f64, band: Band) -> Result<f64> {
    let c = QuadraticCoefficients::pbc_constants(cfg);
    let j = band.eta() * coupling(cfg, k).norm();
    let ratio = (c.lambda - j) / (c.omega + j);
    if !(ratio.abs() < 1.0) {
        return Err(Error::StabilityViolation { ratio: ratio.abs() });
    }
    Ok(0.5 * ratio.atanh())
}

/// Band energy reconstructed from the squeezing angle,
/// `E = (Omega + eta|J_k|) / cosh 2nu`.
pub fn angle_energy(cfg: &ChainConfig, k: f64, band: Band) -> Result<f64> {
    let nu = bogoliubov_angle(cfg, k, band)?;
    let c = QuadraticCoefficients::pbc_constants(cfg);
    let j = band.eta() * coupling(cfg, k).norm();
    Ok((c.omega + j) / (2.0 * nu).cosh())
}

/// Zak invariant of `band`, computed as the winding of `J_k` about the origin.
pub fn zak_phase(cfg: &ChainConfig, band: Band) -> Result<ZakResult> {
    cfg.validate()?;
    let delta = cfg.delta_or_zero();
    if delta == 0.0 || cfg.mu() == 0.0 || cfg.lambda == cfg.omega {
        return Err(Error::GapClosed { delta });
    }
    let mut points = ZAK_CONTOUR_POINTS;
    let total = loop {
        let (total, max_step) = accumulate_theta(cfg, points);
        if max_step <= PI / 2.0 || points >= ZAK_MAX_POINTS {
            break total;
        }
        points *= 2;
    };
    let phase = band.eta() * total;
    Ok(ZakResult {
        band,
        winding: (phase / (2.0 * PI)).round() as i32,
        phase_accumulated: phase,
        delta,
        contour_points: points,
    })
}

/// Sum of wrapped increments of `theta_k = -arg J_k` over `k` from `-pi` to `pi`,
/// and the largest single increment.
fn accumulate_theta(cfg: &ChainConfig, points: usize) -> (f64, f64) {
    let theta = |k: f64| -coupling(cfg, k).arg();
    let mut prev = theta(-PI);
    let mut total = 0.0;
    let mut max_step = 0.0f64;
    for j in 1..=points {
        let k = -PI + 2.0 * PI * j as f64 / points as f64;
        let cur = theta(k);
        let mut d = cur - prev;
        if d > PI {
            d -= 2.0 * PI;
        } else if d <= -PI {
            d += 2.0 * PI;
        }
        total += d;
        max_step = max_step.max(d.abs());
        prev = cur;
    }
    (total, max_step)
}

impl BandStructure {
    pub fn csv_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["k", "e_minus", "e_plus", "re_jk", "im_jk", "nu_minus", "nu_plus"]);
        for i in 0..self.k_values.len() {
            t.push(vec![
                self.k_values[i].into(),
                self.e_minus[i].into(),
                self.e_plus[i].into(),
                self.j_k[i].re.into(),
                self.j_k[i].im.into(),
                self.nu_minus[i].into(),
                self.nu_plus[i].into(),
            ]);
        }
        t
    }

    /// Smallest `e_plus - e_minus` and the momentum where it occurs.
    pub fn min_gap(&self) -> (f64, f64) {
        self.k_values
            .iter()
            .zip(self.e_plus.iter().zip(&self.e_minus))
            .map(|(&k, (p, m))| (p - m, k))
            .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a })
    }
}

/// Gap and band edges along a staggering sweep at fixed `mu`.
pub fn gap_table(cfg: &ChainConfig, deltas: &[f64]) -> Result<CsvTable> {
    let mut t = CsvTable::new(&["delta", "gap", "e_minus_pi", "e_plus_pi", "e_minus_0", "e_plus_0"]);
    for &d in deltas {
        let e = band_edges(&cfg.with_delta(d))?;
        t.push(vec![
            Field::Float(d),
            Field::Float(e.e_plus_pi - e.e_minus_pi),
            Field::Float(e.e_minus_pi),
            Field::Float(e.e_plus_pi),
            Field::Float(e.e_minus_0),
            Field::Float(e.e_plus_0),
        ]);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Boundary;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn ring(mu: f64, delta: f64, n: usize) -> ChainConfig {
        ChainConfig::from_dimensionless(1.0, 2.0, 0.02, mu, delta, n, Boundary::Periodic, 0.0)
    }

    /// Positive eigenvalues of the one-momentum dynamical matrix in the basis
    /// `(d_Ak, d_Bk, d+_{A,-k}, d+_{B,-k})`, via its real 8x8 embedding.
    fn block_energies(cfg: &ChainConfig, k: f64) -> Vec<f64> {
        let c = QuadraticCoefficients::pbc_constants(cfg);
        let j = coupling(cfg, k);
        let o = Complex64::new(c.omega, 0.0);
        let l = Complex64::new(c.lambda, 0.0);
        let rows = [
            [o, j, l, -j],
            [j.conj(), o, -j.conj(), l],
            [-l, j, -o, -j],
            [j.conj(), -l, -j.conj(), -o],
        ];
        let mut m = DMatrix::<f64>::zeros(8, 8);
        for r in 0..4 {
            for s in 0..4 {
                m[(r, s)] = rows[r][s].re;
                m[(r + 4, s + 4)] = rows[r][s].re;
                m[(r, s + 4)] = -rows[r][s].im;
                m[(r + 4, s)] = rows[r][s].im;
            }
        }
        let mut e: Vec<f64> = m.complex_eigenvalues().iter().filter(|v| v.re > 0.0).map(|v| v.re).collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn dispersion_matches_numeric_block() {
        for &(mu, delta) in &[(0.1, 0.5), (0.7, -0.3), (0.4, 0.95)] {
            let c = ring(mu, delta, 10);
            for i in 0..16 {
                let k = -PI + 2.0 * PI * (i as f64 + 0.5) / 16.0;
                let (em, ep) = dispersion(&c, k).unwrap();
                let e = block_energies(&c, k);
                assert_eq!(e.len(), 4);
                assert_relative_eq!(e[0], em, max_relative = 1e-10);
                assert_relative_eq!(e[1], em, max_relative = 1e-10);
                assert_relative_eq!(e[3], ep, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn gap_closes_at_zero_staggering() {
        let c = ring(0.3, 0.0, 10);
        let (em, ep) = dispersion(&c, PI).unwrap();
        assert!((ep - em).abs() < 1e-12);
        assert_relative_eq!(em, 2.0 * 2f64.sqrt() / 1.3f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn flat_bands_at_saturated_staggering() {
        let wh = 2.0 * 2f64.sqrt();
        for delta in [-1.0, 1.0] {
            let c = ring(0.4, delta, 10);
            for i in 0..9 {
                let (em, ep) = dispersion(&c, -PI + i as f64 * 0.7).unwrap();
                assert!((em - wh * (0.6f64 / 1.4).sqrt()).abs() < 1e-12);
                assert!((ep - wh * (1.4f64 / 1.4).sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gap_value_example() {
        let c = ring(0.1, 0.5, 10);
        let wh = 2.0 * 2f64.sqrt();
        let (em, ep) = dispersion(&c, PI).unwrap();
        let expect = wh * ((1.05f64 / 1.1).sqrt() - (0.95f64 / 1.1).sqrt());
        assert_relative_eq!(ep - em, expect, max_relative = 1e-12);
        assert!(((ep - em) / wh - 0.0477).abs() < 5e-4);
    }

    #[test]
    fn fbz_level_counting() {
        let b4 = band_structure(&ring(0.1, 0.5, 4), KGrid::ExactFbz).unwrap();
        assert_eq!(b4.k_values.len(), 4);
        assert_eq!(b4.distinct_levels, 6);
        let b5 = band_structure(&ring(0.1, 0.5, 5), KGrid::ExactFbz).unwrap();
        assert_eq!(b5.distinct_levels, 6);
        assert_eq!(fbz_indices(4), -1..=2);
        assert_eq!(fbz_indices(5), -2..=2);
    }

    #[test]
    fn dense_grid_gap_at_pi() {
        let c = ring(0.1, 0.5, 10);
        let b = band_structure(&c, KGrid::Dense(1024)).unwrap();
        let (gap, k) = b.min_gap();
        assert_relative_eq!(k, PI, max_relative = 1e-15);
        let (em, ep) = dispersion(&c, PI).unwrap();
        assert!((gap - (ep - em)).abs() < 1e-12);
    }

    #[test]
    fn angles() {
        let c = ring(0.0, 0.0, 4);
        let nu = bogoliubov_angle(&c, 0.3, Band::Plus).unwrap();
        assert_relative_eq!((2.0 * nu).tanh(), 1.0 / 3.0, max_relative = 1e-14);
        let c = ring(0.3, 0.0, 4);
        assert_relative_eq!(
            bogoliubov_angle(&c, PI, Band::Plus).unwrap(),
            bogoliubov_angle(&c, PI, Band::Minus).unwrap(),
            max_relative = 1e-12
        );
        let c = ring(0.1, 0.5, 4);
        for band in [Band::Minus, Band::Plus] {
            let (em, ep) = dispersion(&c, 0.0).unwrap();
            let e = if band == Band::Plus { ep } else { em };
            assert_relative_eq!(angle_energy(&c, 0.0, band).unwrap(), e, max_relative = 1e-12);
        }
    }

    #[test]
    fn zak_examples() {
        let p = zak_phase(&ring(0.1, 0.5, 4), Band::Plus).unwrap();
        assert_eq!(p.winding, 1);
        assert!((p.phase_accumulated - 2.0 * PI).abs() < 1e-6);
        assert_eq!(zak_phase(&ring(0.1, 0.5, 4), Band::Minus).unwrap().winding, -1);
        for band in [Band::Minus, Band::Plus] {
            let z = zak_phase(&ring(0.1, -0.5, 4), band).unwrap();
            assert_eq!(z.winding, 0);
            assert!(z.phase_accumulated.abs() < 1e-6);
        }
        assert!(matches!(zak_phase(&ring(0.1, 0.0, 4), Band::Plus), Err(Error::GapClosed { .. })));
    }

    #[test]
    fn regime_guard() {
        assert!(matches!(dispersion(&ring(1.2, 0.1, 4), 0.0), Err(Error::Regime(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bands_even_positive_ordered(mu in 0.0f64..0.999, delta in -1.0f64..=1.0, k in -PI..PI) {
                let c = ring(mu, delta, 8);
                let (em, ep) = dispersion(&c, k).unwrap();
                let (em2, ep2) = dispersion(&c, -k).unwrap();
                prop_assert!((em - em2).abs() <= 1e-14 * em && (ep - ep2).abs() <= 1e-14 * ep);
                prop_assert!(ep >= em && em > 0.0);
                let (gm, gp) = dispersion(&c, PI).unwrap();
                prop_assert!(gp - gm <= ep - em + 1e-14);
            }

            #[test]
            fn winding_quantized(mu in 0.01f64..0.99, delta in prop_oneof![-0.99f64..-0.01, 0.01f64..0.99]) {
                let c = ring(mu, delta, 8);
                let z = zak_phase(&c, Band::Plus).unwrap();
                let expected = if delta > 0.0 { 1 } else { 0 };
                prop_assert_eq!(z.winding, expected);
                prop_assert!((z.phase_accumulated - 2.0 * PI * expected as f64).abs() <= 1e-6);
            }
        }
    }
}
