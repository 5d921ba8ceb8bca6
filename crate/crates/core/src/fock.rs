//! Exact diagonalization of a single two-resonator cell in a truncated Fock
//! space, plus the Husimi function on the imaginary-amplitude slice.
//!
//! The basis is the product `|n_A> |n_B>` with index `n_A * D + n_B`. The drive
//! changes each occupation by two, so the four sectors of fixed
//! `(n_A mod 2, n_B mod 2)` decouple and are diagonalized independently.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ChainConfig;
use crate::output::{CsvTable, Field};

pub const MIN_CUTOFF: usize = 8;
/// Extra Fock states per mode used to certify the ground energy.
pub const CERTIFY_STEP: usize = 10;
pub const CONVERGENCE_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_RESOLUTION: usize = 201;
pub const PEAK_FLOOR: f64 = 0.5;
pub const RING_THRESHOLD: f64 = 0.9;
const RING_ANGLE_BINS: usize = 72;
const RING_MIN_COVERAGE: f64 = 0.9;

/// Parameters of one cell: local terms of both modes and the intra-cell
/// cross-Kerr strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub omega: f64,
    pub lambda: f64,
    pub eps_l: f64,
    pub eps_1: f64,
}

impl CellParams {
    /// Single-cell restriction of a chain: the inter-cell coupling and the
    /// chain length are ignored.
    pub fn from_config(cfg: &ChainConfig) -> Result<Self> {
        CellParams {
            omega: cfg.omega,
            lambda: cfg.lambda,
            eps_l: cfg.eps_l,
            eps_1: cfg.eps_1,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if ![self.omega, self.lambda, self.eps_l, self.eps_1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("cell parameters must be finite".into()));
        }
        if self.eps_l <= 0.0 {
            return Err(Error::InvalidConfig(format!("eps_L must be positive, got {}", self.eps_l)));
        }
        if self.omega < 0.0 || self.lambda < 0.0 || self.eps_1 < 0.0 {
            return Err(Error::InvalidConfig("omega, lambda and eps_1 must be non-negative".into()));
        }
        Ok(self)
    }

    pub fn mu(&self) -> f64 {
        self.eps_1 / (2.0 * self.eps_l)
    }

    /// Single-mode semiclassical amplitude `g`, absent below threshold.
    pub fn g(&self) -> Option<f64> {
        (self.lambda > self.omega).then(|| ((self.lambda - self.omega) / (2.0 * self.eps_l)).sqrt())
    }

    /// Amplitude of the homogeneous broken-symmetry solution of the cell.
    pub fn gbar(&self) -> Option<f64> {
        self.g().map(|g| g / (1.0 + self.mu()).sqrt())
    }

    /// Default half-width of the Husimi window.
    pub fn default_range(&self) -> f64 {
        self.g().map(|g| 1.5 * g).unwrap_or(3.0)
    }

    /// The four reference cells: `omega = 1`, `eps_L = 0.02`, and
    /// `(lambda, eps_1)` = (0, eps_L), (2, eps_L), (2, 2 eps_L), (2, 3 eps_L).
    pub fn reference_panels() -> [(char, CellParams); 4] {
        let p = |lambda: f64, k: f64| CellParams {
            omega: 1.0,
            lambda,
            eps_l: 0.02,
            eps_1: k * 0.02,
        };
        [('a', p(0.0, 1.0)), ('b', p(2.0, 1.0)), ('c', p(2.0, 2.0)), ('d', p(2.0, 3.0))]
    }
}

/// Sparse cell Hamiltonian, one list of `(column, value)` per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CellHamiltonian {
    pub params: CellParams,
    pub cutoff: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl CellHamiltonian {
    pub fn dimension(&self) -> usize {
        self.cutoff * self.cutoff
    }

    pub fn max_row_nonzeros(&self) -> usize {
        self.rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn occupations(&self, i: usize) -> (usize, usize) {
        (i / self.cutoff, i % self.cutoff)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dimension();
        let mut m = DMatrix::zeros(d, d);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Largest `|H_ij - H_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.to_dense();
        let scale = m.amax().max(f64::MIN_POSITIVE);
        (&m - m.transpose()).amax() / scale
    }

    /// True when no entry connects different parity sectors.
    pub fn preserves_parity(&self) -> bool {
        self.rows.iter().enumerate().all(|(i, row)| {
            let (a, b) = self.occupations(i);
            row.iter().all(|&(j, _)| {
                let (c, d) = self.occupations(j);
                a % 2 == c % 2 && b % 2 == d % 2
            })
        })
    }

    /// Basis indices of the sector with parities `(pa, pb)`.
    pub fn sector_indices(&self, pa: usize, pb: usize) -> Vec<usize> {
        (0..self.dimension())
            .filter(|&i| {
                let (a, b) = self.occupations(i);
                a % 2 == pa && b % 2 == pb
            })
            .collect()
    }

    fn sector_matrix(&self, idx: &[usize]) -> DMatrix<f64> {
        let mut pos = vec![usize::MAX; self.dimension()];
        for (k, &i) in idx.iter().enumerate() {
            pos[i] = k;
        }
        let mut m = DMatrix::zeros(idx.len(), idx.len());
        for (k, &i) in idx.iter().enumerate() {
            for &(j, v) in &self.rows[i] {
                m[(k, pos[j])] += v;
            }
        }
        m
    }
}

pub fn build_cell(params: &CellParams, cutoff: usize) -> Result<CellHamiltonian> {
    let p = params.validated()?;
    if cutoff < MIN_CUTOFF {
        return Err(Error::CutoffTooSmall(cutoff));
    }
    let d = cutoff;
    let local = |n: usize| {
        let n = n as f64;
        p.omega * n + p.eps_l * n * (n - 1.0)
    };
    // <n+2| a^dag a^dag |n> scaled by lambda/2.
    let pump = |n: usize| 0.5 * p.lambda * (((n + 1) * (n + 2)) as f64).sqrt();
    let mut rows = Vec::with_capacity(d * d);
    for na in 0..d {
        for nb in 0..d {
            let mut row = Vec::with_capacity(5);
            let diag = local(na) + local(nb) + p.eps_1 * (na * nb) as f64;
            row.push((na * d + nb, diag));
            if p.lambda != 0.0 {
                if na >= 2 {
                    row.push(((na - 2) * d + nb, pump(na - 2)));
                }
                if na + 2 < d {
                    row.push(((na + 2) * d + nb, pump(na)));
                }
                if nb >= 2 {
                    row.push((na * d + nb - 2, pump(nb - 2)));
                }
                if nb + 2 < d {
                    row.push((na * d + nb + 2, pump(nb)));
                }
            }
            rows.push(row);
        }
    }
    Ok(CellHamiltonian {
        params: p,
        cutoff,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub cutoff: usize,
    pub energy: f64,
    /// Parities `(n_A mod 2, n_B mod 2)` of the sector holding the state.
    pub parity: (usize, usize),
    /// Amplitudes in the full product basis, unit norm.
    pub amplitudes: Vec<f64>,
}

impl CellState {
    pub fn coefficient(&self, na: usize, nb: usize) -> f64 {
        self.amplitudes[na * self.cutoff + nb]
    }

    pub fn norm_defect(&self) -> f64 {
        (self.amplitudes.iter().map(|c| c * c).sum::<f64>().sqrt() - 1.0).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpectrum {
    pub ground: CellState,
    /// Lowest levels across all sectors, ascending.
    pub lowest: Vec<f64>,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffCheck {
    pub cutoff: usize,
    pub reference_cutoff: usize,
    pub reference_energy: f64,
    /// `|E(D) - E(D + 10)|`, relative to `|E(D + 10)|` unless that vanishes.
    pub shift: f64,
    pub converged: bool,
}

const LOWEST_KEPT: usize = 8;

/// Diagonalizes every parity sector and keeps the lowest levels.
pub fn diagonalize_cell(h: &CellHamiltonian) -> CellSpectrum {
    let sectors = [(0, 0), (0, 1), (1, 0), (1, 1)];
    let mut levels = Vec::new();
    let mut best: Option<CellState> = None;
    for &(pa, pb) in &sectors {
        let idx = h.sector_indices(pa, pb);
        let eig = SymmetricEigen::new(h.sector_matrix(&idx));
        let k = eig.eigenvalues.imin();
        let e0 = eig.eigenvalues[k];
        levels.extend(eig.eigenvalues.iter().copied());
        if best.as_ref().is_none_or(|b| e0 < b.energy) {
            let mut amplitudes = vec![0.0; h.dimension()];
            let v = eig.eigenvectors.column(k);
            // Fix the overall sign so the largest amplitude is positive.
            let imax = v.iamax();
            let sign = if v[imax] < 0.0 { -1.0 } else { 1.0 };
            for (j, &i) in idx.iter().enumerate() {
                amplitudes[i] = sign * v[j];
            }
            best = Some(CellState {
                cutoff: h.cutoff,
                energy: e0,
                parity: (pa, pb),
                amplitudes,
            });
        }
    }
    levels.sort_by(f64::total_cmp);
    levels.truncate(LOWEST_KEPT);
    let gap = levels[1] - levels[0];
    CellSpectrum {
        ground: best.expect("four sectors"),
        lowest: levels,
        gap,
    }
}

fn lowest_energy(h: &CellHamiltonian) -> f64 {
    [(0, 0), (0, 1), (1, 0), (1, 1)]
        .iter()
        .map(|&(pa, pb)| {
            let idx = h.sector_indices(pa, pb);
            h.sector_matrix(&idx).symmetric_eigenvalues().min()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Reruns at `cutoff + 10` and compares ground energies.
pub fn cutoff_check(h: &CellHamiltonian, energy: f64) -> Result<CutoffCheck> {
    let reference = build_cell(&h.params, h.cutoff + CERTIFY_STEP)?;
    let e_ref = lowest_energy(&reference);
    let diff = (energy - e_ref).abs();
    let shift = if e_ref.abs() > f64::MIN_POSITIVE { diff / e_ref.abs() } else { diff };
    Ok(CutoffCheck {
        cutoff: h.cutoff,
        reference_cutoff: reference.cutoff,
        reference_energy: e_ref,
        shift,
        converged: shift <= CONVERGENCE_TOLERANCE,
    })
}

/// Certified ground state: fails with `NotConverged` when the ground energy
/// moves by more than 1e-8 (relative) on adding ten Fock states per mode.
pub fn ground_state(h: &CellHamiltonian) -> Result<(CellSpectrum, CutoffCheck)> {
    let spec = diagonalize_cell(h);
    let check = cutoff_check(h, spec.ground.energy)?;
    if !check.converged {
        return Err(Error::NotConverged {
            shift: check.shift,
            tolerance: CONVERGENCE_TOLERANCE,
        });
    }
    Ok((spec, check))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// `|<ix, iy | G>|^2` on an `M x M` grid over `[-range, range]^2`, scaled to
/// unit maximum. `values[i * M + j]` belongs to `(xs[i], xs[j])` with `x` the
/// mode-A coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HusimiSlice {
    pub range: f64,
    pub resolution: usize,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    /// Maximum before normalization.
    pub raw_max: f64,
    pub peaks: Vec<Peak>,
}

impl HusimiSlice {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.resolution + j]
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.range / (self.resolution - 1) as f64
    }

    pub fn csv_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["x", "y", "value"]);
        for (i, &x) in self.xs.iter().enumerate() {
            for (j, &y) in self.xs.iter().enumerate() {
                t.push(vec![Field::Float(x), Field::Float(y), Field::Float(self.at(i, j))]);
            }
        }
        t
    }
}

/// `<ix|m> e^{x^2/2}`-free factor `(-i x)^m / sqrt(m!) e^{-x^2/2}`, built in
/// the log domain.
fn coherent_row(x: f64, cutoff: usize, ln_fact: &[f64]) -> Vec<Complex64> {
    let phase = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    let lx = x.abs().ln();
    (0..cutoff)
        .map(|m| {
            if x == 0.0 {
                return if m == 0 { phase[0] } else { Complex64::new(0.0, 0.0) };
            }
            let mag = (m as f64 * lx - 0.5 * ln_fact[m] - 0.5 * x * x).exp();
            let sign = if x < 0.0 && m % 2 == 1 { -1.0 } else { 1.0 };
            phase[m % 4] * (sign * mag)
        })
        .collect()
}

pub fn husimi_slice(state: &CellState, range: f64, resolution: usize) -> Result<HusimiSlice> {
    if !(range > 0.0 && range.is_finite()) || resolution < 3 {
        return Err(Error::InvalidConfig(format!(
            "husimi window needs range > 0 and resolution >= 3, got {range} and {resolution}"
        )));
    }
    let d = state.cutoff;
    let m = resolution;
    let mut ln_fact = vec![0.0; d];
    for k in 1..d {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    // Exactly antisymmetric grid.
    let xs: Vec<f64> = (0..m)
        .map(|i| range * (2.0 * i as f64 - (m - 1) as f64) / (m - 1) as f64)
        .collect();
    let rows: Vec<Vec<Complex64>> = xs.iter().map(|&x| coherent_row(x, d, &ln_fact)).collect();
    // Contract mode B first: h[j][na] = sum_nb c[na][nb] f_nb(y_j).
    let half: Vec<Vec<Complex64>> = rows
        .par_iter()
        .map(|fy| {
            (0..d)
                .map(|na| (0..d).map(|nb| fy[nb] * state.coefficient(na, nb)).sum())
                .collect()
        })
        .collect();
    let mut values: Vec<f64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| {
            let fx = &rows[i];
            half.iter()
                .map(move |hy| fx.iter().zip(hy).map(|(a, b)| a * b).sum::<Complex64>().norm_sqr())
                .collect::<Vec<_>>()
        })
        .collect();
    let raw_max = values.iter().copied().fold(0.0, f64::max);
    if raw_max > 0.0 {
        values.iter_mut().for_each(|v| *v /= raw_max);
    }
    let mut slice = HusimiSlice {
        range,
        resolution: m,
        xs,
        values,
        raw_max,
        peaks: Vec::new(),
    };
    slice.peaks = find_peaks(&slice);
    Ok(slice)
}

/// Vertex offset of the parabola through three equally spaced samples.
fn parabolic_offset(l: f64, c: f64, r: f64) -> f64 {
    let denom = l - 2.0 * c + r;
    if denom < 0.0 {
        (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

/// Interior local maxima at or above half the maximum, refined per axis.
/// Ties are broken in scan order so plateaus yield one peak.
fn find_peaks(s: &HusimiSlice) -> Vec<Peak> {
    let m = s.resolution;
    let h = s.spacing();
    let mut peaks = Vec::new();
    for i in 1..m - 1 {
        for j in 1..m - 1 {
            let v = s.at(i, j);
            if v < PEAK_FLOOR {
                continue;
            }
            let mut is_max = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let w = s.at((i as i64 + di) as usize, (j as i64 + dj) as usize);
                    let earlier = di < 0 || (di == 0 && dj < 0);
                    if w > v || (earlier && w == v) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                let ox = parabolic_offset(s.at(i - 1, j), v, s.at(i + 1, j));
                let oy = parabolic_offset(s.at(i, j - 1), v, s.at(i, j + 1));
                peaks.push(Peak {
                    x: s.xs[i] + ox * h,
                    y: s.xs[j] + oy * h,
                    value: v,
                });
            }
        }
    }
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value));
    peaks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum RingVerdict {
    Ring { radius: f64, coverage: f64 },
    Peaks { count: usize },
}

/// Thresholds the slice at 0.9 and looks for an 8-connected component that
/// winds around the origin without covering it.
pub fn ring_detector(s: &HusimiSlice) -> RingVerdict {
    let m = s.resolution;
    let mut label = vec![usize::MAX; m * m];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for start in 0..m * m {
        if s.values[start] < RING_THRESHOLD || label[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut cells = Vec::new();
        let mut stack = vec![start];
        label[start] = id;
        while let Some(c) = stack.pop() {
            cells.push(c);
            let (i, j) = ((c / m) as i64, (c % m) as i64);
            for di in -1..=1 {
                for dj in -1..=1 {
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= m as i64 || b >= m as i64 {
                        continue;
                    }
                    let n = a as usize * m + b as usize;
                    if label[n] == usize::MAX && s.values[n] >= RING_THRESHOLD {
                        label[n] = id;
                        stack.push(n);
                    }
                }
            }
        }
        components.push(cells);
    }
    for cells in &components {
        let mut bins = [false; RING_ANGLE_BINS];
        let (mut wr, mut w, mut r_min) = (0.0, 0.0, f64::INFINITY);
        for &c in cells {
            let (x, y) = (s.xs[c / m], s.xs[c % m]);
            let r = x.hypot(y);
            let angle = y.atan2(x) + std::f64::consts::PI;
            let bin = ((angle / std::f64::consts::TAU) * RING_ANGLE_BINS as f64) as usize;
            bins[bin.min(RING_ANGLE_BINS - 1)] = true;
            wr += s.values[c] * r;
            w += s.values[c];
            r_min = r_min.min(r);
        }
        let coverage = bins.iter().filter(|&&b| b).count() as f64 / RING_ANGLE_BINS as f64;
        let radius = wr / w;
        if coverage >= RING_MIN_COVERAGE && r_min > 0.5 * radius {
            return RingVerdict::Ring { radius, coverage };
        }
    }
    RingVerdict::Peaks {
        count: components.len(),
    }
}
