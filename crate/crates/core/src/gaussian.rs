//! Coefficients of the quadratic fluctuation Hamiltonian around a mean-field
//! profile. Hoppings are chosen real and non-negative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Boundary, ChainConfig};
use crate::output::{CsvTable, Field};
use crate::semiclassical::{SemiclassicalProfile, OBC_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCoefficients {
    pub boundary: Boundary,
    pub omega_a: Vec<f64>,
    pub omega_b: Vec<f64>,
    pub lambda_a: Vec<f64>,
    pub lambda_b: Vec<f64>,
    /// Intra-cell hopping `eps_1 |alpha_n beta_n|`.
    pub j1: Vec<f64>,
    /// Inter-cell hopping `eps_2 |alpha_{n+1} beta_n|`; length `N` on a ring
    /// (last entry couples `B_N` to `A_1`), `N - 1` on an open chain.
    pub j2: Vec<f64>,
}

impl QuadraticCoefficients {
    pub fn n_cells(&self) -> usize {
        self.omega_a.len()
    }

    /// The homogeneous ring constants.
    pub fn pbc_constants(cfg: &ChainConfig) -> PbcConstants {
        let mu = cfg.mu();
        let delta = cfg.delta_or_zero();
        let s = (cfg.lambda - cfg.omega) / (1.0 + mu);
        PbcConstants {
            omega: cfg.lambda + s,
            lambda: cfg.lambda - s,
            j1: 0.5 * mu * s * (1.0 - delta),
            j2: 0.5 * mu * s * (1.0 + delta),
        }
    }

    pub fn csv_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["n", "omega_A", "lambda_A", "omega_B", "lambda_B", "j1", "j2"]);
        for i in 0..self.n_cells() {
            let j2 = self.j2.get(i).map(|&v| Field::Float(v)).unwrap_or(Field::Empty);
            t.push(vec![
                Field::Int(i as i64 + 1),
                Field::Float(self.omega_a[i]),
                Field::Float(self.lambda_a[i]),
                Field::Float(self.omega_b[i]),
                Field::Float(self.lambda_b[i]),
                Field::Float(self.j1[i]),
                j2,
            ]);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PbcConstants {
    pub omega: f64,
    pub lambda: f64,
    pub j1: f64,
    pub j2: f64,
}

#[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
pub fn build_coefficients(profile: &SemiclassicalProfile, cfg: &ChainConfig) -> Result<QuadraticCoefficients> {
    cfg.validate()?;
    if profile.boundary != cfg.boundary {
        return Err(Error::BoundaryMismatch {
            profile: profile.boundary,
            config: cfg.boundary,
        });
    }
    let n = cfg.n_cells;
    if profile.n_cells() != n || profile.beta_sq.len() != n {
        return Err(Error::Shape(format!(
            "profile has {} cells, configuration has {n}",
            profile.n_cells()
        )));
    }
    if !(profile.residual <= OBC_TOLERANCE) {
        return Err(Error::InaccurateProfile {
            residual: profile.residual,
            tolerance: OBC_TOLERANCE,
        });
    }
    let x = &profile.alpha_sq;
    let y = &profile.beta_sq;
    let two_el = 2.0 * cfg.eps_l;
    let omega_a: Vec<f64> = (0..n).map(|i| cfg.drive_a(i) + two_el * x[i]).collect();
    let lambda_a: Vec<f64> = (0..n).map(|i| cfg.drive_a(i) - two_el * x[i]).collect();
    let omega_b: Vec<f64> = (0..n).map(|i| cfg.drive_b(i) + two_el * y[i]).collect();
    let lambda_b: Vec<f64> = (0..n).map(|i| cfg.drive_b(i) - two_el * y[i]).collect();
    let j1 = (0..n).map(|i| cfg.eps_1 * (x[i] * y[i]).sqrt()).collect();
    let m = match cfg.boundary {
        Boundary::Periodic => n,
        Boundary::Open => n - 1,
    };
    let j2 = (0..m).map(|i| cfg.eps_2 * (x[(i + 1) % n] * y[i]).sqrt()).collect();
    Ok(QuadraticCoefficients {
        boundary: cfg.boundary,
        omega_a,
        omega_b,
        lambda_a,
        lambda_b,
        j1,
        j2,
    })
}
