//! Chain parameters, dimensionless combinations and regime classification.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// `|mu - 1|` below this counts as the critical ring point.
pub const MU_CRITICAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    #[serde(rename = "PBC")]
    Periodic,
    #[serde(rename = "OBC")]
    Open,
}

/// Raw physical parameters of a chain of `n_cells` two-resonator cells.
///
/// All energies share one unit. The JSON field names are the public config
/// schema (`eps_L` keeps its capital).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub omega: f64,
    pub lambda: f64,
    #[serde(rename = "eps_L")]
    pub eps_l: f64,
    pub eps_1: f64,
    pub eps_2: f64,
    pub n_cells: usize,
    pub boundary: Boundary,
    /// Drive reduction on the sites (A,1) and (B,N); only used for open chains.
    #[serde(default)]
    pub delta_lambda: f64,
}

/// Why a derived quantity has no value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndefinedReason {
    /// `eps_1 = eps_2 = 0`, so the staggering `delta` is 0/0.
    NoCrossKerr,
    /// `tau` needs `0 < mu < 1`.
    MuOutsideUnitInterval,
    /// `tau` needs `|delta| < 1`.
    DeltaSaturated,
    /// `lambda <= omega`: no broken-symmetry solution.
    BelowThreshold,
}

/// A value that may be absent for a documented reason. Never NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MaybeDefined {
    Defined { value: f64 },
    Undefined { reason: UndefinedReason },
}

impl MaybeDefined {
    pub fn value(&self) -> Option<f64> {
        match *self {
            MaybeDefined::Defined { value } => Some(value),
            MaybeDefined::Undefined { .. } => None,
        }
    }

    pub fn is_defined(&self) -> bool {
        matches!(self, MaybeDefined::Defined { .. })
    }

    fn defined(value: f64) -> Self {
        MaybeDefined::Defined { value }
    }

    fn undefined(reason: UndefinedReason) -> Self {
        MaybeDefined::Undefined { reason }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// `(lambda - omega) / (2 eps_L)`; negative below threshold.
    pub g_sq: f64,
    pub mu: f64,
    pub delta: MaybeDefined,
    /// `g^2 / (1 + mu)`.
    pub gbar_sq: f64,
    pub tau: MaybeDefined,
    /// Higgs-like energy `2 sqrt(lambda (lambda - omega))`.
    pub omega_h: MaybeDefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    BelowThreshold,
    HomogeneousSsb,
    CriticalRing,
    InhomogeneousSsb,
}

impl ChainConfig {
    /// Builds a configuration from `(mu, delta)` instead of the two cross-Kerr
    /// strengths: `eps_1 = eps_L mu (1 - delta)`, `eps_2 = eps_L mu (1 + delta)`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_dimensionless(
        omega: f64,
        lambda: f64,
        eps_l: f64,
        mu: f64,
        delta: f64,
        n_cells: usize,
        boundary: Boundary,
        delta_lambda: f64,
    ) -> Self {
        ChainConfig {
            omega,
            lambda,
            eps_l,
            eps_1: eps_l * mu * (1.0 - delta),
            eps_2: eps_l * mu * (1.0 + delta),
            n_cells,
            boundary,
            delta_lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.omega,
            self.lambda,
            self.eps_l,
            self.eps_1,
            self.eps_2,
            self.delta_lambda,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("all parameters must be finite".into()));
        }
        if self.eps_l <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "eps_L must be positive, got {}",
                self.eps_l
            )));
        }
        if self.n_cells < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_cells must be at least 2, got {}",
                self.n_cells
            )));
        }
        if self.omega < 0.0 {
            return Err(Error::InvalidConfig("omega must be non-negative".into()));
        }
        if self.eps_1 < 0.0 || self.eps_2 < 0.0 {
            return Err(Error::InvalidConfig(
                "cross-Kerr strengths must be non-negative".into(),
            ));
        }
        if self.delta_lambda < 0.0 {
            return Err(Error::InvalidConfig("delta_lambda must be non-negative".into()));
        }
        if self.delta_lambda > 0.0 && self.delta_lambda >= self.lambda {
            return Err(Error::InvalidConfig(format!(
                "delta_lambda ({}) must be smaller than lambda ({})",
                self.delta_lambda, self.lambda
            )));
        }
        Ok(())
    }

    pub fn mu(&self) -> f64 {
        (self.eps_1 + self.eps_2) / (2.0 * self.eps_l)
    }

    pub fn delta(&self) -> Option<f64> {
        let sum = self.eps_1 + self.eps_2;
        (sum > 0.0).then(|| (self.eps_2 - self.eps_1) / sum)
    }

    /// `delta`, with the decoupled case `eps_1 = eps_2 = 0` mapped to 0.
    /// Every formula using it is then multiplied by `mu = 0`.
    pub fn delta_or_zero(&self) -> f64 {
        self.delta().unwrap_or(0.0)
    }

    pub fn g_sq(&self) -> f64 {
        (self.lambda - self.omega) / (2.0 * self.eps_l)
    }

    pub fn omega_h(&self) -> Option<f64> {
        (self.lambda > self.omega).then(|| 2.0 * (self.lambda * (self.lambda - self.omega)).sqrt())
    }

    /// Copy with the cross-Kerr staggering set to `delta` at fixed `mu`.
    pub fn with_delta(&self, delta: f64) -> Self {
        let mu = self.mu();
        ChainConfig {
            eps_1: self.eps_l * mu * (1.0 - delta),
            eps_2: self.eps_l * mu * (1.0 + delta),
            ..*self
        }
    }

    pub fn with_boundary(&self, boundary: Boundary) -> Self {
        ChainConfig { boundary, ..*self }
    }

    /// Parametric drive on site (A, n), `n` zero-based.
    pub fn drive_a(&self, n: usize) -> f64 {
        if self.boundary == Boundary::Open && n == 0 {
            self.lambda - self.delta_lambda
        } else {
            self.lambda
        }
    }

    /// Parametric drive on site (B, n), `n` zero-based.
    pub fn drive_b(&self, n: usize) -> f64 {
        if self.boundary == Boundary::Open && n + 1 == self.n_cells {
            self.lambda - self.delta_lambda
        } else {
            self.lambda
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Errors unless above threshold with `mu < 1`.
    pub fn require_homogeneous_ssb(&self) -> Result<()> {
        match classify_regime(self) {
            Regime::HomogeneousSsb => Ok(()),
            other => Err(Error::Regime(format!(
                "homogeneous broken-symmetry phase (lambda > omega, mu < 1) required, found {other:?} (mu = {})",
                self.mu()
            ))),
        }
    }
}

/// Correlation length from `sinh^2(1/(2 tau)) = (1/mu^2 - 1)/(1 - delta^2)`.
pub fn correlation_length(mu: f64, delta: f64) -> MaybeDefined {
    if !(mu > 0.0 && mu < 1.0) {
        return MaybeDefined::undefined(UndefinedReason::MuOutsideUnitInterval);
    }
    if delta.abs() >= 1.0 {
        return MaybeDefined::undefined(UndefinedReason::DeltaSaturated);
    }
    let rhs = (1.0 / (mu * mu) - 1.0) / (1.0 - delta * delta);
    MaybeDefined::defined(1.0 / (2.0 * rhs.sqrt().asinh()))
}

pub fn derive_params(cfg: &ChainConfig) -> Result<DerivedParams> {
    cfg.validate()?;
    let g_sq = cfg.g_sq();
    let mu = cfg.mu();
    let delta = match cfg.delta() {
        Some(d) => MaybeDefined::defined(d),
        None => MaybeDefined::undefined(UndefinedReason::NoCrossKerr),
    };
    let tau = match cfg.delta() {
        Some(d) => correlation_length(mu, d),
        None => MaybeDefined::undefined(UndefinedReason::NoCrossKerr),
    };
    let omega_h = match cfg.omega_h() {
        Some(w) => MaybeDefined::defined(w),
        None => MaybeDefined::undefined(UndefinedReason::BelowThreshold),
    };
    Ok(DerivedParams {
        g_sq,
        mu,
        delta,
        gbar_sq: g_sq / (1.0 + mu),
        tau,
        omega_h,
    })
}

pub fn classify_regime(cfg: &ChainConfig) -> Regime {
    if cfg.lambda <= cfg.omega {
        return Regime::BelowThreshold;
    }
    let mu = cfg.mu();
    if (mu - 1.0).abs() <= MU_CRITICAL_TOL {
        Regime::CriticalRing
    } else if mu < 1.0 {
        Regime::HomogeneousSsb
    } else {
        Regime::InhomogeneousSsb
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(omega: f64, lambda: f64, eps_1: f64, eps_2: f64) -> ChainConfig {
        ChainConfig {
            omega,
            lambda,
            eps_l: 0.02,
            eps_1,
            eps_2,
            n_cells: 25,
            boundary: Boundary::Open,
            delta_lambda: 0.0,
        }
    }

    #[test]
    fn derived_closed_forms() {
        let d = derive_params(&cfg(1.0, 2.0, 0.02, 0.0)).unwrap();
        assert_relative_eq!(d.g_sq, 25.0, max_relative = 1e-15);
        assert_relative_eq!(d.mu, 0.5, max_relative = 1e-15);
        assert_eq!(d.delta.value(), Some(-1.0));
        assert_relative_eq!(d.gbar_sq, 50.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(d.omega_h.value().unwrap(), 2.0 * 2f64.sqrt(), max_relative = 1e-15);
        // |delta| = 1 leaves tau undefined.
        assert_eq!(
            d.tau,
            MaybeDefined::Undefined { reason: UndefinedReason::DeltaSaturated }
        );
    }

    /// Bisection on `x = 1/(2 tau)` of `sinh^2(x) - rhs`, independent of the asinh form.
    fn tau_by_bisection(mu: f64, delta: f64) -> f64 {
        let rhs = (1.0 / (mu * mu) - 1.0) / (1.0 - delta * delta);
        let (mut lo, mut hi) = (0.0f64, 50.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.sinh().powi(2) < rhs {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        1.0 / (2.0 * 0.5 * (lo + hi))
    }

    #[test]
    fn tau_matches_bisection_oracle() {
        let oracle = tau_by_bisection(0.1, 0.5);
        assert!((oracle - 0.1594).abs() < 5e-5, "oracle {oracle}");
        let tau = correlation_length(0.1, 0.5).value().unwrap();
        assert_relative_eq!(tau, oracle, max_relative = 1e-12);
    }

    #[test]
    fn tau_undefined_at_mu_one() {
        for delta in [-0.5, 0.0, 0.7] {
            assert_eq!(
                correlation_length(1.0, delta),
                MaybeDefined::Undefined { reason: UndefinedReason::MuOutsideUnitInterval }
            );
        }
    }

    #[test]
    fn delta_undefined_without_cross_kerr() {
        let d = derive_params(&cfg(1.0, 2.0, 0.0, 0.0)).unwrap();
        assert_eq!(
            d.delta,
            MaybeDefined::Undefined { reason: UndefinedReason::NoCrossKerr }
        );
        assert!(!d.tau.is_defined());
        assert_eq!(d.gbar_sq, d.g_sq);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = cfg(1.0, 2.0, 0.01, 0.01);
        c.eps_l = 0.0;
        assert!(matches!(derive_params(&c), Err(Error::InvalidConfig(_))));
        let mut c = cfg(1.0, 2.0, 0.01, 0.01);
        c.n_cells = 1;
        assert!(matches!(derive_params(&c), Err(Error::InvalidConfig(_))));
        let mut c = cfg(1.0, 2.0, 0.01, 0.01);
        c.delta_lambda = 2.0;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(&cfg(1.0, 0.5, 0.02, 0.0)), Regime::BelowThreshold);
        // mu = 0.5: eps_1 + eps_2 = eps_L
        assert_eq!(classify_regime(&cfg(1.0, 2.0, 0.02, 0.0)), Regime::HomogeneousSsb);
        assert_eq!(classify_regime(&cfg(1.0, 2.0, 0.04, 0.0)), Regime::CriticalRing);
        assert_eq!(classify_regime(&cfg(1.0, 2.0, 0.06, 0.0)), Regime::InhomogeneousSsb);
    }

    #[test]
    fn config_json_uses_published_field_names() {
        let text = r#"{"omega":1.0,"lambda":2.0,"eps_L":0.02,"eps_1":0.002,
            "eps_2":0.0,"n_cells":25,"boundary":"OBC","delta_lambda":0.04}"#;
        let c: ChainConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.boundary, Boundary::Open);
        assert_eq!(c.eps_l, 0.02);
        let back = serde_json::to_string(&c).unwrap();
        assert!(back.contains("\"eps_L\""));
        assert!(back.contains("\"OBC\""));
        assert!(serde_json::from_str::<ChainConfig>(r#"{"omega":1.0}"#).is_err());
    }

    #[test]
    fn reduced_drive_only_on_open_boundary_sites() {
        let mut c = cfg(1.0, 2.0, 0.01, 0.01);
        c.delta_lambda = 0.04;
        assert_eq!(c.drive_a(0), 1.96);
        assert_eq!(c.drive_a(1), 2.0);
        assert_eq!(c.drive_b(24), 1.96);
        assert_eq!(c.drive_b(0), 2.0);
        let p = c.with_boundary(Boundary::Periodic);
        assert_eq!(p.drive_a(0), 2.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tau_reproduces_defining_relation(mu in 0.01f64..0.99, delta in -0.99f64..0.99) {
                let tau = correlation_length(mu, delta).value().unwrap();
                let lhs = (1.0 / (2.0 * tau)).sinh().powi(2);
                let rhs = (1.0 / (mu * mu) - 1.0) / (1.0 - delta * delta);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
            }

            #[test]
            fn gbar_never_exceeds_g(mu in 0.0f64..3.0, delta in -1.0f64..1.0) {
                let c = ChainConfig::from_dimensionless(1.0, 2.0, 0.02, mu, delta, 10, Boundary::Open, 0.0);
                let d = derive_params(&c).unwrap();
                prop_assert!(d.gbar_sq <= d.g_sq);
                if mu == 0.0 {
                    prop_assert_eq!(d.gbar_sq, d.g_sq);
                } else {
                    prop_assert!(d.gbar_sq < d.g_sq);
                }
            }
        }
    }

    #[test]
    fn tau_monotone_on_grid() {
        let mus: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
        let deltas: Vec<f64> = (-9..=9).map(|i| i as f64 * 0.1).collect();
        for &d in &deltas {
            let taus: Vec<f64> = mus
                .iter()
                .map(|&m| correlation_length(m, d).value().unwrap())
                .collect();
            assert!(taus.windows(2).all(|w| w[1] > w[0]), "tau not increasing in mu at delta {d}");
        }
        for &m in &mus {
            let taus: Vec<f64> = (0..10)
                .map(|i| correlation_length(m, i as f64 * 0.1).value().unwrap())
                .collect();
            // Shrinks toward the decoupled-pair limit |delta| -> 1.
            assert!(taus.windows(2).all(|w| w[1] < w[0]), "tau not decreasing in |delta| at mu {m}");
            let neg = correlation_length(m, -0.4).value().unwrap();
            assert_relative_eq!(neg, correlation_length(m, 0.4).value().unwrap(), max_relative = 1e-15);
        }
    }
}
