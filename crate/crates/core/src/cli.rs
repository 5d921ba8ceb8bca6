//! Command-line front end. Every command computes its artifacts in memory,
//! writes them, then writes `manifest.json` listing each file with its
//! SHA-256. With `--verify` nothing is written: the artifacts are recomputed
//! and compared against the existing manifest and files.
//!
//! Exit codes: 0 success (physics markers such as a closed gap included),
//! 1 I/O or verification failure, 2 configuration error, 3 regime or
//! validity error, 4 numerical failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bands::{band_structure, gap_table, zak_phase, Band, KGrid};
use crate::bdg::spectrum_vs_delta;
use crate::edge::edge_analysis;
use crate::error::{Error, ErrorKind};
use crate::fock::{self, CellParams};
use crate::gaussian::build_coefficients;
use crate::model::{derive_params, Boundary, ChainConfig, DerivedParams};
use crate::output::{sha256_hex, CsvTable, Field};
use crate::semiclassical::{bulk_window_for, solve_auto, solve_newton, solve_obc_analytic, solve_pbc};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const THREADS_ENV: &str = "KERRTOPO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "kerrtopo", version, about = "Topological bands of a parametric Kerr resonator chain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Recompute and compare against the manifest in `--out` instead of writing.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ring band structure, Zak windings and an optional gap sweep.
    Bands {
        config: PathBuf,
        /// `fbz` for the N allowed momenta, or a point count for a dense grid.
        #[arg(long, default_value = "fbz")]
        grid: String,
        /// Staggering sweep `start:stop:count` for the gap table.
        #[arg(long, allow_hyphen_values = true)]
        delta_grid: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Semiclassical amplitudes and quadratic coefficients.
    GroundState {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Solver::Auto)]
        solver: Solver,
        #[command(flatten)]
        common: Common,
    },
    /// Open-chain excitation spectrum across a staggering sweep.
    Spectrum {
        config: PathBuf,
        #[arg(long, default_value = "-1:1:41", allow_hyphen_values = true)]
        delta_grid: String,
        #[command(flatten)]
        common: Common,
    },
    /// Husimi slice of the single-cell ground state.
    Husimi {
        /// Cell parameters; the inter-cell coupling and chain length are ignored.
        /// Not needed with `--panels`.
        config: Option<PathBuf>,
        /// Grid points per axis.
        #[arg(long, default_value_t = fock::DEFAULT_RESOLUTION)]
        resolution: usize,
        /// Half-width of the window; defaults to 1.5 g (3 below threshold).
        #[arg(long)]
        range: Option<f64>,
        /// Fock states per resonator.
        #[arg(long, default_value_t = 50)]
        cutoff: usize,
        /// Compute the four reference cells a-d instead of `config`.
        #[arg(long)]
        panels: bool,
        /// Fail (exit 4) when the ground energy is not converged in the cutoff.
        #[arg(long)]
        require_converged: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Edge-mode energies, thresholds and localization lengths.
    EdgeScan {
        config: PathBuf,
        #[arg(long, default_value = "-1:1:41", allow_hyphen_values = true)]
        delta_grid: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Analytic,
    Newton,
    Auto,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] Error),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Regime => 3,
                ErrorKind::Numeric => 4,
                ErrorKind::Io => 1,
            },
            CliError::Verify(_) | CliError::Write { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: serde_json::Value,
    pub config: Option<ChainConfig>,
    pub derived: Option<DerivedParams>,
    pub version: String,
    pub timestamp: String,
    pub outputs: Vec<OutputEntry>,
}

/// A named output held in memory until the run is complete.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn csv(name: &str, table: &CsvTable) -> Result<Self, Error> {
        Ok(Artifact { name: name.into(), bytes: table.to_bytes()? })
    }

    fn json<T: Serialize>(name: &str, value: &T) -> Result<Self, Error> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        Ok(Artifact { name: name.into(), bytes })
    }
}

/// What a successful run produced, for the caller to report.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: RunManifest,
    pub warnings: Vec<String>,
    pub verified: bool,
}

pub fn load_config(path: &Path) -> Result<ChainConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ChainConfig = serde_json::from_str(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `start:stop:count` into `count` evenly spaced values, endpoints
/// included.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::InvalidConfig(format!("grid `{spec}` is not start:stop:count"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite()) || n == 0 {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    // Exact endpoints and exact zero on symmetric grids.
    Ok((0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            let v = a * (1.0 - t) + b * t;
            if i == n - 1 { b } else if v.abs() < 1e-15 * (a.abs() + b.abs()) { 0.0 } else { v }
        })
        .collect())
}

fn parse_k_grid(spec: &str) -> Result<KGrid, Error> {
    if spec.eq_ignore_ascii_case("fbz") {
        return Ok(KGrid::ExactFbz);
    }
    match spec.parse::<usize>() {
        Ok(m) if m >= 2 => Ok(KGrid::Dense(m)),
        _ => Err(Error::InvalidConfig(format!("k grid `{spec}` must be `fbz` or a count >= 2"))),
    }
}

struct Computed {
    command: &'static str,
    arguments: serde_json::Value,
    config: Option<ChainConfig>,
    artifacts: Vec<Artifact>,
    warnings: Vec<String>,
}

pub fn run(cli: Cli) -> Result<RunReport, CliError> {
    let (computed, common) = match cli.command {
        Command::Bands { config, grid, delta_grid, common } => (cmd_bands(&config, &grid, delta_grid.as_deref())?, common),
        Command::GroundState { config, solver, common } => (cmd_ground_state(&config, solver)?, common),
        Command::Spectrum { config, delta_grid, common } => (cmd_spectrum(&config, &delta_grid)?, common),
        Command::Husimi { config, resolution, range, cutoff, panels, require_converged, common } => {
            let opts = HusimiOptions { resolution, range, cutoff, require_converged };
            (cmd_husimi(config.as_deref(), panels, &opts)?, common)
        }
        Command::EdgeScan { config, delta_grid, common } => (cmd_edge_scan(&config, &delta_grid)?, common),
    };
    finish(computed, &common)
}

fn finish(c: Computed, common: &Common) -> Result<RunReport, CliError> {
    let outputs: Vec<OutputEntry> = c
        .artifacts
        .iter()
        .map(|a| OutputEntry { file: a.name.clone(), sha256: sha256_hex(&a.bytes), bytes: a.bytes.len() })
        .collect();
    let manifest = RunManifest {
        command: c.command.into(),
        arguments: c.arguments,
        derived: c.config.as_ref().and_then(|cfg| derive_params(cfg).ok()),
        config: c.config,
        version: env!("CARGO_PKG_VERSION").into(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        outputs,
    };
    if common.verify {
        verify(&common.out, &manifest)?;
        return Ok(RunReport { manifest, warnings: c.warnings, verified: true });
    }
    let write = |path: PathBuf, bytes: &[u8]| std::fs::write(&path, bytes).map_err(|source| CliError::Write { path, source });
    std::fs::create_dir_all(&common.out).map_err(|source| CliError::Write { path: common.out.clone(), source })?;
    for a in &c.artifacts {
        write(common.out.join(&a.name), &a.bytes)?;
    }
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(Error::from)?;
    bytes.push(b'\n');
    write(common.out.join(MANIFEST_NAME), &bytes)?;
    Ok(RunReport { manifest, warnings: c.warnings, verified: false })
}

fn verify(out: &Path, fresh: &RunManifest) -> Result<(), CliError> {
    let path = out.join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Verify(format!("cannot read {}: {e}", path.display())))?;
    let old: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::Verify(format!("bad manifest: {e}")))?;
    if old.command != fresh.command {
        return Err(CliError::Verify(format!("manifest is for `{}`, not `{}`", old.command, fresh.command)));
    }
    let mut problems = Vec::new();
    for entry in &fresh.outputs {
        match old.outputs.iter().find(|o| o.file == entry.file) {
            None => problems.push(format!("{} missing from manifest", entry.file)),
            Some(o) if o.sha256 != entry.sha256 => problems.push(format!("{} recomputes to a different hash", entry.file)),
            Some(_) => {}
        }
        match std::fs::read(out.join(&entry.file)) {
            Ok(bytes) if sha256_hex(&bytes) == entry.sha256 => {}
            Ok(_) => problems.push(format!("{} on disk differs from the recomputation", entry.file)),
            Err(e) => problems.push(format!("{}: {e}", entry.file)),
        }
    }
    for o in &old.outputs {
        if !fresh.outputs.iter().any(|f| f.file == o.file) {
            problems.push(format!("{} listed in manifest but not produced", o.file));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(problems.join("; ")))
    }
}

fn cmd_bands(path: &Path, grid: &str, delta_grid: Option<&str>) -> Result<Computed, Error> {
    let cfg = load_config(path)?;
    let k_grid = parse_k_grid(grid)?;
    let deltas = delta_grid.map(parse_grid).transpose()?;
    cfg.require_homogeneous_ssb()?;
    let bands = band_structure(&cfg, k_grid)?;
    let mut warnings = Vec::new();
    let zak: Vec<serde_json::Value> = [Band::Minus, Band::Plus]
        .iter()
        .map(|&b| match zak_phase(&cfg, b) {
            Ok(z) => Ok(json!({ "status": "ok", "result": z })),
            Err(Error::GapClosed { delta }) => {
                warnings.push(format!("gap closed at delta = {delta}: winding undefined"));
                Ok(json!({ "status": "gap_closed", "band": b, "delta": delta }))
            }
            Err(e) => Err(e),
        })
        .collect::<Result<_, _>>()?;
    let (gap, k_gap) = bands.min_gap();
    let mut artifacts = vec![
        Artifact::csv("bands.csv", &bands.csv_table())?,
        Artifact::json("zak.json", &json!({ "bands": zak, "min_gap": gap, "k_min_gap": k_gap }))?,
    ];
    if let Some(d) = &deltas {
        artifacts.push(Artifact::csv("gap.csv", &gap_table(&cfg, d)?)?);
    }
    warnings.dedup();
    Ok(Computed {
        command: "bands",
        arguments: json!({ "grid": grid, "delta_grid": delta_grid }),
        config: Some(cfg),
        artifacts,
        warnings,
    })
}

fn cmd_ground_state(path: &Path, solver: Solver) -> Result<Computed, Error> {
    let cfg = load_config(path)?;
    let profile = match (solver, cfg.boundary) {
        (Solver::Analytic, Boundary::Periodic) => solve_pbc(&cfg)?,
        (Solver::Analytic, Boundary::Open) => solve_obc_analytic(&cfg)?,
        (Solver::Newton, _) => solve_newton(&cfg)?,
        (Solver::Auto, _) => solve_auto(&cfg)?,
    };
    let mut t = CsvTable::new(&["n", "alpha_sq", "beta_sq", "alpha_abs", "beta_abs"]);
    for (i, (x, y)) in profile.alpha_sq.iter().zip(&profile.beta_sq).enumerate() {
        t.push(vec![
            Field::Int(i as i64 + 1),
            Field::Float(*x),
            Field::Float(*y),
            Field::Float(x.sqrt()),
            Field::Float(y.sqrt()),
        ]);
    }
    let coeffs = build_coefficients(&profile, &cfg)?;
    let window = bulk_window_for(&cfg).ok();
    let summary = json!({
        "source": profile.source,
        "boundary": profile.boundary,
        "residual": profile.residual,
        "obc_constants": profile.obc_constants,
        "bulk_window": window.map(|w| json!({ "n_lo": w.n_lo, "n_hi": w.n_hi })),
    });
    Ok(Computed {
        command: "ground-state",
        arguments: json!({ "solver": solver }),
        config: Some(cfg),
        artifacts: vec![
            Artifact::csv("profile.csv", &t)?,
            Artifact::csv("coefficients.csv", &coeffs.csv_table())?,
            Artifact::json("profile.json", &summary)?,
        ],
        warnings: Vec::new(),
    })
}

fn cmd_spectrum(path: &Path, delta_grid: &str) -> Result<Computed, Error> {
    let cfg = load_config(path)?;
    let grid = parse_grid(delta_grid)?;
    cfg.require_homogeneous_ssb()?;
    if cfg.boundary != Boundary::Open {
        return Err(Error::InvalidConfig("the spectrum scan needs an open chain (OBC)".into()));
    }
    let scan = spectrum_vs_delta(&cfg, &grid);
    let warnings: Vec<String> = scan.failures.iter().map(|(d, m)| format!("delta = {d}: {m}")).collect();
    let in_gap: Vec<serde_json::Value> = scan
        .points
        .iter()
        .map(|p| json!({ "delta": p.delta, "in_gap": p.in_gap().len() }))
        .collect();
    let failures: Vec<serde_json::Value> = scan.failures.iter().map(|(d, m)| json!({ "delta": d, "error": m })).collect();
    Ok(Computed {
        command: "spectrum",
        arguments: json!({ "delta_grid": delta_grid }),
        config: Some(cfg),
        artifacts: vec![
            Artifact::csv("spectrum.csv", &scan.csv_table())?,
            Artifact::csv("band_edges.csv", &scan.band_edge_table())?,
            Artifact::json("spectrum.json", &json!({ "in_gap_counts": in_gap, "failures": failures }))?,
        ],
        warnings,
    })
}

struct HusimiOptions {
    resolution: usize,
    range: Option<f64>,
    cutoff: usize,
    require_converged: bool,
}

fn husimi_cell(name: &str, p: &CellParams, o: &HusimiOptions, warnings: &mut Vec<String>) -> Result<Vec<Artifact>, Error> {
    let h = fock::build_cell(p, o.cutoff)?;
    let spec = fock::diagonalize_cell(&h);
    let check = fock::cutoff_check(&h, spec.ground.energy)?;
    if !check.converged {
        if o.require_converged {
            return Err(Error::NotConverged { shift: check.shift, tolerance: fock::CONVERGENCE_TOLERANCE });
        }
        warnings.push(format!(
            "{name}: ground energy moves by {:e} (relative) from cutoff {} to {}",
            check.shift, check.cutoff, check.reference_cutoff
        ));
    }
    let range = o.range.unwrap_or_else(|| p.default_range());
    let slice = fock::husimi_slice(&spec.ground, range, o.resolution)?;
    let header = json!({
        "params": p,
        "cutoff": o.cutoff,
        "range": range,
        "resolution": o.resolution,
        "ground_energy": spec.ground.energy,
        "gap": spec.gap,
        "lowest_levels": spec.lowest,
        "parity": spec.ground.parity,
        "cutoff_check": check,
        "g": p.g(),
        "gbar": p.gbar(),
        "peaks": slice.peaks,
        "ring": fock::ring_detector(&slice),
    });
    Ok(vec![
        Artifact::csv(&format!("{name}.csv"), &slice.csv_table())?,
        Artifact::json(&format!("{name}.json"), &header)?,
    ])
}

fn cmd_husimi(path: Option<&Path>, panels: bool, o: &HusimiOptions) -> Result<Computed, Error> {
    let mut warnings = Vec::new();
    let mut artifacts = Vec::new();
    let config = if panels {
        for (c, p) in CellParams::reference_panels() {
            artifacts.extend(husimi_cell(&format!("husimi_{c}"), &p, o, &mut warnings)?);
        }
        None
    } else {
        let path = path.ok_or_else(|| Error::InvalidConfig("husimi needs a config path or --panels".into()))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ChainConfig = serde_json::from_str(&text)?;
        let p = CellParams::from_config(&cfg)?;
        artifacts.extend(husimi_cell("husimi", &p, o, &mut warnings)?);
        Some(cfg)
    };
    Ok(Computed {
        command: "husimi",
        arguments: json!({
            "resolution": o.resolution,
            "range": o.range,
            "cutoff": o.cutoff,
            "panels": panels,
            "require_converged": o.require_converged,
        }),
        config,
        artifacts,
        warnings,
    })
}

fn cmd_edge_scan(path: &Path, delta_grid: &str) -> Result<Computed, Error> {
    let cfg = load_config(path)?;
    let grid = parse_grid(delta_grid)?;
    if cfg.boundary != Boundary::Open {
        return Err(Error::InvalidConfig("the edge scan needs an open chain (OBC)".into()));
    }
    let analysis = edge_analysis(&cfg, &grid)?;
    let markers: Vec<&str> = if analysis.delta_top.is_none() { vec!["no_localized_modes"] } else { vec![] };
    let report = json!({ "analysis": analysis, "markers": markers });
    Ok(Computed {
        command: "edge-scan",
        arguments: json!({ "delta_grid": delta_grid }),
        config: Some(cfg),
        warnings: analysis.warnings.clone(),
        artifacts: vec![Artifact::json("edge.json", &report)?, Artifact::csv("xi.csv", &analysis.xi_table())?],
    })
}

/// Applies the thread-count override from the environment, if set.
pub fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("-1:1:41").unwrap();
        assert_eq!(g.len(), 41);
        assert_eq!(g[0], -1.0);
        assert_eq!(g[20], 0.0);
        assert_eq!(g[40], 1.0);
        assert_eq!(parse_grid("0.5:0.5:1").unwrap(), vec![0.5]);
        for bad in ["1:2", "a:1:3", "0:1:0", "0:inf:3"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn k_grid_parsing() {
        assert_eq!(parse_k_grid("fbz").unwrap(), KGrid::ExactFbz);
        assert_eq!(parse_k_grid("64").unwrap(), KGrid::Dense(64));
        assert!(parse_k_grid("1").is_err());
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        let code = |e: Error| CliError::from(e).exit_code();
        assert_eq!(code(Error::InvalidConfig("x".into())), 2);
        assert_eq!(code(Error::DegenerateDelta), 3);
        assert_eq!(code(Error::NotConverged { shift: 1.0, tolerance: 0.0 }), 4);
        assert_eq!(CliError::Verify("x".into()).exit_code(), 1);
    }
}
