use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use kerrtopo::cli::RunManifest;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kerrtopo"))
}

fn write_config(dir: &Path, name: &str, cfg: Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_vec(&cfg).unwrap()).unwrap();
    p
}

/// `mu = 0.1`, `delta = 0.5` chain with `omega = 0`, `lambda = 1`.
fn chain(boundary: &str, n: usize, delta_lambda: f64) -> Value {
    serde_json::json!({
        "omega": 0.0, "lambda": 1.0, "eps_L": 0.02, "eps_1": 0.001, "eps_2": 0.003,
        "n_cells": n, "boundary": boundary, "delta_lambda": delta_lambda,
    })
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn read_json(p: PathBuf) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn bands_writes_profile_and_zak_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ring.json", chain("PBC", 10, 0.0));
    let out = tmp.path().join("b");
    let o = run(&["bands", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--delta-grid", "-1:1:21"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    let files: Vec<&str> = m.outputs.iter().map(|o| o.file.as_str()).collect();
    assert_eq!(files, ["bands.csv", "zak.json", "gap.csv"]);
    assert_eq!(m.config.unwrap().n_cells, 10);
    let zak = read_json(out.join("zak.json"));
    assert_eq!(zak["bands"][1]["result"]["winding"], 1);
    // Gap grows linearly in |delta| close to zero.
    let gap = std::fs::read_to_string(out.join("gap.csv")).unwrap();
    let rows: Vec<Vec<f64>> = gap.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    let at = |d: f64| rows.iter().find(|r| (r[0] - d).abs() < 1e-12).unwrap()[1];
    assert_eq!(at(0.0), 0.0);
    assert!((at(0.1) / at(0.2) - 0.5).abs() < 0.02);

    let v = run(&["bands", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--delta-grid", "-1:1:21", "--verify"]);
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stderr));
    // Tampering is detected.
    std::fs::write(out.join("gap.csv"), "x").unwrap();
    let v = run(&["bands", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--delta-grid", "-1:1:21", "--verify"]);
    assert_eq!(code(&v), 1);
}

#[test]
fn closed_gap_is_a_marker_not_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = chain("PBC", 10, 0.0);
    c["eps_1"] = 0.002.into();
    c["eps_2"] = 0.002.into();
    let cfg = write_config(tmp.path(), "c.json", c);
    let out = tmp.path().join("b");
    let o = run(&["bands", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let zak = read_json(out.join("zak.json"));
    assert_eq!(zak["bands"][0]["status"], "gap_closed");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    let mut bad = chain("PBC", 10, 0.0);
    bad["eps_L"] = 0.0.into();
    let bad = write_config(tmp.path(), "bad.json", bad);
    assert_eq!(code(&run(&["bands", bad.to_str().unwrap(), "--out", out])), 2);
    assert_eq!(code(&run(&["bands", "/nonexistent.json", "--out", out])), 2);

    let mut below = chain("PBC", 10, 0.0);
    below["omega"] = 2.0.into();
    let below = write_config(tmp.path(), "below.json", below);
    assert_eq!(code(&run(&["bands", below.to_str().unwrap(), "--out", out])), 3);

    let mut d1 = chain("OBC", 10, 0.0);
    d1["eps_1"] = 0.0.into();
    let d1 = write_config(tmp.path(), "d1.json", d1);
    let d1 = d1.to_str().unwrap();
    assert_eq!(code(&run(&["ground-state", d1, "--solver", "analytic", "--out", out])), 3);
    assert_eq!(code(&run(&["ground-state", d1, "--solver", "newton", "--out", out])), 0);

    assert_eq!(code(&run(&["husimi", "--panels", "--cutoff", "12", "--resolution", "21", "--require-converged", "--out", out])), 4);
}

#[test]
fn ground_state_profiles() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = chain("OBC", 25, 0.0);
    c["eps_1"] = 0.009.into();
    c["eps_2"] = 0.027.into();
    let obc = write_config(tmp.path(), "obc.json", c.clone());
    let out = tmp.path().join("g");
    let o = run(&["ground-state", obc.to_str().unwrap(), "--solver", "analytic", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("profile.csv")).unwrap();
    let alpha: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(alpha.len(), 25);
    // Edge enhancement on the first site, plateau in the middle.
    assert!(alpha[0] > alpha[12]);
    let gbar_sq = 25.0 / 1.9;
    assert!((alpha[12] - gbar_sq).abs() < 1e-2 * gbar_sq);

    c["boundary"] = "PBC".into();
    let pbc = write_config(tmp.path(), "pbc.json", c);
    let out = tmp.path().join("p");
    assert_eq!(code(&run(&["ground-state", pbc.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let text = std::fs::read_to_string(out.join("profile.csv")).unwrap();
    let cols: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert!(cols.iter().all(|r| r[1] == cols[0][1] && r[2] == cols[0][2]));
}

#[test]
fn spectrum_is_deterministic_and_fast_for_small_chains() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "n2.json", chain("OBC", 2, 0.0));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let t = Instant::now();
    assert_eq!(code(&run(&["spectrum", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()])), 0);
    assert!(t.elapsed().as_secs_f64() < 1.0);
    assert_eq!(code(&run(&["spectrum", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()])), 0);
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma.outputs, mb.outputs);
    for f in ["spectrum.csv", "band_edges.csv", "spectrum.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn spectrum_with_reduced_edge_drive_has_in_gap_levels() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s4.json", chain("OBC", 25, 0.02));
    let out = tmp.path().join("s");
    let o = bin()
        .env("KERRTOPO_THREADS", "2")
        .args(["spectrum", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--delta-grid", "0.9:1:3"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(out.join("spectrum.json"));
    for p in s["in_gap_counts"].as_array().unwrap() {
        assert_eq!(p["in_gap"], 2);
    }
}

#[test]
fn thread_override_is_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", chain("OBC", 2, 0.0));
    let o = bin()
        .env("KERRTOPO_THREADS", "zero")
        .args(["spectrum", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn edge_scan_reports_both_thresholds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "e.json", chain("OBC", 25, 0.02));
    let out = tmp.path().join("e");
    assert_eq!(code(&run(&["edge-scan", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let e = read_json(out.join("edge.json"));
    let a = &e["analysis"];
    assert!(a["delta_spur_analytic"].is_number());
    assert!(a["delta_spur_numeric"].is_number());
    assert!(a["delta_top"].is_number());
    assert_eq!(e["markers"].as_array().unwrap().len(), 0);
    let xi = std::fs::read_to_string(out.join("xi.csv")).unwrap();
    assert!(xi.lines().any(|l| l.ends_with(",fit") && l.split(',').nth(1).is_some_and(|v| !v.is_empty())));
    assert!(xi.lines().any(|l| l.ends_with(",analytic") && l.split(',').nth(2).is_some_and(|v| !v.is_empty())));
}

#[test]
fn edge_scan_without_reduced_drive_marks_missing_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "e.json", chain("OBC", 25, 0.0));
    let out = tmp.path().join("e");
    assert_eq!(code(&run(&["edge-scan", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--delta-grid", "0.05:0.95:19"])), 0);
    let e = read_json(out.join("edge.json"));
    assert_eq!(e["markers"][0], "no_localized_modes");
    assert!(e["analysis"]["delta_top"].is_null());
}

#[test]
fn husimi_panels_and_resolution() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("h");
    let o = run(&["husimi", "--panels", "--cutoff", "30", "--resolution", "41", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest(&out).outputs.len(), 8);
    let a = read_json(out.join("husimi_a.json"));
    assert_eq!(a["peaks"].as_array().unwrap().len(), 1);
    assert_eq!(a["ring"]["verdict"], "peaks");
    let rows = std::fs::read_to_string(out.join("husimi_a.csv")).unwrap().lines().count();
    assert_eq!(rows, 41 * 41 + 1);

    let cfg = write_config(tmp.path(), "cell.json", chain("OBC", 2, 0.0));
    let out2 = tmp.path().join("single");
    let o = run(&["husimi", cfg.to_str().unwrap(), "--cutoff", "10", "--resolution", "81", "--out", out2.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(out2.join("husimi.csv")).unwrap().lines().count();
    assert_eq!(rows, 81 * 81 + 1);
}
