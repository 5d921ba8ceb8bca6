use std::ffi::{c_char, CStr, CString};
use std::ptr;

use kerrtopo_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { kt_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert_eq!(s.len(), n.min(255));
    s
}

/// `omega = 0`, `lambda = 1`, `mu = 0.1`, `delta = 0.5`.
fn config(n: usize, boundary: KtBoundary, delta_lambda: f64) -> *mut KtConfig {
    let mut cfg = ptr::null_mut();
    let st = unsafe { kt_config_new(0.0, 1.0, 0.02, 0.001, 0.003, n, boundary as i32, delta_lambda, &mut cfg) };
    assert_eq!(st, KtStatus::Ok, "{}", last_error());
    assert!(!cfg.is_null());
    cfg
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(kt_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn invalid_inputs_report_status_and_message() {
    let mut cfg = ptr::null_mut();
    let st = unsafe { kt_config_new(0.0, 1.0, 0.0, 0.001, 0.003, 10, 1, 0.0, &mut cfg) };
    assert_eq!(st, KtStatus::InvalidConfig);
    assert!(cfg.is_null());
    assert!(last_error().contains("eps_L"));

    let st = unsafe { kt_config_new(0.0, 1.0, 0.02, 0.001, 0.003, 10, 7, 0.0, &mut cfg) };
    assert_eq!(st, KtStatus::InvalidConfig);
    assert!(last_error().contains("boundary"));

    let st = unsafe { kt_config_new(0.0, 1.0, 0.02, 0.001, 0.003, 10, 1, 0.0, ptr::null_mut()) };
    assert_eq!(st, KtStatus::NullPointer);

    let mut out = 0.0;
    assert_eq!(unsafe { kt_config_omega_h(ptr::null(), &mut out) }, KtStatus::NullPointer);

    let json = CString::new(r#"{"omega": 1.0}"#).unwrap();
    assert_eq!(unsafe { kt_config_from_json(json.as_ptr(), &mut cfg) }, KtStatus::InvalidConfig);
}

#[test]
fn successful_call_clears_the_error() {
    let mut cfg = ptr::null_mut();
    unsafe { kt_config_new(0.0, 1.0, 0.0, 0.0, 0.0, 10, 1, 0.0, &mut cfg) };
    assert!(!last_error().is_empty());
    let c = config(10, KtBoundary::Open, 0.0);
    assert!(last_error().is_empty());
    unsafe { kt_config_free(c) };
}

#[test]
fn json_config_and_regime_errors() {
    let json = CString::new(
        r#"{"omega": 2.0, "lambda": 1.0, "eps_L": 0.02, "eps_1": 0.001, "eps_2": 0.003, "n_cells": 4, "boundary": "PBC"}"#,
    )
    .unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { kt_config_from_json(json.as_ptr(), &mut cfg) }, KtStatus::Ok);
    let mut wh = 0.0;
    assert_eq!(unsafe { kt_config_omega_h(cfg, &mut wh) }, KtStatus::Regime);
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { kt_profile_solve(cfg, KtSolver::Newton as i32, &mut p) }, KtStatus::Regime);
    assert!(p.is_null());
    unsafe { kt_config_free(cfg) };
}

#[test]
fn ring_bands_and_winding() {
    let cfg = config(10, KtBoundary::Periodic, 0.0);
    let mut wh = 0.0;
    assert_eq!(unsafe { kt_config_omega_h(cfg, &mut wh) }, KtStatus::Ok);
    assert_eq!(wh, 2.0);
    let (mut m, mut p) = (0.0, 0.0);
    assert_eq!(unsafe { kt_dispersion(cfg, std::f64::consts::PI, &mut m, &mut p) }, KtStatus::Ok);
    assert!(m < p && p < wh);
    let mut w = 0;
    assert_eq!(unsafe { kt_zak_winding(cfg, KtBand::Plus as i32, &mut w) }, KtStatus::Ok);
    assert_eq!(w, 1);
    assert_eq!(unsafe { kt_zak_winding(cfg, 9, &mut w) }, KtStatus::InvalidConfig);
    unsafe { kt_config_free(cfg) };
}

#[test]
fn profile_round_trip() {
    let cfg = config(25, KtBoundary::Open, 0.0);
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { kt_profile_solve(cfg, KtSolver::Auto as i32, &mut p) }, KtStatus::Ok);
    let n = unsafe { kt_profile_len(p) };
    assert_eq!(n, 25);
    let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
    assert_eq!(unsafe { kt_profile_amplitudes(p, a.as_mut_ptr(), b.as_mut_ptr(), n) }, KtStatus::Ok);
    for i in 0..n {
        assert_eq!(b[i], a[n - 1 - i]);
    }
    let mut short = vec![0.0; 3];
    assert_eq!(
        unsafe { kt_profile_amplitudes(p, short.as_mut_ptr(), short.as_mut_ptr(), 3) },
        KtStatus::BufferTooSmall
    );
    assert_eq!(short, [0.0; 3]);
    let mut r = 1.0;
    assert_eq!(unsafe { kt_profile_residual(p, &mut r) }, KtStatus::Ok);
    assert!(r <= 1e-10);
    unsafe {
        kt_profile_free(p);
        kt_config_free(cfg);
        kt_profile_free(ptr::null_mut());
    }
}

#[test]
fn spectrum_with_reduced_edge_drive() {
    let cfg = config(25, KtBoundary::Open, 0.02);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { kt_spectrum_solve(cfg, &mut s) }, KtStatus::Ok);
    let n = unsafe { kt_spectrum_len(s) };
    assert_eq!(n, 50);
    let mut e = vec![0.0; n];
    assert_eq!(unsafe { kt_spectrum_energies(s, e.as_mut_ptr(), n) }, KtStatus::Ok);
    assert!(e.windows(2).all(|w| w[0] <= w[1]));
    let mut k = 0usize;
    assert_eq!(unsafe { kt_spectrum_in_gap_count(s, &mut k) }, KtStatus::Ok);
    assert_eq!(k, 2);
    unsafe {
        kt_spectrum_free(s);
        kt_config_free(cfg);
    }
}

/// The generated header parses as C and as C++.
#[test]
fn header_compiles() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include").join("kerrtopo.h");
    assert!(header.exists());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"kerrtopo.h\"\nint main(void) { KtConfig *c = 0; KtStatus s = kt_config_new(0, 1, 0.02, 0.001, 0.003, 4, KT_BOUNDARY_OPEN, 0, &c); kt_config_free(c); return (int)s; }\n",
    )
    .unwrap();
    for compiler in ["cc", "c++"] {
        let mut cmd = std::process::Command::new(compiler);
        if compiler == "c++" {
            cmd.args(["-x", "c++"]);
        }
        let Ok(out) = cmd.arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(header.parent().unwrap()).arg(&src).output() else {
            eprintln!("{compiler} not available; skipping");
            continue;
        };
        assert!(out.status.success(), "{compiler}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
