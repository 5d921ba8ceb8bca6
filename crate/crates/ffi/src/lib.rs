//! C ABI over the `kerrtopo` library.
//!
//! Objects cross the boundary as opaque handles created by `kt_*_new` or
//! `kt_*_solve` and released by the matching `kt_*_free`. Every entry point
//! returns a [`KtStatus`]; on failure a description is kept per thread and
//! can be copied out with [`kt_last_error_message`]. Panics never unwind into
//! the caller: they are caught and reported as `KT_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use kerrtopo::bands::{dispersion, zak_phase, Band};
use kerrtopo::bdg::{classify_modes, solve_chain};
use kerrtopo::error::ErrorKind;
use kerrtopo::semiclassical::{solve_auto, solve_newton, SemiclassicalProfile};
use kerrtopo::{Boundary, ChainConfig, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    Regime = 3,
    Numeric = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KtBoundary {
    Periodic = 0,
    Open = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KtSolver {
    Auto = 0,
    Newton = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KtBand {
    Minus = 0,
    Plus = 1,
}

/// Chain parameters.
pub struct KtConfig(ChainConfig);

/// Semiclassical squared amplitudes of a solved chain.
pub struct KtProfile(SemiclassicalProfile);

/// Positive excitation energies of a solved open or periodic chain, with
/// the in-gap flag of each level.
pub struct KtSpectrum {
    energies: Vec<f64>,
    in_gap: Vec<bool>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> KtStatus {
    match e.kind() {
        ErrorKind::Config => KtStatus::InvalidConfig,
        ErrorKind::Regime => KtStatus::Regime,
        ErrorKind::Numeric => KtStatus::Numeric,
        ErrorKind::Io => KtStatus::Io,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), KtStatusError>) -> KtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            KtStatus::Ok
        }
        Ok(Err(KtStatusError(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            KtStatus::Panic
        }
    }
}

struct KtStatusError(KtStatus, String);

impl From<Error> for KtStatusError {
    fn from(e: Error) -> Self {
        KtStatusError(status_of(&e), e.to_string())
    }
}

fn invalid(what: &str, value: i32) -> KtStatusError {
    KtStatusError(KtStatus::InvalidConfig, format!("unknown {what} value {value}"))
}

fn null(what: &str) -> KtStatusError {
    KtStatusError(KtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, KtStatusError> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), KtStatusError> {
    if out.is_null() {
        return Err(null(what));
    }
    unsafe { out.write(value) };
    Ok(())
}

/// Copies `src` into `buf[..len]`; fails without writing when it does not fit.
unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), KtStatusError> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < src.len() {
        return Err(KtStatusError(
            KtStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    unsafe { std::ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len()) };
    Ok(())
}

/// Version string of the library, static and NUL-terminated.
#[no_mangle]
pub extern "C" fn kt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn kt_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Creates a validated configuration. `boundary` takes a `KtBoundary` value.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn kt_config_new(
    omega: f64,
    lambda: f64,
    eps_l: f64,
    eps_1: f64,
    eps_2: f64,
    n_cells: usize,
    boundary: i32,
    delta_lambda: f64,
    out: *mut *mut KtConfig,
) -> KtStatus {
    guard(|| {
        let cfg = ChainConfig {
            omega,
            lambda,
            eps_l,
            eps_1,
            eps_2,
            n_cells,
            boundary: match boundary {
                b if b == KtBoundary::Periodic as i32 => Boundary::Periodic,
                b if b == KtBoundary::Open as i32 => Boundary::Open,
                b => return Err(invalid("boundary", b)),
            },
            delta_lambda,
        };
        cfg.validate()?;
        unsafe { put(out, Box::into_raw(Box::new(KtConfig(cfg))), "out") }
    })
}

/// Parses a configuration from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` valid for one pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_config_from_json(json: *const c_char, out: *mut *mut KtConfig) -> KtStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| KtStatusError(KtStatus::InvalidConfig, format!("config is not UTF-8: {e}")))?;
        let cfg: ChainConfig = serde_json::from_str(text).map_err(Error::from)?;
        cfg.validate()?;
        unsafe { put(out, Box::into_raw(Box::new(KtConfig(cfg))), "out") }
    })
}

/// # Safety
/// `cfg` must be null or a handle from `kt_config_new`/`kt_config_from_json`
/// not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kt_config_free(cfg: *mut KtConfig) {
    if !cfg.is_null() {
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Higgs-like energy `2 sqrt(lambda (lambda - omega))`; `KT_STATUS_REGIME`
/// below threshold.
///
/// # Safety
/// `cfg` must be a live handle; `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn kt_config_omega_h(cfg: *const KtConfig, out: *mut f64) -> KtStatus {
    guard(|| {
        let c = unsafe { deref(cfg, "cfg") }?;
        let wh = c.0.omega_h().ok_or_else(|| Error::Regime("no broken-symmetry solution below threshold".into()))?;
        unsafe { put(out, wh, "out") }
    })
}

/// Band energies `(E_minus, E_plus)` of the ring at momentum `k`.
///
/// # Safety
/// `cfg` must be a live handle; both outputs valid for writing.
#[no_mangle]
pub unsafe extern "C" fn kt_dispersion(cfg: *const KtConfig, k: f64, e_minus: *mut f64, e_plus: *mut f64) -> KtStatus {
    guard(|| {
        let c = unsafe { deref(cfg, "cfg") }?;
        let (m, p) = dispersion(&c.0, k)?;
        unsafe {
            put(e_minus, m, "e_minus")?;
            put(e_plus, p, "e_plus")
        }
    })
}

/// Winding of the band given as a `KtBand` value; `KT_STATUS_REGIME` when
/// the gap is closed.
///
/// # Safety
/// `cfg` must be a live handle; `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn kt_zak_winding(cfg: *const KtConfig, band: i32, out: *mut i32) -> KtStatus {
    guard(|| {
        let c = unsafe { deref(cfg, "cfg") }?;
        let b = match band {
            b if b == KtBand::Minus as i32 => Band::Minus,
            b if b == KtBand::Plus as i32 => Band::Plus,
            b => return Err(invalid("band", b)),
        };
        let z = zak_phase(&c.0, b)?;
        unsafe { put(out, z.winding, "out") }
    })
}

/// Solves the mean-field equations of the chain with a `KtSolver` method.
///
/// # Safety
/// `cfg` must be a live handle; `out` valid for one pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_profile_solve(cfg: *const KtConfig, solver: i32, out: *mut *mut KtProfile) -> KtStatus {
    guard(|| {
        let c = unsafe { deref(cfg, "cfg") }?;
        let p = match solver {
            s if s == KtSolver::Auto as i32 => solve_auto(&c.0)?,
            s if s == KtSolver::Newton as i32 => solve_newton(&c.0)?,
            s => return Err(invalid("solver", s)),
        };
        unsafe { put(out, Box::into_raw(Box::new(KtProfile(p))), "out") }
    })
}

/// Number of cells of the profile (length of each amplitude array).
///
/// # Safety
/// `p` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn kt_profile_len(p: *const KtProfile) -> usize {
    unsafe { p.as_ref() }.map_or(0, |p| p.0.n_cells())
}

/// Max-norm residual of the mean-field equations in units of `g^2`.
///
/// # Safety
/// `p` must be a live handle; `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn kt_profile_residual(p: *const KtProfile, out: *mut f64) -> KtStatus {
    guard(|| {
        let p = unsafe { deref(p, "profile") }?;
        unsafe { put(out, p.0.residual, "out") }
    })
}

/// Copies `|alpha_n|^2` and `|beta_n|^2` into two buffers of `len` values.
///
/// # Safety
/// `p` must be a live handle; both buffers valid for `len` values.
#[no_mangle]
pub unsafe extern "C" fn kt_profile_amplitudes(p: *const KtProfile, alpha_sq: *mut f64, beta_sq: *mut f64, len: usize) -> KtStatus {
    guard(|| {
        let p = unsafe { deref(p, "profile") }?;
        unsafe {
            copy_out(&p.0.alpha_sq, alpha_sq, len)?;
            copy_out(&p.0.beta_sq, beta_sq, len)
        }
    })
}

/// # Safety
/// `p` must be null or a handle from `kt_profile_solve` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kt_profile_free(p: *mut KtProfile) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Solves profile, coefficients and excitation spectrum of the chain.
///
/// # Safety
/// `cfg` must be a live handle; `out` valid for one pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_spectrum_solve(cfg: *const KtConfig, out: *mut *mut KtSpectrum) -> KtStatus {
    guard(|| {
        let c = unsafe { deref(cfg, "cfg") }?;
        let (_, _, sol) = solve_chain(&c.0)?;
        let in_gap = match c.0.boundary {
            Boundary::Open => classify_modes(&sol, &c.0)?.iter().map(|m| m.in_gap).collect(),
            Boundary::Periodic => vec![false; sol.energies.len()],
        };
        let s = KtSpectrum { energies: sol.energies, in_gap };
        unsafe { put(out, Box::into_raw(Box::new(s)), "out") }
    })
}

/// Number of positive levels (`2N`).
///
/// # Safety
/// `s` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn kt_spectrum_len(s: *const KtSpectrum) -> usize {
    unsafe { s.as_ref() }.map_or(0, |s| s.energies.len())
}

/// Copies the ascending energies into `buf`.
///
/// # Safety
/// `s` must be a live handle; `buf` valid for `len` values.
#[no_mangle]
pub unsafe extern "C" fn kt_spectrum_energies(s: *const KtSpectrum, buf: *mut f64, len: usize) -> KtStatus {
    guard(|| {
        let s = unsafe { deref(s, "spectrum") }?;
        unsafe { copy_out(&s.energies, buf, len) }
    })
}

/// Number of levels inside the bulk gap (always 0 on a ring).
///
/// # Safety
/// `s` must be a live handle; `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn kt_spectrum_in_gap_count(s: *const KtSpectrum, out: *mut usize) -> KtStatus {
    guard(|| {
        let s = unsafe { deref(s, "spectrum") }?;
        unsafe { put(out, s.in_gap.iter().filter(|&&b| b).count(), "out") }
    })
}

/// # Safety
/// `s` must be null or a handle from `kt_spectrum_solve` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kt_spectrum_free(s: *mut KtSpectrum) {
    if !s.is_null() {
        drop(unsafe { Box::from_raw(s) });
    }
}
