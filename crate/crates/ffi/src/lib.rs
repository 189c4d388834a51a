//! C ABI over the `pinsync` simulator.
//!
//! Objects are opaque heap handles released with the matching `*_free`
//! function. Every fallible call returns a [`PinsyncStatus`]; on failure
//! [`pinsync_last_error`] describes the problem for the calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pinsync::config::{load_config, parse_config, LoadedConfig};
use pinsync::engine::{Simulation, TrialResult};
use pinsync::output;
use pinsync::rules::{zeno_lower_bound, Rule};
use pinsync::stability::{threshold_coefficient, StabilityCertificate};
use pinsync::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinsyncStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidArgument = 4,
    Simulation = 5,
    Io = 6,
    OutOfRange = 7,
    Unavailable = 8,
    Panic = 9,
}

pub struct PinsyncConfig {
    loaded: LoadedConfig,
    digest: CString,
}

pub struct PinsyncCertificate {
    cert: StabilityCertificate,
}

pub struct PinsyncTrial {
    result: TrialResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn fail(status: PinsyncStatus, msg: impl Into<String>) -> PinsyncStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> PinsyncStatus {
    match e {
        Error::Config(_) => PinsyncStatus::Config,
        Error::InvalidParameter(_) | Error::DeltaOutOfRange { .. } | Error::DimensionMismatch(_) => {
            PinsyncStatus::InvalidArgument
        }
        Error::Io(_) => PinsyncStatus::Io,
        _ => PinsyncStatus::Simulation,
    }
}

fn from_error(e: Error) -> PinsyncStatus {
    fail(status_of(&e), e.to_string())
}

fn guard(f: impl FnOnce() -> PinsyncStatus) -> PinsyncStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(PinsyncStatus::Panic, "panic inside pinsync"),
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, PinsyncStatus> {
    if s.is_null() {
        return Err(fail(PinsyncStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(PinsyncStatus::InvalidUtf8, "string argument is not UTF-8"))
}

macro_rules! non_null {
    ($p:expr) => {
        match unsafe { $p.as_ref() } {
            Some(v) => v,
            None => return fail(PinsyncStatus::NullPointer, concat!("null ", stringify!($p))),
        }
    };
}

macro_rules! out_ptr {
    ($p:expr) => {
        if $p.is_null() {
            return fail(PinsyncStatus::NullPointer, concat!("null ", stringify!($p)));
        }
    };
}

fn wrap_config(loaded: LoadedConfig) -> *mut PinsyncConfig {
    let digest = CString::new(loaded.digest.clone()).unwrap_or_default();
    Box::into_raw(Box::new(PinsyncConfig { loaded, digest }))
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn pinsync_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pinsync_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn pinsync_config_load(
    path: *const c_char,
    out: *mut *mut PinsyncConfig,
) -> PinsyncStatus {
    guard(|| {
        out_ptr!(out);
        let path = match read_str(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_config(Path::new(path)) {
            Ok(loaded) => {
                *out = wrap_config(loaded);
                PinsyncStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn pinsync_config_from_str(
    text: *const c_char,
    out: *mut *mut PinsyncConfig,
) -> PinsyncStatus {
    guard(|| {
        out_ptr!(out);
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_config(text) {
            Ok(loaded) => {
                *out = wrap_config(loaded);
                PinsyncStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn pinsync_config_free(config: *mut PinsyncConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Switches the triggering rule: "cont-state", "cont-exp", "disc-state" or
/// "disc-exp".
#[no_mangle]
pub unsafe extern "C" fn pinsync_config_set_rule(
    config: *mut PinsyncConfig,
    rule: *const c_char,
) -> PinsyncStatus {
    guard(|| {
        let cfg = match config.as_mut() {
            Some(c) => c,
            None => return fail(PinsyncStatus::NullPointer, "null config"),
        };
        let rule: Rule = match read_str(rule).map(str::parse) {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => return fail(PinsyncStatus::InvalidArgument, e.to_string()),
            Err(s) => return s,
        };
        let sim = cfg.loaded.sim.with_rule(rule);
        if let Err(e) = sim.validate() {
            return from_error(e);
        }
        cfg.loaded.sim = sim;
        PinsyncStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn pinsync_config_nodes(config: *const PinsyncConfig) -> usize {
    config.as_ref().map_or(0, |c| c.loaded.sim.nodes())
}

#[no_mangle]
pub unsafe extern "C" fn pinsync_config_dimension(config: *const PinsyncConfig) -> usize {
    config.as_ref().map_or(0, |c| c.loaded.sim.dimension())
}

/// Hex SHA-256 of the canonical config, owned by the handle.
#[no_mangle]
pub unsafe extern "C" fn pinsync_config_digest(config: *const PinsyncConfig) -> *const c_char {
    config.as_ref().map_or(ptr::null(), |c| c.digest.as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn pinsync_check(
    config: *const PinsyncConfig,
    out: *mut *mut PinsyncCertificate,
) -> PinsyncStatus {
    guard(|| {
        out_ptr!(out);
        let cfg = non_null!(config);
        match cfg.loaded.sim.certificate() {
            Ok(cert) => {
                *out = Box::into_raw(Box::new(PinsyncCertificate { cert }));
                PinsyncStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn pinsync_certificate_free(cert: *mut PinsyncCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

#[no_mangle]
pub unsafe extern "C" fn pinsync_certificate_feasible(cert: *const PinsyncCertificate) -> bool {
    cert.as_ref().is_some_and(|c| c.cert.feasible)
}

#[no_mangle]
pub unsafe extern "C" fn pinsync_certificate_mode_count(cert: *const PinsyncCertificate) -> usize {
    cert.as_ref().map_or(0, |c| c.cert.margins.len())
}

/// Largest eigenvalue of mode `mode`'s condition matrix (0-based index).
#[no_mangle]
pub unsafe extern "C" fn pinsync_certificate_margin(
    cert: *const PinsyncCertificate,
    mode: usize,
    out: *mut f64,
) -> PinsyncStatus {
    out_ptr!(out);
    let c = non_null!(cert);
    match c.cert.margins.get(mode) {
        Some(m) => {
            *out = *m;
            PinsyncStatus::Ok
        }
        None => fail(
            PinsyncStatus::OutOfRange,
            format!("mode {mode} out of range (have {})", c.cert.margins.len()),
        ),
    }
}

#[no_mangle]
pub unsafe extern "C" fn pinsync_certificate_lambda_bounds(
    cert: *const PinsyncCertificate,
    lo: *mut f64,
    hi: *mut f64,
) -> PinsyncStatus {
    out_ptr!(lo);
    out_ptr!(hi);
    let c = non_null!(cert);
    *lo = c.cert.lambda_lo;
    *hi = c.cert.lambda_hi;
    PinsyncStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn pinsync_certificate_threshold(
    cert: *const PinsyncCertificate,
    out: *mut f64,
) -> PinsyncStatus {
    out_ptr!(out);
    let c = non_null!(cert);
    match c.cert.threshold_coeff {
        Some(k) => {
            *out = k;
            PinsyncStatus::Ok
        }
        None => fail(PinsyncStatus::Unavailable, "no threshold coefficient (delta or c is zero)"),
    }
}

#[no_mangle]
pub unsafe extern "C" fn pinsync_run_trial(
    config: *const PinsyncConfig,
    seed: u64,
    out: *mut *mut PinsyncTrial,
) -> PinsyncStatus {
    guard(|| {
        out_ptr!(out);
        let cfg = non_null!(config);
        let result = Simulation::new(cfg.loaded.sim.clone()).and_then(|s| s.run_trial(seed));
        match result {
            Ok(result) => {
                *out = Box::into_raw(Box::new(PinsyncTrial { result }));
                PinsyncStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn pinsync_trial_free(trial: *mut PinsyncTrial) {
    if !trial.is_null() {
        drop(Box::from_raw(trial));
    }
}

/// Number of recorded samples.
#[no_mangle]
pub unsafe extern "C" fn pinsync_trial_sample_count(trial: *const PinsyncTrial) -> usize {
    trial.as_ref().map_or(0, |t| t.result.record.times.len())
}

/// Total events of every cause.
#[no_mangle]
pub unsafe extern "C" fn pinsync_trial_event_count(trial: *const PinsyncTrial) -> usize {
    trial.as_ref().map_or(0, |t| t.result.events.events.len())
}

#[no_mangle]
pub unsafe extern "C" fn pinsync_trial_rule_violations(trial: *const PinsyncTrial) -> usize {
    trial.as_ref().map_or(0, |t| t.result.events.total_triggers())
}

/// `t` and `V(t)` of recorded sample `index`.
#[no_mangle]
pub unsafe extern "C" fn pinsync_trial_lyapunov(
    trial: *const PinsyncTrial,
    index: usize,
    t: *mut f64,
    v: *mut f64,
) -> PinsyncStatus {
    out_ptr!(t);
    out_ptr!(v);
    let tr = non_null!(trial);
    let rec = &tr.result.record;
    if index >= rec.times.len() {
        return fail(
            PinsyncStatus::OutOfRange,
            format!("sample {index} out of range (have {})", rec.times.len()),
        );
    }
    *t = rec.times[index];
    *v = rec.lyapunov[index];
    PinsyncStatus::Ok
}

/// `max_i ‖x_i − s‖²` at recorded sample `index`.
#[no_mangle]
pub unsafe extern "C" fn pinsync_trial_max_sq_error(
    trial: *const PinsyncTrial,
    index: usize,
    out: *mut f64,
) -> PinsyncStatus {
    out_ptr!(out);
    let tr = non_null!(trial);
    match tr.result.record.sq_errors.get(index) {
        Some(row) => {
            *out = row.iter().copied().fold(0.0, f64::max);
            PinsyncStatus::Ok
        }
        None => fail(PinsyncStatus::OutOfRange, format!("sample {index} out of range")),
    }
}

fn write_trial(result: &TrialResult, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join("trajectory.csv"))?);
    output::write_trajectory(&mut w, &result.record)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(dir.join("events.csv"))?);
    output::write_events(&mut w, &result.events)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(dir.join("modes.csv"))?);
    output::write_modes(&mut w, &result.path)?;
    w.flush()
}

/// Writes `trajectory.csv`, `events.csv` and `modes.csv` into `dir`.
#[no_mangle]
pub unsafe extern "C" fn pinsync_trial_write_csv(
    trial: *const PinsyncTrial,
    dir: *const c_char,
) -> PinsyncStatus {
    guard(|| {
        let tr = non_null!(trial);
        let dir = match read_str(dir) {
            Ok(d) => d,
            Err(s) => return s,
        };
        match write_trial(&tr.result, Path::new(dir)) {
            Ok(()) => PinsyncStatus::Ok,
            Err(e) => fail(PinsyncStatus::Io, e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn pinsync_zeno_lower_bound(
    nodes: usize,
    lipschitz: f64,
    coupling: f64,
    pinning_gain: f64,
    a: f64,
    b: f64,
    out: *mut f64,
) -> PinsyncStatus {
    out_ptr!(out);
    match zeno_lower_bound(nodes, lipschitz, coupling, pinning_gain, a, b) {
        Ok(v) => {
            *out = v;
            PinsyncStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn pinsync_threshold_coefficient(
    beta: f64,
    lambda_lo: f64,
    lambda_hi: f64,
    delta: f64,
    coupling: f64,
    out: *mut f64,
) -> PinsyncStatus {
    out_ptr!(out);
    match threshold_coefficient(beta, lambda_lo, lambda_hi, delta, coupling) {
        Ok(v) => {
            *out = v;
            PinsyncStatus::Ok
        }
        Err(e) => from_error(e),
    }
}
