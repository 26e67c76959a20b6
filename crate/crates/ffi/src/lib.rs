//! C ABI over the scenario runner.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free` function. Every fallible call returns a
//! [`WiStatus`]; on failure a message is available from [`wi_last_error`]
//! until the next call on the same thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use weakinv::lindblad::{Branch, LindbladCoefficients};
use weakinv::scenario::{self, CheckStatus, RunReport, Scenario};
use weakinv::Error;

/// Return codes. The first four match the exit codes of the command-line tool.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WiStatus {
    Ok = 0,
    CheckFailed = 1,
    Config = 2,
    Numerical = 3,
    NullPointer = 4,
    InvalidUtf8 = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WiCheckStatus {
    Pass = 0,
    Fail = 1,
    Warn = 2,
    Skipped = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WiBranch {
    AntiDamped = 0,
    Commuting = 1,
}

/// One entry of a verification report. `id` and `name` point into the report
/// and stay valid until it is freed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WiCheck {
    pub id: *const c_char,
    pub name: *const c_char,
    pub measured: f64,
    pub threshold: f64,
    pub status: WiCheckStatus,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WiCoefficients {
    pub alpha: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

/// Parsed and validated scenario.
pub struct WiScenario {
    inner: Scenario,
}

/// Result of [`wi_verify`].
pub struct WiReport {
    inner: RunReport,
    strings: Vec<(CString, CString)>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> WiStatus {
    match e {
        Error::Io(_) => WiStatus::Io,
        e if e.is_config() => WiStatus::Config,
        _ => WiStatus::Numerical,
    }
}

fn fail(e: Error) -> WiStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

/// Runs `f`, converting panics into [`WiStatus::Panic`].
fn guard(f: impl FnOnce() -> WiStatus) -> WiStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            WiStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a NUL-terminated string.
unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, WiStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(WiStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        WiStatus::InvalidUtf8
    })
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($p:expr, $what:expr) => {
        if $p.is_null() {
            set_error(concat!($what, " is null"));
            return WiStatus::NullPointer;
        }
    };
}

/// Message of the last failure on this thread, or null. Valid until the next
/// call into this library on the same thread.
#[no_mangle]
pub extern "C" fn wi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Version string of the library (static storage).
#[no_mangle]
pub extern "C" fn wi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads and validates a scenario file.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn wi_scenario_load(path: *const c_char, out: *mut *mut WiScenario) -> WiStatus {
    guard(|| {
        non_null!(out, "out");
        *out = ptr::null_mut();
        let path = try_status!(read_str(path, "path"));
        match scenario::load_scenario(Path::new(path)) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(WiScenario { inner: s }));
                WiStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Parses a scenario held in memory. `base_dir` (nullable) resolves relative
/// table paths; null means the current directory.
///
/// # Safety
/// `text` and non-null `base_dir` are NUL-terminated strings; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn wi_scenario_from_str(
    text: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut WiScenario,
) -> WiStatus {
    guard(|| {
        non_null!(out, "out");
        *out = ptr::null_mut();
        let text = try_status!(read_str(text, "text"));
        let base = if base_dir.is_null() { "." } else { try_status!(read_str(base_dir, "base_dir")) };
        match scenario::parse_scenario(text, Path::new(base)) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(WiScenario { inner: s }));
                WiStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `s` is null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wi_scenario_free(s: *mut WiScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Sets a numeric field by dotted path (e.g. `kappa.value`) and revalidates.
/// On failure the scenario is unchanged.
///
/// # Safety
/// `s` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wi_scenario_set(s: *mut WiScenario, path: *const c_char, value: f64) -> WiStatus {
    guard(|| {
        non_null!(s, "scenario");
        let path = try_status!(read_str(path, "path"));
        match scenario::with_parameter(&(*s).inner, path, value) {
            Ok(updated) => {
                (*s).inner = updated;
                WiStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Runs the scenario and writes its CSV files. `out_dir` may be null to use
/// the directory named in the scenario.
///
/// # Safety
/// `s` is a live handle; non-null `out_dir` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wi_run(s: *const WiScenario, out_dir: *const c_char) -> WiStatus {
    guard(|| {
        non_null!(s, "scenario");
        let dir = if out_dir.is_null() { None } else { Some(Path::new(try_status!(read_str(out_dir, "out_dir")))) };
        match scenario::run_scenario(&(*s).inner, dir) {
            Ok(_) => WiStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Runs the check battery. On `Ok` or `CheckFailed` a report is stored in
/// `out`; otherwise `out` is set to null.
///
/// # Safety
/// `s` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn wi_verify(s: *const WiScenario, out: *mut *mut WiReport) -> WiStatus {
    guard(|| {
        non_null!(out, "out");
        *out = ptr::null_mut();
        non_null!(s, "scenario");
        match scenario::verify_scenario(&(*s).inner) {
            Ok(report) => {
                let strings = report
                    .checks
                    .iter()
                    .map(|c| {
                        (
                            CString::new(c.id).unwrap_or_default(),
                            CString::new(c.name.replace('\0', " ")).unwrap_or_default(),
                        )
                    })
                    .collect();
                let passed = report.overall;
                if !passed {
                    let names: Vec<String> = report.failures().map(|c| format!("{} {}", c.id, c.name)).collect();
                    set_error(format!("failed checks: {}", names.join(", ")));
                }
                *out = Box::into_raw(Box::new(WiReport { inner: report, strings }));
                if passed {
                    WiStatus::Ok
                } else {
                    WiStatus::CheckFailed
                }
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `r` is null or a handle from [`wi_verify`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wi_report_free(r: *mut WiReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of checks; 0 for a null report.
///
/// # Safety
/// `r` is null or a live report.
#[no_mangle]
pub unsafe extern "C" fn wi_report_len(r: *const WiReport) -> usize {
    r.as_ref().map_or(0, |r| r.inner.checks.len())
}

/// True iff no gating check failed; false for a null report.
///
/// # Safety
/// `r` is null or a live report.
#[no_mangle]
pub unsafe extern "C" fn wi_report_passed(r: *const WiReport) -> bool {
    r.as_ref().is_some_and(|r| r.inner.overall)
}

/// Wall time in seconds; NaN for a null report.
///
/// # Safety
/// `r` is null or a live report.
#[no_mangle]
pub unsafe extern "C" fn wi_report_wall_time(r: *const WiReport) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.inner.wall_time)
}

/// Copies check `index` into `out`.
///
/// # Safety
/// `r` is a live report; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn wi_report_check(r: *const WiReport, index: usize, out: *mut WiCheck) -> WiStatus {
    guard(|| {
        non_null!(r, "report");
        non_null!(out, "out");
        let r = &*r;
        let Some(c) = r.inner.checks.get(index) else {
            set_error(format!("check index {index} out of range ({} checks)", r.inner.checks.len()));
            return WiStatus::Config;
        };
        let (id, name) = &r.strings[index];
        *out = WiCheck {
            id: id.as_ptr(),
            name: name.as_ptr(),
            measured: c.measured,
            threshold: c.threshold,
            status: match c.status {
                CheckStatus::Pass => WiCheckStatus::Pass,
                CheckStatus::Fail => WiCheckStatus::Fail,
                CheckStatus::Warn => WiCheckStatus::Warn,
                CheckStatus::Skipped => WiCheckStatus::Skipped,
            },
        };
        WiStatus::Ok
    })
}

/// Dissipator coefficients for auxiliary data `(rho, rhodot)` and friction `kappa`.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn wi_lindblad_coefficients(
    branch: WiBranch,
    rho: f64,
    rhodot: f64,
    kappa: f64,
    out: *mut WiCoefficients,
) -> WiStatus {
    guard(|| {
        non_null!(out, "out");
        let b = match branch {
            WiBranch::AntiDamped => Branch::AntiDamped,
            WiBranch::Commuting => Branch::Commuting,
        };
        match LindbladCoefficients::from_auxiliary(b, rho, rhodot, kappa, 0.0) {
            Ok(c) => {
                *out = WiCoefficients { alpha: c.alpha, a1: c.a1, a2: c.a2, a3: c.a3 };
                WiStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::Parse("x".into())), WiStatus::Config);
        assert_eq!(status_of(&Error::NegativeFriction { t: 0.0, value: -1.0 }), WiStatus::Config);
        assert_eq!(status_of(&Error::Singularity { t: 0.0, rho: 0.0 }), WiStatus::Numerical);
        assert_eq!(status_of(&Error::Io("x".into())), WiStatus::Io);
    }

    #[test]
    fn panics_are_contained() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, WiStatus::Panic);
        let msg = unsafe { CStr::from_ptr(wi_last_error()) }.to_str().unwrap();
        assert_eq!(msg, "panic: boom");
    }
}
