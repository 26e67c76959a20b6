use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use weakinv_ffi::*;

const SMALL: &str = "[omega]\nschedule = \"sinusoid\"\nc0 = 1.0\namplitude = 0.2\nnu = 0.1\n\
[kappa]\nschedule = \"constant\"\nvalue = 0.1\n[auxiliary]\nbranch = \"commuting\"\n\
[basis]\ndim = 24\n[run]\nt_max = 0.5\nstep_h = 1e-2\nrecord_every = 10\n";

fn last_error() -> String {
    let p = wi_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn scenario(text: &str) -> *mut WiScenario {
    let text = CString::new(text).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { wi_scenario_from_str(text.as_ptr(), ptr::null(), &mut s) }, WiStatus::Ok);
    assert!(!s.is_null());
    s
}

#[test]
fn verify_round_trip() {
    let s = scenario(SMALL);
    let mut r = ptr::null_mut();
    let status = unsafe { wi_verify(s, &mut r) };
    assert!(matches!(status, WiStatus::Ok | WiStatus::CheckFailed));
    let n = unsafe { wi_report_len(r) };
    assert!(n >= 11);
    let mut names = Vec::new();
    for i in 0..n {
        let mut c = WiCheck { id: ptr::null(), name: ptr::null(), measured: 0.0, threshold: 0.0, status: WiCheckStatus::Pass };
        assert_eq!(unsafe { wi_report_check(r, i, &mut c) }, WiStatus::Ok);
        names.push(unsafe { CStr::from_ptr(c.name) }.to_str().unwrap().to_owned());
        if names.last().unwrap() == "weak_invariant_residual" {
            assert_eq!(c.status, WiCheckStatus::Pass);
            assert!(c.measured < c.threshold);
        }
    }
    assert!(names.iter().any(|n| n == "su11_relations"));
    assert_eq!(unsafe { wi_report_passed(r) }, status == WiStatus::Ok);
    assert!(unsafe { wi_report_wall_time(r) } > 0.0);
    let mut c = WiCheck { id: ptr::null(), name: ptr::null(), measured: 0.0, threshold: 0.0, status: WiCheckStatus::Pass };
    assert_eq!(unsafe { wi_report_check(r, n, &mut c) }, WiStatus::Config);
    unsafe {
        wi_report_free(r);
        wi_scenario_free(s);
    }
}

#[test]
fn configuration_errors_carry_the_key_path() {
    let text = CString::new("[omega]\nschedle = \"constant\"\n").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { wi_scenario_from_str(text.as_ptr(), ptr::null(), &mut s) }, WiStatus::Config);
    assert!(s.is_null());
    assert!(last_error().contains("omega.schedle"));

    let s = scenario(SMALL);
    let key = CString::new("basis.dimm").unwrap();
    assert_eq!(unsafe { wi_scenario_set(s, key.as_ptr(), 30.0) }, WiStatus::Config);
    let key = CString::new("kappa.value").unwrap();
    assert_eq!(unsafe { wi_scenario_set(s, key.as_ptr(), -0.1) }, WiStatus::Config);
    assert!(last_error().contains("kappa"));
    assert_eq!(unsafe { wi_scenario_set(s, key.as_ptr(), 0.05) }, WiStatus::Ok);
    unsafe { wi_scenario_free(s) };
}

#[test]
fn null_and_utf8_guards() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { wi_scenario_load(ptr::null(), &mut s) }, WiStatus::NullPointer);
    let bad = [0xffu8, 0xfe, 0];
    assert_eq!(unsafe { wi_scenario_load(bad.as_ptr().cast(), &mut s) }, WiStatus::InvalidUtf8);
    let missing = CString::new("/nonexistent/scenario.toml").unwrap();
    assert_eq!(unsafe { wi_scenario_load(missing.as_ptr(), &mut s) }, WiStatus::Io);
    assert_eq!(unsafe { wi_verify(ptr::null(), &mut ptr::null_mut()) }, WiStatus::NullPointer);
    assert_eq!(unsafe { wi_run(ptr::null(), ptr::null()) }, WiStatus::NullPointer);
    assert_eq!(unsafe { wi_report_len(ptr::null()) }, 0);
    assert!(!unsafe { wi_report_passed(ptr::null()) });
    unsafe {
        wi_scenario_free(ptr::null_mut());
        wi_report_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(wi_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn coefficients() {
    let mut c = WiCoefficients::default();
    let r = 0.5f64.sqrt();
    assert_eq!(unsafe { wi_lindblad_coefficients(WiBranch::AntiDamped, r, 0.0, 0.2, &mut c) }, WiStatus::Ok);
    assert!((c.alpha - 0.05).abs() < 1e-15 && (c.a2 - 4.0).abs() < 1e-12 && c.a3 == 0.0 && c.a1 == 1.0);
    assert_eq!(unsafe { wi_lindblad_coefficients(WiBranch::Commuting, 1.0, 0.0, 0.1, &mut c) }, WiStatus::Ok);
    assert!((c.alpha - 0.1).abs() < 1e-15);
    assert_eq!(unsafe { wi_lindblad_coefficients(WiBranch::AntiDamped, 1.0, 0.0, -0.1, &mut c) }, WiStatus::Config);
    assert_eq!(unsafe { wi_lindblad_coefficients(WiBranch::AntiDamped, 1.0, 0.0, 0.1, ptr::null_mut()) }, WiStatus::NullPointer);
}

#[test]
fn run_writes_the_four_files() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(SMALL);
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { wi_run(s, out.as_ptr()) }, WiStatus::Ok);
    for f in ["trajectory.csv", "ermakov.csv", "invariant.csv", "spectrum.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert_eq!(unsafe { wi_run(s, ptr::null()) }, WiStatus::Config);
    unsafe { wi_scenario_free(s) };
}

#[test]
fn header_is_valid_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/weakinv.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["wi_scenario_load", "wi_verify", "wi_report_check", "wi_lindblad_coefficients", "WI_STATUS_PANIC = 7"] {
        assert!(text.contains(sym), "{sym}");
    }
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        match Command::new(compiler).args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang]).arg(&header).status() {
            Ok(st) => assert!(st.success(), "{compiler} rejected the header"),
            Err(_) => eprintln!("{compiler} not found; syntax check skipped"),
        }
    }
}
