use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use qrepsim_ffi::*;

const SCENARIO: &str = r#"
architecture = "dl"
[stations]
alice = { lat_deg = 40.7128, lon_deg = -74.0060 }
bob = { lat_deg = 52.52, lon_deg = 13.405 }
[constellation]
kind = "aligned"
altitude_km = 500.0
ratio = 1.0
"#;

fn last_error() -> String {
    let p = qrs_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn table_memory() -> QrsMemory {
    QrsMemory { ln_p: -1.0 / (0.1 * 90e6), ln_coh: -1.0 / (0.06 * 90e6), eta_ret: 0.1, eta_plus: 1.0 }
}

#[test]
fn rates_match_core() {
    let m = table_memory();
    let mut out = QrsRates::default();
    let st = unsafe { qrs_bsm_rates(1e-3, 2e-3, 300, 400, 50_000, 60_000, &m, &m, &mut out) };
    assert_eq!(st, QrsStatus::Ok);
    assert!(qrs_last_error_message().is_null());
    let core = qrepsim::swap::bsm_rates(
        &qrepsim::swap::LinkState { eta_a: 1e-3, eta_b: 2e-3, d_rt_a: 300, d_rt_b: 400, d_cut_a: 50_000, d_cut_b: 60_000 },
        &m.into(),
        &m.into(),
    );
    assert_eq!(out.secure, core.secure);
    assert_eq!(out.attempted, core.attempted);
}

#[test]
fn optimizer_returns_cutoffs() {
    let m = table_memory();
    let (mut a, mut b) = (0u64, 0u64);
    let mut out = QrsRates::default();
    let st = unsafe { qrs_optimize_cutoffs(8e-6, 8e-6, 300, 300, &m, &m, &mut a, &mut b, &mut out) };
    assert_eq!(st, QrsStatus::Ok);
    assert!(a > 0 && b > 0);
    assert!(out.secure > 0.0);
}

#[test]
fn null_and_range_errors_set_message() {
    let m = table_memory();
    let st = unsafe { qrs_bsm_rates(0.1, 0.1, 0, 0, 1, 1, ptr::null(), &m, ptr::null_mut()) };
    assert_eq!(st, QrsStatus::NullPointer);
    assert!(last_error().contains("null"));
    let mut out = QrsRates::default();
    let st = unsafe { qrs_bsm_rates(-0.1, 0.1, 0, 0, 1, 1, &m, &m, &mut out) };
    assert_eq!(st, QrsStatus::InvalidArgument);
}

#[test]
fn config_errors_are_reported() {
    let empty = CString::new("").unwrap();
    let mut s: *mut QrsScenario = ptr::null_mut();
    let st = unsafe { qrs_scenario_from_toml(empty.as_ptr(), &mut s) };
    assert_eq!(st, QrsStatus::Config);
    assert!(s.is_null());
    assert!(last_error().contains("architecture"));
    let missing = CString::new("/nonexistent/scenario.toml").unwrap();
    assert_eq!(unsafe { qrs_scenario_from_file(missing.as_ptr(), &mut s) }, QrsStatus::Config);
}

#[test]
fn pass_round_trip() {
    let text = CString::new(SCENARIO).unwrap();
    let mut s: *mut QrsScenario = ptr::null_mut();
    assert_eq!(unsafe { qrs_scenario_from_toml(text.as_ptr(), &mut s) }, QrsStatus::Ok);
    assert_eq!(unsafe { qrs_scenario_set_step(s, 0.0) }, QrsStatus::InvalidArgument);
    assert_eq!(unsafe { qrs_scenario_set_step(s, 2.0) }, QrsStatus::Ok);
    let mut p: *mut QrsPass = ptr::null_mut();
    assert_eq!(unsafe { qrs_simulate_pass(s, 400.0, &mut p) }, QrsStatus::Ok);
    let n = unsafe { qrs_pass_len(p) };
    assert_eq!(n, 400);
    let mut step = QrsStep::default();
    assert_eq!(unsafe { qrs_pass_step(p, n, &mut step) }, QrsStatus::OutOfRange);
    let mut sum = QrsPassSummary::default();
    assert_eq!(unsafe { qrs_pass_summary(p, &mut sum) }, QrsStatus::Ok);
    let mut total = 0.0;
    for i in 0..n {
        assert_eq!(unsafe { qrs_pass_step(p, i, &mut step) }, QrsStatus::Ok);
        total += step.rates.secure * 2.0;
    }
    assert!((total - sum.totals.secure).abs() <= 1e-9 * sum.totals.secure);
    assert!(sum.peak_hz.secure > 2.0 && sum.peak_hz.secure < 4.0);
    unsafe {
        qrs_pass_free(p);
        qrs_scenario_free(s);
        qrs_pass_free(ptr::null_mut());
        qrs_scenario_free(ptr::null_mut());
    }
}

#[test]
fn short_campaign() {
    let text = CString::new(SCENARIO).unwrap();
    let mut s: *mut QrsScenario = ptr::null_mut();
    assert_eq!(unsafe { qrs_scenario_from_toml(text.as_ptr(), &mut s) }, QrsStatus::Ok);
    let mut c: *mut QrsCampaign = ptr::null_mut();
    assert_eq!(unsafe { qrs_annual_campaign(s, 1.0, &mut c) }, QrsStatus::Ok);
    let n = unsafe { qrs_campaign_pass_count(c) };
    assert!(n >= 1);
    let (mut t, mut night) = (QrsRates::default(), QrsRates::default());
    assert_eq!(unsafe { qrs_campaign_totals(c, &mut t, &mut night) }, QrsStatus::Ok);
    assert!(night.secure <= t.secure);
    let mut p = QrsPassSummary::default();
    assert_eq!(unsafe { qrs_campaign_pass(c, 0, &mut p) }, QrsStatus::Ok);
    assert!(p.duration_s > 0.0);
    unsafe {
        qrs_campaign_free(c);
        qrs_scenario_free(s);
    }
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/qrepsim.h")).unwrap();
    for name in [
        "qrs_last_error_message",
        "qrs_bsm_rates",
        "qrs_scenario_from_toml",
        "qrs_simulate_pass",
        "qrs_pass_free",
        "qrs_campaign_free",
        "typedef struct QrsScenario QrsScenario",
        "QRS_STATUS_PANIC = 7",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

/// Compiles and runs a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let profile_dir = deps.parent().unwrap();
    let lib = profile_dir.join("libqrepsim_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::temp_dir().join(format!("qrs_smoke_{}", std::process::id()));
    let status = Command::new("cc")
        .arg(dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    let _ = std::fs::remove_file(&exe);
    assert!(out.status.success(), "C program exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
