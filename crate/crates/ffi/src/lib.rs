//! C interface to qrepsim.
//!
//! Handles are opaque and owned by the caller until passed to the matching
//! `*_free`. Every fallible call returns a `QrsStatus`; on failure the message
//! is available from `qrs_last_error_message` on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use qrepsim::config::{self, RunConfig};
use qrepsim::engine::{self, CampaignResult, PassResult, PassSummary, StepRecord};
use qrepsim::swap::{self, BinMemory, BsmRates, CutoffSearch, LinkState, SwapKernel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QrsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Model = 4,
    OutOfRange = 5,
    NotFound = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn guard(f: impl FnOnce() -> Result<(), (QrsStatus, String)>) -> QrsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QrsStatus::Ok,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            QrsStatus::Panic
        }
    }
}

fn null(what: &str) -> (QrsStatus, String) {
    (QrsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (QrsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (QrsStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library on this thread.
#[no_mangle]
pub extern "C" fn qrs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map(|s| s.as_ptr()).unwrap_or(ptr::null()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qrs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- plain data -------------------------------------------------------------

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QrsRates {
    pub attempted: f64,
    pub successful: f64,
    pub correct: f64,
    pub erroneous: f64,
    pub secure: f64,
    pub qber_x: f64,
}

impl From<BsmRates> for QrsRates {
    fn from(r: BsmRates) -> Self {
        QrsRates {
            attempted: r.attempted,
            successful: r.successful,
            correct: r.correct,
            erroneous: r.erroneous,
            secure: r.secure,
            qber_x: r.qber_x,
        }
    }
}

/// Memory in time-bin units: `ln_p = -1/(tau R)`, `ln_coh = -1/(T R)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QrsMemory {
    pub ln_p: f64,
    pub ln_coh: f64,
    pub eta_ret: f64,
    pub eta_plus: f64,
}

impl From<QrsMemory> for BinMemory {
    fn from(m: QrsMemory) -> Self {
        BinMemory { ln_p: m.ln_p, ln_coh: m.ln_coh, eta_ret: m.eta_ret, eta_plus: m.eta_plus }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QrsStep {
    pub t_s: f64,
    pub theta_a_deg: f64,
    pub theta_b_deg: f64,
    pub l_a_km: f64,
    pub l_b_km: f64,
    pub l_is_a_km: f64,
    pub l_is_b_km: f64,
    pub eta_a: f64,
    pub eta_b: f64,
    pub trt_a_s: f64,
    pub trt_b_s: f64,
    pub d_cut_a: u64,
    pub d_cut_b: u64,
    /// Hz.
    pub rates: QrsRates,
    pub linked: bool,
    pub night: bool,
}

impl From<&StepRecord> for QrsStep {
    fn from(r: &StepRecord) -> Self {
        QrsStep {
            t_s: r.t,
            theta_a_deg: r.theta_a,
            theta_b_deg: r.theta_b,
            l_a_km: r.l_a,
            l_b_km: r.l_b,
            l_is_a_km: r.l_is_a,
            l_is_b_km: r.l_is_b,
            eta_a: r.eta_a,
            eta_b: r.eta_b,
            trt_a_s: r.trt_a_s,
            trt_b_s: r.trt_b_s,
            d_cut_a: r.d_cut_a,
            d_cut_b: r.d_cut_b,
            rates: r.rates.into(),
            linked: r.linked,
            night: r.night,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QrsPassSummary {
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub duration_s: f64,
    pub max_theta_a_deg: f64,
    pub max_theta_b_deg: f64,
    pub peak_hz: QrsRates,
    pub totals: QrsRates,
    pub night: bool,
    pub truncated: bool,
}

impl From<&PassSummary> for QrsPassSummary {
    fn from(p: &PassSummary) -> Self {
        QrsPassSummary {
            t_start_s: p.t_start,
            t_end_s: p.t_end,
            duration_s: p.duration_s,
            max_theta_a_deg: p.max_elevation_a,
            max_theta_b_deg: p.max_elevation_b,
            peak_hz: p.peak.into(),
            totals: p.totals.into(),
            night: p.night,
            truncated: p.truncated,
        }
    }
}

// ---- stateless rate functions ----------------------------------------------

/// Expected counts per time bin for fixed link probabilities, round trips and
/// cutoffs (all in bins).
///
/// # Safety
/// `mem_a`, `mem_b` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qrs_bsm_rates(
    eta_a: f64,
    eta_b: f64,
    d_rt_a: u64,
    d_rt_b: u64,
    d_cut_a: u64,
    d_cut_b: u64,
    mem_a: *const QrsMemory,
    mem_b: *const QrsMemory,
    out: *mut QrsRates,
) -> QrsStatus {
    guard(|| {
        if mem_a.is_null() || mem_b.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        if !(0.0..=1.0).contains(&eta_a) || !(0.0..=1.0).contains(&eta_b) {
            return Err((QrsStatus::InvalidArgument, "link probabilities must lie in [0, 1]".into()));
        }
        let s = LinkState { eta_a, eta_b, d_rt_a, d_rt_b, d_cut_a, d_cut_b };
        *out = swap::bsm_rates(&s, &(*mem_a).into(), &(*mem_b).into()).into();
        Ok(())
    })
}

/// Optimal cutoffs (bins) maximising the secure count per bin.
///
/// # Safety
/// `mem_a`, `mem_b`, `d_cut_a`, `d_cut_b` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qrs_optimize_cutoffs(
    eta_a: f64,
    eta_b: f64,
    d_rt_a: u64,
    d_rt_b: u64,
    mem_a: *const QrsMemory,
    mem_b: *const QrsMemory,
    d_cut_a: *mut u64,
    d_cut_b: *mut u64,
    out: *mut QrsRates,
) -> QrsStatus {
    guard(|| {
        if mem_a.is_null() || mem_b.is_null() || d_cut_a.is_null() || d_cut_b.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        if !(0.0..=1.0).contains(&eta_a) || !(0.0..=1.0).contains(&eta_b) {
            return Err((QrsStatus::InvalidArgument, "link probabilities must lie in [0, 1]".into()));
        }
        let k = SwapKernel::new(eta_a, eta_b, d_rt_a, d_rt_b, (*mem_a).into(), (*mem_b).into());
        let c = swap::optimize_cutoffs(&k, &CutoffSearch::default());
        *d_cut_a = c.d_cut_a;
        *d_cut_b = c.d_cut_b;
        *out = c.rates.into();
        Ok(())
    })
}

// ---- scenario handles -------------------------------------------------------

pub struct QrsScenario(RunConfig);
pub struct QrsPass(PassResult);
pub struct QrsCampaign(CampaignResult);

fn into_handle<T>(out: *mut *mut T, v: T) {
    unsafe { *out = Box::into_raw(Box::new(v)) };
}

/// Parses a scenario from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qrs_scenario_from_toml(toml: *const c_char, out: *mut *mut QrsScenario) -> QrsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = c_str(toml, "toml")?;
        let cfg = config::parse_str(text).map_err(|e| (QrsStatus::Config, e.to_string()))?;
        into_handle(out, QrsScenario(cfg));
        Ok(())
    })
}

/// Loads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qrs_scenario_from_file(path: *const c_char, out: *mut *mut QrsScenario) -> QrsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let p = c_str(path, "path")?;
        let cfg = config::load(Path::new(p)).map_err(|e| (QrsStatus::Config, e.to_string()))?;
        into_handle(out, QrsScenario(cfg));
        Ok(())
    })
}

/// Overrides the evaluation step, s.
///
/// # Safety
/// `scn` must come from `qrs_scenario_from_*`.
#[no_mangle]
pub unsafe extern "C" fn qrs_scenario_set_step(scn: *mut QrsScenario, step_s: f64) -> QrsStatus {
    guard(|| {
        let s = scn.as_mut().ok_or_else(|| null("scenario"))?;
        if !(step_s > 0.0 && step_s.is_finite()) {
            return Err((QrsStatus::InvalidArgument, "step_s must be positive".into()));
        }
        s.0.scenario.step_s = step_s;
        Ok(())
    })
}

/// # Safety
/// `scn` must be NULL or come from `qrs_scenario_from_*`, and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn qrs_scenario_free(scn: *mut QrsScenario) {
    if !scn.is_null() {
        drop(Box::from_raw(scn));
    }
}

/// Simulates the pass centred on the constellation epoch, `half_window_s`
/// either side; a non-positive value uses the scenario's window.
///
/// # Safety
/// `scn` must be a live scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qrs_simulate_pass(scn: *const QrsScenario, half_window_s: f64, out: *mut *mut QrsPass) -> QrsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let s = scn.as_ref().ok_or_else(|| null("scenario"))?;
        let w = if half_window_s > 0.0 { half_window_s } else { s.0.half_window_s };
        let r = engine::simulate_pass(&s.0.scenario, w).map_err(|e| (QrsStatus::Model, e.to_string()))?;
        into_handle(out, QrsPass(r));
        Ok(())
    })
}

/// Number of steps in a pass result; 0 for NULL.
///
/// # Safety
/// `pass` must be NULL or a live pass handle.
#[no_mangle]
pub unsafe extern "C" fn qrs_pass_len(pass: *const QrsPass) -> usize {
    pass.as_ref().map(|p| p.0.records.len()).unwrap_or(0)
}

/// # Safety
/// `pass` must be a live pass handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qrs_pass_step(pass: *const QrsPass, index: usize, out: *mut QrsStep) -> QrsStatus {
    guard(|| {
        let p = pass.as_ref().ok_or_else(|| null("pass"))?;
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        let r = p.0.records.get(index).ok_or((
            QrsStatus::OutOfRange,
            format!("step {index} out of range (len {})", p.0.records.len()),
        ))?;
        *o = r.into();
        Ok(())
    })
}

/// Summary of the linked part of the pass; `NOT_FOUND` when no step linked.
///
/// # Safety
/// `pass` must be a live pass handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qrs_pass_summary(pass: *const QrsPass, out: *mut QrsPassSummary) -> QrsStatus {
    guard(|| {
        let p = pass.as_ref().ok_or_else(|| null("pass"))?;
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        let s = p.0.summary.as_ref().ok_or((QrsStatus::NotFound, "no linked steps in the window".to_string()))?;
        *o = s.into();
        Ok(())
    })
}

/// # Safety
/// `pass` must be NULL or a live pass handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qrs_pass_free(pass: *mut QrsPass) {
    if !pass.is_null() {
        drop(Box::from_raw(pass));
    }
}

/// Runs a campaign over `duration_days` (non-positive: the scenario's value)
/// with two-resolution stepping.
///
/// # Safety
/// `scn` must be a live scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qrs_annual_campaign(scn: *const QrsScenario, duration_days: f64, out: *mut *mut QrsCampaign) -> QrsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let s = scn.as_ref().ok_or_else(|| null("scenario"))?;
        let mut c = s.0.annual.campaign(false);
        if duration_days > 0.0 {
            c.duration_s = duration_days * 86_400.0;
        }
        let r = engine::annual_campaign(&s.0.scenario, &c).map_err(|e| (QrsStatus::Model, e.to_string()))?;
        into_handle(out, QrsCampaign(r));
        Ok(())
    })
}

/// # Safety
/// `c` must be NULL or a live campaign handle.
#[no_mangle]
pub unsafe extern "C" fn qrs_campaign_pass_count(c: *const QrsCampaign) -> usize {
    c.as_ref().map(|c| c.0.passes.len()).unwrap_or(0)
}

/// # Safety
/// `c` must be a live campaign handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qrs_campaign_pass(c: *const QrsCampaign, index: usize, out: *mut QrsPassSummary) -> QrsStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("campaign"))?;
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        let p = c.0.passes.get(index).ok_or((
            QrsStatus::OutOfRange,
            format!("pass {index} out of range (len {})", c.0.passes.len()),
        ))?;
        *o = p.into();
        Ok(())
    })
}

/// Integrated counts over all passes and over night passes only.
///
/// # Safety
/// `c` must be a live campaign handle; `total` and `night` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qrs_campaign_totals(c: *const QrsCampaign, total: *mut QrsRates, night: *mut QrsRates) -> QrsStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("campaign"))?;
        let t = total.as_mut().ok_or_else(|| null("total"))?;
        let n = night.as_mut().ok_or_else(|| null("night"))?;
        *t = c.0.total.into();
        *n = c.0.night_total.into();
        Ok(())
    })
}

/// # Safety
/// `c` must be NULL or a live campaign handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qrs_campaign_free(c: *mut QrsCampaign) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}
