//! C ABI over `txagg`.
//!
//! Scenarios live behind an opaque handle. Reports and scenarios cross the
//! boundary as NUL-terminated JSON strings owned by the library; release
//! them with [`txagg_string_free`]. Every fallible call returns a
//! [`TxaggStatus`] and leaves a message for [`txagg_last_error`] on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use txagg::cli::{
    cmd_reduce_subset_sum, cmd_simulate, cmd_solve, cmd_verify, CliError, ReportFile, Scenario,
    ScenarioFile, SolveFlags,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TxaggStatus {
    Ok = 0,
    VerificationFailed = 1,
    /// The solver gave up, or an execution could not run.
    Failed = 2,
    InvalidInput = 3,
    NullPointer = 4,
    Panic = 5,
}

/// A parsed and resolved scenario.
pub struct TxaggScenario {
    inner: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(e: CliError) -> TxaggStatus {
    let status = match e {
        CliError::Invalid(_) => TxaggStatus::InvalidInput,
        CliError::Verification(_) => TxaggStatus::VerificationFailed,
        CliError::Failed(_) => TxaggStatus::Failed,
    };
    set_error(e.to_string());
    status
}

/// Runs `f` with panics turned into [`TxaggStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), TxaggStatus>) -> TxaggStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TxaggStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            TxaggStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, TxaggStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(TxaggStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not UTF-8"));
        TxaggStatus::InvalidInput
    })
}

unsafe fn write_str(out: *mut *mut c_char, text: String) -> Result<(), TxaggStatus> {
    let s = CString::new(text).map_err(|_| {
        set_error("output contains NUL");
        TxaggStatus::Failed
    })?;
    *out = s.into_raw();
    Ok(())
}

fn check_out<T>(out: *mut T, what: &str) -> Result<(), TxaggStatus> {
    if out.is_null() {
        set_error(format!("{what} is null"));
        return Err(TxaggStatus::NullPointer);
    }
    Ok(())
}

unsafe fn scenario_ref<'a>(s: *const TxaggScenario) -> Result<&'a Scenario, TxaggStatus> {
    if s.is_null() {
        set_error("scenario handle is null");
        return Err(TxaggStatus::NullPointer);
    }
    Ok(&(*s).inner)
}

/// Parse a scenario document. On success `*out` owns a handle that must be
/// released with [`txagg_scenario_free`].
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn txagg_scenario_parse(
    json: *const c_char,
    out: *mut *mut TxaggScenario,
) -> TxaggStatus {
    guard(|| {
        check_out(out, "out")?;
        let text = read_str(json, "json")?;
        let inner = ScenarioFile::parse(text).and_then(|f| f.resolve()).map_err(fail)?;
        *out = Box::into_raw(Box::new(TxaggScenario { inner }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from [`txagg_scenario_parse`] and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn txagg_scenario_free(scenario: *mut TxaggScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Override the solver. `name` is one of `brute`, `dp`, `dp-bounded`,
/// `greedy`; `radius` is read only for `dp-bounded`.
///
/// # Safety
/// `scenario` must be a live handle and `name` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn txagg_scenario_set_solver(
    scenario: *mut TxaggScenario,
    name: *const c_char,
    radius: u64,
) -> TxaggStatus {
    guard(|| {
        if scenario.is_null() {
            set_error("scenario handle is null");
            return Err(TxaggStatus::NullPointer);
        }
        let name = read_str(name, "name")?;
        let radius = (name == "dp-bounded").then_some(radius);
        let flags = SolveFlags { solver: Some(name.to_string()), radius, seed_hex: None };
        flags.apply(&mut (*scenario).inner).map_err(fail)
    })
}

/// The scenario back as a JSON document.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn txagg_scenario_to_json(
    scenario: *const TxaggScenario,
    out: *mut *mut c_char,
) -> TxaggStatus {
    guard(|| {
        check_out(out, "out")?;
        let s = scenario_ref(scenario)?;
        write_str(out, s.to_file().to_json())
    })
}

/// Select and route without executing. `*report_out` receives the report.
///
/// # Safety
/// `scenario` must be a live handle and `report_out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn txagg_solve(
    scenario: *const TxaggScenario,
    report_out: *mut *mut c_char,
) -> TxaggStatus {
    guard(|| {
        check_out(report_out, "report_out")?;
        let report = cmd_solve(scenario_ref(scenario)?).map_err(fail)?;
        write_str(report_out, report.to_json())
    })
}

/// Run the whole round. A refunded execution still returns `Ok`, with
/// `*committed` set to false.
///
/// # Safety
/// `scenario` must be a live handle; `report_out` and `committed` valid
/// pointers.
#[no_mangle]
pub unsafe extern "C" fn txagg_simulate(
    scenario: *const TxaggScenario,
    report_out: *mut *mut c_char,
    committed: *mut bool,
) -> TxaggStatus {
    guard(|| {
        check_out(report_out, "report_out")?;
        check_out(committed, "committed")?;
        let (report, ok) = cmd_simulate(scenario_ref(scenario)?).map_err(fail)?;
        write_str(report_out, report.to_json())?;
        *committed = ok;
        Ok(())
    })
}

/// Check a report against the scenario.
///
/// # Safety
/// `scenario` must be a live handle and `report` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn txagg_verify(
    scenario: *const TxaggScenario,
    report: *const c_char,
) -> TxaggStatus {
    guard(|| {
        let s = scenario_ref(scenario)?;
        let report = ReportFile::parse(read_str(report, "report")?).map_err(fail)?;
        cmd_verify(s, &report).map_err(fail)
    })
}

/// Scenario JSON deciding whether some of `items` sum to `target`.
///
/// # Safety
/// `items` must point to `len` values (it may be null when `len` is 0) and
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn txagg_reduce_subset_sum(
    target: u64,
    items: *const u64,
    len: usize,
    out: *mut *mut c_char,
) -> TxaggStatus {
    guard(|| {
        check_out(out, "out")?;
        let items: &[u64] = if len == 0 {
            &[]
        } else if items.is_null() {
            set_error("items is null");
            return Err(TxaggStatus::NullPointer);
        } else {
            std::slice::from_raw_parts(items, len)
        };
        let file = cmd_reduce_subset_sum(target, items).map_err(fail)?;
        write_str(out, file.to_json())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn txagg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn txagg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn txagg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
