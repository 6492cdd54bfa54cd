//! C interface: opaque problem handles, UTF-8 JSON in and out, status
//! codes aligned with the command line's exit statuses.
//!
//! Every string returned through an out-pointer is heap-allocated and must
//! be released with [`ndde_string_free`]; every handle with
//! [`ndde_problem_free`]. Errors are reported per thread: after any call
//! returns a non-`OK` status, [`ndde_last_error`] describes the failure
//! until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ndde_osc::config::RunConfig;
use ndde_osc::criteria::analyze_all;
use ndde_osc::model::AnalysisConfig;
use ndde_osc::report::{render_report, render_trajectory};
use ndde_osc::simulate::integrate_ndde;
use ndde_osc::{build_problem, Expr, NddeProblem};

/// Status of one interface call. The first three values mirror the
/// command line's exit statuses.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NddeStatus {
    /// The call completed.
    Ok = 0,
    /// The input was rejected before any numerics ran.
    Validation = 1,
    /// A numerical procedure failed.
    Numerical = 2,
    /// A required pointer argument was null.
    NullArgument = 3,
    /// A panic was contained at the language boundary.
    Internal = 4,
}

/// An equation together with its analysis policy, parsed and validated
/// once, then reused across calls. Opaque to C.
pub struct NddeProblemHandle {
    run: RunConfig,
    config: AnalysisConfig,
    problem: NddeProblem,
}

// The handle is immutable after construction and documented as safe to
// share across threads; hold that promise at compile time.
const _: () = {
    const fn sharable<T: Send + Sync>() {}
    sharable::<NddeProblemHandle>()
};

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn ok() -> NddeStatus {
    LAST_ERROR.with(|slot| slot.borrow_mut().take());
    NddeStatus::Ok
}

fn fail(status: NddeStatus, message: impl std::fmt::Display) -> NddeStatus {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = Some(CString::new(text).expect("interior NULs were replaced"));
    });
    status
}

fn guarded(body: impl FnOnce() -> NddeStatus) -> NddeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(NddeStatus::Internal, "panic at the language boundary"),
    }
}

/// Reads a required UTF-8 string argument.
///
/// # Safety
/// `ptr` must be null or a NUL-terminated string.
unsafe fn text_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, NddeStatus> {
    if ptr.is_null() {
        return Err(fail(NddeStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(NddeStatus::Validation, format!("{what} is not valid UTF-8")))
}

fn give_string(text: String, out: *mut *mut c_char) -> NddeStatus {
    match CString::new(text) {
        Ok(cs) => {
            unsafe { *out = cs.into_raw() };
            ok()
        }
        Err(_) => fail(NddeStatus::Internal, "rendered text contained a NUL byte"),
    }
}

/// Parses a run configuration (the same JSON the command line reads) and
/// builds the validated problem behind an opaque handle.
///
/// On success writes the handle to `out_problem` and returns `OK`. The
/// handle must be released with `ndde_problem_free`.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out_problem` a valid
/// pointer to write one pointer through.
#[no_mangle]
pub unsafe extern "C" fn ndde_problem_from_json(
    config_json: *const c_char,
    out_problem: *mut *mut NddeProblemHandle,
) -> NddeStatus {
    guarded(|| {
        if out_problem.is_null() {
            return fail(NddeStatus::NullArgument, "out_problem is null");
        }
        let text = match text_arg(config_json, "config_json") {
            Ok(t) => t,
            Err(status) => return status,
        };
        let run = match RunConfig::from_json(text, "config") {
            Ok(r) => r,
            Err(e) => return fail(NddeStatus::Validation, e),
        };
        let spec = match run.problem_spec() {
            Ok(s) => s,
            Err(e) => return fail(NddeStatus::Validation, e),
        };
        let config = match run.analysis_config() {
            Ok(c) => c,
            Err(e) => return fail(NddeStatus::Validation, e),
        };
        let problem = match build_problem(&spec, &config) {
            Ok(p) => p,
            Err(e) => return fail(NddeStatus::Validation, e),
        };
        let handle = Box::new(NddeProblemHandle {
            run,
            config,
            problem,
        });
        *out_problem = Box::into_raw(handle);
        ok()
    })
}

/// Evaluates every criterion and writes the analysis report as a JSON
/// string (schema `ndde-osc-report/1`, `simulation` null).
///
/// # Safety
/// `problem` must be a live handle from `ndde_problem_from_json` and
/// `out_report` a valid pointer to write one pointer through.
#[no_mangle]
pub unsafe extern "C" fn ndde_analyze_to_json(
    problem: *const NddeProblemHandle,
    out_report: *mut *mut c_char,
) -> NddeStatus {
    guarded(|| {
        if problem.is_null() || out_report.is_null() {
            return fail(
                NddeStatus::NullArgument,
                "problem and out_report are required",
            );
        }
        let handle = &*problem;
        let opts = match handle.run.analyze_options(&[]) {
            Ok(o) => o,
            Err(e) => return fail(NddeStatus::Validation, e),
        };
        let report = analyze_all(&handle.problem, &handle.config, &opts);
        give_string(render_report(&report, None), out_report)
    })
}

/// Integrates the equation per the configuration's `simulate` section and
/// writes the trajectory samples (`t x z`, one node per line).
///
/// # Safety
/// `problem` must be a live handle from `ndde_problem_from_json` and
/// `out_text` a valid pointer to write one pointer through.
#[no_mangle]
pub unsafe extern "C" fn ndde_simulate_to_text(
    problem: *const NddeProblemHandle,
    out_text: *mut *mut c_char,
) -> NddeStatus {
    guarded(|| {
        if problem.is_null() || out_text.is_null() {
            return fail(
                NddeStatus::NullArgument,
                "problem and out_text are required",
            );
        }
        let handle = &*problem;
        let sim = match handle.run.simulate_section() {
            Ok(s) => s,
            Err(e) => return fail(NddeStatus::Validation, e),
        };
        let history = match handle.run.history() {
            Ok(h) => h,
            Err(e) => return fail(NddeStatus::Validation, e),
        };
        let traj = match integrate_ndde(&handle.problem, &history, sim.t_end, sim.dt) {
            Ok(t) => t,
            Err(e) => return fail(NddeStatus::Numerical, e),
        };
        give_string(render_trajectory(&traj), out_text)
    })
}

/// Parses an expression in `t` and evaluates it at one point.
///
/// # Safety
/// `expr_text` must be a NUL-terminated string and `out_value` a valid
/// pointer to write one double through.
#[no_mangle]
pub unsafe extern "C" fn ndde_expr_eval(
    expr_text: *const c_char,
    t: f64,
    out_value: *mut f64,
) -> NddeStatus {
    guarded(|| {
        if out_value.is_null() {
            return fail(NddeStatus::NullArgument, "out_value is null");
        }
        let text = match text_arg(expr_text, "expr_text") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let expr = match Expr::parse(text) {
            Ok(e) => e,
            Err(e) => return fail(NddeStatus::Validation, e),
        };
        match expr.eval(t) {
            Ok(v) => {
                *out_value = v;
                ok()
            }
            Err(e) => fail(NddeStatus::Numerical, e),
        }
    })
}

/// The error message of this thread's most recent failing call, or null
/// when the last call succeeded. The pointer stays valid until the next
/// failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn ndde_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |cs| cs.as_ptr())
    })
}

/// Releases a string returned through an out-pointer. Null is ignored.
///
/// # Safety
/// `text` must be null or a live pointer from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ndde_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

/// Releases a problem handle. Null is ignored.
///
/// # Safety
/// `problem` must be null or a live handle from `ndde_problem_from_json`,
/// not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ndde_problem_free(problem: *mut NddeProblemHandle) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// The library version as a static string; do not free it.
#[no_mangle]
pub extern "C" fn ndde_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;
    use std::ptr;

    fn fixture_text(name: &str) -> String {
        let path = Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../fixtures")
            .join(name);
        std::fs::read_to_string(path).unwrap()
    }

    fn build(json: &str) -> *mut NddeProblemHandle {
        let cjson = CString::new(json).unwrap();
        let mut handle: *mut NddeProblemHandle = ptr::null_mut();
        let status = unsafe { ndde_problem_from_json(cjson.as_ptr(), &mut handle) };
        assert_eq!(status, NddeStatus::Ok, "{}", last_error_text());
        assert!(!handle.is_null());
        handle
    }

    fn last_error_text() -> String {
        let p = ndde_last_error();
        if p.is_null() {
            return String::new();
        }
        unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
    }

    fn take_string(p: *mut c_char) -> String {
        assert!(!p.is_null());
        let text = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
        unsafe { ndde_string_free(p) };
        text
    }

    #[test]
    fn analysis_matches_the_core_renderer_byte_for_byte() {
        let json = fixture_text("example5.json");
        let handle = build(&json);
        let mut out: *mut c_char = ptr::null_mut();
        let status = unsafe { ndde_analyze_to_json(handle, &mut out) };
        assert_eq!(status, NddeStatus::Ok);
        let via_ffi = take_string(out);

        let run = RunConfig::from_json(&json, "fixture").unwrap();
        let spec = run.problem_spec().unwrap();
        let cfg = run.analysis_config().unwrap();
        let problem = build_problem(&spec, &cfg).unwrap();
        let report = analyze_all(&problem, &cfg, &run.analyze_options(&[]).unwrap());
        assert_eq!(via_ffi, render_report(&report, None));

        let v: serde_json::Value = serde_json::from_str(&via_ffi).unwrap();
        assert_eq!(v["overall"], "OSCILLATORY");
        assert!(v["simulation"].is_null());
        unsafe { ndde_problem_free(handle) };
    }

    #[test]
    fn simulation_text_matches_the_core_renderer() {
        let json = fixture_text("sim_sin.json");
        let handle = build(&json);
        let mut out: *mut c_char = ptr::null_mut();
        let status = unsafe { ndde_simulate_to_text(handle, &mut out) };
        assert_eq!(status, NddeStatus::Ok, "{}", last_error_text());
        let text = take_string(out);
        assert!(text.starts_with("t x z\n"));

        let run = RunConfig::from_json(&json, "fixture").unwrap();
        let spec = run.problem_spec().unwrap();
        let cfg = run.analysis_config().unwrap();
        let problem = build_problem(&spec, &cfg).unwrap();
        let sim = run.simulate_section().unwrap();
        let traj = integrate_ndde(&problem, &run.history().unwrap(), sim.t_end, sim.dt).unwrap();
        assert_eq!(text, render_trajectory(&traj));
        unsafe { ndde_problem_free(handle) };
    }

    #[test]
    fn numerical_failures_surface_with_status_two() {
        let handle = build(
            r#"{
  "t0": 0.0,
  "positive": [{"coeff": "1", "delay": "1"}],
  "negative": [{"coeff": "3", "delay": "0"}],
  "analysis": {"tail_start": 5.0, "horizon": 30.0, "grid_step": 0.05},
  "simulate": {"history": "1", "t_end": 30.0, "dt": 0.01}
}"#,
        );
        let mut out: *mut c_char = ptr::null_mut();
        let status = unsafe { ndde_simulate_to_text(handle, &mut out) };
        assert_eq!(status, NddeStatus::Numerical);
        assert!(out.is_null());
        assert!(last_error_text().contains("magnitude exceeded"));
        unsafe { ndde_problem_free(handle) };
    }

    #[test]
    fn validation_failures_carry_field_paths() {
        let cjson = CString::new(
            r#"{
  "t0": 0.0,
  "positive": [{"coeff": "2", "delay": "0.5*cos(t"}],
  "analysis": {"tail_start": 5.0, "horizon": 30.0, "grid_step": 0.05}
}"#,
        )
        .unwrap();
        let mut handle: *mut NddeProblemHandle = ptr::null_mut();
        let status = unsafe { ndde_problem_from_json(cjson.as_ptr(), &mut handle) };
        assert_eq!(status, NddeStatus::Validation);
        assert!(handle.is_null());
        let msg = last_error_text();
        assert!(msg.contains("positive[0].delay"), "{msg}");
        assert!(msg.contains("at byte"), "{msg}");
    }

    #[test]
    fn expression_evaluation_and_its_failure_modes() {
        let mut value = 0.0f64;
        let good = CString::new("sin(pi/2)").unwrap();
        let status = unsafe { ndde_expr_eval(good.as_ptr(), 3.0, &mut value) };
        assert_eq!(status, NddeStatus::Ok);
        assert_eq!(value, 1.0);
        assert!(ndde_last_error().is_null(), "success clears the error slot");

        let unparsable = CString::new("2*").unwrap();
        let status = unsafe { ndde_expr_eval(unparsable.as_ptr(), 0.0, &mut value) };
        assert_eq!(status, NddeStatus::Validation);
        assert!(last_error_text().contains("syntax error"));

        let domain = CString::new("log(t)").unwrap();
        let status = unsafe { ndde_expr_eval(domain.as_ptr(), -1.0, &mut value) };
        assert_eq!(status, NddeStatus::Numerical);
    }

    #[test]
    fn null_arguments_are_reported_not_dereferenced() {
        let mut handle: *mut NddeProblemHandle = ptr::null_mut();
        let status = unsafe { ndde_problem_from_json(ptr::null(), &mut handle) };
        assert_eq!(status, NddeStatus::NullArgument);
        let status = unsafe { ndde_expr_eval(ptr::null(), 0.0, ptr::null_mut()) };
        assert_eq!(status, NddeStatus::NullArgument);
        unsafe {
            ndde_problem_free(ptr::null_mut());
            ndde_string_free(ptr::null_mut());
        }
    }

    #[test]
    fn version_reports_the_package_version() {
        let v = unsafe { CStr::from_ptr(ndde_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn committed_header_declares_the_full_surface() {
        let header = std::fs::read_to_string(
            Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ndde_osc.h"),
        )
        .unwrap();
        for name in [
            "ndde_problem_from_json",
            "ndde_problem_free",
            "ndde_analyze_to_json",
            "ndde_simulate_to_text",
            "ndde_expr_eval",
            "ndde_last_error",
            "ndde_string_free",
            "ndde_version",
            "NddeStatus",
            "NddeProblemHandle",
        ] {
            assert!(header.contains(name), "header is missing {name}");
        }
    }
}
