//! C interface to capmap.
//!
//! Every function returns a [`CapmapStatus`]. On failure the message is
//! available from [`capmap_last_error_message`] on the same thread. Handles
//! and strings handed out by this library must be released with the
//! matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use capmap::error::{Error, ErrorKind};
use capmap::formats;
use capmap::learning::learn_from_traces;
use capmap::mapmm::astar_plan;
use capmap::mapmmi::{plan_conditional_with, CondOptions};
use capmap::model::{build_model, BetaParam, CapabilityModel, VarId};
use capmap::{query_capability, MapMmProblem};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapmapStatus {
    Ok = 0,
    NullArg = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Io = 5,
    NoPlan = 6,
    BudgetExceeded = 7,
    Panic = 8,
}

/// Opaque capability model.
pub struct CapmapModel(CapabilityModel);

/// Opaque planning problem.
pub struct CapmapProblem(MapMmProblem);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(CapmapStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match (&e, e.kind()) {
            (Error::BudgetExhausted, _) => CapmapStatus::BudgetExceeded,
            (_, ErrorKind::NoPlan) => CapmapStatus::NoPlan,
            (_, ErrorKind::Io) => CapmapStatus::Io,
            (Error::Format { .. } | Error::TraceLine { .. }, _) => CapmapStatus::Parse,
            _ => CapmapStatus::Validation,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CapmapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CapmapStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CapmapStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(CapmapStatus::NullArg, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(CapmapStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(CapmapStatus::NullArg, format!("{what} is null")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(CapmapStatus::NullArg, format!("{what} is null")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s)
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

fn parse_json<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> Result<T, Failure> {
    serde_json::from_str(s).map_err(|e| Failure(CapmapStatus::Parse, format!("{what}: {e}")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn capmap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn capmap_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn capmap_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a model document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn capmap_model_from_json(
    json: *const c_char,
    out: *mut *mut CapmapModel,
) -> CapmapStatus {
    guard(|| {
        let json = text(json, "json")?;
        let out = out_ptr(out, "out")?;
        let model = formats::parse_model(json, "model")?;
        *out = Box::into_raw(Box::new(CapmapModel(model)));
        Ok(())
    })
}

/// Loads a model document from a file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn capmap_model_load(
    path: *const c_char,
    out: *mut *mut CapmapModel,
) -> CapmapStatus {
    guard(|| {
        let path = text(path, "path")?;
        let out = out_ptr(out, "out")?;
        let model = formats::load_model(Path::new(path))?;
        *out = Box::into_raw(Box::new(CapmapModel(model)));
        Ok(())
    })
}

/// Builds a model from a JSON array of variable names and a JSON array of
/// `[from, to]` pairs, with every row set to beta(`a`, `b`).
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn capmap_model_build(
    agent: *const c_char,
    vars_json: *const c_char,
    edges_json: *const c_char,
    a: f64,
    b: f64,
    out: *mut *mut CapmapModel,
) -> CapmapStatus {
    guard(|| {
        let agent = text(agent, "agent")?;
        let vars: Vec<VarId> = parse_json(text(vars_json, "vars_json")?, "vars_json")?;
        let edges: Vec<(VarId, VarId)> = parse_json(text(edges_json, "edges_json")?, "edges_json")?;
        let out = out_ptr(out, "out")?;
        let prior = BetaParam::new(a, b)?;
        let model = build_model(agent, &vars, &edges, prior)?;
        *out = Box::into_raw(Box::new(CapmapModel(model)));
        Ok(())
    })
}

/// Canonical JSON for a model. Free the result with
/// [`capmap_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn capmap_model_to_json(
    model: *const CapmapModel,
    out: *mut *mut c_char,
) -> CapmapStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let out = out_ptr(out, "out")?;
        *out = into_c_string(formats::model_to_string(&model.0));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn capmap_model_free(model: *mut CapmapModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Probability of the capability in `spec_json` (`{"A":[..],"B":[..],"C":[..],"D":[..]}`).
///
/// # Safety
/// `model` must be a live handle; `spec_json` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn capmap_query(
    model: *const CapmapModel,
    spec_json: *const c_char,
    out: *mut f64,
) -> CapmapStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let spec = formats::parse_spec(text(spec_json, "spec_json")?, "spec")?;
        let out = out_ptr(out, "out")?;
        *out = query_capability(&model.0, &spec)?;
        Ok(())
    })
}

/// Learns from JSON-Lines traces and returns a new model; the input model
/// is left unchanged.
///
/// # Safety
/// `model` must be a live handle; `traces_jsonl` NUL-terminated; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn capmap_learn(
    model: *const CapmapModel,
    traces_jsonl: *const c_char,
    max_unknown: usize,
    out: *mut *mut CapmapModel,
) -> CapmapStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let (traces, _) = formats::parse_traces(text(traces_jsonl, "traces_jsonl")?, false)?;
        let out = out_ptr(out, "out")?;
        let (learned, _) = learn_from_traces(&model.0, &traces, max_unknown)?;
        *out = Box::into_raw(Box::new(CapmapModel(learned)));
        Ok(())
    })
}

/// Loads a problem document; model paths resolve against its directory.
///
/// # Safety
/// `path` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn capmap_problem_load(
    path: *const c_char,
    out: *mut *mut CapmapProblem,
) -> CapmapStatus {
    guard(|| {
        let path = text(path, "path")?;
        let out = out_ptr(out, "out")?;
        let problem = formats::load_problem(Path::new(path))?;
        *out = Box::into_raw(Box::new(CapmapProblem(problem)));
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn capmap_problem_free(problem: *mut CapmapProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Most probable linear plan as JSON.
///
/// # Safety
/// `problem` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn capmap_plan(
    problem: *const CapmapProblem,
    out: *mut *mut c_char,
) -> CapmapStatus {
    guard(|| {
        let problem = handle(problem, "problem")?;
        let out = out_ptr(out, "out")?;
        let plan = astar_plan(&problem.0)?;
        *out = into_c_string(formats::plan_to_string(&plan));
        Ok(())
    })
}

/// Conditional plan under a per-path request budget, as JSON. A zero
/// `max_depth` selects the default.
///
/// # Safety
/// `problem` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn capmap_plan_conditional(
    problem: *const CapmapProblem,
    budget: u32,
    max_depth: u32,
    out: *mut *mut c_char,
) -> CapmapStatus {
    guard(|| {
        let problem = handle(problem, "problem")?;
        let out = out_ptr(out, "out")?;
        let mut options = CondOptions::with_budget(budget);
        if max_depth > 0 {
            options.max_depth = max_depth;
        }
        let plan = plan_conditional_with(&problem.0, &options)?;
        *out = into_c_string(formats::conditional_plan_to_string(&plan));
        Ok(())
    })
}
