//! C interface to stratlearn.
//!
//! Every function returns an `SlStatus`. On failure the message is kept per
//! thread and read with `sl_last_error_message`. Handles are opaque and
//! released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use stratlearn::inference::{check_inputs, fast_solve, predict_rewards};
use stratlearn::io::{load_library, load_model, parse_mps, LibraryFile};
use stratlearn::learner::RewardModel;
use stratlearn::milp::{solve_milp, BnbConfig};
use stratlearn::model::{validate_instance, MilpInstance, SolveStatus};
use stratlearn::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    NotOptimal = 5,
    Runtime = 6,
    Panic = 7,
}

/// Parsed MILP instance.
pub struct SlInstance(MilpInstance);

/// Trained reward model.
pub struct SlModel(RewardModel);

/// Pruned strategy library with its parameter coordinates.
pub struct SlLibrary(LibraryFile);

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SlSolveResult {
    pub objective: f64,
    /// Infeasibility of the returned point.
    pub p: f64,
    pub strategy_index: usize,
    /// 1 when no candidate reduced problem was feasible.
    pub all_infeasible: i32,
    pub time_ms: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> SlStatus {
    match e {
        Error::Io(_) => SlStatus::Io,
        Error::Mps { .. } | Error::Json(_) | Error::FormatVersion { .. } => SlStatus::Parse,
        Error::NotOptimal(_) => SlStatus::NotOptimal,
        e if e.is_validation() => SlStatus::InvalidArgument,
        _ => SlStatus::Runtime,
    }
}

struct Fail(SlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SlStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SlStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            SlStatus::Panic
        }
    }
}

fn null(name: &str) -> Fail {
    Fail(SlStatus::NullPointer, format!("{name} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(SlStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_slice(out: *mut f64, cap: usize, values: &[f64], name: &str) -> Result<(), Fail> {
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null(name));
    }
    if cap < values.len() {
        return Err(Fail(SlStatus::InvalidArgument, format!("{name} holds {cap} values, need {}", values.len())));
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn sl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates an MPS document.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_instance_from_mps(text: *const c_char, out: *mut *mut SlInstance) -> SlStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let inst = parse_mps(text)?;
        validate_instance(&inst).into_result()?;
        write_out(out, Box::into_raw(Box::new(SlInstance(inst))), "out")
    })
}

/// # Safety
/// `inst` must come from `sl_instance_from_mps` or be null.
#[no_mangle]
pub unsafe extern "C" fn sl_instance_free(inst: *mut SlInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// # Safety
/// `inst` must be a live handle; `n` and `m` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_instance_dims(inst: *const SlInstance, n: *mut usize, m: *mut usize) -> SlStatus {
    guard(|| {
        let inst = &ref_arg(inst, "inst")?.0;
        write_out(n, inst.n(), "n")?;
        write_out(m, inst.m(), "m")
    })
}

/// Solves the full instance by branch-and-bound with default settings.
/// Writes the optimal objective and, when `x` is non-null, the point (`x_cap >= n`).
///
/// # Safety
/// `inst` must be a live handle; `objective` must be writable; `x` must hold `x_cap` values.
#[no_mangle]
pub unsafe extern "C" fn sl_solve_full(inst: *const SlInstance, objective: *mut f64, x: *mut f64, x_cap: usize) -> SlStatus {
    guard(|| {
        let inst = &ref_arg(inst, "inst")?.0;
        let sol = solve_milp(inst, &BnbConfig::default());
        if sol.status != SolveStatus::Optimal {
            return Err(Error::NotOptimal(sol.status).into());
        }
        write_out(objective, sol.objective, "objective")?;
        if !x.is_null() {
            write_slice(x, x_cap, &sol.x, "x")?;
        }
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_model_load(path: *const c_char, out: *mut *mut SlModel) -> SlStatus {
    guard(|| {
        let model = load_model(Path::new(str_arg(path, "path")?))?;
        write_out(out, Box::into_raw(Box::new(SlModel(model))), "out")
    })
}

/// # Safety
/// `model` must come from `sl_model_load` or be null.
#[no_mangle]
pub unsafe extern "C" fn sl_model_free(model: *mut SlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_library_load(path: *const c_char, out: *mut *mut SlLibrary) -> SlStatus {
    guard(|| {
        let lib = load_library(Path::new(str_arg(path, "path")?))?;
        write_out(out, Box::into_raw(Box::new(SlLibrary(lib))), "out")
    })
}

/// # Safety
/// `lib` must come from `sl_library_load` or be null.
#[no_mangle]
pub unsafe extern "C" fn sl_library_free(lib: *mut SlLibrary) {
    if !lib.is_null() {
        drop(Box::from_raw(lib));
    }
}

/// Number of strategies in the library.
///
/// # Safety
/// `lib` must be a live handle; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_library_len(lib: *const SlLibrary, len: *mut usize) -> SlStatus {
    guard(|| write_out(len, ref_arg(lib, "lib")?.0.library.len(), "len"))
}

/// Predicted reward of every library strategy for parameter `theta`.
///
/// # Safety
/// Handles must be live; `theta` holds `theta_len` values; `scores` holds `scores_cap` values.
#[no_mangle]
pub unsafe extern "C" fn sl_predict(
    model: *const SlModel,
    lib: *const SlLibrary,
    theta: *const f64,
    theta_len: usize,
    scores: *mut f64,
    scores_cap: usize,
) -> SlStatus {
    guard(|| {
        let model = &ref_arg(model, "model")?.0;
        let lib = &ref_arg(lib, "lib")?.0;
        let theta = slice_arg(theta, theta_len, "theta")?;
        check_inputs(model, theta, &lib.library)?;
        let pred = predict_rewards(model, theta, &lib.library);
        write_slice(scores, scores_cap, &pred, "scores")
    })
}

/// Solves `inst` through the top-`k` predicted strategies. The parameter is
/// read from the instance at the library's coordinates. When `x` is non-null
/// the point is written there (`x_cap >= n`).
///
/// # Safety
/// Handles must be live; `result` must be writable; `x` must hold `x_cap` values.
#[no_mangle]
pub unsafe extern "C" fn sl_fast_solve(
    model: *const SlModel,
    lib: *const SlLibrary,
    inst: *const SlInstance,
    k: usize,
    result: *mut SlSolveResult,
    x: *mut f64,
    x_cap: usize,
) -> SlStatus {
    guard(|| {
        let model = &ref_arg(model, "model")?.0;
        let lib = &ref_arg(lib, "lib")?.0;
        let inst = &ref_arg(inst, "inst")?.0;
        if result.is_null() {
            return Err(null("result"));
        }
        let theta: Vec<f64> = lib.varying.iter().map(|c| c.read(inst)).collect();
        check_inputs(model, &theta, &lib.library)?;
        let start = std::time::Instant::now();
        let sel = fast_solve(model, inst, &theta, &lib.library, k, None, stratlearn::inference::DEFAULT_EPS)?;
        let time_ms = start.elapsed().as_secs_f64() * 1e3;
        if !x.is_null() {
            write_slice(x, x_cap, &sel.solution.x, "x")?;
        }
        write_out(
            result,
            SlSolveResult {
                objective: sel.solution.objective,
                p: sel.record.p,
                strategy_index: sel.index,
                all_infeasible: sel.all_infeasible as i32,
                time_ms,
            },
            "result",
        )
    })
}
