//! C ABI surface: opaque system handles, integer error codes, and a
//! per-thread error message. All functions are safe to call from any thread;
//! handles must not be shared across threads without external locking.
//!
//! Error codes: 0 success, 1 invalid argument, 2 validation/parse failure,
//! 3 analysis failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use safewcet::model::{load_system, parse_system, SystemSpec};
use safewcet::seeds::{derive_seed, rng_from_seed};
use safewcet::sim::{label, simulate, Label, TestCase, WcetAssignment};

pub const SW_OK: i32 = 0;
pub const SW_EINVAL: i32 = 1;
pub const SW_EVALIDATION: i32 = 2;
pub const SW_EFAILURE: i32 = 3;

/// Opaque handle to a validated system description.
pub struct SwSystem {
    spec: SystemSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn sw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

fn guard<F: FnOnce() -> i32>(f: F) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            SW_EFAILURE
        }
    }
}

unsafe fn read_c_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, i32> {
    if ptr.is_null() {
        set_error(&format!("{what} is null"));
        return Err(SW_EINVAL);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        SW_EINVAL
    })
}

fn install(spec: SystemSpec, out: *mut *mut SwSystem) -> i32 {
    if out.is_null() {
        set_error("output handle pointer is null");
        return SW_EINVAL;
    }
    let handle = Box::new(SwSystem { spec });
    unsafe { *out = Box::into_raw(handle) };
    SW_OK
}

/// Loads a system description file into a new handle.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be a valid
/// writable pointer. On success `*out` owns the handle and must be released
/// with `sw_system_free`.
#[no_mangle]
pub unsafe extern "C" fn sw_system_load(path: *const c_char, out: *mut *mut SwSystem) -> i32 {
    guard(|| {
        let path = match read_c_str(path, "path") {
            Ok(s) => s,
            Err(code) => return code,
        };
        match load_system(path) {
            Ok(spec) => install(spec, out),
            Err(e) => {
                set_error(&e.to_string());
                SW_EVALIDATION
            }
        }
    })
}

/// Parses a system description from a JSON string into a new handle.
///
/// # Safety
/// Same contract as `sw_system_load`, with `json` holding the document text.
#[no_mangle]
pub unsafe extern "C" fn sw_system_parse(json: *const c_char, out: *mut *mut SwSystem) -> i32 {
    guard(|| {
        let text = match read_c_str(json, "json") {
            Ok(s) => s,
            Err(code) => return code,
        };
        match parse_system(text) {
            Ok(spec) => install(spec, out),
            Err(e) => {
                set_error(&e.to_string());
                SW_EVALIDATION
            }
        }
    })
}

/// Releases a handle obtained from `sw_system_load` or `sw_system_parse`.
/// Passing null is a no-op.
///
/// # Safety
/// `system` must be a handle returned by this library, released exactly once.
#[no_mangle]
pub unsafe extern "C" fn sw_system_free(system: *mut SwSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Number of tasks in the system.
///
/// # Safety
/// `system` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sw_system_task_count(system: *const SwSystem, out: *mut usize) -> i32 {
    guard(|| {
        if system.is_null() || out.is_null() {
            set_error("system or output pointer is null");
            return SW_EINVAL;
        }
        *out = (*system).spec.tasks.len();
        SW_OK
    })
}

/// Simulation horizon in milliseconds.
///
/// # Safety
/// `system` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sw_system_horizon_ms(system: *const SwSystem, out: *mut f64) -> i32 {
    guard(|| {
        if system.is_null() || out.is_null() {
            set_error("system or output pointer is null");
            return SW_EINVAL;
        }
        let spec = &(*system).spec;
        *out = spec.scale.to_ms_f64(spec.sim_horizon);
        SW_OK
    })
}

/// Simulates one randomized scenario (arrivals, context-switch times, WCET
/// draw) under `seed` and writes the verdict to `out`: 0 when every
/// constraint holds, 1 when violated. Equal seeds give equal verdicts.
///
/// # Safety
/// `system` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sw_label_random(
    system: *const SwSystem,
    seed: u64,
    out: *mut i32,
) -> i32 {
    guard(|| {
        if system.is_null() || out.is_null() {
            set_error("system or output pointer is null");
            return SW_EINVAL;
        }
        let spec = &(*system).spec;
        let mut rng = rng_from_seed(derive_seed(seed, "ffi-label", &[]));
        let tc = TestCase::sample(spec, &mut rng);
        let w = WcetAssignment::sample(spec, &mut rng);
        let scenario = match simulate(spec, &tc, &w) {
            Ok(s) => s,
            Err(e) => {
                set_error(&e.to_string());
                return SW_EFAILURE;
            }
        };
        match label(spec, &scenario, &spec.target_tasks) {
            Ok(Label::Safe) => {
                *out = 0;
                SW_OK
            }
            Ok(Label::Unsafe) => {
                *out = 1;
                SW_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                SW_EFAILURE
            }
        }
    })
}
