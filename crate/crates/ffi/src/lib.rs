//! C ABI over `portfolio_anneal`.
//!
//! Instances are opaque `PaQubo` handles released with `pa_qubo_free`. Every
//! fallible function returns a `PA_*` status code; on failure the message is
//! available from `pa_last_error` on the same thread until the next call.
//! Bit buffers hold one byte (0 or 1) per asset.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use portfolio_anneal::bench::{generate_instance, tts, EnsembleConfig};
use portfolio_anneal::chimera::{build_chimera, clique_embed};
use portfolio_anneal::qubo::{exact_solve_capped, QuboInstance, Selection, DEFAULT_EXACT_CAP};
use portfolio_anneal::solvers::{ga_solve, greedy_selection, GaConfig};
use portfolio_anneal::Error;

pub const PA_OK: i32 = 0;
/// A required pointer argument was null.
pub const PA_ERR_NULL: i32 = 1;
/// Invalid input (bad parameters, malformed instance, size limits).
pub const PA_ERR_VALIDATION: i32 = 2;
/// Runtime failure such as an unreadable file.
pub const PA_ERR_RUNTIME: i32 = 3;
/// Output buffer length does not match the instance size.
pub const PA_ERR_BUFFER: i32 = 4;
/// Time-to-solution is undefined because the success probability is zero.
pub const PA_ERR_UNDEFINED: i32 = 5;
/// A Rust panic was caught at the boundary.
pub const PA_ERR_PANIC: i32 = 6;

/// Opaque QUBO instance.
pub struct PaQubo {
    inner: QuboInstance,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(code: i32, msg: impl Into<String>) -> i32 {
    set_error(msg);
    code
}

fn from_error(e: Error) -> i32 {
    let code = match e {
        Error::UndefinedTts => PA_ERR_UNDEFINED,
        ref e if e.is_validation() => PA_ERR_VALIDATION,
        _ => PA_ERR_RUNTIME,
    };
    fail(code, e.to_string())
}

fn guard(f: impl FnOnce() -> i32) -> i32 {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(PA_ERR_PANIC, "panic in library"))
}

unsafe fn qubo<'a>(q: *const PaQubo) -> Option<&'a QuboInstance> {
    q.as_ref().map(|h| &h.inner)
}

unsafe fn emit(out: *mut *mut PaQubo, q: QuboInstance) -> i32 {
    *out = Box::into_raw(Box::new(PaQubo { inner: q }));
    PA_OK
}

unsafe fn write_selection(
    sel: &Selection,
    bits_out: *mut u8,
    len: usize,
    value_out: *mut f64,
) -> i32 {
    if len != sel.bits.len() {
        return fail(
            PA_ERR_BUFFER,
            format!("buffer holds {len} bits, instance has {}", sel.bits.len()),
        );
    }
    ptr::copy_nonoverlapping(sel.bits.as_ptr(), bits_out, len);
    *value_out = sel.value;
    PA_OK
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn pa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Load an instance from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pa_qubo_load(path: *const c_char, out: *mut *mut PaQubo) -> i32 {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(PA_ERR_NULL, "null argument");
        }
        let Ok(p) = CStr::from_ptr(path).to_str() else {
            return fail(PA_ERR_VALIDATION, "path is not UTF-8");
        };
        match QuboInstance::load(Path::new(p)) {
            Ok(q) => emit(out, q),
            Err(e) => from_error(e),
        }
    })
}

/// Parse an instance from a JSON string.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pa_qubo_from_json(json: *const c_char, out: *mut *mut PaQubo) -> i32 {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(PA_ERR_NULL, "null argument");
        }
        let Ok(s) = CStr::from_ptr(json).to_str() else {
            return fail(PA_ERR_VALIDATION, "json is not UTF-8");
        };
        match QuboInstance::from_json(s) {
            Ok(q) => emit(out, q),
            Err(e) => from_error(e),
        }
    })
}

/// Generate instance `index` of size `n` from the default market model and
/// bucket map, ensemble seed `seed`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pa_qubo_generate(
    n: usize,
    index: usize,
    seed: u64,
    out: *mut *mut PaQubo,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return fail(PA_ERR_NULL, "null argument");
        }
        if !(2..=64).contains(&n) {
            return from_error(Error::TooLarge { n, max: 64 });
        }
        let cfg = EnsembleConfig {
            seed,
            ..EnsembleConfig::default()
        };
        match generate_instance(&cfg, n, index) {
            Ok(q) => emit(out, q),
            Err(e) => from_error(e),
        }
    })
}

/// Release an instance. Null is ignored.
///
/// # Safety
/// `q` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pa_qubo_free(q: *mut PaQubo) {
    if !q.is_null() {
        drop(Box::from_raw(q));
    }
}

/// Number of variables.
///
/// # Safety
/// `q` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pa_qubo_n(q: *const PaQubo, out: *mut usize) -> i32 {
    guard(|| match (qubo(q), out.is_null()) {
        (Some(q), false) => {
            *out = q.n();
            PA_OK
        }
        _ => fail(PA_ERR_NULL, "null argument"),
    })
}

/// Serialize to JSON. Free the string with `pa_string_free`.
///
/// # Safety
/// `q` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pa_qubo_to_json(q: *const PaQubo, out: *mut *mut c_char) -> i32 {
    guard(|| {
        let Some(q) = qubo(q) else {
            return fail(PA_ERR_NULL, "null argument");
        };
        if out.is_null() {
            return fail(PA_ERR_NULL, "null argument");
        }
        match q.to_json() {
            Ok(s) => {
                *out = CString::new(s).expect("json has no NUL").into_raw();
                PA_OK
            }
            Err(e) => from_error(e),
        }
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Objective value of a selection.
///
/// # Safety
/// `bits` must point to `len` readable bytes; `value_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pa_qubo_evaluate(
    q: *const PaQubo,
    bits: *const u8,
    len: usize,
    value_out: *mut f64,
) -> i32 {
    guard(|| {
        let Some(q) = qubo(q) else {
            return fail(PA_ERR_NULL, "null argument");
        };
        if bits.is_null() || value_out.is_null() {
            return fail(PA_ERR_NULL, "null argument");
        }
        match q.evaluate(std::slice::from_raw_parts(bits, len)) {
            Ok(v) => {
                *value_out = v;
                PA_OK
            }
            Err(e) => from_error(e),
        }
    })
}

/// Exact minimum; ties resolve to the lexicographically smallest selection.
/// Sizes above `max_n` (0 selects the default cap) are rejected.
///
/// # Safety
/// `bits_out` must hold `len` writable bytes; `value_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pa_solve_exact(
    q: *const PaQubo,
    max_n: usize,
    bits_out: *mut u8,
    len: usize,
    value_out: *mut f64,
) -> i32 {
    guard(|| {
        let Some(q) = qubo(q) else {
            return fail(PA_ERR_NULL, "null argument");
        };
        if bits_out.is_null() || value_out.is_null() {
            return fail(PA_ERR_NULL, "null argument");
        }
        let cap = if max_n == 0 { DEFAULT_EXACT_CAP } else { max_n };
        match exact_solve_capped(q, cap) {
            Ok(sel) => write_selection(&sel, bits_out, len, value_out),
            Err(e) => from_error(e),
        }
    })
}

/// Greedy descent on the Ising form.
///
/// # Safety
/// `bits_out` must hold `len` writable bytes; `value_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pa_solve_greedy(
    q: *const PaQubo,
    bits_out: *mut u8,
    len: usize,
    value_out: *mut f64,
) -> i32 {
    guard(|| {
        let Some(q) = qubo(q) else {
            return fail(PA_ERR_NULL, "null argument");
        };
        if bits_out.is_null() || value_out.is_null() {
            return fail(PA_ERR_NULL, "null argument");
        }
        write_selection(&greedy_selection(q), bits_out, len, value_out)
    })
}

/// Genetic algorithm with default population settings.
///
/// # Safety
/// `bits_out` must hold `len` writable bytes; `value_out` and `calls_out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn pa_solve_ga(
    q: *const PaQubo,
    seed: u64,
    max_iterations: usize,
    greedy_seed: bool,
    bits_out: *mut u8,
    len: usize,
    value_out: *mut f64,
    calls_out: *mut u64,
) -> i32 {
    guard(|| {
        let Some(q) = qubo(q) else {
            return fail(PA_ERR_NULL, "null argument");
        };
        if bits_out.is_null() || value_out.is_null() || calls_out.is_null() {
            return fail(PA_ERR_NULL, "null argument");
        }
        let cfg = GaConfig {
            seed,
            max_iterations,
            ..GaConfig::default()
        };
        let init = greedy_seed.then(|| greedy_selection(q).bits);
        match ga_solve(q, &cfg, init.as_deref()) {
            Ok(r) => {
                *calls_out = r.objective_calls;
                write_selection(&r.best, bits_out, len, value_out)
            }
            Err(e) => from_error(e),
        }
    })
}

/// Time to solution at confidence `alpha` for single-shot success
/// probability `p` and run time `t_run`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pa_tts(p: f64, alpha: f64, t_run: f64, out: *mut f64) -> i32 {
    guard(|| {
        if out.is_null() {
            return fail(PA_ERR_NULL, "null argument");
        }
        match tts(p, alpha, t_run) {
            Ok(v) => {
                *out = v;
                PA_OK
            }
            Err(e) => from_error(e),
        }
    })
}

/// Build and validate the clique embedding of `n` variables on an `m x m`
/// Chimera graph with the given defective qubits; reports the chain length.
///
/// # Safety
/// `defects` must point to `n_defects` readable ids (or be null when
/// `n_defects` is 0); `chain_length_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pa_embedding_validate(
    n: usize,
    m: usize,
    defects: *const usize,
    n_defects: usize,
    chain_length_out: *mut usize,
) -> i32 {
    guard(|| {
        if chain_length_out.is_null() || (defects.is_null() && n_defects > 0) {
            return fail(PA_ERR_NULL, "null argument");
        }
        let defects = if n_defects == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(defects, n_defects)
        };
        let result = build_chimera(m, defects).and_then(|g| {
            let e = clique_embed(&g, n)?;
            e.validate(&g)?;
            Ok(e.chain_length)
        });
        match result {
            Ok(len) => {
                *chain_length_out = len;
                PA_OK
            }
            Err(e) => from_error(e),
        }
    })
}
