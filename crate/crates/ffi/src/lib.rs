//! C ABI for `szego-core`.
//!
//! Every entry point returns a [`SzegoStatus`]; results go through out
//! pointers. After a non-`SZEGO_STATUS_OK` status, `szego_last_error` gives a message
//! for the calling thread. Strings handed out by the library are freed with
//! `szego_string_free`; contexts with `szego_context_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_bigint::BigInt;
use num_rational::BigRational;
use szego_core::irregularity::{irregularity_ratio, LpExponent, MomentMemo};
use szego_core::kernel::{bergman_kernel_eval, KernelSeries};
use szego_core::moments::{moment, moment_table};
use szego_core::quad::PrecCtx;
use szego_core::real::{Complex, Real};
use szego_core::symbolic::{dz_certify, SymbolicError};
use szego_core::weight::{phi, pseudoconvexity_scan, RadialWeightProfile, Verdict, WeightParams, DEFAULT_S_CAP};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SzegoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Parameters outside what the operation supports (e.g. the exact derivative ring).
    Unsupported = 3,
    ComputationFailed = 4,
    Panic = 5,
}

/// Opaque handle: weight parameters, precision settings and a moment memo.
pub struct SzegoContext {
    params: WeightParams,
    precision: PrecCtx,
    memo: MomentMemo,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: SzegoStatus, msg: impl Into<String>) -> SzegoStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning panics into `SzegoStatus::Panic`.
fn guard(f: impl FnOnce() -> SzegoStatus) -> SzegoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(e) => {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into());
            fail(SzegoStatus::Panic, msg)
        }
    }
}

/// # Safety
/// `ctx` must be null or a live pointer from `szego_context_new`.
unsafe fn context<'a>(ctx: *const SzegoContext) -> Result<&'a SzegoContext, SzegoStatus> {
    ctx.as_ref().ok_or_else(|| fail(SzegoStatus::NullPointer, "null context"))
}

macro_rules! out {
    ($p:expr) => {
        match $p.as_mut() {
            Some(r) => r,
            None => return fail(SzegoStatus::NullPointer, concat!("null out pointer ", stringify!($p))),
        }
    };
}

macro_rules! ctx_or_return {
    ($c:expr) => {
        match context($c) {
            Ok(c) => c,
            Err(s) => return s,
        }
    };
}

/// Creates a context for `φ = (1-r²)^A exp(-B/(1-r²)^α)`.
///
/// `precision_bits >= 128`; `tol` is the quadrature target relative error.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn szego_context_new(a: f64, b: f64, alpha: f64, precision_bits: u32, tol: f64, out: *mut *mut SzegoContext) -> SzegoStatus {
    guard(|| {
        let out = out!(out);
        *out = ptr::null_mut();
        let params = match WeightParams::new(a, b, alpha) {
            Ok(p) => p,
            Err(e) => return fail(SzegoStatus::InvalidArgument, e.to_string()),
        };
        let precision = match PrecCtx::new(precision_bits as usize, tol, 12) {
            Ok(p) => p,
            Err(e) => return fail(SzegoStatus::InvalidArgument, e.to_string()),
        };
        *out = Box::into_raw(Box::new(SzegoContext { params, precision, memo: MomentMemo::new() }));
        SzegoStatus::Ok
    })
}

/// # Safety
/// `ctx` must be null or a pointer from `szego_context_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn szego_context_free(ctx: *mut SzegoContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// Message for the last failure on this thread, or null. Valid until the next
/// call into the library from the same thread; do not free.
#[no_mangle]
pub extern "C" fn szego_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn szego_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn szego_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `φ(r)` for `0 <= r <= 1`.
///
/// # Safety
/// `ctx` from `szego_context_new`; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn szego_phi(ctx: *const SzegoContext, r: f64, out: *mut f64) -> SzegoStatus {
    guard(|| {
        let c = ctx_or_return!(ctx);
        let out = out!(out);
        if !(0.0..=1.0).contains(&r) {
            return fail(SzegoStatus::InvalidArgument, format!("r = {r} outside [0, 1]"));
        }
        *out = phi(&c.params, &Real::from_f64(r, c.precision.bits())).to_f64();
        SzegoStatus::Ok
    })
}

/// `(2π)² ∫₀¹ r^{β+1} φ^{2j+1} √(1+|∇φ|²) dr`.
///
/// Large `β` underflows a double, so the natural log is returned as well.
/// Either out pointer may be null.
///
/// # Safety
/// `ctx` from `szego_context_new`; non-null out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn szego_moment(ctx: *const SzegoContext, j: u32, beta: f64, out_value: *mut f64, out_ln: *mut f64) -> SzegoStatus {
    guard(|| {
        let c = ctx_or_return!(ctx);
        let w = RadialWeightProfile::for_index(c.params, j);
        match moment(&w, &Real::from_f64(beta, c.precision.bits()), &c.precision) {
            Ok(q) => {
                if let Some(v) = out_value.as_mut() {
                    *v = q.value.to_f64();
                }
                if let Some(l) = out_ln.as_mut() {
                    *l = q.value.ln_f64();
                }
                SzegoStatus::Ok
            }
            Err(e) => fail(SzegoStatus::ComputationFailed, e.to_string()),
        }
    })
}

/// `R_n(p) = ‖zⁿ‖_p ‖zⁿ‖_{p'} / ‖zⁿ‖₂²` for the base weight, `p = p_num/p_den > 1`.
///
/// # Safety
/// `ctx` from `szego_context_new`; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn szego_irregularity_ratio(ctx: *const SzegoContext, p_num: i64, p_den: i64, n: u32, out: *mut f64) -> SzegoStatus {
    guard(|| {
        let c = ctx_or_return!(ctx);
        let out = out!(out);
        if p_den <= 0 {
            return fail(SzegoStatus::InvalidArgument, "p_den must be positive");
        }
        let p = match LpExponent::new(BigRational::new(BigInt::from(p_num), BigInt::from(p_den))) {
            Ok(p) => p,
            Err(e) => return fail(SzegoStatus::InvalidArgument, e.to_string()),
        };
        let w = RadialWeightProfile::for_index(c.params, 0);
        match irregularity_ratio(&w, &p, n, &c.precision, &c.memo) {
            Ok(r) => {
                *out = r.to_f64();
                SzegoStatus::Ok
            }
            Err(e) => fail(SzegoStatus::ComputationFailed, e.to_string()),
        }
    })
}

/// Minimum of `Δ(-log φ)` over a boundary-refined grid and whether it clears `-1e-25`.
///
/// # Safety
/// `ctx` from `szego_context_new`; out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn szego_pseudoconvexity(ctx: *const SzegoContext, grid: u32, out_min: *mut f64, out_pass: *mut bool) -> SzegoStatus {
    guard(|| {
        let c = ctx_or_return!(ctx);
        let (min, pass) = (out!(out_min), out!(out_pass));
        let scan = pseudoconvexity_scan(&c.params, grid as usize, DEFAULT_S_CAP, 1e-25, c.precision.bits());
        *min = scan.min_value.to_f64();
        *pass = scan.verdict == Verdict::Pass;
        SzegoStatus::Ok
    })
}

/// `B_j(z, t)` on the disc from a moment table with `n_max + 1` entries.
///
/// # Safety
/// `ctx` from `szego_context_new`; out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn szego_bergman_kernel(
    ctx: *const SzegoContext,
    j: u32,
    n_max: u32,
    z_re: f64,
    z_im: f64,
    t_re: f64,
    t_im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> SzegoStatus {
    guard(|| {
        let c = ctx_or_return!(ctx);
        let (re, im) = (out!(out_re), out!(out_im));
        let bits = c.precision.bits();
        let table = match moment_table(&c.params, j, n_max, &c.precision) {
            Ok(t) => t,
            Err(e) => return fail(SzegoStatus::ComputationFailed, e.to_string()),
        };
        let (z, t) = (Complex::from_f64(z_re, z_im, bits), Complex::from_f64(t_re, t_im, bits));
        match bergman_kernel_eval(&KernelSeries::new(table), &z, &t, c.precision.target_rel_err) {
            Ok(v) => {
                *re = v.value.re.to_f64();
                *im = v.value.im.to_f64();
                SzegoStatus::Ok
            }
            Err(e) => fail(SzegoStatus::ComputationFailed, e.to_string()),
        }
    })
}

/// Derivative sign certificate as a JSON string; free it with `szego_string_free`.
///
/// # Safety
/// `ctx` from `szego_context_new`; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn szego_dz_certify_json(ctx: *const SzegoContext, max_order: u32, samples: u32, out_json: *mut *mut c_char) -> SzegoStatus {
    guard(|| {
        let c = ctx_or_return!(ctx);
        let out = out!(out_json);
        *out = ptr::null_mut();
        match dz_certify(&c.params, max_order, samples as usize) {
            Ok(cert) => {
                let text = serde_json::to_string(&cert).expect("certificate serialises");
                *out = CString::new(text).expect("json has no NUL").into_raw();
                SzegoStatus::Ok
            }
            Err(e @ SymbolicError::UnsupportedParams { .. }) => fail(SzegoStatus::Unsupported, e.to_string()),
            Err(e) => fail(SzegoStatus::ComputationFailed, e.to_string()),
        }
    })
}

/// Copies the last error into a Rust string; for tests and Rust callers.
pub fn last_error_message() -> Option<String> {
    let p = szego_last_error();
    // SAFETY: non-null pointers from szego_last_error are NUL-terminated and live until the next call.
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}
