//! C ABI for the sarmanov-ruin library.
//!
//! Models are opaque handles built from a TOML model description (the same
//! schema as the `[model]` table of a ruinsim experiment file). Every
//! function returns an [`SrnStatus`]; on failure the per-thread message from
//! [`srn_last_error_message`] explains what went wrong.
//!
//! The generated header lives at `include/sarmanov_ruin.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use sarmanov_ruin::asymptotics;
use sarmanov_ruin::error::Error;
use sarmanov_ruin::experiment::ModelConfig;
use sarmanov_ruin::sarmanov::SarmanovModel;
use sarmanov_ruin::simulate::{self, MCEstimate, McMethod};

/// Status codes mirroring the ruinsim exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrnStatus {
    Ok = 0,
    /// Null pointer, malformed UTF-8/TOML, or an argument outside its domain.
    InvalidArgument = 1,
    /// The model violates a Sarmanov constraint.
    InvalidModel = 2,
    /// A standing hypothesis of the requested asymptotic fails.
    HypothesisViolation = 3,
    /// Quadrature, sampling, or internal-consistency failure.
    NumericalFailure = 4,
}

/// Estimator choice for the Monte Carlo entry points.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrnMethod {
    Crude = 0,
    Conditional = 1,
}

impl SrnMethod {
    fn to_method(self) -> McMethod {
        match self {
            SrnMethod::Crude => McMethod::Crude,
            SrnMethod::Conditional => McMethod::Conditional,
        }
    }
}

/// The asymptotic constants of a model.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SrnConstants {
    pub alpha: f64,
    pub theta: f64,
    pub d1: f64,
    pub e_y_alpha: f64,
    pub kernel_moment: f64,
    pub kappa: f64,
}

/// A Monte Carlo estimate. `truncation_index` is -1 unless the estimate
/// came from the truncated infinite-horizon estimator, in which case
/// `remainder_bound` carries the conservative truncation bound.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SrnEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub truncation_index: i64,
    pub remainder_bound: f64,
}

impl From<MCEstimate> for SrnEstimate {
    fn from(e: MCEstimate) -> Self {
        SrnEstimate {
            value: e.value,
            stderr: e.stderr,
            n_samples: e.n_samples,
            truncation_index: e.truncation_index.map_or(-1, i64::from),
            remainder_bound: e.remainder_bound.unwrap_or(0.0),
        }
    }
}

/// Opaque model handle.
pub struct SrnModel {
    inner: SarmanovModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SrnStatus {
    match err {
        Error::Domain(_) => SrnStatus::InvalidArgument,
        Error::InvalidModel(_) => SrnStatus::InvalidModel,
        Error::Hypothesis(_) => SrnStatus::HypothesisViolation,
        Error::Numerical(_) => SrnStatus::NumericalFailure,
    }
}

fn fail(err: Error) -> SrnStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn fail_arg(msg: &str) -> SrnStatus {
    set_error(msg.to_string());
    SrnStatus::InvalidArgument
}

/// Run a fallible body, converting panics into `NumericalFailure` so they
/// never unwind across the C boundary.
fn guarded<F: FnOnce() -> SrnStatus>(body: F) -> SrnStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".to_string());
            SrnStatus::NumericalFailure
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn srn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn srn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Configure the global worker pool; call at most once, before any
/// estimator. Returns InvalidArgument if the pool is already running.
#[no_mangle]
pub extern "C" fn srn_init_workers(workers: u32) -> SrnStatus {
    match rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1) as usize)
        .build_global()
    {
        Ok(()) => SrnStatus::Ok,
        Err(e) => fail_arg(&format!("worker pool already configured: {e}")),
    }
}

/// Build a model from a TOML description with the fields of a ruinsim
/// `[model]` table (`theta`, `[f]`, `[g]`, optional `[kernel]`). On success
/// `*out` owns the handle; free it with [`srn_model_free`].
///
/// # Safety
/// `toml_text` must be a valid NUL-terminated string and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn srn_model_from_toml(
    toml_text: *const c_char,
    out: *mut *mut SrnModel,
) -> SrnStatus {
    guarded(|| {
        if toml_text.is_null() || out.is_null() {
            return fail_arg("srn_model_from_toml: null pointer");
        }
        let text = match CStr::from_ptr(toml_text).to_str() {
            Ok(t) => t,
            Err(_) => return fail_arg("srn_model_from_toml: text is not UTF-8"),
        };
        let config: ModelConfig = match toml::from_str(text) {
            Ok(c) => c,
            Err(e) => return fail_arg(&format!("model TOML: {e}")),
        };
        match config.build() {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SrnModel { inner }));
                SrnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `model` must be a pointer from [`srn_model_from_toml`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn srn_model_free(model: *mut SrnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn borrow_model<'a>(model: *const SrnModel) -> Option<&'a SarmanovModel> {
    model.as_ref().map(|m| &m.inner)
}

/// `P[X > x]` for the loss marginal.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn srn_tail_f(
    model: *const SrnModel,
    x: f64,
    out: *mut f64,
) -> SrnStatus {
    guarded(|| {
        let (Some(m), false) = (borrow_model(model), out.is_null()) else {
            return fail_arg("srn_tail_f: null pointer");
        };
        *out = m.f().tail(x);
        SrnStatus::Ok
    })
}

/// κ and its ingredients.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn srn_constants(
    model: *const SrnModel,
    out: *mut SrnConstants,
) -> SrnStatus {
    guarded(|| {
        let (Some(m), false) = (borrow_model(model), out.is_null()) else {
            return fail_arg("srn_constants: null pointer");
        };
        match asymptotics::breiman_constant(m) {
            Ok(c) => {
                *out = SrnConstants {
                    alpha: c.alpha,
                    theta: c.theta,
                    d1: c.d1,
                    e_y_alpha: c.e_y_alpha,
                    kernel_moment: c.kernel_moment,
                    kappa: c.kappa,
                };
                SrnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// (1 - `E[Y^α]`^n)/(1 - `E[Y^α]`) · κ (equal to n·κ at `E[Y^α] = 1)`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn srn_finite_horizon_factor(
    model: *const SrnModel,
    n: u32,
    out: *mut f64,
) -> SrnStatus {
    guarded(|| {
        let (Some(m), false) = (borrow_model(model), out.is_null()) else {
            return fail_arg("srn_finite_horizon_factor: null pointer");
        };
        match asymptotics::breiman_constant(m).and_then(|c| c.finite_horizon_factor(n)) {
            Ok(v) => {
                *out = v;
                SrnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// κ/(1 - `E[Y^α]`); requires `E[Y^α]` < 1.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn srn_infinite_horizon_factor(
    model: *const SrnModel,
    out: *mut f64,
) -> SrnStatus {
    guarded(|| {
        let (Some(m), false) = (borrow_model(model), out.is_null()) else {
            return fail_arg("srn_infinite_horizon_factor: null pointer");
        };
        match asymptotics::breiman_constant(m).and_then(|c| c.infinite_horizon_factor()) {
            Ok(v) => {
                *out = v;
                SrnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// `P[XY > x]` by adaptive quadrature.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn srn_exact_product_tail(
    model: *const SrnModel,
    x: f64,
    out: *mut f64,
) -> SrnStatus {
    guarded(|| {
        let (Some(m), false) = (borrow_model(model), out.is_null()) else {
            return fail_arg("srn_exact_product_tail: null pointer");
        };
        match simulate::exact_product_tail(m, x) {
            Ok(v) => {
                *out = v;
                SrnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Monte Carlo estimate of `P[XY > x]`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn srn_product_tail_mc(
    model: *const SrnModel,
    x: f64,
    method: SrnMethod,
    n_samples: u64,
    seed: u64,
    out: *mut SrnEstimate,
) -> SrnStatus {
    guarded(|| {
        let (Some(m), false) = (borrow_model(model), out.is_null()) else {
            return fail_arg("srn_product_tail_mc: null pointer");
        };
        match simulate::product_tail_mc(m, x, method.to_method(), n_samples, seed) {
            Ok(e) => {
                *out = e.into();
                SrnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Conditional estimate of the per-term tail H̄_i(x) = `P[X_i Π_{j≤i} Y_j > x]`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn srn_estimate_h_i(
    model: *const SrnModel,
    i: u32,
    x: f64,
    n_samples: u64,
    seed: u64,
    out: *mut SrnEstimate,
) -> SrnStatus {
    guarded(|| {
        let (Some(m), false) = (borrow_model(model), out.is_null()) else {
            return fail_arg("srn_estimate_h_i: null pointer");
        };
        match simulate::estimate_h_i(m, i, x, n_samples, seed) {
            Ok(e) => {
                *out = e.into();
                SrnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Ψ(x, n), crude path simulation or the conditional per-term sum.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn srn_estimate_finite_ruin(
    model: *const SrnModel,
    x: f64,
    n: u32,
    method: SrnMethod,
    n_samples: u64,
    seed: u64,
    out: *mut SrnEstimate,
) -> SrnStatus {
    guarded(|| {
        let (Some(m), false) = (borrow_model(model), out.is_null()) else {
            return fail_arg("srn_estimate_finite_ruin: null pointer");
        };
        match simulate::estimate_finite_ruin(m, x, n, method.to_method(), n_samples, seed) {
            Ok(e) => {
                *out = e.into();
                SrnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Ψ(x) by the truncated conditional estimator; requires `E[Y^α]` < 1 and
/// `E[log Y]` < 0.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn srn_estimate_infinite_ruin(
    model: *const SrnModel,
    x: f64,
    n_samples: u64,
    tail_tol: f64,
    seed: u64,
    out: *mut SrnEstimate,
) -> SrnStatus {
    guarded(|| {
        let (Some(m), false) = (borrow_model(model), out.is_null()) else {
            return fail_arg("srn_estimate_infinite_ruin: null pointer");
        };
        match simulate::estimate_infinite_ruin(m, x, n_samples, tail_tol, seed) {
            Ok(e) => {
                *out = e.into();
                SrnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// n exact joint draws into caller-provided buffers of length n.
///
/// # Safety
/// `model` must be a live handle; `xs` and `ys` must point to `n` writable
/// doubles each.
#[no_mangle]
pub unsafe extern "C" fn srn_sample_joint(
    model: *const SrnModel,
    n: u64,
    seed: u64,
    xs: *mut f64,
    ys: *mut f64,
) -> SrnStatus {
    guarded(|| {
        let (Some(m), false) = (borrow_model(model), xs.is_null() || ys.is_null()) else {
            return fail_arg("srn_sample_joint: null pointer");
        };
        match m.sample_joint(n as usize, seed) {
            Ok(draws) => {
                for (k, (x, y)) in draws.into_iter().enumerate() {
                    *xs.add(k) = x;
                    *ys.add(k) = y;
                }
                SrnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
