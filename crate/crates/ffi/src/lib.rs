//! C ABI for the `ginar` library.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`ginar_fit`
//! and released with the matching `*_free`. Every fallible call returns a
//! [`GinarStatus`]; on failure the message is available from
//! [`ginar_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ginar::error::{ErrorKind, GinarError};
use ginar::estimation::{fit, Family, FitOptions, FitResult, Method};
use ginar::forecast::forecast_mean;
use ginar::model::GinarModel;
use ginar::transition::{transition_prob, QuadratureRule, TransitionMethod};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GinarStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Unsupported = 3,
    DataError = 4,
    NumericalError = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GinarFamily {
    PoInar = 0,
    NbInar = 1,
    GeomInar = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GinarMethod {
    Cml = 0,
    YuleWalker = 1,
    Cls = 2,
    Pseudo = 3,
    Whittle = 4,
    Saddlepoint = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GinarTransition {
    Davies = 0,
    Exact = 1,
}

/// Opaque model handle.
pub struct GinarModelHandle {
    model: GinarModel,
}

/// Opaque fit handle.
pub struct GinarFitHandle {
    fit: FitResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &GinarError) -> GinarStatus {
    match e.kind() {
        ErrorKind::Usage => GinarStatus::InvalidArgument,
        ErrorKind::Unsupported => GinarStatus::Unsupported,
        ErrorKind::Data => GinarStatus::DataError,
        ErrorKind::Numerical => GinarStatus::NumericalError,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), GinarStatus>) -> GinarStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GinarStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside ginar".into());
            GinarStatus::Panic
        }
    }
}

fn fail(e: GinarError) -> GinarStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> GinarStatus {
    set_error(format!("{what} is null"));
    GinarStatus::NullPointer
}

/// # Safety
/// `data` must be null only when `len == 0`, and otherwise point to `len` readable values.
unsafe fn slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], GinarStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

/// # Safety
/// As for [`slice`], for writable memory.
unsafe fn slice_mut<'a, T>(
    data: *mut T,
    len: usize,
    what: &str,
) -> Result<&'a mut [T], GinarStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(data, len))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ginar_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ginar_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version string"),
        };
    VERSION.as_ptr()
}

/// Builds a model. `r` is read only for `NbInar`.
///
/// # Safety
/// `alphas` must point to `p` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ginar_model_new(
    family: GinarFamily,
    alphas: *const f64,
    p: usize,
    mu: f64,
    r: f64,
    out: *mut *mut GinarModelHandle,
) -> GinarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let alphas = slice(alphas, p, "alphas")?.to_vec();
        let model = match family {
            GinarFamily::PoInar => GinarModel::po_inar(alphas, mu),
            GinarFamily::NbInar => GinarModel::nb_inar(alphas, mu, r),
            GinarFamily::GeomInar => GinarModel::geom_inar(alphas, mu),
        }
        .map_err(fail)?;
        *out = Box::into_raw(Box::new(GinarModelHandle { model }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`ginar_model_new`] or [`ginar_fit_model`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ginar_model_free(model: *mut GinarModelHandle) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ginar_model_order(
    model: *const GinarModelHandle,
    out: *mut usize,
) -> GinarStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = m.model.p();
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ginar_model_marginal_mean(
    model: *const GinarModelHandle,
    out: *mut f64,
) -> GinarStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = m.model.marginal_mean();
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ginar_model_marginal_variance(
    model: *const GinarModelHandle,
    out: *mut f64,
) -> GinarStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let v = m.model.marginal_variance().map_err(fail)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Writes `n` simulated counts into `out`.
///
/// # Safety
/// `model` must be a live handle and `out` must have room for `n` values.
#[no_mangle]
pub unsafe extern "C" fn ginar_model_simulate(
    model: *const GinarModelHandle,
    n: usize,
    burnin: usize,
    seed: u64,
    out: *mut u64,
) -> GinarStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let out = slice_mut(out, n, "out")?;
        let mut rng = ginar::rng::stream(seed, &[]);
        let series = m.model.simulate(n, burnin, &mut rng).map_err(fail)?;
        out.copy_from_slice(&series);
        Ok(())
    })
}

/// `P(X_t = x | lags)` with `lags` newest first.
///
/// # Safety
/// `model` must be a live handle, `lags` must point to `p` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ginar_transition_prob(
    model: *const GinarModelHandle,
    x: u64,
    lags: *const u64,
    p: usize,
    method: GinarTransition,
    out: *mut f64,
) -> GinarStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let lags = slice(lags, p, "lags")?;
        let method = match method {
            GinarTransition::Davies => TransitionMethod::Davies,
            GinarTransition::Exact => TransitionMethod::Exact,
        };
        let v =
            transition_prob(&m.model, x, lags, method, &QuadratureRule::default()).map_err(fail)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Conditional-mean forecasts for horizons `1..=h` from a chronological history.
///
/// # Safety
/// `model` must be a live handle, `history` must point to `len` values and
/// `out` must have room for `h` values.
#[no_mangle]
pub unsafe extern "C" fn ginar_forecast_mean(
    model: *const GinarModelHandle,
    history: *const u64,
    len: usize,
    h: usize,
    out: *mut f64,
) -> GinarStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let history = slice(history, len, "history")?;
        let out = slice_mut(out, h, "out")?;
        let f = forecast_mean(&m.model, history, h).map_err(fail)?;
        out.copy_from_slice(&f);
        Ok(())
    })
}

/// Fits a stationary model of order `p` with default options.
///
/// # Safety
/// `series` must point to `n` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ginar_fit(
    series: *const u64,
    n: usize,
    family: GinarFamily,
    p: usize,
    method: GinarMethod,
    out: *mut *mut GinarFitHandle,
) -> GinarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let series = slice(series, n, "series")?;
        let family = match family {
            GinarFamily::PoInar => Family::PoInar,
            GinarFamily::NbInar => Family::NbInar,
            GinarFamily::GeomInar => Family::GeomInar,
        };
        let method = match method {
            GinarMethod::Cml => Method::Cml,
            GinarMethod::YuleWalker => Method::YuleWalker,
            GinarMethod::Cls => Method::Cls,
            GinarMethod::Pseudo => Method::Pseudo,
            GinarMethod::Whittle => Method::Whittle,
            GinarMethod::Saddlepoint => Method::Saddlepoint,
        };
        let result =
            fit(series, &family.template(p), method, &FitOptions::default()).map_err(fail)?;
        *out = Box::into_raw(Box::new(GinarFitHandle { fit: result }));
        Ok(())
    })
}

/// # Safety
/// `fit` must come from [`ginar_fit`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ginar_fit_free(fit: *mut GinarFitHandle) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Number of estimated parameters (`alpha1..alphap, mu_eps[, r]`).
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ginar_fit_num_params(
    fit: *const GinarFitHandle,
    out: *mut usize,
) -> GinarStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = f.fit.k();
        Ok(())
    })
}

/// Copies the estimates into `out`, which must hold at least
/// [`ginar_fit_num_params`] values.
///
/// # Safety
/// `fit` must be a live handle and `out` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn ginar_fit_params(
    fit: *const GinarFitHandle,
    out: *mut f64,
    len: usize,
) -> GinarStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        let k = f.fit.k();
        if len < k {
            set_error(format!("buffer holds {len} values, need {k}"));
            return Err(GinarStatus::BufferTooSmall);
        }
        slice_mut(out, k, "out")?.copy_from_slice(&f.fit.theta_hat);
        Ok(())
    })
}

/// Objective at the estimate: the log-likelihood for likelihood methods.
/// Fails with `DataError` for Yule-Walker, which has none.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ginar_fit_objective(
    fit: *const GinarFitHandle,
    out: *mut f64,
) -> GinarStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        let Some(v) = f.fit.objective else {
            set_error(format!("{} fits have no objective", f.fit.method));
            return Err(GinarStatus::DataError);
        };
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// The fitted model (projected into the parameter space if needed) as a new handle.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ginar_fit_model(
    fit: *const GinarFitHandle,
    out: *mut *mut GinarModelHandle,
) -> GinarStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let model = f.fit.model().map_err(fail)?;
        *out = Box::into_raw(Box::new(GinarModelHandle { model }));
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_message_round_trip() {
        let mut h = ptr::null_mut();
        let alphas = [0.7, 0.5];
        let s =
            unsafe { ginar_model_new(GinarFamily::PoInar, alphas.as_ptr(), 2, 1.0, 0.0, &mut h) };
        assert_eq!(s, GinarStatus::InvalidArgument);
        assert!(h.is_null());
        let msg = unsafe { CStr::from_ptr(ginar_last_error()) }
            .to_str()
            .unwrap();
        assert!(!msg.is_empty());
    }

    #[test]
    fn null_out_is_rejected() {
        let alphas = [0.5];
        let s = unsafe {
            ginar_model_new(
                GinarFamily::PoInar,
                alphas.as_ptr(),
                1,
                1.0,
                0.0,
                ptr::null_mut(),
            )
        };
        assert_eq!(s, GinarStatus::NullPointer);
    }
}
