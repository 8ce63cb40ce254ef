//! C ABI for the multisecretary library.
//!
//! Models and traces are opaque heap handles released with their `_free`
//! function. Every fallible call returns an [`MsStatus`]; on failure the
//! message is available from [`ms_last_error_message`] on the same thread
//! until the next failing call. Results are written through out-pointers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use multisecretary::coupling::couple_exact;
use multisecretary::distributions::QuantileModel;
use multisecretary::dp_oracle::{exact_offline_expectation, optimal_online_value};
use multisecretary::harness::fit_exponent;
use multisecretary::policies::{offline_value, run_policy, PolicyKind, PolicyTrace, SamplePath};
use multisecretary::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Config = 4,
    UnsupportedModel = 5,
    Size = 6,
    Fit = 7,
    Parse = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsPolicy {
    Ce = 0,
    Cwg = 1,
    Static = 2,
    Offline = 3,
}

impl From<MsPolicy> for PolicyKind {
    fn from(p: MsPolicy) -> Self {
        match p {
            MsPolicy::Ce => PolicyKind::Ce,
            MsPolicy::Cwg => PolicyKind::Cwg,
            MsPolicy::Static => PolicyKind::Static,
            MsPolicy::Offline => PolicyKind::Offline,
        }
    }
}

/// A type distribution with its gap structure.
pub struct MsModel(QuantileModel);

/// The record of one policy run on one path.
pub struct MsTrace {
    trace: PolicyTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> MsStatus {
    match err {
        Error::Domain(_) => MsStatus::Domain,
        Error::Config(_) => MsStatus::Config,
        Error::UnsupportedModel(_) => MsStatus::UnsupportedModel,
        Error::Size(_) => MsStatus::Size,
        Error::Fit(_) => MsStatus::Fit,
        Error::Parse(_) => MsStatus::Parse,
        Error::Io { .. } => MsStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Invalid(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MsStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is null"));
            MsStatus::NullPointer
        }
        Ok(Err(Fail::Invalid(msg))) => {
            set_error(msg);
            MsStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            MsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn write<T>(p: *mut T, what: &'static str, value: T) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    p.write(value);
    Ok(())
}

unsafe fn doubles<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn policy_of(code: i32) -> Result<MsPolicy, Fail> {
    Ok(match code {
        0 => MsPolicy::Ce,
        1 => MsPolicy::Cwg,
        2 => MsPolicy::Static,
        3 => MsPolicy::Offline,
        _ => return Err(Fail::Invalid(format!("unknown policy code {code}"))),
    })
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ms_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a distribution preset such as `fbeta:beta=1` or
/// `discrete:support=0.25,0.5,0.75;mass=0.4,0.2,0.4`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_model_parse(spec: *const c_char, out: *mut *mut MsModel) -> MsStatus {
    guard(|| {
        if spec.is_null() {
            return Err(Fail::Null("spec"));
        }
        let text = CStr::from_ptr(spec)
            .to_str()
            .map_err(|_| Fail::Invalid("spec is not UTF-8".into()))?;
        let model: QuantileModel = text.parse()?;
        write(out, "out", Box::into_raw(Box::new(MsModel(model))))
    })
}

/// # Safety
/// `model` must come from [`ms_model_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ms_model_free(model: *mut MsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_model_cdf(model: *const MsModel, x: f64, out: *mut f64) -> MsStatus {
    guard(|| write(out, "out", deref(model, "model")?.0.cdf(x)?))
}

/// Generalized inverse `inf{x : F(x) >= q}`.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_model_quantile(model: *const MsModel, q: f64, out: *mut f64) -> MsStatus {
    guard(|| write(out, "out", deref(model, "model")?.0.quantile(q)?))
}

/// Number of interior gap quantiles of the model.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_model_gap_count(model: *const MsModel, out: *mut usize) -> MsStatus {
    guard(|| write(out, "out", deref(model, "model")?.0.gaps().n_gaps()))
}

/// Runs `policy` (an [`MsPolicy`] code) on the path given by `len`
/// uniforms in `(0, 1)`.
///
/// # Safety
/// `uniforms` must point to `len` doubles; `model` must be live; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_policy_run(
    model: *const MsModel,
    policy: i32,
    uniforms: *const f64,
    len: usize,
    budget: usize,
    out: *mut *mut MsTrace,
) -> MsStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let kind = PolicyKind::from(policy_of(policy)?);
        let path = SamplePath::from_uniforms(model, doubles(uniforms, len, "uniforms")?.to_vec())?;
        let trace = run_policy(kind, model, &path, budget)?;
        write(out, "out", Box::into_raw(Box::new(MsTrace { trace })))
    })
}

/// # Safety
/// `trace` must come from [`ms_policy_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ms_trace_free(trace: *mut MsTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Horizon of the trace, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_trace_horizon(trace: *const MsTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.horizon())
}

/// Total value of the hired candidates.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_trace_value(trace: *const MsTrace, out: *mut f64) -> MsStatus {
    guard(|| write(out, "out", deref(trace, "trace")?.trace.accumulated_value))
}

/// Copies hire decisions (1 = hire) into `buf`, which must hold exactly
/// the horizon.
///
/// # Safety
/// `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ms_trace_decisions(trace: *const MsTrace, buf: *mut u8, len: usize) -> MsStatus {
    guard(|| {
        let t = &deref(trace, "trace")?.trace;
        if len != t.horizon() {
            return Err(Fail::Invalid(format!("buffer holds {len}, horizon is {}", t.horizon())));
        }
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        let dst = slice::from_raw_parts_mut(buf, len);
        for (d, &hire) in dst.iter_mut().zip(&t.decisions) {
            *d = u8::from(hire);
        }
        Ok(())
    })
}

/// Copies the applied threshold quantiles into `buf` (length = horizon).
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_trace_thresholds(trace: *const MsTrace, buf: *mut f64, len: usize) -> MsStatus {
    guard(|| {
        let t = &deref(trace, "trace")?.trace;
        if len != t.horizon() {
            return Err(Fail::Invalid(format!("buffer holds {len}, horizon is {}", t.horizon())));
        }
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        slice::from_raw_parts_mut(buf, len).copy_from_slice(&t.threshold_used);
        Ok(())
    })
}

/// Hindsight value of the path and its `(q_l, q_u)` quantiles. Any of the
/// three out-pointers may be null.
///
/// # Safety
/// `uniforms` must point to `len` doubles; `model` must be live.
#[no_mangle]
pub unsafe extern "C" fn ms_offline_value(
    model: *const MsModel,
    uniforms: *const f64,
    len: usize,
    budget: usize,
    value: *mut f64,
    q_l: *mut f64,
    q_u: *mut f64,
) -> MsStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let path = SamplePath::from_uniforms(model, doubles(uniforms, len, "uniforms")?.to_vec())?;
        let (v, l, u) = offline_value(&path, budget)?;
        for (p, x) in [(value, v), (q_l, l), (q_u, u)] {
            if !p.is_null() {
                p.write(x);
            }
        }
        Ok(())
    })
}

/// `offline - (online + compensations)` for `policy` on the given path.
///
/// # Safety
/// `uniforms` must point to `len` doubles; `model` must be live; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_decomposition_residual(
    model: *const MsModel,
    policy: i32,
    uniforms: *const f64,
    len: usize,
    budget: usize,
    out: *mut f64,
) -> MsStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let kind = PolicyKind::from(policy_of(policy)?);
        let path = SamplePath::from_uniforms(model, doubles(uniforms, len, "uniforms")?.to_vec())?;
        let trace = run_policy(kind, model, &path, budget)?;
        write(out, "out", couple_exact(model, &path, &trace)?.residual)
    })
}

/// Optimal online value for a discrete model by backward induction.
///
/// # Safety
/// `model` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_optimal_online_value(
    model: *const MsModel,
    budget: usize,
    horizon: usize,
    out: *mut f64,
) -> MsStatus {
    guard(|| write(out, "out", optimal_online_value(&deref(model, "model")?.0, budget, horizon)?))
}

/// Expected hindsight value for a discrete model.
///
/// # Safety
/// `model` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_exact_offline_expectation(
    model: *const MsModel,
    budget: usize,
    horizon: usize,
    out: *mut f64,
) -> MsStatus {
    guard(|| {
        write(out, "out", exact_offline_expectation(&deref(model, "model")?.0, budget, horizon)?)
    })
}

/// Least-squares fit of `ln(mean)` on `ln(T)`.
///
/// # Safety
/// `horizons` and `means` must point to `n` doubles; out-pointers must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ms_fit_exponent(
    horizons: *const f64,
    means: *const f64,
    n: usize,
    slope: *mut f64,
    intercept: *mut f64,
    r_squared: *mut f64,
) -> MsStatus {
    guard(|| {
        let t = doubles(horizons, n, "horizons")?;
        let m = doubles(means, n, "means")?;
        let pts: Vec<(f64, f64)> = t.iter().copied().zip(m.iter().copied()).collect();
        let fit = fit_exponent(&pts)?;
        write(slope, "slope", fit.slope)?;
        write(intercept, "intercept", fit.intercept)?;
        write(r_squared, "r_squared", fit.r_squared)
    })
}
