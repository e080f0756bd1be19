//! C ABI over `ufest`.
//!
//! Every entry point returns a [`UfestStatus`]; on failure a message is
//! available from [`ufest_last_error`] on the same thread. Plans are opaque
//! heap handles released with [`ufest_plan_free`]. Matrices are `d × d`,
//! row-major arrays of [`UfestComplex`]. Function specs are JSON strings,
//! e.g. `{"family":"monomial","d":2,"alpha":3}`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ufest::estimator::{
    bias_g_average, conditional_expectation, estimate_pac_with_cap, pac_shots, EstimationPlan,
};
use ufest::fourier::{rep_epsilon, RepQuery};
use ufest::functions::{build_a_truncated, FunctionSpec};
use ufest::haar::{mc_integrate, moment_g, sample_haar, McEstimate, RngStream};
use ufest::linalg::{ComplexMatrix, C64};
use ufest::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UfestStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidSpec = 3,
    InvalidArgument = 4,
    Shape = 5,
    NotUnitary = 6,
    BudgetExceeded = 7,
    Numerical = 8,
    Unsupported = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UfestComplex {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for UfestComplex {
    fn from(z: C64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

/// Summary of a plan.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UfestPlanInfo {
    /// Dimension of the unitary.
    pub d: usize,
    /// Tensor-power truncation; each shot makes `2m` controlled-g queries.
    pub m: usize,
    pub queries_per_shot: usize,
    /// Number of non-zero singular values sampled from.
    pub coordinates: usize,
    /// ‖A‖₁.
    pub trace_norm: f64,
}

/// A Monte-Carlo mean with its standard error.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UfestEstimate {
    pub mean: UfestComplex,
    pub stderr: f64,
    pub samples: usize,
}

impl From<McEstimate> for UfestEstimate {
    fn from(e: McEstimate) -> Self {
        Self {
            mean: e.mean.into(),
            stderr: e.stderr,
            samples: e.samples,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UfestPacResult {
    pub estimate: UfestComplex,
    pub stderr: f64,
    pub shots: u64,
    pub total_queries: u64,
}

/// Estimation plan for one function spec. Opaque to C.
pub struct UfestPlan {
    spec: FunctionSpec,
    plan: EstimationPlan,
}

struct Failure {
    status: UfestStatus,
    message: String,
}

impl Failure {
    fn new(status: UfestStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) | Error::EmptyIsotypic { .. } => UfestStatus::InvalidArgument,
            Error::Shape(_) | Error::NotNormalized { .. } => UfestStatus::Shape,
            Error::NotUnitary { .. } => UfestStatus::NotUnitary,
            Error::ShotBudget { .. } | Error::DimensionCap { .. } => UfestStatus::BudgetExceeded,
            Error::Unsupported(_) => UfestStatus::Unsupported,
            _ => UfestStatus::Numerical,
        };
        Self::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> UfestStatus {
    let failure = match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            return UfestStatus::Ok;
        }
        Ok(Err(f)) => f,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            Failure::new(UfestStatus::Panic, format!("internal panic: {msg}"))
        }
    };
    set_last_error(&failure.message);
    failure.status
}

fn out_ref<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller guarantees a non-null `ptr` is valid for writes.
    unsafe { ptr.as_mut() }.ok_or_else(|| Failure::new(UfestStatus::NullPointer, format!("{name} is null")))
}

fn plan_ref<'a>(ptr: *const UfestPlan) -> Result<&'a UfestPlan, Failure> {
    // SAFETY: a non-null handle came from `ufest_plan_new*` and is not freed.
    unsafe { ptr.as_ref() }.ok_or_else(|| Failure::new(UfestStatus::NullPointer, "plan is null"))
}

fn read_spec(json: *const c_char) -> Result<FunctionSpec, Failure> {
    if json.is_null() {
        return Err(Failure::new(UfestStatus::NullPointer, "spec is null"));
    }
    // SAFETY: non-null and NUL-terminated per the API contract.
    let text = unsafe { CStr::from_ptr(json) }
        .to_str()
        .map_err(|e| Failure::new(UfestStatus::InvalidUtf8, e.to_string()))?;
    let spec: FunctionSpec =
        serde_json::from_str(text).map_err(|e| Failure::new(UfestStatus::InvalidSpec, e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

fn read_matrix(g: *const UfestComplex, d: usize) -> Result<ComplexMatrix, Failure> {
    if g.is_null() {
        return Err(Failure::new(UfestStatus::NullPointer, "matrix is null"));
    }
    let len = d
        .checked_mul(d)
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::new(UfestStatus::InvalidArgument, format!("bad dimension {d}")))?;
    // SAFETY: the caller provides `d * d` readable entries.
    let raw = unsafe { std::slice::from_raw_parts(g, len) };
    let entries: Vec<C64> = raw.iter().map(|z| C64::new(z.re, z.im)).collect();
    Ok(ComplexMatrix::from_row_major(d, d, &entries)?)
}

fn new_plan(spec_json: *const c_char, max_degree: usize, out: *mut *mut UfestPlan) -> UfestStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let spec = read_spec(spec_json)?;
        let plan = EstimationPlan::from_form(&build_a_truncated(&spec, max_degree)?)?;
        *out = Box::into_raw(Box::new(UfestPlan { spec, plan }));
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ufest_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread (empty after a success).
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ufest_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Builds the estimation plan of a function spec. `*out` receives a handle
/// to release with `ufest_plan_free`, or NULL on failure.
///
/// # Safety
/// `spec_json` must be NULL or a NUL-terminated string; `out` must be NULL
/// or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ufest_plan_new(spec_json: *const c_char, out: *mut *mut UfestPlan) -> UfestStatus {
    new_plan(spec_json, usize::MAX, out)
}

/// As `ufest_plan_new`, keeping only the components of total degree at
/// most `max_degree` (the zero plan if none survive).
///
/// # Safety
/// As `ufest_plan_new`.
#[no_mangle]
pub unsafe extern "C" fn ufest_plan_new_truncated(
    spec_json: *const c_char,
    max_degree: usize,
    out: *mut *mut UfestPlan,
) -> UfestStatus {
    new_plan(spec_json, max_degree, out)
}

/// Releases a plan. NULL is ignored.
///
/// # Safety
/// `plan` must be NULL or a live handle from `ufest_plan_new*`.
#[no_mangle]
pub unsafe extern "C" fn ufest_plan_free(plan: *mut UfestPlan) {
    if !plan.is_null() {
        // SAFETY: the handle was produced by Box::into_raw and is freed once.
        drop(unsafe { Box::from_raw(plan) });
    }
}

/// # Safety
/// `plan` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ufest_plan_info(plan: *const UfestPlan, out: *mut UfestPlanInfo) -> UfestStatus {
    guard(|| {
        let p = plan_ref(plan)?;
        *out_ref(out, "out")? = UfestPlanInfo {
            d: p.spec.d(),
            m: p.plan.m,
            queries_per_shot: p.plan.queries_per_shot,
            coordinates: p.plan.coordinates.len(),
            trace_norm: p.plan.trace_norm,
        };
        Ok(())
    })
}

/// Exact `f(g)` of the plan's function.
///
/// # Safety
/// `plan` must be a live handle, `g` must hold `d * d` entries, `out` valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn ufest_plan_eval(
    plan: *const UfestPlan,
    g: *const UfestComplex,
    d: usize,
    out: *mut UfestComplex,
) -> UfestStatus {
    guard(|| {
        let p = plan_ref(plan)?;
        let g = read_matrix(g, d)?;
        *out_ref(out, "out")? = p.spec.eval(&g)?.into();
        Ok(())
    })
}

/// Exact expectation of one shot given `g`, from the simulated circuit
/// probabilities.
///
/// # Safety
/// As `ufest_plan_eval`.
#[no_mangle]
pub unsafe extern "C" fn ufest_plan_conditional_expectation(
    plan: *const UfestPlan,
    g: *const UfestComplex,
    d: usize,
    out: *mut UfestComplex,
) -> UfestStatus {
    guard(|| {
        let p = plan_ref(plan)?;
        let g = read_matrix(g, d)?;
        *out_ref(out, "out")? = conditional_expectation(&p.plan, &g)?.into();
        Ok(())
    })
}

/// PAC estimate of `f(g)` to within `epsilon` with probability `1 - delta`.
/// `shot_cap = 0` means the library default.
///
/// # Safety
/// As `ufest_plan_eval`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ufest_plan_estimate(
    plan: *const UfestPlan,
    g: *const UfestComplex,
    d: usize,
    epsilon: f64,
    delta: f64,
    seed: u64,
    shot_cap: u64,
    out: *mut UfestPacResult,
) -> UfestStatus {
    guard(|| {
        let p = plan_ref(plan)?;
        let g = read_matrix(g, d)?;
        let cap = if shot_cap == 0 { ufest::estimator::DEFAULT_SHOT_CAP } else { shot_cap };
        let r = estimate_pac_with_cap(&p.plan, &g, epsilon, delta, &RngStream::new(seed, 1), cap)?;
        *out_ref(out, "out")? = UfestPacResult {
            estimate: r.estimate.into(),
            stderr: r.stderr,
            shots: r.shots,
            total_queries: r.total_queries,
        };
        Ok(())
    })
}

/// Haar average of `|E[shot | g] - f(g)|²` over `n` samples.
///
/// # Safety
/// `plan` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ufest_plan_bias(
    plan: *const UfestPlan,
    n: usize,
    seed: u64,
    out: *mut UfestEstimate,
) -> UfestStatus {
    guard(|| {
        let p = plan_ref(plan)?;
        *out_ref(out, "out")? = bias_g_average(&p.plan, &p.spec, n, &RngStream::new(seed, 0))?.into();
        Ok(())
    })
}

/// `Rep_ε(f)` from the closed forms.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ufest_rep_epsilon(spec_json: *const c_char, epsilon: f64, out: *mut usize) -> UfestStatus {
    guard(|| {
        let spec = read_spec(spec_json)?;
        *out_ref(out, "out")? = rep_epsilon(&RepQuery::new(spec, epsilon)?)?;
        Ok(())
    })
}

/// Hoeffding shot count for a plan with trace norm `trace_norm`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ufest_pac_shots(epsilon: f64, delta: f64, trace_norm: f64, out: *mut u64) -> UfestStatus {
    guard(|| {
        *out_ref(out, "out")? = pac_shots(epsilon, delta, trace_norm)?;
        Ok(())
    })
}

/// Writes a Haar-random element of U(d), row-major, to `out` (`d * d`
/// entries).
///
/// # Safety
/// `out` must be valid for `d * d` writes.
#[no_mangle]
pub unsafe extern "C" fn ufest_sample_haar(d: usize, seed: u64, stream: u64, out: *mut UfestComplex) -> UfestStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::new(UfestStatus::NullPointer, "out is null"));
        }
        let g = sample_haar(d, &mut RngStream::new(seed, stream))?;
        // SAFETY: caller provides d*d writable entries.
        let dst = unsafe { std::slice::from_raw_parts_mut(out, d * d) };
        for (k, slot) in dst.iter_mut().enumerate() {
            *slot = g[(k / d, k % d)].into();
        }
        Ok(())
    })
}

/// Exact `∫ |g₁₁|^{2α} dg` over U(d).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ufest_haar_moment(alpha: u32, d: usize, out: *mut f64) -> UfestStatus {
    guard(|| {
        if d == 0 {
            return Err(Failure::new(UfestStatus::InvalidArgument, "d must be positive"));
        }
        *out_ref(out, "out")? = moment_g(alpha, d);
        Ok(())
    })
}

/// Monte-Carlo `∫ |g₁₁|^{2α} dg` from `n` Haar samples.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ufest_mc_moment(
    alpha: u32,
    d: usize,
    n: usize,
    seed: u64,
    out: *mut UfestEstimate,
) -> UfestStatus {
    guard(|| {
        let est = mc_integrate(
            |g| Ok(C64::new(g[(0, 0)].norm_sqr().powi(alpha as i32), 0.0)),
            d,
            n,
            &RngStream::new(seed, 0),
        )?;
        *out_ref(out, "out")? = est.into();
        Ok(())
    })
}
