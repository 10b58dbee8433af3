//! C ABI over `equiv-core`.
//!
//! Every function returns an integer status (`EQUIV_OK` on success). Reports are opaque
//! handles released with [`equiv_report_free`]; strings handed out are released with
//! [`equiv_string_free`]. The message of the most recent error on the calling thread is
//! available from [`equiv_last_error`].

use equiv_core::closed_forms::dual_weight_sum;
use equiv_core::covariance::{build_ck, CovariancePair};
use equiv_core::error::EquivError;
use equiv_core::job::{run_job, JobSpec};
use equiv_core::perm::Permutation;
use equiv_core::report::VerdictReport;
use equiv_core::scalar::C64;
use equiv_core::tensor::Matrix;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

pub const EQUIV_OK: i32 = 0;
/// A job ran to completion and at least one comparison failed.
pub const EQUIV_COMPARISON_FAILED: i32 = 1;
pub const EQUIV_ERR_INPUT: i32 = 2;
pub const EQUIV_ERR_RESOURCE: i32 = 3;
pub const EQUIV_ERR_DOMAIN: i32 = 4;
pub const EQUIV_ERR_NUMERIC: i32 = 5;
pub const EQUIV_ERR_IO: i32 = 6;
pub const EQUIV_ERR_NULL: i32 = 7;
pub const EQUIV_ERR_UTF8: i32 = 8;
pub const EQUIV_ERR_PANIC: i32 = 9;

/// Opaque verdict report.
pub struct EquivReport {
    inner: VerdictReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn code_of(e: &EquivError) -> i32 {
    match e {
        EquivError::Input(_) => EQUIV_ERR_INPUT,
        EquivError::Resource(_) => EQUIV_ERR_RESOURCE,
        EquivError::Domain(_) => EQUIV_ERR_DOMAIN,
        EquivError::Numeric(_) => EQUIV_ERR_NUMERIC,
        EquivError::Io(_) => EQUIV_ERR_IO,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guarded(f: impl FnOnce() -> Result<i32, (i32, String)>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(code)) => code,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            EQUIV_ERR_PANIC
        }
    }
}

fn core_err(e: EquivError) -> (i32, String) {
    (code_of(&e), e.to_string())
}

/// Message of the last failed call on this thread, or null. Owned by the library; valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn equiv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parse and run a JSON job. On success `*out` receives a report handle and the return
/// value is `EQUIV_OK` or `EQUIV_COMPARISON_FAILED`.
///
/// # Safety
/// `job_json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn equiv_run_job_json(job_json: *const c_char, out: *mut *mut EquivReport) -> i32 {
    guarded(|| {
        if job_json.is_null() || out.is_null() {
            return Err((EQUIV_ERR_NULL, "null argument".into()));
        }
        *out = ptr::null_mut();
        let text = CStr::from_ptr(job_json).to_str().map_err(|e| (EQUIV_ERR_UTF8, e.to_string()))?;
        let job = JobSpec::parse(text).map_err(core_err)?;
        let report = run_job(&job).map_err(core_err)?;
        let code = if report.pass { EQUIV_OK } else { EQUIV_COMPARISON_FAILED };
        *out = Box::into_raw(Box::new(EquivReport { inner: report }));
        Ok(code)
    })
}

/// 1 if every case passed, 0 otherwise, `-EQUIV_ERR_NULL` for a null handle.
///
/// # Safety
/// `report` must be null or a handle from [`equiv_run_job_json`].
#[no_mangle]
pub unsafe extern "C" fn equiv_report_passed(report: *const EquivReport) -> i32 {
    match report.as_ref() {
        Some(r) => i32::from(r.inner.pass),
        None => -EQUIV_ERR_NULL,
    }
}

/// Canonical JSON of the report; release with [`equiv_string_free`].
///
/// # Safety
/// `report` must be a handle from [`equiv_run_job_json`] and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn equiv_report_json(report: *const EquivReport, out: *mut *mut c_char) -> i32 {
    guarded(|| {
        let (Some(r), false) = (report.as_ref(), out.is_null()) else {
            return Err((EQUIV_ERR_NULL, "null argument".into()));
        };
        let text = CString::new(r.inner.to_canonical_json()).map_err(|e| (EQUIV_ERR_UTF8, e.to_string()))?;
        *out = text.into_raw();
        Ok(EQUIV_OK)
    })
}

/// # Safety
/// `report` must be null or a handle from [`equiv_run_job_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn equiv_report_free(report: *mut EquivReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn equiv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn read_matrix(data: *const f64, dim: usize) -> Matrix<C64> {
    let slice = std::slice::from_raw_parts(data, 2 * dim * dim);
    Matrix::from_fn(dim, |i, j| {
        let k = 2 * (i * dim + j);
        C64::new(slice[k], slice[k + 1])
    })
}

/// `⟨Tr_[σ](M†M)⟩` for the complex matrix model with covariance `(P, Q)`.
///
/// `sigma` holds the images `σ(0..n)`. `p` and `q` are row-major `dim × dim` complex
/// matrices stored as interleaved `(re, im)` pairs.
///
/// # Safety
/// `sigma` must point to `n` entries, `p` and `q` to `2·dim²` doubles each, and the
/// output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn equiv_dual_weight_sum(
    sigma: *const usize,
    n: usize,
    p: *const f64,
    q: *const f64,
    dim: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> i32 {
    guarded(|| {
        if (sigma.is_null() && n > 0) || p.is_null() || q.is_null() || out_re.is_null() || out_im.is_null() {
            return Err((EQUIV_ERR_NULL, "null argument".into()));
        }
        if dim == 0 {
            return Err((EQUIV_ERR_INPUT, "dim must be positive".into()));
        }
        let images = if n == 0 { Vec::new() } else { std::slice::from_raw_parts(sigma, n).to_vec() };
        let sigma = Permutation::from_images(images).map_err(core_err)?;
        let pair = CovariancePair::new(read_matrix(p, dim), read_matrix(q, dim)).map_err(core_err)?;
        let value = dual_weight_sum(&sigma, &pair).map_err(core_err)?;
        *out_re = value.re;
        *out_im = value.im;
        Ok(EQUIV_OK)
    })
}

/// Build the `n × n` rigidity matrix `C_k` (power sums `Tr(C^p) = n δ_{p,k}`) into `out`,
/// row-major with interleaved `(re, im)` pairs.
///
/// # Safety
/// `out` must point to `2·n²` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn equiv_build_ck(k: usize, n: usize, out: *mut f64) -> i32 {
    guarded(|| {
        if out.is_null() {
            return Err((EQUIV_ERR_NULL, "null argument".into()));
        }
        let c = build_ck::<C64>(k, n).map_err(core_err)?;
        let dst = std::slice::from_raw_parts_mut(out, 2 * n * n);
        for (i, z) in c.matrix.data().iter().enumerate() {
            dst[2 * i] = z.re;
            dst[2 * i + 1] = z.im;
        }
        Ok(EQUIV_OK)
    })
}
