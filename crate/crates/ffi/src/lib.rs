//! C interface to the biharmonic IETI-DP solver.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free` function. Every entry point returns a
//! [`BihStatus`]. On failure the message is kept per thread and can be read
//! with [`bih_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use biharmonic_ieti::cli::{run_on, RunConfig, RunResult};
use biharmonic_ieti::geometry::{builtin_domain, load_multipatch, save_multipatch, DomainName, MultiPatch};
use biharmonic_ieti::ieti::Preconditioner;
use biharmonic_ieti::linalg::ResidualNorm;
use biharmonic_ieti::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BihStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Geometry = 4,
    Solver = 5,
    /// The solve hit the iteration cap; the result handle is still returned.
    NotConverged = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BihPrecond {
    Scaled = 0,
    Modified = 1,
    None = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BihRunOptions {
    pub degree: u32,
    pub refine: u32,
    pub precond: BihPrecond,
    pub tol: f64,
    pub max_iter: u32,
    /// Nonzero to compare against the conforming direct solve.
    pub oracle: u8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BihSummary {
    pub patches: usize,
    pub dofs: usize,
    pub n_lambda: usize,
    pub n_primal: usize,
    pub iterations: usize,
    pub kappa: f64,
    pub relative_residual: f64,
    pub converged: u8,
    pub constraint_residual: f64,
    /// NaN unless requested.
    pub oracle_discrepancy: f64,
    /// NaN unless the domain carries the manufactured solution.
    pub h2_error: f64,
    pub seconds_total: f64,
}

pub struct BihDomain {
    mp: MultiPatch,
    name: Option<DomainName>,
    splits: usize,
}

pub struct BihResult {
    result: RunResult,
    coeffs: Vec<Vec<f64>>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn status_of(e: &Error) -> BihStatus {
    match e {
        Error::Io(_) => BihStatus::Io,
        Error::Geometry(_) => BihStatus::Geometry,
        Error::InvalidConfig(_) => BihStatus::InvalidArgument,
        Error::NotConverged { .. } => BihStatus::NotConverged,
        _ => BihStatus::Solver,
    }
}

fn guarded(f: impl FnOnce() -> Result<BihStatus, (BihStatus, String)>) -> BihStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => {
            if status == BihStatus::Ok {
                set_error("");
            }
            status
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            BihStatus::Panic
        }
    }
}

fn fail(e: Error) -> (BihStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (BihStatus, String) {
    (BihStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (BihStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (BihStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Defaults: degree 2, refinement 3, scaled Dirichlet, tolerance 1e-6, 500 iterations.
#[no_mangle]
pub extern "C" fn bih_default_run_options() -> BihRunOptions {
    BihRunOptions { degree: 2, refine: 3, precond: BihPrecond::Scaled, tol: 1e-6, max_iter: 500, oracle: 0 }
}

/// Builds a built-in domain (`unit_square`, `quarter_annulus`, `lamella`,
/// `two_squares`); `splits = 0` selects the domain default.
///
/// # Safety
/// `name` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bih_domain_builtin(name: *const c_char, splits: u32, out: *mut *mut BihDomain) -> BihStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = read_str(name, "name")?;
        let kind: DomainName = name.parse().map_err(|e| fail(Error::Geometry(e)))?;
        let splits = if splits == 0 { kind.default_splits() } else { splits as usize };
        let mp = builtin_domain(name, splits).map_err(|e| fail(e.into()))?;
        *out = Box::into_raw(Box::new(BihDomain { mp, name: Some(kind), splits }));
        Ok(BihStatus::Ok)
    })
}

/// Reads a multi-patch geometry from a JSON file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bih_domain_load(path: *const c_char, out: *mut *mut BihDomain) -> BihStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = read_str(path, "path")?;
        let mp = load_multipatch(path).map_err(|e| fail(e.into()))?;
        *out = Box::into_raw(Box::new(BihDomain { mp, name: None, splits: 1 }));
        Ok(BihStatus::Ok)
    })
}

/// # Safety
/// `domain` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bih_domain_save(domain: *const BihDomain, path: *const c_char) -> BihStatus {
    guarded(|| {
        let d = domain.as_ref().ok_or_else(|| null("domain"))?;
        let path = read_str(path, "path")?;
        save_multipatch(&d.mp, path).map_err(|e| fail(e.into()))?;
        Ok(BihStatus::Ok)
    })
}

/// # Safety
/// `domain` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bih_domain_free(domain: *mut BihDomain) {
    if !domain.is_null() {
        drop(Box::from_raw(domain));
    }
}

/// # Safety
/// `domain` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bih_domain_num_patches(domain: *const BihDomain, out: *mut usize) -> BihStatus {
    guarded(|| {
        let d = domain.as_ref().ok_or_else(|| null("domain"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = d.mp.num_patches();
        Ok(BihStatus::Ok)
    })
}

/// Solves on `domain`. A run that does not converge returns
/// `BihStatus::NotConverged` together with a valid result handle.
///
/// # Safety
/// `domain` must come from this library; `opts` may be null for defaults;
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bih_run(
    domain: *const BihDomain,
    opts: *const BihRunOptions,
    out: *mut *mut BihResult,
) -> BihStatus {
    guarded(|| {
        let d = domain.as_ref().ok_or_else(|| null("domain"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let o = opts.as_ref().copied().unwrap_or_else(|| bih_default_run_options());
        let cfg = RunConfig {
            domain: d.name.unwrap_or(DomainName::UnitSquare),
            splits: d.splits,
            degree: o.degree as usize,
            refine: o.refine,
            precond: match o.precond {
                BihPrecond::Scaled => Preconditioner::Scaled,
                BihPrecond::Modified => Preconditioner::Modified,
                BihPrecond::None => Preconditioner::None,
            },
            tol: o.tol,
            max_iter: o.max_iter as usize,
            residual: ResidualNorm::Unpreconditioned,
            oracle: o.oracle != 0,
            geometry: d.name.is_none().then(|| PathBuf::from("<loaded>")),
            ..RunConfig::default()
        };
        let (result, coeffs) = run_on(&cfg, &d.mp).map_err(fail)?;
        let converged = result.converged;
        *out = Box::into_raw(Box::new(BihResult { result, coeffs }));
        if converged {
            Ok(BihStatus::Ok)
        } else {
            Err((BihStatus::NotConverged, "PCG reached the iteration limit".into()))
        }
    })
}

/// # Safety
/// `result` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bih_result_summary(result: *const BihResult, out: *mut BihSummary) -> BihStatus {
    guarded(|| {
        let r = &result.as_ref().ok_or_else(|| null("result"))?.result;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = BihSummary {
            patches: r.patches,
            dofs: r.dofs,
            n_lambda: r.n_lambda,
            n_primal: r.n_primal,
            iterations: r.iterations,
            kappa: r.kappa,
            relative_residual: r.relative_residual,
            converged: r.converged as u8,
            constraint_residual: r.constraint_residual,
            oracle_discrepancy: r.oracle_discrepancy.unwrap_or(f64::NAN),
            h2_error: r.h2_error.unwrap_or(f64::NAN),
            seconds_total: r.timings.assembly + r.timings.factorization + r.timings.solve,
        };
        Ok(BihStatus::Ok)
    })
}

/// Copies the tensor-product coefficients of `patch` (x index fastest) into
/// `buf`. `len_out` receives the coefficient count; pass a null `buf` to
/// query it.
///
/// # Safety
/// `result` must come from this library; `buf` must hold `len` doubles or be
/// null; `len_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bih_result_patch_coeffs(
    result: *const BihResult,
    patch: usize,
    buf: *mut f64,
    len: usize,
    len_out: *mut usize,
) -> BihStatus {
    guarded(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if len_out.is_null() {
            return Err(null("len_out"));
        }
        let c = r
            .coeffs
            .get(patch)
            .ok_or_else(|| (BihStatus::InvalidArgument, format!("patch {patch} out of range")))?;
        *len_out = c.len();
        if buf.is_null() {
            return Ok(BihStatus::Ok);
        }
        if len < c.len() {
            return Err((BihStatus::InvalidArgument, format!("buffer holds {len} values, {} needed", c.len())));
        }
        ptr::copy_nonoverlapping(c.as_ptr(), buf, c.len());
        Ok(BihStatus::Ok)
    })
}

/// # Safety
/// `result` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bih_result_free(result: *mut BihResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn bih_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
