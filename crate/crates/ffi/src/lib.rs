//! C ABI over `nalab`.
//!
//! Every fallible call returns a [`NalabStatus`]; on failure the message is
//! available from [`nalab_last_error`] on the same thread. Handles are opaque
//! and owned by the caller, who releases them with the matching `_free`.
//! Strings returned through out-pointers are released with [`nalab_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use num_complex::Complex64;

use nalab::cli::{self, ExperimentConfig, ExperimentId};
use nalab::geometry::{AnnularGrid, Normalization, SpaceParams};
use nalab::radialops::{RadialFunction, RadialModel};
use nalab::specfun::{self, JacobiParams};
use nalab::treelab::TreeSpace;
use nalab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NalabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Domain = 3,
    Range = 4,
    Pole = 5,
    Precision = 6,
    Unsupported = 7,
    Config = 8,
    Io = 9,
    Json = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NalabNormalization {
    Off = 0,
    Scalar = 1,
    ExactMass = 2,
}

impl From<NalabNormalization> for Normalization {
    fn from(n: NalabNormalization) -> Self {
        match n {
            NalabNormalization::Off => Normalization::Off,
            NalabNormalization::Scalar => Normalization::Scalar,
            NalabNormalization::ExactMass => Normalization::ExactMass,
        }
    }
}

/// Radial model on the canonical space.
pub struct NalabModel {
    model: RadialModel,
}

/// Truncated homogeneous tree.
pub struct NalabTree {
    tree: TreeSpace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(NalabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Domain(_) => NalabStatus::Domain,
            Error::Range(_) => NalabStatus::Range,
            Error::Pole(_) => NalabStatus::Pole,
            Error::Precision(_) => NalabStatus::Precision,
            Error::Unsupported(_) => NalabStatus::Unsupported,
            Error::Config(_) => NalabStatus::Config,
            Error::Io(_) => NalabStatus::Io,
            Error::Json(_) => NalabStatus::Json,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(NalabStatus::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> NalabStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => NalabStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            NalabStatus::Panic
        }
    }
}

unsafe fn slice<'a>(data: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null("input array"));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure(NalabStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn write_values(values: &[f64], out: *mut f64, capacity: usize, out_len: *mut usize) -> Result<(), Failure> {
    if out_len.is_null() {
        return Err(null("out_len"));
    }
    *out_len = values.len();
    if capacity < values.len() {
        return Err(Failure(
            NalabStatus::BufferTooSmall,
            format!("need {} values, buffer holds {capacity}", values.len()),
        ));
    }
    if !values.is_empty() {
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    }
    Ok(())
}

unsafe fn write_string(s: String, out: *mut *mut c_char) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|e| Failure(NalabStatus::Json, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn nalab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn nalab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nalab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a radial model on the canonical space with annuli `1..=j_max` and
/// scales `1..=n_max`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn nalab_model_new(
    j_max: usize,
    n_max: usize,
    normalization: NalabNormalization,
    out: *mut *mut NalabModel,
) -> NalabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = Arc::new(AnnularGrid::new(SpaceParams::canonical(), j_max)?);
        let model = RadialModel::new(grid, n_max, normalization.into())?;
        *out = Box::into_raw(Box::new(NalabModel { model }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`nalab_model_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nalab_model_free(model: *mut NalabModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of annuli, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nalab_model_j_max(model: *const NalabModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.j_max())
}

/// Writes `A_N f` over its valid window. `*out_len` receives the window
/// length even when the buffer is too small.
///
/// # Safety
/// `model` must be a live handle, `f` must hold `len` values and `out` must
/// have room for `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn nalab_model_average(
    model: *const NalabModel,
    f: *const f64,
    len: usize,
    n: usize,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> NalabStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let f = RadialFunction::new(slice(f, len)?.to_vec())?;
        let a = m.model.avg(&f, n)?;
        write_values(&a.values, out, capacity, out_len)
    })
}

/// Writes `M^dis f` over its valid window.
///
/// # Safety
/// As for [`nalab_model_average`].
#[no_mangle]
pub unsafe extern "C" fn nalab_model_maximal(
    model: *const NalabModel,
    f: *const f64,
    len: usize,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> NalabStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let f = RadialFunction::new(slice(f, len)?.to_vec())?;
        let mf = m.model.maximal_dis(&f)?;
        write_values(&mf.values, out, capacity, out_len)
    })
}

/// Builds the tree `T_k` truncated at `depth`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn nalab_tree_new(k: usize, depth: usize, out: *mut *mut NalabTree) -> NalabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(NalabTree {
            tree: TreeSpace::new(k, depth)?,
        }));
        Ok(())
    })
}

/// # Safety
/// `tree` must come from [`nalab_tree_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nalab_tree_free(tree: *mut NalabTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Vertex count, or 0 for a null handle. Vertices are numbered breadth first
/// from the root.
///
/// # Safety
/// `tree` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nalab_tree_vertex_count(tree: *const NalabTree) -> usize {
    tree.as_ref().map_or(0, |t| t.tree.vertex_count())
}

/// Exact centered maximal function of `f`, one value per vertex.
///
/// # Safety
/// `tree` must be a live handle, `f` must hold `len` values and `out` must
/// have room for `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn nalab_tree_maximal(
    tree: *const NalabTree,
    f: *const f64,
    len: usize,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> NalabStatus {
    guard(|| {
        let t = tree.as_ref().ok_or_else(|| null("tree"))?;
        let mf = t.tree.maximal(slice(f, len)?)?;
        write_values(&mf.values, out, capacity, out_len)
    })
}

/// `φ_λ^{(σ,τ)}(t)` for complex `λ`.
///
/// # Safety
/// `out_re` and `out_im` must be valid writable pointers.
#[no_mangle]
pub unsafe extern "C" fn nalab_jacobi_phi(
    sigma: f64,
    tau: f64,
    lambda_re: f64,
    lambda_im: f64,
    t: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> NalabStatus {
    guard(|| {
        if out_re.is_null() || out_im.is_null() {
            return Err(null("output"));
        }
        let jp = JacobiParams::new(sigma, tau, Complex64::new(lambda_re, lambda_im))?;
        let v = specfun::jacobi_phi(&jp, t)?;
        *out_re = v.re;
        *out_im = v.im;
        Ok(())
    })
}

/// Runs an experiment config given as JSON (a single check or a sweep over
/// its axes) and returns the outcome as JSON in `*out`.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn nalab_run_config(config: *const c_char, out: *mut *mut c_char) -> NalabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = ExperimentConfig::from_json(str_arg(config, "config")?)?;
        write_string(cli::sweep(&cfg)?.to_json()?, out)
    })
}

/// Runs a named experiment and returns its outcome as JSON in `*out`.
///
/// # Safety
/// `id` must be a NUL-terminated string and `out` a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn nalab_reproduce(id: *const c_char, seed: u64, out: *mut *mut c_char) -> NalabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let id: ExperimentId = str_arg(id, "id")?.parse()?;
        write_string(cli::reproduce(id, seed)?.to_json()?, out)
    })
}
