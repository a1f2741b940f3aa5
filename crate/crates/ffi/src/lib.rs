//! C ABI over the polyx core: opaque polyhedron handles, status codes and a
//! per-thread last error message.
//!
//! Every function returns a [`PolyxStatus`]. On failure the message is kept
//! until the next call on the same thread and can be read with
//! [`polyx_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use polyx::density::{softmax_row, DistanceKind, DistanceVectors};
use polyx::matrix::RowMatrix;
use polyx::{Halfspace, MinNormSolver, PolyhedronH, PolyxError};

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolyxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    DegenerateHyperplane = 4,
    NonFinite = 5,
    EmptyPolyhedron = 6,
    LinearDependence = 7,
    BudgetExceeded = 8,
    Timeout = 9,
    IllConditioned = 10,
    Format = 11,
    Io = 12,
    Panic = 13,
    Other = 14,
}

impl From<&PolyxError> for PolyxStatus {
    fn from(e: &PolyxError) -> Self {
        match e {
            PolyxError::InvalidInput(_) | PolyxError::Precondition(_) => PolyxStatus::InvalidInput,
            PolyxError::DimensionMismatch { .. } => PolyxStatus::DimensionMismatch,
            PolyxError::DegenerateHyperplane { .. } => PolyxStatus::DegenerateHyperplane,
            PolyxError::NonFinite(_) => PolyxStatus::NonFinite,
            PolyxError::EmptyPolyhedron => PolyxStatus::EmptyPolyhedron,
            PolyxError::LinearDependence { .. } => PolyxStatus::LinearDependence,
            PolyxError::BudgetExceeded { .. } => PolyxStatus::BudgetExceeded,
            PolyxError::Timeout { .. } => PolyxStatus::Timeout,
            PolyxError::IllConditioned(_) | PolyxError::RankDeficient { .. } => PolyxStatus::IllConditioned,
            PolyxError::Format { .. } => PolyxStatus::Format,
            PolyxError::Io { .. } => PolyxStatus::Io,
            _ => PolyxStatus::Other,
        }
    }
}

/// Opaque polyhedron handle.
pub struct PolyxPolyhedron {
    inner: PolyhedronH,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: PolyxStatus, msg: impl Into<String>) -> PolyxStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), PolyxStatus>) -> PolyxStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PolyxStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(PolyxStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, PolyxStatus>;
}

impl<T> OrStatus<T> for polyx::Result<T> {
    fn or_status(self) -> Result<T, PolyxStatus> {
        self.map_err(|e| fail(PolyxStatus::from(&e), e.to_string()))
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], PolyxStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(PolyxStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], PolyxStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(PolyxStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a>(h: *const PolyxPolyhedron) -> Result<&'a PolyhedronH, PolyxStatus> {
    h.as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| fail(PolyxStatus::NullPointer, "polyhedron handle is null"))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, PolyxStatus> {
    p.as_mut()
        .ok_or_else(|| fail(PolyxStatus::NullPointer, format!("{what} is null")))
}

fn boxed(p: PolyhedronH) -> *mut PolyxPolyhedron {
    Box::into_raw(Box::new(PolyxPolyhedron { inner: p }))
}

fn check_dim(p: &PolyhedronH, dim: usize) -> Result<(), PolyxStatus> {
    if p.dim() != dim {
        return Err(fail(
            PolyxStatus::DimensionMismatch,
            format!("point has dimension {dim}, polyhedron has {}", p.dim()),
        ));
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn polyx_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn polyx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a polyhedron from `count` halfspaces `normal . x <= offset`.
/// `normals` holds `count * dim` values, one row per halfspace. Normals are
/// rescaled to unit length.
///
/// # Safety
/// `offsets` and `normals` must point to `count` and `count * dim` readable
/// doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polyx_polyhedron_new(
    dim: usize,
    count: usize,
    offsets: *const f64,
    normals: *const f64,
    out: *mut *mut PolyxPolyhedron,
) -> PolyxStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let total = count
            .checked_mul(dim)
            .ok_or_else(|| fail(PolyxStatus::InvalidInput, "count * dim overflows"))?;
        let b = slice(offsets, count, "offsets")?;
        let a = slice(normals, total, "normals")?;
        let hs = (0..count)
            .map(|i| Halfspace::new(b[i], a[i * dim..(i + 1) * dim].to_vec()))
            .collect::<polyx::Result<Vec<_>>>()
            .or_status()?;
        *out = boxed(PolyhedronH::new(dim, hs).or_status()?);
        Ok(())
    })
}

/// Parses the JSON polyhedron format used by the command line tool.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polyx_polyhedron_from_json(
    json: *const c_char,
    out: *mut *mut PolyxPolyhedron,
) -> PolyxStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        if json.is_null() {
            return Err(fail(PolyxStatus::NullPointer, "json is null"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| fail(PolyxStatus::Format, "json is not valid UTF-8"))?;
        *out = boxed(polyx::io::polyhedron_from_json(text).or_status()?);
        Ok(())
    })
}

/// Releases a handle. Null is accepted.
///
/// # Safety
/// `h` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polyx_polyhedron_free(h: *mut PolyxPolyhedron) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Ambient dimension, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn polyx_polyhedron_dim(h: *const PolyxPolyhedron) -> usize {
    h.as_ref().map_or(0, |h| h.inner.dim())
}

/// Number of halfspaces, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn polyx_polyhedron_len(h: *const PolyxPolyhedron) -> usize {
    h.as_ref().map_or(0, |h| h.inner.len())
}

/// Writes 1 to `inside` when every residual of `x` is at most `tol`, else 0.
///
/// # Safety
/// `x` must point to `dim` doubles; `inside` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polyx_polyhedron_contains(
    h: *const PolyxPolyhedron,
    x: *const f64,
    dim: usize,
    tol: f64,
    inside: *mut i32,
) -> PolyxStatus {
    guard(|| {
        let p = handle(h)?;
        let inside = out_ptr(inside, "inside")?;
        check_dim(p, dim)?;
        let x = slice(x, dim, "x")?;
        *inside = i32::from(p.contains(x, tol).or_status()?);
        Ok(())
    })
}

/// Nearest point of the polyhedron to `x`, written to `point` (`dim`
/// doubles), and the signed distance to its frontier (negative inside).
///
/// # Safety
/// `x` and `point` must each hold `dim` doubles; `signed_distance` must be
/// writable or null.
#[no_mangle]
pub unsafe extern "C" fn polyx_min_norm(
    h: *const PolyxPolyhedron,
    x: *const f64,
    dim: usize,
    point: *mut f64,
    signed_distance: *mut f64,
) -> PolyxStatus {
    guard(|| {
        let p = handle(h)?;
        check_dim(p, dim)?;
        let x = slice(x, dim, "x")?;
        let point = slice_mut(point, dim, "point")?;
        let r = MinNormSolver::default().solve(p, x).or_status()?;
        point.copy_from_slice(&r.point);
        if let Some(d) = signed_distance.as_mut() {
            *d = r.signed_distance;
        }
        Ok(())
    })
}

/// Signed distance from `x` to the frontier of the polyhedron.
///
/// # Safety
/// `x` must point to `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polyx_signed_distance(
    h: *const PolyxPolyhedron,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> PolyxStatus {
    guard(|| {
        let p = handle(h)?;
        let out = out_ptr(out, "out")?;
        check_dim(p, dim)?;
        let x = slice(x, dim, "x")?;
        *out = MinNormSolver::default().signed_distance(p, x).or_status()?;
        Ok(())
    })
}

/// New handle holding only the irredundant halfspaces, in original order.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polyx_min_h_description(
    h: *const PolyxPolyhedron,
    out: *mut *mut PolyxPolyhedron,
) -> PolyxStatus {
    guard(|| {
        let p = handle(h)?;
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        *out = boxed(p.min_h_description().or_status()?);
        Ok(())
    })
}

/// Row-wise softmax of `-alpha * d` for a `rows x cols` row-major matrix of
/// signed distances, written to `out` (same shape).
///
/// # Safety
/// `d` and `out` must each hold `rows * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn polyx_softmax(
    d: *const f64,
    rows: usize,
    cols: usize,
    alpha: f64,
    out: *mut f64,
) -> PolyxStatus {
    guard(|| {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(fail(PolyxStatus::InvalidInput, "alpha must be positive and finite"));
        }
        let total = rows
            .checked_mul(cols)
            .ok_or_else(|| fail(PolyxStatus::InvalidInput, "rows * cols overflows"))?;
        let d = slice(d, total, "d")?;
        let out = slice_mut(out, total, "out")?;
        let m = RowMatrix::new(rows, cols, d.to_vec()).or_status()?;
        let dv = DistanceVectors::new(m, DistanceKind::SignedPolyhedral).or_status()?;
        for (r, o) in out.chunks_mut(cols.max(1)).enumerate().take(rows) {
            softmax_row(dv.values().row(r), alpha, o);
        }
        Ok(())
    })
}
