//! C ABI over the gpmat library.
//!
//! Conventions:
//!
//! * handles (`GpmatReturns`, `GpmatEstimate`) are opaque pointers created
//!   and released by this library; never dereference or free them yourself;
//! * every fallible call returns a [`GpmatStatus`]; on failure a
//!   thread-local message is readable via [`gpmat_last_error`] until the
//!   next failing call on the same thread;
//! * matrices cross the boundary as row-major `f64` buffers sized by the
//!   caller (query dimensions first);
//! * strings returned by the library (`gpmat_estimate_to_json`) must be
//!   released with [`gpmat_string_free`].
//!
//! The matching header is generated into `include/gpmat.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use ndarray::{Array1, Array2};

use gpmat::data::{load_ff_industry, load_returns_csv, simulate_t, ReturnsMatrix};
use gpmat::gpm::{
    estimate_gpm_abs_with, estimate_gpm_region_with, estimate_gpm_taylor_with, estimate_gpm_with,
    gpm_gaussian, GpmEstimate,
};
use gpmat::ldf::{TStudentDensity, TStudentParams};
use gpmat::numerics::{sample_moments, SpdMatrix};
use gpmat::portfolio::mv_weights;
use gpmat::Error;

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpmatStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    NotPositiveDefinite = 4,
    InsufficientData = 5,
    DimensionMismatch = 6,
    ParseError = 7,
    IoError = 8,
    DegenerateDenominator = 9,
    BufferTooSmall = 10,
    Internal = 11,
}

/// Estimator selector for [`gpmat_estimate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpmatEstimatorKind {
    InverseCovariance = 0,
    Signed = 1,
    Abs = 2,
    Region = 3,
    Taylor = 4,
}

/// Opaque return-panel handle.
pub struct GpmatReturns {
    inner: ReturnsMatrix,
}

/// Opaque estimate handle.
pub struct GpmatEstimate {
    inner: GpmEstimate,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', "?")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> GpmatStatus {
    match err {
        Error::NotPositiveDefinite { .. } => GpmatStatus::NotPositiveDefinite,
        Error::DimensionMismatch { .. } => GpmatStatus::DimensionMismatch,
        Error::InsufficientData { .. } => GpmatStatus::InsufficientData,
        Error::InvalidArgument(_) => GpmatStatus::InvalidArgument,
        Error::Parse { .. }
        | Error::UnsortedDates { .. }
        | Error::UnrecognizedLayout { .. }
        | Error::NonPositivePrice { .. } => GpmatStatus::ParseError,
        Error::Io { .. } => GpmatStatus::IoError,
        Error::DegenerateDenominator => GpmatStatus::DegenerateDenominator,
        _ => GpmatStatus::Internal,
    }
}

fn fail(err: Error) -> GpmatStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn fail_msg(status: GpmatStatus, msg: &str) -> GpmatStatus {
    set_error(msg.to_string());
    status
}

unsafe fn path_from_c(ptr: *const c_char) -> Result<&'static Path, GpmatStatus> {
    if ptr.is_null() {
        return Err(fail_msg(GpmatStatus::NullPointer, "path pointer is null"));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => Err(fail_msg(
            GpmatStatus::InvalidUtf8,
            "path is not valid UTF-8",
        )),
    }
}

/// Library version as a static, NUL-terminated string.
#[no_mangle]
pub extern "C" fn gpmat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failure on this thread; valid until the next failing
/// call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn gpmat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Load the generic `date,<asset>,...` returns CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gpmat_returns_load_csv(
    path: *const c_char,
    out: *mut *mut GpmatReturns,
) -> GpmatStatus {
    if out.is_null() {
        return fail_msg(GpmatStatus::NullPointer, "out pointer is null");
    }
    let path = match path_from_c(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match load_returns_csv(path) {
        Ok(panel) => {
            *out = Box::into_raw(Box::new(GpmatReturns { inner: panel }));
            GpmatStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Load a Kenneth French daily industry file (percent returns, sentinels
/// dropped).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gpmat_returns_load_ff(
    path: *const c_char,
    out: *mut *mut GpmatReturns,
) -> GpmatStatus {
    if out.is_null() {
        return fail_msg(GpmatStatus::NullPointer, "out pointer is null");
    }
    let path = match path_from_c(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match load_ff_industry(path) {
        Ok((panel, _dropped)) => {
            *out = Box::into_raw(Box::new(GpmatReturns { inner: panel }));
            GpmatStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Wrap a caller-provided row-major `n_rows × n_cols` buffer of returns.
/// The data is copied; the buffer stays owned by the caller.
///
/// # Safety
/// `values` must point to `n_rows * n_cols` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn gpmat_returns_from_array(
    values: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut *mut GpmatReturns,
) -> GpmatStatus {
    if values.is_null() || out.is_null() {
        return fail_msg(GpmatStatus::NullPointer, "values/out pointer is null");
    }
    if n_rows == 0 || n_cols == 0 {
        return fail_msg(GpmatStatus::InvalidArgument, "empty panel");
    }
    let slice = std::slice::from_raw_parts(values, n_rows * n_cols);
    let array = match Array2::from_shape_vec((n_rows, n_cols), slice.to_vec()) {
        Ok(a) => a,
        Err(e) => return fail_msg(GpmatStatus::InvalidArgument, &e.to_string()),
    };
    let dates = gpmat::data::synthetic_dates(n_rows);
    let assets = (1..=n_cols).map(|i| format!("A{i:02}")).collect();
    match ReturnsMatrix::new(dates, assets, array) {
        Ok(panel) => {
            *out = Box::into_raw(Box::new(GpmatReturns { inner: panel }));
            GpmatStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Draw a seeded multivariate t panel with equicorrelated scatter.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gpmat_simulate_t(
    n: usize,
    d: usize,
    nu: f64,
    rho: f64,
    seed: u64,
    out: *mut *mut GpmatReturns,
) -> GpmatStatus {
    if out.is_null() {
        return fail_msg(GpmatStatus::NullPointer, "out pointer is null");
    }
    if d == 0 {
        return fail_msg(GpmatStatus::InvalidArgument, "dimension must be positive");
    }
    let mut sigma = Array2::from_elem((d, d), rho);
    for i in 0..d {
        sigma[[i, i]] = 1.0;
    }
    let sigma = match SpdMatrix::new(sigma) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let params = match TStudentParams::new(Array1::zeros(d), sigma, nu) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    match simulate_t(n, &params, seed) {
        Ok(panel) => {
            *out = Box::into_raw(Box::new(GpmatReturns { inner: panel }));
            GpmatStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Number of rows (periods) in a panel handle.
///
/// # Safety
/// `r` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn gpmat_returns_rows(r: *const GpmatReturns) -> usize {
    if r.is_null() {
        return 0;
    }
    (*r).inner.n_periods()
}

/// Number of columns (assets) in a panel handle.
///
/// # Safety
/// `r` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn gpmat_returns_cols(r: *const GpmatReturns) -> usize {
    if r.is_null() {
        return 0;
    }
    (*r).inner.n_assets()
}

/// Release a panel handle. Null is a no-op.
///
/// # Safety
/// `r` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gpmat_returns_free(r: *mut GpmatReturns) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Estimate a precision matrix from a panel with window sample moments
/// plugged in. `nu` is ignored for the inverse-covariance kind;
/// `region_threshold`/`region_p`/`region_q` are read only for the region
/// kind.
///
/// # Safety
/// `r` must be a live panel handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gpmat_estimate(
    r: *const GpmatReturns,
    kind: GpmatEstimatorKind,
    nu: f64,
    region_threshold: f64,
    region_p: usize,
    region_q: usize,
    out: *mut *mut GpmatEstimate,
) -> GpmatStatus {
    if r.is_null() || out.is_null() {
        return fail_msg(GpmatStatus::NullPointer, "returns/out pointer is null");
    }
    let panel = &(*r).inner;
    let result = sample_moments(&panel.values, true).and_then(|moments| match kind {
        GpmatEstimatorKind::InverseCovariance => gpm_gaussian(&moments),
        GpmatEstimatorKind::Signed => estimate_gpm_with(&panel.values, &moments, nu),
        GpmatEstimatorKind::Abs => estimate_gpm_abs_with(&panel.values, &moments, nu),
        GpmatEstimatorKind::Taylor => estimate_gpm_taylor_with(&panel.values, &moments, nu),
        GpmatEstimatorKind::Region => estimate_gpm_region_with(
            &panel.values,
            &moments,
            nu,
            region_threshold,
            (region_p, region_q),
        ),
    });
    match result {
        Ok(est) => {
            *out = Box::into_raw(Box::new(GpmatEstimate { inner: est }));
            GpmatStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Matrix dimension of an estimate handle.
///
/// # Safety
/// `e` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn gpmat_estimate_dim(e: *const GpmatEstimate) -> usize {
    if e.is_null() {
        return 0;
    }
    (*e).inner.dim()
}

/// Copy the d×d estimate row-major into `buf` (capacity `len` doubles).
///
/// # Safety
/// `e` must be a live handle; `buf` must hold at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gpmat_estimate_matrix(
    e: *const GpmatEstimate,
    buf: *mut f64,
    len: usize,
) -> GpmatStatus {
    if e.is_null() || buf.is_null() {
        return fail_msg(GpmatStatus::NullPointer, "estimate/buffer pointer is null");
    }
    let m = &(*e).inner.matrix;
    let needed = m.len();
    if len < needed {
        return fail_msg(
            GpmatStatus::BufferTooSmall,
            &format!("need {needed} doubles, got {len}"),
        );
    }
    let out = std::slice::from_raw_parts_mut(buf, needed);
    for (dst, src) in out.iter_mut().zip(m.iter()) {
        *dst = *src;
    }
    GpmatStatus::Ok
}

/// Minimum-variance weights of an estimate, copied into `buf`.
///
/// # Safety
/// `e` must be a live handle; `buf` must hold at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gpmat_mv_weights(
    e: *const GpmatEstimate,
    buf: *mut f64,
    len: usize,
) -> GpmatStatus {
    if e.is_null() || buf.is_null() {
        return fail_msg(GpmatStatus::NullPointer, "estimate/buffer pointer is null");
    }
    let d = (*e).inner.dim();
    if len < d {
        return fail_msg(
            GpmatStatus::BufferTooSmall,
            &format!("need {d} doubles, got {len}"),
        );
    }
    match mv_weights(&(*e).inner.matrix) {
        Ok(w) => {
            let out = std::slice::from_raw_parts_mut(buf, d);
            for (dst, src) in out.iter_mut().zip(w.iter()) {
                *dst = *src;
            }
            GpmatStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// JSON document of an estimate; release with [`gpmat_string_free`].
///
/// # Safety
/// `e` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn gpmat_estimate_to_json(e: *const GpmatEstimate) -> *mut c_char {
    if e.is_null() {
        return std::ptr::null_mut();
    }
    match CString::new((*e).inner.to_json()) {
        Ok(s) => s.into_raw(),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn gpmat_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Release an estimate handle. Null is a no-op.
///
/// # Safety
/// `e` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gpmat_estimate_free(e: *mut GpmatEstimate) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Exact t-Student LDF at a point: fills `out` (row-major d×d) with the
/// mixed second partials of the log-density for location `mu`, scatter
/// `sigma` (row-major d×d) and `nu` degrees of freedom.
///
/// # Safety
/// `x`, `mu` must point to `d` doubles; `sigma` to `d*d`; `out` to `d*d`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gpmat_ldf_t_exact(
    d: usize,
    nu: f64,
    x: *const f64,
    mu: *const f64,
    sigma: *const f64,
    out: *mut f64,
) -> GpmatStatus {
    if x.is_null() || mu.is_null() || sigma.is_null() || out.is_null() {
        return fail_msg(GpmatStatus::NullPointer, "array pointer is null");
    }
    if d == 0 {
        return fail_msg(GpmatStatus::InvalidArgument, "dimension must be positive");
    }
    let xs = std::slice::from_raw_parts(x, d);
    let mus = std::slice::from_raw_parts(mu, d);
    let sg = std::slice::from_raw_parts(sigma, d * d);
    let sigma =
        match SpdMatrix::new(Array2::from_shape_vec((d, d), sg.to_vec()).expect("shape math")) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
    let params = match TStudentParams::new(Array1::from_vec(mus.to_vec()), sigma, nu) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let density = match TStudentDensity::new(params) {
        Ok(dn) => dn,
        Err(e) => return fail(e),
    };
    match density.ldf_exact(Array1::from_vec(xs.to_vec()).view()) {
        Ok(gamma) => {
            let outs = std::slice::from_raw_parts_mut(out, d * d);
            for (dst, src) in outs.iter_mut().zip(gamma.iter()) {
                *dst = *src;
            }
            GpmatStatus::Ok
        }
        Err(e) => fail(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(gpmat_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn simulate_estimate_weights_round_trip() {
        unsafe {
            let mut panel: *mut GpmatReturns = std::ptr::null_mut();
            let st = gpmat_simulate_t(500, 3, 6.0, 0.3, 7, &mut panel);
            assert_eq!(st, GpmatStatus::Ok);
            assert_eq!(gpmat_returns_rows(panel), 500);
            assert_eq!(gpmat_returns_cols(panel), 3);

            let mut est: *mut GpmatEstimate = std::ptr::null_mut();
            let st = gpmat_estimate(panel, GpmatEstimatorKind::Signed, 6.0, 0.0, 0, 1, &mut est);
            assert_eq!(st, GpmatStatus::Ok);
            assert_eq!(gpmat_estimate_dim(est), 3);

            let mut matrix = [0.0f64; 9];
            assert_eq!(
                gpmat_estimate_matrix(est, matrix.as_mut_ptr(), 9),
                GpmatStatus::Ok
            );
            assert!((matrix[1] - matrix[3]).abs() < 1e-12, "symmetry");

            let mut weights = [0.0f64; 3];
            assert_eq!(
                gpmat_mv_weights(est, weights.as_mut_ptr(), 3),
                GpmatStatus::Ok
            );
            let sum: f64 = weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-10);

            let json = gpmat_estimate_to_json(est);
            assert!(!json.is_null());
            let text = CStr::from_ptr(json).to_str().unwrap().to_string();
            assert!(text.contains("\"kind\": \"signed\""));
            gpmat_string_free(json);

            gpmat_estimate_free(est);
            gpmat_returns_free(panel);
        }
    }

    #[test]
    fn error_paths_set_status_and_message() {
        unsafe {
            let mut panel: *mut GpmatReturns = std::ptr::null_mut();
            let st = gpmat_returns_load_csv(
                b"/definitely/not/here.csv\0".as_ptr() as *const c_char,
                &mut panel,
            );
            assert_eq!(st, GpmatStatus::IoError);
            let msg = CStr::from_ptr(gpmat_last_error()).to_str().unwrap();
            assert!(msg.contains("not/here.csv"), "{msg}");

            // too-short window: 3 rows for d = 3 needs n >= 4... the plug-in
            // covariance of 2 rows in 3 columns is singular
            let values = [0.01f64, 0.0, 0.0, 0.0, 0.01, 0.0];
            let st = gpmat_returns_from_array(values.as_ptr(), 2, 3, &mut panel);
            assert_eq!(st, GpmatStatus::Ok);
            let mut est: *mut GpmatEstimate = std::ptr::null_mut();
            let st = gpmat_estimate(
                panel,
                GpmatEstimatorKind::InverseCovariance,
                6.0,
                0.0,
                0,
                1,
                &mut est,
            );
            assert_eq!(st, GpmatStatus::NotPositiveDefinite);
            gpmat_returns_free(panel);

            let st = gpmat_simulate_t(10, 2, -1.0, 0.0, 1, &mut panel);
            assert_eq!(st, GpmatStatus::InvalidArgument);

            let st = gpmat_returns_load_csv(std::ptr::null(), &mut panel);
            assert_eq!(st, GpmatStatus::NullPointer);
        }
    }

    #[test]
    fn ldf_matches_library_closed_form() {
        let d = 2usize;
        let nu = 6.0;
        let x = [0.5f64, -0.3];
        let mu = [0.0f64, 0.0];
        let sigma = [1.0f64, 0.7, 0.7, 1.0];
        let mut out = [0.0f64; 4];
        let st = unsafe {
            gpmat_ldf_t_exact(
                d,
                nu,
                x.as_ptr(),
                mu.as_ptr(),
                sigma.as_ptr(),
                out.as_mut_ptr(),
            )
        };
        assert_eq!(st, GpmatStatus::Ok);
        let params = TStudentParams::bivariate(0.7, nu).unwrap();
        let expected =
            gpmat::ldf::ldf_t_exact(Array1::from_vec(x.to_vec()).view(), &params).unwrap();
        for (i, v) in out.iter().enumerate() {
            let e = expected[[i / 2, i % 2]];
            assert!((v - e).abs() < 1e-14, "{v} vs {e}");
        }
    }

    #[test]
    fn buffer_too_small_is_reported() {
        unsafe {
            let mut panel: *mut GpmatReturns = std::ptr::null_mut();
            assert_eq!(
                gpmat_simulate_t(100, 3, 6.0, 0.0, 3, &mut panel),
                GpmatStatus::Ok
            );
            let mut est: *mut GpmatEstimate = std::ptr::null_mut();
            assert_eq!(
                gpmat_estimate(panel, GpmatEstimatorKind::Abs, 6.0, 0.0, 0, 1, &mut est),
                GpmatStatus::Ok
            );
            let mut tiny = [0.0f64; 2];
            assert_eq!(
                gpmat_estimate_matrix(est, tiny.as_mut_ptr(), 2),
                GpmatStatus::BufferTooSmall
            );
            gpmat_estimate_free(est);
            gpmat_returns_free(panel);
        }
    }
}
