// SPDX-License-Identifier: MIT OR Apache-2.0

//! C ABI over `fdcov`.
//!
//! Handles (`FdSample`, `FdDetection`, `FdSegmentation`) are opaque and owned
//! by the caller once returned; release each with its `*_free` function.
//! Every fallible call returns an [`FdStatus`]; on failure the message is
//! available from [`fd_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fdcov::{DetectionReport, Error, FunctionalSample, SegmentationResult, TestConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdStatus {
    Ok = 0,
    /// Malformed, inconsistent or non-finite data.
    InvalidInput = 2,
    Config = 3,
    /// Degenerate variance or failed factorization.
    Numerical = 4,
    Io = 5,
    NullPointer = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Test settings. Obtain defaults from [`fd_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    pub alpha: f64,
    pub mc_reps: usize,
    pub band_b: usize,
    pub tail_w: usize,
    pub approx_enabled: bool,
    pub seed: u64,
    pub min_segment: usize,
    pub cluster_gap: usize,
}

impl From<&TestConfig> for FdConfig {
    fn from(c: &TestConfig) -> Self {
        Self {
            alpha: c.alpha,
            mc_reps: c.mc_reps,
            band_b: c.band_b,
            tail_w: c.tail_w,
            approx_enabled: c.approx_enabled,
            seed: c.seed,
            min_segment: c.min_segment,
            cluster_gap: c.cluster_gap,
        }
    }
}

impl From<&FdConfig> for TestConfig {
    fn from(c: &FdConfig) -> Self {
        Self {
            alpha: c.alpha,
            mc_reps: c.mc_reps,
            band_b: c.band_b,
            tail_w: c.tail_w,
            approx_enabled: c.approx_enabled,
            seed: c.seed,
            min_segment: c.min_segment,
            cluster_gap: c.cluster_gap,
        }
    }
}

/// Observation tensor.
pub struct FdSample(FunctionalSample);

/// Result of one homogeneity test.
pub struct FdDetection(DetectionReport);

/// Result of binary segmentation.
pub struct FdSegmentation(SegmentationResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> FdStatus {
    match e {
        Error::Io { .. } => FdStatus::Io,
        Error::Config(_) => FdStatus::Config,
        _ => match e.exit_code() {
            4 => FdStatus::Numerical,
            _ => FdStatus::InvalidInput,
        },
    }
}

fn guard(f: impl FnOnce() -> Result<(), (FdStatus, String)>) -> FdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FdStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            FdStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (FdStatus, String) {
    (status_of(&e), e.to_string())
}

fn null_err(what: &str) -> (FdStatus, String) {
    (FdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next `fd_*` call on the same thread.
#[no_mangle]
pub extern "C" fn fd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Writes the default configuration to `out`.
///
/// # Safety
/// `out` must be NULL or point to writable memory for one `FdConfig`.
#[no_mangle]
pub unsafe extern "C" fn fd_config_default(out: *mut FdConfig) -> FdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        *out = FdConfig::from(&TestConfig::default());
        Ok(())
    })
}

/// Loads an FDT1 or long-CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_sample_load(path: *const c_char, out: *mut *mut FdSample) -> FdStatus {
    guard(|| {
        if path.is_null() {
            return Err(null_err("path"));
        }
        if out.is_null() {
            return Err(null_err("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (FdStatus::InvalidInput, "path is not UTF-8".to_string()))?;
        let sample = fdcov::data::load_sample(path).map_err(lib_err)?;
        put(out, FdSample(sample));
        Ok(())
    })
}

/// Copies an `n x t x p` row-major tensor (subject, then time, then variable).
///
/// # Safety
/// `data` must point to `n * t * p` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_sample_from_buffer(
    n: usize,
    t: usize,
    p: usize,
    data: *const f64,
    out: *mut *mut FdSample,
) -> FdStatus {
    guard(|| {
        if data.is_null() {
            return Err(null_err("data"));
        }
        if out.is_null() {
            return Err(null_err("out"));
        }
        let len = n
            .checked_mul(t)
            .and_then(|x| x.checked_mul(p))
            .ok_or((FdStatus::InvalidInput, "n * t * p overflows".to_string()))?;
        let values = std::slice::from_raw_parts(data, len).to_vec();
        let sample = FunctionalSample::new(n, t, p, values).map_err(lib_err)?;
        put(out, FdSample(sample));
        Ok(())
    })
}

/// Dimensions of a sample. Any output pointer may be NULL.
///
/// # Safety
/// `sample` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_sample_dims(
    sample: *const FdSample,
    n: *mut usize,
    t: *mut usize,
    p: *mut usize,
) -> FdStatus {
    guard(|| {
        let s = &sample.as_ref().ok_or_else(|| null_err("sample"))?.0;
        for (dst, v) in [(n, s.n()), (t, s.t()), (p, s.p())] {
            if !dst.is_null() {
                *dst = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `sample` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fd_sample_free(sample: *mut FdSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

unsafe fn config_or_default(config: *const FdConfig) -> TestConfig {
    config.as_ref().map_or_else(TestConfig::default, TestConfig::from)
}

/// Tests covariance homogeneity over the whole sample. `config` may be NULL
/// for defaults.
///
/// # Safety
/// `sample` must be a live handle; `config` NULL or valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fd_detect(
    sample: *const FdSample,
    config: *const FdConfig,
    out: *mut *mut FdDetection,
) -> FdStatus {
    guard(|| {
        let s = &sample.as_ref().ok_or_else(|| null_err("sample"))?.0;
        if out.is_null() {
            return Err(null_err("out"));
        }
        let cfg = config_or_default(config);
        cfg.check().map_err(lib_err)?;
        let report = fdcov::detect(&s.full_window(), &cfg).map_err(lib_err)?;
        put(out, FdDetection(report));
        Ok(())
    })
}

/// Locates all change points. `config` may be NULL for defaults.
///
/// # Safety
/// `sample` must be a live handle; `config` NULL or valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fd_identify(
    sample: *const FdSample,
    config: *const FdConfig,
    out: *mut *mut FdSegmentation,
) -> FdStatus {
    guard(|| {
        let s = &sample.as_ref().ok_or_else(|| null_err("sample"))?.0;
        if out.is_null() {
            return Err(null_err("out"));
        }
        let cfg = config_or_default(config);
        let result = fdcov::binary_segmentation(s, &cfg).map_err(lib_err)?;
        put(out, FdSegmentation(result));
        Ok(())
    })
}

/// Maximum standardized statistic; NaN on a NULL handle.
///
/// # Safety
/// `d` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_detection_m_n(d: *const FdDetection) -> f64 {
    d.as_ref().map_or(f64::NAN, |d| d.0.m_n)
}

/// # Safety
/// `d` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_detection_p_value(d: *const FdDetection) -> f64 {
    d.as_ref().map_or(f64::NAN, |d| d.0.p_value)
}

/// # Safety
/// `d` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_detection_critical_value(d: *const FdDetection) -> f64 {
    d.as_ref().map_or(f64::NAN, |d| d.0.critical_value)
}

/// 1-based time attaining the maximum; 0 on a NULL handle.
///
/// # Safety
/// `d` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_detection_argmax(d: *const FdDetection) -> usize {
    d.as_ref().map_or(0, |d| d.0.argmax_t)
}

/// # Safety
/// `d` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_detection_reject(d: *const FdDetection) -> bool {
    d.as_ref().is_some_and(|d| d.0.reject)
}

/// Copies the standardized process into `buf` (up to `cap` values) and
/// writes its full length to `len`.
///
/// # Safety
/// `d` must be a live handle; `buf` NULL or writable for `cap` doubles;
/// `len` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn fd_detection_zhat(
    d: *const FdDetection,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> FdStatus {
    guard(|| {
        let z = &d.as_ref().ok_or_else(|| null_err("detection"))?.0.process.zhat;
        copy_out(z, buf, cap, len);
        Ok(())
    })
}

unsafe fn copy_out<T: Copy>(src: &[T], buf: *mut T, cap: usize, len: *mut usize) {
    if !buf.is_null() {
        let k = src.len().min(cap);
        ptr::copy_nonoverlapping(src.as_ptr(), buf, k);
    }
    if !len.is_null() {
        *len = src.len();
    }
}

fn json_string<T: serde::Serialize>(value: &T) -> *mut c_char {
    serde_json::to_string(value)
        .ok()
        .and_then(|s| CString::new(s).ok())
        .map_or(ptr::null_mut(), CString::into_raw)
}

/// Report as JSON; free with [`fd_string_free`]. NULL on a NULL handle.
///
/// # Safety
/// `d` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_detection_to_json(d: *const FdDetection) -> *mut c_char {
    d.as_ref().map_or(ptr::null_mut(), |d| json_string(&d.0))
}

/// # Safety
/// `d` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fd_detection_free(d: *mut FdDetection) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Copies the sorted change points (1-based) into `buf` (up to `cap`) and
/// writes the total count to `len`.
///
/// # Safety
/// `s` must be a live handle; `buf` NULL or writable for `cap` values;
/// `len` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn fd_segmentation_change_points(
    s: *const FdSegmentation,
    buf: *mut usize,
    cap: usize,
    len: *mut usize,
) -> FdStatus {
    guard(|| {
        let cps = &s.as_ref().ok_or_else(|| null_err("segmentation"))?.0.change_points;
        copy_out(cps, buf, cap, len);
        Ok(())
    })
}

/// Cluster representatives, same conventions as
/// [`fd_segmentation_change_points`].
///
/// # Safety
/// As for [`fd_segmentation_change_points`].
#[no_mangle]
pub unsafe extern "C" fn fd_segmentation_representatives(
    s: *const FdSegmentation,
    buf: *mut usize,
    cap: usize,
    len: *mut usize,
) -> FdStatus {
    guard(|| {
        let reps: Vec<usize> = s
            .as_ref()
            .ok_or_else(|| null_err("segmentation"))?
            .0
            .clusters
            .iter()
            .map(|c| c.representative)
            .collect();
        copy_out(&reps, buf, cap, len);
        Ok(())
    })
}

/// Result as JSON; free with [`fd_string_free`]. NULL on a NULL handle.
///
/// # Safety
/// `s` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_segmentation_to_json(s: *const FdSegmentation) -> *mut c_char {
    s.as_ref().map_or(ptr::null_mut(), |s| json_string(&s.0))
}

/// # Safety
/// `s` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fd_segmentation_free(s: *mut FdSegmentation) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
