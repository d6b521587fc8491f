//! C ABI for the quasidiff library.
//!
//! Objects are exposed as opaque handles created and destroyed by this
//! library; every fallible call returns a [`QdStatus`] and stores a
//! human-readable message retrievable with [`qd_last_error_message`].
//! Buffers are caller-allocated: size queries (`qd_*_len`, `qd_*_dim`)
//! precede the copy calls.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use quasidiff::autocorr::autocorrelation;
use quasidiff::cli::{build_set, GeneratorSpec, RunConfig};
use quasidiff::diffraction::{amplitude, bragg_scan, Source};
use quasidiff::error::Error;
use quasidiff::pointset::{hull_distance, structure_report, PointSample, WeightedComb};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QdStatus {
    QdOk = 0,
    QdNullArgument = 1,
    QdInvalidUtf8 = 2,
    QdInvalidArgument = 3,
    QdDimensionMismatch = 4,
    QdOutOfWindow = 5,
    QdEmptyInput = 6,
    QdUnknownPreset = 7,
    QdBufferTooSmall = 8,
    QdNumericFailure = 9,
    QdInternalError = 10,
}

/// Opaque point-sample handle.
pub struct QdSample(PointSample);

/// Opaque weighted-comb handle (atom positions with complex weights).
pub struct QdComb(WeightedComb);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: Vec<u8> = msg.bytes().filter(|&b| b != 0).collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> QdStatus {
    match err {
        Error::DimensionMismatch { .. } => QdStatus::QdDimensionMismatch,
        Error::OutOfWindow { .. } => QdStatus::QdOutOfWindow,
        Error::Empty(_) => QdStatus::QdEmptyInput,
        Error::UnknownPreset(_) => QdStatus::QdUnknownPreset,
        Error::ShapeMismatch(_) => QdStatus::QdInvalidArgument,
        Error::Degenerate(_) | Error::Config(_) => QdStatus::QdInvalidArgument,
        _ => QdStatus::QdNumericFailure,
    }
}

fn fail(err: Error) -> QdStatus {
    let code = status_of(&err);
    set_error(&err.to_string());
    code
}

/// Runs a closure, converting panics into `QdInternalError`.
fn guarded(f: impl FnOnce() -> QdStatus) -> QdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            QdStatus::QdInternalError
        }
    }
}

/// Copies the most recent error message into `buf` (NUL-terminated,
/// truncating) and returns the full message length in bytes.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null (then only the
/// length is returned).
#[no_mangle]
pub unsafe extern "C" fn qd_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Generates a sample from a named preset (`integers`, `fibonacci`,
/// `thue-morse`, `period-doubling`, `fibonacci-cps`, `ammann-beenker`)
/// restricted to the ball of the given radius.
///
/// # Safety
/// `preset` must be a NUL-terminated string and `out` a valid pointer; on
/// success `*out` owns the sample and must be released with
/// [`qd_sample_free`].
#[no_mangle]
pub unsafe extern "C" fn qd_sample_from_preset(
    preset: *const c_char,
    radius: f64,
    out: *mut *mut QdSample,
) -> QdStatus {
    guarded(|| {
        if preset.is_null() || out.is_null() {
            set_error("null argument");
            return QdStatus::QdNullArgument;
        }
        let name = match CStr::from_ptr(preset).to_str() {
            Ok(s) => s.to_string(),
            Err(_) => {
                set_error("preset name is not valid UTF-8");
                return QdStatus::QdInvalidUtf8;
            }
        };
        let cfg = RunConfig {
            command: "capi".into(),
            generator: GeneratorSpec::Preset(name),
            radius: Some(radius),
            radii: None,
            zmax: None,
            kmax: None,
            threshold: None,
            format: "csv".into(),
            weights: None,
            method: None,
            letter: None,
            block_map: None,
            internal_bound: None,
            cap: quasidiff::generators::DEFAULT_POINT_CAP,
        };
        match build_set(&cfg, radius) {
            Ok(set) => {
                *out = Box::into_raw(Box::new(QdSample(set.sample)));
                QdStatus::QdOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a sample handle. Passing null is a no-op.
///
/// # Safety
/// `s` must be a pointer previously returned by this library and not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn qd_sample_free(s: *mut QdSample) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of points; 0 for null handles.
///
/// # Safety
/// `s` must be a live sample handle or null.
#[no_mangle]
pub unsafe extern "C" fn qd_sample_len(s: *const QdSample) -> usize {
    s.as_ref().map(|s| s.0.len()).unwrap_or(0)
}

/// Space dimension; 0 for null handles.
///
/// # Safety
/// `s` must be a live sample handle or null.
#[no_mangle]
pub unsafe extern "C" fn qd_sample_dim(s: *const QdSample) -> usize {
    s.as_ref().map(|s| s.0.dim()).unwrap_or(0)
}

/// Sampling-ball radius; NaN for null handles.
///
/// # Safety
/// `s` must be a live sample handle or null.
#[no_mangle]
pub unsafe extern "C" fn qd_sample_radius(s: *const QdSample) -> f64 {
    s.as_ref().map(|s| s.0.radius()).unwrap_or(f64::NAN)
}

/// Point density estimate `card / vol`; NaN for null handles.
///
/// # Safety
/// `s` must be a live sample handle or null.
#[no_mangle]
pub unsafe extern "C" fn qd_sample_density(s: *const QdSample) -> f64 {
    s.as_ref().map(|s| s.0.density()).unwrap_or(f64::NAN)
}

/// Copies the row-major coordinates (`len * dim` doubles) into `buf`.
///
/// # Safety
/// `s` must be a live sample handle; `buf` must point to `buf_len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qd_sample_coords(
    s: *const QdSample,
    buf: *mut f64,
    buf_len: usize,
) -> QdStatus {
    guarded(|| {
        let Some(sample) = s.as_ref() else {
            set_error("null sample");
            return QdStatus::QdNullArgument;
        };
        let coords = sample.0.coords();
        if buf.is_null() || buf_len < coords.len() {
            set_error("coordinate buffer too small");
            return QdStatus::QdBufferTooSmall;
        }
        std::ptr::copy_nonoverlapping(coords.as_ptr(), buf, coords.len());
        QdStatus::QdOk
    })
}

/// Restriction of a sample to a smaller radius.
///
/// # Safety
/// `s` must be a live sample handle; `out` must be valid. On success the
/// new handle must be released with [`qd_sample_free`].
#[no_mangle]
pub unsafe extern "C" fn qd_sample_restrict(
    s: *const QdSample,
    radius: f64,
    out: *mut *mut QdSample,
) -> QdStatus {
    guarded(|| {
        let Some(sample) = s.as_ref() else {
            set_error("null sample");
            return QdStatus::QdNullArgument;
        };
        if out.is_null() {
            set_error("null output pointer");
            return QdStatus::QdNullArgument;
        }
        match sample.0.restrict(radius) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(QdSample(r)));
                QdStatus::QdOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Packing and covering radii of a sample with the given boundary margin.
///
/// # Safety
/// `s` must be a live sample handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_structure_report(
    s: *const QdSample,
    margin: f64,
    out_packing: *mut f64,
    out_covering: *mut f64,
) -> QdStatus {
    guarded(|| {
        let Some(sample) = s.as_ref() else {
            set_error("null sample");
            return QdStatus::QdNullArgument;
        };
        if out_packing.is_null() || out_covering.is_null() {
            set_error("null output pointer");
            return QdStatus::QdNullArgument;
        }
        match structure_report(&sample.0, margin) {
            Ok(rep) => {
                *out_packing = rep.packing_radius;
                *out_covering = rep.covering_radius;
                QdStatus::QdOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Hausdorff distance between the stereographic lifts of two samples.
///
/// # Safety
/// Both handles must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_hull_distance(
    a: *const QdSample,
    b: *const QdSample,
    out: *mut f64,
) -> QdStatus {
    guarded(|| {
        let (Some(a), Some(b)) = (a.as_ref(), b.as_ref()) else {
            set_error("null sample");
            return QdStatus::QdNullArgument;
        };
        if out.is_null() {
            set_error("null output pointer");
            return QdStatus::QdNullArgument;
        }
        match hull_distance(&a.0, &b.0) {
            Ok(d) => {
                *out = d;
                QdStatus::QdOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Autocorrelation estimate: difference vectors with pair frequencies per
/// unit volume, as a comb handle.
///
/// # Safety
/// `s` must be a live sample handle; `out` must be valid. On success the
/// comb must be released with [`qd_comb_free`].
#[no_mangle]
pub unsafe extern "C" fn qd_autocorrelation(
    s: *const QdSample,
    zmax: f64,
    out: *mut *mut QdComb,
) -> QdStatus {
    guarded(|| {
        let Some(sample) = s.as_ref() else {
            set_error("null sample");
            return QdStatus::QdNullArgument;
        };
        if out.is_null() {
            set_error("null output pointer");
            return QdStatus::QdNullArgument;
        }
        match autocorrelation(&sample.0, zmax) {
            Ok(est) => {
                *out = Box::into_raw(Box::new(QdComb(est.comb)));
                QdStatus::QdOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Intensity `|c_k|^2` of the averaged exponential sum at wave vector `k`.
///
/// # Safety
/// `s` must be a live sample handle; `k` must point to `dim` doubles and
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_intensity(
    s: *const QdSample,
    k: *const f64,
    dim: usize,
    out: *mut f64,
) -> QdStatus {
    guarded(|| {
        let Some(sample) = s.as_ref() else {
            set_error("null sample");
            return QdStatus::QdNullArgument;
        };
        if k.is_null() || out.is_null() {
            set_error("null argument");
            return QdStatus::QdNullArgument;
        }
        let kv = std::slice::from_raw_parts(k, dim);
        match amplitude(&Source::Points(&sample.0), kv) {
            Ok(a) => {
                *out = a.intensity();
                QdStatus::QdOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Evaluates the amplitudes at `nk` candidate wave vectors (row-major,
/// `nk * dim` doubles) and keeps peaks with intensity at or above the
/// threshold. The result comb holds the peak positions with the complex
/// amplitudes as weights.
///
/// # Safety
/// `s` must be a live sample handle; `ks` must point to `nk * dim`
/// doubles; `out` must be valid. On success the comb must be released with
/// [`qd_comb_free`].
#[no_mangle]
pub unsafe extern "C" fn qd_bragg_scan(
    s: *const QdSample,
    ks: *const f64,
    nk: usize,
    threshold: f64,
    out: *mut *mut QdComb,
) -> QdStatus {
    guarded(|| {
        let Some(sample) = s.as_ref() else {
            set_error("null sample");
            return QdStatus::QdNullArgument;
        };
        if ks.is_null() || out.is_null() {
            set_error("null argument");
            return QdStatus::QdNullArgument;
        }
        let dim = sample.0.dim();
        let flat = std::slice::from_raw_parts(ks, nk * dim);
        let candidates: Vec<Vec<f64>> = flat.chunks_exact(dim).map(|k| k.to_vec()).collect();
        match bragg_scan(&Source::Points(&sample.0), &candidates, threshold) {
            Ok(list) => {
                let mut positions = Vec::with_capacity(list.peaks.len() * dim);
                let mut weights = Vec::with_capacity(list.peaks.len());
                for p in &list.peaks {
                    positions.extend_from_slice(&p.k);
                    let amp = p.intensity.sqrt();
                    weights.push(num_complex::Complex64::new(
                        amp * p.phase.cos(),
                        amp * p.phase.sin(),
                    ));
                }
                match WeightedComb::new(dim, positions, weights) {
                    Ok(c) => {
                        *out = Box::into_raw(Box::new(QdComb(c)));
                        QdStatus::QdOk
                    }
                    Err(e) => fail(e),
                }
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a comb handle. Passing null is a no-op.
///
/// # Safety
/// `c` must be a pointer previously returned by this library and not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn qd_comb_free(c: *mut QdComb) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Number of atoms; 0 for null handles.
///
/// # Safety
/// `c` must be a live comb handle or null.
#[no_mangle]
pub unsafe extern "C" fn qd_comb_len(c: *const QdComb) -> usize {
    c.as_ref().map(|c| c.0.len()).unwrap_or(0)
}

/// Space dimension; 0 for null handles.
///
/// # Safety
/// `c` must be a live comb handle or null.
#[no_mangle]
pub unsafe extern "C" fn qd_comb_dim(c: *const QdComb) -> usize {
    c.as_ref().map(|c| c.0.dim()).unwrap_or(0)
}

/// Copies the atoms as rows `(z_1 .. z_d, re, im)`, `len * (dim + 2)`
/// doubles in total.
///
/// # Safety
/// `c` must be a live comb handle; `buf` must point to `buf_len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn qd_comb_rows(
    c: *const QdComb,
    buf: *mut f64,
    buf_len: usize,
) -> QdStatus {
    guarded(|| {
        let Some(comb) = c.as_ref() else {
            set_error("null comb");
            return QdStatus::QdNullArgument;
        };
        let dim = comb.0.dim();
        let need = comb.0.len() * (dim + 2);
        if buf.is_null() || buf_len < need {
            set_error("row buffer too small");
            return QdStatus::QdBufferTooSmall;
        }
        let mut off = 0usize;
        for (p, w) in comb.0.atoms() {
            std::ptr::copy_nonoverlapping(p.as_ptr(), buf.add(off), dim);
            off += dim;
            *buf.add(off) = w.re;
            *buf.add(off + 1) = w.im;
            off += 2;
        }
        QdStatus::QdOk
    })
}
