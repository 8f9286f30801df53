//! C ABI over the longseg library.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible function returns an
//! [`LsegStatus`]; on failure, [`lseg_last_error`] describes the most recent
//! error on the calling thread. Strings returned to the caller are released
//! with [`lseg_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use longseg::commands::{build_window_segmenter, CliError, EXIT_ENDPOINT, EXIT_INVALID_CONFIG, EXIT_MISSING_INPUT};
use longseg::config::PipelineConfig;
use longseg::eval::boundary_f1;
use longseg::segmenter::{FixedLength, SegmentError, WindowSegmenter};
use longseg::transcript::{decode_delimited_with, encode_delimited, Delimiter, SegmentationLabels, Transcript};
use longseg::{Pipeline, WindowConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsegStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    InvalidConfig = 4,
    NotFound = 5,
    Endpoint = 6,
    /// The candidate text is not a delimiter insertion of the reference.
    Malformed = 7,
    BufferTooSmall = 8,
    Panic = 9,
    Internal = 10,
}

/// A configured window segmenter plus its windowing pipeline.
pub struct LsegSegmenter {
    pipeline: Pipeline,
    segmenter: Box<dyn WindowSegmenter>,
    delimiter: Delimiter,
    normalize: bool,
}

/// Per-token SPLIT/CONTINUE labels of one transcript.
pub struct LsegLabels {
    labels: SegmentationLabels,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let msg = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(LsegStatus, String);

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        let status = match e.code {
            EXIT_INVALID_CONFIG => LsegStatus::InvalidConfig,
            EXIT_MISSING_INPUT => LsegStatus::NotFound,
            EXIT_ENDPOINT => LsegStatus::Endpoint,
            _ => LsegStatus::Internal,
        };
        Failure(status, e.message)
    }
}

impl From<SegmentError> for Failure {
    fn from(e: SegmentError) -> Self {
        let status = match &e {
            SegmentError::Endpoint { .. } => LsegStatus::Endpoint,
            SegmentError::InvalidParameter(_) | SegmentError::Window(_) => LsegStatus::InvalidArgument,
            SegmentError::Transcript(_) => LsegStatus::InvalidArgument,
            _ => LsegStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LsegStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LsegStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LsegStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(LsegStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(LsegStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(LsegStatus::NullPointer, format!("{name} is null")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(LsegStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn lseg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lseg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lseg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a segmenter from a TOML pipeline configuration (same format as
/// the command-line `--config` file).
///
/// # Safety
/// `config_toml` must be a valid NUL-terminated string; `out` must be a
/// valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lseg_segmenter_from_toml(config_toml: *const c_char, out: *mut *mut LsegSegmenter) -> LsegStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = str_arg(config_toml, "config_toml")?;
        let cfg = PipelineConfig::from_toml(text, Path::new("<ffi>"))
            .map_err(|e| Failure(LsegStatus::InvalidConfig, e.to_string()))?;
        cfg.validate().map_err(|e| Failure(LsegStatus::InvalidConfig, e.to_string()))?;
        let segmenter = build_window_segmenter(&cfg)?;
        let handle = LsegSegmenter {
            pipeline: Pipeline::new(cfg.window, cfg.workers)?,
            segmenter,
            delimiter: cfg.delimiter().map_err(|e| Failure(LsegStatus::InvalidConfig, e.to_string()))?,
            normalize: cfg.normalize,
        };
        *out = Box::into_raw(Box::new(handle));
        Ok(())
    })
}

/// A fixed-length segmenter (boundary every `segment_len` tokens).
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lseg_segmenter_fixed(
    segment_len: usize,
    window_size: usize,
    window_left: usize,
    window_right: usize,
    out: *mut *mut LsegSegmenter,
) -> LsegStatus {
    guard(|| {
        out_arg(out, "out")?;
        let window = WindowConfig::new(window_size, window_left, window_right)
            .map_err(|e| Failure(LsegStatus::InvalidArgument, e.to_string()))?;
        let handle = LsegSegmenter {
            pipeline: Pipeline::new(window, 1)?,
            segmenter: Box::new(FixedLength::new(segment_len)?),
            delimiter: Delimiter::default(),
            normalize: false,
        };
        *out = Box::into_raw(Box::new(handle));
        Ok(())
    })
}

/// # Safety
/// `seg` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lseg_segmenter_free(seg: *mut LsegSegmenter) {
    if !seg.is_null() {
        drop(Box::from_raw(seg));
    }
}

/// Segments whitespace-tokenized `text`.
///
/// # Safety
/// `seg` must be a live segmenter, `text` a NUL-terminated string and `out`
/// valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn lseg_segment(seg: *const LsegSegmenter, text: *const c_char, out: *mut *mut LsegLabels) -> LsegStatus {
    guard(|| {
        out_arg(out, "out")?;
        let seg = ref_arg(seg, "seg")?;
        let text = str_arg(text, "text")?;
        let transcript = transcript_of(text, seg.normalize, &seg.delimiter)?;
        let labels = seg.pipeline.segment(transcript.tokens(), seg.segmenter.as_ref())?;
        *out = Box::into_raw(Box::new(LsegLabels { labels }));
        Ok(())
    })
}

fn transcript_of(text: &str, normalize: bool, delimiter: &Delimiter) -> Result<Transcript, Failure> {
    if normalize {
        Ok(longseg::transcript::normalize_text("ffi", text))
    } else {
        Transcript::with_delimiter("ffi", text.split_whitespace().map(str::to_string).collect(), delimiter)
            .map_err(|e| Failure(LsegStatus::InvalidArgument, e.to_string()))
    }
}

/// Builds labels for `n` tokens with SPLIT at the given positions (position
/// 0 is always SPLIT).
///
/// # Safety
/// `splits` must point to `count` readable values (or be null when `count`
/// is 0); `out` must be valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn lseg_labels_from_splits(n: usize, splits: *const usize, count: usize, out: *mut *mut LsegLabels) -> LsegStatus {
    guard(|| {
        out_arg(out, "out")?;
        let splits = if count == 0 {
            &[][..]
        } else {
            if splits.is_null() {
                return Err(Failure(LsegStatus::NullPointer, "splits is null".into()));
            }
            std::slice::from_raw_parts(splits, count)
        };
        let labels = SegmentationLabels::from_splits(n, splits).map_err(|e| Failure(LsegStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(LsegLabels { labels }));
        Ok(())
    })
}

/// # Safety
/// `labels` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lseg_labels_free(labels: *mut LsegLabels) {
    if !labels.is_null() {
        drop(Box::from_raw(labels));
    }
}

/// Number of tokens covered by `labels` (0 for null).
///
/// # Safety
/// `labels` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lseg_labels_len(labels: *const LsegLabels) -> usize {
    labels.as_ref().map_or(0, |l| l.labels.len())
}

/// Copies the SPLIT positions (including 0) into `buf`. `written` receives
/// the number of positions; if `capacity` is too small nothing is copied,
/// `written` receives the required size and `BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `labels` must be a live handle, `buf` must hold `capacity` values (or be
/// null when `capacity` is 0) and `written` must be valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn lseg_labels_splits(
    labels: *const LsegLabels,
    buf: *mut usize,
    capacity: usize,
    written: *mut usize,
) -> LsegStatus {
    guard(|| {
        out_arg(written, "written")?;
        let splits = ref_arg(labels, "labels")?.labels.split_positions();
        *written = splits.len();
        if splits.len() > capacity {
            return Err(Failure(
                LsegStatus::BufferTooSmall,
                format!("need room for {} positions, have {capacity}", splits.len()),
            ));
        }
        if !splits.is_empty() {
            out_arg(buf, "buf")?;
            ptr::copy_nonoverlapping(splits.as_ptr(), buf, splits.len());
        }
        Ok(())
    })
}

/// Renders `text` with `labels` as delimited text (no delimiter before the
/// first token). The result is released with [`lseg_string_free`].
///
/// # Safety
/// All pointers must be valid; `delimiter` may be null for the default.
#[no_mangle]
pub unsafe extern "C" fn lseg_render_delimited(
    labels: *const LsegLabels,
    text: *const c_char,
    delimiter: *const c_char,
    out: *mut *mut c_char,
) -> LsegStatus {
    guard(|| {
        out_arg(out, "out")?;
        let labels = &ref_arg(labels, "labels")?.labels;
        let delimiter = delimiter_arg(delimiter)?;
        let transcript = transcript_of(str_arg(text, "text")?, false, &delimiter)?;
        let encoded = encode_delimited(&transcript, labels).map_err(|e| Failure(LsegStatus::InvalidArgument, e.to_string()))?;
        *out = into_c_string(encoded.render(&delimiter));
        Ok(())
    })
}

unsafe fn delimiter_arg(p: *const c_char) -> Result<Delimiter, Failure> {
    if p.is_null() {
        return Ok(Delimiter::default());
    }
    Delimiter::new(str_arg(p, "delimiter")?).map_err(|e| Failure(LsegStatus::InvalidArgument, e.to_string()))
}

/// Strict decoding of generated delimited text against the reference
/// tokens. On `MALFORMED`, `malformed_at` (if not null) receives the first
/// offending token index.
///
/// # Safety
/// `candidate` and `reference` must be NUL-terminated strings, `delimiter`
/// null or NUL-terminated, `out` valid writable storage, `malformed_at`
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn lseg_decode_delimited(
    candidate: *const c_char,
    reference: *const c_char,
    delimiter: *const c_char,
    out: *mut *mut LsegLabels,
    malformed_at: *mut usize,
) -> LsegStatus {
    guard(|| {
        out_arg(out, "out")?;
        let delimiter = delimiter_arg(delimiter)?;
        let reference = transcript_of(str_arg(reference, "reference")?, false, &delimiter)?;
        match decode_delimited_with(str_arg(candidate, "candidate")?, &reference, &delimiter) {
            Ok(labels) => {
                *out = Box::into_raw(Box::new(LsegLabels { labels }));
                Ok(())
            }
            Err(m) => {
                if !malformed_at.is_null() {
                    *malformed_at = m.position();
                }
                Err(Failure(LsegStatus::Malformed, format!("{m:?}")))
            }
        }
    })
}

/// Boundary F1 of `predicted` against `reference` (position 0 excluded).
///
/// # Safety
/// Both handles must be live and `f1` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn lseg_boundary_f1(predicted: *const LsegLabels, reference: *const LsegLabels, f1: *mut f64) -> LsegStatus {
    guard(|| {
        out_arg(f1, "f1")?;
        let p = &ref_arg(predicted, "predicted")?.labels;
        let r = &ref_arg(reference, "reference")?.labels;
        *f1 = boundary_f1(p, r).map_err(|e| Failure(LsegStatus::InvalidArgument, e.to_string()))?.f1;
        Ok(())
    })
}
