//! C interface to `simfuse`.
//!
//! Every function returns a [`SimfuseStatus`]; results come back through
//! out-pointers. On failure, a description is available from
//! [`simfuse_last_error_message`] on the same thread until the next call.
//! Models are opaque handles created by [`simfuse_model_load`] and released
//! with [`simfuse_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use simfuse::corpus::parse_sentence;
use simfuse::fusion::{self, FusionWeights};
use simfuse::pipeline::{score_pair, ModelBundle};
use simfuse::{attention, jaccard, Error};

/// Result code of every `simfuse_*` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimfuseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Format = 5,
    EmptySentence = 6,
    Dimension = 7,
    Config = 8,
    Data = 9,
    Panic = 10,
}

/// Loaded model bundle.
pub struct SimfuseModel {
    bundle: ModelBundle,
}

/// Scores of one sentence pair, each in `[0, 1]`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimfuseScores {
    pub jaccard: f64,
    pub w2vcnn: f64,
    pub tfidf: f64,
    pub fused: f64,
    pub similar: bool,
}

/// Fusion weights for the (Jaccard, CNN, TF-IDF) scores.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimfuseWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl From<FusionWeights> for SimfuseWeights {
    fn from(w: FusionWeights) -> Self {
        SimfuseWeights {
            alpha: w.alpha,
            beta: w.beta,
            gamma: w.gamma,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: SimfuseStatus,
    message: String,
}

impl Failure {
    fn new(status: SimfuseStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::EmptySentence => SimfuseStatus::EmptySentence,
            Error::Format { .. } => SimfuseStatus::Format,
            Error::Dimension(_) => SimfuseStatus::Dimension,
            Error::Config(_) => SimfuseStatus::Config,
            Error::Io { .. } => SimfuseStatus::Io,
            _ => SimfuseStatus::Data,
        };
        Failure::new(status, e.to_string())
    }
}

fn set_last_error(message: Option<String>) {
    let message = message.map(|m| CString::new(m.replace('\0', " ")).expect("NULs removed"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SimfuseStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|payload| {
        let detail = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_default();
        Err(Failure::new(
            SimfuseStatus::Panic,
            format!("internal panic: {detail}"),
        ))
    });
    match outcome {
        Ok(()) => {
            set_last_error(None);
            SimfuseStatus::Ok
        }
        Err(failure) => {
            set_last_error(Some(failure.message));
            failure.status
        }
    }
}

unsafe fn str_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(Failure::new(
            SimfuseStatus::NullPointer,
            format!("`{name}` is NULL"),
        ));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        Failure::new(
            SimfuseStatus::InvalidUtf8,
            format!("`{name}` is not valid UTF-8"),
        )
    })
}

unsafe fn out_arg<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut()
        .ok_or_else(|| Failure::new(SimfuseStatus::NullPointer, format!("`{name}` is NULL")))
}

/// Version string of the library, statically allocated.
#[no_mangle]
pub extern "C" fn simfuse_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the last failed call on this thread, or NULL when the
/// last call succeeded. The pointer stays valid until the next `simfuse_*`
/// call on the same thread.
#[no_mangle]
pub extern "C" fn simfuse_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |m| m.as_ptr())
    })
}

/// Load the model bundle stored in directory `dir`.
///
/// # Safety
/// `dir` must be NULL or a NUL-terminated string; `out` must be NULL or
/// point to writable storage for one pointer. On success `*out` owns a
/// model that must be released with [`simfuse_model_free`].
#[no_mangle]
pub unsafe extern "C" fn simfuse_model_load(
    dir: *const c_char,
    out: *mut *mut SimfuseModel,
) -> SimfuseStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let dir = str_arg(dir, "dir")?;
        let bundle = ModelBundle::load(Path::new(dir))?;
        *out = Box::into_raw(Box::new(SimfuseModel { bundle }));
        Ok(())
    })
}

/// Release a model. NULL is ignored.
///
/// # Safety
/// `model` must be NULL or a pointer obtained from [`simfuse_model_load`]
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn simfuse_model_free(model: *mut SimfuseModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Score one sentence pair. Sentences are raw text, or `surface|POS|ROLE`
/// tokens separated by spaces.
///
/// # Safety
/// `model` must be a live model; `a` and `b` NUL-terminated strings; `out`
/// writable. NULL pointers are reported, not dereferenced.
#[no_mangle]
pub unsafe extern "C" fn simfuse_model_score(
    model: *const SimfuseModel,
    a: *const c_char,
    b: *const c_char,
    out: *mut SimfuseScores,
) -> SimfuseStatus {
    guard(|| {
        let model = model
            .as_ref()
            .ok_or_else(|| Failure::new(SimfuseStatus::NullPointer, "`model` is NULL"))?;
        let out = out_arg(out, "out")?;
        let a = parse_sentence(str_arg(a, "a")?)?;
        let b = parse_sentence(str_arg(b, "b")?)?;
        let s = score_pair(&a, &b, &model.bundle)?;
        *out = SimfuseScores {
            jaccard: s.jaccard,
            w2vcnn: s.w2vcnn,
            tfidf: s.tfidf,
            fused: s.fused,
            similar: s.predicted,
        };
        Ok(())
    })
}

/// Fusion weights stored in the model.
///
/// # Safety
/// `model` must be a live model and `out` writable, or NULL.
#[no_mangle]
pub unsafe extern "C" fn simfuse_model_weights(
    model: *const SimfuseModel,
    out: *mut SimfuseWeights,
) -> SimfuseStatus {
    guard(|| {
        let model = model
            .as_ref()
            .ok_or_else(|| Failure::new(SimfuseStatus::NullPointer, "`model` is NULL"))?;
        *out_arg(out, "out")? = model.bundle.weights.into();
        Ok(())
    })
}

/// Softmax of three per-model metrics, in (Jaccard, CNN, TF-IDF) order.
///
/// # Safety
/// `out` must be writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn simfuse_calibrate_weights(
    metric_jaccard: f64,
    metric_w2vcnn: f64,
    metric_tfidf: f64,
    out: *mut SimfuseWeights,
) -> SimfuseStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if ![metric_jaccard, metric_w2vcnn, metric_tfidf]
            .iter()
            .all(|m| m.is_finite())
        {
            return Err(Failure::new(
                SimfuseStatus::InvalidArgument,
                "metrics must be finite",
            ));
        }
        *out = fusion::calibrate_weights(metric_jaccard, metric_w2vcnn, metric_tfidf).into();
        Ok(())
    })
}

/// Weighted sum of three scores, clamped to `[0, 1]`.
///
/// # Safety
/// `weights` must be readable and `out` writable, or NULL.
#[no_mangle]
pub unsafe extern "C" fn simfuse_fuse_weighted(
    jaccard: f64,
    w2vcnn: f64,
    tfidf: f64,
    weights: *const SimfuseWeights,
    out: *mut f64,
) -> SimfuseStatus {
    guard(|| {
        let w = weights
            .as_ref()
            .ok_or_else(|| Failure::new(SimfuseStatus::NullPointer, "`weights` is NULL"))?;
        let out = out_arg(out, "out")?;
        let weights = FusionWeights::new(w.alpha, w.beta, w.gamma)?;
        let scores = fusion::ScoreTriple {
            jaccard,
            w2vcnn,
            tfidf,
        };
        *out = fusion::fuse(scores, &weights, &fusion::FusionParams::weighted_sum())?;
        Ok(())
    })
}

/// True when `score` is at least as close to 1 as to 0.
#[no_mangle]
pub extern "C" fn simfuse_classify(score: f64) -> bool {
    fusion::classify(score)
}

/// Role-weighted Jaccard similarity of two sentences.
///
/// # Safety
/// `a` and `b` must be NUL-terminated strings and `out` writable, or NULL.
#[no_mangle]
pub unsafe extern "C" fn simfuse_jaccard(
    a: *const c_char,
    b: *const c_char,
    out: *mut f64,
) -> SimfuseStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let a = parse_sentence(str_arg(a, "a")?)?;
        let b = parse_sentence(str_arg(b, "b")?)?;
        *out = jaccard::jaccard_score(&a, &b);
        Ok(())
    })
}

/// Character-level Levenshtein distance.
///
/// # Safety
/// `a` and `b` must be NUL-terminated strings and `out` writable, or NULL.
#[no_mangle]
pub unsafe extern "C" fn simfuse_edit_distance(
    a: *const c_char,
    b: *const c_char,
    out: *mut usize,
) -> SimfuseStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = attention::edit_distance(str_arg(a, "a")?, str_arg(b, "b")?);
        Ok(())
    })
}
