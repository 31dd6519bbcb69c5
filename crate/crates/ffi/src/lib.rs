//! C ABI for the flowgen toolkit.
//!
//! Conventions:
//! - Handles (`FgDataset`, `FgModel`) are opaque; free them with the
//!   matching `fg_*_free` function, exactly once.
//! - Fallible calls return an [`FgStatus`]; outputs arrive through out
//!   pointers that are written only on `FG_OK`.
//! - After any non-OK status, `fg_last_error` returns a message for the
//!   calling thread, valid until that thread's next flowgen call.
//! - Strings returned as `char*` are owned by the caller and must be
//!   released with `fg_string_free`.
//!
//! Every entry point catches panics, so a bug in the library surfaces
//! as `FG_INTERNAL` instead of undefined behaviour across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use flowgen::dataset_io::{load_dataset, save_dataset};
use flowgen::harness::generate;
use flowgen::metrics::{dtw, evaluate_all, mmd2_rbf, wasserstein1, DtwDist, EvalOptions};
use flowgen::nn::{load_model, Checkpoint, Method};
use flowgen::ode::OdeMethod;
use flowgen::signal::{ConditionVector, LabeledDataset, MultiLeadSignal};
use flowgen::synth::{synth_dataset, SynthSpec};
use flowgen::Error;

/// Result code for every fallible call in this ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgStatus {
    /// Success.
    FgOk = 0,
    /// A required pointer argument was null or a string was not UTF-8.
    FgNullArgument = 1,
    /// Invalid arguments or configuration (mirrors CLI exit code 2).
    FgContract = 2,
    /// I/O failure or malformed file (mirrors CLI exit code 3).
    FgFormat = 3,
    /// A numeric quantity became non-finite (mirrors CLI exit code 4).
    FgNumeric = 4,
    /// Internal panic; report this as a bug.
    FgInternal = 5,
}

/// Conditional dataset handle: signals plus one condition per signal.
pub struct FgDataset {
    inner: LabeledDataset,
}

/// Trained generator handle, either flow-matching or diffusion.
pub struct FgModel {
    inner: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: Vec<u8> = msg.bytes().filter(|&b| b != 0).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> FgStatus {
    match err {
        Error::Contract(_) => FgStatus::FgContract,
        Error::Format(_) | Error::Io(_) => FgStatus::FgFormat,
        Error::NonFinite { .. } => FgStatus::FgNumeric,
    }
}

fn fail(err: &Error) -> FgStatus {
    set_error(&err.to_string());
    status_of(err)
}

/// Run `body` with panic containment; map panics to `FgInternal`.
fn guarded(body: impl FnOnce() -> FgStatus) -> FgStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal panic: {msg}"));
            FgStatus::FgInternal
        }
    }
}

/// # Safety
/// `ptr` must be null or a NUL-terminated C string.
unsafe fn required_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, FgStatus> {
    if ptr.is_null() {
        set_error(&format!("{what} must not be null"));
        return Err(FgStatus::FgNullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{what} must be valid UTF-8"));
        FgStatus::FgNullArgument
    })
}

fn null_check<T>(ptr: *const T, what: &str) -> Result<(), FgStatus> {
    if ptr.is_null() {
        set_error(&format!("{what} must not be null"));
        Err(FgStatus::FgNullArgument)
    } else {
        Ok(())
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread. The pointer is
/// valid until this thread's next flowgen call; copy it if you need to
/// keep it.
#[no_mangle]
pub extern "C" fn fg_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must have been returned by a flowgen call and not freed before.
#[no_mangle]
pub unsafe extern "C" fn fg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Generate a synthetic dataset from a JSON spec (the same schema the
/// `synth-data` CLI command reads).
///
/// # Safety
/// `spec_json` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fg_dataset_synth(
    spec_json: *const c_char,
    out: *mut *mut FgDataset,
) -> FgStatus {
    guarded(|| {
        let spec_json = match required_str(spec_json, "spec_json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        if let Err(status) = null_check(out, "out") {
            return status;
        }
        let spec: SynthSpec = match serde_json::from_str(spec_json) {
            Ok(s) => s,
            Err(e) => return fail(&Error::contract(format!("spec_json: {e}"))),
        };
        match synth_dataset(&spec) {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(FgDataset { inner: ds }));
                FgStatus::FgOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Load a dataset file written by this library or its CLI.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fg_dataset_load(
    path: *const c_char,
    out: *mut *mut FgDataset,
) -> FgStatus {
    guarded(|| {
        let path = match required_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        if let Err(status) = null_check(out, "out") {
            return status;
        }
        match load_dataset(PathBuf::from(path)) {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(FgDataset { inner: ds }));
                FgStatus::FgOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Write a dataset to disk in the library's binary format.
///
/// # Safety
/// `ds` must be a live dataset handle, `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fg_dataset_save(ds: *const FgDataset, path: *const c_char) -> FgStatus {
    guarded(|| {
        if let Err(status) = null_check(ds, "ds") {
            return status;
        }
        let path = match required_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match save_dataset(&(*ds).inner, PathBuf::from(path)) {
            Ok(()) => FgStatus::FgOk,
            Err(e) => fail(&e),
        }
    })
}

/// Number of signals; 0 if `ds` is null.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn fg_dataset_len(ds: *const FgDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    (*ds).inner.len()
}

/// Channels per signal; 0 if `ds` is null.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn fg_dataset_channels(ds: *const FgDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    (*ds).inner.channels()
}

/// Samples per channel; 0 if `ds` is null.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn fg_dataset_samples(ds: *const FgDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    (*ds).inner.samples()
}

/// Width of each condition vector; 0 if `ds` is null.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn fg_dataset_condition_dim(ds: *const FgDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    (*ds).inner.condition(0).dim()
}

/// Copy signal `index` into `out` as channel-major samples. `out_len`
/// must equal `channels * samples`.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` must point to at least
/// `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fg_dataset_signal(
    ds: *const FgDataset,
    index: usize,
    out: *mut f64,
    out_len: usize,
) -> FgStatus {
    guarded(|| {
        if let Err(status) = null_check(ds, "ds") {
            return status;
        }
        if let Err(status) = null_check(out, "out") {
            return status;
        }
        let inner = &(*ds).inner;
        if index >= inner.len() {
            return fail(&Error::contract(format!(
                "signal index {index} out of range for dataset of {}",
                inner.len()
            )));
        }
        let data = inner.signal(index).data();
        if out_len != data.len() {
            return fail(&Error::contract(format!(
                "out_len {out_len} does not match signal length {}",
                data.len()
            )));
        }
        std::ptr::copy_nonoverlapping(data.as_ptr(), out, data.len());
        FgStatus::FgOk
    })
}

/// Copy condition `index` into `out` as 0/1 bytes. `out_len` must equal
/// the dataset's condition width.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` must point to at least
/// `out_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn fg_dataset_condition(
    ds: *const FgDataset,
    index: usize,
    out: *mut u8,
    out_len: usize,
) -> FgStatus {
    guarded(|| {
        if let Err(status) = null_check(ds, "ds") {
            return status;
        }
        if let Err(status) = null_check(out, "out") {
            return status;
        }
        let inner = &(*ds).inner;
        if index >= inner.len() {
            return fail(&Error::contract(format!(
                "condition index {index} out of range for dataset of {}",
                inner.len()
            )));
        }
        let bits = inner.condition(index).bits();
        if out_len != bits.len() {
            return fail(&Error::contract(format!(
                "out_len {out_len} does not match condition width {}",
                bits.len()
            )));
        }
        std::ptr::copy_nonoverlapping(bits.as_ptr(), out, bits.len());
        FgStatus::FgOk
    })
}

/// Release a dataset handle. Null is a no-op.
///
/// # Safety
/// `ds` must have come from this library and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn fg_dataset_free(ds: *mut FgDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Load a model checkpoint written by the `train` CLI command.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fg_model_load(path: *const c_char, out: *mut *mut FgModel) -> FgStatus {
    guarded(|| {
        let path = match required_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        if let Err(status) = null_check(out, "out") {
            return status;
        }
        match load_model(PathBuf::from(path)) {
            Ok(ckpt) => {
                *out = Box::into_raw(Box::new(FgModel { inner: ckpt }));
                FgStatus::FgOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Training method of a checkpoint: 0 = flow matching, 1 = diffusion,
/// -1 if `model` is null.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn fg_model_method(model: *const FgModel) -> i32 {
    if model.is_null() {
        return -1;
    }
    match (*model).inner.method {
        Method::FlowMatching => 0,
        Method::Ddpm => 1,
    }
}

/// Condition width the model was trained with; 0 if `model` is null.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn fg_model_condition_dim(model: *const FgModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).inner.model.config().condition_dim
}

/// Draw `n` signals under an NFE budget. `conditions` is an `n x
/// condition_dim` row-major matrix of 0/1 bytes; `ode_method` is
/// "euler" or "midpoint" and is ignored by diffusion checkpoints.
///
/// # Safety
/// `model` must be a live model handle, `conditions` must point to
/// `n * condition_dim` bytes, `ode_method` must be a NUL-terminated
/// string, and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fg_model_sample(
    model: *const FgModel,
    conditions: *const u8,
    n: usize,
    condition_dim: usize,
    nfe: u32,
    seed: u64,
    ode_method: *const c_char,
    out: *mut *mut FgDataset,
) -> FgStatus {
    guarded(|| {
        if let Err(status) = null_check(model, "model") {
            return status;
        }
        if let Err(status) = null_check(conditions, "conditions") {
            return status;
        }
        if let Err(status) = null_check(out, "out") {
            return status;
        }
        let method = match required_str(ode_method, "ode_method") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let method = match OdeMethod::parse(method) {
            Ok(m) => m,
            Err(e) => return fail(&e),
        };
        if n == 0 {
            return fail(&Error::contract("n must be positive"));
        }
        let ckpt = &(*model).inner;
        let want = ckpt.model.config().condition_dim;
        if condition_dim != want {
            return fail(&Error::contract(format!(
                "condition_dim {condition_dim} does not match the checkpoint's {want}"
            )));
        }
        let raw = std::slice::from_raw_parts(conditions, n * condition_dim);
        let conds = match raw
            .chunks(condition_dim)
            .map(|row| ConditionVector::new(row.to_vec()))
            .collect::<flowgen::Result<Vec<_>>>()
        {
            Ok(c) => c,
            Err(e) => return fail(&e),
        };
        match generate(ckpt, &conds, method, nfe as usize, seed, 1) {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(FgDataset { inner: ds }));
                FgStatus::FgOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a model handle. Null is a no-op.
///
/// # Safety
/// `model` must have come from this library and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn fg_model_free(model: *mut FgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Score `generated` against `real` and return the report as a JSON
/// string (free it with `fg_string_free`). `opts_json` may be null for
/// default options; otherwise it uses the same schema as the
/// `evaluate` CLI command.
///
/// # Safety
/// `real` and `generated` must be live dataset handles, `opts_json`
/// null or a NUL-terminated string, `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fg_evaluate(
    real: *const FgDataset,
    generated: *const FgDataset,
    opts_json: *const c_char,
    out_json: *mut *mut c_char,
) -> FgStatus {
    guarded(|| {
        if let Err(status) = null_check(real, "real") {
            return status;
        }
        if let Err(status) = null_check(generated, "generated") {
            return status;
        }
        if let Err(status) = null_check(out_json, "out_json") {
            return status;
        }
        let opts = if opts_json.is_null() {
            EvalOptions::default()
        } else {
            let text = match required_str(opts_json, "opts_json") {
                Ok(s) => s,
                Err(status) => return status,
            };
            match serde_json::from_str(text) {
                Ok(o) => o,
                Err(e) => return fail(&Error::contract(format!("opts_json: {e}"))),
            }
        };
        match evaluate_all(&(*real).inner, &(*generated).inner, &opts) {
            Ok(report) => {
                let json = report.to_json();
                let c = CString::new(json.into_bytes()).expect("JSON has no NUL bytes");
                *out_json = c.into_raw();
                FgStatus::FgOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Dynamic-time-warping distance between two channel-major signals of
/// equal channel count. `dist` selects the local distance: 0 = squared
/// Euclidean, 1 = absolute.
///
/// # Safety
/// `a` must point to `a_channels * a_samples` doubles, `b` likewise,
/// and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fg_dtw(
    a: *const f64,
    a_channels: usize,
    a_samples: usize,
    b: *const f64,
    b_channels: usize,
    b_samples: usize,
    dist: i32,
    out: *mut f64,
) -> FgStatus {
    guarded(|| {
        if let Err(status) = null_check(a, "a") {
            return status;
        }
        if let Err(status) = null_check(b, "b") {
            return status;
        }
        if let Err(status) = null_check(out, "out") {
            return status;
        }
        let dist = match dist {
            0 => DtwDist::SqEuclidean,
            1 => DtwDist::Abs,
            other => {
                return fail(&Error::contract(format!(
                    "dist must be 0 (squared euclidean) or 1 (absolute), got {other}"
                )))
            }
        };
        let make = |ptr: *const f64, channels: usize, samples: usize| {
            let data = std::slice::from_raw_parts(ptr, channels * samples).to_vec();
            MultiLeadSignal::with_default_names(data, channels, samples, 1.0)
        };
        let sa = match make(a, a_channels, a_samples) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        let sb = match make(b, b_channels, b_samples) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        match dtw(&sa, &sb, dist) {
            Ok(v) => {
                *out = v;
                FgStatus::FgOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// One-dimensional 1-Wasserstein distance between two sample sets.
///
/// # Safety
/// `xs` must point to `nx` doubles, `ys` to `ny` doubles, and `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fg_wasserstein1(
    xs: *const f64,
    nx: usize,
    ys: *const f64,
    ny: usize,
    out: *mut f64,
) -> FgStatus {
    guarded(|| {
        if let Err(status) = null_check(xs, "xs") {
            return status;
        }
        if let Err(status) = null_check(ys, "ys") {
            return status;
        }
        if let Err(status) = null_check(out, "out") {
            return status;
        }
        let a = std::slice::from_raw_parts(xs, nx);
        let b = std::slice::from_raw_parts(ys, ny);
        match wasserstein1(a, b) {
            Ok(v) => {
                *out = v;
                FgStatus::FgOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Squared maximum mean discrepancy with an RBF kernel between two
/// sets of `dim`-dimensional vectors, both row-major. `bandwidth <= 0`
/// selects the median-heuristic bandwidth.
///
/// # Safety
/// `xs` must point to `nx * dim` doubles, `ys` to `ny * dim`, and
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fg_mmd2_rbf(
    xs: *const f64,
    nx: usize,
    ys: *const f64,
    ny: usize,
    dim: usize,
    bandwidth: f64,
    out: *mut f64,
) -> FgStatus {
    guarded(|| {
        if let Err(status) = null_check(xs, "xs") {
            return status;
        }
        if let Err(status) = null_check(ys, "ys") {
            return status;
        }
        if let Err(status) = null_check(out, "out") {
            return status;
        }
        if dim == 0 {
            return fail(&Error::contract("dim must be positive"));
        }
        let a: Vec<Vec<f64>> = std::slice::from_raw_parts(xs, nx * dim)
            .chunks(dim)
            .map(|c| c.to_vec())
            .collect();
        let b: Vec<Vec<f64>> = std::slice::from_raw_parts(ys, ny * dim)
            .chunks(dim)
            .map(|c| c.to_vec())
            .collect();
        let sigma = (bandwidth > 0.0).then_some(bandwidth);
        match mmd2_rbf(&a, &b, sigma) {
            Ok(v) => {
                *out = v;
                FgStatus::FgOk
            }
            Err(e) => fail(&e),
        }
    })
}
