//! C ABI over `odxu-core`.
//!
//! Every fallible call returns an [`OdxuStatus`]. On failure the message is
//! kept per thread and can be read with [`odxu_last_error_message`].
//! Handles are opaque; free them with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ndarray::Array2;
use odxu_core::checkpoint::Bundle;
use odxu_core::config::Config;
use odxu_core::dataio::{self, Dataset, PayloadRecord};
use odxu_core::uq::{self, Recipe};
use odxu_core::{eval, nn, pipeline, OdxuError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdxuStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Checkpoint = 5,
    MissingSection = 6,
    DimensionMismatch = 7,
    BufferTooSmall = 8,
    Runtime = 9,
    Panic = 10,
}

/// Opaque dataset handle.
pub struct OdxuDataset(Dataset);

/// Opaque model bundle handle.
pub struct OdxuBundle(Bundle);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(OdxuStatus, String);

impl From<OdxuError> for Failure {
    fn from(e: OdxuError) -> Self {
        let status = match &e {
            OdxuError::Stage { source, .. } => Failure::from_ref(source),
            other => Failure::from_ref(other),
        };
        Failure(status, e.to_string())
    }
}

impl Failure {
    fn from_ref(e: &OdxuError) -> OdxuStatus {
        match e {
            OdxuError::InvalidInput(_)
            | OdxuError::UnknownClass(_)
            | OdxuError::ClassOutOfRange { .. }
            | OdxuError::InvalidScenario(_)
            | OdxuError::Config(_) => OdxuStatus::InvalidArgument,
            OdxuError::MalformedRow { .. } | OdxuError::Csv(_) | OdxuError::Json(_) => OdxuStatus::Parse,
            OdxuError::DimensionMismatch { .. } | OdxuError::MetamodelMismatch(_) => OdxuStatus::DimensionMismatch,
            OdxuError::MissingSection(_) => OdxuStatus::MissingSection,
            OdxuError::Checkpoint(_) => OdxuStatus::Checkpoint,
            OdxuError::Io(_) => OdxuStatus::Io,
            OdxuError::Stage { source, .. } => Failure::from_ref(source),
            _ => OdxuStatus::Runtime,
        }
    }

    fn null(what: &str) -> Self {
        Failure(OdxuStatus::NullPointer, format!("`{what}` is null"))
    }

    fn arg(msg: impl Into<String>) -> Self {
        Failure(OdxuStatus::InvalidArgument, msg.into())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OdxuStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OdxuStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            OdxuStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::arg(format!("`{what}` is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, cap: usize, need: usize) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::null("out"));
    }
    if cap < need {
        return Err(Failure(
            OdxuStatus::BufferTooSmall,
            format!("output buffer holds {cap} values, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn write_out<T>(p: *mut T, value: T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::null("out"));
    }
    p.write(value);
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

fn single_record(payload: &[u8]) -> Dataset {
    let (rec, _) = PayloadRecord::from_raw(payload, "");
    Dataset::new(vec![rec])
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn odxu_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Number of payload bytes per record.
#[no_mangle]
pub extern "C" fn odxu_payload_len() -> usize {
    dataio::PAYLOAD_LEN
}

/// Generates a labelled synthetic dataset.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn odxu_dataset_synth(
    n_classes: usize,
    per_class: usize,
    overlap: f64,
    seed: u64,
    out: *mut *mut OdxuDataset,
) -> OdxuStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let ds = dataio::synth_generate(n_classes, per_class, overlap, seed)?;
        write_out(out, Box::into_raw(Box::new(OdxuDataset(ds))))
    })
}

/// Loads a dataset from CSV or the binary cache format.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn odxu_dataset_load(path: *const c_char, out: *mut *mut OdxuDataset) -> OdxuStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let ds = dataio::load_any(path)?;
        write_out(out, Box::into_raw(Box::new(OdxuDataset(ds))))
    })
}

/// Writes a dataset; the format follows the file extension.
///
/// # Safety
/// `ds` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn odxu_dataset_save(ds: *const OdxuDataset, path: *const c_char) -> OdxuStatus {
    guard(|| {
        let ds = handle(ds, "ds")?;
        let path = path_arg(path, "path")?;
        dataio::save_any(&ds.0, path)?;
        Ok(())
    })
}

/// Number of records; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn odxu_dataset_len(ds: *const OdxuDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// Number of distinct class labels; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn odxu_dataset_n_classes(ds: *const OdxuDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.class_table().len())
}

/// Copies the raw payload bytes of record `index` into `out`.
///
/// # Safety
/// `ds` must come from this library; `out` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn odxu_dataset_payload(ds: *const OdxuDataset, index: usize, out: *mut u8, cap: usize) -> OdxuStatus {
    guard(|| {
        let ds = handle(ds, "ds")?;
        let rec = ds
            .0
            .records()
            .get(index)
            .ok_or_else(|| Failure::arg(format!("record {index} out of range")))?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let raw = rec.raw_bytes();
        if cap < raw.len() {
            return Err(Failure(OdxuStatus::BufferTooSmall, format!("{} bytes needed", raw.len())));
        }
        std::slice::from_raw_parts_mut(out, raw.len()).copy_from_slice(&raw);
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn odxu_dataset_free(ds: *mut OdxuDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Loads a model bundle written by the pipeline.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn odxu_bundle_load(path: *const c_char, out: *mut *mut OdxuBundle) -> OdxuStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let b = Bundle::load(path)?;
        write_out(out, Box::into_raw(Box::new(OdxuBundle(b))))
    })
}

/// # Safety
/// `b` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn odxu_bundle_free(b: *mut OdxuBundle) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// Width of the encoder output.
///
/// # Safety
/// `b` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn odxu_bundle_latent_dim(b: *const OdxuBundle, out: *mut usize) -> OdxuStatus {
    guard(|| {
        let ae = handle(b, "bundle")?.0.require_ae()?;
        write_out(out, ae.latent_dim())
    })
}

/// Number of classes the classifier predicts.
///
/// # Safety
/// `b` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn odxu_bundle_n_classes(b: *const OdxuBundle, out: *mut usize) -> OdxuStatus {
    guard(|| {
        let clf = handle(b, "bundle")?.0.require_clf()?;
        write_out(out, clf.model.n_classes())
    })
}

/// Copies the NUL-terminated name of class `index` into `buf`.
///
/// # Safety
/// `b` must come from this library; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn odxu_bundle_class_name(b: *const OdxuBundle, index: usize, buf: *mut c_char, cap: usize) -> OdxuStatus {
    guard(|| {
        let clf = handle(b, "bundle")?.0.require_clf()?;
        let name = clf
            .labels
            .names()
            .get(index)
            .ok_or_else(|| Failure::arg(format!("class {index} out of range")))?;
        if buf.is_null() {
            return Err(Failure::null("buf"));
        }
        let bytes = name.as_bytes();
        if cap < bytes.len() + 1 {
            return Err(Failure(OdxuStatus::BufferTooSmall, format!("{} bytes needed", bytes.len() + 1)));
        }
        let dst = std::slice::from_raw_parts_mut(buf as *mut u8, bytes.len() + 1);
        dst[..bytes.len()].copy_from_slice(bytes);
        dst[bytes.len()] = 0;
        Ok(())
    })
}

/// Encodes one raw payload into its latent vector.
///
/// # Safety
/// `payload` must hold `len` bytes; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn odxu_bundle_encode(
    b: *const OdxuBundle,
    payload: *const u8,
    len: usize,
    out: *mut f64,
    cap: usize,
) -> OdxuStatus {
    guard(|| {
        let ae = handle(b, "bundle")?.0.require_ae()?;
        let payload = slice_arg(payload, len, "payload")?;
        let z = nn::encode(ae, &single_record(payload));
        let dst = out_slice(out, cap, z.ncols())?;
        dst.copy_from_slice(z.row(0).as_slice().expect("row-major"));
        Ok(())
    })
}

fn latents(bundle: &Bundle, payload: &[u8]) -> Result<Array2<f64>, Failure> {
    let ae = bundle.require_ae()?;
    Ok(nn::encode(ae, &single_record(payload)))
}

/// Class probabilities for one raw payload.
///
/// # Safety
/// `payload` must hold `len` bytes; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn odxu_bundle_predict_proba(
    b: *const OdxuBundle,
    payload: *const u8,
    len: usize,
    out: *mut f64,
    cap: usize,
) -> OdxuStatus {
    guard(|| {
        let bundle = &handle(b, "bundle")?.0;
        let clf = bundle.require_clf()?;
        let z = latents(bundle, slice_arg(payload, len, "payload")?)?;
        let p = clf.model.predict_proba(z.row(0).as_slice().expect("row-major"))?;
        out_slice(out, cap, p.len())?.copy_from_slice(&p);
        Ok(())
    })
}

/// Metamodel estimate that the classifier errs on one raw payload.
/// `recipe` is one of `prob`, `shap` or `ig`.
///
/// # Safety
/// `recipe` must be NUL-terminated; `payload` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn odxu_bundle_meta_score(
    b: *const OdxuBundle,
    recipe: *const c_char,
    payload: *const u8,
    len: usize,
    out: *mut f64,
) -> OdxuStatus {
    guard(|| {
        let bundle = &handle(b, "bundle")?.0;
        let recipe: Recipe = path_arg(recipe, "recipe")?
            .to_string_lossy()
            .parse()
            .map_err(|e: OdxuError| Failure::arg(e.to_string()))?;
        let meta = bundle.require_meta(recipe)?;
        let clf = bundle.require_clf()?;
        let z = latents(bundle, slice_arg(payload, len, "payload")?)?;
        let scores = uq::meta_score(meta, &clf.model, z.view())?;
        write_out(out, scores[0])
    })
}

/// Gap between the two largest probabilities.
///
/// # Safety
/// `probs` must hold `k` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn odxu_uq_confidence(probs: *const f64, k: usize, out: *mut f64) -> OdxuStatus {
    guard(|| {
        let s = uq::confidence(slice_arg(probs, k, "probs")?)?;
        write_out(out, s.value)
    })
}

/// Shannon entropy in nats.
///
/// # Safety
/// `probs` must hold `k` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn odxu_uq_entropy(probs: *const f64, k: usize, out: *mut f64) -> OdxuStatus {
    guard(|| {
        let s = uq::entropy(slice_arg(probs, k, "probs")?)?;
        write_out(out, s.value)
    })
}

unsafe fn binary_labels(labels: *const u8, n: usize) -> Result<Vec<bool>, Failure> {
    Ok(slice_arg(labels, n, "labels")?.iter().map(|&l| l != 0).collect())
}

/// Area under the ROC curve; higher scores should mean positive.
///
/// # Safety
/// `scores` and `labels` must hold `n` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn odxu_eval_auroc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> OdxuStatus {
    guard(|| {
        let s = slice_arg(scores, n, "scores")?;
        let l = binary_labels(labels, n)?;
        write_out(out, eval::auroc(s, &l)?)
    })
}

/// True-positive rate at the threshold that keeps `tn_target` of negatives.
///
/// # Safety
/// `scores` and `labels` must hold `n` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn odxu_eval_tp_at_tn(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    tn_target: f64,
    out: *mut f64,
) -> OdxuStatus {
    guard(|| {
        let s = slice_arg(scores, n, "scores")?;
        let l = binary_labels(labels, n)?;
        write_out(out, eval::tp_at_tn(s, &l, tn_target)?)
    })
}

/// Runs the full pipeline. `config_path` may be null for defaults.
///
/// # Safety
/// Both strings must be NUL-terminated when non-null.
#[no_mangle]
pub unsafe extern "C" fn odxu_pipeline_run(config_path: *const c_char, out_dir: *const c_char) -> OdxuStatus {
    guard(|| {
        let cfg = if config_path.is_null() {
            Config::default()
        } else {
            Config::load(path_arg(config_path, "config_path")?)?
        };
        cfg.validate()?;
        let out = path_arg(out_dir, "out_dir")?;
        pipeline::run_pipeline(&cfg, &out)?;
        Ok(())
    })
}
