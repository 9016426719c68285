//! C ABI over the facetrec library.
//!
//! Every fallible function returns an [`FrStatus`]. On failure the message
//! is kept per thread and can be read with [`fr_last_error_message`] until
//! the next failing call on the same thread. Objects are opaque handles
//! created by `*_load` / `*_default` and released by the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::LazyLock;

use facetrec::cli::config::Overrides;
use facetrec::inventory::{Domain, Facet, InventoryResponse, ScoringKey};
use facetrec::models::TrainedModel;

/// Number of values written by [`fr_score_inventory`]: 5 domains then 10 facets.
pub const FR_SCORE_COUNT: usize = 15;
/// Number of responses in one inventory.
pub const FR_ITEM_COUNT: usize = 44;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Validation = 3,
    Config = 4,
    Parse = 5,
    Data = 6,
    Training = 7,
    Dimension = 8,
    Io = 9,
    Panic = 10,
}

pub struct FrScoringKey(ScoringKey);

pub struct FrModel(TrainedModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(FrStatus, String);

impl From<facetrec::Error> for Failure {
    fn from(e: facetrec::Error) -> Self {
        let status = match e.class() {
            "validation" => FrStatus::Validation,
            "config" => FrStatus::Config,
            "parse" => FrStatus::Parse,
            "training" => FrStatus::Training,
            "dimension" => FrStatus::Dimension,
            "io" => FrStatus::Io,
            _ => FrStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FrStatus::NullPointer, format!("{what} is NULL"))
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard<F>(f: F) -> FrStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FrStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {message}"));
            FrStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be NULL or a NUL-terminated string.
unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure(FrStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

/// # Safety
/// `p` must be NULL or valid for `len` reads; NULL is allowed when `len` is 0.
unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fr_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version contains NUL"),
        };
    VERSION.as_ptr()
}

/// Message of the last failure on this thread, or NULL if none. Owned by the
/// library; valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn fr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

static SCORE_NAMES: LazyLock<Vec<CString>> = LazyLock::new(|| {
    Domain::ALL
        .iter()
        .map(|d| d.name())
        .chain(Facet::ALL.iter().map(|f| f.name()))
        .map(|n| CString::new(n).expect("names have no NUL"))
        .collect()
});

/// Name of score column `index` (0..FR_SCORE_COUNT), or NULL when out of range.
#[no_mangle]
pub extern "C" fn fr_score_name(index: usize) -> *const c_char {
    SCORE_NAMES.get(index).map_or(ptr::null(), |c| c.as_ptr())
}

/// Creates a handle to the built-in BFI-44 scoring key.
///
/// # Safety
/// `out` must be NULL or valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn fr_scoring_key_default(out: *mut *mut FrScoringKey) -> FrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let key = Box::new(FrScoringKey(ScoringKey::bfi44_default()));
        unsafe { *out = Box::into_raw(key) };
        Ok(())
    })
}

/// Loads a scoring key from a TOML file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn fr_scoring_key_load(
    path: *const c_char,
    out: *mut *mut FrScoringKey,
) -> FrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = unsafe { path_arg(path, "path") }?;
        let key = facetrec::inventory::load_scoring_key(path)?;
        unsafe { *out = Box::into_raw(Box::new(FrScoringKey(key))) };
        Ok(())
    })
}

/// # Safety
/// `key` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fr_scoring_key_free(key: *mut FrScoringKey) {
    if !key.is_null() {
        drop(unsafe { Box::from_raw(key) });
    }
}

/// Scores one inventory of `len` (= FR_ITEM_COUNT) responses into `out`,
/// which must hold at least FR_SCORE_COUNT doubles.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn fr_score_inventory(
    key: *const FrScoringKey,
    responses: *const i32,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> FrStatus {
    guard(|| {
        let key = unsafe { key.as_ref() }.ok_or_else(|| null("key"))?;
        let responses = unsafe { slice_arg(responses, len, "responses") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        if out_len < FR_SCORE_COUNT {
            return Err(Failure(
                FrStatus::InvalidArgument,
                format!("out holds {out_len} values, need {FR_SCORE_COUNT}"),
            ));
        }
        let resp = InventoryResponse::new(responses.to_vec())?;
        let scores = facetrec::inventory::score_inventory(&resp, &key.0)?;
        let out = unsafe { std::slice::from_raw_parts_mut(out, FR_SCORE_COUNT) };
        out[..5].copy_from_slice(&scores.domains);
        out[5..].copy_from_slice(&scores.facets);
        Ok(())
    })
}

/// Loads a model file written by `facetrec train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn fr_model_load(path: *const c_char, out: *mut *mut FrModel) -> FrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = unsafe { path_arg(path, "path") }?;
        let model = TrainedModel::load(path)?;
        unsafe { *out = Box::into_raw(Box::new(FrModel(model))) };
        Ok(())
    })
}

/// Feature dimension the model expects, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fr_model_dim(model: *const FrModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.0.dim)
}

/// Predicts `n_rows` row-major feature rows of width `dim`. Writes 0/1 labels
/// to `labels_out` and, when `scores_out` is not NULL, positive-class scores.
///
/// # Safety
/// `rows` must hold `n_rows * dim` doubles; outputs must hold `n_rows` values.
#[no_mangle]
pub unsafe extern "C" fn fr_model_predict(
    model: *const FrModel,
    rows: *const f64,
    n_rows: usize,
    dim: usize,
    labels_out: *mut u8,
    scores_out: *mut f64,
) -> FrStatus {
    guard(|| {
        let model = unsafe { model.as_ref() }.ok_or_else(|| null("model"))?;
        let total = n_rows
            .checked_mul(dim)
            .ok_or_else(|| Failure(FrStatus::InvalidArgument, "n_rows * dim overflows".into()))?;
        let flat = unsafe { slice_arg(rows, total, "rows") }?;
        if n_rows > 0 && labels_out.is_null() {
            return Err(null("labels_out"));
        }
        let rows: Vec<Vec<f64>> = if dim == 0 {
            vec![Vec::new(); n_rows]
        } else {
            flat.chunks(dim).map(<[f64]>::to_vec).collect()
        };
        let p = facetrec::models::predict(&model.0, &rows)?;
        for (i, (&label, &score)) in p.labels.iter().zip(&p.scores).enumerate() {
            unsafe {
                *labels_out.add(i) = u8::from(label);
                if !scores_out.is_null() {
                    *scores_out.add(i) = score;
                }
            }
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fr_model_free(model: *mut FrModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Macro-F1 of two 0/1 label arrays (any nonzero byte counts as 1).
///
/// # Safety
/// `gold` and `predicted` must hold `len` bytes; `out` one double.
#[no_mangle]
pub unsafe extern "C" fn fr_f1_macro(
    gold: *const u8,
    predicted: *const u8,
    len: usize,
    out: *mut f64,
) -> FrStatus {
    guard(|| {
        let gold: Vec<bool> = unsafe { slice_arg(gold, len, "gold") }?
            .iter()
            .map(|&b| b != 0)
            .collect();
        let predicted: Vec<bool> = unsafe { slice_arg(predicted, len, "predicted") }?
            .iter()
            .map(|&b| b != 0)
            .collect();
        if out.is_null() {
            return Err(null("out"));
        }
        let f1 = facetrec::eval::f1_macro(&gold, &predicted)?;
        unsafe { *out = f1 };
        Ok(())
    })
}

/// Runs the experiment described by a config file, like `facetrec run`.
/// `out_dir` overrides the config's output directory when not NULL. When
/// `report_csv` is not NULL it receives the report CSV, to be released with
/// [`fr_string_free`].
///
/// # Safety
/// String arguments must be NULL or NUL-terminated; `report_csv` must be
/// NULL or valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn fr_run_experiment(
    config_path: *const c_char,
    out_dir: *const c_char,
    report_csv: *mut *mut c_char,
) -> FrStatus {
    guard(|| {
        let config = unsafe { path_arg(config_path, "config_path") }?;
        let out = if out_dir.is_null() {
            None
        } else {
            Some(unsafe { path_arg(out_dir, "out_dir") }?)
        };
        let ov = Overrides {
            out,
            ..Default::default()
        };
        let output = facetrec::cli::run_config(&config, &ov)?;
        if !report_csv.is_null() {
            let c = CString::new(output.csv)
                .map_err(|_| Failure(FrStatus::Data, "report contains NUL".into()))?;
            unsafe { *report_csv = c.into_raw() };
        }
        Ok(())
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
