//! C ABI for the `ghs` library.
//!
//! Every function is panic-safe: panics are caught at the boundary and
//! surfaced as [`GhsStatus::Panic`]. Failures of any kind store a
//! human-readable message retrievable with [`ghs_last_error`], which stays
//! valid until the next `ghs_*` call on the same thread.
//!
//! Models are passed around as opaque [`GhsModel`] pointers created by
//! [`ghs_train`] or [`ghs_model_load`] and released with [`ghs_model_free`].
//! Matrices cross the boundary as row-major `double` buffers; codes as
//! row-major `uint64_t` buffers with `ghs_model_code_words` words per row.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nalgebra::DMatrix;

use ghs::code::CodeMatrix;
use ghs::error::GhsError;
use ghs::model::Model;
use ghs::pipeline::{train_model, TrainMethod, TrainOptions};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GhsStatus {
    Ok = 0,
    /// A parameter value was rejected.
    InvalidArgument = 1,
    /// The operating system reported an I/O failure.
    Io = 2,
    /// A file's contents were malformed.
    Parse = 3,
    /// A numeric routine failed (singular system, degenerate data, ...).
    Numeric = 4,
    /// Two buffers or shapes disagreed.
    DimensionMismatch = 5,
    /// A required pointer was null.
    NullPointer = 6,
    /// An internal invariant failed; the library caught a panic.
    Panic = 7,
}

/// Training algorithm selector for [`ghs_train`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GhsMethod {
    /// Data-dependent quantization-loss training.
    Dd = 0,
    /// Data-independent sphere-spread training.
    Di = 1,
    /// Sign-random-projection baseline.
    Lsh = 2,
}

/// Options for [`ghs_train`]. Obtain defaults from
/// [`ghs_train_options_default`] and override selectively; zero or negative
/// values mean "use the default" for every tunable except `seed`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GhsTrainOptions {
    /// Code length in bits (>= 2).
    pub bits: u32,
    pub method: GhsMethod,
    /// Bits-per-dimension ratio; <= 0 picks the built-in default.
    pub rho: f64,
    /// Satellite sphere radius; <= 0 picks the default (2.0).
    pub r_s: f64,
    /// Explicit embedded dimension; 0 derives it from `rho`.
    pub dims: u32,
    /// Non-zero trains the embedding against `labels`.
    pub supervised: u8,
    /// Regularization for the supervised embedding; < 0 picks the default.
    pub cca_reg: f64,
    /// Iteration cap; 0 keeps the trainer default.
    pub max_iter: u32,
    /// Convergence window on the quantization loss; <= 0 keeps the default.
    pub epsilon: f64,
    /// RNG seed.
    pub seed: u64,
}

/// Opaque trained-model handle.
pub struct GhsModel {
    inner: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn clear_error() {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new("").unwrap();
    });
}

fn status_of(err: &GhsError) -> GhsStatus {
    match err {
        GhsError::EmptyInput(_) | GhsError::InvalidArgument(_) => GhsStatus::InvalidArgument,
        GhsError::Io { .. } => GhsStatus::Io,
        GhsError::Parse { .. } => GhsStatus::Parse,
        GhsError::DimensionMismatch { .. } => GhsStatus::DimensionMismatch,
        GhsError::NotSymmetric { .. }
        | GhsError::DegenerateQuadratic
        | GhsError::DegenerateData(_)
        | GhsError::Singular(_) => GhsStatus::Numeric,
    }
}

fn fail(err: GhsError) -> GhsStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn null_pointer(what: &str) -> GhsStatus {
    set_error(&format!("{what} must not be null"));
    GhsStatus::NullPointer
}

/// Runs `body` with panics converted to [`GhsStatus::Panic`].
fn guarded(body: impl FnOnce() -> GhsStatus) -> GhsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(&format!("internal panic: {msg}"));
            GhsStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be valid for `len` elements or `len` must be 0.
unsafe fn slice_from<'a, T>(ptr: *const T, len: usize) -> &'a [T] {
    if len == 0 {
        &[]
    } else {
        std::slice::from_raw_parts(ptr, len)
    }
}

unsafe fn path_from(ptr: *const c_char) -> Result<&'static Path, GhsStatus> {
    if ptr.is_null() {
        return Err(null_pointer("path"));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(GhsStatus::InvalidArgument)
        }
    }
}

/// Message describing the most recent failure on this thread, or an empty
/// string after a success. The pointer stays valid until the next `ghs_*`
/// call on the same thread.
#[no_mangle]
pub extern "C" fn ghs_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Fills `out` with the default training options for `bits`-bit codes.
#[no_mangle]
pub extern "C" fn ghs_train_options_default(bits: u32, out: *mut GhsTrainOptions) -> GhsStatus {
    guarded(|| {
        if out.is_null() {
            return null_pointer("out");
        }
        clear_error();
        unsafe {
            *out = GhsTrainOptions {
                bits,
                method: GhsMethod::Dd,
                rho: -1.0,
                r_s: -1.0,
                dims: 0,
                supervised: 0,
                cca_reg: -1.0,
                max_iter: 0,
                epsilon: -1.0,
                seed: 0,
            };
        }
        GhsStatus::Ok
    })
}

/// Trains a model on a row-major `rows x cols` matrix.
///
/// `labels` may be null unless `options->supervised` is set; when non-null it
/// must hold `rows` class indices. On success `*out_model` owns the model.
///
/// # Safety
/// `data` must point to `rows * cols` doubles; `labels`, when non-null, to
/// `rows` values.
#[no_mangle]
pub unsafe extern "C" fn ghs_train(
    data: *const f64,
    rows: usize,
    cols: usize,
    labels: *const u32,
    options: *const GhsTrainOptions,
    out_model: *mut *mut GhsModel,
) -> GhsStatus {
    guarded(|| {
        if data.is_null() {
            return null_pointer("data");
        }
        if options.is_null() {
            return null_pointer("options");
        }
        if out_model.is_null() {
            return null_pointer("out_model");
        }
        let opts_c = unsafe { &*options };
        let method = match opts_c.method {
            GhsMethod::Dd => TrainMethod::Dd,
            GhsMethod::Di => TrainMethod::Di,
            GhsMethod::Lsh => TrainMethod::Lsh,
        };
        let mut opts = TrainOptions::new(opts_c.bits as usize, method);
        if opts_c.rho > 0.0 {
            opts.rho = Some(opts_c.rho);
        }
        if opts_c.r_s > 0.0 {
            opts.r_s = opts_c.r_s;
        }
        if opts_c.dims > 0 {
            opts.dims = Some(opts_c.dims as usize);
        }
        opts.supervised = opts_c.supervised != 0;
        if opts_c.cca_reg >= 0.0 {
            opts.cca_reg = opts_c.cca_reg;
        }
        if opts_c.max_iter > 0 {
            opts.max_iter = Some(opts_c.max_iter as usize);
        }
        if opts_c.epsilon > 0.0 {
            opts.epsilon = Some(opts_c.epsilon);
        }
        opts.seed = opts_c.seed;

        let x = DMatrix::from_row_slice(rows, cols, unsafe { slice_from(data, rows * cols) });
        let label_vec: Option<Vec<usize>> = if labels.is_null() {
            None
        } else {
            Some(
                unsafe { slice_from(labels, rows) }
                    .iter()
                    .map(|&l| l as usize)
                    .collect(),
            )
        };

        match train_model(&x, label_vec.as_deref(), &opts) {
            Ok(trained) => {
                clear_error();
                unsafe {
                    *out_model = Box::into_raw(Box::new(GhsModel { inner: trained.model }));
                }
                GhsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Loads a model file. On success `*out_model` owns the model.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ghs_model_load(
    path: *const c_char,
    out_model: *mut *mut GhsModel,
) -> GhsStatus {
    guarded(|| {
        if out_model.is_null() {
            return null_pointer("out_model");
        }
        let path = match unsafe { path_from(path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        match Model::load(path) {
            Ok(model) => {
                clear_error();
                unsafe {
                    *out_model = Box::into_raw(Box::new(GhsModel { inner: model }));
                }
                GhsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Saves a model to a file.
///
/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ghs_model_save(
    model: *const GhsModel,
    path: *const c_char,
) -> GhsStatus {
    guarded(|| {
        if model.is_null() {
            return null_pointer("model");
        }
        let path = match unsafe { path_from(path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        match unsafe { &*model }.inner.save(path) {
            Ok(()) => {
                clear_error();
                GhsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a model handle. Null is a no-op.
///
/// # Safety
/// `model` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ghs_model_free(model: *mut GhsModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Code length in bits, or 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ghs_model_bits(model: *const GhsModel) -> u32 {
    if model.is_null() {
        0
    } else {
        unsafe { &*model }.inner.bits() as u32
    }
}

/// Expected descriptor width, or 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ghs_model_input_dim(model: *const GhsModel) -> u32 {
    if model.is_null() {
        0
    } else {
        unsafe { &*model }.inner.input_dim() as u32
    }
}

/// `uint64_t` words per code row, or 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ghs_model_code_words(model: *const GhsModel) -> u32 {
    if model.is_null() {
        0
    } else {
        unsafe { &*model }.inner.code_words() as u32
    }
}

/// Encodes a row-major `rows x cols` matrix into packed codes.
///
/// # Safety
/// `data` must point to `rows * cols` doubles and `out_codes` to
/// `rows * ghs_model_code_words(model)` words.
#[no_mangle]
pub unsafe extern "C" fn ghs_encode(
    model: *const GhsModel,
    data: *const f64,
    rows: usize,
    cols: usize,
    out_codes: *mut u64,
) -> GhsStatus {
    guarded(|| {
        if model.is_null() {
            return null_pointer("model");
        }
        if data.is_null() {
            return null_pointer("data");
        }
        if out_codes.is_null() {
            return null_pointer("out_codes");
        }
        let model = unsafe { &*model };
        let x = DMatrix::from_row_slice(rows, cols, unsafe { slice_from(data, rows * cols) });
        match model.inner.encode(&x) {
            Ok(codes) => {
                clear_error();
                let words = codes.words();
                unsafe {
                    std::ptr::copy_nonoverlapping(words.as_ptr(), out_codes, words.len());
                }
                GhsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Hamming distance between two packed rows of `words` words each.
///
/// # Safety
/// `a` and `b` must point to `words` words; `out_distance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ghs_hamming(
    a: *const u64,
    b: *const u64,
    words: usize,
    out_distance: *mut u32,
) -> GhsStatus {
    guarded(|| {
        if a.is_null() || b.is_null() {
            return null_pointer("code row");
        }
        if out_distance.is_null() {
            return null_pointer("out_distance");
        }
        let a = unsafe { slice_from(a, words) };
        let b = unsafe { slice_from(b, words) };
        match ghs::code::hamming(a, b) {
            Ok(d) => {
                clear_error();
                unsafe { *out_distance = d as u32 };
                GhsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Indices of the `k` base rows nearest a query in Hamming distance, ties by
/// ascending index. Writes at most `k` indices and stores the count actually
/// written in `*out_count`.
///
/// # Safety
/// `query` must point to `ceil(bits/64)` words, `base` to `n_base` such rows,
/// and `out_indices` to `k` entries.
#[no_mangle]
pub unsafe extern "C" fn ghs_topk(
    query: *const u64,
    base: *const u64,
    n_base: usize,
    bits: usize,
    k: usize,
    out_indices: *mut usize,
    out_count: *mut usize,
) -> GhsStatus {
    guarded(|| {
        if query.is_null() || base.is_null() {
            return null_pointer("code buffer");
        }
        if out_indices.is_null() || out_count.is_null() {
            return null_pointer("output buffer");
        }
        if bits == 0 {
            set_error("bits must be >= 1");
            return GhsStatus::InvalidArgument;
        }
        let words_per_row = bits.div_ceil(64);
        let query = unsafe { slice_from(query, words_per_row) };
        let base_words = unsafe { slice_from(base, n_base * words_per_row) };
        let base = match CodeMatrix::from_words(n_base, bits, base_words.to_vec()) {
            Ok(m) => m,
            Err(e) => return fail(e),
        };
        match ghs::code::rank_by_hamming(query, &base, k) {
            Ok(indices) => {
                clear_error();
                unsafe {
                    std::ptr::copy_nonoverlapping(indices.as_ptr(), out_indices, indices.len());
                    *out_count = indices.len();
                }
                GhsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn sample_data(rows: usize, cols: usize) -> Vec<f64> {
        // Deterministic, mildly structured data: two interleaved shifted
        // blobs, enough for every trainer to run.
        (0..rows * cols)
            .map(|i| {
                let row = i / cols;
                let base = if row % 2 == 0 { 1.0 } else { -1.0 };
                base + ((i * 2654435761) % 1000) as f64 / 1000.0 - 0.5
            })
            .collect()
    }

    fn options(bits: u32, method: GhsMethod) -> GhsTrainOptions {
        let mut opts = std::mem::MaybeUninit::<GhsTrainOptions>::uninit();
        let status = ghs_train_options_default(bits, opts.as_mut_ptr());
        assert_eq!(status, GhsStatus::Ok);
        let mut opts = unsafe { opts.assume_init() };
        opts.method = method;
        opts.max_iter = 5;
        opts
    }

    fn train(data: &[f64], rows: usize, cols: usize, opts: &GhsTrainOptions) -> *mut GhsModel {
        let mut model: *mut GhsModel = std::ptr::null_mut();
        let status = unsafe {
            ghs_train(data.as_ptr(), rows, cols, std::ptr::null(), opts, &mut model)
        };
        assert_eq!(status, GhsStatus::Ok, "{}", last_error_string());
        assert!(!model.is_null());
        model
    }

    fn last_error_string() -> String {
        unsafe { CStr::from_ptr(ghs_last_error()) }
            .to_string_lossy()
            .into_owned()
    }

    #[test]
    fn train_encode_topk_roundtrip() {
        let (rows, cols) = (120, 10);
        let data = sample_data(rows, cols);
        for method in [GhsMethod::Dd, GhsMethod::Di, GhsMethod::Lsh] {
            let opts = options(8, method);
            let model = train(&data, rows, cols, &opts);
            let bits = unsafe { ghs_model_bits(model) };
            assert_eq!(bits, 8);
            assert_eq!(unsafe { ghs_model_input_dim(model) }, 10);
            let words = unsafe { ghs_model_code_words(model) } as usize;
            assert_eq!(words, 1);

            let mut codes = vec![0u64; rows * words];
            let status = unsafe {
                ghs_encode(model, data.as_ptr(), rows, cols, codes.as_mut_ptr())
            };
            assert_eq!(status, GhsStatus::Ok, "{}", last_error_string());

            // Every code must fit in `bits` bits.
            assert!(codes.iter().all(|w| *w < (1 << 8)));

            // Top-k against the base: the query is base row 0, so index 0
            // must rank first with distance 0.
            let mut indices = vec![0usize; 5];
            let mut count = 0usize;
            let status = unsafe {
                ghs_topk(
                    codes.as_ptr(),
                    codes.as_ptr(),
                    rows,
                    bits as usize,
                    5,
                    indices.as_mut_ptr(),
                    &mut count,
                )
            };
            assert_eq!(status, GhsStatus::Ok, "{}", last_error_string());
            assert_eq!(count, 5);
            assert_eq!(indices[0], 0);

            let mut dist = 0u32;
            let status = unsafe {
                ghs_hamming(codes.as_ptr(), codes[words..].as_ptr(), words, &mut dist)
            };
            assert_eq!(status, GhsStatus::Ok);
            let ones = (codes[0] ^ codes[words]).count_ones();
            assert_eq!(dist, ones);

            unsafe { ghs_model_free(model) };
        }
    }

    #[test]
    fn save_load_through_the_boundary() {
        let (rows, cols) = (80, 6);
        let data = sample_data(rows, cols);
        let opts = options(4, GhsMethod::Dd);
        let model = train(&data, rows, cols, &opts);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ghs");
        let c_path = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(
            unsafe { ghs_model_save(model, c_path.as_ptr()) },
            GhsStatus::Ok
        );

        let mut loaded: *mut GhsModel = std::ptr::null_mut();
        assert_eq!(
            unsafe { ghs_model_load(c_path.as_ptr(), &mut loaded) },
            GhsStatus::Ok
        );
        // Same codes from the original and the reloaded model.
        let words = unsafe { ghs_model_code_words(model) } as usize;
        let mut c1 = vec![0u64; rows * words];
        let mut c2 = vec![0u64; rows * words];
        unsafe {
            assert_eq!(
                ghs_encode(model, data.as_ptr(), rows, cols, c1.as_mut_ptr()),
                GhsStatus::Ok
            );
            assert_eq!(
                ghs_encode(loaded, data.as_ptr(), rows, cols, c2.as_mut_ptr()),
                GhsStatus::Ok
            );
        }
        assert_eq!(c1, c2);
        unsafe {
            ghs_model_free(model);
            ghs_model_free(loaded);
        }
    }

    #[test]
    fn errors_set_status_and_message() {
        // Null pointers.
        let mut model: *mut GhsModel = std::ptr::null_mut();
        let opts = options(8, GhsMethod::Dd);
        let status = unsafe {
            ghs_train(std::ptr::null(), 4, 4, std::ptr::null(), &opts, &mut model)
        };
        assert_eq!(status, GhsStatus::NullPointer);
        assert!(last_error_string().contains("null"));

        // Training rejects impossible shapes (2 points cannot support an
        // 8-bit constellation).
        let tiny = sample_data(2, 4);
        let status = unsafe {
            ghs_train(tiny.as_ptr(), 2, 4, std::ptr::null(), &opts, &mut model)
        };
        assert_eq!(status, GhsStatus::InvalidArgument, "{}", last_error_string());
        assert!(!last_error_string().is_empty());

        // Loading a missing file reports Io.
        let c_path = CString::new("/nonexistent/ghs/model.bin").unwrap();
        let status = unsafe { ghs_model_load(c_path.as_ptr(), &mut model) };
        assert_eq!(status, GhsStatus::Io);

        // Mismatched hamming widths report DimensionMismatch via from_words
        // validation in topk (pad bits set).
        let bad_words = [u64::MAX];
        let mut indices = [0usize; 1];
        let mut count = 0usize;
        let status = unsafe {
            ghs_topk(
                bad_words.as_ptr(),
                bad_words.as_ptr(),
                1,
                8,
                1,
                indices.as_mut_ptr(),
                &mut count,
            )
        };
        assert_ne!(status, GhsStatus::Ok);

        // Null model accessors degrade to zero.
        unsafe {
            assert_eq!(ghs_model_bits(std::ptr::null()), 0);
            assert_eq!(ghs_model_input_dim(std::ptr::null()), 0);
            assert_eq!(ghs_model_code_words(std::ptr::null()), 0);
        }
    }

    #[test]
    fn labels_flow_through_supervised_training() {
        let (rows, cols) = (90, 8);
        let data = sample_data(rows, cols);
        let labels: Vec<u32> = (0..rows as u32).map(|i| i % 3).collect();
        let mut opts = options(4, GhsMethod::Dd);
        opts.supervised = 1;
        let mut model: *mut GhsModel = std::ptr::null_mut();
        let status = unsafe {
            ghs_train(data.as_ptr(), rows, cols, labels.as_ptr(), &opts, &mut model)
        };
        assert_eq!(status, GhsStatus::Ok, "{}", last_error_string());
        assert_eq!(unsafe { ghs_model_bits(model) }, 4);
        unsafe { ghs_model_free(model) };

        // Supervised without labels fails cleanly.
        let status = unsafe {
            ghs_train(data.as_ptr(), rows, cols, std::ptr::null(), &opts, &mut model)
        };
        assert_eq!(status, GhsStatus::InvalidArgument);
    }
}
