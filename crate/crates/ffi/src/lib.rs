//! C interface to `dsparse`.
//!
//! Dictionaries and sample sets cross the boundary as opaque handles that
//! the caller releases with the matching `*_free` function. Every fallible
//! call returns a [`DsStatus`]; on failure a description is available from
//! [`ds_last_error_message`] on the same thread. Matrices are exchanged as
//! row-major `double` buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;

use dsparse::descent::{self, DescentConfig, FixedBatch, SupportMask};
use dsparse::harness::DEFAULT_P1_CAP;
use dsparse::init::{self, InitConfig};
use dsparse::model::{self, CoeffLaw, Structure};
use dsparse::{eval, rng, Dictionary, Error, GenerativeConfig, SampleSet};
use ndarray::Array2;

const ALGO_STREAM: u64 = 0xa160;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NoConvergence = 4,
    Incomplete = 5,
    NonFinite = 6,
    GenerationFailure = 7,
    Io = 8,
    Parse = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStructure {
    BlockDiagonal = 0,
    RandomSparse = 1,
    Identity = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsCoeffLaw {
    Rademacher = 0,
    UniformSigned = 1,
}

/// Generative model parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DsModelConfig {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub r: usize,
    pub sigma_eps: f64,
    pub coeff_min: f64,
    pub tau_floor: f64,
    pub structure: DsStructure,
    pub coeff_law: DsCoeffLaw,
    pub seed: u64,
}

/// Metrics from [`ds_evaluate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DsEvalReport {
    pub fro_error: f64,
    pub max_col_error: f64,
    pub spectral_ratio: f64,
    pub support_exact_frac: f64,
    pub recovered: bool,
    pub threshold_used: f64,
}

/// Opaque dictionary handle.
pub struct DsDictionary(Dictionary);

/// Opaque sample set handle.
pub struct DsSampleSet(SampleSet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DsStatus {
    match e {
        Error::Config(_) => DsStatus::InvalidArgument,
        Error::GenerationFailure { .. } => DsStatus::GenerationFailure,
        Error::DimensionMismatch(_) => DsStatus::DimensionMismatch,
        Error::NoConvergence { .. } => DsStatus::NoConvergence,
        Error::Incomplete { .. } => DsStatus::Incomplete,
        Error::NonFinite { .. } => DsStatus::NonFinite,
        Error::Io { .. } => DsStatus::Io,
        Error::Parse(_) => DsStatus::Parse,
    }
}

struct Fail(DsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(DsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DsStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            DsStatus::Panic
        }
    }
}

impl From<&DsModelConfig> for GenerativeConfig {
    fn from(c: &DsModelConfig) -> Self {
        GenerativeConfig {
            n: c.n,
            m: c.m,
            k: c.k,
            r: c.r,
            sigma_eps: c.sigma_eps,
            coeff_min: c.coeff_min,
            tau_floor: c.tau_floor,
            structure: match c.structure {
                DsStructure::BlockDiagonal => Structure::BlockDiagonal,
                DsStructure::RandomSparse => Structure::RandomSparse,
                DsStructure::Identity => Structure::Identity,
            },
            coeff_law: match c.coeff_law {
                DsCoeffLaw::Rademacher => CoeffLaw::Rademacher,
                DsCoeffLaw::UniformSigned => CoeffLaw::UniformSigned,
            },
            seed: c.seed,
        }
    }
}

unsafe fn model_from(cfg: *const DsModelConfig) -> Result<GenerativeConfig, Fail> {
    let cfg = cfg.as_ref().ok_or_else(|| null("config"))?;
    let model = GenerativeConfig::from(cfg);
    model.validate()?;
    Ok(model)
}

unsafe fn matrix_from(data: *const f64, rows: usize, cols: usize) -> Result<Array2<f64>, Fail> {
    if data.is_null() {
        return Err(null("data"));
    }
    if rows == 0 || cols == 0 {
        return Err(Fail(DsStatus::InvalidArgument, "matrix dimensions must be positive".into()));
    }
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Fail(DsStatus::InvalidArgument, "matrix size overflows".into()))?;
    let values = std::slice::from_raw_parts(data, len).to_vec();
    Ok(Array2::from_shape_vec((rows, cols), values).expect("length checked"))
}

fn boxed<T>(out: *mut *mut T, value: T) {
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

fn default_init(model: &GenerativeConfig, p: usize) -> InitConfig {
    let p1 = DEFAULT_P1_CAP.min(p / 2);
    InitConfig::for_model(model, p1, p - p1)
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ds_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ds_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fills `out` with the 64x64 block-diagonal benchmark model.
///
/// # Safety
/// `out` must be null or point to writable memory for one `DsModelConfig`.
#[no_mangle]
pub unsafe extern "C" fn ds_model_config_benchmark(out: *mut DsModelConfig) -> DsStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let b = GenerativeConfig::block_benchmark();
        *out = DsModelConfig {
            n: b.n,
            m: b.m,
            k: b.k,
            r: b.r,
            sigma_eps: b.sigma_eps,
            coeff_min: b.coeff_min,
            tau_floor: b.tau_floor,
            structure: DsStructure::BlockDiagonal,
            coeff_law: DsCoeffLaw::Rademacher,
            seed: b.seed,
        };
        Ok(())
    })
}

/// Generates the ground-truth dictionary described by `cfg`.
///
/// # Safety
/// `cfg` must point to a valid config and `out` to writable handle storage.
#[no_mangle]
pub unsafe extern "C" fn ds_dictionary_generate(
    cfg: *const DsModelConfig,
    out: *mut *mut DsDictionary,
) -> DsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = model_from(cfg)?;
        boxed(out, DsDictionary(model::generate_dictionary(&model)?));
        Ok(())
    })
}

/// Wraps a row-major `n x m` buffer as a dictionary.
///
/// # Safety
/// `data` must point to `n * m` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_dictionary_from_array(
    data: *const f64,
    n: usize,
    m: usize,
    out: *mut *mut DsDictionary,
) -> DsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = matrix_from(data, n, m)?;
        boxed(out, DsDictionary(Dictionary::from_matrix(a)));
        Ok(())
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `dict` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_dictionary_rows(dict: *const DsDictionary) -> usize {
    dict.as_ref().map_or(0, |d| d.0.n())
}

/// Number of columns, or 0 for a null handle.
///
/// # Safety
/// `dict` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_dictionary_cols(dict: *const DsDictionary) -> usize {
    dict.as_ref().map_or(0, |d| d.0.m())
}

/// Copies the entries row-major into `buf`, which holds `len` doubles.
///
/// # Safety
/// `dict` must be a live handle and `buf` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_dictionary_copy(dict: *const DsDictionary, buf: *mut f64, len: usize) -> DsStatus {
    guard(|| {
        let d = dict.as_ref().ok_or_else(|| null("dictionary"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let need = d.0.n() * d.0.m();
        if len < need {
            return Err(Fail(
                DsStatus::DimensionMismatch,
                format!("buffer holds {len} values, need {need}"),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, need);
        for (dst, src) in out.iter_mut().zip(d.0.entries().iter()) {
            *dst = *src;
        }
        Ok(())
    })
}

/// Releases a dictionary; null is ignored.
///
/// # Safety
/// `dict` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_dictionary_free(dict: *mut DsDictionary) {
    if !dict.is_null() {
        drop(Box::from_raw(dict));
    }
}

/// Largest absolute inner product between distinct columns.
///
/// # Safety
/// `dict` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ds_mutual_coherence(dict: *const DsDictionary, out: *mut f64) -> DsStatus {
    guard(|| {
        let d = dict.as_ref().ok_or_else(|| null("dictionary"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = model::mutual_coherence(&d.0)?;
        Ok(())
    })
}

/// Draws `p` samples from `dict` under `cfg`, seeded by `seed`.
///
/// # Safety
/// Handles and `cfg` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_samples_draw(
    dict: *const DsDictionary,
    cfg: *const DsModelConfig,
    p: usize,
    seed: u64,
    out: *mut *mut DsSampleSet,
) -> DsStatus {
    guard(|| {
        let d = dict.as_ref().ok_or_else(|| null("dictionary"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let model = model_from(cfg)?;
        let samples = model::draw_samples(&d.0, &model, p, &mut rng::seeded(seed))?;
        boxed(out, DsSampleSet(samples));
        Ok(())
    })
}

/// Wraps a row-major `n x p` buffer (one sample per column).
///
/// # Safety
/// `data` must point to `n * p` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn ds_samples_from_array(
    data: *const f64,
    n: usize,
    p: usize,
    sigma_eps: f64,
    out: *mut *mut DsSampleSet,
) -> DsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let obs = matrix_from(data, n, p)?;
        boxed(out, DsSampleSet(SampleSet::from_observations(obs, sigma_eps)?));
        Ok(())
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `samples` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_samples_len(samples: *const DsSampleSet) -> usize {
    samples.as_ref().map_or(0, |s| s.0.len())
}

/// Releases a sample set; null is ignored.
///
/// # Safety
/// `samples` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_samples_free(samples: *mut DsSampleSet) {
    if !samples.is_null() {
        drop(Box::from_raw(samples));
    }
}

/// Runs the truncated initialization with default settings.
///
/// # Safety
/// Handles and `cfg` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_initialize(
    samples: *const DsSampleSet,
    cfg: *const DsModelConfig,
    seed: u64,
    out: *mut *mut DsDictionary,
) -> DsStatus {
    guard(|| {
        let s = samples.as_ref().ok_or_else(|| null("samples"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let model = model_from(cfg)?;
        let init_cfg = default_init(&model, s.0.len());
        let result = init::initialize(&s.0, &model, &init_cfg, &mut rng::stream(seed, ALGO_STREAM))?;
        boxed(out, DsDictionary(result.dictionary));
        Ok(())
    })
}

/// Initialization followed by projected descent over all samples.
///
/// # Safety
/// Handles and `cfg` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_learn(
    samples: *const DsSampleSet,
    cfg: *const DsModelConfig,
    seed: u64,
    out: *mut *mut DsDictionary,
) -> DsStatus {
    guard(|| {
        let s = samples.as_ref().ok_or_else(|| null("samples"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let model = model_from(cfg)?;
        let init_cfg = default_init(&model, s.0.len());
        let a0 = init::initialize(&s.0, &model, &init_cfg, &mut rng::stream(seed, ALGO_STREAM))?.dictionary;
        let mask = SupportMask::from_dictionary(&a0);
        let descent_cfg = DescentConfig::for_model(&model, s.0.len());
        let mut source = FixedBatch::new(s.0.observations.clone());
        let learned = descent::descend(&a0, &mask, &mut source, &model, &descent_cfg, None)?;
        boxed(out, DsDictionary(learned.dictionary));
        Ok(())
    })
}

/// Aligns `est` to `truth` and reports the recovery metrics.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ds_evaluate(
    truth: *const DsDictionary,
    est: *const DsDictionary,
    threshold: f64,
    out: *mut DsEvalReport,
) -> DsStatus {
    guard(|| {
        let t = truth.as_ref().ok_or_else(|| null("truth"))?;
        let e = est.as_ref().ok_or_else(|| null("estimate"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = eval::report(&t.0, &e.0, threshold)?;
        *out = DsEvalReport {
            fro_error: r.fro_error,
            max_col_error: r.max_col_error,
            spectral_ratio: r.spectral_ratio,
            support_exact_frac: r.support_exact_frac,
            recovered: r.recovered,
            threshold_used: r.threshold_used,
        };
        Ok(())
    })
}
