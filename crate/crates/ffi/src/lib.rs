//! C ABI over the hdrssl pipeline.
//!
//! Every fallible call returns an [`HdrsslStatus`]; on failure the message is
//! available from [`hdrssl_last_error`] on the same thread. Handles are
//! opaque, created by the `*_load`/`*_new` functions and released by the
//! matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use hdrssl::dataset::{
    run_pipeline, stats_report, ConfigError, DatasetStats, Manifest, ManifestError, PipelineConfig,
    PipelineError, StatsError,
};
use hdrssl::flow::{load_flo, write_flo, FloError, FlowField};
use hdrssl::imgcore::{psnr_mu, HdrImage, MetricConfig};
use hdrssl::motion_domain::SubsetTag;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdrsslStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Format = 5,
    /// The run finished but produced no supervision pairs.
    Empty = 6,
    Panic = 7,
}

/// Subset a pair belongs to.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdrsslSubset {
    Ed = 0,
    Edm = 1,
    Md = 2,
    Mdm = 3,
}

impl From<HdrsslSubset> for SubsetTag {
    fn from(s: HdrsslSubset) -> Self {
        match s {
            HdrsslSubset::Ed => SubsetTag::Ed,
            HdrsslSubset::Edm => SubsetTag::Edm,
            HdrsslSubset::Md => SubsetTag::Md,
            HdrsslSubset::Mdm => SubsetTag::Mdm,
        }
    }
}

pub struct HdrsslConfig(PipelineConfig);

pub struct HdrsslStats {
    stats: DatasetStats,
    names: Vec<CString>,
}

pub struct HdrsslFlow(FlowField);

struct Failure(HdrsslStatus, String);

type FfiResult<T> = Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn run(f: impl FnOnce() -> FfiResult<()>) -> HdrsslStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HdrsslStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            HdrsslStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(HdrsslStatus::NullArgument, format!("{what} is NULL"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(HdrsslStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> FfiResult<PathBuf> {
    str_arg(p, what).map(PathBuf::from)
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn config_failure(e: ConfigError) -> Failure {
    let status = match e {
        ConfigError::Read { .. } => HdrsslStatus::Io,
        _ => HdrsslStatus::Config,
    };
    Failure(status, e.to_string())
}

fn manifest_failure(e: ManifestError) -> Failure {
    let status = match e {
        ManifestError::Read { .. } => HdrsslStatus::Io,
        _ => HdrsslStatus::Config,
    };
    Failure(status, e.to_string())
}

fn flo_failure(e: FloError) -> Failure {
    let status = match e {
        FloError::Io(_) => HdrsslStatus::Io,
        _ => HdrsslStatus::Format,
    };
    Failure(status, e.to_string())
}

fn stats_handle(stats: DatasetStats) -> HdrsslStats {
    let names = stats
        .counts
        .keys()
        .map(|k| CString::new(k.replace('\0', " ")).expect("NULs were replaced"))
        .collect();
    HdrsslStats { stats, names }
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn hdrssl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hdrssl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The default configuration.
#[no_mangle]
pub extern "C" fn hdrssl_config_new() -> *mut HdrsslConfig {
    Box::into_raw(Box::new(HdrsslConfig(PipelineConfig::default())))
}

/// Reads and validates a TOML config file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_config_load(
    path: *const c_char,
    out: *mut *mut HdrsslConfig,
) -> HdrsslStatus {
    run(|| {
        let path = path_arg(path, "path")?;
        let cfg = PipelineConfig::load(&path).map_err(config_failure)?;
        put(out, HdrsslConfig(cfg))
    })
}

/// Parses and validates config TOML held in memory.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_config_from_toml(
    text: *const c_char,
    out: *mut *mut HdrsslConfig,
) -> HdrsslStatus {
    run(|| {
        let text = str_arg(text, "text")?;
        let cfg = PipelineConfig::from_toml_str(text).map_err(config_failure)?;
        put(out, HdrsslConfig(cfg))
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_config_set_seed(cfg: *mut HdrsslConfig, seed: u64) -> HdrsslStatus {
    run(|| {
        handle_mut(cfg, "cfg")?.0.seed = seed;
        Ok(())
    })
}

/// Worker threads for `hdrssl_generate`; 0 uses every core. Output does not
/// depend on this value.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_config_set_workers(cfg: *mut HdrsslConfig, workers: usize) -> HdrsslStatus {
    run(|| {
        handle_mut(cfg, "cfg")?.0.workers = workers;
        Ok(())
    })
}

/// The config serialized as TOML; free with `hdrssl_string_free`. NULL if
/// `cfg` is NULL.
///
/// # Safety
/// `cfg` must be NULL or a live config handle.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_config_to_toml(cfg: *const HdrsslConfig) -> *mut c_char {
    match cfg.as_ref() {
        Some(c) => CString::new(c.0.to_toml_string()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `cfg` must be NULL or a live config handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_config_free(cfg: *mut HdrsslConfig) {
    release(cfg);
}

/// Runs the pipeline over every scene of `manifest` and writes pairs under
/// `out_dir`. Scenes that fail are skipped. Returns `HDRSSL_STATUS_EMPTY`
/// (and leaves `*out` untouched) when scenes were listed but no pair came out.
/// `out` may be NULL when the counts are not needed.
///
/// # Safety
/// `cfg` must be live, the paths NUL-terminated, and `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_generate(
    cfg: *const HdrsslConfig,
    manifest: *const c_char,
    out_dir: *const c_char,
    out: *mut *mut HdrsslStats,
) -> HdrsslStatus {
    run(|| {
        let cfg = &handle(cfg, "cfg")?.0;
        let manifest = Manifest::load(path_arg(manifest, "manifest")?).map_err(manifest_failure)?;
        let out_dir = path_arg(out_dir, "out_dir")?;
        let report = run_pipeline(&manifest, &out_dir, cfg).map_err(|e| {
            let status = match e {
                PipelineError::Pool(_) => HdrsslStatus::Config,
                _ => HdrsslStatus::Io,
            };
            Failure(status, e.to_string())
        })?;
        if !manifest.scenes.is_empty() && report.stats.is_empty() {
            return Err(Failure(
                HdrsslStatus::Empty,
                "no supervision pairs were produced".into(),
            ));
        }
        if out.is_null() {
            return Ok(());
        }
        put(out, stats_handle(report.stats))
    })
}

/// Counts the pairs of a generated tree.
///
/// # Safety
/// `root` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_stats_scan(root: *const c_char, out: *mut *mut HdrsslStats) -> HdrsslStatus {
    run(|| {
        let root = path_arg(root, "root")?;
        let stats = stats_report(&root).map_err(|e| {
            let status = match e {
                StatsError::EmptyDataset(_) => HdrsslStatus::Empty,
                StatsError::Pair(_) => HdrsslStatus::Format,
                _ => HdrsslStatus::Io,
            };
            Failure(status, e.to_string())
        })?;
        put(out, stats_handle(stats))
    })
}

/// Total pair count; 0 for NULL.
///
/// # Safety
/// `stats` must be NULL or a live stats handle.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_stats_total(stats: *const HdrsslStats) -> u64 {
    stats.as_ref().map_or(0, |s| s.stats.total())
}

/// Pairs of one subset, restricted to `dataset` unless it is NULL.
///
/// # Safety
/// `stats` must be NULL or live; `dataset` NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_stats_count(
    stats: *const HdrsslStats,
    dataset: *const c_char,
    subset: HdrsslSubset,
) -> u64 {
    let Some(s) = stats.as_ref() else {
        return 0;
    };
    let tag = SubsetTag::from(subset);
    if dataset.is_null() {
        return s.stats.subset_total(tag);
    }
    match CStr::from_ptr(dataset).to_str() {
        Ok(d) => s.stats.count(d, tag),
        Err(_) => 0,
    }
}

/// Number of datasets; their names are indexed in sorted order.
///
/// # Safety
/// `stats` must be NULL or a live stats handle.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_stats_dataset_count(stats: *const HdrsslStats) -> usize {
    stats.as_ref().map_or(0, |s| s.names.len())
}

/// Name of dataset `i`, owned by the handle; NULL when out of range.
///
/// # Safety
/// `stats` must be NULL or a live stats handle.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_stats_dataset_name(stats: *const HdrsslStats, i: usize) -> *const c_char {
    stats
        .as_ref()
        .and_then(|s| s.names.get(i))
        .map_or(ptr::null(), |n| n.as_ptr())
}

/// Markdown table of subset percentages; free with `hdrssl_string_free`.
///
/// # Safety
/// `stats` must be NULL or a live stats handle.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_stats_table(stats: *const HdrsslStats) -> *mut c_char {
    match stats.as_ref() {
        Some(s) => CString::new(s.stats.render_table()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `stats` must be NULL or a live stats handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_stats_free(stats: *mut HdrsslStats) {
    release(stats);
}

/// Reads a Middlebury `.flo` file. NaN or huge components mark pixels invalid.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_flow_load(path: *const c_char, out: *mut *mut HdrsslFlow) -> HdrsslStatus {
    run(|| {
        let path = path_arg(path, "path")?;
        let f = load_flo(&path, None).map_err(flo_failure)?;
        put(out, HdrsslFlow(f))
    })
}

/// A flow of the given size with every pixel invalid.
#[no_mangle]
pub extern "C" fn hdrssl_flow_new(width: usize, height: usize) -> *mut HdrsslFlow {
    if width == 0 || height == 0 || width.checked_mul(height).is_none() {
        return ptr::null_mut();
    }
    Box::into_raw(Box::new(HdrsslFlow(FlowField::all_invalid(width, height))))
}

/// # Safety
/// `flow` must be NULL or a live flow handle.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_flow_width(flow: *const HdrsslFlow) -> usize {
    flow.as_ref().map_or(0, |f| f.0.width)
}

/// # Safety
/// `flow` must be NULL or a live flow handle.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_flow_height(flow: *const HdrsslFlow) -> usize {
    flow.as_ref().map_or(0, |f| f.0.height)
}

/// Displacement at `(x, y)`. `*valid` is false for untracked pixels, whose
/// `u`/`v` are meaningless.
///
/// # Safety
/// `flow` must be live; `u`, `v` and `valid` writable.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_flow_get(
    flow: *const HdrsslFlow,
    x: usize,
    y: usize,
    u: *mut f32,
    v: *mut f32,
    valid: *mut bool,
) -> HdrsslStatus {
    run(|| {
        let f = &handle(flow, "flow")?.0;
        if u.is_null() || v.is_null() || valid.is_null() {
            return Err(null("output pointer"));
        }
        if x >= f.width || y >= f.height {
            return Err(Failure(
                HdrsslStatus::InvalidArgument,
                format!("({x}, {y}) is outside {}x{}", f.width, f.height),
            ));
        }
        let i = y * f.width + x;
        [*u, *v] = f.uv[i];
        *valid = f.valid[i];
        Ok(())
    })
}

/// Stores a displacement and marks the pixel valid. Components must be finite.
///
/// # Safety
/// `flow` must be a live flow handle.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_flow_set(
    flow: *mut HdrsslFlow,
    x: usize,
    y: usize,
    u: f32,
    v: f32,
) -> HdrsslStatus {
    run(|| {
        let f = &mut handle_mut(flow, "flow")?.0;
        if x >= f.width || y >= f.height || !u.is_finite() || !v.is_finite() {
            return Err(Failure(
                HdrsslStatus::InvalidArgument,
                format!("cannot set ({u}, {v}) at ({x}, {y}) of {}x{}", f.width, f.height),
            ));
        }
        let i = y * f.width + x;
        f.uv[i] = [u, v];
        f.valid[i] = true;
        Ok(())
    })
}

/// Writes `.flo`; invalid pixels are stored as the unknown-flow sentinel.
///
/// # Safety
/// `flow` must be live and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_flow_write(flow: *const HdrsslFlow, path: *const c_char) -> HdrsslStatus {
    run(|| {
        let f = &handle(flow, "flow")?.0;
        let path = path_arg(path, "path")?;
        write_flo(f, &path).map_err(flo_failure)
    })
}

/// # Safety
/// `flow` must be NULL or a live flow handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_flow_free(flow: *mut HdrsslFlow) {
    release(flow);
}

/// PSNR after mu-law tonemapping of two interleaved RGB float images of
/// `width * height * 3` non-negative samples each. Identical inputs give 100.
///
/// # Safety
/// `a` and `b` must each point to `width * height * 3` readable floats and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdrssl_psnr_mu(
    a: *const f32,
    b: *const f32,
    width: usize,
    height: usize,
    mu: f32,
    out: *mut f64,
) -> HdrsslStatus {
    run(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return Err(null("image or output pointer"));
        }
        let n = width
            .checked_mul(height)
            .and_then(|p| p.checked_mul(3))
            .ok_or_else(|| Failure(HdrsslStatus::InvalidArgument, "image size overflows".into()))?;
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Failure(
                HdrsslStatus::InvalidArgument,
                format!("mu must be positive, got {mu}"),
            ));
        }
        let img = |p: *const f32| {
            let data = std::slice::from_raw_parts(p, n).to_vec();
            HdrImage::new(width, height, data)
                .map_err(|e| Failure(HdrsslStatus::InvalidArgument, e.to_string()))
        };
        let cfg = MetricConfig {
            mu,
            ..MetricConfig::default()
        };
        *out = psnr_mu(&img(a)?, &img(b)?, &cfg)
            .map_err(|e| Failure(HdrsslStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}
