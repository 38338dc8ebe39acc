//! C ABI over `cdpr-anomaly`.
//!
//! Every function returns a [`CdprStatus`]; on failure the message is
//! available from [`cdpr_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use cdpr_anomaly::detector::{Decision, Detector, DetectorConfig, DetectorSnapshot, Flag, DETECTOR_HEADER};
use cdpr_anomaly::mixture::snapshot::model_from_str;
use cdpr_anomaly::mixture::MixtureModel;
use cdpr_anomaly::stability::{reduced_hessian, GeometryConfig, StabilityReport};
use cdpr_anomaly::streams::TorqueSample;
use cdpr_anomaly::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdprStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotCalibrated = 4,
    Numerical = 5,
    Io = 6,
    Parse = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdprFlag {
    Normal = 0,
    Anomaly = 1,
    Settling = 2,
    Warmup = 3,
}

/// Detector parameters. `refit_cooldown` and `clean_delay` fall back to
/// `smoothing` when negative.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CdprConfig {
    pub n_motors: usize,
    pub window: usize,
    pub smoothing: usize,
    pub calibration: usize,
    pub gamma: f64,
    pub sample_rate: f64,
    pub guard_seconds: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub reselect_k: bool,
    pub refit_cooldown: i64,
    pub clean_delay: i64,
}

/// `distance` and `smoothed` are NaN when `has_distance` is false.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CdprDecision {
    pub sample_index: usize,
    pub t: f64,
    pub has_distance: bool,
    pub distance: f64,
    pub smoothed: f64,
    pub flag: CdprFlag,
    pub model_updated: bool,
}

pub struct CdprDetector(Detector);
pub struct CdprModel(MixtureModel);
pub struct CdprStabilityReport(StabilityReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CdprStatus {
    match e {
        Error::DimensionMismatch { .. } => CdprStatus::DimensionMismatch,
        Error::NotCalibrated => CdprStatus::NotCalibrated,
        Error::SingularCovariance | Error::WeightSum(_) => CdprStatus::Numerical,
        Error::Io { .. } => CdprStatus::Io,
        Error::Parse { .. } | Error::ConfigKey { .. } => CdprStatus::Parse,
        _ => CdprStatus::InvalidArgument,
    }
}

struct Fail(CdprStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CdprStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CdprStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CdprStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CdprStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CdprStatus::InvalidArgument, format!("`{what}` is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

impl From<&DetectorConfig> for CdprConfig {
    fn from(c: &DetectorConfig) -> Self {
        let opt = |v: Option<usize>| v.map_or(-1, |x| x as i64);
        Self {
            n_motors: c.n_motors,
            window: c.window,
            smoothing: c.smoothing,
            calibration: c.calibration,
            gamma: c.gamma,
            sample_rate: c.sample_rate,
            guard_seconds: c.guard_seconds,
            k_min: c.k_min,
            k_max: c.k_max,
            seed: c.seed,
            max_iter: c.max_iter,
            tol: c.tol,
            reselect_k: c.reselect_k,
            refit_cooldown: opt(c.refit_cooldown),
            clean_delay: opt(c.clean_delay),
        }
    }
}

impl From<&CdprConfig> for DetectorConfig {
    fn from(c: &CdprConfig) -> Self {
        let opt = |v: i64| usize::try_from(v).ok();
        Self {
            n_motors: c.n_motors,
            window: c.window,
            smoothing: c.smoothing,
            calibration: c.calibration,
            gamma: c.gamma,
            sample_rate: c.sample_rate,
            guard_seconds: c.guard_seconds,
            k_min: c.k_min,
            k_max: c.k_max,
            seed: c.seed,
            max_iter: c.max_iter,
            tol: c.tol,
            reselect_k: c.reselect_k,
            refit_cooldown: opt(c.refit_cooldown),
            clean_delay: opt(c.clean_delay),
        }
    }
}

impl From<&Decision> for CdprDecision {
    fn from(d: &Decision) -> Self {
        Self {
            sample_index: d.sample_index,
            t: d.t,
            has_distance: d.distance.is_some(),
            distance: d.distance.unwrap_or(f64::NAN),
            smoothed: d.smoothed.unwrap_or(f64::NAN),
            flag: match d.flag {
                Flag::Normal => CdprFlag::Normal,
                Flag::Anomaly => CdprFlag::Anomaly,
                Flag::Settling => CdprFlag::Settling,
                Flag::Warmup => CdprFlag::Warmup,
            },
            model_updated: d.model_updated,
        }
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cdpr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cdpr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdpr_config_default(out: *mut CdprConfig) -> CdprStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = CdprConfig::from(&DetectorConfig::default());
        Ok(())
    })
}

/// Creates an uncalibrated detector.
///
/// # Safety
/// `config` must point to a valid config and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdpr_detector_new(config: *const CdprConfig, out: *mut *mut CdprDetector) -> CdprStatus {
    guard(|| {
        let config = config.as_ref().ok_or_else(|| null("config"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let det = Detector::new(DetectorConfig::from(config))?;
        *out = Box::into_raw(Box::new(CdprDetector(det)));
        Ok(())
    })
}

/// Calibrates on `n_samples` samples. `t` holds one timestamp per sample and
/// `tau` the torques row by row (`n_samples × n_motors`).
///
/// # Safety
/// `det` must come from `cdpr_detector_new`; `t` and `tau` must hold
/// `n_samples` and `n_samples * n_motors` readable values.
#[no_mangle]
pub unsafe extern "C" fn cdpr_detector_calibrate(
    det: *mut CdprDetector,
    t: *const f64,
    tau: *const f64,
    n_samples: usize,
) -> CdprStatus {
    guard(|| {
        let det = det.as_mut().ok_or_else(|| null("det"))?;
        if t.is_null() {
            return Err(null("t"));
        }
        if tau.is_null() {
            return Err(null("tau"));
        }
        let n = det.0.config().n_motors;
        let t = std::slice::from_raw_parts(t, n_samples);
        let tau = std::slice::from_raw_parts(tau, n_samples * n);
        let samples: Vec<TorqueSample> = t
            .iter()
            .zip(tau.chunks_exact(n))
            .map(|(&t, row)| TorqueSample::new(t, row.to_vec()))
            .collect();
        det.0.calibrate(&samples)?;
        Ok(())
    })
}

/// Feeds one sample and writes the decision.
///
/// # Safety
/// `det` must be a live detector, `tau` must hold `n_motors` values and
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdpr_detector_step(
    det: *mut CdprDetector,
    t: f64,
    tau: *const f64,
    n_motors: usize,
    out: *mut CdprDecision,
) -> CdprStatus {
    guard(|| {
        let det = det.as_mut().ok_or_else(|| null("det"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if tau.is_null() {
            return Err(null("tau"));
        }
        let sample = TorqueSample::new(t, std::slice::from_raw_parts(tau, n_motors).to_vec());
        let d = det.0.step(&sample)?;
        *out = CdprDecision::from(&d);
        Ok(())
    })
}

/// Enables or disables model refits (enabled by default).
///
/// # Safety
/// `det` must be a live detector.
#[no_mangle]
pub unsafe extern "C" fn cdpr_detector_set_updates(det: *mut CdprDetector, enabled: bool) -> CdprStatus {
    guard(|| {
        let det = det.as_mut().ok_or_else(|| null("det"))?;
        det.0.set_updates_enabled(enabled);
        Ok(())
    })
}

/// # Safety
/// `det` must be a live detector and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdpr_detector_threshold(det: *const CdprDetector, out: *mut f64) -> CdprStatus {
    guard(|| {
        let det = det.as_ref().ok_or_else(|| null("det"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = det.0.threshold().ok_or(Error::NotCalibrated)?;
        Ok(())
    })
}

/// # Safety
/// `det` must be a live detector and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdpr_detector_update_count(det: *const CdprDetector, out: *mut usize) -> CdprStatus {
    guard(|| {
        let det = det.as_ref().ok_or_else(|| null("det"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = det.0.update_count();
        Ok(())
    })
}

/// Writes the detector snapshot (threshold, config and model) to `path`.
///
/// # Safety
/// `det` must be a live detector and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cdpr_detector_save(det: *const CdprDetector, path: *const c_char) -> CdprStatus {
    guard(|| {
        let det = det.as_ref().ok_or_else(|| null("det"))?;
        let path = path_arg(path, "path")?;
        det.0.snapshot().ok_or(Error::NotCalibrated)?.save(&path)?;
        Ok(())
    })
}

/// # Safety
/// `det` must come from `cdpr_detector_new` and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cdpr_detector_free(det: *mut CdprDetector) {
    if !det.is_null() {
        drop(Box::from_raw(det));
    }
}

/// Loads the model from a model snapshot or a detector snapshot.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdpr_model_load(path: *const c_char, out: *mut *mut CdprModel) -> CdprStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let model = if text.trim_start().starts_with(DETECTOR_HEADER) {
            DetectorSnapshot::from_text(&text)?.model
        } else {
            model_from_str(&text)?
        };
        *out = Box::into_raw(Box::new(CdprModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live model and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdpr_model_dim(model: *const CdprModel, out: *mut usize) -> CdprStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = model.0.dim();
        Ok(())
    })
}

/// Mahalanobis distance from `x` to the nearest component.
///
/// # Safety
/// `model` must be a live model, `x` must hold `dim` values and `out` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdpr_model_distance(
    model: *const CdprModel,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> CdprStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if x.is_null() {
            return Err(null("x"));
        }
        let v = cdpr_anomaly::mixture::WindowVector::new(std::slice::from_raw_parts(x, dim).to_vec(), 0)?;
        *out = model.0.distance(v.values())?;
        Ok(())
    })
}

/// # Safety
/// `model` must come from `cdpr_model_load` and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cdpr_model_free(model: *mut CdprModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Runs the stability check on a geometry TOML file, or on the built-in
/// reference rig when `path` is null.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdpr_stability_check(path: *const c_char, out: *mut *mut CdprStabilityReport) -> CdprStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let cfg = if path.is_null() {
            GeometryConfig::reference()
        } else {
            GeometryConfig::load(&path_arg(path, "path")?)?
        };
        let (g, pose, tensions) = cfg.resolve()?;
        let report = reduced_hessian(&g, &pose, &tensions)?;
        *out = Box::into_raw(Box::new(CdprStabilityReport(report)));
        Ok(())
    })
}

/// # Safety
/// `report` must be a live report and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdpr_stability_is_stable(report: *const CdprStabilityReport, out: *mut bool) -> CdprStatus {
    guard(|| {
        let report = report.as_ref().ok_or_else(|| null("report"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = report.0.stable;
        Ok(())
    })
}

/// Copies up to `capacity` eigenvalues (ascending) into `buf` and writes the
/// total count to `len`. `buf` may be null to query the count.
///
/// # Safety
/// `report` must be a live report, `buf` null or valid for `capacity`
/// writes, and `len` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cdpr_stability_eigenvalues(
    report: *const CdprStabilityReport,
    buf: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> CdprStatus {
    guard(|| {
        let report = report.as_ref().ok_or_else(|| null("report"))?;
        let len = len.as_mut().ok_or_else(|| null("len"))?;
        let e = &report.0.eigenvalues;
        *len = e.len();
        if !buf.is_null() {
            let n = e.len().min(capacity);
            std::slice::from_raw_parts_mut(buf, n).copy_from_slice(&e[..n]);
        }
        Ok(())
    })
}

/// # Safety
/// `report` must come from `cdpr_stability_check` and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cdpr_stability_free(report: *mut CdprStabilityReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
