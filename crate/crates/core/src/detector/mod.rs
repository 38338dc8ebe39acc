//! Streaming detector: calibration, S-window smoothing of nearest-component
//! Mahalanobis distances, thresholding and band-triggered model refits.
//!
//! A refit happens when the smoothed distance sits inside
//! `((1 − γ)·d_th, d_th)`: high enough to suggest the baseline has moved,
//! low enough that the recent data is still considered normal. The refit
//! uses the last `C` windows that were confirmed clean.

mod pipeline;
pub mod snapshot;

pub use pipeline::{
    calibration_len, read_decisions_csv, run_distance_adaptive, run_distance_no_update, run_pipeline,
    run_power_baseline, write_decisions_csv, Method, PipelineOutput, ThresholdChange,
};
pub use snapshot::{DetectorSnapshot, DETECTOR_HEADER};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{self, sliding_windows, EmSettings, MixtureModel, WindowVector};
use crate::streams::TorqueSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Number of motors (torque channels), `n`.
    pub n_motors: usize,
    /// Samples per window, `M`.
    pub window: usize,
    /// Distances in the moving average, `S`.
    pub smoothing: usize,
    /// Calibration windows, `C`.
    pub calibration: usize,
    /// Width of the refit band as a fraction of the threshold.
    pub gamma: f64,
    /// Hz.
    pub sample_rate: f64,
    /// Seconds after each disturbance excluded from scoring.
    pub guard_seconds: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    /// Re-run BIC selection on every refit instead of keeping the calibrated K.
    pub reselect_k: bool,
    /// Samples without refits after an update; defaults to `smoothing`.
    pub refit_cooldown: Option<usize>,
    /// Age (in windows) a window must reach, with the smoothed distance still
    /// under threshold, before it joins the refit buffer; defaults to
    /// `smoothing`.
    pub clean_delay: Option<usize>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            n_motors: 4,
            window: 5,
            smoothing: 100,
            calibration: 1000,
            gamma: 0.25,
            sample_rate: 100.0,
            guard_seconds: 30.0,
            k_min: 1,
            k_max: 5,
            seed: 0,
            max_iter: 200,
            tol: 1e-6,
            reselect_k: false,
            refit_cooldown: None,
            clean_delay: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_motors == 0 {
            return bad("n_motors must be at least 1");
        }
        if self.window == 0 {
            return bad("window (M) must be at least 1");
        }
        if self.smoothing == 0 {
            return bad("smoothing (S) must be at least 1");
        }
        if self.calibration <= self.window {
            return bad("calibration (C) must exceed window (M)");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return bad("sample_rate must be positive");
        }
        if !(self.guard_seconds >= 0.0) {
            return bad("guard_seconds must be non-negative");
        }
        if self.k_min == 0 || self.k_min > self.k_max {
            return bad("need 1 <= k_min <= k_max");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n_motors * self.window
    }

    pub fn em_settings(&self) -> EmSettings {
        EmSettings {
            seed: self.seed,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }

    pub fn cooldown(&self) -> usize {
        self.refit_cooldown.unwrap_or(self.smoothing)
    }

    pub fn delay(&self) -> usize {
        self.clean_delay.unwrap_or(self.smoothing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Calibrating,
    Normal,
    Anomaly,
    Settling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flag {
    Normal,
    Anomaly,
    Settling,
    Warmup,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::Normal => "Normal",
            Flag::Anomaly => "Anomaly",
            Flag::Settling => "Settling",
            Flag::Warmup => "Warmup",
        }
    }

    /// Warmup and settling output is not classified.
    pub fn is_scored(self) -> bool {
        matches!(self, Flag::Normal | Flag::Anomaly)
    }
}

impl std::fmt::Display for Flag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Flag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "Normal" => Ok(Flag::Normal),
            "Anomaly" => Ok(Flag::Anomaly),
            "Settling" => Ok(Flag::Settling),
            "Warmup" => Ok(Flag::Warmup),
            other => Err(format!("unknown flag `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub sample_index: usize,
    pub t: f64,
    pub distance: Option<f64>,
    pub smoothed: Option<f64>,
    pub flag: Flag,
    pub model_updated: bool,
}

/// `(1 − γ)·d_th < mean < d_th`.
pub fn in_update_band(mean: f64, threshold: f64, gamma: f64) -> bool {
    mean > (1.0 - gamma) * threshold && mean < threshold
}

#[derive(Debug, Clone)]
struct Calibrated {
    model: MixtureModel,
    threshold: f64,
}

#[derive(Debug, Clone)]
pub struct Detector {
    cfg: DetectorConfig,
    updates_enabled: bool,
    calib: Option<Calibrated>,
    recent: VecDeque<f64>,
    clean: VecDeque<WindowVector>,
    /// Windows awaiting confirmation, with whether they were under threshold
    /// when emitted.
    pending: VecDeque<(WindowVector, bool)>,
    raw: VecDeque<TorqueSample>,
    mode: Mode,
    update_count: usize,
    failed_updates: usize,
    cooldown: usize,
    next_index: usize,
    last_smoothed: Option<f64>,
    calibration_distances: Vec<f64>,
}

impl Detector {
    /// An uncalibrated detector; `step` fails until `calibrate` succeeds.
    pub fn new(cfg: DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            updates_enabled: true,
            calib: None,
            recent: VecDeque::new(),
            clean: VecDeque::new(),
            pending: VecDeque::new(),
            raw: VecDeque::new(),
            mode: Mode::Calibrating,
            update_count: 0,
            failed_updates: 0,
            cooldown: 0,
            next_index: 0,
            last_smoothed: None,
            calibration_distances: Vec::new(),
        })
    }

    /// Calibrates on the first `C + M − 1` samples, which the caller
    /// guarantees to be anomaly-free.
    pub fn calibrate(&mut self, samples: &[TorqueSample]) -> Result<()> {
        let cfg = &self.cfg;
        let need = calibration_len(cfg);
        if samples.len() < need {
            return Err(Error::InsufficientSamples {
                needed: need,
                got: samples.len(),
            });
        }
        let samples = &samples[..need];
        for (i, s) in samples.iter().enumerate() {
            check_sample(cfg, s, i)?;
        }
        let windows = sliding_windows(samples, cfg.window)?;
        debug_assert_eq!(windows.len(), cfg.calibration);
        let k_max = cfg.k_max.min(windows.len());
        let k_min = cfg.k_min.min(k_max);
        let model = mixture::select_k_bic(&windows, k_min, k_max, &cfg.em_settings())?.model;
        let distances = windows
            .iter()
            .map(|w| model.distance(w.values()))
            .collect::<Result<Vec<f64>>>()?;
        // Windows 1..=C−M in one-based terms.
        let scored = cfg.calibration - cfg.window + 1;
        let threshold = positive_max(&distances[..scored]);

        let s = cfg.smoothing;
        self.recent = distances[distances.len().saturating_sub(s)..].iter().copied().collect();
        self.last_smoothed = Some(mean(&self.recent));
        self.clean = windows.into();
        self.pending.clear();
        self.raw.clear();
        self.calibration_distances = distances;
        self.calib = Some(Calibrated { model, threshold });
        self.mode = Mode::Normal;
        self.update_count = 0;
        self.failed_updates = 0;
        self.cooldown = 0;
        self.next_index = need;
        Ok(())
    }

    pub fn set_updates_enabled(&mut self, enabled: bool) {
        self.updates_enabled = enabled;
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_calibrated(&self) -> bool {
        self.calib.is_some()
    }

    pub fn model(&self) -> Option<&MixtureModel> {
        self.calib.as_ref().map(|c| &c.model)
    }

    pub fn threshold(&self) -> Option<f64> {
        self.calib.as_ref().map(|c| c.threshold)
    }

    pub fn update_count(&self) -> usize {
        self.update_count
    }

    pub fn failed_updates(&self) -> usize {
        self.failed_updates
    }

    /// Distances of all calibration windows, in stream order.
    pub fn calibration_distances(&self) -> &[f64] {
        &self.calibration_distances
    }

    /// Windows evaluated for the calibration threshold.
    pub fn threshold_windows(&self) -> usize {
        self.cfg.calibration - self.cfg.window + 1
    }

    pub fn clean_buffer(&self) -> impl ExactSizeIterator<Item = &WindowVector> {
        self.clean.iter()
    }

    /// The last `S` raw distances, oldest first.
    pub fn recent_distances(&self) -> impl ExactSizeIterator<Item = &f64> {
        self.recent.iter()
    }

    pub fn smoothed(&self) -> Option<f64> {
        self.last_smoothed
    }

    /// Index the next sample passed to `step` will receive.
    pub fn next_index(&self) -> usize {
        self.next_index
    }

    pub fn step(&mut self, sample: &TorqueSample) -> Result<Decision> {
        let Some(calib) = self.calib.as_ref() else {
            return Err(Error::NotCalibrated);
        };
        let index = self.next_index;
        check_sample(&self.cfg, sample, index)?;
        self.next_index += 1;
        let m = self.cfg.window;
        self.raw.push_back(sample.clone());
        if self.raw.len() > m {
            self.raw.pop_front();
        }
        if self.raw.len() < m {
            return Ok(Decision {
                sample_index: index,
                t: sample.t,
                distance: None,
                smoothed: None,
                flag: Flag::Warmup,
                model_updated: false,
            });
        }

        let window = WindowVector::from_samples(self.raw.iter(), index + 1 - m)?;
        let distance = calib.model.distance(window.values())?;
        self.recent.push_back(distance);
        if self.recent.len() > self.cfg.smoothing {
            self.recent.pop_front();
        }
        let smoothed = mean(&self.recent);
        self.last_smoothed = Some(smoothed);
        let threshold = calib.threshold;
        let normal = smoothed <= threshold;
        let flag = if normal { Flag::Normal } else { Flag::Anomaly };
        self.mode = if normal { Mode::Normal } else { Mode::Anomaly };

        self.pending.push_back((window, normal));
        while self.pending.len() > self.cfg.delay() {
            let (w, was_normal) = self.pending.pop_front().expect("non-empty");
            if was_normal && normal {
                self.clean.push_back(w);
                if self.clean.len() > self.cfg.calibration {
                    self.clean.pop_front();
                }
            }
        }

        self.cooldown = self.cooldown.saturating_sub(1);
        let model_updated = self.updates_enabled && self.maybe_update();
        Ok(Decision {
            sample_index: index,
            t: sample.t,
            distance: Some(distance),
            smoothed: Some(smoothed),
            flag,
            model_updated,
        })
    }

    /// Refits the model on the clean buffer when the current smoothed
    /// distance lies in the update band. Returns whether a refit happened; a
    /// failed refit keeps the old model.
    pub fn maybe_update(&mut self) -> bool {
        let (Some(calib), Some(mean)) = (self.calib.as_ref(), self.last_smoothed) else {
            return false;
        };
        if self.cooldown > 0 || !in_update_band(mean, calib.threshold, self.cfg.gamma) {
            return false;
        }
        self.cooldown = self.cfg.cooldown();
        match self.refit(calib.model.k()) {
            Ok(next) => {
                self.calib = Some(next);
                self.update_count += 1;
                true
            }
            Err(e) => {
                log::warn!("model refit failed, keeping previous model: {e}");
                self.failed_updates += 1;
                false
            }
        }
    }

    fn refit(&self, k: usize) -> Result<Calibrated> {
        let data: Vec<WindowVector> = self.clean.iter().cloned().collect();
        let settings = self.cfg.em_settings();
        let model = if self.cfg.reselect_k {
            let k_max = self.cfg.k_max.min(data.len());
            mixture::select_k_bic(&data, self.cfg.k_min.min(k_max), k_max, &settings)?.model
        } else {
            mixture::fit_em(&data, k, &settings)?
        };
        let distances = data
            .iter()
            .map(|w| model.distance(w.values()))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Calibrated {
            model,
            threshold: positive_max(&distances),
        })
    }

    pub fn snapshot(&self) -> Option<DetectorSnapshot> {
        self.calib.as_ref().map(|c| DetectorSnapshot {
            config: self.cfg.clone(),
            threshold: c.threshold,
            update_count: self.update_count,
            model: c.model.clone(),
        })
    }
}

/// Calibrates a fresh detector.
pub fn calibrate(samples: &[TorqueSample], cfg: &DetectorConfig) -> Result<Detector> {
    let mut d = Detector::new(cfg.clone())?;
    d.calibrate(samples)?;
    Ok(d)
}

fn check_sample(cfg: &DetectorConfig, s: &TorqueSample, index: usize) -> Result<()> {
    if s.n_motors() != cfg.n_motors {
        return Err(Error::DimensionMismatch {
            expected: cfg.n_motors,
            found: s.n_motors(),
        });
    }
    if !s.is_finite() {
        return Err(Error::NonFinite(format!("torque sample {index}")));
    }
    Ok(())
}

/// Arithmetic mean, summed oldest to newest.
pub(crate) fn mean(values: &VecDeque<f64>) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Largest value, floored at the smallest positive float so a perfectly
/// constant calibration still yields a usable threshold.
fn positive_max(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::MIN_POSITIVE, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(n: usize, len: usize, value: f64) -> Vec<TorqueSample> {
        (0..len).map(|i| TorqueSample::new(i as f64 * 0.01, vec![value; n])).collect()
    }

    fn small_cfg() -> DetectorConfig {
        DetectorConfig {
            n_motors: 2,
            window: 3,
            smoothing: 10,
            calibration: 50,
            k_max: 2,
            ..Default::default()
        }
    }

    #[test]
    fn band_arithmetic() {
        assert!(!in_update_band(0.5, 1.0, 0.25));
        assert!(in_update_band(0.8, 1.0, 0.25));
        assert!(!in_update_band(0.75, 1.0, 0.25));
        assert!(!in_update_band(1.0, 1.0, 0.25));
        assert!(!in_update_band(1.2, 1.0, 0.25));
    }

    #[test]
    fn config_validation() {
        let ok = DetectorConfig::default();
        ok.validate().unwrap();
        for bad in [
            DetectorConfig { gamma: 0.0, ..ok.clone() },
            DetectorConfig { gamma: 1.0, ..ok.clone() },
            DetectorConfig { window: 0, ..ok.clone() },
            DetectorConfig { smoothing: 0, ..ok.clone() },
            DetectorConfig { calibration: 5, ..ok.clone() },
            DetectorConfig { sample_rate: 0.0, ..ok.clone() },
            DetectorConfig { k_min: 3, k_max: 2, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn step_before_calibration_fails() {
        let mut d = Detector::new(small_cfg()).unwrap();
        assert!(matches!(d.step(&TorqueSample::new(0.0, vec![0.0; 2])), Err(Error::NotCalibrated)));
    }

    #[test]
    fn too_few_samples() {
        let cfg = small_cfg();
        let err = calibrate(&constant(2, 51, 1.0), &cfg).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples { needed: 52, got: 51 }));
    }

    #[test]
    fn non_finite_rejected() {
        let cfg = small_cfg();
        let mut s = constant(2, 60, 1.0);
        s[10].tau[1] = f64::INFINITY;
        assert!(matches!(calibrate(&s, &cfg), Err(Error::NonFinite(_))));
        let mut d = calibrate(&constant(2, 60, 1.0), &cfg).unwrap();
        assert!(d.step(&TorqueSample::new(1.0, vec![f64::NAN, 0.0])).is_err());
    }

    #[test]
    fn constant_stream_then_deviation() {
        let cfg = small_cfg();
        let mut d = calibrate(&constant(2, 52, 1.0), &cfg).unwrap();
        let th = d.threshold().unwrap();
        assert!(th > 0.0 && th < 1e-6, "threshold {th}");
        assert!(d.calibration_distances().iter().all(|&x| x <= th));
        let mut t = 1.0;
        for _ in 0..20 {
            t += 0.01;
            let dec = d.step(&TorqueSample::new(t, vec![1.0, 1.0])).unwrap();
            assert_ne!(dec.flag, Flag::Anomaly);
        }
        t += 0.01;
        let dec = d.step(&TorqueSample::new(t, vec![1.001, 1.0])).unwrap();
        assert_eq!(dec.flag, Flag::Anomaly);
    }

    #[test]
    fn first_m_minus_one_steps_are_warmup() {
        let cfg = small_cfg();
        let mut d = calibrate(&constant(2, 52, 1.0), &cfg).unwrap();
        for i in 0..cfg.window {
            let dec = d.step(&TorqueSample::new(1.0 + i as f64, vec![1.0, 1.0])).unwrap();
            if i + 1 < cfg.window {
                assert_eq!(dec.flag, Flag::Warmup);
                assert!(dec.distance.is_none());
            } else {
                assert!(dec.distance.is_some());
            }
        }
    }

    #[test]
    fn threshold_window_count_follows_indexing() {
        let cfg = DetectorConfig {
            calibration: 200,
            window: 5,
            n_motors: 4,
            ..Default::default()
        };
        let samples: Vec<_> = (0..204)
            .map(|i| {
                let x = i as f64;
                TorqueSample::new(x * 0.01, vec![(x * 0.7).sin(), (x * 1.3).cos(), (x * 0.37).sin(), (x * 2.1).cos()])
            })
            .collect();
        let d = calibrate(&samples, &cfg).unwrap();
        assert_eq!(d.calibration_distances().len(), 200);
        assert_eq!(d.threshold_windows(), 196);
        let expected = d.calibration_distances()[..196].iter().copied().fold(0.0, f64::max);
        assert_eq!(d.threshold().unwrap(), expected);
    }
}
