//! Torque streams: sample types, CSV interchange and the synthetic generator.
//!
//! The torque CSV has header `t,tau1,...,taun` (one row per sample, seconds
//! since stream start). Ground truth uses `start,end,level`, listing only
//! intervals where the disturbance level is above zero.

mod csv_io;
pub mod synth;

pub use csv_io::{read_torque_csv, read_truth_csv, write_torque_csv, write_truth_csv};
pub use synth::{generate, Drift, Preset, PresetOptions, SynthEvent, SynthScenario};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One timestamped vector of motor torques.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueSample {
    pub t: f64,
    pub tau: Vec<f64>,
}

impl TorqueSample {
    pub fn new(t: f64, tau: Vec<f64>) -> Self {
        Self { t, tau }
    }

    pub fn n_motors(&self) -> usize {
        self.tau.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.tau.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm of the torque vector.
    pub fn power(&self) -> f64 {
        self.tau.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A disturbance interval, `[start, end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthInterval {
    pub start: f64,
    pub end: f64,
    pub level: u8,
}

impl GroundTruthInterval {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Checks that intervals are sorted, non-overlapping and non-empty.
pub fn validate_truth(truth: &[GroundTruthInterval]) -> Result<()> {
    for (i, iv) in truth.iter().enumerate() {
        if !(iv.start.is_finite() && iv.end.is_finite()) || iv.start >= iv.end {
            return Err(Error::UnorderedTruth(i));
        }
        if i > 0 && truth[i - 1].end > iv.start {
            return Err(Error::UnorderedTruth(i));
        }
    }
    Ok(())
}

/// Checks finiteness, a common motor count and strictly increasing time.
pub fn validate_samples(samples: &[TorqueSample]) -> Result<usize> {
    let n = samples.first().map(TorqueSample::n_motors).ok_or(Error::Empty("torque stream"))?;
    let mut prev = f64::NEG_INFINITY;
    for (i, s) in samples.iter().enumerate() {
        if s.n_motors() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: s.n_motors(),
            });
        }
        if !s.is_finite() {
            return Err(Error::NonFinite(format!("torque sample {i}")));
        }
        if s.t <= prev {
            return Err(Error::NonMonotonicTime {
                line: i,
                prev,
                t: s.t,
            });
        }
        prev = s.t;
    }
    Ok(n)
}
