use std::collections::VecDeque;
use std::path::Path;

use super::{calibrate, mean, Decision, DetectorConfig, Flag};
use crate::error::{Error, Result};
use crate::mixture::MixtureModel;
use crate::streams::{validate_samples, TorqueSample};

/// Samples consumed by calibration: `C` windows of `M` samples at stride 1.
pub fn calibration_len(cfg: &DetectorConfig) -> usize {
    cfg.calibration + cfg.window - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Power,
    DistanceNoUpdate,
    DistanceAdaptive,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Power, Method::DistanceNoUpdate, Method::DistanceAdaptive];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Power => "power",
            Method::DistanceNoUpdate => "distance-no-update",
            Method::DistanceAdaptive => "distance-adaptive",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Power => "Power",
            Method::DistanceNoUpdate => "Distance (no update)",
            Method::DistanceAdaptive => "Distance (adaptive)",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected power, distance-no-update or distance-adaptive)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdChange {
    pub sample_index: usize,
    pub t: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub method: Method,
    pub decisions: Vec<Decision>,
    /// Threshold at calibration followed by one entry per refit.
    pub thresholds: Vec<ThresholdChange>,
    pub update_count: usize,
    pub failed_updates: usize,
    /// Final model; `None` for the power method.
    pub model: Option<MixtureModel>,
}

impl PipelineOutput {
    pub fn final_threshold(&self) -> f64 {
        self.thresholds.last().map_or(f64::NAN, |c| c.threshold)
    }
}

/// Runs one method over a full recording. The first `C + M − 1` samples are
/// calibration and come back flagged `Warmup` for every method.
pub fn run_pipeline(samples: &[TorqueSample], cfg: &DetectorConfig, method: Method) -> Result<PipelineOutput> {
    cfg.validate()?;
    let n = validate_samples(samples)?;
    if n != cfg.n_motors {
        return Err(Error::DimensionMismatch {
            expected: cfg.n_motors,
            found: n,
        });
    }
    match method {
        Method::Power => power(samples, cfg),
        Method::DistanceNoUpdate => distance(samples, cfg, false),
        Method::DistanceAdaptive => distance(samples, cfg, true),
    }
}

pub fn run_distance_adaptive(samples: &[TorqueSample], cfg: &DetectorConfig) -> Result<Vec<Decision>> {
    Ok(run_pipeline(samples, cfg, Method::DistanceAdaptive)?.decisions)
}

pub fn run_distance_no_update(samples: &[TorqueSample], cfg: &DetectorConfig) -> Result<Vec<Decision>> {
    Ok(run_pipeline(samples, cfg, Method::DistanceNoUpdate)?.decisions)
}

pub fn run_power_baseline(samples: &[TorqueSample], cfg: &DetectorConfig) -> Result<Vec<Decision>> {
    Ok(run_pipeline(samples, cfg, Method::Power)?.decisions)
}

fn warmup(index: usize, t: f64, distance: Option<f64>, smoothed: Option<f64>) -> Decision {
    Decision {
        sample_index: index,
        t,
        distance,
        smoothed,
        flag: Flag::Warmup,
        model_updated: false,
    }
}

fn distance(samples: &[TorqueSample], cfg: &DetectorConfig, updates: bool) -> Result<PipelineOutput> {
    let prefix = calibration_len(cfg);
    let mut det = calibrate(samples, cfg)?;
    det.set_updates_enabled(updates);

    let mut decisions = Vec::with_capacity(samples.len());
    for (i, s) in samples[..cfg.window - 1].iter().enumerate() {
        decisions.push(warmup(i, s.t, None, None));
    }
    let mut ring = VecDeque::with_capacity(cfg.smoothing);
    for (w, &d) in det.calibration_distances().iter().enumerate() {
        ring.push_back(d);
        if ring.len() > cfg.smoothing {
            ring.pop_front();
        }
        let i = w + cfg.window - 1;
        decisions.push(warmup(i, samples[i].t, Some(d), Some(mean(&ring))));
    }

    let mut thresholds = vec![ThresholdChange {
        sample_index: prefix - 1,
        t: samples[prefix - 1].t,
        threshold: det.threshold().expect("calibrated"),
    }];
    for s in &samples[prefix..] {
        let dec = det.step(s)?;
        if dec.model_updated {
            thresholds.push(ThresholdChange {
                sample_index: dec.sample_index,
                t: dec.t,
                threshold: det.threshold().expect("calibrated"),
            });
        }
        decisions.push(dec);
    }
    Ok(PipelineOutput {
        method: if updates { Method::DistanceAdaptive } else { Method::DistanceNoUpdate },
        decisions,
        thresholds,
        update_count: det.update_count(),
        failed_updates: det.failed_updates(),
        model: det.model().cloned(),
    })
}

/// Moving average of the torque 2-norm against the largest calibration value.
fn power(samples: &[TorqueSample], cfg: &DetectorConfig) -> Result<PipelineOutput> {
    let prefix = calibration_len(cfg);
    if samples.len() < prefix {
        return Err(Error::InsufficientSamples {
            needed: prefix,
            got: samples.len(),
        });
    }
    let s = cfg.smoothing;
    let mut ring = VecDeque::with_capacity(s);
    let mut smoothed = Vec::with_capacity(samples.len());
    for x in samples {
        ring.push_back(x.power());
        if ring.len() > s {
            ring.pop_front();
        }
        smoothed.push((x.power(), mean(&ring)));
    }
    let full = &smoothed[(s - 1).min(prefix - 1)..prefix];
    let threshold = full.iter().map(|p| p.1).fold(f64::MIN_POSITIVE, f64::max);

    let decisions = samples
        .iter()
        .zip(&smoothed)
        .enumerate()
        .map(|(i, (x, &(raw, avg)))| {
            if i < prefix {
                warmup(i, x.t, Some(raw), Some(avg))
            } else {
                Decision {
                    sample_index: i,
                    t: x.t,
                    distance: Some(raw),
                    smoothed: Some(avg),
                    flag: if avg > threshold { Flag::Anomaly } else { Flag::Normal },
                    model_updated: false,
                }
            }
        })
        .collect();
    Ok(PipelineOutput {
        method: Method::Power,
        decisions,
        thresholds: vec![ThresholdChange {
            sample_index: prefix - 1,
            t: samples[prefix - 1].t,
            threshold,
        }],
        update_count: 0,
        failed_updates: 0,
        model: None,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("{kind:?}"),
        },
    }
}

/// `index,t,distance,smoothed,flag,updated`; absent values are empty fields.
pub fn write_decisions_csv(path: &Path, decisions: &[Decision]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["index", "t", "distance", "smoothed", "flag", "updated"])
        .map_err(|e| csv_err(path, e))?;
    for d in decisions {
        w.write_record([
            d.sample_index.to_string(),
            d.t.to_string(),
            opt(d.distance),
            opt(d.smoothed),
            d.flag.to_string(),
            d.model_updated.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_decisions_csv(path: &Path) -> Result<Vec<Decision>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["index", "t", "distance", "smoothed", "flag", "updated"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "expected header `index,t,distance,smoothed,flag,updated`".into(),
        });
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        if rec.len() != 6 {
            return Err(bad(format!("expected 6 columns, found {}", rec.len())));
        }
        let real = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                return Ok(None);
            }
            rec[i]
                .parse()
                .map(Some)
                .map_err(|_| bad(format!("cannot parse `{}` in column {}", &rec[i], i + 1)))
        };
        out.push(Decision {
            sample_index: rec[0].parse().map_err(|_| bad(format!("bad index `{}`", &rec[0])))?,
            t: real(1)?.ok_or_else(|| bad("missing t".into()))?,
            distance: real(2)?,
            smoothed: real(3)?,
            flag: rec[4].parse().map_err(bad)?,
            model_updated: rec[5].parse().map_err(|_| bad(format!("bad updated `{}`", &rec[5])))?,
        });
    }
    Ok(out)
}
