//! Time-weighted scoring of decision streams against ground truth, and the
//! three-method comparison table.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::detector::{run_pipeline, Decision, DetectorConfig, Flag, Method, PipelineOutput};
use crate::error::{Error, Result};
use crate::streams::{validate_truth, GroundTruthInterval, TorqueSample};

#[derive(Debug, Clone, PartialEq)]
pub struct EventOutcome {
    pub start: f64,
    pub end: f64,
    pub level: u8,
    /// Seconds from interval start to the first anomaly flag inside it;
    /// `None` when the event was missed.
    pub latency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub tp_pct: f64,
    pub tn_pct: f64,
    /// Time inside anomaly intervals, and the part of it flagged Anomaly.
    pub truth_seconds: f64,
    pub detected_seconds: f64,
    /// Unguarded time outside anomaly intervals, and the part flagged Normal.
    pub normal_seconds: f64,
    pub true_negative_seconds: f64,
    /// Time excluded from scoring: warm-up, settling and post-event guards.
    pub guarded_seconds: f64,
    pub total_seconds: f64,
    pub events: Vec<EventOutcome>,
}

impl EvalReport {
    pub fn missed(&self) -> usize {
        self.events.iter().filter(|e| e.latency.is_none()).count()
    }

    pub fn max_latency(&self) -> Option<f64> {
        self.events.iter().filter_map(|e| e.latency).reduce(f64::max)
    }

    pub fn mean_latency(&self) -> Option<f64> {
        let l: Vec<f64> = self.events.iter().filter_map(|e| e.latency).collect();
        (!l.is_empty()).then(|| l.iter().sum::<f64>() / l.len() as f64)
    }
}

fn pct(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (100.0 * num / den).clamp(0.0, 100.0)
    } else {
        100.0
    }
}

/// Each decision stands for the interval until the next one; the last
/// reuses the previous spacing. Level-0 intervals count as normal time.
pub fn score(decisions: &[Decision], truth: &[GroundTruthInterval], guard_seconds: f64) -> Result<EvalReport> {
    if decisions.is_empty() {
        return Err(Error::Empty("decision stream"));
    }
    validate_truth(truth)?;
    let anomalies: Vec<&GroundTruthInterval> = truth.iter().filter(|iv| iv.level > 0).collect();
    let mut r = EvalReport {
        events: anomalies
            .iter()
            .map(|iv| EventOutcome {
                start: iv.start,
                end: iv.end,
                level: iv.level,
                latency: None,
            })
            .collect(),
        ..Default::default()
    };

    let mut cursor = 0;
    let mut last_dt = 0.0;
    for (i, d) in decisions.iter().enumerate() {
        let dt = match decisions.get(i + 1) {
            Some(next) => next.t - d.t,
            None => last_dt,
        };
        last_dt = dt;
        r.total_seconds += dt;

        // Skip intervals whose guard has fully elapsed.
        while cursor < anomalies.len() && d.t >= anomalies[cursor].end + guard_seconds {
            cursor += 1;
        }
        let mut inside = None;
        let mut guarded = false;
        for (k, iv) in anomalies.iter().enumerate().skip(cursor) {
            if d.t < iv.start {
                break;
            }
            if iv.contains(d.t) {
                inside = Some(k);
                break;
            }
            if d.t < iv.end + guard_seconds {
                guarded = true;
            }
        }

        if let Some(k) = inside {
            r.truth_seconds += dt;
            if d.flag == Flag::Anomaly {
                r.detected_seconds += dt;
                let ev = &mut r.events[k];
                if ev.latency.is_none() {
                    ev.latency = Some(d.t - ev.start);
                }
            }
        } else if guarded || !d.flag.is_scored() {
            r.guarded_seconds += dt;
        } else {
            r.normal_seconds += dt;
            if d.flag == Flag::Normal {
                r.true_negative_seconds += dt;
            }
        }
    }
    r.tp_pct = pct(r.detected_seconds, r.truth_seconds);
    r.tn_pct = pct(r.true_negative_seconds, r.normal_seconds);
    Ok(r)
}

#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: Method,
    pub report: EvalReport,
    pub output: PipelineOutput,
}

/// Runs all three methods on the same stream and scores each.
pub fn compare_methods(
    samples: &[TorqueSample],
    truth: &[GroundTruthInterval],
    cfg: &DetectorConfig,
) -> Result<Vec<MethodResult>> {
    validate_truth(truth)?;
    Method::ALL
        .par_iter()
        .map(|&method| {
            let output = run_pipeline(samples, cfg, method)?;
            let report = score(&output.decisions, truth, cfg.guard_seconds)?;
            Ok(MethodResult { method, report, output })
        })
        .collect()
}

/// One row of the comparison table.
#[derive(Debug, Clone)]
pub struct ScenarioRow {
    pub name: String,
    pub results: Vec<(Method, EvalReport, usize)>,
}

impl ScenarioRow {
    pub fn new(name: impl Into<String>, results: &[MethodResult]) -> Self {
        Self {
            name: name.into(),
            results: results
                .iter()
                .map(|r| (r.method, r.report.clone(), r.output.update_count))
                .collect(),
        }
    }

    pub fn get(&self, method: Method) -> Option<&EvalReport> {
        self.results.iter().find(|r| r.0 == method).map(|r| &r.1)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ComparisonTable {
    pub rows: Vec<ScenarioRow>,
}

impl ComparisonTable {
    pub fn push(&mut self, row: ScenarioRow) {
        self.rows.push(row);
    }

    /// Unweighted mean of `(TP%, TN%)` over rows.
    pub fn average(&self, method: Method) -> Option<(f64, f64)> {
        let v: Vec<&EvalReport> = self.rows.iter().filter_map(|r| r.get(method)).collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        Some((
            v.iter().map(|r| r.tp_pct).sum::<f64>() / n,
            v.iter().map(|r| r.tn_pct).sum::<f64>() / n,
        ))
    }

    pub fn to_text(&self) -> String {
        let name_w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max("Scenario".len());
        let mut out = String::new();
        let _ = write!(out, "{:<name_w$}", "Scenario");
        for m in Method::ALL {
            let _ = write!(out, " | {:^22}", m.label());
        }
        out.push('\n');
        let _ = write!(out, "{:<name_w$}", "");
        for _ in Method::ALL {
            let _ = write!(out, " | {:>10} {:>11}", "TP %", "TN %");
        }
        out.push('\n');
        let rule = name_w + Method::ALL.len() * 25;
        out.push_str(&"-".repeat(rule));
        out.push('\n');
        let cell = |out: &mut String, v: Option<(f64, f64)>| match v {
            Some((tp, tn)) => {
                let _ = write!(out, " | {tp:>10.1} {tn:>11.1}");
            }
            None => {
                let _ = write!(out, " | {:>10} {:>11}", "-", "-");
            }
        };
        for row in &self.rows {
            let _ = write!(out, "{:<name_w$}", row.name);
            for m in Method::ALL {
                cell(&mut out, row.get(m).map(|r| (r.tp_pct, r.tn_pct)));
            }
            out.push('\n');
        }
        out.push_str(&"-".repeat(rule));
        out.push('\n');
        let _ = write!(out, "{:<name_w$}", "Average");
        for m in Method::ALL {
            cell(&mut out, self.average(m));
        }
        out.push('\n');
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let to_err = |e: csv::Error| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            kind => Error::InvalidConfig(format!("{kind:?}")),
        };
        let mut w = csv::Writer::from_path(path).map_err(to_err)?;
        w.write_record([
            "scenario",
            "method",
            "tp_pct",
            "tn_pct",
            "truth_s",
            "normal_s",
            "guarded_s",
            "events",
            "missed",
            "max_latency_s",
            "updates",
        ])
        .map_err(to_err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.rows {
            for (m, r, updates) in &row.results {
                w.write_record([
                    row.name.clone(),
                    m.to_string(),
                    r.tp_pct.to_string(),
                    r.tn_pct.to_string(),
                    r.truth_seconds.to_string(),
                    r.normal_seconds.to_string(),
                    r.guarded_seconds.to_string(),
                    r.events.len().to_string(),
                    r.missed().to_string(),
                    opt(r.max_latency()),
                    updates.to_string(),
                ])
                .map_err(to_err)?;
            }
        }
        for m in Method::ALL {
            if let Some((tp, tn)) = self.average(m) {
                let mut rec = vec!["Average".to_string(), m.to_string(), tp.to_string(), tn.to_string()];
                rec.resize(11, String::new());
                w.write_record(&rec).map_err(to_err)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Plain-text summary of one scored stream.
pub fn report_text(r: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "TP: {:.2} %  ({:.1} s of {:.1} s)", r.tp_pct, r.detected_seconds, r.truth_seconds);
    let _ = writeln!(
        out,
        "TN: {:.2} %  ({:.1} s of {:.1} s)",
        r.tn_pct, r.true_negative_seconds, r.normal_seconds
    );
    let _ = writeln!(out, "guarded: {:.1} s  total: {:.1} s", r.guarded_seconds, r.total_seconds);
    let _ = writeln!(out, "events: {}  missed: {}", r.events.len(), r.missed());
    for (i, e) in r.events.iter().enumerate() {
        let lat = e.latency.map_or("missed".to_string(), |l| format!("{l:.2} s"));
        let _ = writeln!(out, "  {:>3}: [{:.2}, {:.2}) level {}  latency {lat}", i + 1, e.start, e.end, e.level);
    }
    out
}
