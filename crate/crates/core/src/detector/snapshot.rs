//! Detector snapshot: threshold, update count and a config echo followed by
//! the model snapshot.
//!
//! ```text
//! cdpr-detector v1
//! threshold <f64>
//! update_count <count>
//! config.<key> <json value>     (one line per config field)
//! cdpr-gmm v1
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::DetectorConfig;
use crate::error::{Error, Result};
use crate::mixture::snapshot::{model_to_string, read_model, Lines};
use crate::mixture::MixtureModel;

pub const DETECTOR_HEADER: &str = "cdpr-detector v1";

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSnapshot {
    pub config: DetectorConfig,
    pub threshold: f64,
    pub update_count: usize,
    pub model: MixtureModel,
}

impl DetectorSnapshot {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{DETECTOR_HEADER}");
        let _ = writeln!(out, "threshold {:e}", self.threshold);
        let _ = writeln!(out, "update_count {}", self.update_count);
        let value = serde_json::to_value(&self.config).expect("config serializes");
        if let serde_json::Value::Object(map) = value {
            for (k, v) in map {
                let _ = writeln!(out, "config.{k} {v}");
            }
        }
        out.push_str(&model_to_string(&self.model));
        out
    }

    fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut lines = Lines::new(text, source);
        let (line, key, rest) = lines.next_entry()?;
        if format!("{key} {rest}") != DETECTOR_HEADER {
            return Err(lines.err(line, format!("expected header `{DETECTOR_HEADER}`")));
        }
        let threshold = lines.real("threshold")?;
        let update_count = lines.parse("update_count")?;
        let mut map = serde_json::Map::new();
        while let Some(key) = lines.peek_key() {
            let Some(field) = key.strip_prefix("config.") else { break };
            let field = field.to_string();
            let (line, _, rest) = lines.next_entry()?;
            let v: serde_json::Value =
                serde_json::from_str(rest).map_err(|e| lines.err(line, format!("`config.{field}`: {e}")))?;
            map.insert(field, v);
        }
        let config: DetectorConfig = serde_json::from_value(serde_json::Value::Object(map))
            .map_err(|e| lines.err(0, format!("config echo: {e}")))?;
        let model = read_model(&mut lines)?;
        if model.dim() != config.dim() {
            return Err(Error::DimensionMismatch {
                expected: config.dim(),
                found: model.dim(),
            });
        }
        Ok(Self {
            config,
            threshold,
            update_count,
            model,
        })
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::parse(text, Path::new("<detector>"))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::calibrate;
    use crate::streams::TorqueSample;

    #[test]
    fn round_trip() {
        let cfg = DetectorConfig {
            n_motors: 2,
            window: 2,
            smoothing: 5,
            calibration: 40,
            k_max: 2,
            refit_cooldown: Some(7),
            ..Default::default()
        };
        let samples: Vec<_> = (0..41)
            .map(|i| {
                let x = i as f64;
                TorqueSample::new(x, vec![(x * 0.9).sin(), (x * 0.4).cos()])
            })
            .collect();
        let snap = calibrate(&samples, &cfg).unwrap().snapshot().unwrap();
        let text = snap.to_text();
        let back = DetectorSnapshot::from_text(&text).unwrap();
        assert_eq!(back, snap);
        assert_eq!(back.threshold.to_bits(), snap.threshold.to_bits());
        assert_eq!(back.to_text(), text);
        assert!(DetectorSnapshot::from_text(&text.replace("cdpr-detector v1", "cdpr-detector v2")).is_err());
    }
}
