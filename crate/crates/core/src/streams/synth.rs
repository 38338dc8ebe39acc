//! Seeded synthetic torque streams: base torques, Gaussian noise, slow drift
//! and wind-like disturbance events.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{GroundTruthInterval, TorqueSample};
use crate::error::{Error, Result};

/// Baseline drift added to every channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drift {
    None,
    /// `rate[i] · t`, torque units per second.
    Linear { rate: Vec<f64> },
    /// `amplitude[i] · sin(2πt / period)`.
    Sinusoidal { amplitude: Vec<f64>, period: f64 },
    /// Thermal settling, `amplitude[i] · (1 − exp(−t / time_constant))`.
    Exponential { amplitude: Vec<f64>, time_constant: f64 },
}

impl Drift {
    fn at(&self, t: f64, channel: usize) -> f64 {
        match self {
            Drift::None => 0.0,
            Drift::Linear { rate } => rate[channel] * t,
            Drift::Sinusoidal { amplitude, period } => {
                amplitude[channel] * (2.0 * std::f64::consts::PI * t / period).sin()
            }
            Drift::Exponential {
                amplitude,
                time_constant,
            } => amplitude[channel] * (1.0 - (-t / time_constant).exp()),
        }
    }

    fn channels(&self) -> Option<usize> {
        match self {
            Drift::None => None,
            Drift::Linear { rate } => Some(rate.len()),
            Drift::Sinusoidal { amplitude, .. } | Drift::Exponential { amplitude, .. } => Some(amplitude.len()),
        }
    }
}

/// A disturbance active on `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthEvent {
    pub start: f64,
    pub end: f64,
    pub level: u8,
    pub offset: Vec<f64>,
    pub extra_noise_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthScenario {
    /// Seconds.
    pub duration: f64,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
    pub n: usize,
    pub base_torques: Vec<f64>,
    pub noise_std: Vec<f64>,
    #[serde(default = "no_drift")]
    pub drift: Drift,
    #[serde(default)]
    pub events: Vec<SynthEvent>,
    #[serde(default)]
    pub seed: u64,
}

fn default_rate() -> f64 {
    100.0
}

fn no_drift() -> Drift {
    Drift::None
}

impl SynthScenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Scenario(msg));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return bad(format!("sample_rate must be positive, got {}", self.sample_rate));
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        let n = self.n;
        let check_len = |name: &str, len: usize| -> Result<()> {
            if len != n {
                return Err(Error::Scenario(format!("{name} has {len} channels, expected {n}")));
            }
            Ok(())
        };
        check_len("base_torques", self.base_torques.len())?;
        check_len("noise_std", self.noise_std.len())?;
        if let Some(c) = self.drift.channels() {
            check_len("drift", c)?;
        }
        match self.drift {
            Drift::Sinusoidal { period: p, .. } | Drift::Exponential { time_constant: p, .. } if !(p > 0.0) => {
                return bad("drift period/time constant must be positive".into());
            }
            _ => {}
        }
        if self.noise_std.iter().any(|s| !(*s >= 0.0)) {
            return bad("noise_std must be non-negative".into());
        }
        let mut prev_end = f64::NEG_INFINITY;
        for (i, ev) in self.events.iter().enumerate() {
            check_len(&format!("event {i} offset"), ev.offset.len())?;
            check_len(&format!("event {i} extra_noise_std"), ev.extra_noise_std.len())?;
            if !(ev.start >= 0.0 && ev.start < ev.end && ev.end <= self.duration) {
                return bad(format!("event {i} [{}, {}) outside [0, {}]", ev.start, ev.end, self.duration));
            }
            if ev.start < prev_end {
                return bad(format!("event {i} overlaps the previous event"));
            }
            if ev.level > 3 {
                return bad(format!("event {i} level {} above 3", ev.level));
            }
            prev_end = ev.end;
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }
}

/// Generates the stream and the ground truth, one interval per event.
/// Level-0 events mark calm segments and carry no offset in the presets.
pub fn generate(scenario: &SynthScenario) -> Result<(Vec<TorqueSample>, Vec<GroundTruthInterval>)> {
    scenario.validate()?;
    let n = scenario.n;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut samples = Vec::with_capacity(scenario.n_samples());
    let mut next_event = 0;
    for i in 0..scenario.n_samples() {
        let t = i as f64 / scenario.sample_rate;
        while next_event < scenario.events.len() && scenario.events[next_event].end <= t {
            next_event += 1;
        }
        let active = scenario.events.get(next_event).filter(|ev| ev.start <= t);
        let tau = (0..n)
            .map(|c| {
                // Both draws happen every sample so events never shift the
                // base noise realization.
                let z: f64 = StandardNormal.sample(&mut rng);
                let z_extra: f64 = StandardNormal.sample(&mut rng);
                let mut v = scenario.base_torques[c] + scenario.drift.at(t, c) + scenario.noise_std[c] * z;
                if let Some(ev) = active {
                    v += ev.offset[c] + ev.extra_noise_std[c] * z_extra;
                }
                v
            })
            .collect();
        samples.push(TorqueSample { t, tau });
    }
    let truth = scenario
        .events
        .iter()
        .map(|ev| GroundTruthInterval {
            start: ev.start,
            end: ev.end,
            level: ev.level,
        })
        .collect();
    Ok((samples, truth))
}

/// Scenario presets mirroring the three rig test protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Rest, then alternating on/off gusts at one level. No drift.
    Type1,
    /// Long rest with thermal drift, then on/off gust cycles.
    Type2,
    /// Rest, then random levels 0–3 with random durations, slow drift.
    Type3,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "type1" => Ok(Preset::Type1),
            "type2" => Ok(Preset::Type2),
            "type3" => Ok(Preset::Type3),
            other => Err(Error::Scenario(format!("unknown preset `{other}` (expected type1, type2 or type3)"))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Preset::Type1 => "type1",
            Preset::Type2 => "type2",
            Preset::Type3 => "type3",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetOptions {
    pub seed: u64,
    /// Total length in seconds; `None` uses the preset's full-scale length.
    /// All segment timings scale with it.
    pub duration: Option<f64>,
    /// Disturbance level for type1/type2 (type3 draws its own).
    pub level: u8,
    pub n: usize,
    pub sample_rate: f64,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            duration: None,
            level: 1,
            n: 4,
            sample_rate: 100.0,
        }
    }
}

/// Per-channel noise standard deviation of the presets (N·m).
pub const PRESET_NOISE_STD: f64 = 0.01;

/// RMS per-channel offset at level 1, in noise standard deviations. This is
/// below the per-sample noise peak, and the offset direction is orthogonal
/// to the base torques so it barely moves the torque norm.
pub const LEVEL_OFFSET_SIGMAS: f64 = 3.0;

const MIN: f64 = 60.0;
const HOUR: f64 = 3600.0;

/// Winch torques for the rest tensions of the 4-cable rig (45 mm drums).
fn base_torques(n: usize) -> Vec<f64> {
    const REST: [f64; 4] = [15.89, 11.19, 15.2, 12.57];
    (0..n).map(|i| REST.get(i).copied().unwrap_or(13.0) * 0.045).collect()
}

/// Unit direction of the wind load: alternating pairs of cables gain and
/// lose tension, with the common-mode part removed.
fn wind_direction(base: &[f64]) -> Vec<f64> {
    let n = base.len();
    if n == 1 {
        return vec![1.0];
    }
    let pattern: Vec<f64> = (0..n).map(|i| if (i / 2) % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let bn = base.iter().map(|b| b * b).sum::<f64>().sqrt();
    let proj: f64 = pattern.iter().zip(base).map(|(p, b)| p * b / bn).sum();
    let v: Vec<f64> = pattern.iter().zip(base).map(|(p, b)| p - proj * b / bn).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

impl Preset {
    pub fn full_duration(self) -> f64 {
        match self {
            Preset::Type1 => 2.0 * HOUR,
            Preset::Type2 => 3.0 * HOUR,
            Preset::Type3 => 6.0 * HOUR,
        }
    }

    pub fn build(self, opts: &PresetOptions) -> Result<SynthScenario> {
        let duration = opts.duration.unwrap_or_else(|| self.full_duration());
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::Scenario(format!("duration must be positive, got {duration}")));
        }
        if opts.level == 0 || opts.level > 3 {
            return Err(Error::Scenario(format!("level must be 1-3, got {}", opts.level)));
        }
        let n = opts.n.max(1);
        let scale = duration / self.full_duration();
        let base = base_torques(n);
        let dir = wind_direction(&base);
        let sigma = PRESET_NOISE_STD;
        let event = |start: f64, end: f64, level: u8| {
            let amp = LEVEL_OFFSET_SIGMAS * sigma * (n as f64).sqrt() * level as f64;
            SynthEvent {
                start,
                end,
                level,
                offset: dir.iter().map(|d| d * amp).collect(),
                extra_noise_std: vec![0.3 * sigma * level as f64; n],
            }
        };
        let cycles = |rest: f64, on: f64, off: f64, level: u8| {
            let mut events = Vec::new();
            let mut t = rest;
            while t + on <= duration {
                events.push(event(t, t + on, level));
                t += on + off;
            }
            events
        };

        let (drift, events) = match self {
            Preset::Type1 => (Drift::None, cycles(10.0 * MIN * scale, 10.0 * MIN * scale, 10.0 * MIN * scale, opts.level)),
            Preset::Type2 => {
                let rest = HOUR * scale;
                let drift = Drift::Exponential {
                    amplitude: vec![3.0 * sigma; n],
                    time_constant: rest / 3.0,
                };
                (drift, cycles(rest, 10.0 * MIN * scale, 10.0 * MIN * scale, opts.level))
            }
            Preset::Type3 => {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x7479_7065_3300_0000);
                let mut events = Vec::new();
                let mut t = HOUR * scale;
                loop {
                    let len = (rng.random_range(1.0..=20.0) * MIN * scale).max(MIN);
                    let level: u8 = rng.random_range(0..=3);
                    if t + len > duration {
                        break;
                    }
                    events.push(event(t, t + len, level));
                    t += len;
                }
                let drift = Drift::Sinusoidal {
                    amplitude: vec![0.5 * sigma; n],
                    period: 2.0 * HOUR,
                };
                (drift, events)
            }
        };
        let scenario = SynthScenario {
            duration,
            sample_rate: opts.sample_rate,
            n,
            base_torques: base,
            noise_std: vec![sigma; n],
            drift,
            events,
            seed: opts.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
