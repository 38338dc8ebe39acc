//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or runtime failure, 2 invalid input or
//! usage, 3 unstable pose (`stability`) or a missed event (`compare`).

mod manifest;

pub use manifest::{sha256_file, InputRecord, RunManifest, MANIFEST_NAME};

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::detector::{run_pipeline, write_decisions_csv, DetectorConfig, Flag, Method, ThresholdChange};
use crate::error::{Error, Result};
use crate::eval::{compare_methods, report_text, score, ComparisonTable, EvalReport, ScenarioRow};
use crate::stability::{reduced_hessian, GeometryConfig};
use crate::streams::{
    generate, read_torque_csv, read_truth_csv, write_torque_csv, write_truth_csv, GroundTruthInterval, Preset,
    PresetOptions, SynthScenario, TorqueSample,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_OUTCOME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cdpr-anomaly", version, about = "Torque-stream anomaly detection for cable robots at rest")]
pub struct Cli {
    /// Seed for synthesis and EM initialization.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML run configuration with optional [detector] and [synth] tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic torque stream and its ground truth.
    Synth(SynthArgs),
    /// Calibrate on the stream prefix and flag every later sample.
    Detect(DetectArgs),
    /// Score a decision stream against ground truth.
    Eval(EvalArgs),
    /// Run all three methods on the same streams and tabulate TP/TN.
    Compare(CompareArgs),
    /// Static-stability check of a rig pose.
    Stability(StabilityArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, conflicts_with = "scenario")]
    pub preset: Option<Preset>,
    /// Scenario description in TOML (see `scenario.toml` written by a preset run).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Length in seconds; preset timings scale with it.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Disturbance level 1-3 for type1/type2.
    #[arg(long)]
    pub level: Option<u8>,
    #[arg(long)]
    pub motors: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct DetectorFlags {
    /// Samples per window (M).
    #[arg(long)]
    pub window: Option<usize>,
    /// Distances averaged before thresholding (S).
    #[arg(long)]
    pub smoothing: Option<usize>,
    /// Calibration windows (C).
    #[arg(long)]
    pub calibration: Option<usize>,
    /// Refit band width as a fraction of the threshold.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Seconds excluded from scoring after each event.
    #[arg(long)]
    pub guard: Option<f64>,
    #[arg(long)]
    pub k_max: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Torque CSV (`t,tau1,...,taun`).
    pub input: PathBuf,
    /// Keep the calibration model for the whole stream.
    #[arg(long, conflicts_with = "power")]
    pub no_update: bool,
    /// Threshold the smoothed torque norm instead.
    #[arg(long)]
    pub power: bool,
    #[command(flatten)]
    pub detector: DetectorFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub decisions: PathBuf,
    pub truth: PathBuf,
    /// Seconds excluded after each event.
    #[arg(long)]
    pub guard: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Torque CSV; repeat together with --truth.
    #[arg(long)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub truth: Vec<PathBuf>,
    /// Synthesize these presets instead (comma separated).
    #[arg(long, value_delimiter = ',', conflicts_with = "data")]
    pub preset: Vec<Preset>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub level: Option<u8>,
    /// Also write the per-method decision streams.
    #[arg(long)]
    pub traces: bool,
    #[command(flatten)]
    pub detector: DetectorFlags,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    /// Geometry TOML; the built-in reference rig when omitted.
    pub geometry: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub preset: Preset,
    pub duration: Option<f64>,
    pub level: u8,
    pub motors: usize,
    pub sample_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let d = PresetOptions::default();
        Self {
            preset: Preset::Type1,
            duration: d.duration,
            level: d.level,
            motors: d.n,
            sample_rate: d.sample_rate,
        }
    }
}

/// Contents of `--config`. Flags override it; it overrides defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub detector: DetectorConfig,
    pub synth: SynthConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.span().map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1)),
            msg: e.message().to_string(),
        })
    }

    fn resolve(path: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.seed = seed.or(cfg.seed);
        if let Some(seed) = cfg.seed {
            cfg.detector.seed = seed;
        }
        Ok(cfg)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.detector.seed)
    }
}

impl DetectorFlags {
    fn apply(&self, cfg: &mut DetectorConfig) {
        let set = |dst: &mut usize, v: Option<usize>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut cfg.window, self.window);
        set(&mut cfg.smoothing, self.smoothing);
        set(&mut cfg.calibration, self.calibration);
        set(&mut cfg.k_max, self.k_max);
        if let Some(g) = self.gamma {
            cfg.gamma = g;
        }
        if let Some(g) = self.guard {
            cfg.guard_seconds = g;
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_thresholds_csv(path: &Path, changes: &[ThresholdChange]) -> Result<()> {
    let mut text = String::from("index,t,threshold\n");
    for c in changes {
        text.push_str(&format!("{},{},{}\n", c.sample_index, c.t, c.threshold));
    }
    write_text(path, &text)
}

fn write_eval_csvs(dir: &Path, r: &EvalReport) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let summary = format!(
        "tp_pct,tn_pct,truth_s,normal_s,guarded_s,total_s,events,missed,max_latency_s,mean_latency_s\n{},{},{},{},{},{},{},{},{},{}\n",
        r.tp_pct,
        r.tn_pct,
        r.truth_seconds,
        r.normal_seconds,
        r.guarded_seconds,
        r.total_seconds,
        r.events.len(),
        r.missed(),
        opt(r.max_latency()),
        opt(r.mean_latency()),
    );
    write_text(&dir.join("report.csv"), &summary)?;
    let mut events = String::from("start,end,level,latency_s\n");
    for e in &r.events {
        events.push_str(&format!("{},{},{},{}\n", e.start, e.end, e.level, opt(e.latency)));
    }
    write_text(&dir.join("events.csv"), &events)
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    let cfg = RunConfig::resolve(cli.config.as_deref(), cli.seed)?;
    create_dir(&cli.out_dir)?;
    let mut manifest = match &cli.command {
        Command::Synth(a) => cmd_synth(a, cfg, &cli.out_dir)?,
        Command::Detect(a) => cmd_detect(a, cfg, &cli.out_dir)?,
        Command::Eval(a) => cmd_eval(a, cfg, &cli.out_dir)?,
        Command::Compare(a) => cmd_compare(a, cfg, &cli.out_dir)?,
        Command::Stability(a) => cmd_stability(a, cfg, &cli.out_dir)?,
    };
    if let Some(cfg_path) = &cli.config {
        manifest.0.inputs.insert(
            0,
            InputRecord {
                path: cfg_path.clone(),
                sha256: sha256_file(cfg_path)?,
            },
        );
    }
    manifest.0.write(&cli.out_dir)?;
    Ok(manifest.1)
}

fn synth_options(cfg: &SynthConfig, seed: u64, duration: Option<f64>, level: Option<u8>) -> PresetOptions {
    PresetOptions {
        seed,
        duration: duration.or(cfg.duration),
        level: level.unwrap_or(cfg.level),
        n: cfg.motors,
        sample_rate: cfg.sample_rate,
    }
}

fn cmd_synth(a: &SynthArgs, mut cfg: RunConfig, out: &Path) -> Result<(RunManifest, i32)> {
    if let Some(m) = a.motors {
        cfg.synth.motors = m;
    }
    let seed = cfg.seed();
    let mut inputs = Vec::new();
    let scenario = match &a.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut s: SynthScenario = toml::from_str(&text).map_err(|e| Error::Parse {
                path: path.clone(),
                line: e.span().map_or(0, |sp| text[..sp.start.min(text.len())].lines().count().max(1)),
                msg: e.message().to_string(),
            })?;
            // The file's own seed applies unless one was given explicitly.
            if let Some(seed) = cfg.seed {
                s.seed = seed;
            }
            if let Some(d) = a.duration {
                s.duration = d;
            }
            inputs.push(path.clone());
            s
        }
        None => {
            let preset = a.preset.unwrap_or(cfg.synth.preset);
            cfg.synth.preset = preset;
            preset.build(&synth_options(&cfg.synth, seed, a.duration, a.level))?
        }
    };
    let (samples, truth) = generate(&scenario)?;
    write_torque_csv(&out.join("torque.csv"), &samples)?;
    write_truth_csv(&out.join("truth.csv"), &truth)?;
    let echo = toml::to_string(&scenario).map_err(|e| Error::Scenario(e.to_string()))?;
    write_text(&out.join("scenario.toml"), &echo)?;
    println!(
        "{} samples over {:.1} s, {} truth intervals",
        samples.len(),
        scenario.duration,
        truth.len()
    );

    let mut m = RunManifest::new("synth", scenario.seed, &scenario);
    for p in &inputs {
        m.input(p)?;
    }
    for name in ["torque.csv", "truth.csv", "scenario.toml"] {
        m.output(name);
    }
    Ok((m, EXIT_OK))
}

fn detector_config(cfg: &RunConfig, flags: &DetectorFlags, n_motors: usize) -> DetectorConfig {
    let mut d = cfg.detector.clone();
    flags.apply(&mut d);
    d.n_motors = n_motors;
    d
}

fn load_stream(path: &Path) -> Result<Vec<TorqueSample>> {
    let samples = read_torque_csv(path)?;
    if samples.is_empty() {
        return Err(Error::Empty("torque stream"));
    }
    Ok(samples)
}

fn cmd_detect(a: &DetectArgs, cfg: RunConfig, out: &Path) -> Result<(RunManifest, i32)> {
    let samples = load_stream(&a.input)?;
    let dcfg = detector_config(&cfg, &a.detector, samples[0].n_motors());
    let method = if a.power {
        Method::Power
    } else if a.no_update {
        Method::DistanceNoUpdate
    } else {
        Method::DistanceAdaptive
    };
    let result = run_pipeline(&samples, &dcfg, method)?;
    write_decisions_csv(&out.join("decisions.csv"), &result.decisions)?;
    write_thresholds_csv(&out.join("thresholds.csv"), &result.thresholds)?;
    let anomalies = result.decisions.iter().filter(|d| d.flag == Flag::Anomaly).count();
    println!(
        "{}: {} decisions, {} flagged, {} model updates, final threshold {:.4}",
        method,
        result.decisions.len(),
        anomalies,
        result.update_count,
        result.final_threshold()
    );

    let mut m = RunManifest::new("detect", dcfg.seed, serde_json::json!({ "method": method.as_str(), "detector": &dcfg }));
    m.input(&a.input)?;
    m.output("decisions.csv");
    m.output("thresholds.csv");
    if let Some(model) = &result.model {
        let snap = crate::detector::DetectorSnapshot {
            config: dcfg.clone(),
            threshold: result.final_threshold(),
            update_count: result.update_count,
            model: model.clone(),
        };
        snap.save(&out.join("detector.snap"))?;
        m.output("detector.snap");
    }
    Ok((m, EXIT_OK))
}

fn cmd_eval(a: &EvalArgs, cfg: RunConfig, out: &Path) -> Result<(RunManifest, i32)> {
    let decisions = crate::detector::read_decisions_csv(&a.decisions)?;
    let truth = read_truth_csv(&a.truth)?;
    let guard = a.guard.unwrap_or(cfg.detector.guard_seconds);
    let report = score(&decisions, &truth, guard)?;
    let text = report_text(&report);
    print!("{text}");
    write_text(&out.join("report.txt"), &text)?;
    write_eval_csvs(out, &report)?;

    let mut m = RunManifest::new("eval", cfg.seed(), serde_json::json!({ "guard_seconds": guard }));
    m.input(&a.decisions)?;
    m.input(&a.truth)?;
    for name in ["report.txt", "report.csv", "events.csv"] {
        m.output(name);
    }
    Ok((m, EXIT_OK))
}

fn cmd_compare(a: &CompareArgs, cfg: RunConfig, out: &Path) -> Result<(RunManifest, i32)> {
    let mut scenarios: Vec<(String, Vec<TorqueSample>, Vec<GroundTruthInterval>)> = Vec::new();
    let mut m_inputs = Vec::new();
    if !a.preset.is_empty() {
        for &p in &a.preset {
            let opts = synth_options(&cfg.synth, cfg.seed(), a.duration, a.level);
            let (s, t) = generate(&p.build(&opts)?)?;
            scenarios.push((p.to_string(), s, t));
        }
    } else {
        if a.data.is_empty() {
            return Err(Error::InvalidConfig("compare needs --data/--truth pairs or --preset".into()));
        }
        if a.data.len() != a.truth.len() {
            return Err(Error::InvalidConfig(format!(
                "{} --data files but {} --truth files",
                a.data.len(),
                a.truth.len()
            )));
        }
        for (d, t) in a.data.iter().zip(&a.truth) {
            let name = d.file_stem().map_or("stream".into(), |s| s.to_string_lossy().into_owned());
            scenarios.push((name, load_stream(d)?, read_truth_csv(t)?));
            m_inputs.push(d.clone());
            m_inputs.push(t.clone());
        }
    }

    let mut table = ComparisonTable::default();
    let mut outputs = vec!["comparison.txt".to_string(), "comparison.csv".to_string()];
    let mut missed = 0;
    let mut dcfg_echo = None;
    for (name, samples, truth) in &scenarios {
        let dcfg = detector_config(&cfg, &a.detector, samples[0].n_motors());
        let results = compare_methods(samples, truth, &dcfg)?;
        for r in &results {
            if r.method == Method::DistanceAdaptive {
                missed += r.report.missed();
            }
            if a.traces {
                let file = format!("decisions-{name}-{}.csv", r.method);
                write_decisions_csv(&out.join(&file), &r.output.decisions)?;
                outputs.push(file);
            }
        }
        table.push(ScenarioRow::new(name.clone(), &results));
        dcfg_echo.get_or_insert(dcfg);
    }
    let text = table.to_text();
    print!("{text}");
    write_text(&out.join("comparison.txt"), &text)?;
    table.write_csv(&out.join("comparison.csv"))?;
    if missed > 0 {
        eprintln!("adaptive method missed {missed} event(s)");
    }

    let mut m = RunManifest::new(
        "compare",
        cfg.seed(),
        serde_json::json!({
            "presets": a.preset.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
            "synth": &cfg.synth,
            "duration": a.duration,
            "detector": dcfg_echo,
        }),
    );
    for p in &m_inputs {
        m.input(p)?;
    }
    for o in outputs {
        m.output(o);
    }
    Ok((m, if missed > 0 { EXIT_OUTCOME } else { EXIT_OK }))
}

fn cmd_stability(a: &StabilityArgs, cfg: RunConfig, out: &Path) -> Result<(RunManifest, i32)> {
    let geometry = match &a.geometry {
        Some(p) => GeometryConfig::load(p)?,
        None => GeometryConfig::reference(),
    };
    let (g, pose, tensions) = geometry.resolve()?;
    let report = reduced_hessian(&g, &pose, &tensions)?;
    let text = format!("{report}\n");
    print!("{text}");
    write_text(&out.join("stability.txt"), &text)?;

    let mut m = RunManifest::new("stability", cfg.seed(), &geometry);
    if let Some(p) = &a.geometry {
        m.input(p)?;
    }
    m.output("stability.txt");
    Ok((m, if report.stable { EXIT_OK } else { EXIT_OUTCOME }))
}
