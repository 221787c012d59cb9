//! Command-line front end. Every command is deterministic given its inputs
//! and `--seed`; the seed in effect is echoed in each output.
//!
//! Exit codes: 0 success, 1 domain error (one JSON line on stderr), 2 usage.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use argus_core::detector::{DetectionStream, DetectorModel, FitConfig, StreamOptions, Verdict};
use argus_core::metrics::{Evaluation, LabelPolicy};
use argus_core::nn::{numeric_gradient_check, Architecture, AutoencoderModel, TrainConfig, Variant};
use argus_core::trace::{Timestamp, Trace};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::clock::ZoneClock;
use crate::harness::{self, emit_report, Benchmark, BenchmarkConfig, PoisonConfig, Report};
use crate::model_io::{catalog_hash, load_model, save_model};
use crate::simulator::attack::{inject_attack, AttackKind, AttackScenario, Category};
use crate::simulator::noise::Domain;
use crate::simulator::{generate_home, HomeProfile};
use crate::trace_io::{import_home_assistant, parse_time, read_trace_file, write_trace_file, HaMapping};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "argus", version, about = "Contextual intrusion detection for smart-home event streams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a benign trace from a home profile.
    Simulate(SimulateArgs),
    /// Plant one attack scenario in a trace.
    Attack(AttackArgs),
    /// Fit a detector on a benign trace.
    Train(TrainArgs),
    /// Stream a trace through a detector and write one verdict per event.
    Detect(DetectArgs),
    /// Score a labeled trace and write its confusion counts and metrics.
    Evaluate(EvaluateArgs),
    /// Run one experiment on the synthetic benchmark.
    Ablate(AblateArgs),
    /// Compare analytic and numeric gradients of a small autoencoder.
    Gradcheck(GradcheckArgs),
    /// Convert a Home Assistant history CSV into a trace.
    ImportHa(ImportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Profile JSON file, or `reference`.
    #[arg(long, default_value = "reference")]
    pub profile: String,
    #[arg(long, default_value_t = 14)]
    pub days: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Scenario JSON file; replaces `--kind`, `--start` and `--end`.
    #[arg(long, conflicts_with_all = ["kind", "start", "end"])]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "scenario")]
    pub kind: Option<KindArg>,
    /// RFC 3339 start of the scenario window.
    #[arg(long, required_unless_present = "scenario")]
    pub start: Option<String>,
    #[arg(long, required_unless_present = "scenario")]
    pub end: Option<String>,
    #[arg(long, value_enum)]
    pub category: Option<CategoryArg>,
    /// Profile naming the target devices, or `reference`.
    #[arg(long, default_value = "reference")]
    pub profile: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Fit configuration JSON; defaults to the full-size network.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Use the reduced network and schedule.
    #[arg(long)]
    pub desk_scale: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print per-epoch losses to stderr.
    #[arg(long)]
    pub progress: bool,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Trace immediately preceding the input, used to warm up device state.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Continue from the threshold state stored in the model file.
    #[arg(long)]
    pub resume: bool,
    /// Write the model with the final threshold state here.
    #[arg(long)]
    pub save_state: Option<PathBuf>,
    /// Keep updates classified as attacks out of later windows.
    #[arg(long)]
    pub drop_alerted: bool,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Strict,
    Mask,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mask")]
    pub policy: PolicyArg,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AblationKind {
    Threshold,
    Alphabeta,
    Duration,
    Noise,
    Poison,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long, value_enum)]
    pub kind: AblationKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub desk_scale: bool,
    /// Benchmark configuration JSON; overrides `--desk-scale`.
    #[arg(long)]
    pub bench_config: Option<PathBuf>,
    /// Model already fitted on this benchmark's training span.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub durations: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "mapped")]
    pub domain: DomainArg,
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DomainArg {
    Mapped,
    Raw,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Recurrent,
    Dense,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "recurrent")]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 200)]
    pub params: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    DoorOpenWhileAbsent,
    LightsOnWhileAbsent,
    MovementWhileAbsent,
    CameraOffWhileAbsent,
    LightFlickering,
    HeatingOnWhileWindowsOpen,
    LightsOnDuringNight,
    FakeFireClosedWindows,
    FakeFireOpenWindows,
}

impl From<KindArg> for AttackKind {
    fn from(k: KindArg) -> Self {
        use AttackKind::*;
        match k {
            KindArg::DoorOpenWhileAbsent => DoorOpenWhileAbsent,
            KindArg::LightsOnWhileAbsent => LightsOnWhileAbsent,
            KindArg::MovementWhileAbsent => MovementWhileAbsent,
            KindArg::CameraOffWhileAbsent => CameraOffWhileAbsent,
            KindArg::LightFlickering => LightFlickering,
            KindArg::HeatingOnWhileWindowsOpen => HeatingOnWhileWindowsOpen,
            KindArg::LightsOnDuringNight => LightsOnDuringNight,
            KindArg::FakeFireClosedWindows => FakeFireClosedWindows,
            KindArg::FakeFireOpenWindows => FakeFireOpenWindows,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CategoryArg {
    Es,
    Ei,
    Cs,
    Ci,
}

impl From<CategoryArg> for Category {
    fn from(c: CategoryArg) -> Self {
        match c {
            CategoryArg::Es => Category::ES,
            CategoryArg::Ei => Category::EI,
            CategoryArg::Cs => Category::CS,
            CategoryArg::Ci => Category::CI,
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match run(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_line(&e));
            1
        }
    }
}

/// Single-line JSON rendering of a domain error.
pub fn error_line(e: &Error) -> String {
    let kind = match e {
        Error::Core(_) => "core",
        Error::Io(_) => "io",
        Error::Parse { .. } => "parse",
        Error::Json(_) => "json",
        Error::Csv(_) => "csv",
        Error::ModelFormat(_) => "model",
        Error::Timezone(_) => "timezone",
        Error::Profile(_) => "profile",
        Error::Precondition { .. } => "precondition",
        Error::Invalid(_) => "invalid",
    };
    json!({ "error": kind, "message": e.to_string() }).to_string()
}

pub fn run(command: Command, stdout: &mut dyn Write) -> Result<()> {
    let summary = match command {
        Command::Simulate(a) => simulate(a)?,
        Command::Attack(a) => attack(a)?,
        Command::Train(a) => train(a)?,
        Command::Detect(a) => detect(a)?,
        Command::Evaluate(a) => evaluate(a)?,
        Command::Ablate(a) => ablate(a)?,
        Command::Gradcheck(a) => gradcheck(a)?,
        Command::ImportHa(a) => import_ha(a)?,
    };
    writeln!(stdout, "{summary}")?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn load_profile(spec: &str) -> Result<HomeProfile> {
    if spec == "reference" {
        Ok(HomeProfile::reference())
    } else {
        read_json(Path::new(spec))
    }
}

fn read_model(path: &Path) -> Result<(DetectorModel, Option<argus_core::threshold::ThresholdState>)> {
    load_model(BufReader::new(File::open(path)?))
}

fn write_model(det: &DetectorModel, resume: Option<&argus_core::threshold::ThresholdState>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    save_model(det, resume, &mut w)?;
    w.flush()?;
    Ok(())
}

fn trace_clock(trace: &Trace) -> Result<ZoneClock> {
    ZoneClock::parse(&trace.timezone)
}

fn time_arg(s: &str) -> Result<Timestamp> {
    parse_time(s).ok_or_else(|| Error::Invalid(format!("bad timestamp `{s}`")))
}

fn simulate(a: SimulateArgs) -> Result<serde_json::Value> {
    let profile = HomeProfile { seed: a.seed, ..load_profile(&a.profile)? };
    let trace = generate_home(&profile, a.days)?;
    write_trace_file(&trace, Some(a.seed), &a.out)?;
    Ok(json!({ "command": "simulate", "seed": a.seed, "days": a.days, "devices": trace.devices.len(), "events": trace.len() }))
}

fn attack(a: AttackArgs) -> Result<serde_json::Value> {
    let trace = read_trace_file(&a.input)?;
    let scenario = match &a.scenario {
        Some(path) => read_json::<AttackScenario>(path)?,
        None => {
            let (kind, start, end) = match (a.kind, &a.start, &a.end) {
                (Some(k), Some(s), Some(e)) => (AttackKind::from(k), time_arg(s)?, time_arg(e)?),
                _ => return Err(Error::Invalid("need --scenario or --kind, --start and --end".into())),
            };
            let mut sc = AttackScenario::new(kind, start, end, load_profile(&a.profile)?.roster());
            if let Some(c) = a.category {
                sc.category = c.into();
            }
            sc
        }
    };
    let out = inject_attack(&trace, &scenario, a.seed)?;
    let labeled = out.labels.as_ref().map_or(0, |l| l.iter().filter(|&&x| x).count());
    write_trace_file(&out, Some(a.seed), &a.out)?;
    Ok(json!({
        "command": "attack",
        "seed": a.seed,
        "kind": scenario.kind,
        "category": scenario.category,
        "events": out.len(),
        "labeled": labeled,
    }))
}

fn train(a: TrainArgs) -> Result<serde_json::Value> {
    let trace = read_trace_file(&a.input)?;
    let clock = trace_clock(&trace)?;
    let mut cfg: FitConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => FitConfig::default(),
    };
    if a.desk_scale {
        cfg.train = TrainConfig::desk();
    }
    cfg.train.seed = a.seed;
    let mut stderr = std::io::stderr();
    let mut progress = |epoch: usize, train: f64, val: Option<f64>| {
        if a.progress {
            let _ = writeln!(stderr, "{}", json!({ "epoch": epoch, "train_loss": train, "val_loss": val }));
        }
    };
    let (det, report) = DetectorModel::fit_with_progress(&trace, &clock, &cfg, &mut progress)?;
    write_model(&det, None, &a.out)?;
    Ok(json!({
        "command": "train",
        "seed": a.seed,
        "parameters": det.model.param_count(),
        "windows": report.train.n_train + report.train.n_val,
        "epochs_run": det.model.meta.epochs_run,
        "best_epoch": det.model.meta.best_epoch,
        "final_train_loss": det.model.meta.final_train_loss,
        "best_val_loss": det.model.meta.best_val_loss,
        "bootstrap_threshold": det.bootstrap_t,
        "catalog_sha256": catalog_hash(&det.catalog),
    }))
}

fn history_for(path: Option<&Path>, trace: &Trace) -> Result<Option<Trace>> {
    let Some(path) = path else { return Ok(None) };
    let history = read_trace_file(path)?;
    if history.timezone != trace.timezone {
        return Err(Error::Invalid("history and input use different timezones".into()));
    }
    Ok(Some(history))
}

#[derive(Serialize)]
#[serde(tag = "rec", rename_all = "lowercase")]
enum VerdictLine<'a> {
    Meta { seed: u64, threshold: f64 },
    Verdict(&'a Verdict),
}

fn detect(a: DetectArgs) -> Result<serde_json::Value> {
    let (det, stored) = read_model(&a.model)?;
    let trace = read_trace_file(&a.input)?;
    let history = history_for(a.history.as_deref(), &trace)?;
    let clock = trace_clock(&trace)?;
    let options = StreamOptions { feed_alerted: !a.drop_alerted };
    let mut stream = match (a.resume, stored) {
        (true, Some(state)) => DetectionStream::resume(&det, &clock, state, options)?,
        (true, None) => return Err(Error::Invalid("model file holds no threshold state".into())),
        (false, _) => DetectionStream::with_config(&det, &clock, det.threshold, options)?,
    };
    if let Some(h) = &history {
        stream.warm_up(&h.updates)?;
    }
    let seed = det.model.meta.seed;
    let mut w = BufWriter::new(File::create(&a.out)?);
    let meta = VerdictLine::Meta { seed, threshold: stream.threshold_state().threshold() };
    writeln!(w, "{}", serde_json::to_string(&meta)?)?;
    let mut alerts = 0usize;
    for u in &trace.updates {
        let v = stream.push(u.clone())?;
        alerts += usize::from(v.decision == argus_core::threshold::Decision::Attack);
        writeln!(w, "{}", serde_json::to_string(&VerdictLine::Verdict(&v))?)?;
    }
    w.flush()?;
    if let Some(path) = &a.save_state {
        write_model(&det, Some(stream.threshold_state()), path)?;
    }
    Ok(json!({ "command": "detect", "seed": seed, "events": trace.len(), "alerts": alerts }))
}

fn policy_of(p: PolicyArg, det: &DetectorModel) -> LabelPolicy {
    match p {
        PolicyArg::Strict => LabelPolicy::Strict,
        PolicyArg::Mask => LabelPolicy::MaskAttackWindows { window: det.window_len() },
    }
}

fn evaluate(a: EvaluateArgs) -> Result<serde_json::Value> {
    let (det, _) = read_model(&a.model)?;
    let trace = read_trace_file(&a.input)?;
    let history = history_for(a.history.as_deref(), &trace)?
        .unwrap_or_else(|| Trace::new(trace.timezone.clone(), Vec::new()));
    let clock = trace_clock(&trace)?;
    let policy = policy_of(a.policy, &det);
    let (_, _, evaluation) = harness::benchmark::run_detection(&det, &history, &trace, det.threshold, &clock, policy)?;
    let seed = det.model.meta.seed;
    let report: Report<Evaluation> =
        Report::new("evaluate", seed, json!({ "policy": policy, "threshold": det.threshold }), evaluation)?;
    std::fs::write(&a.out, harness::report::report_json(&report)?)?;
    Ok(json!({
        "command": "evaluate",
        "seed": seed,
        "counts": report.result.counts,
        "metrics": report.result.metrics,
    }))
}

const DEFAULT_ALPHAS: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
const DEFAULT_BETAS: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
const DEFAULT_SIGMAS: [f64; 6] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
const DEFAULT_FRACTIONS: [f64; 6] = [0.0, 0.001, 0.002, 0.006, 0.01, 0.05];

fn ablate(a: AblateArgs) -> Result<serde_json::Value> {
    let config = match &a.bench_config {
        Some(path) => BenchmarkConfig { seed: a.seed, ..read_json(path)? },
        None if a.desk_scale => BenchmarkConfig::desk(a.seed),
        None => BenchmarkConfig::full(a.seed),
    };
    let bench = Benchmark::build(config)?;
    let model = match &a.model {
        Some(path) => {
            let (det, _) = read_model(path)?;
            crate::model_io::ensure_catalog(&det, &argus_core::preprocess::fit_state_maps(&bench.train)?)?;
            Some(det)
        }
        None => None,
    };
    let fitted = |model: Option<DetectorModel>| -> Result<DetectorModel> {
        match model {
            Some(det) => Ok(det),
            None => Ok(bench.fit()?.0),
        }
    };
    let seed = a.seed;
    let dir = &a.out_dir;
    let policy = bench.config.policy;
    let (json_path, csv_path) = match a.kind {
        AblationKind::Threshold => {
            let det = fitted(model)?;
            let scores = harness::benchmark::score_after(&det, &bench.train.updates, &bench.test)?;
            let rows = harness::run_threshold_comparison(&det, &bench.test, &scores, &bench.clock, policy)?;
            emit_report(&Report::new("threshold", seed, &bench.config, rows)?, dir)?
        }
        AblationKind::Alphabeta => {
            let det = fitted(model)?;
            let scores = harness::benchmark::score_after(&det, &bench.train.updates, &bench.test)?;
            let alphas = a.alphas.clone().unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
            let betas = a.betas.clone().unwrap_or_else(|| DEFAULT_BETAS.to_vec());
            let grid =
                harness::run_alpha_beta_grid(&det, &bench.test, &scores, &bench.clock, policy, &alphas, &betas)?;
            let config = json!({ "benchmark": bench.config, "alphas": alphas, "betas": betas });
            emit_report(&Report::new("alphabeta", seed, config, grid)?, dir)?
        }
        AblationKind::Duration => {
            let durations = a.durations.clone().unwrap_or_else(|| (1..=bench.config.train_days).collect());
            let rows = harness::run_duration_ablation(&bench, &durations, model.as_ref())?;
            let config = json!({ "benchmark": bench.config, "durations": durations });
            emit_report(&Report::new("duration", seed, config, rows)?, dir)?
        }
        AblationKind::Noise => {
            let det = fitted(model)?;
            let sigmas = a.sigmas.clone().unwrap_or_else(|| DEFAULT_SIGMAS.to_vec());
            let domain = match a.domain {
                DomainArg::Mapped => Domain::Mapped,
                DomainArg::Raw => Domain::Raw,
            };
            let devices: Vec<String> = match domain {
                Domain::Mapped => bench.train.devices.iter().map(|d| d.id.clone()).collect(),
                Domain::Raw => bench
                    .train
                    .devices
                    .iter()
                    .filter(|d| d.kind == argus_core::trace::DeviceKind::Continuous)
                    .map(|d| d.id.clone())
                    .collect(),
            };
            let table = harness::run_noise_robustness(
                &det,
                &bench.train,
                &bench.benign_test,
                &bench.clock,
                &sigmas,
                &devices,
                domain,
                harness::benchmark::derive_seed(seed, 0x0015_E000),
            )?;
            let config = json!({ "benchmark": bench.config, "sigmas": sigmas, "domain": domain });
            emit_report(&Report::new("noise", seed, config, table)?, dir)?
        }
        AblationKind::Poison => {
            let fractions = a.fractions.clone().unwrap_or_else(|| DEFAULT_FRACTIONS.to_vec());
            let cfg = PoisonConfig::default();
            let rows = harness::run_poisoning_ablation(&bench, &fractions, &cfg, model.as_ref())?;
            let config = json!({ "benchmark": bench.config, "fractions": fractions, "poison": cfg });
            emit_report(&Report::new("poison", seed, config, rows)?, dir)?
        }
    };
    Ok(json!({
        "command": "ablate",
        "seed": seed,
        "kind": format!("{:?}", a.kind).to_lowercase(),
        "json": json_path,
        "csv": csv_path,
    }))
}

fn gradcheck(a: GradcheckArgs) -> Result<serde_json::Value> {
    let variant = match a.variant {
        VariantArg::Recurrent => Variant::Recurrent,
        VariantArg::Dense => Variant::Dense,
    };
    let arch = Architecture {
        variant,
        n_devices: 4,
        window_len: 6,
        encoder_hidden: vec![10, 4],
        decoder_hidden: vec![4, 10],
        dropout: 0.0,
    };
    let model = AutoencoderModel::init(arch, a.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let window: Vec<f64> = (0..model.arch.window_size()).map(|_| rng.random::<f64>()).collect();
    let report = numeric_gradient_check(&model, &window, 1e-5, a.tolerance, a.params, a.seed);
    let summary = json!({
        "command": "gradcheck",
        "seed": a.seed,
        "parameters": model.param_count(),
        "report": report,
    });
    if !report.passed {
        return Err(Error::Invalid(format!(
            "gradient check failed: max relative error {} exceeds {}",
            report.max_rel_error, report.tolerance
        )));
    }
    Ok(summary)
}

fn import_ha(a: ImportArgs) -> Result<serde_json::Value> {
    let mapping: HaMapping = match &a.mapping {
        Some(path) => read_json(path)?,
        None => HaMapping::default(),
    };
    let trace = import_home_assistant(BufReader::new(File::open(&a.input)?), &mapping)?;
    write_trace_file(&trace, None, &a.out)?;
    Ok(json!({ "command": "import-ha", "devices": trace.devices.len(), "events": trace.len() }))
}

/// Reads a verdict file written by `detect`.
pub fn read_verdicts(input: impl BufRead) -> Result<(u64, Vec<Verdict>)> {
    let mut seed = None;
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let value: serde_json::Value = serde_json::from_str(&line)?;
        match value.get("rec").and_then(|r| r.as_str()) {
            Some("meta") => seed = value.get("seed").and_then(serde_json::Value::as_u64),
            Some("verdict") => out.push(serde_json::from_value(value)?),
            _ => return Err(Error::Parse { line: i + 1, message: "unknown record".into() }),
        }
    }
    let seed = seed.ok_or(Error::Parse { line: 1, message: "missing meta record".into() })?;
    Ok((seed, out))
}
