//! Experiment runners. Each is a pure function of its inputs and seeds.

use std::collections::BTreeMap;

use argus_core::detector::{DetectorModel, FitReport};
use argus_core::metrics::{ConfusionCounts, Evaluation, LabelPolicy, Metrics};
use argus_core::threshold::{Decision, Strategy, ThresholdConfig};
use argus_core::trace::{DayClock, Trace};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::benchmark::{
    classify_scores, derive_seed, evaluate_decisions, run_detection, score_after, Benchmark, Classified,
};
use crate::simulator::attack::{inject_attack, AttackKind, AttackScenario};
use crate::simulator::noise::{inject_noise, Domain, NoiseConfig};
use crate::simulator::poison::{flicker_pool, poison_training};
use crate::simulator::Role;
use crate::{Error, Result};

/// Runs `f` on a pool capped by `ARGUS_THREADS` when set.
pub fn with_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let threads = std::env::var("ARGUS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0);
    match threads.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// A fitted benchmark model with its test scores and verdicts.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub model: DetectorModel,
    pub fit: FitReport,
    pub scores: Vec<f64>,
    pub classified: Classified,
    pub evaluation: Evaluation,
}

pub fn run_benchmark(bench: &Benchmark) -> Result<BenchmarkRun> {
    let (model, fit) = bench.fit()?;
    evaluate_benchmark(bench, model, fit)
}

pub fn evaluate_benchmark(bench: &Benchmark, model: DetectorModel, fit: FitReport) -> Result<BenchmarkRun> {
    let (scores, classified, evaluation) =
        run_detection(&model, &bench.train, &bench.test, model.threshold, &bench.clock, bench.config.policy)?;
    Ok(BenchmarkRun { model, fit, scores, classified, evaluation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub name: String,
    pub config: ThresholdConfig,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

/// The strategies compared by [`run_threshold_comparison`], in row order.
pub fn comparison_strategies(default: ThresholdConfig) -> Vec<(String, ThresholdConfig)> {
    let with = |strategy| ThresholdConfig { strategy, ..default };
    let momentum = |alpha| ThresholdConfig { alpha, strategy: Strategy::ArgusMomentum, ..default };
    vec![
        ("mean-of-max".into(), with(Strategy::MeanOfMax)),
        ("mean-plus-std-prev-day".into(), with(Strategy::MeanPlusStdPrevDay)),
        ("max-of-prev-days".into(), with(Strategy::MaxOfPrevDays)),
        ("argus-alpha-0".into(), momentum(0.0)),
        ("argus-alpha-1".into(), momentum(1.0)),
        (format!("argus-alpha-{}", default.alpha), momentum(default.alpha)),
    ]
}

/// Evaluates every strategy over the same scores.
pub fn run_threshold_comparison(
    det: &DetectorModel,
    test: &Trace,
    scores: &[f64],
    clock: &dyn DayClock,
    policy: LabelPolicy,
) -> Result<Vec<ThresholdRow>> {
    comparison_strategies(det.threshold)
        .into_iter()
        .map(|(name, config)| {
            let e = evaluate_with(det, config, test, scores, clock, policy)?;
            Ok(ThresholdRow { name, config, counts: e.counts, metrics: e.metrics })
        })
        .collect()
}

fn evaluate_with(
    det: &DetectorModel,
    cfg: ThresholdConfig,
    test: &Trace,
    scores: &[f64],
    clock: &dyn DayClock,
    policy: LabelPolicy,
) -> Result<Evaluation> {
    let c = classify_scores(det, cfg, scores, test.updates.iter().map(|u| u.timestamp), clock)?;
    evaluate_decisions(test, &c.decisions, policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    #[serde(with = "argus_core::metrics::na")]
    pub f1: Option<f64>,
    #[serde(with = "argus_core::metrics::na")]
    pub fpr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaBetaGrid {
    pub cells: Vec<GridCell>,
    /// Highest defined F1; ties go to the smallest α, then the smallest β.
    pub best: Option<GridCell>,
}

pub fn run_alpha_beta_grid(
    det: &DetectorModel,
    test: &Trace,
    scores: &[f64],
    clock: &(dyn DayClock + Sync),
    policy: LabelPolicy,
    alphas: &[f64],
    betas: &[f64],
) -> Result<AlphaBetaGrid> {
    if alphas.is_empty() || betas.is_empty() {
        return Err(Error::Invalid("alpha and beta lists must be nonempty".into()));
    }
    let pairs: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| betas.iter().map(move |&b| (a, b))).collect();
    let cells = with_pool(|| {
        pairs
            .par_iter()
            .map(|&(alpha, beta)| {
                let cfg = ThresholdConfig { alpha, beta, strategy: Strategy::ArgusMomentum, ..det.threshold };
                let e = evaluate_with(det, cfg, test, scores, clock, policy)?;
                Ok(GridCell { alpha, beta, f1: e.metrics.f1, fpr: e.metrics.fpr })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut best: Option<GridCell> = None;
    for c in &cells {
        let Some(f1) = c.f1 else { continue };
        let better = match best {
            None => true,
            Some(b) => {
                let bf = b.f1.expect("best has a defined F1");
                f1 > bf || (f1 == bf && (c.alpha, c.beta) < (b.alpha, b.beta))
            }
        };
        if better {
            best = Some(*c);
        }
    }
    Ok(AlphaBetaGrid { cells, best })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationRow {
    pub days: u32,
    pub epochs: usize,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

/// Trains on the first `d` training days for each `d` and evaluates on the
/// shared test span. `reuse` supplies an already fitted model for the full
/// training span.
pub fn run_duration_ablation(
    bench: &Benchmark,
    durations: &[u32],
    reuse: Option<&DetectorModel>,
) -> Result<Vec<DurationRow>> {
    for &d in durations {
        if d == 0 || d > bench.config.train_days {
            return Err(Error::Invalid(format!("duration {d} outside 1..={}", bench.config.train_days)));
        }
    }
    with_pool(|| {
        durations
            .par_iter()
            .map(|&days| {
                let fitted;
                let det = match reuse {
                    Some(det) if days == bench.config.train_days => det,
                    _ => {
                        fitted = bench.fit_prefix(days)?.0;
                        &fitted
                    }
                };
                let (_, _, e) =
                    run_detection(det, &bench.train, &bench.test, det.threshold, &bench.clock, bench.config.policy)?;
                let epochs = det.model.meta.epochs_run;
                Ok(DurationRow { days, epochs, counts: e.counts, metrics: e.metrics })
            })
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NoiseBuckets {
    pub events: usize,
    /// Score above the threshold in force.
    pub alerts: usize,
    /// At most the threshold but outside the clean day's score range.
    pub affecting: usize,
    /// Inside the clean day's score range.
    pub not_affecting: usize,
}

impl NoiseBuckets {
    fn add(&mut self, o: &NoiseBuckets) {
        self.events += o.events;
        self.alerts += o.alerts;
        self.affecting += o.affecting;
        self.not_affecting += o.not_affecting;
    }

    fn pct(&self, n: usize) -> Option<f64> {
        (self.events > 0).then(|| 100.0 * n as f64 / self.events as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub mu: f64,
    pub sigma: f64,
    pub buckets: NoiseBuckets,
    #[serde(with = "argus_core::metrics::na")]
    pub alerts_pct: Option<f64>,
    #[serde(with = "argus_core::metrics::na")]
    pub affecting_pct: Option<f64>,
    #[serde(with = "argus_core::metrics::na")]
    pub not_affecting_pct: Option<f64>,
    pub per_device: BTreeMap<String, NoiseBuckets>,
}

impl NoiseRow {
    fn new(mu: f64, sigma: f64, per_device: BTreeMap<String, NoiseBuckets>) -> Self {
        let mut b = NoiseBuckets::default();
        per_device.values().for_each(|d| b.add(d));
        Self {
            mu,
            sigma,
            alerts_pct: b.pct(b.alerts),
            affecting_pct: b.pct(b.affecting),
            not_affecting_pct: b.pct(b.not_affecting),
            buckets: b,
            per_device,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTable {
    pub domain: Domain,
    /// Noiseless run; its alert share is the clean false-positive rate.
    pub control: NoiseRow,
    #[serde(with = "argus_core::metrics::na")]
    pub clean_fpr: Option<f64>,
    pub rows: Vec<NoiseRow>,
}

/// Perturbs each device in turn and sorts its perturbed events into three
/// buckets against the thresholds and daily score ranges of the clean run.
/// Percentages pool the events of all devices.
#[allow(clippy::too_many_arguments)]
pub fn run_noise_robustness(
    det: &DetectorModel,
    history: &Trace,
    benign: &Trace,
    clock: &dyn DayClock,
    sigmas: &[f64],
    devices: &[String],
    domain: Domain,
    seed: u64,
) -> Result<NoiseTable> {
    if devices.is_empty() {
        return Err(Error::Invalid("noise needs at least one device".into()));
    }
    let clean = score_after(det, &history.updates, benign)?;
    let times: Vec<_> = benign.updates.iter().map(|u| u.timestamp).collect();
    let classified = classify_scores(det, det.threshold, &clean, times.iter().copied(), clock)?;
    let days: Vec<i64> = times.iter().map(|&t| clock.day_of(t)).collect();
    let mut range: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for (&d, &s) in days.iter().zip(&clean) {
        let r = range.entry(d).or_insert((s, s));
        r.0 = r.0.min(s);
        r.1 = r.1.max(s);
    }
    let clean_fpr = {
        let e = evaluate_decisions(&with_benign_labels(benign), &classified.decisions, LabelPolicy::Strict)?;
        e.metrics.fpr
    };

    let run = |mu: f64, sigma: f64, purpose: u64| -> Result<NoiseRow> {
        let per_device = devices
            .par_iter()
            .enumerate()
            .map(|(k, device)| {
                let cfg = NoiseConfig {
                    mu,
                    sigma,
                    samples_per_draw: 100,
                    device: device.clone(),
                    seed: derive_seed(seed, purpose * 1_000 + k as u64),
                    domain,
                };
                let noisy = inject_noise(benign, &cfg)?;
                let scores = score_after(det, &history.updates, &noisy)?;
                let mut b = NoiseBuckets::default();
                for (i, u) in benign.updates.iter().enumerate() {
                    if &u.device_id != device {
                        continue;
                    }
                    b.events += 1;
                    let (lo, hi) = range[&days[i]];
                    if scores[i] > classified.thresholds[i] {
                        b.alerts += 1;
                    } else if scores[i] < lo || scores[i] > hi {
                        b.affecting += 1;
                    } else {
                        b.not_affecting += 1;
                    }
                }
                Ok((device.clone(), b))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(NoiseRow::new(mu, sigma, per_device))
    };
    with_pool(|| {
        let control = run(0.0, 0.0, 0)?;
        let rows = sigmas.iter().enumerate().map(|(i, &s)| run(1.0, s, i as u64 + 1)).collect::<Result<Vec<_>>>()?;
        Ok(NoiseTable { domain, control, clean_fpr, rows })
    })
}

fn with_benign_labels(trace: &Trace) -> Trace {
    let mut t = trace.clone();
    t.labels = Some(vec![false; t.len()]);
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoisonRow {
    pub fraction: f64,
    pub injected: usize,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoisonConfig {
    /// Flicker bursts spread over the training span.
    pub pool_bursts: usize,
    /// Flicker attacks planted in the test span, one per day from its start.
    pub test_attacks: usize,
    /// Local `HH:MM` window of each test attack.
    pub from: String,
    pub to: String,
}

impl Default for PoisonConfig {
    fn default() -> Self {
        Self { pool_bursts: 40, test_attacks: 7, from: "19:00".into(), to: "22:00".into() }
    }
}

/// Benign test span with one flicker attack on each of its first days.
pub fn flicker_test(bench: &Benchmark, cfg: &PoisonConfig) -> Result<Trace> {
    let roster = bench.config.profile.roster();
    let day0 = crate::clock::day_number(bench.config.profile.start()?);
    let parse = |s: &str| {
        chrono::NaiveTime::parse_from_str(s, "%H:%M").map_err(|_| Error::Invalid(format!("bad time of day `{s}`")))
    };
    let (from, to) = (parse(&cfg.from)?, parse(&cfg.to)?);
    let mut test = bench.benign_test.clone();
    let test_days = bench.config.days - bench.config.train_days;
    for k in 0..cfg.test_attacks.min(test_days as usize) {
        let day = day0 + i64::from(bench.config.train_days) + k as i64;
        let sc = AttackScenario::new(
            AttackKind::LightFlickering,
            bench.clock.instant_at(day, from),
            bench.clock.instant_at(day, to),
            roster.clone(),
        );
        test = inject_attack(&test, &sc, derive_seed(bench.config.seed, 0xF11C_0000 + k as u64))?;
    }
    Ok(test)
}

/// Retrains on training data poisoned with flicker events at each fraction
/// and measures flicker detection. `reuse` stands in for fraction 0.
pub fn run_poisoning_ablation(
    bench: &Benchmark,
    fractions: &[f64],
    cfg: &PoisonConfig,
    reuse: Option<&DetectorModel>,
) -> Result<Vec<PoisonRow>> {
    if fractions.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Invalid("poison fractions must be sorted ascending".into()));
    }
    let light = bench
        .config
        .profile
        .roster()
        .get(&Role::AmbientLight)
        .cloned()
        .ok_or_else(|| Error::Invalid("profile has no ambient light".into()))?;
    let (first, last) = match (bench.train.updates.first(), bench.train.updates.last()) {
        (Some(a), Some(b)) => (a.timestamp, b.timestamp),
        _ => return Err(Error::Invalid("empty training trace".into())),
    };
    let defaults = crate::simulator::AttackParams::default();
    let pool = flicker_pool(
        &light,
        first,
        last,
        cfg.pool_bursts,
        defaults.flicker_count,
        defaults.flicker_period_ms,
    );
    let test = flicker_test(bench, cfg)?;
    with_pool(|| {
        fractions
            .par_iter()
            .map(|&fraction| {
                let poisoned = poison_training(&bench.train, &pool, fraction)?;
                let injected = poisoned.len() - bench.train.len();
                let fitted;
                let det = match reuse {
                    Some(det) if injected == 0 => det,
                    _ => {
                        fitted = DetectorModel::fit(&poisoned, &bench.clock, &bench.config.fit)?.0;
                        &fitted
                    }
                };
                let (_, _, e) =
                    run_detection(det, &poisoned, &test, det.threshold, &bench.clock, bench.config.policy)?;
                Ok(PoisonRow { fraction, injected, counts: e.counts, metrics: e.metrics })
            })
            .collect()
    })
}

/// Share of attack verdicts per local day, for quick inspection.
pub fn alerts_per_day(trace: &Trace, decisions: &[Decision], clock: &dyn DayClock) -> BTreeMap<i64, usize> {
    let mut out = BTreeMap::new();
    for (u, d) in trace.updates.iter().zip(decisions) {
        let e = out.entry(clock.day_of(u.timestamp)).or_insert(0);
        if *d == Decision::Attack {
            *e += 1;
        }
    }
    out
}
