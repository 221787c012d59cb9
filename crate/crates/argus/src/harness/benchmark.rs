//! The synthetic benchmark: one simulated home, a chronological train/test
//! split and the nine attacks planted in the test days.

use argus_core::detector::{DetectorModel, EventScorer, FitConfig, FitReport};
use argus_core::metrics::{Evaluation, LabelPolicy};
use argus_core::nn::TrainConfig;
use argus_core::threshold::{Decision, ThresholdConfig, ThresholdState};
use argus_core::trace::{split_by_days, DayClock, StatusUpdate, Timestamp, Trace};
use chrono::NaiveTime;
use serde::{Deserialize, Serialize};

use crate::clock::{day_number, ZoneClock};
use crate::simulator::attack::{inject_attack, AttackKind, AttackParams, AttackScenario, Category};
use crate::simulator::{generate_home, HomeProfile};
use crate::{Error, Result};

/// One attack placed at a local time range of a given trace day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedAttack {
    pub kind: AttackKind,
    pub category: Category,
    /// Day offset from the start of the trace.
    pub day: u32,
    /// Local `HH:MM` bounds of the scenario window.
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub params: AttackParams,
}

impl PlannedAttack {
    pub fn new(kind: AttackKind, day: u32, from: &str, to: &str) -> Self {
        Self {
            kind,
            category: kind.default_category(),
            day,
            from: from.into(),
            to: to.into(),
            params: AttackParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub profile: HomeProfile,
    pub days: u32,
    pub train_days: u32,
    pub seed: u64,
    pub fit: FitConfig,
    pub attacks: Vec<PlannedAttack>,
    pub policy: LabelPolicy,
}

impl BenchmarkConfig {
    /// Fourteen days of the reference home, a week of training with the
    /// desk-scale network and one of each attack in the second week.
    pub fn desk(seed: u64) -> Self {
        let fit = FitConfig { train: TrainConfig { seed, ..TrainConfig::desk() }, ..FitConfig::default() };
        let window = fit.window_len;
        Self {
            profile: HomeProfile { seed, ..HomeProfile::reference() },
            days: 14,
            train_days: 7,
            seed,
            fit,
            attacks: standard_attacks(),
            policy: LabelPolicy::MaskAttackWindows { window },
        }
    }

    /// Same home and split with the full-size network.
    pub fn full(seed: u64) -> Self {
        let mut cfg = Self::desk(seed);
        cfg.fit.train = TrainConfig { seed, ..TrainConfig::full() };
        cfg
    }
}

/// The nine attacks over days 7 to 13 of a home starting on a Monday.
/// Absence attacks fall on working days; night attacks in the small hours.
pub fn standard_attacks() -> Vec<PlannedAttack> {
    use AttackKind::*;
    vec![
        PlannedAttack::new(DoorOpenWhileAbsent, 7, "09:00", "16:30"),
        PlannedAttack::new(LightsOnWhileAbsent, 8, "09:00", "16:30"),
        PlannedAttack::new(MovementWhileAbsent, 9, "09:00", "16:30"),
        PlannedAttack::new(CameraOffWhileAbsent, 10, "09:00", "16:30"),
        PlannedAttack::new(LightFlickering, 11, "19:00", "22:00"),
        PlannedAttack::new(HeatingOnWhileWindowsOpen, 12, "00:00", "23:59"),
        PlannedAttack::new(LightsOnDuringNight, 13, "00:30", "05:00"),
        PlannedAttack::new(FakeFireClosedWindows, 10, "00:30", "05:00"),
        PlannedAttack::new(FakeFireOpenWindows, 8, "00:30", "05:00"),
    ]
}

/// A built benchmark. `test` carries labels; `benign_test` is the same span
/// without attacks.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub config: BenchmarkConfig,
    pub clock: ZoneClock,
    pub train: Trace,
    pub benign_test: Trace,
    pub test: Trace,
    pub scenarios: Vec<AttackScenario>,
}

impl Benchmark {
    pub fn build(config: BenchmarkConfig) -> Result<Self> {
        if config.train_days == 0 || config.train_days >= config.days {
            return Err(Error::Invalid("train_days must lie between 1 and days - 1".into()));
        }
        let clock = ZoneClock::parse(&config.profile.timezone)?;
        let trace = generate_home(&config.profile, config.days)?;
        let (train, benign_test) = split_by_days(&trace, config.train_days, &clock)?;
        let day0 = day_number(config.profile.start()?);
        let roster = config.profile.roster();
        let mut test = benign_test.clone();
        let mut scenarios = Vec::with_capacity(config.attacks.len());
        for (i, a) in config.attacks.iter().enumerate() {
            if a.day < config.train_days || a.day >= config.days {
                return Err(Error::Invalid(format!("{} planned outside the test days", a.kind.slug())));
            }
            let day = day0 + i64::from(a.day);
            let sc = AttackScenario {
                kind: a.kind,
                category: a.category,
                start: clock.instant_at(day, local_time(&a.from)?),
                end: clock.instant_at(day, local_time(&a.to)?),
                targets: roster.clone(),
                params: a.params.clone(),
            };
            test = inject_attack(&test, &sc, derive_seed(config.seed, 0xA77A_C000 + i as u64))?;
            scenarios.push(sc);
        }
        Ok(Self { config, clock, train, benign_test, test, scenarios })
    }

    pub fn fit(&self) -> Result<(DetectorModel, FitReport)> {
        Ok(DetectorModel::fit(&self.train, &self.clock, &self.config.fit)?)
    }

    /// Fits on the first `days` training days only.
    pub fn fit_prefix(&self, days: u32) -> Result<(DetectorModel, FitReport)> {
        let (prefix, _) = if days >= self.config.train_days {
            (self.train.clone(), Trace::new(self.train.timezone.clone(), Vec::new()))
        } else {
            split_by_days(&self.train, days, &self.clock)?
        };
        Ok(DetectorModel::fit(&prefix, &self.clock, &self.config.fit)?)
    }
}

fn local_time(hhmm: &str) -> Result<NaiveTime> {
    NaiveTime::parse_from_str(hhmm, "%H:%M").map_err(|_| Error::Invalid(format!("bad time of day `{hhmm}`")))
}

/// Independent stream seed for a numbered purpose.
pub fn derive_seed(seed: u64, purpose: u64) -> u64 {
    let mut z = seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Scores `trace` after replaying `history` into the device state, so the
/// first windows are not padded. Scores do not depend on any threshold.
pub fn score_after(det: &DetectorModel, history: &[StatusUpdate], trace: &Trace) -> Result<Vec<f64>> {
    det.check_compatible()?;
    let mut scorer = EventScorer::new(det);
    for u in history {
        scorer.prime(u)?;
    }
    trace.updates.iter().map(|u| Ok(scorer.push(u)?.0)).collect()
}

/// Threshold sequence and decisions for precomputed scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Classified {
    pub thresholds: Vec<f64>,
    pub decisions: Vec<Decision>,
    pub state: ThresholdState,
}

pub fn classify_scores(
    det: &DetectorModel,
    cfg: ThresholdConfig,
    scores: &[f64],
    times: impl IntoIterator<Item = Timestamp>,
    clock: &dyn DayClock,
) -> Result<Classified> {
    let mut state = det.threshold_state(cfg)?;
    let (thresholds, decisions) =
        scores.iter().zip(times).map(|(&s, t)| state.observe(clock.day_of(t), s)).unzip();
    Ok(Classified { thresholds, decisions, state })
}

pub fn evaluate_decisions(trace: &Trace, decisions: &[Decision], policy: LabelPolicy) -> Result<Evaluation> {
    let labels = trace.labels.as_ref().ok_or(argus_core::Error::Unlabeled)?;
    let predicted: Vec<bool> = decisions.iter().map(|d| *d == Decision::Attack).collect();
    let scenarios: Vec<Option<&str>> = trace.updates.iter().map(|u| u.scenario.as_deref()).collect();
    Ok(argus_core::metrics::evaluate_predictions(&predicted, labels, &scenarios, policy)?)
}

/// Scores, classifies and evaluates a labeled trace that follows `history`.
pub fn run_detection(
    det: &DetectorModel,
    history: &Trace,
    test: &Trace,
    cfg: ThresholdConfig,
    clock: &dyn DayClock,
    policy: LabelPolicy,
) -> Result<(Vec<f64>, Classified, Evaluation)> {
    let scores = score_after(det, &history.updates, test)?;
    let classified = classify_scores(det, cfg, &scores, test.updates.iter().map(|u| u.timestamp), clock)?;
    let evaluation = evaluate_decisions(test, &classified.decisions, policy)?;
    Ok((scores, classified, evaluation))
}
