//! Per-day classification boundary.
//!
//! Each day `d` yields a candidate `C_d = max(E_d) + β·(max(E_d) − min(E_d))`
//! over that day's anomaly scores `E_d`. The threshold follows the candidates
//! with momentum: `T_d = α·T_{d−1} + (1 − α)·C_d`, starting from `T_0 = C_0`.
//! An event is benign iff its score is at most the threshold in force.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Momentum over daily candidates.
    ArgusMomentum,
    /// Static: mean over training days of the daily maximum.
    MeanOfMax,
    /// Mean plus population standard deviation of the previous day.
    MeanPlusStdPrevDay,
    /// Maximum score over all previous days.
    MaxOfPrevDays,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Aging factor: weight of the previous threshold.
    pub alpha: f64,
    /// Security level: margin on the daily score range.
    pub beta: f64,
    pub strategy: Strategy,
    /// Whether scores classified as attacks feed the next day's threshold.
    #[serde(default)]
    pub include_alerted: bool,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { alpha: 0.2, beta: 0.2, strategy: Strategy::ArgusMomentum, include_alerted: false }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument("alpha must lie in [0, 1]".into()));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidArgument("beta must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Benign,
    Attack,
}

pub fn threshold_candidate(scores: &[f64], beta: f64) -> Result<f64> {
    let s = ScoreSummary::of(scores).ok_or(Error::EmptyScores)?;
    Ok(s.max + beta * (s.max - s.min))
}

pub fn update_threshold(prev: Option<f64>, candidate: f64, alpha: f64) -> f64 {
    match prev {
        None => candidate,
        Some(t) => alpha * t + (1.0 - alpha) * candidate,
    }
}

pub fn classify(score: f64, threshold: f64) -> Decision {
    if score <= threshold {
        Decision::Benign
    } else {
        Decision::Attack
    }
}

/// Thresholds of the non-momentum strategies. `prev_days` lists the scores
/// of every earlier day, oldest first.
pub fn alt_threshold(strategy: Strategy, training_days: &[Vec<f64>], prev_days: &[Vec<f64>]) -> Result<f64> {
    match strategy {
        Strategy::MeanOfMax => {
            let maxima: Vec<f64> = training_days
                .iter()
                .filter_map(|d| ScoreSummary::of(d))
                .map(|s| s.max)
                .collect();
            mean(&maxima).ok_or(Error::EmptyScores)
        }
        Strategy::MeanPlusStdPrevDay => {
            let s = prev_days.last().and_then(|d| ScoreSummary::of(d)).ok_or(Error::EmptyScores)?;
            Ok(s.mean + s.std)
        }
        Strategy::MaxOfPrevDays => prev_days
            .iter()
            .filter_map(|d| ScoreSummary::of(d))
            .map(|s| s.max)
            .reduce(f64::max)
            .ok_or(Error::EmptyScores),
        Strategy::ArgusMomentum => {
            Err(Error::InvalidArgument("momentum thresholds come from update_threshold".into()))
        }
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Count, extremes, mean and population standard deviation of a score set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl ScoreSummary {
    pub fn of(scores: &[f64]) -> Option<Self> {
        let m = mean(scores)?;
        let var = scores.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / scores.len() as f64;
        Some(Self {
            count: scores.len(),
            min: scores.iter().copied().fold(f64::INFINITY, f64::min),
            max: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: m,
            std: libm::sqrt(var),
        })
    }

    pub fn candidate(&self, beta: f64) -> f64 {
        self.max + beta * (self.max - self.min)
    }
}

/// Score statistics gathered at fit time to initialize every strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Held-out validation scores.
    pub validation: ScoreSummary,
    /// Training scores grouped by calendar day.
    pub training_days: Vec<ScoreSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub day: i64,
    pub scores: usize,
    pub candidate: Option<f64>,
    /// Threshold in force from the next day on.
    pub threshold: f64,
}

/// Threshold of one detection stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdState {
    pub cfg: ThresholdConfig,
    pub current: f64,
    pub day: Option<i64>,
    pub today: Vec<f64>,
    pub history: Vec<DayRecord>,
    running_max: f64,
}

impl ThresholdState {
    pub fn new(cfg: ThresholdConfig, calibration: &Calibration) -> Result<Self> {
        cfg.validate()?;
        let v = &calibration.validation;
        let current = match cfg.strategy {
            Strategy::ArgusMomentum => update_threshold(None, v.candidate(cfg.beta), cfg.alpha),
            Strategy::MeanOfMax => {
                let maxima: Vec<f64> = calibration.training_days.iter().map(|s| s.max).collect();
                mean(&maxima).ok_or(Error::EmptyScores)?
            }
            Strategy::MeanPlusStdPrevDay => v.mean + v.std,
            Strategy::MaxOfPrevDays => {
                calibration.training_days.iter().map(|s| s.max).fold(v.max, f64::max)
            }
        };
        Ok(Self { cfg, current, day: None, today: Vec::new(), history: Vec::new(), running_max: current })
    }

    /// Starts from an explicit threshold, as if `T_0` were `threshold`.
    pub fn with_threshold(cfg: ThresholdConfig, threshold: f64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            current: threshold,
            day: None,
            today: Vec::new(),
            history: Vec::new(),
            running_max: threshold,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.current
    }

    /// Closes the current day and derives the next threshold from it. Days
    /// without retained scores carry the threshold forward.
    pub fn finish_day(&mut self) {
        let Some(day) = self.day else { return };
        let summary = ScoreSummary::of(&self.today);
        let candidate = summary.map(|s| s.candidate(self.cfg.beta));
        if let Some(s) = summary {
            self.current = match self.cfg.strategy {
                Strategy::ArgusMomentum => update_threshold(Some(self.current), s.candidate(self.cfg.beta), self.cfg.alpha),
                Strategy::MeanOfMax => self.current,
                Strategy::MeanPlusStdPrevDay => s.mean + s.std,
                Strategy::MaxOfPrevDays => {
                    self.running_max = self.running_max.max(s.max);
                    self.running_max
                }
            };
        }
        self.history.push(DayRecord { day, scores: self.today.len(), candidate, threshold: self.current });
        self.today.clear();
        self.day = None;
    }

    /// Classifies one score observed on local calendar day `day`, rolling the
    /// threshold over first when a new day begins.
    pub fn observe(&mut self, day: i64, score: f64) -> (f64, Decision) {
        if matches!(self.day, Some(d) if day > d) {
            self.finish_day();
        }
        if self.day.is_none() {
            self.day = Some(day);
        }
        let t = self.current;
        let decision = classify(score, t);
        if self.cfg.include_alerted || decision == Decision::Benign {
            self.today.push(score);
        }
        (t, decision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn candidate_values() {
        assert!(close(threshold_candidate(&[0.10, 0.20, 0.50], 0.2).unwrap(), 0.58));
        assert_eq!(threshold_candidate(&[0.10, 0.20, 0.50], 0.0).unwrap(), 0.5);
        assert_eq!(threshold_candidate(&[0.3], 7.0).unwrap(), 0.3);
        assert_eq!(threshold_candidate(&[], 0.2), Err(Error::EmptyScores));
    }

    #[test]
    fn momentum_values() {
        assert_eq!(update_threshold(None, 0.58, 0.2), 0.58);
        assert!(close(update_threshold(Some(0.60), 0.58, 0.2), 0.584));
        assert_eq!(update_threshold(Some(0.60), 0.58, 1.0), 0.60);
        assert_eq!(update_threshold(Some(0.60), 0.58, 0.0), 0.58);
    }

    #[test]
    fn classification_boundary() {
        assert_eq!(classify(0.58, 0.58), Decision::Benign);
        assert_eq!(classify(0.5801, 0.58), Decision::Attack);
        assert_eq!(classify(0.0, 0.0), Decision::Benign);
    }

    #[test]
    fn alternative_strategies() {
        let train = vec![vec![0.1, 0.4], vec![0.6, 0.2]];
        assert!(close(alt_threshold(Strategy::MeanOfMax, &train, &[]).unwrap(), 0.5));
        let prev = vec![vec![0.9], vec![0.1, 0.3]];
        assert!(close(alt_threshold(Strategy::MeanPlusStdPrevDay, &[], &prev).unwrap(), 0.3));
        let prev = vec![vec![0.4], vec![0.6]];
        assert_eq!(alt_threshold(Strategy::MaxOfPrevDays, &[], &prev).unwrap(), 0.6);
        assert!(alt_threshold(Strategy::MaxOfPrevDays, &[], &[]).is_err());
        assert!(alt_threshold(Strategy::ArgusMomentum, &train, &prev).is_err());
    }

    fn calibration() -> Calibration {
        Calibration {
            validation: ScoreSummary::of(&[0.1, 0.2, 0.5]).unwrap(),
            training_days: vec![ScoreSummary::of(&[0.4]).unwrap(), ScoreSummary::of(&[0.6]).unwrap()],
        }
    }

    #[test]
    fn state_rolls_over_days() {
        let mut s = ThresholdState::new(ThresholdConfig::default(), &calibration()).unwrap();
        assert!(close(s.threshold(), 0.58));
        assert_eq!(s.observe(10, 0.3), (s.threshold(), Decision::Benign));
        s.observe(10, 0.1);
        s.observe(10, 0.9); // alert, not retained
        let (t, d) = s.observe(11, 0.2);
        // C = 0.3 + 0.2·0.2 = 0.34; T = 0.2·0.58 + 0.8·0.34
        assert!(close(t, 0.2 * 0.58 + 0.8 * 0.34));
        assert_eq!(d, Decision::Benign);
        assert_eq!(s.history.len(), 1);
        assert_eq!(s.history[0].scores, 2);
    }

    #[test]
    fn empty_day_carries_threshold() {
        let mut s = ThresholdState::with_threshold(ThresholdConfig::default(), 0.1).unwrap();
        s.observe(0, 5.0);
        let (t, _) = s.observe(1, 0.0);
        assert_eq!(t, 0.1);
        assert_eq!(s.history[0].candidate, None);
    }

    #[test]
    fn strategies_initialize_from_calibration() {
        let c = calibration();
        let init = |strategy| ThresholdState::new(ThresholdConfig { strategy, ..Default::default() }, &c).unwrap().current;
        assert!(close(init(Strategy::MeanOfMax), 0.5));
        assert_eq!(init(Strategy::MaxOfPrevDays), 0.6);
        let v = c.validation;
        assert_eq!(init(Strategy::MeanPlusStdPrevDay), v.mean + v.std);
    }

    #[test]
    fn alpha_one_freezes_threshold() {
        let cfg = ThresholdConfig { alpha: 1.0, ..Default::default() };
        let mut s = ThresholdState::with_threshold(cfg, 0.4).unwrap();
        for day in 0..5 {
            s.observe(day, 0.1 * day as f64);
        }
        s.finish_day();
        assert!(s.history.iter().all(|r| r.threshold == 0.4));
    }
}
