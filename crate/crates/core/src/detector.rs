//! End-to-end detector: fitting on a benign trace and streaming verdicts.
//!
//! Every status update is scored by the window ending at its own snapshot.
//! The first `l − 1` events of a stream have no full window; their window is
//! padded at the front with copies of the first snapshot and their verdicts
//! are marked provisional.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::metrics::{evaluate_predictions, Evaluation, LabelPolicy};
use crate::nn::{train_with_progress, AutoencoderModel, TrainConfig, TrainReport};
use crate::preprocess::{
    build_event_chain, build_strided_windows, build_windows, fit_state_maps, Snapshot, SnapshotBuilder, StateMapCatalog, WindowMode,
};
use crate::threshold::{Calibration, Decision, ScoreSummary, ThresholdConfig, ThresholdState};
use crate::trace::{DayClock, StatusUpdate, Timestamp, Trace};
use crate::{Error, Result};

pub const DEFAULT_WINDOW_LEN: usize = 16;
pub const DEFAULT_CONTEXT_DEPTH: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub train: TrainConfig,
    pub threshold: ThresholdConfig,
    pub window_len: usize,
    /// Preceding updates attached to each verdict.
    pub context_depth: usize,
    /// Step between training windows; `None` trains on disjoint windows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_stride: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::full(),
            threshold: ThresholdConfig::default(),
            window_len: DEFAULT_WINDOW_LEN,
            context_depth: DEFAULT_CONTEXT_DEPTH,
            train_stride: None,
        }
    }
}

/// A fitted detector: state maps, autoencoder and threshold calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub catalog: StateMapCatalog,
    pub model: AutoencoderModel,
    pub threshold: ThresholdConfig,
    pub calibration: Calibration,
    /// Threshold in force on the first detection day.
    pub bootstrap_t: f64,
    pub context_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub train: TrainReport,
    /// Sliding-window scores over the training chain, one per event from
    /// index `l − 1` on.
    pub training_scores: Vec<f64>,
    pub validation_scores: Vec<f64>,
}

impl DetectorModel {
    pub fn fit(train: &Trace, clock: &dyn DayClock, cfg: &FitConfig) -> Result<(Self, FitReport)> {
        Self::fit_with_progress(train, clock, cfg, &mut |_, _, _| {})
    }

    pub fn fit_with_progress(
        train: &Trace,
        clock: &dyn DayClock,
        cfg: &FitConfig,
        progress: &mut dyn FnMut(usize, f64, Option<f64>),
    ) -> Result<(Self, FitReport)> {
        cfg.threshold.validate()?;
        let catalog = fit_state_maps(train)?;
        let chain = build_event_chain(train, &catalog)?;
        let l = cfg.window_len;
        let stride = cfg.train_stride.unwrap_or(l);
        if stride == 0 || stride > l {
            return Err(Error::InvalidArgument("train_stride must lie in 1..=window_len".into()));
        }
        let batch = build_strided_windows(&chain, l, stride)?;
        if batch.is_empty() {
            return Err(Error::NoWindows);
        }
        let (model, report) = train_with_progress(&batch, &cfg.train, progress)?;

        let sliding = build_windows(&chain, l, WindowMode::Sliding)?;
        let scores = sliding.windows.iter().map(|w| model.score(w)).collect::<Result<Vec<f64>>>()?;

        // validation windows: sliding windows lying inside the held-out tail
        let covered = batch.end_indices.last().map_or(0, |&e| e + 1);
        let first_val = batch.len() - report.n_val;
        let val_start = batch.end_indices.get(first_val).map_or(covered, |&e| e + 1 - l);
        let validation_scores: Vec<f64> = if report.n_val == 0 {
            scores.clone()
        } else {
            sliding
                .end_indices
                .iter()
                .zip(&scores)
                .filter(|(&end, _)| end + 1 >= val_start + l && end < covered)
                .map(|(_, &s)| s)
                .collect()
        };
        let validation = ScoreSummary::of(&validation_scores).ok_or(Error::EmptyScores)?;

        let mut training_days = Vec::new();
        let mut day_scores = Vec::new();
        let mut current_day = None;
        for (t, &s) in sliding.end_times.iter().zip(&scores) {
            let day = clock.day_of(*t);
            if current_day.is_some_and(|d| d != day) {
                training_days.extend(ScoreSummary::of(&day_scores));
                day_scores.clear();
            }
            current_day = Some(day);
            day_scores.push(s);
        }
        training_days.extend(ScoreSummary::of(&day_scores));

        let calibration = Calibration { validation, training_days };
        let bootstrap_t = ThresholdState::new(cfg.threshold, &calibration)?.threshold();
        let detector = DetectorModel {
            catalog,
            model,
            threshold: cfg.threshold,
            calibration,
            bootstrap_t,
            context_depth: cfg.context_depth,
        };
        Ok((detector, FitReport { train: report, training_scores: scores, validation_scores }))
    }

    pub fn window_len(&self) -> usize {
        self.model.arch.window_len
    }

    /// Checks that the catalog and the network agree on the input shape.
    pub fn check_compatible(&self) -> Result<()> {
        if self.catalog.n_devices() != self.model.arch.n_devices {
            return Err(Error::Incompatible(alloc::format!(
                "catalog has {} devices, network expects {}",
                self.catalog.n_devices(),
                self.model.arch.n_devices
            )));
        }
        self.model.arch.validate()
    }

    /// Threshold state at the start of detection under `cfg`.
    pub fn threshold_state(&self, cfg: ThresholdConfig) -> Result<ThresholdState> {
        ThresholdState::new(cfg, &self.calibration)
    }

    /// Scores every event of `trace` independently of any threshold.
    pub fn score_trace(&self, trace: &Trace) -> Result<Vec<f64>> {
        let chain = build_event_chain(trace, &self.catalog)?;
        (0..chain.len()).map(|i| self.model.score(&padded_window(&chain, i, self.window_len()))).collect()
    }
}

/// The window ending at `chain[end]`, front-padded with `chain[0]` when
/// fewer than `l` snapshots precede it.
pub fn padded_window(chain: &[Snapshot], end: usize, l: usize) -> Vec<f64> {
    let n = chain.first().map_or(0, |s| s.values.len());
    let mut out = Vec::with_capacity(l * n);
    for k in 0..l {
        let idx = (end + k + 1).saturating_sub(l);
        let row = if end + k + 1 < l { &chain[0] } else { &chain[idx] };
        out.extend_from_slice(&row.values);
    }
    out
}

/// Classifies precomputed scores in time order, rolling the threshold per
/// local day. Scores here do not depend on earlier decisions.
pub fn apply_thresholds(
    scores: &[f64],
    times: &[Timestamp],
    clock: &dyn DayClock,
    state: &mut ThresholdState,
) -> Vec<(f64, Decision)> {
    scores.iter().zip(times).map(|(&s, &t)| state.observe(clock.day_of(t), s)).collect()
}

/// Rolling window over the snapshot chain of a live stream.
pub struct EventScorer<'m> {
    model: &'m AutoencoderModel,
    builder: SnapshotBuilder<'m>,
    rows: VecDeque<Vec<f64>>,
    first: Option<Vec<f64>>,
    seen: usize,
}

impl<'m> EventScorer<'m> {
    pub fn new(detector: &'m DetectorModel) -> Self {
        Self {
            model: &detector.model,
            builder: SnapshotBuilder::new(&detector.catalog),
            rows: VecDeque::with_capacity(detector.window_len()),
            first: None,
            seen: 0,
        }
    }

    /// Scores `update` and advances the stream. Returns the score and
    /// whether the window was padded.
    pub fn push(&mut self, update: &StatusUpdate) -> Result<(f64, bool)> {
        let before = self.builder.state().to_vec();
        let snap = self.builder.apply(update)?;
        let l = self.model.arch.window_len;
        let first = self.first.get_or_insert_with(|| snap.values.clone()).clone();
        if self.rows.len() == l {
            self.rows.pop_front();
        }
        self.rows.push_back(snap.values);
        let mut window = Vec::with_capacity(l * first.len());
        for _ in self.rows.len()..l {
            window.extend_from_slice(&first);
        }
        for r in &self.rows {
            window.extend_from_slice(r);
        }
        let provisional = self.seen + 1 < l;
        match self.model.score(&window) {
            Ok(score) => {
                self.seen += 1;
                Ok((score, provisional))
            }
            Err(e) => {
                self.rows.pop_back();
                self.builder.restore(&before);
                Err(e)
            }
        }
    }

    /// Advances the stream without scoring.
    pub fn prime(&mut self, update: &StatusUpdate) -> Result<()> {
        let snap = self.builder.apply(update)?;
        if self.first.is_none() {
            self.first = Some(snap.values.clone());
        }
        if self.rows.len() == self.model.arch.window_len {
            self.rows.pop_front();
        }
        self.rows.push_back(snap.values);
        self.seen += 1;
        Ok(())
    }

    /// Undoes the most recent [`Self::push`], given the state it replaced.
    fn rewind(&mut self, before: &[f64], evicted: Option<Vec<f64>>) {
        self.rows.pop_back();
        if let Some(row) = evicted {
            self.rows.push_front(row);
        }
        self.builder.restore(before);
        self.seen -= 1;
        if self.seen == 0 {
            self.first = None;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub index: usize,
    pub update: StatusUpdate,
    pub score: f64,
    pub threshold: f64,
    pub decision: Decision,
    pub provisional: bool,
    /// For attacks, up to `context_depth` updates preceding this one, oldest
    /// first. Empty for benign verdicts.
    pub context: Vec<StatusUpdate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamOptions {
    /// Whether updates classified as attacks still enter the device state
    /// seen by later windows.
    pub feed_alerted: bool,
}

impl Default for StreamOptions {
    fn default() -> Self {
        Self { feed_alerted: true }
    }
}

/// Online detection over a time-ordered stream of updates.
pub struct DetectionStream<'m> {
    scorer: EventScorer<'m>,
    threshold: ThresholdState,
    clock: &'m dyn DayClock,
    context: VecDeque<StatusUpdate>,
    context_depth: usize,
    options: StreamOptions,
    index: usize,
    last_time: Option<Timestamp>,
}

impl<'m> DetectionStream<'m> {
    pub fn new(detector: &'m DetectorModel, clock: &'m dyn DayClock) -> Result<Self> {
        Self::with_config(detector, clock, detector.threshold, StreamOptions::default())
    }

    pub fn with_config(
        detector: &'m DetectorModel,
        clock: &'m dyn DayClock,
        threshold: ThresholdConfig,
        options: StreamOptions,
    ) -> Result<Self> {
        detector.check_compatible()?;
        Ok(Self {
            scorer: EventScorer::new(detector),
            threshold: detector.threshold_state(threshold)?,
            clock,
            context: VecDeque::with_capacity(detector.context_depth),
            context_depth: detector.context_depth,
            options,
            index: 0,
            last_time: None,
        })
    }

    /// Continues with a threshold state saved from an earlier stream.
    pub fn resume(
        detector: &'m DetectorModel,
        clock: &'m dyn DayClock,
        state: ThresholdState,
        options: StreamOptions,
    ) -> Result<Self> {
        let mut stream = Self::with_config(detector, clock, state.cfg, options)?;
        stream.threshold = state;
        Ok(stream)
    }

    pub fn threshold_state(&self) -> &ThresholdState {
        &self.threshold
    }

    pub fn push(&mut self, update: StatusUpdate) -> Result<Verdict> {
        if self.last_time.is_some_and(|t| update.timestamp < t) {
            return Err(Error::OutOfOrder { index: self.index });
        }
        let before = self.scorer.builder.state().to_vec();
        let evicted = (self.scorer.rows.len() == self.scorer.model.arch.window_len)
            .then(|| self.scorer.rows.front().cloned())
            .flatten();
        let (score, provisional) = self.scorer.push(&update)?;
        let (threshold, decision) = self.threshold.observe(self.clock.day_of(update.timestamp), score);
        if decision == Decision::Attack && !self.options.feed_alerted {
            self.scorer.rewind(&before, evicted);
        }
        self.last_time = Some(update.timestamp);
        let verdict = Verdict {
            index: self.index,
            update: update.clone(),
            score,
            threshold,
            decision,
            provisional,
            context: match decision {
                Decision::Attack => self.context.iter().cloned().collect(),
                Decision::Benign => Vec::new(),
            },
        };
        if self.context_depth > 0 {
            if self.context.len() == self.context_depth {
                self.context.pop_front();
            }
            self.context.push_back(update);
        }
        self.index += 1;
        Ok(verdict)
    }

    /// Feeds earlier updates into the device state, window and context
    /// without classifying them or touching the threshold.
    pub fn warm_up<'u>(&mut self, history: impl IntoIterator<Item = &'u StatusUpdate>) -> Result<()> {
        for u in history {
            if self.last_time.is_some_and(|t| u.timestamp < t) {
                return Err(Error::OutOfOrder { index: self.index });
            }
            self.scorer.prime(u)?;
            self.last_time = Some(u.timestamp);
            if self.context_depth > 0 {
                if self.context.len() == self.context_depth {
                    self.context.pop_front();
                }
                self.context.push_back(u.clone());
            }
        }
        Ok(())
    }

    /// Closes the current day so its scores count toward the threshold.
    pub fn finish(&mut self) {
        self.threshold.finish_day();
    }
}

/// Runs `trace` through a fresh stream.
pub fn detect_trace(detector: &DetectorModel, trace: &Trace, clock: &dyn DayClock) -> Result<Vec<Verdict>> {
    let mut stream = DetectionStream::new(detector, clock)?;
    trace.updates.iter().map(|u| stream.push(u.clone())).collect()
}

/// Compares verdicts with the trace's labels.
pub fn evaluate(trace: &Trace, verdicts: &[Verdict], policy: LabelPolicy) -> Result<Evaluation> {
    let labels = trace.labels.as_ref().ok_or(Error::Unlabeled)?;
    let predicted: Vec<bool> = verdicts.iter().map(|v| v.decision == Decision::Attack).collect();
    let scenarios: Vec<Option<&str>> = trace.updates.iter().map(|u| u.scenario.as_deref()).collect();
    evaluate_predictions(&predicted, labels, &scenarios, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Variant;
    use crate::preprocess::WindowBatch;
    use crate::trace::{DeviceDescriptor, DeviceKind, FixedOffsetClock, StateValue};
    use alloc::string::String;
    use alloc::vec;

    const HOUR: i64 = 3_600_000;

    fn tiny_fit() -> FitConfig {
        FitConfig {
            train: TrainConfig {
                encoder_hidden: vec![6, 3],
                decoder_hidden: vec![3, 6],
                lr_start: 1e-2,
                lr_milestones: vec![],
                dropout: 0.0,
                max_epochs: 30,
                batch_size: 8,
                early_stop_patience: 100,
                seed: 5,
                ..TrainConfig::full()
            },
            window_len: 4,
            ..FitConfig::default()
        }
    }

    fn toggling_trace(days: i64) -> Trace {
        let mut t = Trace::new(
            "UTC",
            vec![
                DeviceDescriptor::new("lamp", DeviceKind::Nominal),
                DeviceDescriptor::new("temp", DeviceKind::Continuous),
            ],
        );
        for h in 0..days * 24 {
            let on = if h % 2 == 0 { "on" } else { "off" };
            t.updates.push(StatusUpdate::new(Timestamp(h * HOUR), "lamp", StateValue::label(on)));
            let temp = 18.0 + (h % 24) as f64 / 4.0;
            t.updates.push(StatusUpdate::new(Timestamp(h * HOUR + 1000), "temp", StateValue::Number(temp)));
        }
        t
    }

    #[test]
    fn padded_window_repeats_first_snapshot() {
        let chain: Vec<Snapshot> = (0..3)
            .map(|i| Snapshot { time: Timestamp(i), values: vec![i as f64, 10.0 + i as f64], trigger_index: 0 })
            .collect();
        assert_eq!(padded_window(&chain, 0, 3), vec![0.0, 10.0, 0.0, 10.0, 0.0, 10.0]);
        assert_eq!(padded_window(&chain, 1, 3), vec![0.0, 10.0, 0.0, 10.0, 1.0, 11.0]);
        assert_eq!(padded_window(&chain, 2, 3), vec![0.0, 10.0, 1.0, 11.0, 2.0, 12.0]);
    }

    #[test]
    fn fit_produces_consistent_calibration() {
        let trace = toggling_trace(3);
        let (det, report) = DetectorModel::fit(&trace, &FixedOffsetClock::UTC, &tiny_fit()).unwrap();
        det.check_compatible().unwrap();
        assert_eq!(report.training_scores.len(), trace.len() - 3);
        assert_eq!(det.calibration.training_days.len(), 3);
        let v = &det.calibration.validation;
        assert!((det.bootstrap_t - (v.max + 0.2 * (v.max - v.min))).abs() < 1e-12);
        assert!(report.validation_scores.len() < report.training_scores.len());
    }

    #[test]
    fn stream_matches_batch_scoring() {
        let trace = toggling_trace(2);
        let (det, _) = DetectorModel::fit(&trace, &FixedOffsetClock::UTC, &tiny_fit()).unwrap();
        let batch = det.score_trace(&trace).unwrap();
        let verdicts = detect_trace(&det, &trace, &FixedOffsetClock::UTC).unwrap();
        for (v, s) in verdicts.iter().zip(&batch) {
            assert_eq!(v.score, *s);
        }
        assert!(verdicts[..3].iter().all(|v| v.provisional));
        assert!(verdicts[3..].iter().all(|v| !v.provisional));
        for v in &verdicts {
            assert_eq!(v.context.is_empty(), v.decision == Decision::Benign || v.index == 0);
        }

        // full windows agree with the sliding batch used during fitting
        let chain = build_event_chain(&trace, &det.catalog).unwrap();
        let sliding: WindowBatch = build_windows(&chain, 4, WindowMode::Sliding).unwrap();
        assert_eq!(det.model.score(&sliding.windows[0]).unwrap(), batch[3]);
    }

    #[test]
    fn stream_rejects_out_of_order_and_unknown() {
        let trace = toggling_trace(1);
        let (det, _) = DetectorModel::fit(&trace, &FixedOffsetClock::UTC, &tiny_fit()).unwrap();
        let clock = FixedOffsetClock::UTC;
        let mut s = DetectionStream::new(&det, &clock).unwrap();
        s.push(trace.updates[5].clone()).unwrap();
        assert_eq!(s.push(trace.updates[0].clone()).unwrap_err(), Error::OutOfOrder { index: 1 });
        let ghost = StatusUpdate::new(Timestamp(10 * HOUR), "ghost", StateValue::label("on"));
        assert_eq!(s.push(ghost).unwrap_err(), Error::UnknownDevice(String::from("ghost")));
        // a rejected update leaves the stream usable
        assert_eq!(s.push(trace.updates[6].clone()).unwrap().index, 1);
    }

    #[test]
    fn injected_anomaly_scores_higher() {
        let trace = toggling_trace(3);
        let mut cfg = tiny_fit();
        cfg.train.max_epochs = 150;
        let (det, _) = DetectorModel::fit(&trace, &FixedOffsetClock::UTC, &cfg).unwrap();
        let base = det.score_trace(&trace).unwrap();
        let mut bad = trace.clone();
        bad.updates[41].state = StateValue::Number(60.0);
        let attacked = det.score_trace(&bad).unwrap();
        assert!(attacked[41] > base[41]);
    }

    #[test]
    fn dense_variant_fits_too() {
        let mut cfg = tiny_fit();
        cfg.train.variant = Variant::Dense;
        let (det, _) = DetectorModel::fit(&toggling_trace(1), &FixedOffsetClock::UTC, &cfg).unwrap();
        assert_eq!(det.model.arch.variant, Variant::Dense);
    }

    #[test]
    fn too_short_trace_has_no_windows() {
        let mut t = toggling_trace(1);
        t.updates.truncate(3);
        assert_eq!(DetectorModel::fit(&t, &FixedOffsetClock::UTC, &tiny_fit()).unwrap_err(), Error::NoWindows);
    }

    #[test]
    fn unfed_alerts_do_not_change_state() {
        let trace = toggling_trace(1);
        let (det, _) = DetectorModel::fit(&trace, &FixedOffsetClock::UTC, &tiny_fit()).unwrap();
        let clock = FixedOffsetClock::UTC;
        let cfg = ThresholdConfig { beta: 0.0, ..det.threshold };
        let mut s = DetectionStream::with_config(&det, &clock, cfg, StreamOptions { feed_alerted: false }).unwrap();
        for u in &trace.updates[..10] {
            s.push(u.clone()).unwrap();
        }
        let state = s.scorer.builder.state().to_vec();
        let mut spike = trace.updates[10].clone();
        spike.device_id = String::from("temp");
        spike.state = StateValue::Number(1e6);
        spike.perturbation = Some(50.0);
        let v = s.push(spike).unwrap();
        assert_eq!(v.decision, Decision::Attack);
        assert_eq!(v.context.len(), DEFAULT_CONTEXT_DEPTH);
        assert_eq!(v.context.last().unwrap(), &trace.updates[9]);
        assert_eq!(s.scorer.builder.state(), &state[..]);
    }

    #[test]
    fn warm_up_continues_the_chain() {
        let trace = toggling_trace(2);
        let (det, _) = DetectorModel::fit(&trace, &FixedOffsetClock::UTC, &tiny_fit()).unwrap();
        let batch = det.score_trace(&trace).unwrap();
        let clock = FixedOffsetClock::UTC;
        let mut s = DetectionStream::new(&det, &clock).unwrap();
        s.warm_up(&trace.updates[..20]).unwrap();
        assert!(s.threshold_state().history.is_empty() && s.threshold_state().today.is_empty());
        for (k, u) in trace.updates[20..].iter().enumerate() {
            let v = s.push(u.clone()).unwrap();
            assert_eq!(v.index, k);
            assert_eq!(v.score, batch[20 + k]);
            assert!(!v.provisional);
        }
    }
}
