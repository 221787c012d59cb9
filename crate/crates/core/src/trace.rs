//! Device events, traces and day bucketing.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MS_PER_DAY: i64 = 86_400_000;

/// Milliseconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn millis(self) -> i64 {
        self.0
    }

    pub fn add_millis(self, ms: i64) -> Self {
        Timestamp(self.0 + ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Nominal,
    Continuous,
}

impl DeviceKind {
    pub fn name(self) -> &'static str {
        match self {
            DeviceKind::Nominal => "nominal",
            DeviceKind::Continuous => "continuous",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceDescriptor {
    pub id: String,
    pub kind: DeviceKind,
    pub display_name: Option<String>,
}

impl DeviceDescriptor {
    pub fn new(id: impl Into<String>, kind: DeviceKind) -> Self {
        Self { id: id.into(), kind, display_name: None }
    }
}

/// Raw reported state. `Missing` stands for an unavailable reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StateValue {
    Label(String),
    Number(f64),
    Missing,
}

impl StateValue {
    pub fn label(s: impl Into<String>) -> Self {
        StateValue::Label(s.into())
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            StateValue::Label(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            StateValue::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn fits(&self, kind: DeviceKind) -> bool {
        matches!(
            (self, kind),
            (StateValue::Missing, _)
                | (StateValue::Label(_), DeviceKind::Nominal)
                | (StateValue::Number(_), DeviceKind::Continuous)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    #[default]
    Observed,
    Injected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusUpdate {
    pub timestamp: Timestamp,
    pub device_id: String,
    pub state: StateValue,
    pub origin: Origin,
    /// Attack scenario tag, set by the attack injector.
    pub scenario: Option<String>,
    /// Additive offset applied to the mapped state value during preprocessing.
    pub perturbation: Option<f64>,
}

impl StatusUpdate {
    pub fn new(timestamp: Timestamp, device_id: impl Into<String>, state: StateValue) -> Self {
        Self {
            timestamp,
            device_id: device_id.into(),
            state,
            origin: Origin::Observed,
            scenario: None,
            perturbation: None,
        }
    }

    pub fn injected(mut self, scenario: impl Into<String>) -> Self {
        self.origin = Origin::Injected;
        self.scenario = Some(scenario.into());
        self
    }
}

/// A device catalog plus a time-ordered list of updates.
///
/// `labels`, when present, holds one ground-truth attack flag per update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub timezone: String,
    pub devices: Vec<DeviceDescriptor>,
    pub updates: Vec<StatusUpdate>,
    pub labels: Option<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueKind {
    EmptyDeviceId,
    DuplicateDevice,
    Unsorted,
    UnknownDevice,
    KindMismatch,
    NonFiniteState,
    LabelCount,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceIssue {
    pub kind: IssueKind,
    /// Update index (device index for catalog issues). For `Unsorted` this is
    /// the later element of the inverted pair.
    pub index: usize,
    /// Earlier element of an inverted pair.
    pub other: Option<usize>,
}

impl Trace {
    pub fn new(timezone: impl Into<String>, devices: Vec<DeviceDescriptor>) -> Self {
        Self { timezone: timezone.into(), devices, updates: Vec::new(), labels: None }
    }

    /// Builds a trace from unordered updates, sorting them stably by time.
    pub fn from_unsorted(
        timezone: impl Into<String>,
        devices: Vec<DeviceDescriptor>,
        updates: Vec<StatusUpdate>,
        labels: Option<Vec<bool>>,
    ) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != updates.len() {
                return Err(Error::LabelMismatch { labels: l.len(), events: updates.len() });
            }
        }
        let mut order: Vec<usize> = (0..updates.len()).collect();
        order.sort_by_key(|&i| updates[i].timestamp);
        let labels = labels.map(|l| order.iter().map(|&i| l[i]).collect());
        let mut slots: Vec<Option<StatusUpdate>> = updates.into_iter().map(Some).collect();
        let updates = order.iter().map(|&i| slots[i].take().expect("permutation")).collect();
        let trace = Self { timezone: timezone.into(), devices, updates, labels }.normalized();
        let issues = trace.validate();
        if let Some(issue) = issues.first() {
            return Err(issue_error(&trace, issue));
        }
        Ok(trace)
    }

    /// Empty update lists carry no labels.
    pub fn normalized(mut self) -> Self {
        if self.updates.is_empty() {
            self.labels = None;
        }
        self
    }

    pub fn len(&self) -> usize {
        self.updates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.updates.is_empty()
    }

    pub fn device(&self, id: &str) -> Option<&DeviceDescriptor> {
        self.devices.iter().find(|d| d.id == id)
    }

    pub fn label(&self, index: usize) -> Option<bool> {
        self.labels.as_ref().map(|l| l[index])
    }

    /// Labels, or all-benign when the trace carries none.
    pub fn labels_or_benign(&self) -> Vec<bool> {
        self.labels.clone().unwrap_or_else(|| alloc::vec![false; self.updates.len()])
    }

    /// Reports invariant violations without touching the trace. Out-of-order
    /// timestamps yield one issue per inverted pair.
    pub fn validate(&self) -> Vec<TraceIssue> {
        let mut issues = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, d) in self.devices.iter().enumerate() {
            if d.id.is_empty() {
                issues.push(TraceIssue { kind: IssueKind::EmptyDeviceId, index: i, other: None });
            }
            if !seen.insert(d.id.as_str()) {
                issues.push(TraceIssue { kind: IssueKind::DuplicateDevice, index: i, other: None });
            }
        }

        let sorted = self.updates.windows(2).all(|w| w[0].timestamp <= w[1].timestamp);
        if !sorted {
            for j in 0..self.updates.len() {
                for i in 0..j {
                    if self.updates[i].timestamp > self.updates[j].timestamp {
                        issues.push(TraceIssue { kind: IssueKind::Unsorted, index: j, other: Some(i) });
                    }
                }
            }
        }

        for (i, u) in self.updates.iter().enumerate() {
            match self.device(&u.device_id) {
                None => issues.push(TraceIssue { kind: IssueKind::UnknownDevice, index: i, other: None }),
                Some(d) if !u.state.fits(d.kind) => {
                    issues.push(TraceIssue { kind: IssueKind::KindMismatch, index: i, other: None })
                }
                Some(_) => {}
            }
            let finite_state = u.state.as_number().map_or(true, f64::is_finite);
            let finite_perturb = u.perturbation.map_or(true, f64::is_finite);
            if !finite_state || !finite_perturb {
                issues.push(TraceIssue { kind: IssueKind::NonFiniteState, index: i, other: None });
            }
        }

        if let Some(l) = &self.labels {
            if l.len() != self.updates.len() {
                issues.push(TraceIssue { kind: IssueKind::LabelCount, index: l.len(), other: None });
            }
        }
        issues
    }

    /// Sub-trace holding the updates in `range`, same catalog.
    pub fn slice(&self, range: core::ops::Range<usize>) -> Trace {
        Trace {
            timezone: self.timezone.clone(),
            devices: self.devices.clone(),
            updates: self.updates[range.clone()].to_vec(),
            labels: self.labels.as_ref().map(|l| l[range].to_vec()),
        }
        .normalized()
    }

    /// Local calendar day of every update, relative to the first update's day.
    pub fn day_offsets(&self, clock: &dyn DayClock) -> Vec<i64> {
        let Some(first) = self.updates.first() else { return Vec::new() };
        let day0 = clock.day_of(first.timestamp);
        self.updates.iter().map(|u| clock.day_of(u.timestamp) - day0).collect()
    }

    /// Number of calendar days covered, from the first to the last update.
    pub fn span_days(&self, clock: &dyn DayClock) -> i64 {
        match (self.updates.first(), self.updates.last()) {
            (Some(a), Some(b)) => clock.day_of(b.timestamp) - clock.day_of(a.timestamp) + 1,
            _ => 0,
        }
    }
}

fn issue_error(trace: &Trace, issue: &TraceIssue) -> Error {
    match issue.kind {
        IssueKind::UnknownDevice => Error::UnknownDevice(trace.updates[issue.index].device_id.clone()),
        IssueKind::KindMismatch => {
            let id = &trace.updates[issue.index].device_id;
            let kind = trace.device(id).map(|d| d.kind.name()).unwrap_or("valid");
            Error::KindMismatch { device: id.clone(), expected: kind }
        }
        IssueKind::LabelCount => Error::LabelMismatch {
            labels: trace.labels.as_ref().map_or(0, Vec::len),
            events: trace.updates.len(),
        },
        IssueKind::Unsorted => Error::OutOfOrder { index: issue.index },
        IssueKind::EmptyDeviceId => Error::InvalidArgument("empty device id".into()),
        IssueKind::DuplicateDevice => {
            Error::InvalidArgument(alloc::format!("duplicate device `{}`", trace.devices[issue.index].id))
        }
        IssueKind::NonFiniteState => Error::InvalidArgument(alloc::format!("non-finite state at {}", issue.index)),
    }
}

/// Maps an instant to a local calendar day number.
pub trait DayClock {
    fn day_of(&self, t: Timestamp) -> i64;

    /// Milliseconds since local midnight.
    fn time_of_day(&self, t: Timestamp) -> i64;
}

/// Calendar days at a fixed UTC offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FixedOffsetClock {
    pub offset_secs: i32,
}

impl FixedOffsetClock {
    pub const UTC: FixedOffsetClock = FixedOffsetClock { offset_secs: 0 };

    pub fn new(offset_secs: i32) -> Self {
        Self { offset_secs }
    }

    fn local_ms(&self, t: Timestamp) -> i64 {
        t.0 + i64::from(self.offset_secs) * 1000
    }
}

impl DayClock for FixedOffsetClock {
    fn day_of(&self, t: Timestamp) -> i64 {
        self.local_ms(t).div_euclid(MS_PER_DAY)
    }

    fn time_of_day(&self, t: Timestamp) -> i64 {
        self.local_ms(t).rem_euclid(MS_PER_DAY)
    }
}

/// Splits off the first `train_days` calendar days. Day boundaries are
/// half-open: an update at local midnight starts the next day.
pub fn split_by_days(trace: &Trace, train_days: u32, clock: &dyn DayClock) -> Result<(Trace, Trace)> {
    if train_days == 0 {
        return Err(Error::InvalidArgument("train_days must be at least 1".into()));
    }
    if trace.is_empty() {
        return Err(Error::InvalidArgument("cannot split an empty trace".into()));
    }
    let span = trace.span_days(clock);
    if span < i64::from(train_days) {
        return Err(Error::NotEnoughDays { spanned: span, requested: train_days });
    }
    let cut = trace
        .day_offsets(clock)
        .iter()
        .position(|&d| d >= i64::from(train_days))
        .unwrap_or(trace.len());
    Ok((trace.slice(0..cut), trace.slice(cut..trace.len())))
}
