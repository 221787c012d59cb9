//! State mapping, event-chain reconstruction and windowing.
//!
//! Nominal devices map their k observed labels to `id / k` with ids assigned
//! in order of first appearance; anything unseen maps to 0.0. Continuous
//! devices are bucketed into ten equal-width bins over the training range and
//! bin `i` maps to `i / 10`. Values outside the range clamp to the nearest
//! bin, the top bin is closed at the training maximum, and 0.0 doubles as the
//! value for missing readings and never-observed devices.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::trace::{DeviceKind, StateValue, Timestamp, Trace};
use crate::{Error, Result};

pub const BUCKETS: usize = 10;
/// Mapped value for unseen labels, missing readings and unobserved devices.
pub const UNSEEN: f64 = 0.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalStateMap {
    /// Labels in state-id order; the label at position `k` has id `k + 1`.
    pub states: Vec<String>,
}

impl NominalStateMap {
    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_id(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label).map(|p| p + 1)
    }

    pub fn map(&self, label: &str) -> f64 {
        match self.state_id(label) {
            Some(id) => id as f64 / self.cardinality() as f64,
            None => UNSEEN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousBucketMap {
    pub s_min: f64,
    pub s_max: f64,
}

impl ContinuousBucketMap {
    fn lower(&self, i: usize) -> f64 {
        self.s_min + i as f64 * (self.s_max - self.s_min) / BUCKETS as f64
    }

    /// Index of the bucket holding `v`, clamped to `0..BUCKETS`.
    pub fn bucket(&self, v: f64) -> usize {
        let width = self.s_max - self.s_min;
        if !(width > 0.0) || v <= self.s_min {
            return 0;
        }
        if v >= self.s_max {
            return BUCKETS - 1;
        }
        let mut i = ((v - self.s_min) / width * BUCKETS as f64) as usize;
        i = i.min(BUCKETS - 1);
        // settle floating-point rounding against the exact interval bounds
        while i + 1 < BUCKETS && v >= self.lower(i + 1) {
            i += 1;
        }
        while i > 0 && v < self.lower(i) {
            i -= 1;
        }
        i
    }

    pub fn map(&self, v: f64) -> f64 {
        self.bucket(v) as f64 / BUCKETS as f64
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.s_max > self.s_min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DeviceMap {
    Nominal(NominalStateMap),
    Continuous(ContinuousBucketMap),
    /// No training observations; every state maps to 0.0.
    Unobserved { kind: DeviceKind },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CatalogWarning {
    NoTrainingUpdates(String),
    ConstantReading(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMapCatalog {
    /// Vector index `m` of each device; sorted by device id.
    pub device_order: Vec<String>,
    pub maps: BTreeMap<String, DeviceMap>,
    #[serde(default)]
    pub warnings: Vec<CatalogWarning>,
}

impl StateMapCatalog {
    pub fn n_devices(&self) -> usize {
        self.device_order.len()
    }

    pub fn index_of(&self, device_id: &str) -> Option<usize> {
        self.device_order.binary_search_by(|d| d.as_str().cmp(device_id)).ok()
    }

    pub fn is_degenerate(&self, device_id: &str) -> bool {
        match self.maps.get(device_id) {
            Some(DeviceMap::Unobserved { .. }) => true,
            Some(DeviceMap::Continuous(c)) => c.is_degenerate(),
            _ => false,
        }
    }
}

/// Fits per-device maps on (benign) training data.
pub fn fit_state_maps(train: &Trace) -> Result<StateMapCatalog> {
    if train.devices.is_empty() {
        return Err(Error::InvalidArgument("trace has no devices".into()));
    }
    let mut labels: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut ranges: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for u in &train.updates {
        let device = train.device(&u.device_id).ok_or_else(|| Error::UnknownDevice(u.device_id.clone()))?;
        match (&u.state, device.kind) {
            (StateValue::Missing, _) => {}
            (StateValue::Label(l), DeviceKind::Nominal) => {
                let seen = labels.entry(device.id.as_str()).or_default();
                if !seen.iter().any(|s| s == l) {
                    seen.push(l.clone());
                }
            }
            (StateValue::Number(v), DeviceKind::Continuous) => {
                let r = ranges.entry(device.id.as_str()).or_insert((*v, *v));
                r.0 = r.0.min(*v);
                r.1 = r.1.max(*v);
            }
            (_, kind) => return Err(Error::KindMismatch { device: device.id.clone(), expected: kind.name() }),
        }
    }

    let mut device_order: Vec<String> = train.devices.iter().map(|d| d.id.clone()).collect();
    device_order.sort();
    let mut maps = BTreeMap::new();
    let mut warnings = Vec::new();
    for d in &train.devices {
        let map = match d.kind {
            DeviceKind::Nominal => match labels.remove(d.id.as_str()) {
                Some(states) => DeviceMap::Nominal(NominalStateMap { states }),
                None => DeviceMap::Unobserved { kind: d.kind },
            },
            DeviceKind::Continuous => match ranges.get(d.id.as_str()) {
                Some(&(s_min, s_max)) => {
                    if s_min == s_max {
                        warnings.push(CatalogWarning::ConstantReading(d.id.clone()));
                    }
                    DeviceMap::Continuous(ContinuousBucketMap { s_min, s_max })
                }
                None => DeviceMap::Unobserved { kind: d.kind },
            },
        };
        if matches!(map, DeviceMap::Unobserved { .. }) {
            warnings.push(CatalogWarning::NoTrainingUpdates(d.id.clone()));
        }
        maps.insert(d.id.clone(), map);
    }
    warnings.sort_by(|a, b| warning_key(a).cmp(warning_key(b)));
    Ok(StateMapCatalog { device_order, maps, warnings })
}

fn warning_key(w: &CatalogWarning) -> &str {
    match w {
        CatalogWarning::NoTrainingUpdates(d) | CatalogWarning::ConstantReading(d) => d,
    }
}

/// Maps a raw state onto the unit interval.
pub fn map_state(catalog: &StateMapCatalog, device_id: &str, raw: &StateValue) -> Result<f64> {
    let map = catalog.maps.get(device_id).ok_or_else(|| Error::UnknownDevice(device_id.into()))?;
    Ok(match (map, raw) {
        (_, StateValue::Missing) => UNSEEN,
        (DeviceMap::Unobserved { .. }, _) => UNSEEN,
        (DeviceMap::Nominal(m), StateValue::Label(l)) => m.map(l),
        (DeviceMap::Continuous(m), StateValue::Number(v)) => m.map(*v),
        (DeviceMap::Nominal(_), _) => {
            return Err(Error::KindMismatch { device: device_id.into(), expected: "nominal" })
        }
        (DeviceMap::Continuous(_), _) => {
            return Err(Error::KindMismatch { device: device_id.into(), expected: "continuous" })
        }
    })
}

/// Full-system state right after one status update.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: Timestamp,
    pub values: Vec<f64>,
    pub trigger_index: usize,
}

/// Forward-filled device state, updated one event at a time.
#[derive(Debug, Clone)]
pub struct SnapshotBuilder<'c> {
    catalog: &'c StateMapCatalog,
    state: Vec<f64>,
}

impl<'c> SnapshotBuilder<'c> {
    pub fn new(catalog: &'c StateMapCatalog) -> Self {
        Self { catalog, state: vec![UNSEEN; catalog.n_devices()] }
    }

    pub fn apply(&mut self, update: &crate::trace::StatusUpdate) -> Result<Snapshot> {
        let m = self
            .catalog
            .index_of(&update.device_id)
            .ok_or_else(|| Error::UnknownDevice(update.device_id.clone()))?;
        let v = map_state(self.catalog, &update.device_id, &update.state)?;
        self.state[m] = v + update.perturbation.unwrap_or(0.0);
        Ok(Snapshot { time: update.timestamp, values: self.state.clone(), trigger_index: m })
    }

    /// Forward-filled state after the last applied update.
    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// Rewinds to a state previously read with [`Self::state`].
    pub fn restore(&mut self, state: &[f64]) {
        self.state.copy_from_slice(state);
    }
}

/// One snapshot per update with every device's latest mapped state.
pub fn build_event_chain(trace: &Trace, catalog: &StateMapCatalog) -> Result<Vec<Snapshot>> {
    let mut builder = SnapshotBuilder::new(catalog);
    trace.updates.iter().map(|u| builder.apply(u)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowMode {
    Disjoint,
    Sliding,
}

/// Windows of `l` consecutive snapshots, each flattened row-major to
/// `l * n_devices` values.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    pub l: usize,
    pub n_devices: usize,
    pub windows: Vec<Vec<f64>>,
    pub end_times: Vec<Timestamp>,
    pub end_indices: Vec<usize>,
}

impl WindowBatch {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Windows in `range`, preserving order.
    pub fn subset(&self, range: core::ops::Range<usize>) -> WindowBatch {
        WindowBatch {
            l: self.l,
            n_devices: self.n_devices,
            windows: self.windows[range.clone()].to_vec(),
            end_times: self.end_times[range.clone()].to_vec(),
            end_indices: self.end_indices[range].to_vec(),
        }
    }
}

pub fn window_count(n: usize, l: usize, mode: WindowMode) -> usize {
    if l == 0 || n < l {
        return 0;
    }
    match mode {
        WindowMode::Disjoint => n / l,
        WindowMode::Sliding => n - l + 1,
    }
}

pub fn flatten_window(rows: &[Snapshot]) -> Vec<f64> {
    rows.iter().flat_map(|s| s.values.iter().copied()).collect()
}

pub fn build_windows(chain: &[Snapshot], l: usize, mode: WindowMode) -> Result<WindowBatch> {
    let stride = match mode {
        WindowMode::Disjoint => l,
        WindowMode::Sliding => 1,
    };
    build_strided_windows(chain, l, stride)
}

/// Windows starting at every multiple of `stride`; disjoint when
/// `stride == l`, sliding when `stride == 1`.
pub fn build_strided_windows(chain: &[Snapshot], l: usize, stride: usize) -> Result<WindowBatch> {
    if l == 0 || stride == 0 {
        return Err(Error::InvalidArgument("window length and stride must be at least 1".into()));
    }
    let n_devices = chain.first().map_or(0, |s| s.values.len());
    let count = if chain.len() < l { 0 } else { (chain.len() - l) / stride + 1 };
    let mut batch = WindowBatch {
        l,
        n_devices,
        windows: Vec::with_capacity(count),
        end_times: Vec::with_capacity(count),
        end_indices: Vec::with_capacity(count),
    };
    for k in 0..count {
        let start = k * stride;
        let rows = &chain[start..start + l];
        batch.windows.push(flatten_window(rows));
        batch.end_times.push(rows[l - 1].time);
        batch.end_indices.push(start + l - 1);
    }
    Ok(batch)
}
