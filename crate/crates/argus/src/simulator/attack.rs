//! Attack injection.
//!
//! Spoofing attacks (ES, CS) insert updates with origin `injected` and label
//! 1, followed by restoring updates that return the spoofed devices to their
//! prior state. Interception attacks (EI, CI) delete updates; since nothing
//! is left to label, the first remaining update inside the affected interval
//! after the deletion carries label 1 instead.

use std::collections::BTreeMap;

use argus_core::trace::{StateValue, StatusUpdate, Timestamp, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::generate::{AWAY, HEAT, HOME, IDLE, LOCKED, OFF, ON, RECORDING, UNLOCKED};
use super::profile::Role;
use crate::{Error, Result};

const SEC: i64 = 1_000;
const MIN: i64 = 60 * SEC;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    /// Event spoofing.
    ES,
    /// Event interception.
    EI,
    /// Command spoofing.
    CS,
    /// Command interception.
    CI,
}

impl AttackKind {
    pub const ALL: [AttackKind; 9] = [
        AttackKind::DoorOpenWhileAbsent,
        AttackKind::LightsOnWhileAbsent,
        AttackKind::MovementWhileAbsent,
        AttackKind::CameraOffWhileAbsent,
        AttackKind::LightFlickering,
        AttackKind::HeatingOnWhileWindowsOpen,
        AttackKind::LightsOnDuringNight,
        AttackKind::FakeFireClosedWindows,
        AttackKind::FakeFireOpenWindows,
    ];

    /// Categories under which the attack can be mounted.
    pub fn categories(self) -> &'static [Category] {
        use Category::*;
        match self {
            AttackKind::DoorOpenWhileAbsent => &[EI, CS, CI],
            AttackKind::LightsOnWhileAbsent => &[ES, CS],
            AttackKind::MovementWhileAbsent => &[ES],
            AttackKind::CameraOffWhileAbsent => &[ES, CS],
            AttackKind::LightFlickering => &[CS],
            AttackKind::HeatingOnWhileWindowsOpen => &[ES, EI, CI],
            AttackKind::LightsOnDuringNight => &[CS],
            AttackKind::FakeFireClosedWindows => &[ES],
            AttackKind::FakeFireOpenWindows => &[ES],
        }
    }

    /// Spoofing category when one exists, else the first listed.
    pub fn default_category(self) -> Category {
        let cats = self.categories();
        *cats.iter().find(|c| matches!(c, Category::ES | Category::CS)).unwrap_or(&cats[0])
    }

    pub fn slug(self) -> &'static str {
        match self {
            AttackKind::DoorOpenWhileAbsent => "door-open-while-absent",
            AttackKind::LightsOnWhileAbsent => "lights-on-while-absent",
            AttackKind::MovementWhileAbsent => "movement-while-absent",
            AttackKind::CameraOffWhileAbsent => "camera-off-while-absent",
            AttackKind::LightFlickering => "light-flickering",
            AttackKind::HeatingOnWhileWindowsOpen => "heating-on-while-windows-open",
            AttackKind::LightsOnDuringNight => "lights-on-during-night",
            AttackKind::FakeFireClosedWindows => "fake-fire-closed-windows",
            AttackKind::FakeFireOpenWindows => "fake-fire-open-windows",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackParams {
    pub flicker_period_ms: i64,
    pub flicker_count: usize,
    /// How long spoofed states persist before being restored.
    pub dwell_ms: i64,
    /// Spoofed temperature for fake fires, °C.
    pub fire_celsius: f64,
    /// Distance kept from the edges of the context interval.
    pub margin_ms: i64,
    /// Sleep confidence above which the inhabitant counts as asleep.
    pub asleep_above: f64,
}

impl Default for AttackParams {
    fn default() -> Self {
        Self {
            flicker_period_ms: 2 * SEC,
            flicker_count: 20,
            dwell_ms: 2 * MIN,
            fire_celsius: 45.0,
            margin_ms: 10 * MIN,
            asleep_above: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackScenario {
    pub kind: AttackKind,
    pub category: Category,
    /// Injection window, inclusive start and exclusive end.
    #[serde(with = "crate::trace_io::serde_time")]
    pub start: Timestamp,
    #[serde(with = "crate::trace_io::serde_time")]
    pub end: Timestamp,
    /// Device ids by role.
    pub targets: BTreeMap<Role, String>,
    #[serde(default)]
    pub params: AttackParams,
}

impl AttackScenario {
    pub fn new(kind: AttackKind, start: Timestamp, end: Timestamp, targets: BTreeMap<Role, String>) -> Self {
        Self { kind, category: kind.default_category(), start, end, targets, params: AttackParams::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.kind.categories().contains(&self.category) {
            return Err(Error::Invalid(format!("{} cannot be mounted as {:?}", self.kind.slug(), self.category)));
        }
        if self.start >= self.end {
            return Err(Error::Invalid("scenario window is empty".into()));
        }
        if self.params.flicker_count == 0 || self.params.flicker_period_ms <= 0 || self.params.dwell_ms <= 0 {
            return Err(Error::Invalid("attack timing parameters must be positive".into()));
        }
        Ok(())
    }

    fn target(&self, role: Role) -> Result<&str> {
        self.targets.get(&role).map(String::as_str).ok_or_else(|| self.missing(format!("a {role:?} target")))
    }

    fn missing(&self, what: impl Into<String>) -> Error {
        Error::Precondition { scenario: self.kind.slug().into(), missing: what.into() }
    }
}

/// Intervals `[a, b)` during which `device` reports a state satisfying `pred`.
pub fn state_intervals(trace: &Trace, device: &str, pred: impl Fn(&StateValue) -> bool) -> Vec<(Timestamp, Timestamp)> {
    let end = trace.updates.last().map_or(Timestamp(0), |u| u.timestamp);
    let mut out = Vec::new();
    let mut open: Option<Timestamp> = None;
    for u in trace.updates.iter().filter(|u| u.device_id == device) {
        match (pred(&u.state), open) {
            (true, None) => open = Some(u.timestamp),
            (false, Some(a)) => {
                out.push((a, u.timestamp));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(a) = open {
        out.push((a, end));
    }
    out
}

/// Latest state of `device` at or before `t`.
pub fn state_at<'a>(trace: &'a Trace, device: &str, t: Timestamp) -> Option<&'a StateValue> {
    let n = trace.updates.partition_point(|u| u.timestamp <= t);
    trace.updates[..n].iter().rev().find(|u| u.device_id == device).map(|u| &u.state)
}

fn is(label: &'static str) -> impl Fn(&StateValue) -> bool {
    move |s| s.as_label() == Some(label)
}

/// Picks a start time in one of `intervals` (clipped to the scenario window)
/// leaving `span` plus margins free.
fn pick_time(
    rng: &mut ChaCha8Rng,
    sc: &AttackScenario,
    intervals: &[(Timestamp, Timestamp)],
    span: i64,
    what: &str,
) -> Result<i64> {
    let m = sc.params.margin_ms;
    let feasible: Vec<(i64, i64)> = intervals
        .iter()
        .map(|&(a, b)| (a.0.max(sc.start.0) + m, b.0.min(sc.end.0) - m - span))
        .filter(|(lo, hi)| lo <= hi)
        .collect();
    if feasible.is_empty() {
        return Err(sc.missing(format!("{what} inside the window")));
    }
    let (lo, hi) = feasible[rng.random_range(0..feasible.len())];
    Ok(rng.random_range(lo..=hi))
}

fn spoof(t: i64, device: &str, state: StateValue, sc: &AttackScenario) -> StatusUpdate {
    StatusUpdate::new(Timestamp(t), device, state).injected(sc.kind.slug())
}

fn label(s: &'static str) -> StateValue {
    StateValue::label(s)
}

/// Injects one attack. The result is labeled; updates outside the scenario
/// window are untouched.
pub fn inject_attack(trace: &Trace, sc: &AttackScenario, seed: u64) -> Result<Trace> {
    sc.validate()?;
    let (first, last) = match (trace.updates.first(), trace.updates.last()) {
        (Some(a), Some(b)) => (a.timestamp, b.timestamp),
        _ => return Err(sc.missing("a nonempty trace")),
    };
    if sc.start < first || sc.end > Timestamp(last.0 + 1) {
        return Err(Error::Invalid(format!("scenario window for {} lies outside the trace", sc.kind.slug())));
    }
    for id in sc.targets.values() {
        if trace.device(id).is_none() {
            return Err(Error::Core(argus_core::Error::UnknownDevice(id.clone())));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match sc.category {
        Category::ES | Category::CS => {
            let injected = spoofed_updates(trace, sc, &mut rng)?;
            Ok(insert_updates(trace, injected))
        }
        Category::EI | Category::CI => intercept(trace, sc, &mut rng),
    }
}

fn absences(trace: &Trace, sc: &AttackScenario) -> Result<Vec<(Timestamp, Timestamp)>> {
    Ok(state_intervals(trace, sc.target(Role::Presence)?, is(AWAY)))
}

fn spoofed_updates(trace: &Trace, sc: &AttackScenario, rng: &mut ChaCha8Rng) -> Result<Vec<StatusUpdate>> {
    let p = &sc.params;
    let dwell = p.dwell_ms;
    let at = |t: i64, role: Role, s: StateValue| -> Result<StatusUpdate> { Ok(spoof(t, sc.target(role)?, s, sc)) };
    Ok(match sc.kind {
        AttackKind::DoorOpenWhileAbsent => {
            let t = pick_time(rng, sc, &absences(trace, sc)?, dwell + 10 * SEC, "an absence")?;
            vec![
                at(t, Role::Lock, label(UNLOCKED))?,
                at(t + 3 * SEC, Role::Door, label(ON))?,
                at(t + dwell, Role::Door, label(OFF))?,
                at(t + dwell + 5 * SEC, Role::Lock, label(LOCKED))?,
            ]
        }
        AttackKind::LightsOnWhileAbsent => {
            let t = pick_time(rng, sc, &absences(trace, sc)?, dwell, "an absence")?;
            vec![at(t, Role::AmbientLight, label(ON))?, at(t + dwell, Role::AmbientLight, label(OFF))?]
        }
        AttackKind::MovementWhileAbsent => {
            let t = pick_time(rng, sc, &absences(trace, sc)?, 3 * MIN, "an absence")?;
            vec![
                at(t, Role::Motion, label(ON))?,
                at(t + MIN, Role::Motion, label(OFF))?,
                at(t + 2 * MIN, Role::Motion, label(ON))?,
                at(t + 3 * MIN, Role::Motion, label(OFF))?,
            ]
        }
        AttackKind::CameraOffWhileAbsent => {
            let t = pick_time(rng, sc, &absences(trace, sc)?, dwell + 10 * SEC, "an absence")?;
            if sc.category == Category::ES {
                // a fake arrival makes the platform idle the camera
                vec![
                    at(t, Role::Presence, label(HOME))?,
                    at(t + 10 * SEC, Role::Camera, label(IDLE))?,
                    at(t + dwell, Role::Presence, label(AWAY))?,
                    at(t + dwell + 10 * SEC, Role::Camera, label(RECORDING))?,
                ]
            } else {
                vec![at(t, Role::Camera, label(IDLE))?, at(t + dwell, Role::Camera, label(RECORDING))?]
            }
        }
        AttackKind::LightFlickering => {
            let span = p.flicker_period_ms * p.flicker_count as i64;
            let whole = [(sc.start, sc.end)];
            let t = pick_time(rng, sc, &whole, span, "room for the toggles")?;
            let light = sc.target(Role::AmbientLight)?;
            let mut on = state_at(trace, light, Timestamp(t)).and_then(StateValue::as_label) == Some(ON);
            (0..p.flicker_count)
                .map(|k| {
                    on = !on;
                    spoof(t + k as i64 * p.flicker_period_ms, light, label(if on { ON } else { OFF }), sc)
                })
                .collect()
        }
        AttackKind::HeatingOnWhileWindowsOpen => {
            // spoofed thermostat status claiming heating while a window is open
            let open = state_intervals(trace, sc.target(Role::Window)?, is(ON));
            let margin_free = AttackScenario { params: AttackParams { margin_ms: 30 * SEC, ..p.clone() }, ..sc.clone() };
            let t = pick_time(rng, &margin_free, &open, 0, "an open window")?;
            vec![at(t, Role::Thermostat, label(HEAT))?]
        }
        AttackKind::LightsOnDuringNight => {
            let sleep = state_intervals(trace, sc.target(Role::SleepConfidence)?, |s| {
                s.as_number().is_some_and(|v| v > p.asleep_above)
            });
            let t = pick_time(rng, sc, &sleep, dwell, "a sleep period")?;
            vec![at(t, Role::AmbientLight, label(ON))?, at(t + dwell, Role::AmbientLight, label(OFF))?]
        }
        AttackKind::FakeFireClosedWindows | AttackKind::FakeFireOpenWindows => {
            let temp = sc.target(Role::Temperature)?;
            let readings: Vec<f64> = trace
                .updates
                .iter()
                .filter(|u| u.device_id == temp)
                .filter_map(|u| u.state.as_number())
                .collect();
            let peak = readings.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            // a spike stands out only where the room is well below its usual peak
            let cool = state_intervals(trace, temp, |s| s.as_number().is_some_and(|v| v <= peak - 2.0));
            let span = 2 * dwell + 30 * SEC;
            let t = pick_time(rng, sc, &cool, span, "a cool period")?;
            let before = state_at(trace, temp, Timestamp(t)).cloned().unwrap_or(StateValue::Missing);
            let mut out = vec![at(t, Role::Temperature, StateValue::Number(p.fire_celsius))?];
            if sc.kind == AttackKind::FakeFireOpenWindows {
                out.push(at(t + 30 * SEC, Role::Window, label(ON))?);
                out.push(at(t + dwell, Role::Temperature, StateValue::Number(p.fire_celsius + 5.0))?);
                out.push(at(t + 2 * dwell, Role::Window, label(OFF))?);
            } else {
                out.push(at(t + dwell, Role::Temperature, StateValue::Number(p.fire_celsius + 5.0))?);
            }
            out.push(at(t + 2 * dwell + 30 * SEC, Role::Temperature, before)?);
            out
        }
    })
}

/// Suppression attacks. Returns the trace without the intercepted updates and
/// with the first later update inside the affected interval labeled.
fn intercept(trace: &Trace, sc: &AttackScenario, rng: &mut ChaCha8Rng) -> Result<Trace> {
    let within = |t: Timestamp| t >= sc.start && t < sc.end;
    let latency = 60 * SEC;
    let (removed, affected_end): (Vec<usize>, Timestamp) = match (sc.kind, sc.category) {
        (AttackKind::DoorOpenWhileAbsent, cat) => {
            let presence = sc.target(Role::Presence)?;
            let lock = sc.target(Role::Lock)?;
            let leaves: Vec<(Timestamp, Timestamp)> =
                absences(trace, sc)?.into_iter().filter(|&(a, _)| within(a)).collect();
            if leaves.is_empty() {
                return Err(sc.missing("a departure"));
            }
            let (leave, back) = leaves[rng.random_range(0..leaves.len())];
            let leave_idx = trace
                .updates
                .iter()
                .position(|u| u.timestamp == leave && u.device_id == presence)
                .expect("interval starts at an update");
            let lock_idx = trace.updates[leave_idx..]
                .iter()
                .position(|u| u.device_id == lock && u.state.as_label() == Some(LOCKED))
                .map(|k| leave_idx + k)
                .filter(|&k| trace.updates[k].timestamp.0 - leave.0 <= latency)
                .ok_or_else(|| sc.missing("a lock command after the departure"))?;
            let removed = if cat == Category::EI {
                // without the absence event no automation reacts to the departure
                let reactions = automation_reactions(trace, sc, leave_idx, latency);
                std::iter::once(leave_idx).chain(reactions).collect()
            } else {
                vec![lock_idx]
            };
            (removed, back)
        }
        (AttackKind::HeatingOnWhileWindowsOpen, cat) => {
            let window = sc.target(Role::Window)?;
            let thermostat = sc.target(Role::Thermostat)?;
            let opens: Vec<(Timestamp, Timestamp)> =
                state_intervals(trace, window, is(ON)).into_iter().filter(|&(a, _)| within(a)).collect();
            if opens.is_empty() {
                return Err(sc.missing("a window opening"));
            }
            let (open, close) = opens[rng.random_range(0..opens.len())];
            let open_idx = trace
                .updates
                .iter()
                .position(|u| u.timestamp == open && u.device_id == window)
                .expect("interval starts at an update");
            let off_idx = trace.updates[open_idx..]
                .iter()
                .position(|u| u.device_id == thermostat && u.state.as_label() == Some(OFF))
                .map(|k| open_idx + k)
                .filter(|&k| trace.updates[k].timestamp.0 - open.0 <= latency)
                .ok_or_else(|| sc.missing("a heating-off command after the opening"))?;
            let removed = if cat == Category::EI {
                let mut r = vec![open_idx, off_idx];
                // the matching close event and heating resume are moot as well
                if let Some(k) = trace.updates[open_idx..].iter().position(|u| u.timestamp == close && u.device_id == window) {
                    r.push(open_idx + k);
                }
                r
            } else {
                vec![off_idx]
            };
            (removed, close)
        }
        (kind, cat) => {
            return Err(Error::Invalid(format!("{} cannot be mounted as {cat:?}", kind.slug())));
        }
    };

    let first_removed = removed.iter().map(|&i| trace.updates[i].timestamp).min().expect("nonempty");
    let mut updates = Vec::with_capacity(trace.len());
    let mut labels = Vec::with_capacity(trace.len());
    let old_labels = trace.labels_or_benign();
    let mut pending = true;
    for (i, u) in trace.updates.iter().enumerate() {
        if removed.contains(&i) {
            continue;
        }
        let mut u = u.clone();
        let mut l = old_labels[i];
        if pending && u.timestamp >= first_removed && i > removed[0] {
            if u.timestamp >= affected_end.min(sc.end) {
                return Err(sc.missing("an update inside the affected interval"));
            }
            pending = false;
            l = true;
            u.scenario = Some(sc.kind.slug().into());
        }
        updates.push(u);
        labels.push(l);
    }
    if pending {
        return Err(sc.missing("an update inside the affected interval"));
    }
    Ok(Trace { timezone: trace.timezone.clone(), devices: trace.devices.clone(), updates, labels: Some(labels) })
}

/// Indices of automation updates within `latency` after `idx`.
fn automation_reactions(trace: &Trace, sc: &AttackScenario, idx: usize, latency: i64) -> Vec<usize> {
    let actuated: Vec<&str> = [Role::Lock, Role::Camera, Role::AmbientLight, Role::TaskLight, Role::Thermostat]
        .iter()
        .filter_map(|r| sc.targets.get(r).map(String::as_str))
        .collect();
    let t0 = trace.updates[idx].timestamp.0;
    trace.updates[idx + 1..]
        .iter()
        .enumerate()
        .take_while(|(_, u)| u.timestamp.0 - t0 <= latency)
        .filter(|(_, u)| actuated.contains(&u.device_id.as_str()))
        .map(|(k, _)| idx + 1 + k)
        .collect()
}

/// Merges `extra` into the trace at their timestamps, after existing updates
/// with equal time. Extra updates are labeled 1.
pub fn insert_updates(trace: &Trace, mut extra: Vec<StatusUpdate>) -> Trace {
    extra.sort_by_key(|u| u.timestamp);
    let old_labels = trace.labels_or_benign();
    let mut updates = Vec::with_capacity(trace.len() + extra.len());
    let mut labels = Vec::with_capacity(trace.len() + extra.len());
    let mut extra = extra.into_iter().peekable();
    for (u, l) in trace.updates.iter().zip(old_labels) {
        while let Some(e) = extra.next_if(|e| e.timestamp < u.timestamp) {
            updates.push(e);
            labels.push(true);
        }
        updates.push(u.clone());
        labels.push(l);
    }
    for e in extra {
        updates.push(e);
        labels.push(true);
    }
    Trace { timezone: trace.timezone.clone(), devices: trace.devices.clone(), updates, labels: Some(labels) }
}
