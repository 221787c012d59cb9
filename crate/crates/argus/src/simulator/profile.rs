//! Home profiles: device roster, inhabitant schedule and automation rules.

use std::collections::BTreeMap;

use argus_core::trace::DeviceKind;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// What a device measures or actuates. Fixes its kind and its states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// `home` / `not_home`.
    Presence,
    /// Continuous, 0 to 100.
    SleepConfidence,
    /// `on` / `off`.
    Motion,
    /// Entrance door contact, `on` when open.
    Door,
    /// `locked` / `unlocked`.
    Lock,
    /// Window contact, `on` when open.
    Window,
    /// Room light used in the evening.
    AmbientLight,
    /// Desk light used in work sessions.
    TaskLight,
    /// Continuous, °C.
    Temperature,
    /// Continuous, percent.
    Humidity,
    /// `heat` / `eco` / `off`.
    Thermostat,
    /// `recording` / `idle`.
    Camera,
}

impl Role {
    pub fn kind(self) -> DeviceKind {
        match self {
            Role::SleepConfidence | Role::Temperature | Role::Humidity => DeviceKind::Continuous,
            _ => DeviceKind::Nominal,
        }
    }

    pub fn is_light(self) -> bool {
        matches!(self, Role::AmbientLight | Role::TaskLight)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub id: String,
    pub role: Role,
}

/// Automations run by the home platform. Each fires on a state change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Presence leaves: every light goes off.
    LightsOffWhenAbsent,
    /// Presence leaves: camera records; presence returns: camera idles.
    CameraWhenAbsent,
    /// Presence leaves: the front door locks.
    LockOnLeave,
    /// Window opens: heating off; window closes: heating resumes.
    HeatingOffWhenWindowOpen,
    /// Bedtime: heating to eco; wake-up: heating back to heat.
    HeatingEcoAtNight,
    /// Presence leaves: heating to eco; presence returns: heat.
    HeatingEcoWhenAway,
    /// Bedtime: every light goes off.
    LightsOffAtNight,
}

impl Rule {
    /// Roles that must be on the roster for the rule to apply.
    pub fn required_roles(self) -> &'static [Role] {
        match self {
            Rule::LightsOffWhenAbsent => &[Role::Presence],
            Rule::CameraWhenAbsent => &[Role::Presence, Role::Camera],
            Rule::LockOnLeave => &[Role::Presence, Role::Lock],
            Rule::HeatingOffWhenWindowOpen => &[Role::Window, Role::Thermostat],
            Rule::HeatingEcoAtNight => &[Role::Thermostat],
            Rule::HeatingEcoWhenAway => &[Role::Presence, Role::Thermostat],
            Rule::LightsOffAtNight => &[],
        }
    }
}

/// Inhabitant routine. Times are local `HH:MM`; every daily time is
/// jittered uniformly by up to `jitter_minutes` either way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub wake: String,
    pub bedtime: String,
    pub jitter_minutes: u32,
    pub weekday_leave: String,
    pub weekday_return: String,
    /// Chance of a weekend afternoon outing.
    pub weekend_outing_probability: f64,
    pub weekend_outing_start: String,
    pub weekend_outing_minutes: u32,
    /// Ambient lights come on at dusk if someone is home and awake.
    pub dusk: String,
    /// Morning airing starts this long after waking.
    pub airing_after_wake_minutes: u32,
    pub airing_minutes: u32,
    pub evening_airing_probability: f64,
    pub evening_airing: String,
    /// Mean gap between motion triggers while home and awake.
    pub motion_mean_gap_minutes: f64,
    /// Evening desk session on weekdays, late morning on weekends.
    pub desk_session_minutes: u32,
    pub weekday_desk_start: String,
    pub weekend_desk_start: String,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            wake: "06:45".into(),
            bedtime: "23:00".into(),
            jitter_minutes: 20,
            weekday_leave: "08:15".into(),
            weekday_return: "17:30".into(),
            weekend_outing_probability: 0.7,
            weekend_outing_start: "14:00".into(),
            weekend_outing_minutes: 150,
            dusk: "16:30".into(),
            airing_after_wake_minutes: 20,
            airing_minutes: 10,
            evening_airing_probability: 0.5,
            evening_airing: "19:30".into(),
            motion_mean_gap_minutes: 15.0,
            desk_session_minutes: 90,
            weekday_desk_start: "20:00".into(),
            weekend_desk_start: "10:30".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeProfile {
    pub name: String,
    /// IANA zone or fixed offset used for the schedule and day bucketing.
    pub timezone: String,
    /// Local date of day 0, `YYYY-MM-DD`.
    pub start_date: String,
    pub devices: Vec<DeviceSpec>,
    pub schedule: Schedule,
    pub rules: Vec<Rule>,
    /// Reporting cadence of continuous sensors.
    pub sample_minutes: u32,
    pub seed: u64,
}

impl HomeProfile {
    /// Single-occupant apartment with twelve devices, starting on a Monday
    /// in January.
    pub fn reference() -> Self {
        let devices = [
            ("person.resident", Role::Presence),
            ("sensor.sleep_confidence", Role::SleepConfidence),
            ("binary_sensor.motion", Role::Motion),
            ("binary_sensor.front_door", Role::Door),
            ("lock.front_door", Role::Lock),
            ("binary_sensor.window", Role::Window),
            ("light.living_room", Role::AmbientLight),
            ("light.desk", Role::TaskLight),
            ("sensor.temperature", Role::Temperature),
            ("sensor.humidity", Role::Humidity),
            ("climate.thermostat", Role::Thermostat),
            ("camera.entrance", Role::Camera),
        ]
        .into_iter()
        .map(|(id, role)| DeviceSpec { id: id.into(), role })
        .collect();
        Self {
            name: "reference".into(),
            timezone: "Europe/Berlin".into(),
            start_date: "2024-01-08".into(),
            devices,
            schedule: Schedule::default(),
            rules: vec![
                Rule::LightsOffWhenAbsent,
                Rule::CameraWhenAbsent,
                Rule::LockOnLeave,
                Rule::HeatingOffWhenWindowOpen,
                Rule::HeatingEcoAtNight,
                Rule::HeatingEcoWhenAway,
                Rule::LightsOffAtNight,
            ],
            sample_minutes: 5,
            seed: 0,
        }
    }

    pub fn start(&self) -> Result<NaiveDate> {
        NaiveDate::parse_from_str(&self.start_date, "%Y-%m-%d")
            .map_err(|_| Error::Profile(format!("bad start_date `{}`", self.start_date)))
    }

    /// First device of each role.
    pub fn roster(&self) -> BTreeMap<Role, String> {
        let mut out = BTreeMap::new();
        for d in &self.devices {
            out.entry(d.role).or_insert_with(|| d.id.clone());
        }
        out
    }

    pub fn devices_with(&self, role: Role) -> impl Iterator<Item = &DeviceSpec> {
        self.devices.iter().filter(move |d| d.role == role)
    }

    pub fn has(&self, role: Role) -> bool {
        self.devices.iter().any(|d| d.role == role)
    }

    pub fn validate(&self) -> Result<()> {
        if self.devices.is_empty() {
            return Err(Error::Profile("roster is empty".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for d in &self.devices {
            if d.id.is_empty() || !seen.insert(d.id.as_str()) {
                return Err(Error::Profile(format!("device id `{}` is empty or repeated", d.id)));
            }
        }
        for r in &self.rules {
            if let Some(missing) = r.required_roles().iter().find(|&&role| !self.has(role)) {
                return Err(Error::Profile(format!("rule {r:?} needs a {missing:?} device")));
            }
        }
        if self.sample_minutes == 0 || 1440 % self.sample_minutes != 0 {
            return Err(Error::Profile("sample_minutes must divide a day".into()));
        }
        self.start()?;
        crate::clock::ZoneClock::parse(&self.timezone)?;
        let s = &self.schedule;
        let wake = minutes(&s.wake)?;
        let leave = minutes(&s.weekday_leave)?;
        let back = minutes(&s.weekday_return)?;
        let bed = minutes(&s.bedtime)?;
        let outing = minutes(&s.weekend_outing_start)?;
        for t in [&s.dusk, &s.evening_airing, &s.weekday_desk_start, &s.weekend_desk_start] {
            minutes(t)?;
        }
        let j = s.jitter_minutes as i64;
        let gap = 2 * j + 10;
        let airing_end = wake + s.airing_after_wake_minutes as i64 + s.airing_minutes as i64;
        if !(j <= wake && airing_end + gap <= leave && leave + gap <= back && back + gap <= bed && bed + j < 1440) {
            return Err(Error::Profile(
                "schedule must run wake, airing, leave, return, bedtime in order with room for jitter".into(),
            ));
        }
        if outing + s.weekend_outing_minutes as i64 + gap > bed || outing < wake + gap {
            return Err(Error::Profile("weekend outing must fall between wake and bedtime".into()));
        }
        for p in [s.weekend_outing_probability, s.evening_airing_probability] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Profile("probabilities must lie in [0, 1]".into()));
            }
        }
        if !(s.motion_mean_gap_minutes > 0.0) {
            return Err(Error::Profile("motion_mean_gap_minutes must be positive".into()));
        }
        Ok(())
    }
}

/// Minutes after midnight of an `HH:MM` string.
pub fn minutes(hhmm: &str) -> Result<i64> {
    let bad = || Error::Profile(format!("bad time of day `{hhmm}`"));
    let (h, m) = hhmm.split_once(':').ok_or_else(bad)?;
    let (h, m): (i64, i64) = (h.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?);
    if !(0..24).contains(&h) || !(0..60).contains(&m) {
        return Err(bad());
    }
    Ok(h * 60 + m)
}
