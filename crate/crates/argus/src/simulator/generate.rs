//! Discrete-event generation of benign home traces.
//!
//! Inhabitant activities (waking, leaving, airing, …) are scheduled per day
//! on a time-ordered queue. Applying an activity sets device states, and
//! every state change may fire automation rules, which enqueue further
//! changes after a short latency. Continuous sensors are sampled on a fixed
//! cadence from a small physical state (room temperature, humidity, sleep).

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use argus_core::trace::{DeviceDescriptor, DayClock, StateValue, StatusUpdate, Timestamp, Trace};
use chrono::{Datelike, NaiveTime, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use super::profile::{minutes, HomeProfile, Role, Rule};
use crate::clock::{day_number, ZoneClock};
use crate::Result;

const SEC: i64 = 1_000;
const MIN: i64 = 60 * SEC;

pub const HOME: &str = "home";
pub const AWAY: &str = "not_home";
pub const ON: &str = "on";
pub const OFF: &str = "off";
pub const LOCKED: &str = "locked";
pub const UNLOCKED: &str = "unlocked";
pub const HEAT: &str = "heat";
pub const ECO: &str = "eco";
pub const RECORDING: &str = "recording";
pub const IDLE: &str = "idle";

#[derive(Debug, Clone)]
enum Action {
    Set(Role, &'static str),
    Wake,
    Bed,
    Leave,
    Return,
    Dusk,
    Daylight,
    MotionTick,
    HeatingResume,
    Sample(Role),
}

struct Sim<'p> {
    profile: &'p HomeProfile,
    clock: ZoneClock,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Reverse<(i64, u64)>>,
    actions: BTreeMap<u64, Action>,
    seq: u64,
    state: BTreeMap<String, &'static str>,
    out: Vec<StatusUpdate>,
    home: bool,
    asleep: bool,
    dark: bool,
    window_open: bool,
    last_wake: i64,
    temperature: f64,
    end: i64,
}

impl<'p> Sim<'p> {
    fn at(&mut self, t: i64, action: Action) {
        if t < self.end {
            self.seq += 1;
            self.queue.push(Reverse((t, self.seq)));
            self.actions.insert(self.seq, action);
        }
    }

    fn rule(&self, r: Rule) -> bool {
        self.profile.rules.contains(&r)
    }

    fn set(&mut self, t: i64, role: Role, value: &'static str) {
        let ids: Vec<String> = self.profile.devices_with(role).map(|d| d.id.clone()).collect();
        let mut changed = false;
        for id in ids {
            if self.state.get(&id) != Some(&value) {
                self.state.insert(id.clone(), value);
                self.out.push(StatusUpdate::new(Timestamp(t), id, StateValue::label(value)));
                changed = true;
            }
        }
        if changed {
            self.on_change(t, role, value);
        }
    }

    fn role_state(&self, role: Role) -> Option<&'static str> {
        self.profile.devices_with(role).next().and_then(|d| self.state.get(&d.id).copied())
    }

    /// Automation reactions to a state change.
    fn on_change(&mut self, t: i64, role: Role, value: &'static str) {
        match (role, value) {
            (Role::Presence, AWAY) => {
                self.home = false;
                if self.rule(Rule::LockOnLeave) {
                    self.at(t + 10 * SEC, Action::Set(Role::Lock, LOCKED));
                }
                if self.rule(Rule::CameraWhenAbsent) {
                    self.at(t + 15 * SEC, Action::Set(Role::Camera, RECORDING));
                }
                if self.rule(Rule::LightsOffWhenAbsent) {
                    self.at(t + 20 * SEC, Action::Set(Role::AmbientLight, OFF));
                    self.at(t + 22 * SEC, Action::Set(Role::TaskLight, OFF));
                }
                if self.rule(Rule::HeatingEcoWhenAway) {
                    self.at(t + 25 * SEC, Action::HeatingResume);
                }
            }
            (Role::Presence, HOME) => {
                self.home = true;
                if self.rule(Rule::CameraWhenAbsent) {
                    self.at(t + 10 * SEC, Action::Set(Role::Camera, IDLE));
                }
                if self.rule(Rule::HeatingEcoWhenAway) {
                    self.at(t + 20 * SEC, Action::HeatingResume);
                }
            }
            (Role::Window, v) => {
                self.window_open = v == ON;
                if self.rule(Rule::HeatingOffWhenWindowOpen) {
                    self.at(t + 5 * SEC, Action::HeatingResume);
                }
            }
            _ => {}
        }
    }

    fn heating_mode(&self) -> &'static str {
        if self.window_open && self.rule(Rule::HeatingOffWhenWindowOpen) {
            OFF
        } else if (self.asleep && self.rule(Rule::HeatingEcoAtNight))
            || (!self.home && self.rule(Rule::HeatingEcoWhenAway))
        {
            ECO
        } else {
            HEAT
        }
    }

    fn jitter(&mut self, day_start: i64, hhmm: &str, spread_min: i64) -> Result<i64> {
        let base = minutes(hhmm)? * MIN;
        let j = if spread_min > 0 { self.rng.random_range(-spread_min * MIN..=spread_min * MIN) } else { 0 };
        Ok(day_start + base + j + self.rng.random_range(0..MIN))
    }

    fn plan_day(&mut self, day: i64) -> Result<()> {
        let s = self.profile.schedule.clone();
        let j = s.jitter_minutes as i64;
        let day_start = self.clock.instant_at(day, NaiveTime::MIN).0;
        let date = chrono::NaiveDate::from_ymd_opt(1970, 1, 1).unwrap() + chrono::Days::new(day as u64);
        let weekend = matches!(date.weekday(), Weekday::Sat | Weekday::Sun);

        let wake = self.jitter(day_start, &s.wake, j)?;
        let bed = self.jitter(day_start, &s.bedtime, j)?;
        self.at(wake, Action::Wake);
        self.at(bed, Action::Bed);
        let t = self.jitter(day_start, "08:00", 10)?;
        self.at(t, Action::Daylight);
        let t = self.jitter(day_start, &s.dusk, j)?;
        self.at(t, Action::Dusk);

        let airing = wake + s.airing_after_wake_minutes as i64 * MIN + self.rng.random_range(-3 * MIN..=3 * MIN);
        let airing_end = airing + s.airing_minutes as i64 * MIN + self.rng.random_range(-3 * MIN..=3 * MIN);
        self.at(airing, Action::Set(Role::Window, ON));
        self.at(airing_end, Action::Set(Role::Window, OFF));

        let desk_minutes = s.desk_session_minutes as i64 + self.rng.random_range(-20..=20);
        let (outing, desk) = if weekend {
            let outing = if self.rng.random_bool(s.weekend_outing_probability) {
                let start = self.jitter(day_start, &s.weekend_outing_start, 45)?;
                let len = (s.weekend_outing_minutes as i64 + self.rng.random_range(-30..=30)) * MIN;
                Some((start, start + len))
            } else {
                None
            };
            (outing, self.jitter(day_start, &s.weekend_desk_start, 30)?)
        } else {
            let leave = self.jitter(day_start, &s.weekday_leave, j)?.max(airing_end + 5 * MIN);
            let back = self.jitter(day_start, &s.weekday_return, j)?;
            (Some((leave, back)), self.jitter(day_start, &s.weekday_desk_start, 30)?)
        };
        if let Some((leave, back)) = outing {
            self.at(leave, Action::Leave);
            self.at(back, Action::Return);
        }
        let desk_end = (desk + desk_minutes * MIN).min(bed - 10 * MIN);
        if desk_end > desk + 10 * MIN {
            self.at(desk, Action::Set(Role::TaskLight, ON));
            self.at(desk_end, Action::Set(Role::TaskLight, OFF));
        }

        if self.rng.random_bool(s.evening_airing_probability) {
            let t = self.jitter(day_start, &s.evening_airing, 30)?;
            let len = (s.airing_minutes as i64 + self.rng.random_range(-3..=3)) * MIN;
            if outing.is_none_or(|(a, b)| t + len < a || t > b + 5 * MIN) {
                self.at(t, Action::Set(Role::Window, ON));
                self.at(t + len, Action::Set(Role::Window, OFF));
            }
        }
        Ok(())
    }

    fn apply(&mut self, t: i64, action: Action) {
        match action {
            Action::Set(role, value) => self.set(t, role, value),
            Action::Wake => {
                self.asleep = false;
                self.last_wake = t;
                if self.rule(Rule::HeatingEcoAtNight) {
                    self.at(t + MIN, Action::HeatingResume);
                }
                if self.dark {
                    self.at(t + 2 * MIN, Action::Set(Role::AmbientLight, ON));
                }
                self.at(t + MIN + 10 * SEC, Action::MotionTick);
            }
            Action::Bed => {
                self.at(t + 5 * SEC, Action::Set(Role::TaskLight, OFF));
                self.at(t + MIN, Action::Set(Role::Lock, LOCKED));
                let lights_off = if self.rule(Rule::LightsOffAtNight) { 3 * MIN } else { 2 * MIN };
                self.at(t + lights_off, Action::Set(Role::AmbientLight, OFF));
                self.asleep = true;
                if self.rule(Rule::HeatingEcoAtNight) {
                    self.at(t + 4 * MIN, Action::HeatingResume);
                }
            }
            Action::Leave => {
                self.set(t, Role::Lock, UNLOCKED);
                self.at(t + 30 * SEC, Action::Set(Role::Door, ON));
                self.at(t + 50 * SEC, Action::Set(Role::Door, OFF));
                self.at(t + 70 * SEC, Action::Set(Role::Presence, AWAY));
                if !self.rule(Rule::LightsOffWhenAbsent) {
                    self.at(t + 5 * SEC, Action::Set(Role::AmbientLight, OFF));
                }
            }
            Action::Return => {
                self.set(t, Role::Lock, UNLOCKED);
                self.at(t + 15 * SEC, Action::Set(Role::Door, ON));
                self.at(t + 35 * SEC, Action::Set(Role::Door, OFF));
                self.at(t + 50 * SEC, Action::Set(Role::Presence, HOME));
                if self.dark {
                    self.at(t + 2 * MIN, Action::Set(Role::AmbientLight, ON));
                }
                self.at(t + 90 * SEC, Action::MotionTick);
            }
            Action::Dusk => {
                self.dark = true;
                if self.home && !self.asleep {
                    self.set(t, Role::AmbientLight, ON);
                }
            }
            Action::Daylight => {
                self.dark = false;
                if self.home {
                    self.set(t, Role::AmbientLight, OFF);
                }
            }
            Action::MotionTick => {
                // one live chain per waking/return; stale chains die out here
                if self.home && !self.asleep && self.role_state(Role::Motion) != Some(ON) {
                    self.set(t, Role::Motion, ON);
                    self.at(t + 90 * SEC, Action::Set(Role::Motion, OFF));
                    let mean = self.profile.schedule.motion_mean_gap_minutes * MIN as f64;
                    let gap = Exp::new(1.0 / mean).expect("positive rate").sample(&mut self.rng) as i64;
                    self.at(t + gap.max(3 * MIN), Action::MotionTick);
                }
            }
            Action::HeatingResume => {
                let mode = self.heating_mode();
                self.set(t, Role::Thermostat, mode);
            }
            Action::Sample(role) => self.sample(t, role),
        }
    }

    fn sample(&mut self, t: i64, role: Role) {
        let noise = |rng: &mut ChaCha8Rng, sd: f64| Normal::new(0.0, sd).expect("finite").sample(rng);
        let value = match role {
            Role::Temperature => {
                let (target, rate) = if self.window_open {
                    (8.0, 0.25)
                } else {
                    let target = match self.role_state(Role::Thermostat) {
                        Some(HEAT) | None => 21.0,
                        Some(ECO) => 18.0,
                        _ => 16.5,
                    };
                    (target, 0.12)
                };
                self.temperature += rate * (target - self.temperature) + noise(&mut self.rng, 0.05);
                round_to(self.temperature, 10.0)
            }
            Role::Humidity => {
                let hours = (t - self.last_wake) as f64 / 3.6e6;
                let tod = self.clock.time_of_day(Timestamp(t));
                let diurnal = 4.0 * (std::f64::consts::TAU * (tod as f64 / 8.64e7 - 0.375)).sin();
                let shower = if (0.15..0.7).contains(&hours) {
                    12.0
                } else if hours >= 0.7 {
                    12.0 * (-(hours - 0.7) * 2.0).exp()
                } else {
                    0.0
                };
                let airing = if self.window_open { -6.0 } else { 0.0 };
                round_to(45.0 + diurnal + shower + airing + noise(&mut self.rng, 0.5), 10.0)
            }
            Role::SleepConfidence => {
                let since_wake = t - self.last_wake;
                let mean = if self.asleep {
                    90.0
                } else if since_wake < 15 * MIN {
                    45.0
                } else {
                    5.0
                };
                (mean + noise(&mut self.rng, 3.0)).clamp(0.0, 100.0).round()
            }
            _ => return,
        };
        for d in self.profile.devices_with(role) {
            self.out.push(StatusUpdate::new(Timestamp(t), d.id.clone(), StateValue::Number(value)));
        }
    }
}

fn round_to(v: f64, per_unit: f64) -> f64 {
    (v * per_unit).round() / per_unit
}

/// Generates `days` calendar days of benign behavior, all labels 0.
pub fn generate_home(profile: &HomeProfile, days: u32) -> Result<Trace> {
    profile.validate()?;
    if days == 0 {
        return Err(crate::Error::Profile("days must be at least 1".into()));
    }
    let clock = ZoneClock::parse(&profile.timezone)?;
    let day0 = day_number(profile.start()?);
    let start = clock.instant_at(day0, NaiveTime::MIN).0;
    let end = clock.instant_at(day0 + days as i64, NaiveTime::MIN).0;

    let mut sim = Sim {
        profile,
        clock,
        rng: ChaCha8Rng::seed_from_u64(profile.seed),
        queue: BinaryHeap::new(),
        actions: BTreeMap::new(),
        seq: 0,
        state: BTreeMap::new(),
        out: Vec::new(),
        home: true,
        asleep: true,
        dark: true,
        window_open: false,
        last_wake: start - 12 * 3_600_000,
        temperature: 18.0,
        end,
    };

    let initial = [
        (Role::Presence, HOME),
        (Role::Motion, OFF),
        (Role::Door, OFF),
        (Role::Lock, LOCKED),
        (Role::Window, OFF),
        (Role::AmbientLight, OFF),
        (Role::TaskLight, OFF),
        (Role::Thermostat, if profile.rules.contains(&Rule::HeatingEcoAtNight) { ECO } else { HEAT }),
        (Role::Camera, IDLE),
    ];
    for (i, (role, value)) in initial.into_iter().enumerate() {
        sim.at(start + i as i64, Action::Set(role, value));
    }
    for d in 0..days as i64 {
        sim.plan_day(day0 + d)?;
    }
    let cadence = profile.sample_minutes as i64 * MIN;
    let continuous = [Role::Temperature, Role::Humidity, Role::SleepConfidence];
    let mut t = start;
    while t < end {
        for (k, role) in continuous.iter().enumerate() {
            if profile.has(*role) {
                sim.at(t + 100 + 17 * SEC * k as i64, Action::Sample(*role));
            }
        }
        t += cadence;
    }

    while let Some(Reverse((t, seq))) = sim.queue.pop() {
        let action = sim.actions.remove(&seq).expect("queued action");
        sim.apply(t, action);
    }

    let devices = profile.devices.iter().map(|d| DeviceDescriptor::new(d.id.clone(), d.role.kind())).collect();
    let trace = Trace::from_unsorted(profile.timezone.clone(), devices, sim.out, None)?;
    let n = trace.len();
    Ok(Trace { labels: Some(vec![false; n]), ..trace }.normalized())
}
