//! Line-delimited JSON trace files and the Home Assistant history adapter.
//!
//! A trace file holds one record per line: an optional `meta` record, one
//! `device` record per device and one `update` record per status update.
//! Writing emits them in that order; reading accepts any order and sorts
//! updates stably by time.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use argus_core::trace::{DeviceDescriptor, DeviceKind, Origin, StateValue, StatusUpdate, Timestamp, Trace};
use chrono::{DateTime, SecondsFormat};
use serde::{Deserialize, Serialize};

use crate::clock::utc_of;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "rec", rename_all = "lowercase", deny_unknown_fields)]
enum Record {
    Meta {
        tz: String,
        version: u32,
        /// Seed that produced the trace, when generated.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Device {
        id: String,
        kind: DeviceKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Update(UpdateRecord),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UpdateRecord {
    t: String,
    id: String,
    state: Option<RawState>,
    #[serde(default)]
    origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    perturb: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawState {
    Number(f64),
    Label(String),
}

pub fn format_time(t: Timestamp) -> String {
    utc_of(t).to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn parse_time(s: &str) -> Option<Timestamp> {
    DateTime::parse_from_rfc3339(s).ok().map(|d| Timestamp(d.timestamp_millis()))
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Reads a trace. Errors name the offending 1-based line.
pub fn parse_trace(input: impl BufRead) -> Result<Trace> {
    let mut tz = None;
    let mut devices: Vec<DeviceDescriptor> = Vec::new();
    let mut updates = Vec::new();
    let mut labels = Vec::new();
    let mut update_lines = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let n = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| parse_err(n, e.to_string()))?;
        match rec {
            Record::Meta { tz: zone, version, .. } => {
                if version != FORMAT_VERSION {
                    return Err(parse_err(n, format!("unsupported format version {version}")));
                }
                if tz.replace(zone).is_some() {
                    return Err(parse_err(n, "duplicate meta record"));
                }
            }
            Record::Device { id, kind, name } => {
                if devices.iter().any(|d| d.id == id) {
                    return Err(parse_err(n, format!("duplicate device `{id}`")));
                }
                devices.push(DeviceDescriptor { id, kind, display_name: name });
            }
            Record::Update(u) => {
                let timestamp = parse_time(&u.t).ok_or_else(|| parse_err(n, format!("bad timestamp `{}`", u.t)))?;
                let state = match u.state {
                    Some(RawState::Number(v)) => StateValue::Number(v),
                    Some(RawState::Label(l)) => StateValue::Label(l),
                    None => StateValue::Missing,
                };
                labels.push(match u.label {
                    None => None,
                    Some(0) => Some(false),
                    Some(1) => Some(true),
                    Some(x) => return Err(parse_err(n, format!("label must be 0 or 1, got {x}"))),
                });
                updates.push(StatusUpdate {
                    timestamp,
                    device_id: u.id,
                    state,
                    origin: u.origin,
                    scenario: u.scenario,
                    perturbation: u.perturb,
                });
                update_lines.push(n);
            }
        }
    }

    for (u, &n) in updates.iter().zip(&update_lines) {
        let Some(d) = devices.iter().find(|d| d.id == u.device_id) else {
            return Err(parse_err(n, format!("unknown device `{}`", u.device_id)));
        };
        if !u.state.fits(d.kind) {
            return Err(parse_err(n, format!("device `{}` expects a {} state", d.id, d.kind.name())));
        }
    }
    let labels = match labels.iter().filter(|l| l.is_some()).count() {
        0 => None,
        k if k == labels.len() => Some(labels.into_iter().map(|l| l.unwrap_or(false)).collect()),
        _ => {
            let n = labels.iter().zip(&update_lines).find(|(l, _)| l.is_none()).map_or(0, |(_, &n)| n);
            return Err(parse_err(n, "labels must be given on every update or on none"));
        }
    };
    Ok(Trace::from_unsorted(tz.unwrap_or_else(|| "UTC".into()), devices, updates, labels)?)
}

pub fn parse_trace_str(s: &str) -> Result<Trace> {
    parse_trace(s.as_bytes())
}

pub fn write_trace(trace: &Trace, out: impl Write) -> Result<()> {
    write_trace_seeded(trace, None, out)
}

/// Like [`write_trace`], recording `seed` in the meta record.
pub fn write_trace_seeded(trace: &Trace, seed: Option<u64>, mut out: impl Write) -> Result<()> {
    let meta = Record::Meta { tz: trace.timezone.clone(), version: FORMAT_VERSION, seed };
    writeln!(out, "{}", serde_json::to_string(&meta)?)?;
    for d in &trace.devices {
        let rec = Record::Device { id: d.id.clone(), kind: d.kind, name: d.display_name.clone() };
        writeln!(out, "{}", serde_json::to_string(&rec)?)?;
    }
    for (i, u) in trace.updates.iter().enumerate() {
        let rec = Record::Update(UpdateRecord {
            t: format_time(u.timestamp),
            id: u.device_id.clone(),
            state: match &u.state {
                StateValue::Number(v) => Some(RawState::Number(*v)),
                StateValue::Label(l) => Some(RawState::Label(l.clone())),
                StateValue::Missing => None,
            },
            origin: u.origin,
            label: trace.label(i).map(u8::from),
            scenario: u.scenario.clone(),
            perturb: u.perturbation,
        });
        writeln!(out, "{}", serde_json::to_string(&rec)?)?;
    }
    Ok(())
}

pub fn trace_to_string(trace: &Trace) -> String {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

/// Reads a trace file from disk.
pub fn read_trace_file(path: &std::path::Path) -> Result<Trace> {
    let f = std::fs::File::open(path)?;
    parse_trace(std::io::BufReader::new(f))
}

pub fn write_trace_file(trace: &Trace, seed: Option<u64>, path: &std::path::Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_trace_seeded(trace, seed, &mut w)?;
    w.flush()?;
    Ok(())
}

/// How raw Home Assistant history rows become status updates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HaMapping {
    /// Timezone recorded in the resulting trace.
    pub timezone: String,
    /// Forced device kinds. Other entities are continuous when every
    /// non-missing state parses as a number.
    #[serde(default)]
    pub kinds: BTreeMap<String, DeviceKind>,
    /// Entities to drop.
    #[serde(default)]
    pub exclude: Vec<String>,
}

const HA_MISSING: [&str; 3] = ["unavailable", "unknown", ""];

/// Imports a Home Assistant history export with columns
/// `entity_id,state,last_changed`.
pub fn import_home_assistant(input: impl std::io::Read, mapping: &HaMapping) -> Result<Trace> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| parse_err(1, format!("missing column `{name}`")))
    };
    let (c_id, c_state, c_time) = (col("entity_id")?, col("state")?, col("last_changed")?);

    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let id = rec.get(c_id).unwrap_or("").trim().to_owned();
        if id.is_empty() || mapping.exclude.contains(&id) {
            continue;
        }
        let raw = rec.get(c_state).unwrap_or("").trim().to_owned();
        let t = rec.get(c_time).unwrap_or("");
        let t = parse_time(t.trim()).ok_or_else(|| parse_err(line, format!("bad timestamp `{t}`")))?;
        rows.push((t, id, raw));
    }

    let mut kinds: BTreeMap<String, DeviceKind> = BTreeMap::new();
    for (_, id, raw) in &rows {
        let numeric = HA_MISSING.contains(&raw.as_str()) || raw.parse::<f64>().is_ok_and(f64::is_finite);
        let entry = kinds.entry(id.clone()).or_insert(DeviceKind::Continuous);
        if !numeric {
            *entry = DeviceKind::Nominal;
        }
    }
    for (id, k) in &mapping.kinds {
        if let Some(entry) = kinds.get_mut(id) {
            *entry = *k;
        }
    }

    let devices = kinds.iter().map(|(id, &k)| DeviceDescriptor::new(id.clone(), k)).collect();
    let updates = rows
        .into_iter()
        .map(|(t, id, raw)| {
            let state = if HA_MISSING.contains(&raw.as_str()) {
                StateValue::Missing
            } else {
                match kinds[&id] {
                    DeviceKind::Continuous => raw.parse().map(StateValue::Number).unwrap_or(StateValue::Missing),
                    DeviceKind::Nominal => StateValue::Label(raw),
                }
            };
            StatusUpdate::new(t, id, state)
        })
        .collect();
    let tz = if mapping.timezone.is_empty() { "UTC".to_owned() } else { mapping.timezone.clone() };
    Ok(Trace::from_unsorted(tz, devices, updates, None)?)
}

/// Serde adapter storing a [`Timestamp`] as an RFC 3339 string.
pub mod serde_time {
    use argus_core::trace::Timestamp;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_time(*t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_time(&s).ok_or_else(|| D::Error::custom(format!("bad timestamp `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"rec":"meta","tz":"Europe/Berlin","version":1}
{"rec":"device","id":"light.desk","kind":"nominal"}
{"rec":"device","id":"sensor.temp","kind":"continuous"}
{"rec":"update","t":"2024-01-01T08:00:00.000Z","id":"sensor.temp","state":21.5,"origin":"observed","label":0}
{"rec":"update","t":"2024-01-01T08:00:01.250Z","id":"light.desk","state":"on","origin":"injected","label":1,"scenario":"night-light"}
{"rec":"update","t":"2024-01-01T08:00:02.000Z","id":"sensor.temp","state":null,"origin":"observed","label":0,"perturb":0.25}
"#;

    #[test]
    fn parses_and_rewrites_identically() {
        let t = parse_trace_str(SAMPLE).unwrap();
        assert_eq!(t.timezone, "Europe/Berlin");
        assert_eq!(t.devices.len(), 2);
        assert_eq!(t.labels, Some(vec![false, true, false]));
        assert_eq!(t.updates[1].origin, Origin::Injected);
        assert_eq!(t.updates[1].timestamp.0 % 1000, 250);
        assert_eq!(t.updates[2].state, StateValue::Missing);
        assert_eq!(t.updates[2].perturbation, Some(0.25));
        assert_eq!(trace_to_string(&t), SAMPLE);
    }

    #[test]
    fn devices_only() {
        let s = "{\"rec\":\"device\",\"id\":\"a\",\"kind\":\"nominal\"}\n{\"rec\":\"device\",\"id\":\"b\",\"kind\":\"continuous\"}\n";
        let t = parse_trace_str(s).unwrap();
        assert_eq!((t.devices.len(), t.updates.len(), t.labels.clone()), (2, 0, None));
        let again = parse_trace_str(&trace_to_string(&t)).unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn sorts_stably() {
        let s = r#"{"rec":"device","id":"a","kind":"nominal"}
{"rec":"update","t":"2024-01-01T00:00:03.000Z","id":"a","state":"x"}
{"rec":"update","t":"2024-01-01T00:00:01.000Z","id":"a","state":"y"}
{"rec":"update","t":"2024-01-01T00:00:01.000Z","id":"a","state":"z"}
"#;
        let t = parse_trace_str(s).unwrap();
        let states: Vec<_> = t.updates.iter().map(|u| u.state.as_label().unwrap()).collect();
        assert_eq!(states, ["y", "z", "x"]);
    }

    #[test]
    fn errors_name_the_line() {
        let bad_json = "{\"rec\":\"device\",\"id\":\"a\",\"kind\":\"nominal\"}\n{oops\n";
        assert!(matches!(parse_trace_str(bad_json), Err(Error::Parse { line: 2, .. })));
        let unknown = "{\"rec\":\"update\",\"t\":\"2024-01-01T00:00:00Z\",\"id\":\"x\",\"state\":1}\n";
        assert!(matches!(parse_trace_str(unknown), Err(Error::Parse { line: 1, .. })));
        let kind = "{\"rec\":\"device\",\"id\":\"a\",\"kind\":\"nominal\"}\n{\"rec\":\"update\",\"t\":\"2024-01-01T00:00:00Z\",\"id\":\"a\",\"state\":3.5}\n";
        assert!(matches!(parse_trace_str(kind), Err(Error::Parse { line: 2, .. })));
        let mixed = "{\"rec\":\"device\",\"id\":\"a\",\"kind\":\"nominal\"}\n{\"rec\":\"update\",\"t\":\"2024-01-01T00:00:00Z\",\"id\":\"a\",\"state\":\"on\",\"label\":1}\n{\"rec\":\"update\",\"t\":\"2024-01-01T00:00:01Z\",\"id\":\"a\",\"state\":\"on\"}\n";
        assert!(matches!(parse_trace_str(mixed), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn home_assistant_import() {
        let csv = "entity_id,state,last_changed\n\
                   sensor.temp,21.5,2024-01-01T08:00:00+00:00\n\
                   light.desk,on,2024-01-01T07:59:00+00:00\n\
                   sensor.temp,unavailable,2024-01-01T08:05:00+00:00\n\
                   light.desk,off,2024-01-01T09:00:00+00:00\n";
        let t = import_home_assistant(csv.as_bytes(), &HaMapping::default()).unwrap();
        assert_eq!(t.device("sensor.temp").unwrap().kind, DeviceKind::Continuous);
        assert_eq!(t.device("light.desk").unwrap().kind, DeviceKind::Nominal);
        assert_eq!(t.updates[0].device_id, "light.desk");
        assert_eq!(t.updates[2].state, StateValue::Missing);
        assert!(t.validate().is_empty());
    }
}
