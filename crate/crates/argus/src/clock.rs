//! Local calendar days for named and fixed-offset timezones.

use argus_core::trace::{DayClock, FixedOffsetClock, Timestamp};
use chrono::{DateTime, NaiveDate, NaiveTime, Offset, TimeZone, Utc};
use chrono_tz::Tz;

use crate::{Error, Result};

const MS_PER_DAY: i64 = 86_400_000;

/// Day bucketing for a trace's timezone string: `UTC`, a fixed offset such as
/// `+01:00`, or an IANA zone name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZoneClock {
    Fixed(FixedOffsetClock),
    Named(Tz),
}

impl ZoneClock {
    pub fn parse(tz: &str) -> Result<Self> {
        if tz.eq_ignore_ascii_case("utc") || tz == "Z" {
            return Ok(Self::Fixed(FixedOffsetClock::UTC));
        }
        if let Some(offset) = parse_offset(tz) {
            return Ok(Self::Fixed(FixedOffsetClock::new(offset)));
        }
        tz.parse::<Tz>().map(Self::Named).map_err(|_| Error::Timezone(tz.to_owned()))
    }

    fn offset_secs(&self, t: Timestamp) -> i64 {
        match self {
            Self::Fixed(c) => i64::from(c.offset_secs),
            Self::Named(tz) => {
                let utc = utc_of(t);
                i64::from(tz.offset_from_utc_datetime(&utc.naive_utc()).fix().local_minus_utc())
            }
        }
    }

    /// Instant of local wall-clock `time` on local day `day`. Nonexistent
    /// local times (spring-forward gaps) resolve to the later offset.
    pub fn instant_at(&self, day: i64, time: NaiveTime) -> Timestamp {
        let date = epoch_date() + chrono::Days::new(day as u64);
        let naive = date.and_time(time);
        match self {
            Self::Fixed(c) => Timestamp(naive.and_utc().timestamp_millis() - i64::from(c.offset_secs) * 1000),
            Self::Named(tz) => {
                let local = tz
                    .from_local_datetime(&naive)
                    .earliest()
                    .or_else(|| tz.from_local_datetime(&(naive + chrono::Duration::hours(1))).earliest())
                    .expect("a valid local time within one hour");
                Timestamp(local.timestamp_millis())
            }
        }
    }
}

impl DayClock for ZoneClock {
    fn day_of(&self, t: Timestamp) -> i64 {
        (t.0 + self.offset_secs(t) * 1000).div_euclid(MS_PER_DAY)
    }

    fn time_of_day(&self, t: Timestamp) -> i64 {
        (t.0 + self.offset_secs(t) * 1000).rem_euclid(MS_PER_DAY)
    }
}

fn epoch_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date")
}

pub fn utc_of(t: Timestamp) -> DateTime<Utc> {
    DateTime::from_timestamp_millis(t.0).unwrap_or_default()
}

/// Day number (days since 1970-01-01) of a calendar date.
pub fn day_number(date: NaiveDate) -> i64 {
    (date - epoch_date()).num_days()
}

fn parse_offset(s: &str) -> Option<i32> {
    let (sign, rest) = match s.as_bytes().first()? {
        b'+' => (1, &s[1..]),
        b'-' => (-1, &s[1..]),
        _ => return None,
    };
    let (h, m) = rest.split_once(':').unwrap_or((rest, "0"));
    let h: i32 = h.parse().ok()?;
    let m: i32 = m.parse().ok()?;
    (h <= 18 && m < 60).then_some(sign * (h * 3600 + m * 60))
}
