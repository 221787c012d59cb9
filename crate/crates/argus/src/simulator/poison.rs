//! Training-set poisoning with attack events.

use argus_core::trace::{StateValue, StatusUpdate, Timestamp, Trace};

use super::attack::insert_updates;
use super::generate::{OFF, ON};
use crate::{Error, Result};

/// Number of pool events to add so that they make up `fraction` of the
/// result: `k / (n + k) = fraction`, rounded.
pub fn poison_count(n: usize, fraction: f64) -> usize {
    if fraction <= 0.0 {
        return 0;
    }
    (fraction * n as f64 / (1.0 - fraction)).round() as usize
}

/// Interleaves the first `poison_count` pool events into `train`.
pub fn poison_training(train: &Trace, pool: &[StatusUpdate], fraction: f64) -> Result<Trace> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Invalid(format!("poison fraction {fraction} outside [0, 1)")));
    }
    let k = poison_count(train.len(), fraction);
    if k == 0 {
        return Ok(train.clone());
    }
    if k > pool.len() {
        return Err(Error::Invalid(format!("fraction {fraction} needs {k} attack events, pool has {}", pool.len())));
    }
    for u in &pool[..k] {
        if train.device(&u.device_id).is_none() {
            return Err(Error::Core(argus_core::Error::UnknownDevice(u.device_id.clone())));
        }
    }
    Ok(insert_updates(train, pool[..k].to_vec()))
}

/// Flicker bursts of `burst` toggles on `light`, spread evenly over `[start,
/// end)` and spaced `period_ms` apart within a burst. Bursts start from `on`
/// and end on `off`, so `burst` is rounded up to even.
pub fn flicker_pool(
    light: &str,
    start: Timestamp,
    end: Timestamp,
    bursts: usize,
    burst: usize,
    period_ms: i64,
) -> Vec<StatusUpdate> {
    let burst = burst + burst % 2;
    let span = (end.0 - start.0).max(0);
    let step = span / (bursts as i64 + 1);
    (0..bursts)
        .flat_map(|b| {
            let t0 = start.0 + step * (b as i64 + 1);
            (0..burst).map(move |k| {
                let state = if k % 2 == 0 { ON } else { OFF };
                StatusUpdate::new(Timestamp(t0 + k as i64 * period_ms), light, StateValue::label(state))
                    .injected("light-flickering")
            })
        })
        .collect()
}
