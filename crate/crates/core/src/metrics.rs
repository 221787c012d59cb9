//! Confusion counts and the derived detection metrics.
//!
//! A metric whose denominator is zero is undefined and reported as `None`
//! (serialized as `"NA"`), never coerced to zero.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, predicted_attack: bool, is_attack: bool) {
        match (predicted_attack, is_attack) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(with = "na")]
    pub fpr: Option<f64>,
    #[serde(with = "na")]
    pub precision: Option<f64>,
    #[serde(with = "na")]
    pub recall: Option<f64>,
    #[serde(with = "na")]
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute_metrics(c: &ConfusionCounts) -> Metrics {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Metrics { fpr: ratio(c.fp, c.fp + c.tn), precision, recall, f1 }
}

/// F1 in its count form, `TP / (TP + (FP + FN)/2)`.
pub fn f1_from_counts(c: &ConfusionCounts) -> Option<f64> {
    let den = c.tp as f64 + (c.fp + c.fn_) as f64 / 2.0;
    (c.tp > 0).then(|| c.tp as f64 / den)
}

/// Which events enter the confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum LabelPolicy {
    /// Every event, labels as given.
    Strict,
    /// Benign events whose scoring window (the event and its `window - 1`
    /// predecessors) contains an attack event are left out.
    MaskAttackWindows { window: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBreakdown {
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    /// Events excluded by the label policy.
    pub masked: u64,
    /// Attack events of each scenario tag against all scored benign events.
    pub per_scenario: BTreeMap<String, ScenarioBreakdown>,
}

/// Joins predictions with ground truth positionally.
pub fn evaluate_predictions(
    predicted: &[bool],
    labels: &[bool],
    scenarios: &[Option<&str>],
    policy: LabelPolicy,
) -> Result<Evaluation> {
    if predicted.len() != labels.len() {
        return Err(Error::LabelMismatch { labels: labels.len(), events: predicted.len() });
    }
    let masked_at = attack_window_mask(labels, policy);
    let mut counts = ConfusionCounts::default();
    let mut masked = 0;
    let mut attacks: BTreeMap<&str, ConfusionCounts> = BTreeMap::new();
    for i in 0..labels.len() {
        if masked_at[i] {
            masked += 1;
            continue;
        }
        counts.record(predicted[i], labels[i]);
        if labels[i] {
            if let Some(Some(tag)) = scenarios.get(i) {
                attacks.entry(tag).or_default().record(predicted[i], true);
            }
        }
    }
    let per_scenario = attacks
        .into_iter()
        .map(|(tag, mut c)| {
            c.fp = counts.fp;
            c.tn = counts.tn;
            (String::from(tag), ScenarioBreakdown { counts: c, metrics: compute_metrics(&c) })
        })
        .collect();
    Ok(Evaluation { counts, metrics: compute_metrics(&counts), masked, per_scenario })
}

fn attack_window_mask(labels: &[bool], policy: LabelPolicy) -> Vec<bool> {
    let LabelPolicy::MaskAttackWindows { window } = policy else {
        return alloc::vec![false; labels.len()];
    };
    let mut last_attack: Option<usize> = None;
    labels
        .iter()
        .enumerate()
        .map(|(i, &is_attack)| {
            if is_attack {
                last_attack = Some(i);
                return false;
            }
            matches!(last_attack, Some(j) if i - j < window)
        })
        .collect()
}

/// Serde adapter writing `None` as the literal `"NA"`.
pub mod na {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    pub const MARKER: &str = "NA";

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_str(MARKER),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Option<f64>;
            fn expecting(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
                f.write_str("a number or \"NA\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Ok(Some(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(Some(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(Some(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                if v == MARKER {
                    Ok(None)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}
