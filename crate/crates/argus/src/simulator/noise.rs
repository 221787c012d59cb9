//! Gaussian state perturbation.
//!
//! Every update of the target device receives one noise draw, the mean of
//! `samples_per_draw` samples from `Normal(mu, sigma)`. By default the draw
//! rides along as the update's perturbation and is added to the mapped value
//! during preprocessing, unclamped. `Domain::Raw` instead adds it to the raw
//! reading of a continuous device.

use argus_core::trace::{DeviceKind, StateValue, Trace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    #[default]
    Mapped,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub mu: f64,
    /// Zero gives the degenerate draw `mu`.
    pub sigma: f64,
    pub samples_per_draw: usize,
    pub device: String,
    pub seed: u64,
    #[serde(default)]
    pub domain: Domain,
}

impl NoiseConfig {
    pub fn new(device: impl Into<String>, sigma: f64, seed: u64) -> Self {
        Self { mu: 1.0, sigma, samples_per_draw: 100, device: device.into(), seed, domain: Domain::Mapped }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite() && self.mu.is_finite()) {
            return Err(Error::Invalid("noise needs finite mu and sigma >= 0".into()));
        }
        if self.samples_per_draw == 0 {
            return Err(Error::Invalid("samples_per_draw must be positive".into()));
        }
        Ok(())
    }
}

/// Seeded stream of noise draws.
pub struct NoiseSource {
    rng: ChaCha8Rng,
    normal: Normal<f64>,
    samples: usize,
}

impl NoiseSource {
    pub fn new(cfg: &NoiseConfig) -> Result<Self> {
        cfg.validate()?;
        let normal = Normal::new(cfg.mu, cfg.sigma).map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(Self { rng: ChaCha8Rng::seed_from_u64(cfg.seed), normal, samples: cfg.samples_per_draw })
    }

    pub fn draw(&mut self) -> f64 {
        let sum: f64 = (0..self.samples).map(|_| self.normal.sample(&mut self.rng)).sum();
        sum / self.samples as f64
    }
}

pub fn inject_noise(trace: &Trace, cfg: &NoiseConfig) -> Result<Trace> {
    let kind = trace
        .device(&cfg.device)
        .ok_or_else(|| Error::Core(argus_core::Error::UnknownDevice(cfg.device.clone())))?
        .kind;
    if cfg.domain == Domain::Raw && kind != DeviceKind::Continuous {
        return Err(Error::Invalid(format!("raw-domain noise needs a continuous device, `{}` is nominal", cfg.device)));
    }
    let mut source = NoiseSource::new(cfg)?;
    let mut out = trace.clone();
    for u in out.updates.iter_mut().filter(|u| u.device_id == cfg.device) {
        let noise = source.draw();
        match cfg.domain {
            Domain::Mapped => u.perturbation = Some(u.perturbation.unwrap_or(0.0) + noise),
            Domain::Raw => {
                if let StateValue::Number(v) = u.state {
                    u.state = StateValue::Number(v + noise);
                }
            }
        }
    }
    Ok(out)
}
