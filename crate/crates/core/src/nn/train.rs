//! Mini-batch training with milestone learning-rate decay and early stopping.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::autoencoder::{loss_and_grad, Architecture, AutoencoderModel, TrainingMeta, Variant};
use super::rng::{seeded, shuffle};
use crate::preprocess::WindowBatch;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub adam: AdamConfig,
    pub lr_start: f64,
    pub lr_floor: f64,
    pub lr_decay_factor: f64,
    /// Epochs at which the learning rate is multiplied by `lr_decay_factor`.
    pub lr_milestones: Vec<usize>,
    pub dropout: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub early_stop_patience: usize,
    /// Relative improvement of the monitored loss needed to reset patience.
    #[serde(default)]
    pub min_delta: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl TrainConfig {
    /// Full-size profile: GRU 256/64 autoencoder, up to 35 000 epochs.
    pub fn full() -> Self {
        Self {
            variant: Variant::Recurrent,
            encoder_hidden: vec![256, 64],
            decoder_hidden: vec![64, 256],
            adam: AdamConfig::default(),
            lr_start: 1e-3,
            lr_floor: 1e-6,
            lr_decay_factor: 0.1,
            lr_milestones: vec![5_000, 15_000, 25_000],
            dropout: 0.3,
            max_epochs: 35_000,
            batch_size: 64,
            early_stop_patience: 50,
            min_delta: 0.0,
            validation_fraction: 0.1,
            seed: 0,
        }
    }

    /// Reduced profile for CI and laptops: GRU 32/8, up to 2000 epochs.
    pub fn desk() -> Self {
        Self {
            encoder_hidden: vec![32, 8],
            decoder_hidden: vec![8, 32],
            lr_milestones: vec![300, 700, 1_200],
            max_epochs: 2_000,
            early_stop_patience: 40,
            min_delta: 1e-3,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr_floor > 0.0 && self.lr_start >= self.lr_floor) {
            return Err(Error::InvalidArgument("need lr_start >= lr_floor > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument("dropout must lie in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument("validation_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let passed = self.lr_milestones.iter().filter(|&&m| epoch >= m).count();
        let lr = self.lr_start * libm::pow(self.lr_decay_factor, passed as f64);
        lr.max(self.lr_floor)
    }

    pub fn architecture(&self, n_devices: usize, window_len: usize) -> Architecture {
        Architecture {
            variant: self.variant,
            n_devices,
            window_len,
            encoder_hidden: self.encoder_hidden.clone(),
            decoder_hidden: self.decoder_hidden.clone(),
            dropout: self.dropout,
        }
    }

    /// Number of trailing windows held out for validation.
    pub fn validation_count(&self, n_windows: usize) -> usize {
        let n_val = (n_windows as f64 * self.validation_fraction) as usize;
        if n_val >= n_windows {
            0
        } else {
            n_val
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    /// Per-epoch validation loss; empty when no windows were held out.
    pub val_loss: Vec<f64>,
    pub stop_reason: StopReason,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub wall_time_ms: Option<u64>,
}

/// Trains on the leading windows and validates on the trailing
/// `validation_fraction` (chronological split). Returns the parameters with
/// the best monitored loss: validation when held out, training otherwise.
pub fn train_autoencoder(windows: &WindowBatch, config: &TrainConfig) -> Result<(AutoencoderModel, TrainReport)> {
    train_with_progress(windows, config, &mut |_, _, _| {})
}

/// As [`train_autoencoder`], calling `progress(epoch, train_loss, val_loss)`
/// after every epoch.
pub fn train_with_progress(
    windows: &WindowBatch,
    config: &TrainConfig,
    progress: &mut dyn FnMut(usize, f64, Option<f64>),
) -> Result<(AutoencoderModel, TrainReport)> {
    config.validate()?;
    if windows.is_empty() {
        return Err(Error::NoWindows);
    }
    let arch = config.architecture(windows.n_devices, windows.l);
    let mut model = AutoencoderModel::init(arch, config.seed)?;
    let n_val = config.validation_count(windows.len());
    let n_train = windows.len() - n_val;
    let (train, val) = windows.windows.split_at(n_train);

    let mut rng = seeded(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adam = Adam::new(config.adam, model.params.len());
    let mut grad = vec![0.0; model.params.len()];
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut best = (f64::INFINITY, 0usize, model.params.clone());
    let mut stale = 0;
    let mut report = TrainReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        stop_reason: StopReason::MaxEpochs,
        epochs_run: 0,
        best_epoch: 0,
        n_train,
        n_val,
        wall_time_ms: None,
    };

    for epoch in 0..config.max_epochs {
        let lr = config.learning_rate(epoch);
        shuffle(&mut rng, &mut order);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                total += loss_and_grad(&model.arch, &model.params, &train[i], Some(&mut rng), &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut model.params, &grad, lr);
        }
        let train_loss = total / n_train as f64;
        let val_loss = if val.is_empty() {
            None
        } else {
            let mut s = 0.0;
            for w in val {
                s += model.score(w)?;
            }
            Some(s / val.len() as f64)
        };
        let monitored = val_loss.unwrap_or(train_loss);
        if !train_loss.is_finite() || !monitored.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        report.train_loss.push(train_loss);
        if let Some(v) = val_loss {
            report.val_loss.push(v);
        }
        report.epochs_run = epoch + 1;
        progress(epoch, train_loss, val_loss);

        if monitored < best.0 * (1.0 - config.min_delta) || best.0.is_infinite() {
            best = (monitored, epoch, model.params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.early_stop_patience {
                report.stop_reason = StopReason::EarlyStop;
                break;
            }
        }
    }

    report.best_epoch = best.1;
    model.params = best.2;
    model.meta = TrainingMeta {
        epochs_run: report.epochs_run,
        best_epoch: best.1,
        final_train_loss: report.train_loss.last().copied().unwrap_or(f64::NAN),
        best_val_loss: if n_val > 0 { Some(best.0) } else { None },
        seed: config.seed,
    };
    Ok((model, report))
}
