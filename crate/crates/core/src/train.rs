//! Self-supervised (denoising) and label-supervised training loops.
//!
//! Both regimes reconstruct the clean image from a noisy one. The
//! supervised baseline adds a linear classifier on the latent code and a
//! weighted cross-entropy term, so it is the only regime that consumes
//! labels.

use alloc::vec::Vec;

use crate::adam::{adam_update, AdamConfig, AdamState};
use crate::channel::{add_awgn_with, Placement};
use crate::cifar::Split;
use crate::error::{Error, Result};
use crate::nn::{loss_and_grad, AutoencoderSpec, LatentHook, Parameters, StepInput, StepLoss};
use crate::real::Real;
use crate::sampling::batch_iter;
use crate::seed::{derive_seed, rng_from, Tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Mode {
    /// Denoising autoencoder, no labels.
    #[default]
    Ssl,
    /// Autoencoder plus classifier head trained on labels.
    Sl,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ssl => "ssl",
            Mode::Sl => "sl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingConfig {
    pub mode: Mode,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Standard deviation of training noise, in normalized units.
    pub noise_factor: f64,
    pub sample_count: usize,
    pub seed: u64,
    /// Weight of the cross-entropy term; only used in [`Mode::Sl`].
    pub sl_aux_weight: f64,
    /// Where training noise is injected.
    pub placement: Placement,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            mode: Mode::Ssl,
            learning_rate: 0.001,
            epochs: 20,
            batch_size: 128,
            noise_factor: 0.5,
            sample_count: crate::cifar::TRAIN_RECORDS,
            seed: 0,
            sl_aux_weight: 0.1,
            placement: Placement::Input,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.noise_factor >= 0.0 && self.noise_factor.is_finite()) {
            return bad("noise_factor must be >= 0");
        }
        if self.sample_count == 0 {
            return bad("sample_count must be >= 1");
        }
        if !(self.sl_aux_weight >= 0.0 && self.sl_aux_weight.is_finite()) {
            return bad("sl_aux_weight must be >= 0");
        }
        Ok(())
    }

    fn aux_weight(&self) -> f64 {
        match self.mode {
            Mode::Ssl => 0.0,
            Mode::Sl => self.sl_aux_weight,
        }
    }
}

/// Mean training losses of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochLoss {
    pub reconstruction: f64,
    /// Cross-entropy, present for the supervised regime.
    pub classification: Option<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossTrace {
    pub epochs: Vec<EpochLoss>,
}

impl LossTrace {
    pub fn first(&self) -> Option<&EpochLoss> {
        self.epochs.first()
    }

    pub fn last(&self) -> Option<&EpochLoss> {
        self.epochs.last()
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

/// Hooks for progress reporting. Both methods default to no-ops.
pub trait TrainObserver {
    fn batch_done(&mut self, _epoch: usize, _batch: usize, _loss: &StepLoss) {}
    fn epoch_done(&mut self, _epoch: usize, _loss: &EpochLoss) {}
}

impl TrainObserver for () {}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<T> {
    pub params: Parameters<T>,
    pub trace: LossTrace,
}

pub fn init_seed(seed: u64) -> u64 {
    derive_seed(seed, &[Tag::Str("init")])
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    derive_seed(seed, &[Tag::Str("epoch"), Tag::U64(epoch as u64)])
}

/// Train from a fresh seeded initialization on every record of `split`.
///
/// Noise is redrawn for every batch of every epoch. `split.len()` must equal
/// `config.sample_count`.
pub fn train<T: Real>(
    config: &TrainingConfig,
    spec: &AutoencoderSpec,
    split: &Split,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if split.len() != config.sample_count {
        return Err(Error::InvalidConfig(alloc::format!(
            "sample_count is {} but the training split holds {} images",
            config.sample_count,
            split.len()
        )));
    }
    let with_head = config.mode == Mode::Sl;
    let mut params = Parameters::<T>::init(spec, init_seed(config.seed), with_head)?;
    let mut state = AdamState::new(params.tensors());
    let adam = AdamConfig::new(config.learning_rate);
    let aux_weight = config.aux_weight();
    let mut trace = LossTrace::default();

    for epoch in 0..config.epochs {
        let mut noise = rng_from(config.seed, &[Tag::Str("train-noise"), Tag::U64(epoch as u64)]);
        let (mut recon_sum, mut class_sum, mut total_sum) = (0.0, 0.0, 0.0);
        for (b, batch) in batch_iter::<T>(split, config.batch_size, epoch_seed(config.seed, epoch))?.enumerate() {
            let n = batch.len() as f64;
            let mut input = batch.data.clone();
            let mut latent_hook;
            let hook: LatentHook<'_, T> = match config.placement {
                Placement::Input => {
                    add_awgn_with(&mut input, config.noise_factor, &mut noise);
                    None
                }
                Placement::Latent => {
                    latent_hook = |z: &mut [T]| add_awgn_with(z, config.noise_factor, &mut noise);
                    Some(&mut latent_hook)
                }
            };
            let step = StepInput {
                input: &input,
                target: &batch.data,
                labels: if with_head { batch.labels.as_deref() } else { None },
                aux_weight,
            };
            let (loss, grads) = loss_and_grad(&params, &step, hook)?;
            if !loss.total.is_finite() {
                return Err(Error::NonFinite { what: "loss", epoch, batch: b });
            }
            adam_update(params.tensors_mut(), &grads, &mut state, &adam).map_err(|e| match e {
                Error::NonFinite { what, .. } => Error::NonFinite { what, epoch, batch: b },
                other => other,
            })?;
            recon_sum += loss.reconstruction * n;
            class_sum += loss.classification.unwrap_or(0.0) * n;
            total_sum += loss.total * n;
            observer.batch_done(epoch, b, &loss);
        }
        let count = split.len() as f64;
        let epoch_loss = EpochLoss {
            reconstruction: recon_sum / count,
            classification: with_head.then_some(class_sum / count),
            total: total_sum / count,
        };
        observer.epoch_done(epoch, &epoch_loss);
        trace.epochs.push(epoch_loss);
    }
    Ok(TrainOutcome { params, trace })
}

/// Self-supervised denoising: minimizes `mse(forward(corrupt(x)), x)`.
pub fn train_ssl<T: Real>(
    config: &TrainingConfig,
    spec: &AutoencoderSpec,
    split: &Split,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome<T>> {
    if config.mode != Mode::Ssl {
        return Err(Error::InvalidConfig("train_ssl requires mode = ssl".into()));
    }
    train(config, spec, split, observer)
}

/// Supervised baseline: reconstruction plus `sl_aux_weight` times the
/// cross-entropy of a linear head on the latent code of the noisy input.
pub fn train_sl<T: Real>(
    config: &TrainingConfig,
    spec: &AutoencoderSpec,
    split: &Split,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome<T>> {
    if config.mode != Mode::Sl {
        return Err(Error::InvalidConfig("train_sl requires mode = sl".into()));
    }
    train(config, spec, split, observer)
}

/// Mean denoising loss of `params` over `split` without updating anything,
/// using input noise of `noise_factor` drawn from `seed`.
pub fn denoising_loss<T: Real>(
    params: &Parameters<T>,
    split: &Split,
    noise_factor: f64,
    batch_size: usize,
    seed: u64,
) -> Result<f64> {
    use crate::nn::Codec;
    let mut noise = rng_from(seed, &[Tag::Str("denoising-loss")]);
    let idx: Vec<usize> = (0..split.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(batch_size.max(1)) {
        let batch = split.batch::<T>(chunk)?;
        let mut input = batch.data.clone();
        add_awgn_with(&mut input, noise_factor, &mut noise);
        let recon = params.reconstruct_planar(&input)?;
        total += crate::loss::mse(&recon, &batch.data)? * chunk.len() as f64;
    }
    Ok(total / split.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::default_spec;
    use crate::synthetic;

    fn small(mode: Mode, n: usize) -> TrainingConfig {
        TrainingConfig { mode, epochs: 1, batch_size: 16, sample_count: n, seed: 7, ..Default::default() }
    }

    #[test]
    fn default_hyperparameters() {
        let c = TrainingConfig::default();
        assert_eq!((c.learning_rate, c.epochs, c.batch_size, c.noise_factor), (0.001, 20, 128, 0.5));
        assert_eq!(c.sample_count, 50_000);
        c.validate().unwrap();
    }

    #[test]
    fn config_validation() {
        let ok = TrainingConfig::default();
        for bad in [
            TrainingConfig { learning_rate: 0.0, ..ok },
            TrainingConfig { epochs: 0, ..ok },
            TrainingConfig { batch_size: 0, ..ok },
            TrainingConfig { noise_factor: -0.1, ..ok },
            TrainingConfig { sample_count: 0, ..ok },
            TrainingConfig { sl_aux_weight: -1.0, ..ok },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn mode_and_size_guards() {
        let split = synthetic::cifar_like(20, 1);
        let spec = default_spec();
        assert!(train_ssl::<f32>(&small(Mode::Sl, 20), &spec, &split, &mut ()).is_err());
        assert!(train_sl::<f32>(&small(Mode::Ssl, 20), &spec, &split, &mut ()).is_err());
        assert!(train::<f32>(&small(Mode::Ssl, 21), &spec, &split, &mut ()).is_err());
    }

    #[test]
    fn sl_trace_has_both_components() {
        let split = synthetic::cifar_like(32, 2);
        let out = train_sl::<f32>(&small(Mode::Sl, 32), &default_spec(), &split, &mut ()).unwrap();
        assert_eq!(out.trace.len(), 1);
        let e = out.trace.epochs[0];
        let ce = e.classification.unwrap();
        assert!(e.reconstruction > 0.0 && ce > 0.0);
        assert!((e.total - (e.reconstruction + 0.1 * ce)).abs() < 1e-9);
        assert!(out.params.has_head());
    }

    #[test]
    fn latent_placement_trains() {
        let split = synthetic::cifar_like(24, 3);
        let cfg = TrainingConfig { placement: Placement::Latent, ..small(Mode::Ssl, 24) };
        let out = train::<f32>(&cfg, &default_spec(), &split, &mut ()).unwrap();
        assert!(out.trace.epochs[0].total.is_finite());
        assert!(out.trace.epochs[0].classification.is_none());
    }
}
