//! Norm-placement ablation on channels that share one random-walk trend.
//!
//! Train and validation windows come from independent walk realizations of
//! the same [`SharedTrend`] loadings, so both sets cover the same level range.
//! Windows are z-scored with one mean and standard deviation pooled over all
//! training inputs (a single affine map keeps the cross-channel relations).

use serde::Serialize;

use crate::data::{windows, Sample};
use crate::error::{Error, Result};
use crate::metrics::MetricsAccumulator;
use crate::model::{ModelConfig, TimeBridge};
use crate::synth::SharedTrend;
use crate::train::{self, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationSetup {
    pub channels: usize,
    pub noise_sigma: f64,
    /// Walk steps discarded before each window, so windows start at varied levels.
    pub burn_in: usize,
    pub train_windows: usize,
    pub val_windows: usize,
    pub input_len: usize,
    pub output_len: usize,
    pub patch_len: usize,
    pub downsampled_patches: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Optimizer steps; must be a multiple of the steps per epoch.
    pub steps: usize,
    pub data_seed: u64,
}

impl Default for AblationSetup {
    fn default() -> Self {
        AblationSetup {
            channels: 8,
            noise_sigma: 0.5,
            burn_in: 20,
            train_windows: 160,
            val_windows: 200,
            input_len: 48,
            output_len: 12,
            patch_len: 8,
            downsampled_patches: 3,
            hidden_dim: 16,
            learning_rate: 1e-3,
            batch_size: 16,
            steps: 2000,
            data_seed: 0,
        }
    }
}

pub struct AblationData {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    /// Validation MSE of repeating each channel's last input value.
    pub naive_val_mse: f64,
}

fn shared_trend_samples(
    setup: &AblationSetup,
    trend: &SharedTrend,
    first_seed: u64,
    count: usize,
) -> Result<Vec<Sample>> {
    let span = setup.input_len + setup.output_len;
    (0..count as u64)
        .map(|k| {
            let frame = trend
                .render(setup.burn_in + span, setup.noise_sigma, first_seed + k)?
                .slice(setup.burn_in, span)?;
            Ok(windows(&frame, setup.input_len, setup.output_len, 1)?.remove(0))
        })
        .collect()
}

/// Train windows use walk seeds `data_seed·10⁶ + 1000 + k`, validation
/// windows `data_seed·10⁶ + 500000 + k`.
pub fn build_data(setup: &AblationSetup) -> Result<AblationData> {
    let trend = SharedTrend::random(setup.channels, setup.data_seed)?;
    let base = setup.data_seed.wrapping_mul(1_000_000);
    let mut train = shared_trend_samples(setup, &trend, base + 1000, setup.train_windows)?;
    let mut val = shared_trend_samples(setup, &trend, base + 500_000, setup.val_windows)?;
    let inputs: Vec<f64> = train
        .iter()
        .flat_map(|s| s.input.data().iter().copied())
        .collect();
    let n = inputs.len() as f64;
    let mean = inputs.iter().sum::<f64>() / n;
    let std = (inputs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    for s in train.iter_mut().chain(val.iter_mut()) {
        s.input = s.input.map(|v| (v - mean) / std);
        s.target = s.target.map(|v| (v - mean) / std);
    }
    let mut naive = MetricsAccumulator::new();
    for s in &val {
        let last = s.input.cols() - 1;
        let mut pred = s.target.clone();
        for c in 0..pred.rows() {
            for h in 0..pred.cols() {
                pred.set(&[c, h], s.input.at(&[c, last]));
            }
        }
        naive.add(&pred, &s.target)?;
    }
    Ok(AblationData {
        train,
        val,
        naive_val_mse: naive.finish()?.mse,
    })
}

impl AblationSetup {
    pub fn model_config(&self, integrated_norm: bool, cointegrated_norm: bool) -> ModelConfig {
        ModelConfig {
            downsampled_patches: self.downsampled_patches,
            hidden_dim: self.hidden_dim,
            ff_dim: 2 * self.hidden_dim,
            n_heads: 2,
            integrated_norm,
            cointegrated_norm,
            ..ModelConfig::new(
                self.input_len,
                self.output_len,
                self.channels,
                self.patch_len,
            )
        }
    }
}

/// Validation MSE after training one configuration with the given seed
/// (used for both initialization and shuffling).
pub fn train_and_score(
    setup: &AblationSetup,
    data: &AblationData,
    config: ModelConfig,
    seed: u64,
) -> Result<f64> {
    let per_epoch = data.train.len().div_ceil(setup.batch_size);
    if !setup.steps.is_multiple_of(per_epoch) {
        return Err(Error::Config(format!(
            "steps {} is not a multiple of the {per_epoch} steps per epoch",
            setup.steps
        )));
    }
    let tc = TrainConfig {
        learning_rate: setup.learning_rate,
        epochs: setup.steps / per_epoch,
        batch_size: setup.batch_size,
        seed,
        ..TrainConfig::default()
    };
    let out = train::train(TimeBridge::new(config, seed)?, &data.train, &[], &tc)?;
    let mut acc = MetricsAccumulator::new();
    for s in &data.val {
        acc.add(&out.model.predict(&s.input)?, &s.target)?;
    }
    Ok(acc.finish()?.mse)
}
