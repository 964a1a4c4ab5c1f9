//! Hybrid loss, Adam, and the mini-batch training loop.
//!
//! Each sample in a batch is differentiated on its own tape (in parallel);
//! gradients are summed in sample order, so results do not depend on the
//! number of worker threads.

mod adam;
pub mod loss;

pub use adam::{Adam, AdamConfig};
pub use loss::{hybrid_loss, hybrid_loss_value, mae_freq, mae_time, FREQ_EPS};

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::model::{forward, parse_num, ModelParams, ParamTree, TimeBridge};
use crate::parallel;
use crate::tensor::{finite_diff_check, GradCheckReport, Tape, Var};

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight of the frequency term in the hybrid loss.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 10,
            batch_size: 32,
            alpha: 0.35,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub const KEYS: [&'static str; 8] = [
        "learning_rate",
        "adam_beta1",
        "adam_beta2",
        "adam_eps",
        "epochs",
        "batch_size",
        "alpha",
        "seed",
    ];

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch_size must be positive".into(),
            ));
        }
        Adam::new(self.adam()).map(|_| ())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "learning_rate" => self.learning_rate = parse_num(key, v)?,
            "adam_beta1" => self.adam_beta1 = parse_num(key, v)?,
            "adam_beta2" => self.adam_beta2 = parse_num(key, v)?,
            "adam_eps" => self.adam_eps = parse_num(key, v)?,
            "epochs" => self.epochs = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "alpha" => self.alpha = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            _ => return Err(Error::Config(format!("unknown training key {key:?}"))),
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("learning_rate", self.learning_rate.to_string()),
            ("adam_beta1", self.adam_beta1.to_string()),
            ("adam_beta2", self.adam_beta2.to_string()),
            ("adam_eps", self.adam_eps.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("alpha", self.alpha.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean over training samples of the loss seen just before each sample's update.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the last epoch.
    pub model: TimeBridge,
    /// Parameters at the epoch with the lowest validation loss (training loss
    /// when there is no validation set).
    pub best: TimeBridge,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
    /// Mean batch loss before every optimizer step.
    pub step_losses: Vec<f64>,
}

fn check_sample(model: &TimeBridge, s: &Sample) -> Result<()> {
    let c = &model.config;
    if s.input.shape() != [c.channels, c.input_len] {
        return Err(Error::shape(
            "sample input",
            s.input.shape(),
            &[c.channels, c.input_len],
        ));
    }
    if s.target.shape() != [c.channels, c.output_len] {
        return Err(Error::shape(
            "sample target",
            s.target.shape(),
            &[c.channels, c.output_len],
        ));
    }
    Ok(())
}

/// Loss of one sample and the gradient of every parameter tensor, in traversal order.
pub fn sample_loss_and_grads(
    model: &TimeBridge,
    sample: &Sample,
    alpha: f64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut tape = Tape::new();
    let vars = model.params.register(&mut tape);
    let out = forward(&mut tape, &model.config, &vars, &sample.input)?;
    let target = tape.constant(sample.target.clone());
    let loss = hybrid_loss(&mut tape, out.forecast, target, alpha)?;
    tape.backward(loss)?;
    let mut grads = Vec::new();
    vars.visit("", &mut |_, &v| {
        let n = tape.value(v).numel();
        grads.push(tape.grad(v).map_or_else(|| vec![0.0; n], <[f64]>::to_vec));
    });
    Ok((tape.value(loss).item(), grads))
}

/// Per-sample losses and the batch-mean gradient.
pub fn batch_loss_and_grads(
    model: &TimeBridge,
    batch: &[&Sample],
    alpha: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let results: Vec<Result<(f64, Vec<Vec<f64>>)>> = parallel::pool().install(|| {
        batch
            .par_iter()
            .map(|s| sample_loss_and_grads(model, s, alpha))
            .collect()
    });
    let mut losses = Vec::with_capacity(batch.len());
    let mut total: Option<Vec<Vec<f64>>> = None;
    for r in results {
        let (l, g) = r?;
        losses.push(l);
        match &mut total {
            None => total = Some(g),
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(&g) {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                }
            }
        }
    }
    let mut total = total.expect("non-empty batch");
    let inv = 1.0 / batch.len() as f64;
    for g in &mut total {
        for x in g {
            *x *= inv;
        }
    }
    Ok((losses, total))
}

/// Mean hybrid loss of `model` over `samples`.
pub fn evaluate_loss(model: &TimeBridge, samples: &[Sample], alpha: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Config("cannot evaluate on an empty dataset".into()));
    }
    let losses: Vec<Result<f64>> = parallel::pool().install(|| {
        samples
            .par_iter()
            .map(|s| {
                check_sample(model, s)?;
                let pred = model.predict(&s.input)?;
                hybrid_loss_value(&pred, &s.target, alpha)
            })
            .collect()
    });
    let mut sum = 0.0;
    for l in losses {
        sum += l?;
    }
    Ok(sum / samples.len() as f64)
}

fn apply_grads(params: &mut ModelParams, grads: Vec<Vec<f64>>) {
    let mut it = grads.into_iter();
    params.visit_mut("", &mut |_, t| t.grad = it.next());
}

/// Mini-batch Adam on the hybrid loss.
///
/// Batches are drawn from a reshuffle of the training set every epoch, using a
/// ChaCha8 stream seeded by `config.seed`. The last batch of an epoch may be
/// smaller than `batch_size`.
pub fn train(
    model: TimeBridge,
    train_set: &[Sample],
    val_set: &[Sample],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    for s in train_set.iter().chain(val_set) {
        check_sample(&model, s)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(config.adam())?;
    let mut model = model;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let mut step_losses = Vec::new();
    let mut best: Option<(f64, usize, TimeBridge)> = None;
    let mut sample_losses = vec![0.0; train_set.len()];

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (losses, grads) = batch_loss_and_grads(&model, &batch, config.alpha)?;
            for (&i, &l) in chunk.iter().zip(&losses) {
                sample_losses[i] = l;
            }
            step_losses.push(losses.iter().sum::<f64>() / losses.len() as f64);
            apply_grads(&mut model.params, grads);
            adam.step_model(&mut model.params)?;
        }
        // Summed in sample order so the value does not depend on the shuffle.
        let train_loss = sample_losses.iter().sum::<f64>() / train_set.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Data(format!("training diverged at epoch {epoch}")));
        }
        let val_loss = if val_set.is_empty() {
            None
        } else {
            Some(evaluate_loss(&model, val_set, config.alpha)?)
        };
        let score = val_loss.unwrap_or(train_loss);
        if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            best = Some((score, epoch, model.clone()));
        }
        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
        });
    }
    let (_, best_epoch, best) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        best,
        best_epoch,
        log,
        step_losses,
    })
}

/// `epoch,train_loss,val_loss` with an empty cell when there is no validation set.
pub fn write_log_csv(log: &[EpochLog], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "train_loss", "val_loss"])?;
    for e in log {
        w.write_record([
            e.epoch.to_string(),
            format!("{:e}", e.train_loss),
            e.val_loss.map(|v| format!("{v:e}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Compares tape gradients of the hybrid loss on one sample with central
/// differences over every parameter of `model`.
pub fn gradient_check(
    model: &TimeBridge,
    sample: &Sample,
    alpha: f64,
    eps: f64,
) -> Result<GradCheckReport> {
    check_sample(model, sample)?;
    let flat = model.params.to_flat();
    finite_diff_check(&flat, eps, |tape, vars: &[Var]| {
        let params = model.params.with_vars(vars);
        let out = forward(tape, &model.config, &params, &sample.input)?;
        let target = tape.constant(sample.target.clone());
        hybrid_loss(tape, out.forecast, target, alpha)
    })
}
