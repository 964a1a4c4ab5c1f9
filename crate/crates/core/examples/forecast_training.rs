//! Train on a synthetic trend-plus-seasonality dataset, then score the test split.
//!
//! cargo run --release --example forecast_training [epochs]

use timebridge::cli::prepare_data;
use timebridge::data::SplitSpec;
use timebridge::metrics::MetricsAccumulator;
use timebridge::model::{ModelConfig, TimeBridge};
use timebridge::synth::gen_trend_sinusoid;
use timebridge::train::{train, TrainConfig};

fn main() -> timebridge::Result<()> {
    let epochs = std::env::args()
        .nth(1)
        .map_or(20, |a| a.parse().expect("epochs"));
    let frame = gen_trend_sinusoid(600, 3, 7)?;
    let data = prepare_data(&frame, SplitSpec::Ratios(0.7, 0.1, 0.2), 48, 12, 2)?;
    let [train_set, val_set, test_set] = &data.splits;

    let config = ModelConfig {
        downsampled_patches: 3,
        hidden_dim: 16,
        ff_dim: 32,
        n_heads: 2,
        ..ModelConfig::new(48, 12, 3, 8)
    };
    let tc = TrainConfig {
        learning_rate: 3e-3,
        epochs,
        batch_size: 16,
        seed: 1,
        ..TrainConfig::default()
    };
    let outcome = train(TimeBridge::new(config, 1)?, train_set, val_set, &tc)?;
    for e in &outcome.log {
        println!(
            "epoch {:>3}  train {:.4}  val {:.4}",
            e.epoch,
            e.train_loss,
            e.val_loss.unwrap_or(f64::NAN)
        );
    }

    let mut acc = MetricsAccumulator::new();
    for s in test_set {
        let pred = outcome.best.predict(&s.input)?;
        acc.add(
            &data.stats.inverse_tensor(&pred)?,
            &data.stats.inverse_tensor(&s.target)?,
        )?;
    }
    let report = acc.finish()?;
    println!(
        "best epoch {}; test (raw units) {}",
        outcome.best_epoch,
        serde_json::to_string(&report)?
    );
    Ok(())
}
