//! Norm placement on shared-trend channels: detrended queries/keys in the
//! Integrated block only (default) versus in the Cointegrated block only.
//!
//! cargo run --release --example ablation [steps]

use timebridge::ablation::{build_data, train_and_score, AblationSetup};

fn main() -> timebridge::Result<()> {
    let steps = std::env::args()
        .nth(1)
        .map_or(2000, |a| a.parse().expect("steps"));
    let setup = AblationSetup {
        steps,
        ..AblationSetup::default()
    };
    let data = build_data(&setup)?;
    println!("naive last-value val MSE {:.4}", data.naive_val_mse);
    for (name, integrated, cointegrated) in [
        ("integrated norm on, cointegrated off", true, false),
        ("integrated norm off, cointegrated on", false, true),
        ("both on", true, true),
        ("both off", false, false),
    ] {
        let scores: Vec<f64> = (0..3)
            .map(|seed| {
                train_and_score(
                    &setup,
                    &data,
                    setup.model_config(integrated, cointegrated),
                    seed,
                )
            })
            .collect::<timebridge::Result<_>>()?;
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        println!("{name:<38} val MSE {mean:.4} {scores:.4?}");
    }
    Ok(())
}
