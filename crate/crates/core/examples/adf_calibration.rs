//! Mean ADF statistic of random walks and of white noise, plus critical values.
//!
//! cargo run --release --example adf_calibration [reps]

use timebridge::stats::{adf_critical_value, LagSpec, RegressionKind, Significance};
use timebridge::synth::{adf_calibration, GeneratorKind};

fn main() -> timebridge::Result<()> {
    let reps = std::env::args()
        .nth(1)
        .map_or(100, |a| a.parse().expect("reps"));
    for kind in [GeneratorKind::RandomWalk, GeneratorKind::WhiteNoise] {
        let cal = adf_calibration(
            kind,
            10_000,
            reps,
            0,
            RegressionKind::Constant,
            LagSpec::Fixed(0),
        )?;
        println!(
            "{kind:<12} mean {:>9.3}  std {:.3}  range [{:.3}, {:.3}]",
            cal.mean, cal.std, cal.min, cal.max
        );
    }
    for level in Significance::ALL {
        println!(
            "critical value at {level}, T=10000: {:.4}",
            adf_critical_value(RegressionKind::Constant, 10_000, level)
        );
    }
    Ok(())
}
