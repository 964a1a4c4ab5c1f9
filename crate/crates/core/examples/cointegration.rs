//! Engle-Granger on a constructed pair, on independent walks, and across the
//! channels of a shared-trend panel.
//!
//! cargo run --release --example cointegration

use timebridge::stats::{eg_pair_count, eg_test, Significance};
use timebridge::synth::{gen_cointegrated_channels, gen_cointegrated_pair, gen_independent_walks};

fn main() -> timebridge::Result<()> {
    let sig = Significance::FivePercent;
    let pair = gen_cointegrated_pair(5000, 2.0, 0.5, 0)?;
    let r = eg_test(&pair.x, &pair.y, sig)?;
    println!(
        "pair: beta {:.4}, residual ADF {:.3} vs {:.3} -> cointegrated {}",
        r.beta, r.residual_adf.statistic, r.critical_value, r.cointegrated
    );

    let flagged = (0..100)
        .filter(|&s| {
            let (x, y) = gen_independent_walks(5000, s).unwrap();
            eg_test(&x, &y, sig).unwrap().cointegrated
        })
        .count();
    println!("independent walks flagged: {flagged}/100");

    let panel = gen_cointegrated_channels(2000, 5, 0.5, 3)?;
    println!(
        "shared-trend panel: {} of 20 ordered pairs cointegrated",
        eg_pair_count(&panel, sig)?
    );
    Ok(())
}
