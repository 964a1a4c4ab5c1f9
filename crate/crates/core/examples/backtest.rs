//! Top-k daily backtest with noisy forecasts of synthetic returns.
//!
//! cargo run --example backtest

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use timebridge::metrics::{buy_hold_sell_backtest, TRADING_DAYS};
use timebridge::tensor::Tensor;

fn main() -> timebridge::Result<()> {
    let (days, stocks, k) = (504, 40, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ret = Normal::new(0.0003, 0.02).unwrap();
    let realized: Vec<f64> = (0..days * stocks).map(|_| ret.sample(&mut rng)).collect();
    let benchmark: Vec<f64> = realized
        .chunks(stocks)
        .map(|d| d.iter().sum::<f64>() / stocks as f64)
        .collect();
    let realized = Tensor::new(&[days, stocks], realized)?;

    for noise in [0.02f64, 0.05, 0.1, 0.2] {
        let err = Normal::new(0.0, noise).unwrap();
        let shifts: Vec<f64> = (0..days * stocks).map(|_| err.sample(&mut rng)).collect();
        let pred = Tensor::new(
            &[days, stocks],
            realized
                .data()
                .iter()
                .zip(&shifts)
                .map(|(r, e)| r + e)
                .collect(),
        )?;
        let rep = buy_hold_sell_backtest(&pred, &realized, k, &benchmark, TRADING_DAYS)?;
        let m = rep.metrics;
        println!(
            "forecast noise {noise:<5} ARR {:>8.3} AVol {:.3} MDD {:>7.3} ASR {:>7.2} IR {:>7.2}",
            m.arr,
            m.avol,
            m.mdd,
            m.asr.unwrap_or(f64::NAN),
            m.ir.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
