use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timebridge::metrics::{
    buy_hold_sell_backtest, equity_curve, financial_metrics, forecast_metrics, max_drawdown,
    write_equity_csv, MetricsAccumulator, TRADING_DAYS,
};
use timebridge::tensor::Tensor;

fn matrix(days: usize, stocks: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..days * stocks)
        .map(|_| rng.random_range(-0.05..0.05))
        .collect();
    Tensor::new(&[days, stocks], data).unwrap()
}

#[test]
fn hand_arithmetic_forecast_metrics() {
    let target = Tensor::vector(vec![1.0, 1.0]);
    let pred = Tensor::vector(vec![4.0, -3.0]);
    let r = forecast_metrics(&pred, &target).unwrap();
    assert_eq!((r.mse, r.mae, r.mape, r.n_samples), (12.5, 3.5, 350.0, 1));
    assert_eq!(r.rmse, 12.5f64.sqrt());

    let r = forecast_metrics(&target, &target).unwrap();
    assert_eq!((r.mse, r.mae, r.mape, r.rmse), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn zero_targets_are_excluded_from_mape() {
    let target = Tensor::vector(vec![0.0, 2.0]);
    let pred = Tensor::vector(vec![1.0, 3.0]);
    let r = forecast_metrics(&pred, &target).unwrap();
    assert_eq!((r.mape, r.mape_excluded, r.mae), (50.0, 1, 1.0));
    assert!(forecast_metrics(&pred, &Tensor::zeros(&[2])).is_err());
    assert!(forecast_metrics(&pred, &Tensor::zeros(&[3])).is_err());

    let json = serde_json::to_value(r).unwrap();
    let mut keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(keys, ["mae", "mape", "mse", "n_samples", "rmse"]);
}

#[test]
fn accumulator_weighs_elements_equally() {
    let a = matrix(3, 4, 1);
    let b = matrix(3, 4, 2);
    let mut acc = MetricsAccumulator::new();
    acc.add(
        &a.clone().reshape(&[12]).unwrap(),
        &b.clone().reshape(&[12]).unwrap(),
    )
    .unwrap();
    let whole = acc.finish().unwrap();
    let mut acc = MetricsAccumulator::new();
    for r in 0..3 {
        acc.add(
            &Tensor::vector(a.row(r).to_vec()),
            &Tensor::vector(b.row(r).to_vec()),
        )
        .unwrap();
    }
    let split = acc.finish().unwrap();
    assert_eq!(split.n_samples, 3);
    assert!((whole.mse - split.mse).abs() < 1e-15 && (whole.mape - split.mape).abs() < 1e-12);
    assert!(MetricsAccumulator::new().finish().is_err());
}

proptest! {
    #[test]
    fn rmse_squared_is_mse(seed in 0u64..1000) {
        let r = forecast_metrics(&matrix(5, 3, seed), &matrix(5, 3, seed + 1)).unwrap();
        prop_assert!((r.rmse * r.rmse - r.mse).abs() < 1e-12);
        prop_assert!(r.mse >= 0.0 && r.mae >= 0.0 && r.mape >= 0.0);
    }

    #[test]
    fn drawdown_bounds(returns in prop::collection::vec(-0.99f64..1.0, 2..60)) {
        let mdd = max_drawdown(&equity_curve(&returns));
        prop_assert!((-1.0..=0.0).contains(&mdd));
        let rising: Vec<f64> = returns.iter().map(|r| r.abs()).collect();
        prop_assert_eq!(max_drawdown(&equity_curve(&rising)), 0.0);
    }
}

#[test]
fn two_day_drawdown() {
    assert_eq!(equity_curve(&[0.1, -0.1])[1..], [1.1, 1.1 * 0.9]);
    let m = financial_metrics(&[0.1, -0.1], &[0.0, 0.0], TRADING_DAYS).unwrap();
    assert!((m.mdd + 0.1).abs() < 1e-15, "{}", m.mdd);
    assert!((m.cr.unwrap() - m.arr / 0.1).abs() < 1e-9 * m.arr.abs());
}

#[test]
fn flat_returns_give_undefined_ratios() {
    let m = financial_metrics(&[0.0; 10], &[0.0; 10], TRADING_DAYS).unwrap();
    assert_eq!((m.arr, m.avol, m.mdd), (0.0, 0.0, 0.0));
    assert_eq!((m.asr, m.cr, m.ir), (None, None, None));
    let json = serde_json::to_value(m).unwrap();
    assert!(json["asr"].is_null() && json["cr"].is_null());

    let r = [0.01, -0.02, 0.03];
    assert_eq!(financial_metrics(&r, &r, TRADING_DAYS).unwrap().ir, None);
    assert!(financial_metrics(&[0.1], &[0.0], TRADING_DAYS).is_err());
}

#[test]
fn metric_formulas_by_hand() {
    let r = [0.01, 0.02, -0.005, 0.0];
    let b = [0.0, 0.01, 0.0, 0.005];
    let m = financial_metrics(&r, &b, TRADING_DAYS).unwrap();
    let total: f64 = r.iter().map(|x| 1.0 + x).product();
    let arr = total.powf(252.0 / 4.0) - 1.0;
    let mean = 0.025 / 4.0;
    let var: f64 = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0;
    let avol = 252f64.sqrt() * var.sqrt();
    assert!((m.arr - arr).abs() < 1e-12 * arr);
    assert!((m.avol - avol).abs() < 1e-14);
    assert!((m.asr.unwrap() - arr / avol).abs() < 1e-12 * (arr / avol));
    // Active returns 0.01, 0.01, −0.005, −0.005: mean 0.0025, deviations ±0.0075, sample std √(0.000225/3).
    let ir = 0.0025 / (0.000225f64 / 3.0).sqrt() * 252f64.sqrt();
    assert!((m.ir.unwrap() - ir).abs() < 1e-9);
    assert!((m.mdd + 0.005).abs() < 1e-15);
}

#[test]
fn equal_predictions_hold_the_first_stocks() {
    let realized = matrix(20, 6, 3);
    let report = buy_hold_sell_backtest(
        &Tensor::zeros(&[20, 6]),
        &realized,
        2,
        &[0.0; 20],
        TRADING_DAYS,
    )
    .unwrap();
    for (d, held) in report.holdings.iter().enumerate() {
        assert_eq!(held, &[0, 1]);
        assert_eq!(
            report.daily_returns[d],
            (realized.row(d)[0] + realized.row(d)[1]) / 2.0
        );
    }
}

#[test]
fn top_k_range_is_checked() {
    let p = matrix(5, 3, 0);
    assert!(buy_hold_sell_backtest(&p, &p, 0, &[0.0; 5], TRADING_DAYS).is_err());
    assert!(buy_hold_sell_backtest(&p, &p, 4, &[0.0; 5], TRADING_DAYS).is_err());
    assert!(buy_hold_sell_backtest(&p, &matrix(5, 4, 0), 1, &[0.0; 5], TRADING_DAYS).is_err());
}

/// Best mean over every k-subset, by enumeration.
fn brute_force_best(row: &[f64], k: usize) -> f64 {
    let n = row.len();
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| {
            (0..n)
                .filter(|i| m >> i & 1 == 1)
                .map(|i| row[i])
                .sum::<f64>()
                / k as f64
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn perfect_foresight_matches_brute_force() {
    let realized = matrix(40, 7, 11);
    for k in 1..=7 {
        let report =
            buy_hold_sell_backtest(&realized, &realized, k, &[0.0; 40], TRADING_DAYS).unwrap();
        for d in 0..40 {
            let best = brute_force_best(realized.row(d), k);
            assert!(
                (report.daily_returns[d] - best).abs() < 1e-15,
                "k={k} day={d}"
            );
        }
    }
}

#[test]
fn perfect_foresight_dominates_random_rankings() {
    let realized = matrix(120, 10, 5);
    let bench = vec![0.0; 120];
    let best = buy_hold_sell_backtest(&realized, &realized, 3, &bench, TRADING_DAYS).unwrap();
    for s in 0..100 {
        let random = buy_hold_sell_backtest(
            &matrix(120, 10, 1000 + s),
            &realized,
            3,
            &bench,
            TRADING_DAYS,
        )
        .unwrap();
        assert!(best.metrics.arr >= random.metrics.arr);
    }
}

#[test]
fn monotone_transforms_leave_the_report_unchanged() {
    let pred = matrix(60, 8, 21);
    let realized = matrix(60, 8, 22);
    let bench: Vec<f64> = (0..60).map(|d| 0.001 * (d as f64).sin()).collect();
    let base = buy_hold_sell_backtest(&pred, &realized, 3, &bench, TRADING_DAYS).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let a = rng.random_range(0.1..10.0);
        let b = rng.random_range(-5.0..5.0);
        let which = rng.random_range(0..3);
        let moved = pred.map(|x| match which {
            0 => a * x + b,
            1 => (a * x).atan() + b,
            _ => (x * 20.0).exp() * a + x.powi(3),
        });
        let r = buy_hold_sell_backtest(&moved, &realized, 3, &bench, TRADING_DAYS).unwrap();
        assert_eq!(r, base);
    }
}

#[test]
fn equity_csv_layout() {
    let p = matrix(4, 3, 0);
    let report = buy_hold_sell_backtest(&p, &p, 1, &[0.0; 4], TRADING_DAYS).unwrap();
    let mut buf = Vec::new();
    write_equity_csv(&report, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "day,daily_return,equity");
    assert_eq!(lines.len(), 6);
    let last: f64 = lines[5].split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(last, *report.equity_curve.last().unwrap());
}
