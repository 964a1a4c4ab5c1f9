//! Point-forecast errors and a daily top-k long-only backtest.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForecastReport {
    pub mse: f64,
    pub mae: f64,
    /// Percent, over elements with a nonzero target.
    pub mape: f64,
    pub rmse: f64,
    /// Forecast windows evaluated.
    pub n_samples: usize,
    /// Elements left out of MAPE because their target is zero.
    #[serde(skip)]
    pub mape_excluded: usize,
}

/// Running sums over forecast windows; every element weighs the same.
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    sq: f64,
    abs: f64,
    pct: f64,
    elements: usize,
    pct_elements: usize,
    samples: usize,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, pred: &Tensor, target: &Tensor) -> Result<()> {
        if pred.shape() != target.shape() {
            return Err(Error::shape(
                "forecast_metrics",
                pred.shape(),
                target.shape(),
            ));
        }
        for (p, t) in pred.data().iter().zip(target.data()) {
            let e = p - t;
            self.sq += e * e;
            self.abs += e.abs();
            if *t != 0.0 {
                self.pct += (e / t).abs();
                self.pct_elements += 1;
            }
        }
        self.elements += pred.numel();
        self.samples += 1;
        Ok(())
    }

    pub fn finish(&self) -> Result<ForecastReport> {
        if self.samples == 0 {
            return Err(Error::Data("no forecasts to score".into()));
        }
        if self.pct_elements == 0 {
            return Err(Error::Data(
                "every target is zero; MAPE is undefined".into(),
            ));
        }
        let n = self.elements as f64;
        let mse = self.sq / n;
        Ok(ForecastReport {
            mse,
            mae: self.abs / n,
            mape: 100.0 * self.pct / self.pct_elements as f64,
            rmse: mse.sqrt(),
            n_samples: self.samples,
            mape_excluded: self.elements - self.pct_elements,
        })
    }
}

/// Metrics of a single forecast window.
pub fn forecast_metrics(pred: &Tensor, target: &Tensor) -> Result<ForecastReport> {
    let mut acc = MetricsAccumulator::new();
    acc.add(pred, target)?;
    acc.finish()
}

pub const TRADING_DAYS: f64 = 252.0;
pub const DEFAULT_TOP_K: usize = 50;

/// Ratios are `None` when their denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FinancialMetrics {
    pub arr: f64,
    pub avol: f64,
    pub mdd: f64,
    pub asr: Option<f64>,
    pub cr: Option<f64>,
    pub ir: Option<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Compounded equity, starting from 1.0 before the first return.
pub fn equity_curve(daily_returns: &[f64]) -> Vec<f64> {
    let mut e = 1.0;
    std::iter::once(1.0)
        .chain(daily_returns.iter().map(|r| {
            e *= 1.0 + r;
            e
        }))
        .collect()
}

/// `-max_t (peak_t - e_t) / peak_t`, where `peak_t` is the running maximum.
pub fn max_drawdown(equity: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &e in equity {
        peak = peak.max(e);
        if peak > 0.0 {
            worst = worst.max((peak - e) / peak);
        }
    }
    -worst.min(1.0)
}

/// ARR, annualized volatility, drawdown and the three ratios of a daily
/// return series against a benchmark.
pub fn financial_metrics(
    daily_returns: &[f64],
    benchmark_returns: &[f64],
    annualization: f64,
) -> Result<FinancialMetrics> {
    let n = daily_returns.len();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    if benchmark_returns.len() != n {
        return Err(Error::shape(
            "financial_metrics",
            &[n],
            &[benchmark_returns.len()],
        ));
    }
    if !(annualization > 0.0) {
        return Err(Error::Config(
            "annualization factor must be positive".into(),
        ));
    }
    if daily_returns
        .iter()
        .chain(benchmark_returns)
        .any(|r| !r.is_finite())
    {
        return Err(Error::Data("returns contain non-finite values".into()));
    }
    let equity = equity_curve(daily_returns);
    let growth = *equity.last().unwrap();
    let years = n as f64 / annualization;
    let arr = if growth > 0.0 {
        growth.powf(1.0 / years) - 1.0
    } else {
        -1.0
    };
    let avol = annualization.sqrt() * std_dev(daily_returns);
    let mdd = max_drawdown(&equity);
    let ratio = |num: f64, den: f64| (den != 0.0).then(|| num / den);
    let active: Vec<f64> = daily_returns
        .iter()
        .zip(benchmark_returns)
        .map(|(p, b)| p - b)
        .collect();
    let ir = ratio(mean(&active), std_dev(&active)).map(|v| v * annualization.sqrt());
    Ok(FinancialMetrics {
        arr,
        avol,
        mdd,
        asr: ratio(arr, avol),
        cr: ratio(arr, mdd.abs()),
        ir,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestReport {
    #[serde(flatten)]
    pub metrics: FinancialMetrics,
    /// Portfolio value after each day, starting from 1.0.
    pub equity_curve: Vec<f64>,
    pub daily_returns: Vec<f64>,
    /// Stocks held each day, best prediction first.
    #[serde(skip)]
    pub holdings: Vec<Vec<usize>>,
}

/// Indices of the `k` largest values; ties go to the lower index.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Each day, hold an equal-weight portfolio of the `top_k` stocks with the
/// highest predicted return for that day and earn their mean realized return.
/// Inputs are `[days × stocks]`.
pub fn buy_hold_sell_backtest(
    predicted: &Tensor,
    realized: &Tensor,
    top_k_count: usize,
    benchmark_returns: &[f64],
    annualization: f64,
) -> Result<BacktestReport> {
    if predicted.ndim() != 2 || predicted.shape() != realized.shape() {
        return Err(Error::shape(
            "backtest",
            predicted.shape(),
            realized.shape(),
        ));
    }
    let (days, stocks) = (predicted.rows(), predicted.cols());
    if top_k_count == 0 || top_k_count > stocks {
        return Err(Error::Config(format!(
            "top_k must lie in 1..={stocks}, got {top_k_count}"
        )));
    }
    if !predicted.is_finite() || !realized.is_finite() {
        return Err(Error::Data("returns contain non-finite values".into()));
    }
    if benchmark_returns.len() != days {
        return Err(Error::shape(
            "backtest benchmark",
            &[days],
            &[benchmark_returns.len()],
        ));
    }
    let mut holdings = Vec::with_capacity(days);
    let mut daily = Vec::with_capacity(days);
    for d in 0..days {
        let chosen = top_k(predicted.row(d), top_k_count);
        let r = realized.row(d);
        daily.push(chosen.iter().map(|&s| r[s]).sum::<f64>() / top_k_count as f64);
        holdings.push(chosen);
    }
    let metrics = financial_metrics(&daily, benchmark_returns, annualization)?;
    Ok(BacktestReport {
        metrics,
        equity_curve: equity_curve(&daily)[1..].to_vec(),
        daily_returns: daily,
        holdings,
    })
}

/// `day,daily_return,equity`, day 0 being the starting value.
pub fn write_equity_csv(report: &BacktestReport, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["day", "daily_return", "equity"])?;
    w.write_record(["0", "", "1"])?;
    for (d, (r, e)) in report
        .daily_returns
        .iter()
        .zip(&report.equity_curve)
        .enumerate()
    {
        w.write_record([(d + 1).to_string(), format!("{r:e}"), format!("{e:e}")])?;
    }
    w.flush()?;
    Ok(())
}
