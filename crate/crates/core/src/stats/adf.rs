use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::critical::{adf_critical_value, Significance};
use super::ols::ols_matrix;
use crate::error::{Error, Result};

/// Deterministic terms in the test regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionKind {
    Constant,
    ConstantAndTrend,
    None,
}

impl RegressionKind {
    fn deterministic_terms(self) -> usize {
        match self {
            RegressionKind::Constant => 1,
            RegressionKind::ConstantAndTrend => 2,
            RegressionKind::None => 0,
        }
    }
}

impl fmt::Display for RegressionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegressionKind::Constant => "constant",
            RegressionKind::ConstantAndTrend => "constant_and_trend",
            RegressionKind::None => "none",
        })
    }
}

impl FromStr for RegressionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "c" | "constant" => Ok(RegressionKind::Constant),
            "ct" | "constant_and_trend" => Ok(RegressionKind::ConstantAndTrend),
            "n" | "nc" | "none" => Ok(RegressionKind::None),
            _ => Err(Error::Config(format!(
                "regression kind must be constant, constant_and_trend or none, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagSpec {
    Fixed(usize),
    /// Minimum AIC over `0..=max_auto_lag(n)`.
    Auto,
}

impl FromStr for LagSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(LagSpec::Auto);
        }
        s.parse()
            .map(LagSpec::Fixed)
            .map_err(|_| Error::Config(format!("lags must be a count or \"auto\", got {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdfResult {
    /// t-value of the lagged level coefficient.
    pub statistic: f64,
    pub gamma_estimate: f64,
    pub lag_used: usize,
    pub regression_kind: RegressionKind,
    pub n_obs: usize,
}

impl AdfResult {
    pub fn critical_value(&self, level: Significance) -> f64 {
        adf_critical_value(self.regression_kind, self.n_obs, level)
    }

    pub fn rejects_unit_root(&self, level: Significance) -> bool {
        self.statistic < self.critical_value(level)
    }
}

/// `⌊12 · (n / 100)^{1/4}⌋`.
pub fn max_auto_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Design for `Δx_t` on `[x_{t-1}, deterministic terms, Δx_{t-1} .. Δx_{t-lags}]`
/// over the rows `t = first..n-1` of the differenced series.
fn design(
    x: &[f64],
    diffs: &[f64],
    kind: RegressionKind,
    lags: usize,
    first: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let rows = diffs.len() - first;
    let cols = 1 + kind.deterministic_terms() + lags;
    let mut z = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        let t = first + r;
        z[(r, 0)] = x[t];
        let mut c = 1;
        if kind != RegressionKind::None {
            z[(r, c)] = 1.0;
            c += 1;
        }
        if kind == RegressionKind::ConstantAndTrend {
            z[(r, c)] = (t + 1) as f64;
            c += 1;
        }
        for l in 1..=lags {
            z[(r, c)] = diffs[t - l];
            c += 1;
        }
    }
    (z, DVector::from_column_slice(&diffs[first..]))
}

/// Lag order with the lowest AIC, every candidate fitted on the same rows.
/// Uses leading blocks of one Gram matrix, so each candidate costs a small
/// Cholesky factorization.
fn select_lag(x: &[f64], diffs: &[f64], kind: RegressionKind, max_lag: usize) -> usize {
    let (z, y) = design(x, diffs, kind, max_lag, max_lag);
    let m = z.nrows() as f64;
    let gram = z.transpose() * &z;
    let zty = z.transpose() * &y;
    let yy = y.norm_squared();
    let base = 1 + kind.deterministic_terms();
    let mut best = (f64::INFINITY, 0);
    for p in 0..=max_lag {
        let k = base + p;
        let g = gram.view((0, 0), (k, k)).into_owned();
        let Some(chol) = g.cholesky() else { continue };
        let h = zty.rows(0, k).into_owned();
        let b = chol.solve(&h);
        let rss = (yy - b.dot(&h)).max(f64::MIN_POSITIVE);
        let aic = m * (rss / m).ln() + 2.0 * k as f64;
        if aic < best.0 {
            best = (aic, p);
        }
    }
    best.1
}

/// Augmented Dickey-Fuller test of a unit root in `series`.
pub fn adf_test(series: &[f64], kind: RegressionKind, lags: LagSpec) -> Result<AdfResult> {
    let n = series.len();
    let base = 1 + kind.deterministic_terms();
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("series contains non-finite values".into()));
    }
    let lags_wanted = match lags {
        LagSpec::Fixed(p) => p,
        LagSpec::Auto => 0,
    };
    // Need at least two residual degrees of freedom beyond the regressors.
    let needed = lags_wanted + base + 3;
    if n <= needed {
        return Err(Error::TooShort { needed, got: n });
    }
    let diffs: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.iter().all(|&d| d == 0.0) {
        return Err(Error::Degenerate("constant series".into()));
    }
    let lag = match lags {
        LagSpec::Fixed(p) => p,
        LagSpec::Auto => {
            // Largest lag that still leaves room for the regression on the common sample.
            let cap = (diffs.len().saturating_sub(base + 2)) / 2;
            select_lag(series, &diffs, kind, max_auto_lag(n).min(cap))
        }
    };
    let (z, y) = design(series, &diffs, kind, lag, lag);
    let fit = ols_matrix(&z, &y)?;
    let tss = y.norm_squared();
    if fit.rss <= 1e-20 * tss || fit.rss == 0.0 {
        return Err(Error::Degenerate(
            "test regression fits exactly; the statistic is undefined".into(),
        ));
    }
    let statistic = fit.coefficients[0] / fit.standard_errors[0];
    if !statistic.is_finite() {
        return Err(Error::Degenerate("non-finite test statistic".into()));
    }
    Ok(AdfResult {
        statistic,
        gamma_estimate: fit.coefficients[0],
        lag_used: lag,
        regression_kind: kind,
        n_obs: y.len(),
    })
}
