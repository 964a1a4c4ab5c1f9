//! Least squares, unit-root and cointegration tests.

mod adf;
mod critical;
mod ols;

pub use adf::{adf_test, max_auto_lag, AdfResult, LagSpec, RegressionKind};
pub use critical::{adf_critical_value, eg_critical_value, Significance};
pub use ols::{ols, OlsFit, RANK_TOL};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::TimeSeriesFrame;
use crate::error::{Error, Result};
use crate::parallel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EgResult {
    /// Slope of `x` on `y`.
    pub beta: f64,
    pub intercept: f64,
    pub residual_adf: AdfResult,
    pub critical_value: f64,
    pub cointegrated: bool,
    pub significance_level: Significance,
}

/// Minimum series length accepted by [`eg_test`].
pub const EG_MIN_LEN: usize = 21;

/// Engle-Granger two-step test: regress `x` on `y` with an intercept, then run
/// an auto-lag unit-root test without deterministic terms on the residuals.
pub fn eg_test(x: &[f64], y: &[f64], significance: Significance) -> Result<EgResult> {
    if x.len() != y.len() {
        return Err(Error::shape("eg_test", &[x.len()], &[y.len()]));
    }
    if x.len() < EG_MIN_LEN {
        return Err(Error::TooShort {
            needed: EG_MIN_LEN - 1,
            got: x.len(),
        });
    }
    let n = x.len();
    let mut design = DMatrix::zeros(n, 2);
    for (t, &v) in y.iter().enumerate() {
        design[(t, 0)] = 1.0;
        design[(t, 1)] = v;
    }
    let target = DVector::from_column_slice(x);
    let fit = ols::ols_matrix(&design, &target)?;
    let mean = x.iter().sum::<f64>() / n as f64;
    let tss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if fit.rss <= 1e-20 * tss.max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate(
            "x is an exact linear function of y; residuals vanish".into(),
        ));
    }
    let residual_adf = adf_test(&fit.residuals, RegressionKind::None, LagSpec::Auto)?;
    let critical_value = eg_critical_value(residual_adf.n_obs, significance);
    Ok(EgResult {
        beta: fit.coefficients[1],
        intercept: fit.coefficients[0],
        cointegrated: residual_adf.statistic < critical_value,
        residual_adf,
        critical_value,
        significance_level: significance,
    })
}

/// Number of ordered channel pairs `(i, j)`, `i ≠ j`, that test as cointegrated.
pub fn eg_pair_count(frame: &TimeSeriesFrame, significance: Significance) -> Result<usize> {
    let c = frame.channels();
    if c < 2 {
        return Err(Error::Config(
            "pair counting needs at least two channels".into(),
        ));
    }
    let columns: Vec<Vec<f64>> = (0..c).map(|i| frame.column(i)).collect();
    let pairs: Vec<(usize, usize)> = (0..c)
        .flat_map(|i| (0..c).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let verdicts: Vec<Result<bool>> = parallel::pool().install(|| {
        pairs
            .par_iter()
            .map(|&(i, j)| eg_test(&columns[i], &columns[j], significance).map(|r| r.cointegrated))
            .collect()
    });
    let mut count = 0;
    for v in verdicts {
        count += usize::from(v?);
    }
    Ok(count)
}
