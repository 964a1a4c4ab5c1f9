//! Response-surface critical values, `c(T) = b0 + b1/T + b2/T² + b3/T³`.
//!
//! Coefficients are MacKinnon's 2010 tables ("Critical Values for
//! Cointegration Tests", Queen's Economics Department Working Paper 1227):
//! one regressor for the unit-root test, two variables with a constant for
//! Engle-Granger residuals.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::RegressionKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Significance {
    #[serde(rename = "0.01")]
    OnePercent,
    #[serde(rename = "0.05")]
    FivePercent,
    #[serde(rename = "0.10")]
    TenPercent,
}

impl Significance {
    pub const ALL: [Significance; 3] = [
        Significance::OnePercent,
        Significance::FivePercent,
        Significance::TenPercent,
    ];

    pub fn level(self) -> f64 {
        match self {
            Significance::OnePercent => 0.01,
            Significance::FivePercent => 0.05,
            Significance::TenPercent => 0.10,
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn from_level(level: f64) -> Result<Self> {
        Significance::ALL
            .into_iter()
            .find(|s| (s.level() - level).abs() < 1e-12)
            .ok_or_else(|| {
                Error::Config(format!(
                    "significance must be 0.01, 0.05 or 0.10, got {level}"
                ))
            })
    }
}

impl fmt::Display for Significance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.level())
    }
}

impl FromStr for Significance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let level = match s.strip_suffix('%') {
            Some(p) => p.trim().parse::<f64>().map(|v| v / 100.0),
            None => s.parse::<f64>(),
        }
        .map_err(|_| Error::Config(format!("cannot parse significance {s:?}")))?;
        Significance::from_level(level)
    }
}

type Surface = [[f64; 4]; 3];

const ADF_C: Surface = [
    [-3.43035, -6.5393, -16.786, -79.433],
    [-2.86154, -2.8903, -4.234, -40.040],
    [-2.56677, -1.5384, -2.809, 0.0],
];
const ADF_CT: Surface = [
    [-3.95877, -9.0531, -28.428, -134.155],
    [-3.41049, -4.3904, -9.036, -45.374],
    [-3.12705, -2.5856, -3.925, -22.380],
];
const ADF_N: Surface = [
    [-2.56574, -2.2358, -3.627, 0.0],
    [-1.94100, -0.2686, -3.365, 31.223],
    [-1.61682, 0.2656, -2.714, 25.364],
];
const EG_TWO_VARIABLES: Surface = [
    [-3.89644, -10.9519, -33.527, 0.0],
    [-3.33613, -6.1101, -6.823, 0.0],
    [-3.04445, -4.2412, -2.720, 0.0],
];

fn evaluate(surface: &Surface, n_obs: usize, level: Significance) -> f64 {
    let b = surface[level.index()];
    let t = 1.0 / n_obs as f64;
    b[0] + t * (b[1] + t * (b[2] + t * b[3]))
}

pub fn adf_critical_value(kind: RegressionKind, n_obs: usize, level: Significance) -> f64 {
    let surface = match kind {
        RegressionKind::Constant => &ADF_C,
        RegressionKind::ConstantAndTrend => &ADF_CT,
        RegressionKind::None => &ADF_N,
    };
    evaluate(surface, n_obs, level)
}

/// Critical value for the residual unit-root statistic of a two-variable
/// cointegrating regression with an intercept.
pub fn eg_critical_value(n_obs: usize, level: Significance) -> f64 {
    evaluate(&EG_TWO_VARIABLES, n_obs, level)
}
