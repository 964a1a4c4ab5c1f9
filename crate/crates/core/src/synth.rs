//! Seeded generators for random walks, cointegrated series and smooth
//! fixtures, plus the raw and differenced patch-score Monte Carlo.
//!
//! All randomness comes from [`stream_rng`]: ChaCha8 keyed by the user seed,
//! with a separate stream number per independent component. Gaussian draws
//! use `rand_distr::StandardNormal` (ziggurat) scaled by sigma.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::TimeSeriesFrame;
use crate::error::{Error, Result};
use crate::parallel;
use crate::stats::{adf_test, LagSpec, RegressionKind};

/// Stream numbers used by the generators below; distinct streams of one seed
/// are independent sequences.
pub mod streams {
    pub const WALK: u64 = 0;
    pub const NOISE: u64 = 1;
    pub const SHAPE: u64 = 2;
    /// Monte-Carlo chunk `k` uses stream `CHUNK_BASE + k`.
    pub const CHUNK_BASE: u64 = 1 << 32;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut impl Rng, sigma: f64) -> f64 {
    sigma * rng.sample::<f64, _>(StandardNormal)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "sigma must be positive, got {sigma}"
        )))
    }
}

fn walk_from(rng: &mut impl Rng, len: usize, sigma: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut x = 0.0;
    out.push(x);
    for _ in 1..len {
        x += normal(rng, sigma);
        out.push(x);
    }
    out
}

/// `X_0 = 0`, `X_t = X_{t-1} + u_t`, `u_t ~ N(0, σ²)`; element `t` is `X_t`.
pub fn gen_random_walk(len: usize, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    check_len(len)?;
    check_sigma(sigma)?;
    Ok(walk_from(&mut stream_rng(seed, streams::WALK), len, sigma))
}

pub fn gen_white_noise(len: usize, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    check_len(len)?;
    check_sigma(sigma)?;
    let mut rng = stream_rng(seed, streams::NOISE);
    Ok((0..len).map(|_| normal(&mut rng, sigma)).collect())
}

fn check_len(len: usize) -> Result<()> {
    if len < 2 {
        return Err(Error::Config(format!(
            "series length must be at least 2, got {len}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CointegratedPair {
    pub x: Vec<f64>,
    /// Random walk.
    pub y: Vec<f64>,
    /// The stationary deviation `η` with `x = β·y + η`.
    pub noise: Vec<f64>,
}

pub fn gen_cointegrated_pair(
    len: usize,
    beta: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<CointegratedPair> {
    let y = gen_random_walk(len, 1.0, seed)?;
    let noise = gen_white_noise(len, noise_sigma, seed)?;
    let x = y.iter().zip(&noise).map(|(y, e)| beta * y + e).collect();
    Ok(CointegratedPair { x, y, noise })
}

/// Two independent unit-variance random walks from streams 0 and 1 of `seed`.
pub fn gen_independent_walks(len: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if len < 2 {
        return Err(Error::TooShort {
            needed: 1,
            got: len,
        });
    }
    let x = walk_from(&mut stream_rng(seed, streams::WALK), len, 1.0);
    let y = walk_from(&mut stream_rng(seed, streams::NOISE), len, 1.0);
    Ok((x, y))
}

/// Loadings `β_c` and offsets `a_c` of channels sharing one random-walk trend.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharedTrend {
    pub loadings: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl SharedTrend {
    /// `β_c ∈ [0.5, 1.5]`, `a_c ∈ [-2, 2]`, from stream 2 of `seed`.
    pub fn random(channels: usize, seed: u64) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Config("need at least one channel".into()));
        }
        let mut shape = stream_rng(seed, streams::SHAPE);
        let (loadings, offsets) = (0..channels)
            .map(|_| (shape.random_range(0.5..1.5), shape.random_range(-2.0..2.0)))
            .unzip();
        Ok(SharedTrend { loadings, offsets })
    }

    /// Channel `c` is `β_c · W_t + a_c + e_{c,t}`; the walk `W` uses stream 0
    /// of `seed` and the i.i.d. `N(0, noise_sigma²)` noise stream 1.
    pub fn render(&self, len: usize, noise_sigma: f64, seed: u64) -> Result<TimeSeriesFrame> {
        let walk = gen_random_walk(len, 1.0, seed)?;
        check_sigma(noise_sigma)?;
        let mut noise = stream_rng(seed, streams::NOISE);
        let columns: Vec<Vec<f64>> = self
            .loadings
            .iter()
            .zip(&self.offsets)
            .map(|(beta, offset)| {
                walk.iter()
                    .map(|w| beta * w + offset + normal(&mut noise, noise_sigma))
                    .collect()
            })
            .collect();
        TimeSeriesFrame::from_columns(&columns, None)
    }
}

/// `C` channels sharing one random-walk trend, with loadings and the path
/// both drawn from `seed` (see [`SharedTrend`]).
pub fn gen_cointegrated_channels(
    len: usize,
    channels: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<TimeSeriesFrame> {
    SharedTrend::random(channels, seed)?.render(len, noise_sigma, seed)
}

/// Closed-form `E[p_i · p_j]` for raw random-walk patches of length `S`
/// starting after time `t + i` and `t + j`:
/// `σ² (S·min(i, j) + (S² + 2St + S) / 2)`.
pub fn spurious_score_expectation(s: usize, t: usize, i: usize, j: usize, sigma: f64) -> f64 {
    let (s, t, m) = (s as f64, t as f64, i.min(j) as f64);
    sigma * sigma * (s * m + (s * s + 2.0 * s * t + s) / 2.0)
}

/// The same expectation as a sum of covariances, `Σ_{s=1..S} σ² min(t+i+s, t+j+s)`.
pub fn spurious_score_direct(s: usize, t: usize, i: usize, j: usize, sigma: f64) -> f64 {
    (1..=s)
        .map(|k| sigma * sigma * (t + i + k).min(t + j + k) as f64)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

/// Trials per independent random stream in the Monte-Carlo drivers.
pub const MC_CHUNK: usize = 1024;

pub const MIN_TRIALS: usize = 1000;

/// Mean of `f(rng)` over `trials` draws, split into chunks of [`MC_CHUNK`]
/// with one ChaCha stream each. Chunk sums are combined in chunk order, so the
/// result does not depend on the worker count.
pub fn monte_carlo_mean<F>(trials: usize, seed: u64, f: F) -> MonteCarloEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let chunks = trials.div_ceil(MC_CHUNK);
    let partial: Vec<(Compensated, Compensated)> = parallel::pool().install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream_rng(seed, streams::CHUNK_BASE + k as u64);
                let n = MC_CHUNK.min(trials - k * MC_CHUNK);
                let (mut s1, mut s2) = (Compensated::default(), Compensated::default());
                for _ in 0..n {
                    let v = f(&mut rng);
                    s1.add(v);
                    s2.add(v * v);
                }
                (s1, s2)
            })
            .collect()
    });
    let (mut s1, mut s2) = (Compensated::default(), Compensated::default());
    for (a, b) in partial {
        s1.add(a.value());
        s2.add(b.value());
    }
    let n = trials as f64;
    let mean = s1.value() / n;
    let var = if trials > 1 {
        ((s2.value() - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    MonteCarloEstimate {
        mean,
        std_error: (var / n).sqrt(),
        trials,
    }
}

/// Empirical mean of `p_i · p_j`, where `p_i = (X_{t+i+1}, ..., X_{t+i+S})` on
/// a fresh random walk each trial. With `detrended`, each patch is replaced by
/// its first differences `X_{t+i+s} - X_{t+i+s-1}`, `s = 1..S`.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_patch_score(
    s: usize,
    t: usize,
    i: usize,
    j: usize,
    sigma: f64,
    detrended: bool,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    check_sigma(sigma)?;
    if s == 0 {
        return Err(Error::Config("patch length must be at least 1".into()));
    }
    if trials < MIN_TRIALS {
        return Err(Error::Config(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let len = t + i.max(j) + s + 1;
    Ok(monte_carlo_mean(trials, seed, |rng| {
        let x = walk_from(rng, len, sigma);
        let value = |start: usize, k: usize| {
            let idx = start + k;
            if detrended {
                x[idx] - x[idx - 1]
            } else {
                x[idx]
            }
        };
        (1..=s).map(|k| value(t + i, k) * value(t + j, k)).sum()
    }))
}

/// Per-channel parameters of a trend-plus-two-sinusoids series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinusoidChannel {
    pub intercept: f64,
    pub slope: f64,
    pub amplitudes: [f64; 2],
    pub periods: [f64; 2],
    pub phases: [f64; 2],
}

impl SinusoidChannel {
    pub fn value(&self, t: usize) -> f64 {
        let t = t as f64;
        let tau = std::f64::consts::TAU;
        self.intercept
            + self.slope * t
            + (0..2)
                .map(|k| self.amplitudes[k] * (tau * t / self.periods[k] + self.phases[k]).sin())
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendSinusoid {
    pub channels: Vec<SinusoidChannel>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl TrendSinusoid {
    pub fn random(channels: usize, noise_sigma: f64, seed: u64) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Config("need at least one channel".into()));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise sigma must be >= 0, got {noise_sigma}"
            )));
        }
        let mut rng = stream_rng(seed, streams::SHAPE);
        let channels = (0..channels)
            .map(|_| SinusoidChannel {
                intercept: rng.random_range(-1.0..1.0),
                slope: rng.random_range(-0.02..0.02),
                amplitudes: [rng.random_range(0.5..1.5), rng.random_range(0.1..0.5)],
                periods: [rng.random_range(8.0..24.0), rng.random_range(3.0..7.0)],
                phases: [
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(0.0..std::f64::consts::TAU),
                ],
            })
            .collect();
        Ok(TrendSinusoid {
            channels,
            noise_sigma,
            seed,
        })
    }

    pub fn render(&self, len: usize) -> Result<TimeSeriesFrame> {
        check_len(len)?;
        let mut rng = stream_rng(self.seed, streams::NOISE);
        let columns: Vec<Vec<f64>> = self
            .channels
            .iter()
            .map(|ch| {
                (0..len)
                    .map(|t| {
                        let e = if self.noise_sigma > 0.0 {
                            normal(&mut rng, self.noise_sigma)
                        } else {
                            0.0
                        };
                        ch.value(t) + e
                    })
                    .collect()
            })
            .collect();
        TimeSeriesFrame::from_columns(&columns, None)
    }
}

pub const TREND_SINUSOID_NOISE: f64 = 0.05;

/// Trend-plus-sinusoid frame with small Gaussian noise.
pub fn gen_trend_sinusoid(len: usize, channels: usize, seed: u64) -> Result<TimeSeriesFrame> {
    TrendSinusoid::random(channels, TREND_SINUSOID_NOISE, seed)?.render(len)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    RandomWalk,
    WhiteNoise,
    CointegratedPair,
    CointegratedChannels,
    TrendSinusoid,
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorKind::RandomWalk => "random_walk",
            GeneratorKind::WhiteNoise => "white_noise",
            GeneratorKind::CointegratedPair => "cointegrated_pair",
            GeneratorKind::CointegratedChannels => "cointegrated_channels",
            GeneratorKind::TrendSinusoid => "trend_sinusoid",
        })
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "random_walk" => Ok(GeneratorKind::RandomWalk),
            "white_noise" => Ok(GeneratorKind::WhiteNoise),
            "cointegrated_pair" => Ok(GeneratorKind::CointegratedPair),
            "cointegrated_channels" => Ok(GeneratorKind::CointegratedChannels),
            "trend_sinusoid" => Ok(GeneratorKind::TrendSinusoid),
            _ => Err(Error::Config(format!(
                "unknown generator {s:?} (random_walk, white_noise, cointegrated_pair, cointegrated_channels, trend_sinusoid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub len: usize,
    pub sigma: f64,
    /// Slope of the cointegrated pair.
    pub beta: f64,
    /// Channel count for trend_sinusoid and cointegrated_channels.
    pub channels: usize,
    pub seed: u64,
}

/// Frame for a generator spec. Single-series kinds give one channel named
/// after the kind; the pair gives channels `x` and `y`.
pub fn generate(spec: &GeneratorSpec) -> Result<TimeSeriesFrame> {
    let one = |v: Vec<f64>| TimeSeriesFrame::from_columns(&[v], Some(vec![spec.kind.to_string()]));
    match spec.kind {
        GeneratorKind::RandomWalk => one(gen_random_walk(spec.len, spec.sigma, spec.seed)?),
        GeneratorKind::WhiteNoise => one(gen_white_noise(spec.len, spec.sigma, spec.seed)?),
        GeneratorKind::CointegratedPair => {
            let p = gen_cointegrated_pair(spec.len, spec.beta, spec.sigma, spec.seed)?;
            TimeSeriesFrame::from_columns(&[p.x, p.y], Some(vec!["x".into(), "y".into()]))
        }
        GeneratorKind::CointegratedChannels => {
            gen_cointegrated_channels(spec.len, spec.channels, spec.sigma, spec.seed)
        }
        GeneratorKind::TrendSinusoid => gen_trend_sinusoid(spec.len, spec.channels, spec.seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdfCalibration {
    pub mean: f64,
    /// Sample standard deviation across replications.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub statistics: Vec<f64>,
}

/// ADF statistics of `reps` unit-variance series of one kind (random_walk or
/// white_noise). Replication `r` uses seed `seed + r`; the statistics are
/// collected in replication order.
pub fn adf_calibration(
    kind: GeneratorKind,
    len: usize,
    reps: usize,
    seed: u64,
    regression: RegressionKind,
    lags: LagSpec,
) -> Result<AdfCalibration> {
    if reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    let series = match kind {
        GeneratorKind::RandomWalk => gen_random_walk,
        GeneratorKind::WhiteNoise => gen_white_noise,
        other => {
            return Err(Error::Config(format!(
                "ADF calibration needs random_walk or white_noise, got {other}"
            )))
        }
    };
    let statistics = parallel::pool().install(|| {
        (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                Ok(adf_test(&series(len, 1.0, seed.wrapping_add(r))?, regression, lags)?.statistic)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let n = reps as f64;
    let mean = statistics.iter().sum::<f64>() / n;
    let std = if reps > 1 {
        (statistics.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(AdfCalibration {
        mean,
        std,
        min: statistics.iter().copied().fold(f64::INFINITY, f64::min),
        max: statistics.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        statistics,
    })
}
