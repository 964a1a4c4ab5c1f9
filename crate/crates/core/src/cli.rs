//! Command-line front end.
//!
//! Every command writes exactly one JSON document, to stdout or to `--out`,
//! and only after all work has succeeded. Tables (synthetic series, training
//! logs, equity curves) are CSV files. Exit codes: 0 success, 1 runtime
//! failure, 2 invalid configuration or arguments.
//!
//! `train`, `eval` and `gradcheck` read a flat `key = value` file given by
//! `--config`; any configuration key can also be overridden on the command
//! line as `--key value` (dashes and underscores are interchangeable).

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::data::{self, windows, Sample, SplitSpec, Standardizer, TimeSeriesFrame};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricsAccumulator, DEFAULT_TOP_K, TRADING_DAYS};
use crate::model::{checkpoint, default_detrend_kernel, ModelConfig, TimeBridge};
use crate::stats::{adf_test, eg_pair_count, eg_test, LagSpec, RegressionKind, Significance};
use crate::synth::{self, GeneratorKind, GeneratorSpec};
use crate::train::{self, TrainConfig};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Model, training and data settings for `train`, `eval` and `gradcheck`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub split: SplitSpec,
    /// Step between training windows.
    pub stride: usize,
    explicit: BTreeSet<String>,
}

const RUN_KEYS: [&str; 5] = ["dataset", "checkpoint", "out_dir", "split", "stride"];

impl Default for RunConfig {
    fn default() -> Self {
        Self::with_model(ModelConfig::new(96, 96, 1, 16))
    }
}

impl RunConfig {
    pub fn with_model(model: ModelConfig) -> Self {
        RunConfig {
            model,
            train: TrainConfig::default(),
            dataset: None,
            checkpoint: None,
            out_dir: None,
            split: SplitSpec::Ratios(0.7, 0.1, 0.2),
            stride: 1,
            explicit: BTreeSet::new(),
        }
    }

    pub fn is_key(key: &str) -> bool {
        ModelConfig::KEYS.contains(&key)
            || TrainConfig::KEYS.contains(&key)
            || RUN_KEYS.contains(&key)
    }

    /// Whether `key` was set by a file or an override rather than defaulted.
    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "dataset" => self.dataset = Some(PathBuf::from(v)),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(v)),
            "out_dir" => self.out_dir = Some(PathBuf::from(v)),
            "split" => self.split = parse_split(v)?,
            "stride" => self.stride = crate::model::parse_num(key, v)?,
            k if ModelConfig::KEYS.contains(&k) => self.model.set(k, v)?,
            k if TrainConfig::KEYS.contains(&k) => self.train.set(k, v)?,
            _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
        self.explicit.insert(key.to_string());
        Ok(())
    }

    /// Applies a `key = value` file. `#` starts a comment; a key may appear once.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `key = value`, got {line:?}",
                    n + 1
                ))
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!(
                    "line {}: key {key:?} given twice",
                    n + 1
                )));
            }
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip_prefix(&e))))?;
        }
        Ok(())
    }

    /// When `patch_len` or `input_len` was set, recomputes the values that
    /// default from them (detrend kernel, downsampled patch count) unless
    /// those were set too.
    pub fn fill_derived(&mut self) {
        if !(self.is_explicit("patch_len") || self.is_explicit("input_len")) {
            return;
        }
        if !self.is_explicit("detrend_kernel") {
            self.model.detrend_kernel = default_detrend_kernel(self.model.patch_len);
        }
        if !self.is_explicit("downsampled_patches") && self.model.patch_len > 0 {
            self.model.downsampled_patches = self.model.num_patches();
        }
    }

    pub fn load(path: &Path, base: RunConfig) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("config: cannot read {}: {e}", path.display())))?;
        let mut cfg = base;
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Every key with its resolved value; `apply_text` on this reproduces the config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        for (k, v) in [
            ("dataset", path(&self.dataset)),
            ("checkpoint", path(&self.checkpoint)),
            ("out_dir", path(&self.out_dir)),
        ] {
            if let Some(v) = v {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        let split = match self.split {
            SplitSpec::Lengths(a, b, c) => format!("{a},{b},{c}"),
            SplitSpec::Ratios(a, b, c) => format!("{a:?},{b:?},{c:?}"),
        };
        out.push_str(&format!("split = {split}\nstride = {}\n", self.stride));
        for (k, v) in self
            .model
            .to_pairs()
            .into_iter()
            .chain(self.train.to_pairs())
        {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

/// `a,b,c` as row counts, or as fractions when any part has a decimal point.
fn parse_split(v: &str) -> Result<SplitSpec> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    let bad = || {
        Error::Config(format!(
            "split: expected three comma-separated values, got {v:?}"
        ))
    };
    if parts.len() != 3 {
        return Err(bad());
    }
    if parts.iter().any(|p| p.contains('.')) {
        let f: Vec<f64> = parts
            .iter()
            .map(|p| p.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        Ok(SplitSpec::Ratios(f[0], f[1], f[2]))
    } else {
        let n: Vec<usize> = parts
            .iter()
            .map(|p| p.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        Ok(SplitSpec::Lengths(n[0], n[1], n[2]))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "timebridge",
    version,
    about = "TimeBridge forecaster and time-series statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (a directory for `train`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model; writes checkpoint, log CSV and config snapshot.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Forecast metrics of a checkpoint on one split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Split to score: train, val or test.
        #[arg(long, default_value = "test")]
        subset: String,
    },
    /// ADF statistics of simulated series, or of each column of a CSV.
    Adf {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "random_walk")]
        kind: String,
        #[arg(long = "T", default_value_t = 10_000)]
        len: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// c, ct or n.
        #[arg(long, default_value = "c")]
        regression: String,
        /// Lag count or `auto`.
        #[arg(long, default_value = "0")]
        lags: String,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Engle-Granger test on two CSV columns or on a simulated pair.
    Eg {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        x: Option<String>,
        #[arg(long)]
        y: Option<String>,
        /// Count cointegrated ordered pairs over all CSV columns.
        #[arg(long)]
        all_pairs: bool,
        #[arg(long = "T", default_value_t = 5000)]
        len: usize,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.5)]
        noise: f64,
        /// Simulate two independent random walks instead of a cointegrated pair.
        #[arg(long)]
        independent: bool,
        #[arg(long, default_value = "5%")]
        significance: String,
    },
    /// Generate a synthetic dataset as CSV.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "random_walk")]
        kind: String,
        #[arg(long, default_value_t = 1000)]
        len: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, default_value_t = 2)]
        channels: usize,
    },
    /// Monte-Carlo check of raw and differenced random-walk patch scores.
    Prop1 {
        #[command(flatten)]
        common: Common,
        #[arg(long = "S", default_value_t = 8)]
        patch_len: usize,
        #[arg(long, default_value_t = 100)]
        t: usize,
        #[arg(long, default_value_t = 0)]
        i: usize,
        #[arg(long, default_value_t = 16)]
        j: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 50_000)]
        trials: usize,
    },
    /// Finite-difference check of every model parameter gradient.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Daily top-k long-only backtest from predicted and realized returns.
    Backtest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        realized: PathBuf,
        #[arg(long)]
        benchmark: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
        #[arg(long, default_value_t = TRADING_DAYS)]
        annualization: f64,
        /// Equity curve CSV.
        #[arg(long)]
        equity_out: Option<PathBuf>,
    },
}

/// Runs the command line and returns the process exit code.
pub fn run(args: Vec<String>) -> i32 {
    let (args, overrides) = match split_overrides(args) {
        Ok(v) => v,
        Err(e) => return report(e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, &overrides) {
        Ok(code) => code,
        Err(e) => report(e),
    }
}

fn report(e: Error) -> i32 {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// Pulls `--key value` / `--key=value` pairs naming configuration keys out of
/// the arguments of config-driven commands.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>)> {
    let configured = args
        .get(1)
        .is_some_and(|c| matches!(c.as_str(), "train" | "eval" | "gradcheck"));
    if !configured {
        return Ok((args, Vec::new()));
    }
    let mut kept = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(name) = arg.strip_prefix("--") else {
            kept.push(arg);
            continue;
        };
        let (name, inline) = match name.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (name.to_string(), None),
        };
        let key = name.replace('-', "_");
        // Flags the commands define themselves.
        if matches!(key.as_str(), "seed" | "checkpoint" | "config") || !RunConfig::is_key(&key) {
            kept.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| Error::Config(format!("{key}: missing value after --{name}")))?,
        };
        overrides.push((key, value));
    }
    Ok((kept, overrides))
}

fn resolve(base: RunConfig, common: &Common, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p, base)?,
        None => base,
    };
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    if let Some(seed) = common.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    cfg.fill_derived();
    Ok(cfg)
}

fn dispatch(command: Command, overrides: &[(String, String)]) -> Result<i32> {
    match command {
        Command::Train { common } => {
            let mut cfg = resolve(RunConfig::default(), &common, overrides)?;
            if let Some(out) = &common.out {
                cfg.out_dir = Some(out.clone());
            }
            let summary = cmd_train(&cfg)?;
            emit(&summary, None)?;
        }
        Command::Eval {
            common,
            checkpoint,
            subset,
        } => {
            let mut cfg = resolve(RunConfig::default(), &common, overrides)?;
            if checkpoint.is_some() {
                cfg.checkpoint = checkpoint;
            }
            let which = match subset.as_str() {
                "train" => 0,
                "val" => 1,
                "test" => 2,
                other => {
                    return Err(Error::Config(format!(
                        "subset: expected train, val or test, got {other:?}"
                    )))
                }
            };
            let report = cmd_eval(&cfg, which)?;
            if report.raw.mape_excluded > 0 {
                eprintln!(
                    "note: {} zero targets left out of MAPE",
                    report.raw.mape_excluded
                );
            }
            emit(
                &json!({ "subset": subset, "raw": report.raw, "standardized": report.standardized }),
                common.out.as_deref(),
            )?;
        }
        Command::Adf {
            common,
            kind,
            len,
            reps,
            regression,
            lags,
            input,
        } => {
            let regression: RegressionKind = regression.parse()?;
            let lag_spec: LagSpec = lags.parse()?;
            let seed = common.seed.unwrap_or(0);
            let value = match input {
                Some(path) => {
                    let frame = data::load_csv(&path)?;
                    let mut results = Vec::new();
                    for c in 0..frame.channels() {
                        let r = adf_test(&frame.column(c), regression, lag_spec)?;
                        let critical: Vec<_> = Significance::ALL
                            .iter()
                            .map(|&s| json!({ "level": s, "value": r.critical_value(s), "rejects_unit_root": r.rejects_unit_root(s) }))
                            .collect();
                        results.push(json!({ "channel": frame.channel_names[c], "result": r, "critical_values": critical }));
                    }
                    json!({ "input": path, "regression": regression, "lags": lags, "channels": results })
                }
                None => {
                    let kind: GeneratorKind = kind.parse()?;
                    let cal = synth::adf_calibration(kind, len, reps, seed, regression, lag_spec)?;
                    json!({
                        "kind": kind.to_string(), "T": len, "reps": reps, "seed": seed,
                        "regression": regression, "lags": lags,
                        "mean": cal.mean, "std": cal.std, "min": cal.min, "max": cal.max,
                        "statistics": cal.statistics,
                    })
                }
            };
            emit(&value, common.out.as_deref())?;
        }
        Command::Eg {
            common,
            input,
            x,
            y,
            all_pairs,
            len,
            beta,
            noise,
            independent,
            significance,
        } => {
            let sig: Significance = significance.parse()?;
            let seed = common.seed.unwrap_or(0);
            let value = match input {
                Some(path) => {
                    let frame = data::load_csv(&path)?;
                    if all_pairs {
                        let c = frame.channels();
                        json!({ "input": path, "channels": c, "ordered_pairs": c * c.saturating_sub(1), "cointegrated_pairs": eg_pair_count(&frame, sig)? })
                    } else {
                        let xi = column_index(&frame, x.as_deref(), 0)?;
                        let yi = column_index(&frame, y.as_deref(), 1)?;
                        let r = eg_test(&frame.column(xi), &frame.column(yi), sig)?;
                        json!({ "input": path, "x": frame.channel_names[xi], "y": frame.channel_names[yi], "result": r })
                    }
                }
                None => {
                    let (xs, ys) = if independent {
                        synth::gen_independent_walks(len, seed)?
                    } else {
                        let p = synth::gen_cointegrated_pair(len, beta, noise, seed)?;
                        (p.x, p.y)
                    };
                    let r = eg_test(&xs, &ys, sig)?;
                    let source = if independent {
                        "independent_walks"
                    } else {
                        "cointegrated_pair"
                    };
                    json!({ "source": source, "T": len, "beta": beta, "noise": noise, "seed": seed, "result": r })
                }
            };
            emit(&value, common.out.as_deref())?;
        }
        Command::Synth {
            common,
            kind,
            len,
            sigma,
            beta,
            channels,
        } => {
            let spec = GeneratorSpec {
                kind: kind.parse()?,
                len,
                sigma,
                beta,
                channels,
                seed: common.seed.unwrap_or(0),
            };
            let frame = synth::generate(&spec)?;
            let mut buf = Vec::new();
            data::write_csv(&frame, &mut buf)?;
            match &common.out {
                Some(path) => {
                    write_atomic(path, &buf)?;
                    emit(
                        &json!({ "kind": kind, "rows": frame.len(), "channels": frame.channel_names, "seed": spec.seed, "path": path }),
                        None,
                    )?;
                }
                None => std::io::stdout().write_all(&buf)?,
            }
        }
        Command::Prop1 {
            common,
            patch_len,
            t,
            i,
            j,
            sigma,
            trials,
        } => {
            let r = cmd_prop1(patch_len, t, i, j, sigma, trials, common.seed.unwrap_or(0))?;
            emit(&r, common.out.as_deref())?;
        }
        Command::Gradcheck {
            common,
            eps,
            tolerance,
        } => {
            let mut base = RunConfig::with_model(gradcheck_model());
            base.train.alpha = 0.35;
            let cfg = resolve(base, &common, overrides)?;
            let r = cmd_gradcheck(&cfg, eps, tolerance)?;
            emit(&r, common.out.as_deref())?;
            if !r.passed {
                eprintln!("gradient check failed: {} ≥ {tolerance}", r.max_rel_error);
                return Ok(EXIT_FAILURE);
            }
        }
        Command::Backtest {
            common,
            predicted,
            realized,
            benchmark,
            top_k,
            annualization,
            equity_out,
        } => {
            let pred = data::load_csv(&predicted)?.to_tensor();
            let real = data::load_csv(&realized)?.to_tensor();
            // Frames load as [stocks × days]; the backtest wants [days × stocks].
            let (pred, real) = (transpose(&pred), transpose(&real));
            let days = pred.rows();
            let bench = match benchmark {
                Some(p) => {
                    let f = data::load_csv(&p)?;
                    if f.channels() != 1 {
                        return Err(Error::Data(format!(
                            "benchmark must have one column, found {}",
                            f.channels()
                        )));
                    }
                    f.column(0)
                }
                None => vec![0.0; days],
            };
            let report =
                metrics::buy_hold_sell_backtest(&pred, &real, top_k, &bench, annualization)?;
            let mut csv_buf = Vec::new();
            if equity_out.is_some() {
                metrics::write_equity_csv(&report, &mut csv_buf)?;
            }
            let text = serde_json::to_string_pretty(&report)?;
            if let Some(p) = &equity_out {
                write_atomic(p, &csv_buf)?;
            }
            emit_text(&text, common.out.as_deref())?;
        }
    }
    Ok(0)
}

fn transpose(t: &crate::tensor::Tensor) -> crate::tensor::Tensor {
    let (r, c) = (t.rows(), t.cols());
    let mut out = crate::tensor::Tensor::zeros(&[c, r]);
    for i in 0..r {
        for j in 0..c {
            out.set(&[j, i], t.at(&[i, j]));
        }
    }
    out
}

fn column_index(frame: &TimeSeriesFrame, name: Option<&str>, default: usize) -> Result<usize> {
    match name {
        Some(n) => frame
            .channel_names
            .iter()
            .position(|c| c == n)
            .ok_or_else(|| Error::Config(format!("no column named {n:?}"))),
        None if default < frame.channels() => Ok(default),
        None => Err(Error::Data(format!(
            "need at least {} columns",
            default + 1
        ))),
    }
}

fn emit(value: &impl Serialize, out: Option<&Path>) -> Result<()> {
    emit_text(&serde_json::to_string_pretty(value)?, out)
}

fn emit_text(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, format!("{text}\n").as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")?;
            stdout.flush()?;
            Ok(())
        }
    }
}

/// Writes to a sibling temporary file and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Split boundaries and standardized windows of one dataset.
pub struct PreparedData {
    pub stats: Standardizer,
    pub rows: (usize, usize, usize),
    /// Train, validation and test windows, in standardized units.
    pub splits: [Vec<Sample>; 3],
}

/// Standardizes with training-split statistics. Validation and test windows
/// may look back `input_len` rows into the preceding split, so every target
/// lies inside its own split.
pub fn prepare_data(
    frame: &TimeSeriesFrame,
    split: SplitSpec,
    input_len: usize,
    output_len: usize,
    train_stride: usize,
) -> Result<PreparedData> {
    let (a, b, c) = split.lengths(frame.len())?;
    let stats = Standardizer::fit(&frame.slice(0, a)?)?;
    let z = stats.transform(frame)?;
    let segment = |start: usize, len: usize, stride: usize| -> Result<Vec<Sample>> {
        let from = start.saturating_sub(if start == 0 { 0 } else { input_len });
        let seg = z.slice(from, start + len - from)?;
        if seg.len() < input_len + output_len {
            return Ok(Vec::new());
        }
        windows(&seg, input_len, output_len, stride)
    };
    Ok(PreparedData {
        stats,
        rows: (a, b, c),
        splits: [
            segment(0, a, train_stride)?,
            segment(a, b, 1)?,
            segment(a + b, c, 1)?,
        ],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub config: PathBuf,
    pub dataset_stats: PathBuf,
    pub epochs: usize,
    pub steps: usize,
    pub best_epoch: usize,
    pub final_train_loss: f64,
    pub best_val_loss: Option<f64>,
    pub train_windows: usize,
    pub val_windows: usize,
}

fn required<'a, T>(value: &'a Option<T>, key: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::Config(format!("missing required key {key:?}")))
}

/// Trains on the configured dataset and writes `model.ckpt` (best epoch),
/// `log.csv`, `config.cfg` and `dataset_stats.json` into `out_dir`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    let dataset = required(&cfg.dataset, "dataset")?;
    let out_dir = required(&cfg.out_dir, "out_dir")?;
    let frame = data::load_csv(dataset)?;
    let mut cfg = cfg.clone();
    if cfg.is_explicit("channels") && cfg.model.channels != frame.channels() {
        return Err(Error::Config(format!(
            "channels = {} but {} has {} columns",
            cfg.model.channels,
            dataset.display(),
            frame.channels()
        )));
    }
    cfg.model.channels = frame.channels();
    cfg.model.validate()?;
    cfg.train.validate()?;
    if cfg.stride == 0 {
        return Err(Error::Config("stride must be positive".into()));
    }
    let prepared = prepare_data(
        &frame,
        cfg.split,
        cfg.model.input_len,
        cfg.model.output_len,
        cfg.stride,
    )?;
    let [train_set, val_set, _] = &prepared.splits;
    if train_set.is_empty() {
        return Err(Error::Data(
            "training split is shorter than one window".into(),
        ));
    }
    let model = TimeBridge::new(cfg.model.clone(), cfg.train.seed)?;
    let outcome = train::train(model, train_set, val_set, &cfg.train)?;

    fs::create_dir_all(out_dir)?;
    let ckpt = out_dir.join("model.ckpt");
    let log = out_dir.join("log.csv");
    let snapshot = out_dir.join("config.cfg");
    let stats_path = out_dir.join("dataset_stats.json");
    let mut log_buf = Vec::new();
    train::write_log_csv(&outcome.log, &mut log_buf)?;
    let stats = data::DatasetStats {
        rows: frame.len(),
        split: prepared.rows,
        standardizer: prepared.stats.clone(),
    };
    let mut snap = cfg.clone();
    snap.checkpoint = Some(ckpt.clone());
    write_atomic(&ckpt, checkpoint::to_string(&outcome.best).as_bytes())?;
    write_atomic(&log, &log_buf)?;
    write_atomic(&snapshot, snap.to_text().as_bytes())?;
    write_atomic(
        &stats_path,
        serde_json::to_string_pretty(&stats)?.as_bytes(),
    )?;
    let best = &outcome.log[outcome.best_epoch - 1];
    Ok(TrainSummary {
        checkpoint: ckpt,
        log,
        config: snapshot,
        dataset_stats: stats_path,
        epochs: outcome.log.len(),
        steps: outcome.step_losses.len(),
        best_epoch: outcome.best_epoch,
        final_train_loss: outcome.log.last().unwrap().train_loss,
        best_val_loss: best.val_loss,
        train_windows: train_set.len(),
        val_windows: val_set.len(),
    })
}

pub struct EvalReport {
    pub raw: metrics::ForecastReport,
    pub standardized: metrics::ForecastReport,
}

/// Metrics over every window of split `which` (0 train, 1 val, 2 test),
/// with stride 1, in standardized and original units.
pub fn cmd_eval(cfg: &RunConfig, which: usize) -> Result<EvalReport> {
    let dataset = required(&cfg.dataset, "dataset")?;
    let ckpt = match (&cfg.checkpoint, &cfg.out_dir) {
        (Some(c), _) => c.clone(),
        (None, Some(d)) => d.join("model.ckpt"),
        (None, None) => return Err(Error::Config("missing required key \"checkpoint\"".into())),
    };
    let model = checkpoint::load(&ckpt)?;
    let frame = data::load_csv(dataset)?;
    if frame.channels() != model.config.channels {
        return Err(Error::Data(format!(
            "channel mismatch: checkpoint expects {} channels, {} has {}",
            model.config.channels,
            dataset.display(),
            frame.channels()
        )));
    }
    let prepared = prepare_data(
        &frame,
        cfg.split,
        model.config.input_len,
        model.config.output_len,
        1,
    )?;
    let samples = &prepared.splits[which];
    if samples.is_empty() {
        return Err(Error::Data("split is shorter than one window".into()));
    }
    let mut z = MetricsAccumulator::new();
    let mut raw = MetricsAccumulator::new();
    for s in samples {
        let pred = model.predict(&s.input)?;
        z.add(&pred, &s.target)?;
        raw.add(
            &prepared.stats.inverse_tensor(&pred)?,
            &prepared.stats.inverse_tensor(&s.target)?,
        )?;
    }
    Ok(EvalReport {
        raw: raw.finish()?,
        standardized: z.finish()?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop1Report {
    #[serde(rename = "S")]
    pub patch_len: usize,
    pub t: usize,
    pub i: usize,
    pub j: usize,
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub raw_expected: f64,
    pub raw_mean: f64,
    pub raw_std_error: f64,
    pub rel_err: f64,
    /// Mean over patches of differences at positions `i` and `j`.
    pub detrended_cross_mean: f64,
    /// `0.05 · S · σ²`.
    pub detrended_cross_bound: f64,
    pub detrended_same_mean: f64,
    pub detrended_same_expected: f64,
    pub detrended_same_rel_err: f64,
    /// Patches `i` and `j` share no increments, so the cross mean should vanish.
    pub non_overlapping: bool,
    pub passed: bool,
}

pub fn cmd_prop1(
    s: usize,
    t: usize,
    i: usize,
    j: usize,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<Prop1Report> {
    let raw = synth::monte_carlo_patch_score(s, t, i, j, sigma, false, trials, seed)?;
    let expected = synth::spurious_score_expectation(s, t, i, j, sigma);
    let cross = synth::monte_carlo_patch_score(s, t, i, j, sigma, true, trials, seed)?;
    let same = synth::monte_carlo_patch_score(s, t, i, i, sigma, true, trials, seed)?;
    let same_expected = s as f64 * sigma * sigma;
    let rel_err = (raw.mean - expected).abs() / expected;
    let same_rel = (same.mean - same_expected).abs() / same_expected;
    let bound = 0.05 * same_expected;
    let non_overlapping = i.abs_diff(j) >= s;
    let passed =
        rel_err < 0.05 && same_rel < 0.05 && (!non_overlapping || cross.mean.abs() <= bound);
    Ok(Prop1Report {
        patch_len: s,
        t,
        i,
        j,
        sigma,
        trials,
        seed,
        raw_expected: expected,
        raw_mean: raw.mean,
        raw_std_error: raw.std_error,
        rel_err,
        detrended_cross_mean: cross.mean,
        detrended_cross_bound: bound,
        detrended_same_mean: same.mean,
        detrended_same_expected: same_expected,
        detrended_same_rel_err: same_rel,
        non_overlapping,
        passed,
    })
}

/// Default `gradcheck` model: C=2, I=24, S=6 (N=4), M=2, D=8, O=12, one layer per stage.
pub fn gradcheck_model() -> ModelConfig {
    ModelConfig {
        downsampled_patches: 2,
        hidden_dim: 8,
        ff_dim: 16,
        n_heads: 2,
        ..ModelConfig::new(24, 12, 2, 6)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckOutput {
    pub max_rel_error: f64,
    pub worst_parameter: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
    pub eps: f64,
    pub tolerance: f64,
    pub alpha: f64,
    pub passed: bool,
}

/// Gradient check on the first window of a trend-sinusoid series drawn with
/// the configured seed.
pub fn cmd_gradcheck(cfg: &RunConfig, eps: f64, tolerance: f64) -> Result<GradcheckOutput> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {eps}")));
    }
    let m = &cfg.model;
    m.validate()?;
    cfg.train.validate()?;
    let frame = synth::gen_trend_sinusoid(m.input_len + m.output_len, m.channels, cfg.train.seed)?;
    let sample = &windows(&frame, m.input_len, m.output_len, 1)?[0];
    let model = TimeBridge::new(m.clone(), cfg.train.seed)?;
    let r = train::gradient_check(&model, sample, cfg.train.alpha, eps)?;
    let names = model.params.named();
    Ok(GradcheckOutput {
        max_rel_error: r.max_rel_error,
        worst_parameter: names[r.worst.0].0.clone(),
        worst_index: r.worst.1,
        analytic: r.analytic,
        numeric: r.numeric,
        coordinates: r.coordinates,
        eps,
        tolerance,
        alpha: cfg.train.alpha,
        passed: r.max_rel_error < tolerance,
    })
}
