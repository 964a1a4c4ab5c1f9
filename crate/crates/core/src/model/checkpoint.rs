//! Plain-text checkpoint format.
//!
//! ```text
//! timebridge-checkpoint 1
//! [config]
//! input_len = 24
//! ...
//! [params]
//! embed.weight 6 8
//! <48 space-separated values>
//! embed.bias 8
//! <8 values>
//! ...
//! ```
//!
//! Each parameter is a header line (name followed by its dimensions) and one
//! line holding the row-major payload. Values are written in Rust's shortest
//! round-trip exponent form, so loading reproduces every float bit-exactly.
//! Parameters appear in the traversal order of [`ModelParams`].

use std::fmt::Write as _;
use std::path::Path;

use super::{ModelConfig, ModelParams, ParamTree, TimeBridge};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &str = "timebridge-checkpoint 1";

pub fn to_string(model: &TimeBridge) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "[config]").unwrap();
    for (k, v) in model.config.to_pairs() {
        writeln!(out, "{k} = {v}").unwrap();
    }
    writeln!(out, "[params]").unwrap();
    for (name, t) in model.params.named() {
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        writeln!(out, "{name} {}", dims.join(" ")).unwrap();
        let values: Vec<String> = t.data().iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", values.join(" ")).unwrap();
    }
    out
}

pub fn from_str(text: &str) -> Result<TimeBridge> {
    let bad = |line: usize, msg: &str| Error::Parse {
        row: line + 1,
        column: "checkpoint".into(),
        message: msg.into(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(bad(0, "missing checkpoint header")),
    }
    match lines.next() {
        Some((_, l)) if l.trim() == "[config]" => {}
        _ => return Err(bad(1, "expected [config]")),
    }
    let mut config = ModelConfig::new(1, 1, 1, 1);
    let mut seen = Vec::new();
    loop {
        let (i, line) = lines
            .next()
            .ok_or_else(|| bad(0, "missing [params] section"))?;
        let line = line.trim();
        if line == "[params]" {
            break;
        }
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(i, "expected key = value"))?;
        config
            .set(k.trim(), v)
            .map_err(|e| bad(i, &e.to_string()))?;
        seen.push(k.trim().to_string());
    }
    for key in ModelConfig::KEYS {
        if !seen.iter().any(|s| s == key) {
            return Err(Error::Config(format!("checkpoint config is missing {key}")));
        }
    }
    config.validate()?;

    let mut params = ModelParams::init(&config, 0)?;
    let mut expected = Vec::new();
    params.visit("", &mut |name, t| expected.push((name, t.shape().to_vec())));
    let mut loaded = Vec::with_capacity(expected.len());
    for (name, shape) in &expected {
        let (i, header) = lines
            .next()
            .ok_or_else(|| bad(0, &format!("missing parameter {name}")))?;
        let mut parts = header.split_whitespace();
        let got_name = parts.next().unwrap_or_default();
        let dims: Vec<usize> = parts
            .map(|d| d.parse().map_err(|_| bad(i, "bad dimension")))
            .collect::<Result<_>>()?;
        if got_name != name || &dims != shape {
            return Err(bad(
                i,
                &format!("expected {name} {shape:?}, found {got_name} {dims:?}"),
            ));
        }
        let (j, payload) = lines
            .next()
            .ok_or_else(|| bad(i, &format!("missing payload for {name}")))?;
        let values: Vec<f64> = payload
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| bad(j, &format!("bad value {v:?}")))
            })
            .collect::<Result<_>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad(j, "non-finite parameter value"));
        }
        loaded.push(Tensor::new(shape, values).map_err(|e| bad(j, &e.to_string()))?);
    }
    let mut it = loaded.into_iter();
    params.visit_mut("", &mut |_, t| *t = it.next().unwrap());
    TimeBridge::from_parts(config, params)
}

pub fn save(model: &TimeBridge, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_string(model))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<TimeBridge> {
    from_str(&std::fs::read_to_string(path)?)
}
