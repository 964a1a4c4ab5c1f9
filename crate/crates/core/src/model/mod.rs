//! The forecaster: patch embedding, integrated attention over detrended
//! patches, attention-based patch downsampling, cointegrated attention
//! across channels, and a flatten-linear output head.
//!
//! Token matrices on the tape are laid out as `[channels · tokens × hidden]`,
//! channel-major: row `c * tokens + n` is token `n` of channel `c`.

pub mod checkpoint;
mod config;
mod params;

pub(crate) use config::parse_num;
pub use config::{
    default_detrend_kernel, BlockOrder, ChannelMode, DatasetPreset, ModelConfig, DATASET_PRESETS,
    PRESET_INPUT_LEN,
};
pub use params::{
    block_average_map, AttentionParams, EncoderLayer, Linear, ModelParams, Norm, ParamTree,
    Resampler,
};

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

const LAYER_NORM_EPS: f64 = 1e-5;

/// Embedded patch tokens `[channels · per_channel × hidden]` on a tape.
#[derive(Debug, Clone, Copy)]
pub struct PatchTokens {
    pub values: Var,
    pub channels: usize,
    pub per_channel: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Integrated(usize),
    Resample,
    Cointegrated(usize),
}

/// Softmax weights `[queries × keys]` of one head within one token group.
#[derive(Debug, Clone, Copy)]
pub struct AttentionMap {
    pub stage: Stage,
    pub group: usize,
    pub head: usize,
    pub weights: Var,
}

/// Query rows and key/value rows that attend to each other.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenGroup {
    pub queries: Vec<usize>,
    pub keys: Vec<usize>,
}

/// One group per channel: channel `c` queries its own `q_per` tokens against
/// its own `k_per` tokens.
pub fn channel_groups(channels: usize, q_per: usize, k_per: usize) -> Vec<TokenGroup> {
    (0..channels)
        .map(|c| TokenGroup {
            queries: (c * q_per..(c + 1) * q_per).collect(),
            keys: (c * k_per..(c + 1) * k_per).collect(),
        })
        .collect()
}

/// One group per token position, spanning all channels.
pub fn position_groups(channels: usize, per_channel: usize) -> Vec<TokenGroup> {
    (0..per_channel)
        .map(|n| {
            let rows: Vec<usize> = (0..channels).map(|c| c * per_channel + n).collect();
            TokenGroup {
                queries: rows.clone(),
                keys: rows,
            }
        })
        .collect()
}

/// A single group containing every token of every channel.
pub fn joint_group(channels: usize, q_per: usize, k_per: usize) -> Vec<TokenGroup> {
    vec![TokenGroup {
        queries: (0..channels * q_per).collect(),
        keys: (0..channels * k_per).collect(),
    }]
}

/// Splits each channel of `[C × I]` into `floor(I / S)` non-overlapping
/// patches, returning `[C × N × S]`. The trailing `I mod S` points are dropped.
pub fn patchify(series: &Tensor, patch_len: usize) -> Result<Tensor> {
    if series.ndim() != 2 {
        return Err(Error::shape("patchify", series.shape(), &[0, patch_len]));
    }
    let (c, len) = (series.rows(), series.cols());
    if patch_len == 0 || len < patch_len {
        return Err(Error::Config(format!(
            "series length {len} shorter than patch length {patch_len}"
        )));
    }
    let n = len / patch_len;
    let mut out = Vec::with_capacity(c * n * patch_len);
    for ch in 0..c {
        out.extend_from_slice(&series.row(ch)[..n * patch_len]);
    }
    Tensor::new(&[c, n, patch_len], out)
}

/// `p - moving_average(p)` along the last axis, replicate-padded.
pub fn detrend_patch(patch: &Tensor, kernel: usize) -> Result<Tensor> {
    let len = patch.cols();
    crate::tensor::validate_kernel(kernel, len)?;
    let trend = crate::tensor::avg_pool_rows(patch.data(), len, kernel);
    let data = patch.data().iter().zip(trend).map(|(p, t)| p - t).collect();
    Tensor::new(patch.shape(), data)
}

pub fn linear(tape: &mut Tape, l: &Linear<Var>, x: Var) -> Result<Var> {
    let y = tape.matmul(x, l.weight)?;
    tape.add_bias(y, l.bias)
}

/// Applies the shared embedding to every raw patch. Accepts `[C × N × S]`
/// or already-flattened `[C·N × S]` patches.
pub fn embed(tape: &mut Tape, l: &Linear<Var>, raw_patches: Var) -> Result<PatchTokens> {
    let shape = tape.shape(raw_patches).to_vec();
    let (channels, per_channel, flat) = match shape.as_slice() {
        [c, n, s] => (*c, *n, tape.reshape(raw_patches, &[c * n, *s])?),
        [rows, _] => (1, *rows, raw_patches),
        _ => return Err(Error::shape("embed", &shape, &[])),
    };
    Ok(PatchTokens {
        values: linear(tape, l, flat)?,
        channels,
        per_channel,
    })
}

/// Scaled dot-product attention with `n_heads` heads inside each token group.
/// Output rows follow the order of the query source rows.
#[allow(clippy::too_many_arguments)]
pub fn multi_head_attention(
    tape: &mut Tape,
    p: &AttentionParams<Var>,
    query_src: Var,
    key_src: Var,
    value_src: Var,
    groups: &[TokenGroup],
    n_heads: usize,
    stage: Stage,
    maps: &mut Vec<AttentionMap>,
) -> Result<Var> {
    let d = tape.shape(query_src)[1];
    if !d.is_multiple_of(n_heads) {
        return Err(Error::Config(format!(
            "hidden {d} not divisible by {n_heads} heads"
        )));
    }
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = tape.matmul(query_src, p.query)?;
    let k = tape.matmul(key_src, p.key)?;
    let v = tape.matmul(value_src, p.value)?;

    let mut outputs = Vec::with_capacity(groups.len());
    let mut order = Vec::with_capacity(tape.shape(query_src)[0]);
    for (gi, g) in groups.iter().enumerate() {
        let qg = tape.gather_rows(q, &g.queries)?;
        let kg = tape.gather_rows(k, &g.keys)?;
        let vg = tape.gather_rows(v, &g.keys)?;
        let mut heads = Vec::with_capacity(n_heads);
        for h in 0..n_heads {
            let (qh, kh, vh) = if n_heads == 1 {
                (qg, kg, vg)
            } else {
                (
                    tape.slice_cols(qg, h * dh, dh)?,
                    tape.slice_cols(kg, h * dh, dh)?,
                    tape.slice_cols(vg, h * dh, dh)?,
                )
            };
            let kt = tape.transpose(kh)?;
            let scores = tape.matmul(qh, kt)?;
            let scores = tape.scale(scores, scale);
            let weights = tape.softmax(scores, 1)?;
            maps.push(AttentionMap {
                stage,
                group: gi,
                head: h,
                weights,
            });
            heads.push(tape.matmul(weights, vh)?);
        }
        outputs.push(if n_heads == 1 {
            heads[0]
        } else {
            tape.concat_cols(&heads)?
        });
        order.extend_from_slice(&g.queries);
    }
    let mut merged = if outputs.len() == 1 {
        outputs[0]
    } else {
        tape.concat_rows(&outputs)?
    };
    if order.iter().enumerate().any(|(i, &r)| i != r) {
        let mut inverse = vec![usize::MAX; order.len()];
        for (pos, &row) in order.iter().enumerate() {
            inverse[row] = pos;
        }
        if inverse.contains(&usize::MAX) {
            return Err(Error::Config(
                "token groups must cover every query row once".into(),
            ));
        }
        merged = tape.gather_rows(merged, &inverse)?;
    }
    tape.matmul(merged, p.output)
}

/// `h = LN(x + Attn(qk, qk, x))`, `out = LN(h + MLP(h))`.
#[allow(clippy::too_many_arguments)]
pub fn encoder_layer(
    tape: &mut Tape,
    layer: &EncoderLayer<Var>,
    x: Var,
    query_key: Var,
    groups: &[TokenGroup],
    n_heads: usize,
    stage: Stage,
    maps: &mut Vec<AttentionMap>,
) -> Result<Var> {
    let attn = multi_head_attention(
        tape,
        &layer.attention,
        query_key,
        query_key,
        x,
        groups,
        n_heads,
        stage,
        maps,
    )?;
    let res = tape.add(x, attn)?;
    let h = tape.layer_norm(res, 1, LAYER_NORM_EPS, layer.norm1.gain, layer.norm1.bias)?;
    let inner = linear(tape, &layer.ff_in, h)?;
    let act = tape.gelu(inner);
    let ff = linear(tape, &layer.ff_out, act)?;
    let res = tape.add(h, ff)?;
    tape.layer_norm(res, 1, LAYER_NORM_EPS, layer.norm2.gain, layer.norm2.bias)
}

/// Attention within each channel over its patch tokens. Queries and keys
/// come from `stationary` (the detrended branch) when given, else from the
/// tokens themselves; values are always the tokens.
#[allow(clippy::too_many_arguments)]
pub fn integrated_attention_block(
    tape: &mut Tape,
    layer: &EncoderLayer<Var>,
    tokens: PatchTokens,
    stationary: Option<Var>,
    mode: ChannelMode,
    n_heads: usize,
    index: usize,
    maps: &mut Vec<AttentionMap>,
) -> Result<PatchTokens> {
    let (c, n) = (tokens.channels, tokens.per_channel);
    let groups = match mode {
        ChannelMode::Independent => channel_groups(c, n, n),
        ChannelMode::Dependent => joint_group(c, n, n),
    };
    let qk = stationary.unwrap_or(tokens.values);
    let values = encoder_layer(
        tape,
        layer,
        tokens.values,
        qk,
        &groups,
        n_heads,
        Stage::Integrated(index),
        maps,
    )?;
    Ok(PatchTokens { values, ..tokens })
}

/// Attention across channels at each token position, on the raw
/// (non-detrended) tokens unless `stationary` is given.
#[allow(clippy::too_many_arguments)]
pub fn cointegrated_attention_block(
    tape: &mut Tape,
    layer: &EncoderLayer<Var>,
    tokens: PatchTokens,
    stationary: Option<Var>,
    mode: ChannelMode,
    n_heads: usize,
    index: usize,
    maps: &mut Vec<AttentionMap>,
) -> Result<PatchTokens> {
    let (c, n) = (tokens.channels, tokens.per_channel);
    let groups = match mode {
        ChannelMode::Dependent => position_groups(c, n),
        ChannelMode::Independent => channel_groups(c, n, n),
    };
    let qk = stationary.unwrap_or(tokens.values);
    let values = encoder_layer(
        tape,
        layer,
        tokens.values,
        qk,
        &groups,
        n_heads,
        Stage::Cointegrated(index),
        maps,
    )?;
    Ok(PatchTokens { values, ..tokens })
}

/// Applies `patch_mapᵀ` to each channel's token block: `[C·from × D] -> [C·to × D]`.
fn map_patch_axis(
    tape: &mut Tape,
    map_t: Var,
    x: Var,
    channels: usize,
    from: usize,
) -> Result<Var> {
    let mut parts = Vec::with_capacity(channels);
    for c in 0..channels {
        let xc = tape.slice_rows(x, c * from, from)?;
        parts.push(tape.matmul(map_t, xc)?);
    }
    if parts.len() == 1 {
        Ok(parts[0])
    } else {
        tape.concat_rows(&parts)
    }
}

/// Reduces each channel's tokens from `from` to `to` via attention whose
/// queries are a learned linear map over the patch axis. No residual or MLP.
/// The stationary branch, if present, is carried through the same linear map.
pub fn patch_downsample(
    tape: &mut Tape,
    r: &Resampler<Var>,
    tokens: PatchTokens,
    stationary: Option<Var>,
    n_heads: usize,
    maps: &mut Vec<AttentionMap>,
) -> Result<(PatchTokens, Option<Var>)> {
    let (c, from) = (tokens.channels, tokens.per_channel);
    let map_shape = tape.shape(r.patch_map).to_vec();
    if map_shape[0] != from {
        return Err(Error::shape("patch_downsample", &[c, from], &map_shape));
    }
    let to = map_shape[1];
    let map_t = tape.transpose(r.patch_map)?;
    let queries = map_patch_axis(tape, map_t, tokens.values, c, from)?;
    let groups = channel_groups(c, to, from);
    let values = multi_head_attention(
        tape,
        &r.attention,
        queries,
        tokens.values,
        tokens.values,
        &groups,
        n_heads,
        Stage::Resample,
        maps,
    )?;
    let stationary = match stationary {
        Some(s) => Some(map_patch_axis(tape, map_t, s, c, from)?),
        None => None,
    };
    Ok((
        PatchTokens {
            values,
            channels: c,
            per_channel: to,
        },
        stationary,
    ))
}

/// Flattens each channel's `[M × D]` tokens and applies the shared head,
/// giving `[C × O]`.
pub fn project_output(tape: &mut Tape, head: &Linear<Var>, tokens: PatchTokens) -> Result<Var> {
    let d = tape.shape(tokens.values)[1];
    let flat = tape.reshape(tokens.values, &[tokens.channels, tokens.per_channel * d])?;
    linear(tape, head, flat)
}

pub struct ForwardOutput {
    pub forecast: Var,
    pub attention: Vec<AttentionMap>,
}

/// Full forward pass `[C × I] -> [C × O]` recorded on `tape`.
pub fn forward(
    tape: &mut Tape,
    config: &ModelConfig,
    params: &ModelParams<Var>,
    series: &Tensor,
) -> Result<ForwardOutput> {
    config.validate()?;
    if series.shape() != [config.channels, config.input_len] {
        return Err(Error::shape(
            "forward",
            series.shape(),
            &[config.channels, config.input_len],
        ));
    }
    if !series.is_finite() {
        return Err(Error::Data(
            "input series contains non-finite values".into(),
        ));
    }
    let (c, n, s) = (config.channels, config.num_patches(), config.patch_len);
    let raw = patchify(series, s)?.reshape(&[c * n, s])?;

    let mut maps = Vec::new();
    let raw_v = tape.constant(raw.clone());
    let mut tokens = embed(tape, &params.embed, raw_v)?;
    tokens.channels = c;
    tokens.per_channel = n;

    let mut stationary = if config.integrated_norm || config.cointegrated_norm {
        let detrended = detrend_patch(&raw, config.detrend_kernel)?;
        let det_v = tape.constant(detrended);
        Some(embed(tape, &params.embed, det_v)?.values)
    } else {
        None
    };

    let heads = config.n_heads;
    let int_branch = |stationary: Option<Var>| stationary.filter(|_| config.integrated_norm);
    let coint_branch = |stationary: Option<Var>| stationary.filter(|_| config.cointegrated_norm);
    match config.block_order {
        BlockOrder::IntegratedFirst => {
            for (i, layer) in params.integrated.iter().enumerate() {
                let st = int_branch(stationary);
                tokens = integrated_attention_block(
                    tape,
                    layer,
                    tokens,
                    st,
                    config.integrated_mode,
                    heads,
                    i,
                    &mut maps,
                )?;
            }
            (tokens, stationary) = patch_downsample(
                tape,
                &params.resampler,
                tokens,
                stationary,
                heads,
                &mut maps,
            )?;
            for (i, layer) in params.cointegrated.iter().enumerate() {
                let st = coint_branch(stationary);
                tokens = cointegrated_attention_block(
                    tape,
                    layer,
                    tokens,
                    st,
                    config.cointegrated_mode,
                    heads,
                    i,
                    &mut maps,
                )?;
            }
        }
        BlockOrder::CointegratedFirst => {
            for (i, layer) in params.cointegrated.iter().enumerate() {
                let st = coint_branch(stationary);
                tokens = cointegrated_attention_block(
                    tape,
                    layer,
                    tokens,
                    st,
                    config.cointegrated_mode,
                    heads,
                    i,
                    &mut maps,
                )?;
            }
            (tokens, stationary) = patch_downsample(
                tape,
                &params.resampler,
                tokens,
                stationary,
                heads,
                &mut maps,
            )?;
            for (i, layer) in params.integrated.iter().enumerate() {
                let st = int_branch(stationary);
                tokens = integrated_attention_block(
                    tape,
                    layer,
                    tokens,
                    st,
                    config.integrated_mode,
                    heads,
                    i,
                    &mut maps,
                )?;
            }
        }
    }
    let forecast = project_output(tape, &params.head, tokens)?;
    Ok(ForwardOutput {
        forecast,
        attention: maps,
    })
}

/// A configuration bundled with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeBridge {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl TimeBridge {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let params = ModelParams::init(&config, seed)?;
        Ok(TimeBridge { config, params })
    }

    pub fn from_parts(config: ModelConfig, params: ModelParams) -> Result<Self> {
        config.validate()?;
        params.check_shapes(&config)?;
        Ok(TimeBridge { config, params })
    }

    /// Inference without recording gradients for the parameters.
    pub fn predict(&self, series: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.params.register_frozen(&mut tape);
        let out = forward(&mut tape, &self.config, &vars, series)?;
        Ok(tape.value(out.forecast).clone())
    }

    /// Attention weights of every head and group for one input.
    pub fn attention_maps(&self, series: &Tensor) -> Result<Vec<(AttentionMap, Tensor)>> {
        let mut tape = Tape::new();
        let vars = self.params.register_frozen(&mut tape);
        let out = forward(&mut tape, &self.config, &vars, series)?;
        Ok(out
            .attention
            .into_iter()
            .map(|m| (m, tape.value(m.weights).clone()))
            .collect())
    }
}
