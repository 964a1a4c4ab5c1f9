use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timebridge::model::{
    self, cointegrated_attention_block, detrend_patch, embed, forward, integrated_attention_block,
    patch_downsample, patchify, project_output, BlockOrder, ChannelMode, DatasetPreset,
    ModelConfig, ModelParams, Stage, TimeBridge,
};
use timebridge::tensor::{finite_diff_check, Tape, Tensor, Var};

fn random(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape,
        (0..n).map(|_| rng.random_range(-scale..scale)).collect(),
    )
    .unwrap()
}

/// Random walk per channel, so inputs are non-stationary.
fn walk(rng: &mut ChaCha8Rng, channels: usize, len: usize) -> Tensor {
    let mut data = Vec::with_capacity(channels * len);
    for _ in 0..channels {
        let mut x = 0.0;
        for _ in 0..len {
            x += rng.random_range(-1.0..1.0);
            data.push(x);
        }
    }
    Tensor::new(&[channels, len], data).unwrap()
}

#[test]
fn patchify_examples() {
    let s = Tensor::new(&[1, 6], (1..=6).map(f64::from).collect()).unwrap();
    let p = patchify(&s, 3).unwrap();
    assert_eq!(p.shape(), &[1, 2, 3]);
    assert_eq!(p.data(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);

    let s = Tensor::new(&[2, 7], (1..=14).map(f64::from).collect()).unwrap();
    let p = patchify(&s, 3).unwrap();
    assert_eq!(p.shape(), &[2, 2, 3]);
    assert_eq!(
        p.data(),
        &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0]
    );

    assert!(patchify(&Tensor::zeros(&[1, 2]), 3).is_err());
}

proptest! {
    #[test]
    fn patches_reconstruct_prefix(c in 1usize..4, len in 1usize..40, s in 1usize..10, seed in any::<u64>()) {
        prop_assume!(len >= s);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let series = random(&mut rng, &[c, len], 1.0);
        let p = patchify(&series, s).unwrap();
        let n = len / s;
        for ch in 0..c {
            prop_assert_eq!(&p.data()[ch * n * s..(ch + 1) * n * s], &series.row(ch)[..n * s]);
        }
    }

    #[test]
    fn detrend_is_shift_invariant(len in 1usize..30, half in 0usize..6, shift in -100.0f64..100.0, seed in any::<u64>()) {
        let kernel = (2 * half + 1).min(if len % 2 == 1 { len } else { len - 1 });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random(&mut rng, &[len], 5.0);
        let q = p.map(|v| v + shift);
        let a = detrend_patch(&p, kernel).unwrap();
        let b = detrend_patch(&q, kernel).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn detrend_examples() {
    let c = Tensor::full(&[5], 3.25);
    assert!(detrend_patch(&c, 3)
        .unwrap()
        .data()
        .iter()
        .all(|&v| v == 0.0));

    let p = Tensor::vector(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    let d = detrend_patch(&p, 3).unwrap();
    let expected = [-1.0 / 3.0, 0.0, 0.0, 0.0, 1.0 / 3.0];
    for (a, b) in d.data().iter().zip(expected) {
        assert!((a - b).abs() < 1e-15, "{a} vs {b}");
    }
    assert!(detrend_patch(&p, 4).is_err());
    assert!(detrend_patch(&p, 7).is_err());
}

#[test]
fn embed_shares_weights_across_patches() {
    let config = ModelConfig::toy(4);
    let params = ModelParams::init(&config, 1).unwrap();
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);

    let zero = tape.constant(Tensor::zeros(&[2, 4, 3]));
    let mut zero_params = params.clone();
    zero_params.embed.bias = Tensor::zeros(&[4]);
    let zvars = zero_params.register(&mut tape);
    let tokens = embed(&mut tape, &zvars.embed, zero).unwrap();
    assert!(tape.value(tokens.values).data().iter().all(|&v| v == 0.0));

    let twin = Tensor::new(&[1, 2, 3], vec![0.5, -1.0, 2.0, 0.5, -1.0, 2.0]).unwrap();
    let twin = tape.constant(twin);
    let tokens = embed(&mut tape, &vars.embed, twin).unwrap();
    let v = tape.value(tokens.values);
    assert_eq!(v.row(0), v.row(1));
}

#[test]
fn embed_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = vec![random(&mut rng, &[3, 4], 1.0), random(&mut rng, &[4], 1.0)];
    let input = random(&mut rng, &[1, 2, 3], 1.0);
    let weights = random(&mut rng, &[2, 4], 1.0);
    let report = finite_diff_check(&params, 1e-5, |t, v| {
        let x = t.constant(input.clone());
        let l = model::Linear {
            weight: v[0],
            bias: v[1],
        };
        let tok = embed(t, &l, x)?;
        let w = t.constant(weights.clone());
        let p = t.mul(tok.values, w)?;
        Ok(t.sum(p))
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-5, "{report:?}");
}

fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let r = 1.0 / (var + 1e-5).sqrt();
    x.iter()
        .enumerate()
        .map(|(i, v)| (v - mean) * r * gain[i] + bias[i])
        .collect()
}

fn affine(x: &[f64], w: &Tensor, b: &Tensor) -> Vec<f64> {
    let (rows, cols) = (w.rows(), w.cols());
    (0..cols)
        .map(|j| (0..rows).map(|i| x[i] * w.at(&[i, j])).sum::<f64>() + b.data()[j])
        .collect()
}

fn gelu(v: f64) -> f64 {
    0.5 * v * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (v + 0.044715 * v.powi(3))).tanh())
}

#[test]
fn single_token_integrated_block_matches_closed_form() {
    let config = ModelConfig {
        hidden_dim: 4,
        ff_dim: 6,
        n_heads: 2,
        ..ModelConfig::toy(2)
    };
    let params = ModelParams::init(&config, 9).unwrap();
    let layer = &params.integrated[0];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = random(&mut rng, &[1, 4], 2.0);
    let p_stat = random(&mut rng, &[1, 4], 2.0);

    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let pv = tape.constant(p.clone());
    let sv = tape.constant(p_stat);
    let tokens = model::PatchTokens {
        values: pv,
        channels: 1,
        per_channel: 1,
    };
    let mut maps = Vec::new();
    let out = integrated_attention_block(
        &mut tape,
        &vars.integrated[0],
        tokens,
        Some(sv),
        ChannelMode::Independent,
        2,
        0,
        &mut maps,
    )
    .unwrap();
    for m in &maps {
        assert_eq!(tape.value(m.weights).data(), &[1.0]);
    }

    // One token: attention output is the value path alone.
    let a = &layer.attention;
    let v = affine(p.data(), &a.value, &Tensor::zeros(&[4]));
    let attn = affine(&v, &a.output, &Tensor::zeros(&[4]));
    let res: Vec<f64> = p.data().iter().zip(&attn).map(|(x, y)| x + y).collect();
    let h = layer_norm(&res, layer.norm1.gain.data(), layer.norm1.bias.data());
    let inner: Vec<f64> = affine(&h, &layer.ff_in.weight, &layer.ff_in.bias)
        .into_iter()
        .map(gelu)
        .collect();
    let ff = affine(&inner, &layer.ff_out.weight, &layer.ff_out.bias);
    let res2: Vec<f64> = h.iter().zip(&ff).map(|(x, y)| x + y).collect();
    let expected = layer_norm(&res2, layer.norm2.gain.data(), layer.norm2.bias.data());
    for (got, want) in tape.value(out.values).data().iter().zip(expected) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn attention_rows_sum_to_one_in_every_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for order in [BlockOrder::IntegratedFirst, BlockOrder::CointegratedFirst] {
        for mode in [ChannelMode::Independent, ChannelMode::Dependent] {
            let config = ModelConfig {
                n_integrated_layers: 2,
                n_cointegrated_layers: 2,
                block_order: order,
                integrated_mode: mode,
                cointegrated_mode: mode,
                cointegrated_norm: true,
                ..ModelConfig::toy(3)
            };
            let model = TimeBridge::new(config, 5).unwrap();
            let maps = model.attention_maps(&walk(&mut rng, 2, 12)).unwrap();
            assert!(maps.len() >= 5);
            for (_, w) in maps {
                for r in 0..w.rows() {
                    let s: f64 = w.row(r).iter().sum();
                    assert!((s - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn integrated_norm_ablation_changes_output_on_trending_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let series = walk(&mut rng, 2, 12).map(|v| v * 3.0);
    let on = TimeBridge::new(ModelConfig::toy(4), 3).unwrap();
    let mut off = on.clone();
    off.config.integrated_norm = false;
    let a = on.predict(&series).unwrap();
    let b = off.predict(&series).unwrap();
    let diff: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .sum();
    assert!(diff > 1e-6, "outputs identical: {diff}");
}

#[test]
fn downsample_identity_map_uses_tokens_as_queries() {
    // M = N starts from an identity patch map, so the query source is P itself.
    let config = ModelConfig {
        downsampled_patches: 4,
        ..ModelConfig::toy(2)
    };
    let params = ModelParams::init(&config, 1).unwrap();
    assert_eq!(params.resampler.patch_map, Tensor::identity(4));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = random(&mut rng, &[8, 4], 1.0);

    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let pv = tape.constant(p.clone());
    let tokens = model::PatchTokens {
        values: pv,
        channels: 2,
        per_channel: 4,
    };
    let mut maps = Vec::new();
    let (out, _) =
        patch_downsample(&mut tape, &vars.resampler, tokens, None, 2, &mut maps).unwrap();
    assert_eq!(tape.value(out.values).shape(), &[8, 4]);
    assert_eq!(out.per_channel, 4);

    // Equivalent to plain self-attention per channel.
    let mut t2 = Tape::new();
    let v2 = params.register(&mut t2);
    let pv2 = t2.constant(p);
    let groups = model::channel_groups(2, 4, 4);
    let mut m2 = Vec::new();
    let y = model::multi_head_attention(
        &mut t2,
        &v2.resampler.attention,
        pv2,
        pv2,
        pv2,
        &groups,
        2,
        Stage::Resample,
        &mut m2,
    )
    .unwrap();
    assert_eq!(tape.value(out.values).data(), t2.value(y).data());
}

#[test]
fn downsample_to_one_token_is_convex_combination() {
    let config = ModelConfig {
        downsampled_patches: 1,
        n_heads: 1,
        ..ModelConfig::toy(2)
    };
    let mut params = ModelParams::init(&config, 2).unwrap();
    // Identity value/output projections expose the convex combination directly.
    params.resampler.attention.value = Tensor::identity(4);
    params.resampler.attention.output = Tensor::identity(4);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = random(&mut rng, &[4, 4], 1.0);
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let pv = tape.constant(p.clone());
    let tokens = model::PatchTokens {
        values: pv,
        channels: 1,
        per_channel: 4,
    };
    let mut maps = Vec::new();
    let (out, _) =
        patch_downsample(&mut tape, &vars.resampler, tokens, None, 1, &mut maps).unwrap();
    let y = tape.value(out.values);
    assert_eq!(y.shape(), &[1, 4]);
    let w = tape.value(maps[0].weights).clone();
    assert_eq!(w.shape(), &[1, 4]);
    for d in 0..4 {
        let manual: f64 = (0..4).map(|n| w.at(&[0, n]) * p.at(&[n, d])).sum();
        assert!((manual - y.at(&[0, d])).abs() < 1e-12);
        let lo = (0..4).map(|n| p.at(&[n, d])).fold(f64::INFINITY, f64::min);
        let hi = (0..4)
            .map(|n| p.at(&[n, d]))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(y.at(&[0, d]) >= lo - 1e-12 && y.at(&[0, d]) <= hi + 1e-12);
    }
}

#[test]
fn downsample_patch_map_gradient() {
    let config = ModelConfig::toy(2);
    let params = ModelParams::init(&config, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = random(&mut rng, &[8, 4], 1.0);
    let weights = random(&mut rng, &[4, 4], 1.0);
    let flat = vec![random(&mut rng, &[4, 2], 1.0)];
    let report = finite_diff_check(&flat, 0.00003, |t, v| {
        let vars = params.register_frozen(t);
        let mut r = vars.resampler.clone();
        r.patch_map = v[0];
        let pv = t.constant(p.clone());
        let tokens = model::PatchTokens {
            values: pv,
            channels: 2,
            per_channel: 4,
        };
        let mut maps = Vec::new();
        let (out, _) = patch_downsample(t, &r, tokens, None, 2, &mut maps)?;
        let w = t.constant(weights.clone());
        let prod = t.mul(out.values, w)?;
        Ok(t.sum(prod))
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn cointegrated_single_channel_and_map_shape() {
    let config = ModelConfig {
        channels: 3,
        ..ModelConfig::toy(2)
    };
    let params = ModelParams::init(&config, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let single = tape.constant(random(&mut rng, &[2, 4], 1.0));
    let tokens = model::PatchTokens {
        values: single,
        channels: 1,
        per_channel: 2,
    };
    let mut maps = Vec::new();
    cointegrated_attention_block(
        &mut tape,
        &vars.cointegrated[0],
        tokens,
        None,
        ChannelMode::Dependent,
        2,
        0,
        &mut maps,
    )
    .unwrap();
    for m in &maps {
        assert_eq!(tape.value(m.weights).data(), &[1.0]);
    }

    let many = tape.constant(random(&mut rng, &[6, 4], 1.0));
    let tokens = model::PatchTokens {
        values: many,
        channels: 3,
        per_channel: 2,
    };
    let mut maps = Vec::new();
    cointegrated_attention_block(
        &mut tape,
        &vars.cointegrated[0],
        tokens,
        None,
        ChannelMode::Dependent,
        2,
        0,
        &mut maps,
    )
    .unwrap();
    assert_eq!(maps.len(), 2 * 2);
    for m in &maps {
        let w = tape.value(m.weights);
        assert_eq!(w.shape(), &[3, 3]);
        for r in 0..3 {
            assert!((w.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn cointegrated_block_is_channel_equivariant() {
    let config = ModelConfig {
        channels: 3,
        ..ModelConfig::toy(2)
    };
    let params = ModelParams::init(&config, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random(&mut rng, &[3 * 2, 4], 1.0);
    let perm = [2usize, 0, 1];
    let mut permuted = Vec::new();
    for &c in &perm {
        for n in 0..2 {
            permuted.extend_from_slice(x.row(c * 2 + n));
        }
    }
    let xp = Tensor::new(&[6, 4], permuted).unwrap();

    let run = |input: &Tensor| {
        let mut tape = Tape::new();
        let vars = params.register_frozen(&mut tape);
        let v = tape.constant(input.clone());
        let tokens = model::PatchTokens {
            values: v,
            channels: 3,
            per_channel: 2,
        };
        let mut maps = Vec::new();
        let out = cointegrated_attention_block(
            &mut tape,
            &vars.cointegrated[0],
            tokens,
            None,
            ChannelMode::Dependent,
            2,
            0,
            &mut maps,
        )
        .unwrap();
        tape.value(out.values).clone()
    };
    let a = run(&x);
    let b = run(&xp);
    for (i, &c) in perm.iter().enumerate() {
        for n in 0..2 {
            for (u, v) in a.row(c * 2 + n).iter().zip(b.row(i * 2 + n)) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn forward_is_channel_equivariant_with_cd_cointegration() {
    let config = ModelConfig {
        channels: 3,
        ..ModelConfig::toy(4)
    };
    let model = TimeBridge::new(config, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = walk(&mut rng, 3, 12);
    let perm = [1usize, 2, 0];
    let xp =
        Tensor::from_rows(&perm.iter().map(|&c| x.row(c).to_vec()).collect::<Vec<_>>()).unwrap();
    let a = model.predict(&x).unwrap();
    let b = model.predict(&xp).unwrap();
    for (i, &c) in perm.iter().enumerate() {
        for (u, v) in a.row(c).iter().zip(b.row(i)) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}

#[test]
fn project_output_examples_and_gradient() {
    let mut tape = Tape::new();
    let w = tape.leaf(Tensor::full(&[6, 4], 0.3));
    let b = tape.leaf(Tensor::zeros(&[4]));
    let head = model::Linear { weight: w, bias: b };
    let zero = tape.constant(Tensor::zeros(&[4, 3]));
    let tokens = model::PatchTokens {
        values: zero,
        channels: 2,
        per_channel: 2,
    };
    let y = project_output(&mut tape, &head, tokens).unwrap();
    assert_eq!(tape.value(y).shape(), &[2, 4]);
    assert!(tape.value(y).data().iter().all(|&v| v == 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let half = random(&mut rng, &[2, 3], 1.0);
    let twin = Tensor::new(&[4, 3], [half.data(), half.data()].concat()).unwrap();
    let tv = tape.constant(twin);
    let tokens = model::PatchTokens {
        values: tv,
        channels: 2,
        per_channel: 2,
    };
    let hw = model::Linear {
        weight: tape.leaf(random(&mut rng, &[6, 4], 1.0)),
        bias: tape.leaf(random(&mut rng, &[4], 1.0)),
    };
    let y = project_output(&mut tape, &hw, tokens).unwrap();
    assert_eq!(tape.value(y).row(0), tape.value(y).row(1));

    let input = random(&mut rng, &[4, 3], 1.0);
    let weights = random(&mut rng, &[2, 4], 1.0);
    let params = vec![random(&mut rng, &[6, 4], 1.0), random(&mut rng, &[4], 1.0)];
    let report = finite_diff_check(&params, 1e-5, |t, v| {
        let x = t.constant(input.clone());
        let tokens = model::PatchTokens {
            values: x,
            channels: 2,
            per_channel: 2,
        };
        let y = project_output(
            t,
            &model::Linear {
                weight: v[0],
                bias: v[1],
            },
            tokens,
        )?;
        let w = t.constant(weights.clone());
        let p = t.mul(y, w)?;
        Ok(t.sum(p))
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-5, "{report:?}");
}

#[test]
fn forward_shape_and_determinism() {
    let config = ModelConfig::toy(5);
    let model = TimeBridge::new(config, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = walk(&mut rng, 2, 12);
    let a = model.predict(&x).unwrap();
    let b = model.predict(&x).unwrap();
    assert_eq!(a.shape(), &[2, 5]);
    assert_eq!(a.data(), b.data());
    assert!(model.predict(&Tensor::zeros(&[3, 12])).is_err());
    let mut bad = x.clone();
    bad.data_mut()[0] = f64::NAN;
    assert!(model.predict(&bad).is_err());
}

#[test]
fn ett_style_config_without_cointegrated_layers_runs() {
    let preset = DatasetPreset::find("ETTh1").unwrap();
    let config = ModelConfig {
        input_len: 24,
        patch_len: 4,
        downsampled_patches: 6,
        hidden_dim: 8,
        ff_dim: 8,
        n_heads: 2,
        n_integrated_layers: preset.n_integrated_layers,
        n_cointegrated_layers: preset.n_cointegrated_layers,
        ..ModelConfig::new(24, 4, 3, 4)
    };
    let model = TimeBridge::new(config, 2).unwrap();
    assert!(model.params.cointegrated.is_empty());
    assert_eq!(model.params.integrated.len(), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let y = model.predict(&walk(&mut rng, 3, 24)).unwrap();
    assert_eq!(y.shape(), &[3, 4]);
    assert!(y.is_finite());
}

fn full_model_gradcheck(config: ModelConfig, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ModelParams::init(&config, seed).unwrap();
    let x = walk(&mut rng, config.channels, config.input_len);
    let weights = random(&mut rng, &[config.channels, config.output_len], 1.0);
    let flat = params.to_flat();
    let report = finite_diff_check(&flat, 1e-4, |t, v: &[Var]| {
        let pv = params.with_vars(v);
        let out = forward(t, &config, &pv, &x)?;
        let w = t.constant(weights.clone());
        let p = t.mul(out.forecast, w)?;
        Ok(t.sum(p))
    })
    .unwrap();
    report.max_rel_error
}

#[test]
fn full_forward_gradient_matches_finite_differences() {
    let err = full_model_gradcheck(ModelConfig::toy(3), 21);
    assert!(err < 1e-4, "max rel err {err}");
    let ablated = ModelConfig {
        integrated_norm: false,
        cointegrated_norm: true,
        integrated_mode: ChannelMode::Dependent,
        cointegrated_mode: ChannelMode::Independent,
        block_order: BlockOrder::CointegratedFirst,
        ..ModelConfig::toy(3)
    };
    let err = full_model_gradcheck(ablated, 22);
    assert!(err < 1e-4, "max rel err {err}");
}

fn config_strategy() -> impl Strategy<Value = ModelConfig> {
    (
        1usize..4,
        1usize..5,
        2usize..5,
        1usize..4,
        1usize..3,
        0usize..3,
        0usize..3,
        any::<bool>(),
        any::<bool>(),
    )
        .prop_flat_map(|(c, s, n, o, heads, li, lc, order, cd)| {
            let li = if li + lc == 0 { 1 } else { li };
            (1usize..=n).prop_map(move |m| ModelConfig {
                input_len: n * s + (s / 2),
                output_len: o,
                channels: c,
                patch_len: s,
                downsampled_patches: m,
                hidden_dim: 2 * heads,
                ff_dim: 3,
                n_integrated_layers: li,
                n_cointegrated_layers: lc,
                n_heads: heads,
                detrend_kernel: if s % 2 == 1 { s } else { s - 1 },
                integrated_norm: true,
                cointegrated_norm: cd,
                integrated_mode: if cd {
                    ChannelMode::Dependent
                } else {
                    ChannelMode::Independent
                },
                cointegrated_mode: ChannelMode::Dependent,
                block_order: if order {
                    BlockOrder::IntegratedFirst
                } else {
                    BlockOrder::CointegratedFirst
                },
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn forward_maps_c_by_i_to_c_by_o(config in config_strategy(), seed in any::<u64>()) {
        config.validate().unwrap();
        let model = TimeBridge::new(config.clone(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = walk(&mut rng, config.channels, config.input_len);
        let y = model.predict(&x).unwrap();
        prop_assert_eq!(y.shape(), &[config.channels, config.output_len]);
        prop_assert!(y.is_finite());
    }
}
