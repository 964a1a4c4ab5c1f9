use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timebridge::tensor::{finite_diff_check, Tape, Tensor, Var};

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn m(rows: &[&[f64]]) -> Tensor {
    Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn matmul_identity_and_projector() {
    let mut tape = Tape::new();
    let i2 = tape.constant(Tensor::identity(2));
    let a = tape.constant(m(&[&[1.0, 2.0], &[3.0, 4.0]]));
    let out = tape.matmul(i2, a).unwrap();
    assert_eq!(tape.value(out).data(), &[1.0, 2.0, 3.0, 4.0]);

    let p = tape.constant(m(&[&[1.0, 0.0], &[0.0, 0.0]]));
    let v = tape.constant(m(&[&[5.0], &[7.0]]));
    let out = tape.matmul(p, v).unwrap();
    assert_eq!(tape.value(out).data(), &[5.0, 0.0]);
    assert_eq!(tape.value(out).shape(), &[2, 1]);
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]));
    let b = tape.constant(Tensor::zeros(&[2, 3]));
    let msg = tape.matmul(a, b).unwrap_err().to_string();
    assert!(msg.contains("[2, 3]"), "{msg}");
}

#[test]
fn matmul_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = vec![
        random_tensor(&mut rng, &[3, 3]),
        random_tensor(&mut rng, &[3, 3]),
    ];
    let weights = random_tensor(&mut rng, &[3, 3]);
    let report = finite_diff_check(&params, 1e-5, |t, v| {
        let p = t.matmul(v[0], v[1])?;
        let w = t.constant(weights.clone());
        let prod = t.mul(p, w)?;
        Ok(t.sum(prod))
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-6, "{report:?}");
}

#[test]
fn softmax_uniform_and_stable() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::vector(vec![0.0, 0.0, 0.0]));
    let y = tape.softmax(x, 0).unwrap();
    for &v in tape.value(y).data() {
        assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
    }
    let x = tape.constant(Tensor::vector(vec![1000.0, 0.0]));
    let y = tape.softmax(x, 0).unwrap();
    let d = tape.value(y).data();
    assert_eq!(d[0], 1.0);
    assert!(d[1] >= 0.0 && d[1] < 1e-300);
}

#[test]
fn softmax_rejects_bad_axis() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(&[2, 2]));
    assert!(tape.softmax(x, 2).is_err());
}

#[test]
fn softmax_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = vec![random_tensor(&mut rng, &[5])];
    let weights = random_tensor(&mut rng, &[5]);
    let report = finite_diff_check(&params, 1e-5, |t, v| {
        let s = t.softmax(v[0], 0)?;
        let w = t.constant(weights.clone());
        let p = t.mul(s, w)?;
        Ok(t.sum(p))
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-6, "{report:?}");
}

#[test]
fn layer_norm_examples() {
    let mut tape = Tape::new();
    let ones = tape.constant(Tensor::full(&[3], 1.0));
    let zeros = tape.constant(Tensor::zeros(&[3]));
    let x = tape.constant(Tensor::vector(vec![5.0, 5.0, 5.0]));
    let y = tape.layer_norm(x, 0, 1e-5, ones, zeros).unwrap();
    assert_eq!(tape.value(y).data(), &[0.0, 0.0, 0.0]);

    let ones = tape.constant(Tensor::full(&[2], 1.0));
    let zeros = tape.constant(Tensor::zeros(&[2]));
    let x = tape.constant(Tensor::vector(vec![1.0, -1.0]));
    let y = tape.layer_norm(x, 0, 1e-14, ones, zeros).unwrap();
    let d = tape.value(y).data();
    assert_abs_diff_eq!(d[0], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(d[1], -1.0, epsilon = 1e-12);
}

#[test]
fn layer_norm_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = vec![
        random_tensor(&mut rng, &[3, 4]),
        random_tensor(&mut rng, &[4]),
        random_tensor(&mut rng, &[4]),
    ];
    let weights = random_tensor(&mut rng, &[3, 4]);
    for axis in [0usize, 1] {
        let params = if axis == 0 {
            vec![
                params[0].clone(),
                random_tensor(&mut rng, &[3]),
                random_tensor(&mut rng, &[3]),
            ]
        } else {
            params.clone()
        };
        let report = finite_diff_check(&params, 1e-5, |t, v| {
            let y = t.layer_norm(v[0], axis, 1e-5, v[1], v[2])?;
            let w = t.constant(weights.clone());
            let p = t.mul(y, w)?;
            Ok(t.sum(p))
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-5, "axis {axis}: {report:?}");
    }
}

#[test]
fn avg_pool_examples() {
    let mut tape = Tape::new();
    let c = tape.constant(Tensor::full(&[6], 2.5));
    for k in [1, 3, 5] {
        let y = tape.avg_pool_1d(c, k).unwrap();
        assert!(tape.value(y).data().iter().all(|&v| v == 2.5));
    }
    let x = tape.constant(Tensor::vector(vec![1.0, 2.0, 3.0, 4.0, 5.0]));
    let y = tape.avg_pool_1d(x, 3).unwrap();
    let expected = [4.0 / 3.0, 2.0, 3.0, 4.0, 14.0 / 3.0];
    for (a, b) in tape.value(y).data().iter().zip(expected) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
    }
    let y = tape.avg_pool_1d(x, 1).unwrap();
    assert_eq!(tape.value(y).data(), tape.value(x).data());

    assert!(tape.avg_pool_1d(x, 2).is_err());
    assert!(tape.avg_pool_1d(x, 7).is_err());
}

#[test]
fn dft_examples() {
    let mut tape = Tape::new();
    let c = 1.75;
    let x = tape.constant(Tensor::full(&[4], c));
    let f = tape.dft_real(x).unwrap();
    let re = tape.value(f.real).data();
    let im = tape.value(f.imag).data();
    assert_abs_diff_eq!(re[0], 4.0 * c, epsilon = 1e-12);
    for k in 1..4 {
        assert_abs_diff_eq!(re[k], 0.0, epsilon = 1e-12);
    }
    assert!(im.iter().all(|v| v.abs() < 1e-12));

    let x = tape.constant(Tensor::vector(vec![1.0, 0.0, 0.0, 0.0]));
    let f = tape.dft_real(x).unwrap();
    assert!(tape.value(f.real).data().iter().all(|&v| v == 1.0));
    assert!(tape.value(f.imag).data().iter().all(|&v| v == 0.0));
}

/// Direct complex-exponential DFT, independent of the tape's matrices.
fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len() as f64;
    (0..x.len())
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &v)| {
                let a = -2.0 * std::f64::consts::PI * k as f64 * t as f64 / n;
                (re + v * a.cos(), im + v * a.sin())
            })
        })
        .collect()
}

#[test]
fn dft_parseval_and_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_tensor(&mut rng, &[8]);
    let mut tape = Tape::new();
    let v = tape.constant(x.clone());
    let f = tape.dft_real(v).unwrap();
    let (re, im) = (tape.value(f.real).data(), tape.value(f.imag).data());
    let energy_freq: f64 = re.iter().zip(im).map(|(a, b)| a * a + b * b).sum();
    let energy_time: f64 = x.data().iter().map(|a| a * a).sum();
    assert!((energy_freq - 8.0 * energy_time).abs() / (8.0 * energy_time) < 1e-10);
    for (k, (r, i)) in naive_dft(x.data()).into_iter().enumerate() {
        assert_abs_diff_eq!(re[k], r, epsilon = 1e-12);
        assert_abs_diff_eq!(im[k], i, epsilon = 1e-12);
    }
}

#[test]
fn backward_examples() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::vector(vec![0.3, -2.0, 7.0]));
    let s = tape.sum(x);
    tape.backward(s).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[1.0, 1.0, 1.0]);

    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::scalar(3.0));
    let sq = tape.mul(x, x).unwrap();
    tape.backward(sq).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[6.0]);
    // Repeated backward is idempotent.
    tape.backward(sq).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[6.0]);
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
    let y = tape.scale(x, 2.0);
    assert!(tape.backward(y).is_err());
}

#[test]
fn constants_receive_no_gradient() {
    let mut tape = Tape::new();
    let c = tape.constant(Tensor::vector(vec![1.0, 2.0]));
    let x = tape.leaf(Tensor::vector(vec![3.0, 4.0]));
    let p = tape.mul(c, x).unwrap();
    let s = tape.sum(p);
    tape.backward(s).unwrap();
    assert!(tape.grad(c).is_none());
    assert_eq!(tape.grad(x).unwrap(), &[1.0, 2.0]);
}

#[test]
fn finite_diff_check_quadratic_and_cross_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = vec![random_tensor(&mut rng, &[6])];
    let report = finite_diff_check(&params, 1e-5, |t, v| {
        let sq = t.mul(v[0], v[0])?;
        let s = t.sum(sq);
        Ok(t.scale(s, 0.5))
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-9, "{report:?}");

    // Squared error between softmax probabilities and a one-hot target.
    let logits = vec![random_tensor(&mut rng, &[4])];
    let onehot = Tensor::vector(vec![0.0, 0.0, 1.0, 0.0]);
    let report = finite_diff_check(&logits, 1e-5, |t, v| {
        let p = t.softmax(v[0], 0)?;
        let y = t.constant(onehot.clone());
        let diff = t.sub(p, y)?;
        let sq = t.mul(diff, diff)?;
        Ok(t.sum(sq))
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-6, "{report:?}");
    assert!(finite_diff_check(&logits, 0.0, |t, v| Ok(t.sum(v[0]))).is_err());
}

#[derive(Debug, Clone, Copy)]
enum UnaryOp {
    Softmax0,
    SoftmaxLast,
    Gelu,
    Transpose,
    AvgPool3,
    Dft,
    SliceCols,
    GatherRows,
    LayerNormLast,
    Sqrt,
    Abs,
}

fn apply(op: UnaryOp, t: &mut Tape, x: Var, shape: &[usize]) -> timebridge::Result<Var> {
    match op {
        UnaryOp::Softmax0 => t.softmax(x, 0),
        UnaryOp::SoftmaxLast => t.softmax(x, 1),
        UnaryOp::Gelu => Ok(t.gelu(x)),
        UnaryOp::Transpose => t.transpose(x),
        UnaryOp::AvgPool3 => t.avg_pool_1d(x, if shape[1] >= 3 { 3 } else { 1 }),
        UnaryOp::Dft => {
            let f = t.dft_real(x)?;
            let a = t.mul(f.real, f.real)?;
            let b = t.mul(f.imag, f.imag)?;
            let s = t.add(a, b)?;
            let e = t.add_scalar(s, 1.0);
            Ok(t.sqrt(e))
        }
        UnaryOp::SliceCols => t.slice_cols(x, 0, shape[1].div_ceil(2)),
        UnaryOp::GatherRows => {
            let rows: Vec<usize> = (0..shape[0]).rev().chain(0..1).collect();
            t.gather_rows(x, &rows)
        }
        UnaryOp::LayerNormLast => {
            let g = t.constant(Tensor::full(&[shape[1]], 1.3));
            let b = t.constant(Tensor::full(&[shape[1]], -0.2));
            t.layer_norm(x, 1, 1e-5, g, b)
        }
        UnaryOp::Sqrt => {
            let sq = t.mul(x, x)?;
            let e = t.add_scalar(sq, 0.5);
            Ok(t.sqrt(e))
        }
        UnaryOp::Abs => {
            let s = t.add_scalar(x, 3.0);
            Ok(t.abs(s))
        }
    }
}

fn op_strategy() -> impl Strategy<Value = UnaryOp> {
    prop_oneof![
        Just(UnaryOp::Softmax0),
        Just(UnaryOp::SoftmaxLast),
        Just(UnaryOp::Gelu),
        Just(UnaryOp::Transpose),
        Just(UnaryOp::AvgPool3),
        Just(UnaryOp::Dft),
        Just(UnaryOp::SliceCols),
        Just(UnaryOp::GatherRows),
        Just(UnaryOp::LayerNormLast),
        Just(UnaryOp::Sqrt),
        Just(UnaryOp::Abs),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_op_matches_finite_differences(
        op in op_strategy(),
        rows in 1usize..=8,
        cols in 2usize..=8,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = [rows, cols];
        let params = vec![random_tensor(&mut rng, &shape)];
        let out_probe = {
            let mut t = Tape::new();
            let x = t.constant(params[0].clone());
            let y = apply(op, &mut t, x, &shape).unwrap();
            t.value(y).shape().to_vec()
        };
        let weights = random_tensor(&mut rng, &out_probe);
        let report = finite_diff_check(&params, 1e-5, |t, v| {
            let y = apply(op, t, v[0], &shape)?;
            let w = t.constant(weights.clone());
            let p = t.mul(y, w)?;
            Ok(t.sum(p))
        }).unwrap();
        prop_assert!(report.max_rel_error < 1e-5, "{:?}: {:?}", op, report);
    }

    #[test]
    fn binary_ops_match_finite_differences(
        m in 1usize..=8, k in 1usize..=8, n in 1usize..=8, seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = vec![
            random_tensor(&mut rng, &[m, k]),
            random_tensor(&mut rng, &[k, n]),
            random_tensor(&mut rng, &[n]),
            random_tensor(&mut rng, &[m, n]),
        ];
        let report = finite_diff_check(&params, 1e-5, |t, v| {
            let p = t.matmul(v[0], v[1])?;
            let b = t.add_bias(p, v[2])?;
            let q = t.mul(b, v[3])?;
            let r = t.sub(q, v[3])?;
            let s = t.add(r, b)?;
            let parts = [s, v[3]];
            let c = t.concat_rows(&parts)?;
            let cc = t.concat_cols(&[c, c])?;
            let sc = t.scale(cc, 0.7);
            let rs = t.reshape(sc, &[4 * m * n])?;
            let sq = t.mul(rs, rs)?;
            Ok(t.mean(sq))
        }).unwrap();
        prop_assert!(report.max_rel_error < 1e-5, "{:?}", report);
    }

    #[test]
    fn softmax_slices_sum_to_one(rows in 1usize..=8, cols in 1usize..=8, axis in 0usize..2, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, &[rows, cols]).map(|v| v * 50.0);
        let mut t = Tape::new();
        let v = t.constant(x);
        let y = t.softmax(v, axis).unwrap();
        let out = t.value(y);
        let (outer, len) = if axis == 0 { (cols, rows) } else { (rows, cols) };
        for o in 0..outer {
            let s: f64 = (0..len)
                .map(|k| if axis == 0 { out.at(&[k, o]) } else { out.at(&[o, k]) })
                .sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn avg_pool_fixes_constants(len in 1usize..=40, half in 0usize..=10, c in -1e6f64..1e6) {
        let kernel = (2 * half + 1).min(if len % 2 == 1 { len } else { len - 1 });
        let mut t = Tape::new();
        let v = t.constant(Tensor::full(&[len], c));
        let y = t.avg_pool_1d(v, kernel).unwrap();
        // Exact only when the running sum is exactly representable.
        for &o in t.value(y).data() {
            prop_assert!((o - c).abs() <= 1e-12 * c.abs().max(1.0));
        }
    }

    #[test]
    fn dft_is_linear_and_parseval(len in 1usize..=32, a in -3.0f64..3.0, b in -3.0f64..3.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, &[len]);
        let y = random_tensor(&mut rng, &[len]);
        let combo = Tensor::vector(x.data().iter().zip(y.data()).map(|(p, q)| a * p + b * q).collect());
        let mut t = Tape::new();
        let fx = { let v = t.constant(x.clone()); t.dft_real(v).unwrap() };
        let fy = { let v = t.constant(y); t.dft_real(v).unwrap() };
        let fc = { let v = t.constant(combo); t.dft_real(v).unwrap() };
        for k in 0..len {
            let re = a * t.value(fx.real).data()[k] + b * t.value(fy.real).data()[k];
            let im = a * t.value(fx.imag).data()[k] + b * t.value(fy.imag).data()[k];
            prop_assert!((re - t.value(fc.real).data()[k]).abs() < 1e-10);
            prop_assert!((im - t.value(fc.imag).data()[k]).abs() < 1e-10);
        }
        let ef: f64 = (0..len).map(|k| t.value(fx.real).data()[k].powi(2) + t.value(fx.imag).data()[k].powi(2)).sum();
        let et: f64 = x.data().iter().map(|v| v * v).sum();
        prop_assert!((ef - len as f64 * et).abs() <= 1e-10 * len as f64 * et);
    }
}
