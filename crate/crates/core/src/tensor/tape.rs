use std::f64::consts::PI;

use super::{axis_layout, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Real and imaginary parts of a transformed signal, both with the input's shape.
#[derive(Debug, Clone, Copy)]
pub struct ComplexPair<T = Var> {
    pub real: T,
    pub imag: T,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Constant,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Transpose(Var),
    Reshape(Var),
    Softmax {
        x: Var,
        axis: usize,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        axis: usize,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Gelu(Var),
    Abs(Var),
    Sqrt(Var),
    Sum(Var),
    Mean(Var),
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    GatherRows {
        x: Var,
        rows: Vec<usize>,
    },
    ConcatRows(Vec<Var>),
    AvgPool {
        x: Var,
        kernel: usize,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Append-only record of a computation. Nodes are stored in creation order,
/// so every operation's inputs precede it and a single reverse sweep is a
/// valid backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_COEFF: f64 = 0.044_715;

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a trainable input; its gradient is kept after [`Tape::backward`].
    pub fn leaf(&mut self, value: Tensor) -> Var {
        let mut value = value;
        value.grad = None;
        self.push_raw(value, Op::Leaf, true)
    }

    /// Records an input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        let mut value = value;
        value.grad = None;
        self.push_raw(value, Op::Constant, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last backward pass with respect to `v`, if it was reached.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Copies the value and gradient of `v` into a fresh tensor.
    pub fn tensor_with_grad(&self, v: Var) -> Tensor {
        let mut t = self.value(v).clone();
        t.grad = Some(
            self.grad(v)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; t.numel()]),
        );
        t
    }

    fn push_raw(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.push_raw(Tensor::from_parts(shape, data), op, needs_grad)
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        matmul_acc(self.data(a), self.data(b), &mut out, m, k, n);
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b), &[a, b]))
    }

    fn elementwise(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(name, self.shape(a), self.shape(b)));
        }
        let out = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(self.push(self.shape(a).to_vec(), out, op, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a bias vector along the last axis of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let n = *self.shape(x).last().unwrap();
        if self.shape(bias) != [n] {
            return Err(Error::shape("add_bias", self.shape(x), self.shape(bias)));
        }
        let b = self.data(bias);
        let out = self
            .data(x)
            .iter()
            .enumerate()
            .map(|(i, &v)| v + b[i % n])
            .collect();
        Ok(self.push(
            self.shape(x).to_vec(),
            out,
            Op::AddBias(x, bias),
            &[x, bias],
        ))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let out = self.data(x).iter().map(|&v| v * factor).collect();
        self.push(self.shape(x).to_vec(), out, Op::Scale(x, factor), &[x])
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let out = self.data(x).iter().map(|&v| v + c).collect();
        self.push(self.shape(x).to_vec(), out, Op::AddScalar(x), &[x])
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 2 {
            return Err(Error::shape("transpose", s, &[]));
        }
        let (r, c) = (s[0], s[1]);
        let d = self.data(x);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = d[i * c + j];
            }
        }
        Ok(self.push(vec![c, r], out, Op::Transpose(x), &[x]))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let numel: usize = shape.iter().product();
        if numel != self.value(x).numel() || shape.contains(&0) {
            return Err(Error::shape("reshape", self.shape(x), shape));
        }
        let out = self.data(x).to_vec();
        Ok(self.push(shape.to_vec(), out, Op::Reshape(x), &[x]))
    }

    /// Max-subtracted softmax along `axis`.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::Config(format!(
                "softmax axis {axis} invalid for shape {shape:?}"
            )));
        }
        let (outer, len, inner) = axis_layout(&shape, axis);
        let d = self.data(x);
        let mut out = vec![0.0; d.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |k: usize| (o * len + k) * inner + i;
                let max = (0..len)
                    .map(|k| d[idx(k)])
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for k in 0..len {
                    let e = (d[idx(k)] - max).exp();
                    out[idx(k)] = e;
                    total += e;
                }
                for k in 0..len {
                    out[idx(k)] /= total;
                }
            }
        }
        Ok(self.push(shape, out, Op::Softmax { x, axis }, &[x]))
    }

    /// Normalizes each slice along `axis` to zero mean and unit variance,
    /// then applies the per-position affine `gain`, `bias`.
    pub fn layer_norm(
        &mut self,
        x: Var,
        axis: usize,
        eps: f64,
        gain: Var,
        bias: Var,
    ) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::Config(format!(
                "layer_norm axis {axis} invalid for shape {shape:?}"
            )));
        }
        if eps <= 0.0 {
            return Err(Error::Config("layer_norm eps must be positive".into()));
        }
        let (outer, len, inner) = axis_layout(&shape, axis);
        if self.shape(gain) != [len] || self.shape(bias) != [len] {
            return Err(Error::shape("layer_norm", &shape, self.shape(gain)));
        }
        let d = self.data(x);
        let (g, b) = (self.data(gain), self.data(bias));
        let mut normalized = vec![0.0; d.len()];
        let mut out = vec![0.0; d.len()];
        let mut inv_std = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let idx = |k: usize| (o * len + k) * inner + i;
                let mean = (0..len).map(|k| d[idx(k)]).sum::<f64>() / len as f64;
                let var = (0..len).map(|k| (d[idx(k)] - mean).powi(2)).sum::<f64>() / len as f64;
                let r = 1.0 / (var + eps).sqrt();
                for k in 0..len {
                    let xh = (d[idx(k)] - mean) * r;
                    normalized[idx(k)] = xh;
                    out[idx(k)] = xh * g[k] + b[k];
                }
                inv_std.push(r);
            }
        }
        let op = Op::LayerNorm {
            x,
            gain,
            bias,
            axis,
            normalized,
            inv_std,
        };
        Ok(self.push(shape, out, op, &[x, gain, bias]))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        let out = self
            .data(x)
            .iter()
            .map(|&v| {
                let t = (SQRT_2_OVER_PI * (v + GELU_COEFF * v * v * v)).tanh();
                0.5 * v * (1.0 + t)
            })
            .collect();
        self.push(self.shape(x).to_vec(), out, Op::Gelu(x), &[x])
    }

    /// Absolute value; the subgradient at 0 is 0.
    pub fn abs(&mut self, x: Var) -> Var {
        let out = self.data(x).iter().map(|v| v.abs()).collect();
        self.push(self.shape(x).to_vec(), out, Op::Abs(x), &[x])
    }

    pub fn sqrt(&mut self, x: Var) -> Var {
        let out = self.data(x).iter().map(|v| v.sqrt()).collect();
        self.push(self.shape(x).to_vec(), out, Op::Sqrt(x), &[x])
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.data(x).iter().sum();
        self.push(vec![1], vec![s], Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let d = self.data(x);
        let m = d.iter().sum::<f64>() / d.len() as f64;
        self.push(vec![1], vec![m], Op::Mean(x), &[x])
    }

    /// Columns `start..start + len` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 2 || len == 0 || start + len > s[1] {
            return Err(Error::shape("slice_cols", s, &[start, len]));
        }
        let (r, c) = (s[0], s[1]);
        let d = self.data(x);
        let mut out = Vec::with_capacity(r * len);
        for i in 0..r {
            out.extend_from_slice(&d[i * c + start..i * c + start + len]);
        }
        Ok(self.push(vec![r, len], out, Op::SliceCols { x, start }, &[x]))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Config("concat_cols of nothing".into()))?;
        let rows = self.shape(*first)[0];
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.len() != 2 || s[0] != rows {
                return Err(Error::shape("concat_cols", self.shape(*first), s));
            }
            total += s[1];
        }
        let mut out = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for &p in parts {
                let c = self.shape(p)[1];
                out.extend_from_slice(&self.data(p)[i * c..(i + 1) * c]);
            }
        }
        Ok(self.push(
            vec![rows, total],
            out,
            Op::ConcatCols(parts.to_vec()),
            parts,
        ))
    }

    /// Selects (and possibly repeats or permutes) rows of a matrix.
    pub fn gather_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 2 || rows.is_empty() || rows.iter().any(|&r| r >= s[0]) {
            return Err(Error::shape("gather_rows", s, &[rows.len()]));
        }
        let c = s[1];
        let d = self.data(x);
        let mut out = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            out.extend_from_slice(&d[r * c..(r + 1) * c]);
        }
        let op = Op::GatherRows {
            x,
            rows: rows.to_vec(),
        };
        Ok(self.push(vec![rows.len(), c], out, op, &[x]))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let rows: Vec<usize> = (start..start + len).collect();
        self.gather_rows(x, &rows)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Config("concat_rows of nothing".into()))?;
        let cols = self.shape(*first)[1];
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            if s.len() != 2 || s[1] != cols {
                return Err(Error::shape("concat_rows", self.shape(*first), s));
            }
            rows += s[0];
            out.extend_from_slice(self.data(p));
        }
        Ok(self.push(vec![rows, cols], out, Op::ConcatRows(parts.to_vec()), parts))
    }

    /// Centered moving average along the last axis with replicate padding;
    /// the output has the input's shape.
    pub fn avg_pool_1d(&mut self, x: Var, kernel: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let len = *shape.last().unwrap();
        validate_kernel(kernel, len)?;
        let out = avg_pool_rows(self.data(x), len, kernel);
        Ok(self.push(shape, out, Op::AvgPool { x, kernel }, &[x]))
    }

    /// Discrete Fourier transform along the last axis of a vector or matrix,
    /// evaluated as the dense linear map.
    pub fn dft_real(&mut self, x: Var) -> Result<ComplexPair> {
        let shape = self.shape(x).to_vec();
        let len = *shape.last().unwrap();
        let rows = self.value(x).numel() / len;
        let (cos, sin) = dft_matrices(len);
        let flat = self.reshape(x, &[rows, len])?;
        let c = self.constant(cos);
        let s = self.constant(sin);
        let re = self.matmul(flat, c)?;
        let im = self.matmul(flat, s)?;
        Ok(ComplexPair {
            real: self.reshape(re, &shape)?,
            imag: self.reshape(im, &shape)?,
        })
    }

    /// Reverse sweep from a scalar `loss`. Gradients from any previous call
    /// are discarded first, so repeated calls give identical results.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.needs_grad {
                self.backprop_node(node, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        for (g, node) in grads.iter_mut().zip(&self.nodes) {
            if !node.needs_grad {
                *g = None;
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let wants = |v: &Var| nodes[v.0].needs_grad;
        // Runs `$body` with `$buf` bound to the gradient buffer of `$v`,
        // skipping inputs that do not need a gradient.
        macro_rules! add_into {
            ($v:expr, |$buf:ident| $body:block) => {
                if nodes[$v.0].needs_grad {
                    let n = nodes[$v.0].value.numel();
                    let $buf = grads[$v.0].get_or_insert_with(|| vec![0.0; n]);
                    $body
                }
            };
        }

        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (nodes[a.0].value.shape(), nodes[b.0].value.shape());
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (ad, bd) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                add_into!(*a, |ga| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &bd[p * n..(p + 1) * n];
                            ga[i * k + p] += dot(grow, brow);
                        }
                    }
                });
                add_into!(*b, |gb| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let a_ip = ad[i * k + p];
                            if a_ip != 0.0 {
                                for (dst, &gv) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                    *dst += a_ip * gv;
                                }
                            }
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                add_into!(*a, |ga| { axpy(ga, 1.0, g) });
                add_into!(*b, |gb| { axpy(gb, 1.0, g) });
            }
            Op::Sub(a, b) => {
                add_into!(*a, |ga| { axpy(ga, 1.0, g) });
                add_into!(*b, |gb| { axpy(gb, -1.0, g) });
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                add_into!(*a, |ga| {
                    for i in 0..g.len() {
                        ga[i] += g[i] * bd[i];
                    }
                });
                add_into!(*b, |gb| {
                    for i in 0..g.len() {
                        gb[i] += g[i] * ad[i];
                    }
                });
            }
            Op::AddBias(x, bias) => {
                add_into!(*x, |gx| { axpy(gx, 1.0, g) });
                let n = nodes[bias.0].value.numel();
                add_into!(*bias, |gb| {
                    for (i, &gv) in g.iter().enumerate() {
                        gb[i % n] += gv;
                    }
                });
            }
            Op::Scale(x, f) => add_into!(*x, |gx| { axpy(gx, *f, g) }),
            Op::AddScalar(x) | Op::Reshape(x) => add_into!(*x, |gx| { axpy(gx, 1.0, g) }),
            Op::Transpose(x) => {
                let s = nodes[x.0].value.shape();
                let (r, c) = (s[0], s[1]);
                add_into!(*x, |gx| {
                    for i in 0..r {
                        for j in 0..c {
                            gx[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::Softmax { x, axis } => {
                let y = node.value.data();
                let (outer, len, inner) = axis_layout(node.value.shape(), *axis);
                add_into!(*x, |gx| {
                    for o in 0..outer {
                        for i in 0..inner {
                            let idx = |k: usize| (o * len + k) * inner + i;
                            let s: f64 = (0..len).map(|k| g[idx(k)] * y[idx(k)]).sum();
                            for k in 0..len {
                                gx[idx(k)] += y[idx(k)] * (g[idx(k)] - s);
                            }
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                axis,
                normalized,
                inv_std,
            } => {
                let (outer, len, inner) = axis_layout(node.value.shape(), *axis);
                let gd = nodes[gain.0].value.data();
                add_into!(*x, |gx| {
                    let mut slice = 0;
                    for o in 0..outer {
                        for i in 0..inner {
                            let idx = |k: usize| (o * len + k) * inner + i;
                            let mut sum_d = 0.0;
                            let mut sum_dx = 0.0;
                            for k in 0..len {
                                let d = g[idx(k)] * gd[k];
                                sum_d += d;
                                sum_dx += d * normalized[idx(k)];
                            }
                            let r = inv_std[slice] / len as f64;
                            for k in 0..len {
                                let d = g[idx(k)] * gd[k];
                                gx[idx(k)] +=
                                    r * (len as f64 * d - sum_d - normalized[idx(k)] * sum_dx);
                            }
                            slice += 1;
                        }
                    }
                });
                add_into!(*gain, |gg| {
                    for o in 0..outer {
                        for k in 0..len {
                            for i in 0..inner {
                                let j = (o * len + k) * inner + i;
                                gg[k] += g[j] * normalized[j];
                            }
                        }
                    }
                });
                add_into!(*bias, |gb| {
                    for o in 0..outer {
                        for k in 0..len {
                            for i in 0..inner {
                                gb[k] += g[(o * len + k) * inner + i];
                            }
                        }
                    }
                });
            }
            Op::Gelu(x) => {
                let xd = nodes[x.0].value.data();
                add_into!(*x, |gx| {
                    for i in 0..g.len() {
                        let v = xd[i];
                        let u = SQRT_2_OVER_PI * (v + GELU_COEFF * v * v * v);
                        let t = u.tanh();
                        let du = SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_COEFF * v * v);
                        gx[i] += g[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
                    }
                });
            }
            Op::Abs(x) => {
                let xd = nodes[x.0].value.data();
                add_into!(*x, |gx| {
                    for i in 0..g.len() {
                        let s = if xd[i] > 0.0 {
                            1.0
                        } else if xd[i] < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        gx[i] += g[i] * s;
                    }
                });
            }
            Op::Sqrt(x) => {
                let y = node.value.data();
                add_into!(*x, |gx| {
                    for i in 0..g.len() {
                        gx[i] += g[i] * 0.5 / y[i];
                    }
                });
            }
            Op::Sum(x) => add_into!(*x, |gx| {
                for v in gx.iter_mut() {
                    *v += g[0];
                }
            }),
            Op::Mean(x) => add_into!(*x, |gx| {
                let s = g[0] / gx.len() as f64;
                for v in gx.iter_mut() {
                    *v += s;
                }
            }),
            Op::SliceCols { x, start } => {
                let c = nodes[x.0].value.shape()[1];
                let (r, len) = (node.value.shape()[0], node.value.shape()[1]);
                add_into!(*x, |gx| {
                    for i in 0..r {
                        for j in 0..len {
                            gx[i * c + start + j] += g[i * len + j];
                        }
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let (rows, total) = (node.value.shape()[0], node.value.shape()[1]);
                let mut offset = 0;
                for p in parts {
                    let c = nodes[p.0].value.shape()[1];
                    if wants(p) {
                        add_into!(*p, |gp| {
                            for i in 0..rows {
                                for j in 0..c {
                                    gp[i * c + j] += g[i * total + offset + j];
                                }
                            }
                        });
                    }
                    offset += c;
                }
            }
            Op::GatherRows { x, rows } => {
                let c = node.value.shape()[1];
                add_into!(*x, |gx| {
                    for (dst, &r) in rows.iter().enumerate() {
                        axpy(&mut gx[r * c..(r + 1) * c], 1.0, &g[dst * c..(dst + 1) * c]);
                    }
                });
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = nodes[p.0].value.numel();
                    if wants(p) {
                        add_into!(*p, |gp| { axpy(gp, 1.0, &g[offset..offset + n]) });
                    }
                    offset += n;
                }
            }
            Op::AvgPool { x, kernel } => {
                let len = *node.value.shape().last().unwrap();
                let half = (*kernel / 2) as isize;
                let w = 1.0 / *kernel as f64;
                add_into!(*x, |gx| {
                    for (r, grow) in g.chunks(len).enumerate() {
                        let base = r * len;
                        for (i, &gv) in grow.iter().enumerate() {
                            for o in -half..=half {
                                let j = (i as isize + o).clamp(0, len as isize - 1) as usize;
                                gx[base + j] += gv * w;
                            }
                        }
                    }
                });
            }
        }
    }
}

pub(crate) fn validate_kernel(kernel: usize, len: usize) -> Result<()> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "moving-average kernel must be odd and positive, got {kernel}"
        )));
    }
    if kernel > len {
        return Err(Error::Config(format!(
            "moving-average kernel {kernel} exceeds series length {len}"
        )));
    }
    Ok(())
}

/// Replicate-padded centered moving average over consecutive rows of length `len`.
pub(crate) fn avg_pool_rows(data: &[f64], len: usize, kernel: usize) -> Vec<f64> {
    let half = (kernel / 2) as isize;
    let mut out = Vec::with_capacity(data.len());
    for row in data.chunks(len) {
        for i in 0..len as isize {
            let s: f64 = (-half..=half)
                .map(|o| row[(i + o).clamp(0, len as isize - 1) as usize])
                .sum();
            out.push(s / kernel as f64);
        }
    }
    out
}

/// `(cos, -sin)` matrices of the length-`n` DFT. Both are symmetric, so
/// `x · cos` and `x · sin` give the real and imaginary parts for row vectors.
fn dft_matrices(n: usize) -> (Tensor, Tensor) {
    let mut cos = vec![0.0; n * n];
    let mut sin = vec![0.0; n * n];
    for k in 0..n {
        for t in 0..n {
            // Reduce k·t mod n first to keep the angle small.
            let angle = 2.0 * PI * ((k * t) % n) as f64 / n as f64;
            cos[k * n + t] = angle.cos();
            sin[k * n + t] = -angle.sin();
        }
    }
    (
        Tensor::from_parts(vec![n, n], cos),
        Tensor::from_parts(vec![n, n], sin),
    )
}

fn matmul_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let a_ip = a[i * k + p];
            if a_ip == 0.0 {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += a_ip * bv;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(dst: &mut [f64], alpha: f64, src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}
