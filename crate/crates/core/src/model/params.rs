use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Affine map `x · weight + bias` with `weight` stored as `[in × out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: T,
    pub bias: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Norm<T> {
    pub gain: T,
    pub bias: T,
}

/// Bias-free `[D × D]` projections.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<T> {
    pub query: T,
    pub key: T,
    pub value: T,
    pub output: T,
}

/// Attention + MLP block, each followed by a residual LayerNorm.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer<T> {
    pub attention: AttentionParams<T>,
    pub norm1: Norm<T>,
    pub ff_in: Linear<T>,
    pub ff_out: Linear<T>,
    pub norm2: Norm<T>,
}

/// Attention-based change of token count; `patch_map` is `[from × to]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampler<T> {
    pub patch_map: T,
    pub attention: AttentionParams<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T = Tensor> {
    pub embed: Linear<T>,
    pub integrated: Vec<EncoderLayer<T>>,
    pub resampler: Resampler<T>,
    pub cointegrated: Vec<EncoderLayer<T>>,
    pub head: Linear<T>,
}

/// Uniform traversal over the named leaves of a parameter tree.
pub trait ParamTree<T> {
    type Mapped<U>;

    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a T));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut T));
    fn map<U>(&self, f: &mut dyn FnMut(&T) -> U) -> Self::Mapped<U>;
}

fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

macro_rules! param_tree {
    ($ty:ident { leaves: [$($leaf:ident),*], nested: [$($child:ident),*] }) => {
        impl<T> ParamTree<T> for $ty<T> {
            type Mapped<U> = $ty<U>;

            fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a T)) {
                $( f(join(prefix, stringify!($leaf)), &self.$leaf); )*
                $( self.$child.visit(&join(prefix, stringify!($child)), f); )*
            }

            fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut T)) {
                $( f(join(prefix, stringify!($leaf)), &mut self.$leaf); )*
                $( self.$child.visit_mut(&join(prefix, stringify!($child)), f); )*
            }

            fn map<U>(&self, f: &mut dyn FnMut(&T) -> U) -> $ty<U> {
                $ty {
                    $( $leaf: f(&self.$leaf), )*
                    $( $child: self.$child.map(f), )*
                }
            }
        }
    };
}

param_tree!(Linear {
    leaves: [weight, bias],
    nested: []
});
param_tree!(Norm {
    leaves: [gain, bias],
    nested: []
});
param_tree!(AttentionParams {
    leaves: [query, key, value, output],
    nested: []
});
param_tree!(EncoderLayer {
    leaves: [],
    nested: [attention, norm1, ff_in, ff_out, norm2]
});
param_tree!(Resampler {
    leaves: [patch_map],
    nested: [attention]
});

impl<T> ParamTree<T> for ModelParams<T> {
    type Mapped<U> = ModelParams<U>;

    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a T)) {
        self.embed.visit(&join(prefix, "embed"), f);
        for (i, l) in self.integrated.iter().enumerate() {
            l.visit(&join(prefix, &format!("integrated.{i}")), f);
        }
        self.resampler.visit(&join(prefix, "resampler"), f);
        for (i, l) in self.cointegrated.iter().enumerate() {
            l.visit(&join(prefix, &format!("cointegrated.{i}")), f);
        }
        self.head.visit(&join(prefix, "head"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut T)) {
        self.embed.visit_mut(&join(prefix, "embed"), f);
        for (i, l) in self.integrated.iter_mut().enumerate() {
            l.visit_mut(&join(prefix, &format!("integrated.{i}")), f);
        }
        self.resampler.visit_mut(&join(prefix, "resampler"), f);
        for (i, l) in self.cointegrated.iter_mut().enumerate() {
            l.visit_mut(&join(prefix, &format!("cointegrated.{i}")), f);
        }
        self.head.visit_mut(&join(prefix, "head"), f);
    }

    fn map<U>(&self, f: &mut dyn FnMut(&T) -> U) -> ModelParams<U> {
        ModelParams {
            embed: self.embed.map(f),
            integrated: self.integrated.iter().map(|l| l.map(f)).collect(),
            resampler: self.resampler.map(f),
            cointegrated: self.cointegrated.iter().map(|l| l.map(f)).collect(),
            head: self.head.map(f),
        }
    }
}

struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    fn uniform(&mut self, shape: &[usize], bound: f64) -> Tensor {
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| self.rng.random_range(-bound..bound))
            .collect();
        Tensor::new(shape, data).unwrap()
    }

    /// Bounds of `1/sqrt(fan_in)` for both weight and bias.
    fn linear(&mut self, fan_in: usize, fan_out: usize) -> Linear<Tensor> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        Linear {
            weight: self.uniform(&[fan_in, fan_out], bound),
            bias: self.uniform(&[fan_out], bound),
        }
    }

    fn norm(&mut self, dim: usize) -> Norm<Tensor> {
        Norm {
            gain: Tensor::full(&[dim], 1.0),
            bias: Tensor::zeros(&[dim]),
        }
    }

    fn attention(&mut self, d: usize) -> AttentionParams<Tensor> {
        let bound = 1.0 / (d as f64).sqrt();
        AttentionParams {
            query: self.uniform(&[d, d], bound),
            key: self.uniform(&[d, d], bound),
            value: self.uniform(&[d, d], bound),
            output: self.uniform(&[d, d], bound),
        }
    }

    fn encoder(&mut self, d: usize, ff: usize) -> EncoderLayer<Tensor> {
        EncoderLayer {
            attention: self.attention(d),
            norm1: self.norm(d),
            ff_in: self.linear(d, ff),
            ff_out: self.linear(ff, d),
            norm2: self.norm(d),
        }
    }
}

/// `[from × to]` matrix averaging contiguous blocks of `from / to` patches;
/// the identity when `from == to`.
pub fn block_average_map(from: usize, to: usize) -> Tensor {
    let mut t = Tensor::zeros(&[from, to]);
    for i in 0..from {
        let j = (i * to / from).min(to - 1);
        t.set(&[i, j], 1.0);
    }
    for j in 0..to {
        let count: f64 = (0..from).map(|i| t.at(&[i, j])).sum();
        if count > 0.0 {
            for i in 0..from {
                let v = t.at(&[i, j]) / count;
                t.set(&[i, j], v);
            }
        }
    }
    t
}

impl ModelParams<Tensor> {
    /// Seeded initialization. Projections use `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`,
    /// norms start at unit gain and zero bias, and the patch map starts as a
    /// block average.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init = Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let (d, ff) = (config.hidden_dim, config.ff_dim);
        let (n, m) = (config.num_patches(), config.downsampled_patches);
        Ok(ModelParams {
            embed: init.linear(config.patch_len, d),
            integrated: (0..config.n_integrated_layers)
                .map(|_| init.encoder(d, ff))
                .collect(),
            resampler: Resampler {
                patch_map: block_average_map(n, m),
                attention: init.attention(d),
            },
            cointegrated: (0..config.n_cointegrated_layers)
                .map(|_| init.encoder(d, ff))
                .collect(),
            head: init.linear(m * d, config.output_len),
        })
    }

    /// Registers every tensor as a trainable leaf on `tape`.
    pub fn register(&self, tape: &mut Tape) -> ModelParams<Var> {
        self.map(&mut |t| tape.leaf(t.clone()))
    }

    /// Registers every tensor as a constant (inference only).
    pub fn register_frozen(&self, tape: &mut Tape) -> ModelParams<Var> {
        self.map(&mut |t| tape.constant(t.clone()))
    }

    /// Copies gradients from a backward pass into each tensor's `grad`.
    pub fn collect_grads(&mut self, tape: &Tape, vars: &ModelParams<Var>) {
        let mut grads = Vec::new();
        vars.visit("", &mut |_, v| grads.push(*v));
        let mut it = grads.into_iter();
        self.visit_mut("", &mut |_, t| {
            let v = it.next().expect("parameter trees differ");
            t.grad = Some(
                tape.grad(v)
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| vec![0.0; t.numel()]),
            );
        });
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.visit("", &mut |name, t| out.push((name, t)));
        out
    }

    /// Every tensor in traversal order.
    pub fn to_flat(&self) -> Vec<Tensor> {
        self.named().into_iter().map(|(_, t)| t.clone()).collect()
    }

    /// Same tree shape with leaves taken from `vars` in traversal order.
    pub fn with_vars(&self, vars: &[Var]) -> ModelParams<Var> {
        let mut it = vars.iter();
        self.map(&mut |_| *it.next().expect("too few variables for parameter tree"))
    }

    pub fn num_scalars(&self) -> usize {
        self.named().iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.visit_mut("", &mut |_, t| t.grad = None);
    }

    /// Fails unless every tensor has the shape `config` implies.
    pub fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        let expected = ModelParams::init(config, 0)?;
        let a = self.named();
        let b = expected.named();
        if a.len() != b.len() {
            return Err(Error::Config(format!(
                "parameter count {} does not match configuration ({})",
                a.len(),
                b.len()
            )));
        }
        for ((na, ta), (nb, tb)) in a.iter().zip(&b) {
            if na != nb || ta.shape() != tb.shape() {
                return Err(Error::Config(format!(
                    "parameter {na} has shape {:?}, configuration expects {nb} {:?}",
                    ta.shape(),
                    tb.shape()
                )));
            }
        }
        Ok(())
    }
}
