use crate::error::{Error, Result};
use crate::model::{ModelParams, ParamTree};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moments. Moment buffers are created on the first
/// step and pinned to the shapes seen then.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Result<Self> {
        let c = &config;
        if !(c.learning_rate >= 0.0 && c.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be finite and >= 0, got {}",
                c.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&c.beta1) || !(0.0..1.0).contains(&c.beta2) || !(c.eps > 0.0) {
            return Err(Error::Config(
                "adam betas must lie in [0, 1) and eps must be positive".into(),
            ));
        }
        Ok(Adam {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// First and second moment buffers, one pair per parameter tensor.
    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.m, &self.v)
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Contract(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::Contract(format!(
                "optimizer state tracks {} tensors, got {}",
                self.m.len(),
                params.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.numel() != g.len() || p.numel() != self.m[i].len() {
                return Err(Error::shape(
                    "adam_step",
                    &[self.m[i].len()],
                    &[p.numel(), g.len()],
                ));
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            eps,
        } = self.config;
        let t = self.step as f64;
        let c1 = 1.0 - b1.powf(t);
        let c2 = 1.0 - b2.powf(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (k, w) in p.data_mut().iter_mut().enumerate() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                *w -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }

    /// Steps every tensor of `params` using its stored `grad` (missing = zero)
    /// and clears the gradients.
    pub fn step_model(&mut self, params: &mut ModelParams) -> Result<()> {
        let mut flat = params.to_flat();
        let grads: Vec<Vec<f64>> = flat
            .iter_mut()
            .map(|t| t.grad.take().unwrap_or_else(|| vec![0.0; t.numel()]))
            .collect();
        self.step(&mut flat, &grads)?;
        let mut it = flat.into_iter();
        params.visit_mut("", &mut |_, t| *t = it.next().expect("flattened tree"));
        Ok(())
    }
}
