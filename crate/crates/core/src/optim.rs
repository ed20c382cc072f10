//! Parameter initialization and the Adam optimizer.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::rng::StreamKey;
use crate::{Error, Result, Tensor};

/// Glorot/Xavier uniform initialization on `±sqrt(6 / (rows + cols))`.
pub fn glorot_init(rows: usize, cols: usize, seed: u64) -> Tensor {
    let bound = libm::sqrt(6.0 / (rows + cols) as f64);
    let mut rng = StreamKey::root(seed).label("glorot").rng();
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
}

/// A named trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        Param {
            name: name.into(),
            value,
        }
    }
}

/// Adam with bias correction; `weight_decay` is classic L2 (added to the
/// gradient before the moment updates).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            lr: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 5e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &[Param]) -> Self {
        let zeros = |p: &Param| Tensor::zeros(p.value.rows(), p.value.cols());
        AdamState {
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

impl Adam {
    /// One update. Nothing is modified if any gradient is non-finite.
    pub fn step(&self, params: &mut [Param], grads: &[Tensor], state: &mut AdamState) -> Result<()> {
        if grads.len() != params.len() || state.m.len() != params.len() {
            return Err(Error::shape(
                "adam_step",
                (params.len(), 1),
                (grads.len(), state.m.len()),
            ));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.value.shape() != g.shape() {
                return Err(Error::shape("adam_step", p.value.shape(), g.shape()));
            }
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient(p.name.clone()));
            }
        }
        state.step += 1;
        let t = state.step as i32;
        let c1 = 1.0 - libm::pow(self.beta1, f64::from(t));
        let c2 = 1.0 - libm::pow(self.beta2, f64::from(t));
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (state.m[i].data_mut(), state.v[i].data_mut());
            for (e, w) in p.value.data_mut().iter_mut().enumerate() {
                let grad = g.data()[e] + self.weight_decay * *w;
                m[e] = self.beta1 * m[e] + (1.0 - self.beta1) * grad;
                v[e] = self.beta2 * v[e] + (1.0 - self.beta2) * grad * grad;
                let m_hat = m[e] / c1;
                let v_hat = v[e] / c2;
                *w -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            }
        }
        Ok(())
    }
}
