use alloc::vec::Vec;

use super::Propagation;
use crate::autodiff::{Tape, Var};
use crate::drop::{aggregate_var, build_messages_var};
use crate::optim::{glorot_init, Param};
use crate::rng::StreamKey;
use crate::{Error, Result, Tensor};

/// APPNP with a single linear predictor: `H0 = X W (+ b)`, then `K` steps of
/// `Z <- (1 - alpha) * aggregate(messages(Z)) + alpha * H0`, each step with
/// its own mask during training.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Appnp {
    pub alpha: f64,
    pub k: usize,
    pub bias: bool,
}

impl Default for Appnp {
    fn default() -> Self {
        Appnp {
            alpha: 0.1,
            k: 10,
            bias: true,
        }
    }
}

impl Appnp {
    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("APPNP needs at least one propagation step"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::param("APPNP teleport probability must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn init(&self, in_dim: usize, classes: usize, seed: u64) -> Result<Vec<Param>> {
        self.validate()?;
        let key = StreamKey::root(seed).label("appnp-init");
        let mut params = alloc::vec![Param::new("W", glorot_init(in_dim, classes, key.value()))];
        if self.bias {
            params.push(Param::new("b", Tensor::zeros(1, classes)));
        }
        Ok(params)
    }

    pub fn forward(&self, tape: &mut Tape, prop: &Propagation<'_>, x: Var, params: &[Var]) -> Result<Var> {
        self.validate()?;
        let expected = if self.bias { 2 } else { 1 };
        if params.len() != expected {
            return Err(Error::shape("appnp parameters", (params.len(), 1), (expected, 1)));
        }
        let plan = prop.plan(tape.value(x))?;
        let x = plan.prepare_input(tape, x)?;
        let mut h0 = tape.matmul(x, params[0])?;
        if self.bias {
            h0 = tape.add_rowvec(h0, params[1])?;
        }
        let teleport = tape.scale(h0, self.alpha);
        let mut z = h0;
        for step in 0..self.k {
            let cols = tape.value(z).cols();
            let mask = plan.step_mask(prop, step, cols)?;
            let messages = build_messages_var(tape, prop.layout, z, mask.as_ref())?;
            let agg = aggregate_var(tape, prop.layout, messages)?;
            let damped = tape.scale(agg, 1.0 - self.alpha);
            z = tape.add(damped, teleport)?;
        }
        Ok(z)
    }
}
