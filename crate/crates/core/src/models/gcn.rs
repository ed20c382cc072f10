use alloc::format;
use alloc::vec::Vec;

use super::Propagation;
use crate::autodiff::{Tape, Var};
use crate::drop::{aggregate_var, build_messages_var};
use crate::optim::{glorot_init, Param};
use crate::rng::StreamKey;
use crate::{Error, Result, Tensor};

/// `layers`-deep GCN: per layer, build the message matrix, optionally mask
/// it, aggregate, then apply the layer's linear map (ReLU on all but the
/// last layer).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Gcn {
    pub layers: usize,
    pub hidden: usize,
    pub bias: bool,
}

impl Default for Gcn {
    fn default() -> Self {
        Gcn {
            layers: 2,
            hidden: 16,
            bias: true,
        }
    }
}

impl Gcn {
    fn dims(&self, in_dim: usize, classes: usize) -> Vec<(usize, usize)> {
        (0..self.layers)
            .map(|l| {
                let i = if l == 0 { in_dim } else { self.hidden };
                let o = if l + 1 == self.layers { classes } else { self.hidden };
                (i, o)
            })
            .collect()
    }

    /// Parameters in order `W1, [b1,] W2, [b2,] ...`.
    pub fn init(&self, in_dim: usize, classes: usize, seed: u64) -> Result<Vec<Param>> {
        if self.layers == 0 || self.hidden == 0 || in_dim == 0 || classes == 0 {
            return Err(Error::param("gcn needs at least one layer and positive widths"));
        }
        let key = StreamKey::root(seed).label("gcn-init");
        let mut params = Vec::new();
        for (l, (i, o)) in self.dims(in_dim, classes).into_iter().enumerate() {
            params.push(Param::new(
                format!("W{}", l + 1),
                glorot_init(i, o, key.index(l as u64).value()),
            ));
            if self.bias {
                params.push(Param::new(format!("b{}", l + 1), Tensor::zeros(1, o)));
            }
        }
        Ok(params)
    }

    pub fn forward(&self, tape: &mut Tape, prop: &Propagation<'_>, x: Var, params: &[Var]) -> Result<Var> {
        let per_layer = if self.bias { 2 } else { 1 };
        if params.len() != per_layer * self.layers {
            return Err(Error::shape(
                "gcn parameters",
                (params.len(), 1),
                (per_layer * self.layers, 1),
            ));
        }
        let plan = prop.plan(tape.value(x))?;
        let mut h = plan.prepare_input(tape, x)?;
        for l in 0..self.layers {
            let cols = tape.value(h).cols();
            let mask = plan.step_mask(prop, l, cols)?;
            let messages = build_messages_var(tape, prop.layout, h, mask.as_ref())?;
            let agg = aggregate_var(tape, prop.layout, messages)?;
            let mut z = tape.matmul(agg, params[per_layer * l])?;
            if self.bias {
                z = tape.add_rowvec(z, params[per_layer * l + 1])?;
            }
            h = if l + 1 < self.layers { tape.relu(z) } else { z };
        }
        Ok(h)
    }
}
