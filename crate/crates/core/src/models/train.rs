use alloc::format;
use alloc::vec::Vec;

use super::{Model, Placement, Propagation};
use crate::autodiff::Tape;
use crate::drop::{DropSpec, MessageLayout};
use crate::graph::{Graph, Split};
use crate::optim::{Adam, AdamState, Param};
use crate::rng::StreamKey;
use crate::{Error, Result, Tensor};

use super::metrics::accuracy;

/// One full-batch training run. Masks are drawn from streams derived from
/// `seed`; the `stream` field of `drop` is ignored.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub model: Model,
    pub drop: DropSpec,
    pub placement: Placement,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(model: Model, drop: DropSpec, seed: u64) -> Self {
        let adam = Adam::default();
        TrainConfig {
            model,
            drop,
            placement: Placement::Message,
            epochs: 200,
            lr: adam.lr,
            weight_decay: adam.weight_decay,
            seed,
        }
    }

    fn optimizer(&self) -> Result<Adam> {
        let wd_ok = self.weight_decay.is_finite() && self.weight_decay >= 0.0;
        if !(self.lr.is_finite() && self.lr > 0.0 && wd_ok) {
            return Err(Error::param(format!(
                "learning rate must be positive and weight decay non-negative (lr={}, wd={})",
                self.lr, self.weight_decay
            )));
        }
        Ok(Adam {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..Adam::default()
        })
    }
}

/// Metrics after one epoch; epoch 0 is the untrained model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    /// Loss of the (masked) training forward pass of this epoch; for epoch 0
    /// the clean training loss.
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
    /// Earliest epoch with the highest validation accuracy.
    pub best_epoch: usize,
    pub best_val_acc: f64,
    /// Test accuracy at `best_epoch`.
    pub test_acc: f64,
    pub params: Vec<Param>,
    /// Evaluation-mode output of the final model, one row per node.
    pub representations: Tensor,
}

struct Split3 {
    train: Vec<bool>,
    val: Vec<bool>,
    test: Vec<bool>,
}

fn split_masks(g: &Graph) -> Result<Split3> {
    let labeled = |tag: Split| -> Vec<bool> {
        g.split()
            .iter()
            .zip(g.labels())
            .map(|(&s, l)| s == tag && l.is_some())
            .collect()
    };
    let masks = Split3 {
        train: labeled(Split::Train),
        val: labeled(Split::Val),
        test: labeled(Split::Test),
    };
    for (mask, name) in [(&masks.train, "train"), (&masks.val, "val"), (&masks.test, "test")] {
        if !mask.iter().any(|&m| m) {
            return Err(Error::EmptySplit(name));
        }
    }
    Ok(masks)
}

fn forward_with(
    model: &Model,
    prop: &Propagation<'_>,
    x: &Tensor,
    params: &[Param],
) -> Result<(Tape, crate::autodiff::Var, Vec<crate::autodiff::Var>)> {
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let vars: Vec<_> = params.iter().map(|p| tape.leaf(p.value.clone())).collect();
    let out = model.forward(&mut tape, prop, xv, &vars)?;
    Ok((tape, out, vars))
}

/// Trains `cfg.model` on a loop-free labeled graph (self-loops are added
/// here) with Adam and softmax cross-entropy on the training split.
pub fn train(g: &Graph, cfg: &TrainConfig) -> Result<TrainReport> {
    let x = g
        .features()
        .ok_or_else(|| Error::param("training requires node features"))?
        .clone();
    let looped = if g.has_self_loops() { g.clone() } else { g.add_self_loops()? };
    let layout = MessageLayout::normalized(&looped)?;
    let masks = split_masks(g)?;
    let labels = g.labels();
    let classes = g.num_classes();
    let adam = cfg.optimizer()?;
    let drop = DropSpec {
        stream: StreamKey::root(cfg.seed).label("dropping").value(),
        ..cfg.drop.clone()
    };

    let mut params = cfg.model.init(x.cols(), classes, cfg.seed)?;
    let mut state = AdamState::new(&params);
    let eval = Propagation::eval(&layout, &drop);

    let score = |params: &[Param], epoch: usize, train_loss: Option<f64>| -> Result<(EpochRecord, Tensor)> {
        let (mut tape, out, _) = forward_with(&cfg.model, &eval, &x, params)?;
        let train_loss = match train_loss {
            Some(l) => l,
            None => {
                let loss = tape.masked_softmax_ce(out, labels, &masks.train)?;
                tape.value(loss).get(0, 0)
            }
        };
        let logits = tape.value(out).clone();
        let record = EpochRecord {
            epoch,
            train_loss,
            train_acc: accuracy(&logits, labels, &masks.train)?,
            val_acc: accuracy(&logits, labels, &masks.val)?,
            test_acc: accuracy(&logits, labels, &masks.test)?,
        };
        Ok((record, logits))
    };

    let (first, mut logits) = score(&params, 0, None)?;
    let mut records = Vec::with_capacity(cfg.epochs + 1);
    records.push(first);
    for epoch in 1..=cfg.epochs {
        let prop = Propagation {
            layout: &layout,
            drop: &drop,
            placement: cfg.placement,
            epoch: Some(epoch as u64),
        };
        let (mut tape, out, vars) = forward_with(&cfg.model, &prop, &x, &params)?;
        let loss = tape.masked_softmax_ce(out, labels, &masks.train)?;
        let loss_value = tape.value(loss).get(0, 0);
        if !loss_value.is_finite() {
            return Err(Error::Diverged(epoch));
        }
        let grads = tape.backward(loss)?;
        let grads: Vec<Tensor> = vars
            .iter()
            .zip(&params)
            .map(|(&v, p)| grads.get_or_zeros(v, p.value.shape()))
            .collect();
        adam.step(&mut params, &grads, &mut state)?;
        let (record, out_logits) = score(&params, epoch, Some(loss_value))?;
        logits = out_logits;
        records.push(record);
    }

    let best = records
        .iter()
        .fold(&records[0], |best, r| if r.val_acc > best.val_acc { r } else { best });
    Ok(TrainReport {
        best_epoch: best.epoch,
        best_val_acc: best.val_acc,
        test_acc: best.test_acc,
        records,
        params,
        representations: logits,
    })
}
