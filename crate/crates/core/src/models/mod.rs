//! GCN and APPNP backbones built on the message-matrix primitives, plus the
//! full-batch training loop.
//!
//! Models never implement dropping themselves: every mask comes from
//! [`crate::drop::sample_mask`] (or its input-level forms), and the
//! evaluation path never samples one.

mod appnp;
mod gcn;
mod metrics;
mod train;

use alloc::format;
use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::drop::{sample_edge_rows, sample_input_mask, sample_mask, DropKind, DropMask, DropSpec, MessageLayout};
use crate::{Error, Result, Tensor};

pub use appnp::Appnp;
pub use gcn::Gcn;
pub use metrics::{accuracy, evaluate, macro_f1, Metric};
pub use train::{train, EpochRecord, TrainConfig, TrainReport};

/// Where the three classic methods apply their masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Placement {
    /// A fresh mask on the message matrix of every layer / propagation step.
    #[default]
    Message,
    /// Once per forward pass on the initial input: Dropout and DropNode mask
    /// the feature matrix, DropEdge drops one edge set shared by all layers.
    Input,
}

impl core::str::FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "message" => Ok(Placement::Message),
            "input" => Ok(Placement::Input),
            other => Err(Error::param(format!("unknown placement '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum Model {
    Gcn(Gcn),
    Appnp(Appnp),
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Gcn(_) => "gcn",
            Model::Appnp(_) => "appnp",
        }
    }

    pub fn init(&self, in_dim: usize, classes: usize, seed: u64) -> Result<Vec<crate::optim::Param>> {
        match self {
            Model::Gcn(m) => m.init(in_dim, classes, seed),
            Model::Appnp(m) => m.init(in_dim, classes, seed),
        }
    }

    pub fn forward(&self, tape: &mut Tape, prop: &Propagation<'_>, x: Var, params: &[Var]) -> Result<Var> {
        match self {
            Model::Gcn(m) => m.forward(tape, prop, x, params),
            Model::Appnp(m) => m.forward(tape, prop, x, params),
        }
    }
}

/// Propagation context of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Propagation<'a> {
    pub layout: &'a MessageLayout,
    pub drop: &'a DropSpec,
    pub placement: Placement,
    /// `Some(epoch)` samples masks for that epoch; `None` is evaluation.
    pub epoch: Option<u64>,
}

impl<'a> Propagation<'a> {
    pub fn eval(layout: &'a MessageLayout, drop: &'a DropSpec) -> Self {
        Propagation {
            layout,
            drop,
            placement: Placement::Message,
            epoch: None,
        }
    }

    /// Resolves which masks this pass draws.
    pub(crate) fn plan(&self, features: &Tensor) -> Result<MaskPlan> {
        let Some(epoch) = self.epoch else {
            return Ok(MaskPlan::Clean);
        };
        if self.drop.is_identity() {
            return Ok(MaskPlan::Clean);
        }
        match (self.placement, self.drop.kind) {
            (Placement::Message, _) => Ok(MaskPlan::PerStep(epoch)),
            (Placement::Input, DropKind::Dropout | DropKind::DropNode) => {
                let (n, c) = features.shape();
                let mut rng = self.drop.rng(0, epoch, 0);
                Ok(MaskPlan::Input(sample_input_mask(self.drop, n, c, &mut rng)?))
            }
            (Placement::Input, DropKind::DropEdge) => {
                let rate = self.drop.rate.for_node(0);
                let mut rng = self.drop.rng(0, epoch, 0);
                let (keep, scale) = sample_edge_rows(self.layout, rate, &mut rng);
                Ok(MaskPlan::SharedRows(keep, scale))
            }
            (Placement::Input, kind) => Err(Error::param(format!(
                "input placement is only defined for dropout, dropedge and dropnode, not {kind}"
            ))),
        }
    }
}

pub(crate) enum MaskPlan {
    Clean,
    PerStep(u64),
    Input(Tensor),
    SharedRows(Vec<bool>, Vec<f64>),
}

impl MaskPlan {
    /// Applies an input-level mask to the features, if the plan has one.
    pub(crate) fn prepare_input(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            MaskPlan::Input(factor) => tape.hadamard_const(x, factor.clone()),
            _ => Ok(x),
        }
    }

    /// Mask for the message matrix of propagation step `step` with `cols`
    /// columns.
    pub(crate) fn step_mask(&self, prop: &Propagation<'_>, step: usize, cols: usize) -> Result<Option<DropMask>> {
        match self {
            MaskPlan::PerStep(epoch) => {
                let mut rng = prop.drop.rng(step as u64, *epoch, 0);
                sample_mask(prop.drop, prop.layout, cols, &mut rng).map(Some)
            }
            MaskPlan::SharedRows(keep, scale) => Ok(Some(DropMask::from_rows(keep, scale, cols))),
            MaskPlan::Clean | MaskPlan::Input(_) => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use crate::drop::DropRate;
    use crate::graph::{Graph, Split};
    use alloc::vec;

    /// Two 4-cliques joined by the edge 3-4; node features point at the clique.
    fn two_cliques() -> Graph {
        let mut edges = Vec::new();
        for base in [0, 4] {
            for i in 0..4 {
                for j in i + 1..4 {
                    edges.push((base + i, base + j));
                }
            }
        }
        edges.push((3, 4));
        let x = Tensor::from_fn(8, 3, |v, c| match c {
            0 => f64::from(u8::from(v < 4)) + 0.1 * v as f64,
            1 => f64::from(u8::from(v >= 4)),
            _ => 0.5,
        });
        let split = (0..8)
            .map(|v| match v % 4 {
                0 => Split::Train,
                1 => Split::Val,
                _ => Split::Test,
            })
            .collect();
        Graph::from_undirected_edges(8, &edges)
            .unwrap()
            .with_features(x)
            .unwrap()
            .with_labels((0..8).map(|v| Some(usize::from(v >= 4))).collect())
            .unwrap()
            .with_split(split)
            .unwrap()
    }

    fn layout_of(g: &Graph) -> MessageLayout {
        MessageLayout::normalized(&g.add_self_loops().unwrap()).unwrap()
    }

    fn run(model: &Model, prop: &Propagation<'_>, x: &Tensor, params: &[crate::optim::Param]) -> Tensor {
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let vars: Vec<_> = params.iter().map(|p| tape.leaf(p.value.clone())).collect();
        let out = model.forward(&mut tape, prop, xv, &vars).unwrap();
        tape.value(out).clone()
    }

    #[test]
    fn evaluation_ignores_the_drop_spec() {
        let g = two_cliques();
        let layout = layout_of(&g);
        let x = g.features().unwrap();
        let model = Model::Gcn(Gcn::default());
        let params = model.init(3, 2, 1).unwrap();
        let none = DropSpec::none();
        let heavy = DropSpec::global(DropKind::DropMessage, 0.9, 5).unwrap();
        let clean = run(&model, &Propagation::eval(&layout, &none), x, &params);
        let eval = run(&model, &Propagation::eval(&layout, &heavy), x, &params);
        assert_eq!(clean, eval);
        let training = Propagation {
            epoch: Some(1),
            ..Propagation::eval(&layout, &heavy)
        };
        assert_ne!(run(&model, &training, x, &params), clean);
    }

    #[test]
    fn zero_rate_trajectories_match_across_methods() {
        let g = two_cliques();
        let mut reference = None;
        for kind in DropKind::METHODS {
            let mut cfg = TrainConfig::new(Model::Gcn(Gcn::default()), DropSpec::global(kind, 0.0, 0).unwrap(), 3);
            cfg.epochs = 15;
            let report = train(&g, &cfg).unwrap();
            match &reference {
                None => reference = Some(report.records),
                Some(r) => assert_eq!(r, &report.records, "{kind}"),
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_with_frozen_masks() {
        let g = two_cliques();
        let layout = layout_of(&g);
        let x = g.features().unwrap().clone();
        let labels = g.labels().to_vec();
        let mask = vec![true; 8];
        let models = [
            Model::Gcn(Gcn::default()),
            Model::Appnp(Appnp {
                alpha: 0.1,
                k: 3,
                bias: true,
            }),
        ];
        for model in models {
            for kind in DropKind::METHODS {
                let drop = DropSpec::global(kind, 0.3, 11).unwrap();
                let prop = Propagation {
                    layout: &layout,
                    drop: &drop,
                    placement: Placement::Message,
                    epoch: Some(4),
                };
                let params: Vec<Tensor> = model.init(3, 2, 2).unwrap().into_iter().map(|p| p.value).collect();
                let err = grad_check(
                    |tape, vars| {
                        let xv = tape.leaf(x.clone());
                        let out = model.forward(tape, &prop, xv, vars)?;
                        tape.masked_softmax_ce(out, &labels, &mask)
                    },
                    &params,
                    1e-6,
                )
                .unwrap();
                assert!(err < 1e-5, "{} {kind}: {err}", model.name());
            }
        }
    }

    #[test]
    fn input_and_message_placement_agree_for_one_layer() {
        let g = two_cliques();
        let one = Model::Gcn(Gcn {
            layers: 1,
            ..Gcn::default()
        });
        for kind in [DropKind::Dropout, DropKind::DropEdge, DropKind::DropNode] {
            let mut cfg = TrainConfig::new(one.clone(), DropSpec::global(kind, 0.4, 0).unwrap(), 9);
            cfg.epochs = 20;
            let message = train(&g, &cfg).unwrap();
            cfg.placement = Placement::Input;
            let input = train(&g, &cfg).unwrap();
            assert_eq!(message.records, input.records, "{kind}");
        }
    }

    #[test]
    fn input_placement_rejects_dropmessage() {
        let g = two_cliques();
        let mut cfg = TrainConfig::new(
            Model::Gcn(Gcn::default()),
            DropSpec::global(DropKind::DropMessage, 0.2, 0).unwrap(),
            0,
        );
        cfg.placement = Placement::Input;
        assert!(matches!(train(&g, &cfg), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn appnp_closed_forms() {
        let g = two_cliques();
        let layout = layout_of(&g);
        let x = g.features().unwrap();
        let none = DropSpec::none();
        let prop = Propagation::eval(&layout, &none);

        let teleport_only = Model::Appnp(Appnp {
            alpha: 1.0,
            k: 10,
            bias: false,
        });
        let params = teleport_only.init(3, 2, 4).unwrap();
        let h0 = x.matmul(&params[0].value).unwrap();
        assert!(run(&teleport_only, &prop, x, &params).max_abs_diff(&h0) < 1e-12);

        let one_step = Model::Appnp(Appnp {
            alpha: 0.25,
            k: 1,
            bias: false,
        });
        let a = layout.dense_operator();
        let expected = a
            .matmul(&h0)
            .unwrap()
            .zip_map(&h0, |p, h| 0.75 * p + 0.25 * h)
            .unwrap();
        assert!(run(&one_step, &prop, x, &params).max_abs_diff(&expected) < 1e-12);

        let zero = Appnp {
            alpha: 0.1,
            k: 0,
            bias: true,
        };
        assert!(zero.init(3, 2, 0).is_err());
    }

    #[test]
    fn gcn_matches_dense_propagation() {
        let g = two_cliques();
        let layout = layout_of(&g);
        let x = g.features().unwrap();
        let none = DropSpec::none();
        let model = Model::Gcn(Gcn::default());
        let params = model.init(3, 2, 6).unwrap();
        let a = layout.dense_operator();
        let h1 = a.matmul(x).unwrap().matmul(&params[0].value).unwrap().map(|v| v.max(0.0));
        let out = a.matmul(&h1).unwrap().matmul(&params[2].value).unwrap();
        assert!(run(&model, &Propagation::eval(&layout, &none), x, &params).max_abs_diff(&out) < 1e-12);
    }

    #[test]
    fn separable_fixture_trains_cleanly() {
        let g = two_cliques();
        let cfg = TrainConfig::new(Model::Gcn(Gcn::default()), DropSpec::none(), 1);
        let report = train(&g, &cfg).unwrap();
        assert_eq!(report.records.len(), 201);
        assert_eq!(report.records[0].epoch, 0);
        for w in report.records[20..].windows(2) {
            assert!(w[1].train_loss <= w[0].train_loss + 1e-12, "epoch {}", w[1].epoch);
        }
        let last = report.records.last().unwrap();
        assert_eq!((last.train_acc, last.val_acc, last.test_acc), (1.0, 1.0, 1.0));

        for kind in DropKind::METHODS {
            let drop = DropSpec::global(kind, 0.2, 0).unwrap();
            let report = train(&g, &TrainConfig::new(Model::Gcn(Gcn::default()), drop, 1)).unwrap();
            assert_eq!(report.records.last().unwrap().test_acc, 1.0, "{kind}");
        }
    }

    #[test]
    fn training_is_deterministic_and_errors_are_reported() {
        let g = two_cliques();
        let drop = DropSpec::new(DropKind::DropMessage, DropRate::Nodewise(vec![0.3; 8]), 0).unwrap();
        let mut cfg = TrainConfig::new(Model::Appnp(Appnp::default()), drop, 2);
        cfg.epochs = 10;
        assert_eq!(train(&g, &cfg).unwrap(), train(&g, &cfg).unwrap());

        let no_val = g.clone().with_split(vec![Split::Train; 8]).unwrap();
        assert!(matches!(train(&no_val, &cfg), Err(Error::EmptySplit("val"))));

        let blown = g.clone().with_features(Tensor::filled(8, 3, f64::NAN)).unwrap();
        assert!(matches!(train(&blown, &cfg), Err(Error::Diverged(1))));
    }
}
