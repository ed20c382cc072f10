use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;

use super::MessageLayout;
use crate::rng::{Rng, StreamKey};
use crate::{Error, Result, Tensor};

/// The dropping methods, by the granularity of their Bernoulli draws on the
/// message matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum DropKind {
    None,
    /// One draw per (source node, feature); masks that column of every row
    /// sourced from the node.
    Dropout,
    /// One draw per undirected edge; masks both twin rows. Self-loops are
    /// never dropped.
    DropEdge,
    /// One draw per node; masks every row it sources, its self-loop included.
    DropNode,
    /// One draw per message element.
    DropMessage,
}

impl DropKind {
    pub const METHODS: [DropKind; 4] = [
        DropKind::Dropout,
        DropKind::DropEdge,
        DropKind::DropNode,
        DropKind::DropMessage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DropKind::None => "none",
            DropKind::Dropout => "dropout",
            DropKind::DropEdge => "dropedge",
            DropKind::DropNode => "dropnode",
            DropKind::DropMessage => "dropmessage",
        }
    }
}

impl core::fmt::Display for DropKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for DropKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DropKind::None),
            "dropout" => Ok(DropKind::Dropout),
            "dropedge" => Ok(DropKind::DropEdge),
            "dropnode" => Ok(DropKind::DropNode),
            "dropmessage" => Ok(DropKind::DropMessage),
            other => Err(Error::param(format!("unknown drop kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum DropRate {
    Global(f64),
    /// One rate per source node (DropMessage only).
    Nodewise(Vec<f64>),
}

impl DropRate {
    fn check(rate: f64) -> Result<()> {
        if (0.0..1.0).contains(&rate) {
            Ok(())
        } else {
            Err(Error::param(format!("dropping rate must lie in [0, 1), got {rate}")))
        }
    }

    /// Rate applied to rows sourced from `node`.
    pub fn for_node(&self, node: usize) -> f64 {
        match self {
            DropRate::Global(r) => *r,
            DropRate::Nodewise(rates) => rates[node],
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            DropRate::Global(r) => *r,
            DropRate::Nodewise(rates) if rates.is_empty() => 0.0,
            DropRate::Nodewise(rates) => rates.iter().sum::<f64>() / rates.len() as f64,
        }
    }
}

/// A dropping method, its rate(s) and the root of its random streams.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DropSpec {
    pub kind: DropKind,
    pub rate: DropRate,
    pub stream: u64,
}

impl DropSpec {
    pub fn new(kind: DropKind, rate: DropRate, stream: u64) -> Result<Self> {
        match &rate {
            DropRate::Global(r) => DropRate::check(*r)?,
            DropRate::Nodewise(rates) => {
                if kind != DropKind::DropMessage {
                    return Err(Error::NodewiseUnsupported(kind));
                }
                rates.iter().try_for_each(|&r| DropRate::check(r))?;
            }
        }
        Ok(DropSpec { kind, rate, stream })
    }

    pub fn none() -> Self {
        DropSpec {
            kind: DropKind::None,
            rate: DropRate::Global(0.0),
            stream: 0,
        }
    }

    pub fn global(kind: DropKind, rate: f64, stream: u64) -> Result<Self> {
        Self::new(kind, DropRate::Global(rate), stream)
    }

    /// The stream for one mask draw (layer/step, epoch, trial).
    pub fn rng(&self, layer: u64, epoch: u64, trial: u64) -> Rng {
        StreamKey::root(self.stream)
            .label("mask")
            .index(layer)
            .index(epoch)
            .index(trial)
            .rng()
    }

    /// True when every mask it can produce keeps everything unscaled.
    pub fn is_identity(&self) -> bool {
        self.kind == DropKind::None
            || match &self.rate {
                DropRate::Global(r) => *r == 0.0,
                DropRate::Nodewise(rates) => rates.iter().all(|&r| r == 0.0),
            }
    }
}

/// Realized mask over a `k x c` message matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DropMask {
    rows: usize,
    cols: usize,
    keep: Vec<bool>,
    scale: Vec<f64>,
}

impl DropMask {
    pub fn keep_all(rows: usize, cols: usize) -> Self {
        DropMask {
            rows,
            cols,
            keep: alloc::vec![true; rows * cols],
            scale: alloc::vec![1.0; rows],
        }
    }

    /// Expands a row-level keep pattern to `cols` columns.
    pub fn from_rows(row_keep: &[bool], row_scale: &[f64], cols: usize) -> Self {
        DropMask {
            rows: row_keep.len(),
            cols,
            keep: row_keep
                .iter()
                .flat_map(|&k| core::iter::repeat_n(k, cols))
                .collect(),
            scale: row_scale.to_vec(),
        }
    }

    /// Builds a mask from explicit keep rows; all rows must share one width.
    pub fn from_keep(keep: Vec<Vec<bool>>, row_scale: Vec<f64>) -> Result<Self> {
        let rows = keep.len();
        let cols = keep.first().map_or(0, Vec::len);
        if row_scale.len() != rows {
            return Err(Error::shape("mask scale", (row_scale.len(), 1), (rows, 1)));
        }
        if let Some(bad) = keep.iter().find(|r| r.len() != cols) {
            return Err(Error::shape("mask row", (1, bad.len()), (1, cols)));
        }
        Ok(DropMask {
            rows,
            cols,
            keep: keep.into_iter().flatten().collect(),
            scale: row_scale,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn keep(&self, row: usize, col: usize) -> bool {
        self.keep[row * self.cols + col]
    }

    pub fn keep_row(&self, row: usize) -> &[bool] {
        &self.keep[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_scale(&self, row: usize) -> f64 {
        self.scale[row]
    }

    pub fn kept_count(&self) -> usize {
        self.keep.iter().filter(|k| **k).count()
    }

    pub fn masked_count(&self) -> usize {
        self.keep.len() - self.kept_count()
    }

    /// `keep * scale` as a dense constant for [`crate::autodiff::Tape::hadamard_const`].
    pub fn factor(&self) -> Tensor {
        Tensor::from_fn(self.rows, self.cols, |j, l| {
            if self.keep(j, l) {
                self.scale[j]
            } else {
                0.0
            }
        })
    }
}

#[inline]
fn bernoulli_keep(rng: &mut Rng, rate: f64) -> bool {
    rng.random::<f64>() >= rate
}

fn inv_keep(rate: f64) -> f64 {
    1.0 / (1.0 - rate)
}

fn global_rate(spec: &DropSpec) -> Result<f64> {
    match &spec.rate {
        DropRate::Global(r) => Ok(*r),
        DropRate::Nodewise(_) => Err(Error::NodewiseUnsupported(spec.kind)),
    }
}

/// Per-(node, feature) keep draws, row-major `n x c`.
pub(crate) fn draw_feature_keep(n: usize, c: usize, rate: f64, rng: &mut Rng) -> Vec<bool> {
    (0..n * c).map(|_| bernoulli_keep(rng, rate)).collect()
}

pub(crate) fn draw_node_keep(n: usize, rate: f64, rng: &mut Rng) -> Vec<bool> {
    (0..n).map(|_| bernoulli_keep(rng, rate)).collect()
}

/// DropEdge row pattern: one draw per undirected non-loop edge (visited as
/// the row with `src < dst`), shared by both twin rows. Self-loop rows are
/// kept with scale 1.
pub fn sample_edge_rows(layout: &MessageLayout, rate: f64, rng: &mut Rng) -> (Vec<bool>, Vec<f64>) {
    let k = layout.num_rows();
    let mut keep = alloc::vec![true; k];
    let mut scale = alloc::vec![1.0; k];
    for j in 0..k {
        let (u, v) = (layout.src[j], layout.dst[j]);
        if u < v {
            let t = layout.twin[j];
            let kept = bernoulli_keep(rng, rate);
            keep[j] = kept;
            keep[t] = kept;
            scale[j] = inv_keep(rate);
            scale[t] = inv_keep(rate);
        }
    }
    (keep, scale)
}

/// Samples the mask of `spec.kind` over a `k x cols` message matrix.
pub fn sample_mask(spec: &DropSpec, layout: &MessageLayout, cols: usize, rng: &mut Rng) -> Result<DropMask> {
    let (n, k) = (layout.num_nodes(), layout.num_rows());
    if let DropRate::Nodewise(rates) = &spec.rate {
        if spec.kind != DropKind::DropMessage {
            return Err(Error::NodewiseUnsupported(spec.kind));
        }
        if rates.len() != n {
            return Err(Error::shape("nodewise rates", (rates.len(), 1), (n, 1)));
        }
    }
    match spec.kind {
        DropKind::None => Ok(DropMask::keep_all(k, cols)),
        DropKind::Dropout => {
            let rate = global_rate(spec)?;
            let eps = draw_feature_keep(n, cols, rate, rng);
            let mut keep = Vec::with_capacity(k * cols);
            for &u in layout.src.iter() {
                keep.extend_from_slice(&eps[u * cols..(u + 1) * cols]);
            }
            Ok(DropMask {
                rows: k,
                cols,
                keep,
                scale: alloc::vec![inv_keep(rate); k],
            })
        }
        DropKind::DropEdge => {
            let rate = global_rate(spec)?;
            let (keep, scale) = sample_edge_rows(layout, rate, rng);
            Ok(DropMask::from_rows(&keep, &scale, cols))
        }
        DropKind::DropNode => {
            let rate = global_rate(spec)?;
            let eps = draw_node_keep(n, rate, rng);
            let keep: Vec<bool> = layout.src.iter().map(|&u| eps[u]).collect();
            Ok(DropMask::from_rows(&keep, &alloc::vec![inv_keep(rate); k], cols))
        }
        DropKind::DropMessage => {
            let mut keep = Vec::with_capacity(k * cols);
            let mut scale = Vec::with_capacity(k);
            for &u in layout.src.iter() {
                let rate = spec.rate.for_node(u);
                for _ in 0..cols {
                    keep.push(bernoulli_keep(rng, rate));
                }
                scale.push(inv_keep(rate));
            }
            Ok(DropMask {
                rows: k,
                cols,
                keep,
                scale,
            })
        }
    }
}

/// Input-level form of Dropout / DropNode: the `n x c` factor `eps / (1 - rate)`
/// applied to the feature matrix before any message is built.
pub fn sample_input_mask(spec: &DropSpec, n: usize, cols: usize, rng: &mut Rng) -> Result<Tensor> {
    let rate = global_rate(spec)?;
    let s = inv_keep(rate);
    let keep = match spec.kind {
        DropKind::Dropout => draw_feature_keep(n, cols, rate, rng),
        DropKind::DropNode => draw_node_keep(n, rate, rng)
            .into_iter()
            .flat_map(|k| core::iter::repeat_n(k, cols))
            .collect(),
        DropKind::None => alloc::vec![true; n * cols],
        other => {
            return Err(Error::param(format!(
                "{other} has no feature-matrix form"
            )))
        }
    };
    Tensor::new(
        n,
        cols,
        keep.into_iter().map(|k| if k { s } else { 0.0 }).collect(),
    )
}
