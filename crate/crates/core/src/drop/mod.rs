//! The message matrix and random dropping on it.
//!
//! A [`MessageLayout`] fixes the per-row structure of the message matrix
//! (source, destination, normalization coefficient, self-loop flag, twin row)
//! for one graph. A [`MessageFrame`] pairs a layout with materialized
//! values `M`, row `j` being `coeff[j] * h[src[j]]`. All dropping methods are
//! expressed as a [`DropMask`] over `M`; see [`sample_mask`].

mod diversity;
mod mask;

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::{Error, Graph, Result, Tensor};

pub use diversity::{diversity_rate_bound, equivalence_witness, RateBound};
pub use mask::{sample_edge_rows, sample_input_mask, sample_mask, DropKind, DropMask, DropRate, DropSpec};

/// Row structure of the message matrix of one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageLayout {
    n: usize,
    src: Arc<[usize]>,
    dst: Arc<[usize]>,
    coeff: Arc<[f64]>,
    offsets: Vec<usize>,
    self_loop: Vec<bool>,
    twin: Vec<usize>,
}

impl MessageLayout {
    /// Layout with symmetric GCN normalization; `g` must carry self-loops.
    pub fn normalized(g: &Graph) -> Result<Self> {
        let coeff = g.sym_norm_coeffs()?;
        Self::with_coeffs(g, coeff)
    }

    /// Layout whose rows carry the source representation unscaled.
    pub fn unit(g: &Graph) -> Self {
        let k = g.num_directed_edges();
        Self::with_coeffs(g, alloc::vec![1.0; k]).expect("length matches")
    }

    pub fn with_coeffs(g: &Graph, coeff: Vec<f64>) -> Result<Self> {
        if coeff.len() != g.num_directed_edges() {
            return Err(Error::shape(
                "MessageLayout coefficients",
                (coeff.len(), 1),
                (g.num_directed_edges(), 1),
            ));
        }
        Ok(MessageLayout {
            n: g.num_nodes(),
            src: Arc::from(g.src()),
            dst: Arc::from(g.dst()),
            coeff: Arc::from(coeff),
            offsets: g.offsets().to_vec(),
            self_loop: g.self_loop_flags().to_vec(),
            twin: g.twin().to_vec(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Number of rows `k` (directed edges, self-loops included).
    pub fn num_rows(&self) -> usize {
        self.src.len()
    }

    pub fn src(&self) -> &[usize] {
        &self.src
    }

    pub fn dst(&self) -> &[usize] {
        &self.dst
    }

    pub fn coeff(&self) -> &[f64] {
        &self.coeff
    }

    pub fn self_loop_flags(&self) -> &[bool] {
        &self.self_loop
    }

    pub fn twin(&self) -> &[usize] {
        &self.twin
    }

    /// Rows sourced from node `u` (the slice `SN(u)`).
    pub fn rows_from(&self, u: usize) -> core::ops::Range<usize> {
        self.offsets[u]..self.offsets[u + 1]
    }

    /// Dense `n x n` aggregation operator `A[v][u] = sum of coeff over rows
    /// u -> v`, for cross-checks against the sparse path.
    pub fn dense_operator(&self) -> Tensor {
        let mut a = Tensor::zeros(self.n, self.n);
        for j in 0..self.num_rows() {
            let (u, v) = (self.src[j], self.dst[j]);
            a.set(v, u, a.get(v, u) + self.coeff[j]);
        }
        a
    }
}

/// A materialized message matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageFrame<'a> {
    layout: &'a MessageLayout,
    values: Tensor,
}

impl<'a> MessageFrame<'a> {
    pub fn new(layout: &'a MessageLayout, values: Tensor) -> Result<Self> {
        if values.rows() != layout.num_rows() {
            return Err(Error::shape(
                "MessageFrame",
                values.shape(),
                (layout.num_rows(), values.cols()),
            ));
        }
        Ok(MessageFrame { layout, values })
    }

    pub fn layout(&self) -> &'a MessageLayout {
        self.layout
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn into_values(self) -> Tensor {
        self.values
    }

    pub fn num_rows(&self) -> usize {
        self.values.rows()
    }

    pub fn num_cols(&self) -> usize {
        self.values.cols()
    }
}

/// `M[j] = coeff[j] * h[src[j]]`.
pub fn build_messages<'a>(layout: &'a MessageLayout, h: &Tensor) -> Result<MessageFrame<'a>> {
    if h.rows() != layout.num_nodes() {
        return Err(Error::shape("build_messages", h.shape(), (layout.num_nodes(), h.cols())));
    }
    let c = h.cols();
    let mut values = Tensor::zeros(layout.num_rows(), c);
    for j in 0..layout.num_rows() {
        let coeff = layout.coeff[j];
        for (m, &x) in values.row_mut(j).iter_mut().zip(h.row(layout.src[j])) {
            *m = coeff * x;
        }
    }
    MessageFrame::new(layout, values)
}

/// `M~[j][l] = keep[j][l] * M[j][l] * scale[j]`.
pub fn apply_mask<'a>(frame: &MessageFrame<'a>, mask: &DropMask) -> Result<MessageFrame<'a>> {
    let (k, c) = frame.values.shape();
    if mask.shape() != (k, c) {
        return Err(Error::shape("apply_mask", (k, c), mask.shape()));
    }
    let mut values = frame.values.clone();
    for j in 0..k {
        let s = mask.row_scale(j);
        for (l, v) in values.row_mut(j).iter_mut().enumerate() {
            *v = if mask.keep(j, l) { *v * s } else { 0.0 };
        }
    }
    MessageFrame::new(frame.layout, values)
}

/// Sums message rows into their destination nodes.
pub fn aggregate(frame: &MessageFrame<'_>) -> Tensor {
    let layout = frame.layout;
    let mut out = Tensor::zeros(layout.num_nodes(), frame.num_cols());
    for j in 0..layout.num_rows() {
        let v = layout.dst[j];
        for (o, &m) in out.row_mut(v).iter_mut().zip(frame.values.row(j)) {
            *o += m;
        }
    }
    out
}

/// Differentiable message construction: gather source rows, apply the
/// (constant) mask factor if any, then scale by the normalization
/// coefficients.
pub fn build_messages_var(
    tape: &mut Tape,
    layout: &MessageLayout,
    h: Var,
    mask: Option<&DropMask>,
) -> Result<Var> {
    if tape.value(h).rows() != layout.num_nodes() {
        return Err(Error::shape(
            "build_messages",
            tape.value(h).shape(),
            (layout.num_nodes(), tape.value(h).cols()),
        ));
    }
    let gathered = tape.gather_rows(h, layout.src.clone())?;
    let masked = match mask {
        Some(m) => tape.hadamard_const(gathered, m.factor())?,
        None => gathered,
    };
    tape.scale_rows(masked, layout.coeff.clone())
}

pub fn aggregate_var(tape: &mut Tape, layout: &MessageLayout, messages: Var) -> Result<Var> {
    tape.segment_sum(messages, layout.dst.clone(), layout.num_nodes())
}
