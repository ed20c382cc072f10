//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every primitive in creation order; [`Tape::backward`]
//! replays the adjoints in exact reverse order, accumulating additively
//! wherever a value fans out. Dropping masks enter only as constants
//! ([`Tape::hadamard_const`]), so gradients flow through surviving elements
//! and never into the mask itself.

mod gradcheck;

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::{Error, Result, Tensor};

pub use gradcheck::grad_check;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRowVec(Var, Var),
    Add(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Scale(Var, f64),
    HadamardConst(Var, Tensor),
    ScaleRows(Var, Arc<[f64]>),
    GatherRows(Var, Arc<[usize]>),
    SegmentSum(Var, Arc<[usize]>),
    Sum(Var),
    /// Adjoint w.r.t. logits is precomputed at forward time.
    Loss(Var, Tensor),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when the loss does not depend on `var`.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    /// Gradient with zeros for unreached variables.
    pub fn get_or_zeros(&self, var: Var, shape: (usize, usize)) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(shape.0, shape.1))
    }
}

fn check_index(what: &'static str, index: &[usize], bound: usize) -> Result<()> {
    match index.iter().find(|&&i| i >= bound) {
        Some(&i) => Err(Error::IndexOutOfRange {
            what,
            index: i,
            bound,
        }),
        None => Ok(()),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-libm::fabs(x)))
}

fn masked_rows(mask: &[bool], n: usize) -> Result<Vec<usize>> {
    if mask.len() != n {
        return Err(Error::shape("loss mask", (mask.len(), 1), (n, 1)));
    }
    let rows: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
    if rows.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(rows)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Adds a `1 x cols` bias to every row.
    pub fn add_rowvec(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(Error::shape("add_rowvec", x.shape(), b.shape()));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (o, &bv) in out.row_mut(i).iter_mut().zip(b.row(0)) {
                *o += bv;
            }
        }
        Ok(self.push(out, Op::AddRowVec(a, bias)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x * s);
        self.push(out, Op::Scale(a, s))
    }

    /// Elementwise product with a constant (gradient-transparent) matrix.
    pub fn hadamard_const(&mut self, a: Var, mask: Tensor) -> Result<Var> {
        let out = self.value(a).zip_map(&mask, |x, m| x * m)?;
        Ok(self.push(out, Op::HadamardConst(a, mask)))
    }

    /// Multiplies row `j` by the constant `coeffs[j]`.
    pub fn scale_rows(&mut self, a: Var, coeffs: Arc<[f64]>) -> Result<Var> {
        let x = self.value(a);
        if coeffs.len() != x.rows() {
            return Err(Error::shape("scale_rows", x.shape(), (coeffs.len(), 1)));
        }
        let mut out = x.clone();
        for (j, &c) in coeffs.iter().enumerate() {
            out.row_mut(j).iter_mut().for_each(|v| *v *= c);
        }
        Ok(self.push(out, Op::ScaleRows(a, coeffs)))
    }

    /// Row `j` of the output is row `index[j]` of `a`.
    pub fn gather_rows(&mut self, a: Var, index: Arc<[usize]>) -> Result<Var> {
        let x = self.value(a);
        check_index("gather_rows", &index, x.rows())?;
        let cols = x.cols();
        let mut data = Vec::with_capacity(index.len() * cols);
        for &i in index.iter() {
            data.extend_from_slice(x.row(i));
        }
        let out = Tensor::new(index.len(), cols, data)?;
        Ok(self.push(out, Op::GatherRows(a, index)))
    }

    /// `out[v] = sum of rows j with dst[j] == v`, for `v < n`.
    pub fn segment_sum(&mut self, a: Var, dst: Arc<[usize]>, n: usize) -> Result<Var> {
        let x = self.value(a);
        if dst.len() != x.rows() {
            return Err(Error::shape("segment_sum", x.shape(), (dst.len(), 1)));
        }
        check_index("segment_sum", &dst, n)?;
        let mut out = Tensor::zeros(n, x.cols());
        for (j, &v) in dst.iter().enumerate() {
            for (o, &m) in out.row_mut(v).iter_mut().zip(x.row(j)) {
                *o += m;
            }
        }
        Ok(self.push(out, Op::SegmentSum(a, dst)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    /// Mean over masked rows of `-log softmax(logits)[label]`.
    pub fn masked_softmax_ce(
        &mut self,
        logits: Var,
        labels: &[Option<usize>],
        mask: &[bool],
    ) -> Result<Var> {
        let x = self.value(logits);
        let (n, classes) = x.shape();
        let rows = masked_rows(mask, n)?;
        if labels.len() != n {
            return Err(Error::shape("masked_softmax_ce labels", (labels.len(), 1), (n, 1)));
        }
        let m = rows.len() as f64;
        let mut loss = 0.0;
        let mut adj = Tensor::zeros(n, classes);
        for &i in &rows {
            let label = match labels[i] {
                Some(c) if c < classes => c,
                Some(c) => {
                    return Err(Error::InvalidLabel {
                        node: i,
                        label: c,
                        classes,
                    })
                }
                None => {
                    return Err(Error::InvalidLabel {
                        node: i,
                        label: usize::MAX,
                        classes,
                    })
                }
            };
            let row = x.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + libm::log(row.iter().map(|&v| libm::exp(v - max)).sum::<f64>());
            loss += lse - row[label];
            for (c, a) in adj.row_mut(i).iter_mut().enumerate() {
                let p = libm::exp(row[c] - lse);
                *a = (p - if c == label { 1.0 } else { 0.0 }) / m;
            }
        }
        Ok(self.push(Tensor::scalar(loss / m), Op::Loss(logits, adj)))
    }

    /// Mean over masked rows of the binary cross-entropy of an `n x 1` logit
    /// column: `softplus(-h)` for label 1, `softplus(h)` for label 0.
    pub fn masked_binary_ce(
        &mut self,
        logits: Var,
        labels: &[Option<usize>],
        mask: &[bool],
    ) -> Result<Var> {
        let x = self.value(logits);
        let n = x.rows();
        if x.cols() != 1 {
            return Err(Error::shape("masked_binary_ce", x.shape(), (n, 1)));
        }
        let rows = masked_rows(mask, n)?;
        if labels.len() != n {
            return Err(Error::shape("masked_binary_ce labels", (labels.len(), 1), (n, 1)));
        }
        let m = rows.len() as f64;
        let mut loss = 0.0;
        let mut adj = Tensor::zeros(n, 1);
        for &i in &rows {
            let h = x.get(i, 0);
            let (l, g) = match labels[i] {
                Some(1) => (softplus(-h), sigmoid(h) - 1.0),
                Some(0) => (softplus(h), sigmoid(h)),
                _ => return Err(Error::NonBinaryLabels),
            };
            loss += l;
            adj.set(i, 0, g / m);
        }
        Ok(self.push(Tensor::scalar(loss / m), Op::Loss(logits, adj)))
    }

    /// Reverse sweep from a `1 x 1` output.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(Error::shape("backward", shape, (1, 1)));
        }
        let mut grads: Vec<Option<Tensor>> = alloc::vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        fn accumulate(grads: &mut [Option<Tensor>], var: Var, g: Tensor) {
            match &mut grads[var.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = g.matmul(&self.value(*b).transpose())?;
                    let gb = self.value(*a).transpose().matmul(&g)?;
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::AddRowVec(a, bias) => {
                    let mut gb = Tensor::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (o, &v) in gb.row_mut(0).iter_mut().zip(g.row(i)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *bias, gb);
                }
                Op::Relu(a) => {
                    let ga = self.value(*a).zip_map(&g, |x, d| if x > 0.0 { d } else { 0.0 })?;
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let ga = node.value.zip_map(&g, |s, d| d * s * (1.0 - s))?;
                    accumulate(&mut grads, *a, ga);
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, g.map(|d| d * s)),
                Op::HadamardConst(a, mask) => {
                    accumulate(&mut grads, *a, g.zip_map(mask, |d, m| d * m)?);
                }
                Op::ScaleRows(a, coeffs) => {
                    let mut ga = g.clone();
                    for (j, &c) in coeffs.iter().enumerate() {
                        ga.row_mut(j).iter_mut().for_each(|v| *v *= c);
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::GatherRows(a, index) => {
                    let src = self.value(*a);
                    let mut ga = Tensor::zeros(src.rows(), src.cols());
                    for (j, &i) in index.iter().enumerate() {
                        for (o, &d) in ga.row_mut(i).iter_mut().zip(g.row(j)) {
                            *o += d;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SegmentSum(a, dst) => {
                    let cols = g.cols();
                    let mut data = Vec::with_capacity(dst.len() * cols);
                    for &v in dst.iter() {
                        data.extend_from_slice(g.row(v));
                    }
                    accumulate(&mut grads, *a, Tensor::new(dst.len(), cols, data)?);
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(*a).shape();
                    accumulate(&mut grads, *a, Tensor::filled(r, c, g.get(0, 0)));
                }
                Op::Loss(logits, adj) => {
                    let s = g.get(0, 0);
                    accumulate(&mut grads, *logits, adj.map(|d| d * s));
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn t(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_identity_gradient() {
        let mut tape = Tape::new();
        let i = tape.leaf(Tensor::identity(3));
        let a = tape.leaf(Tensor::from_fn(3, 2, |r, c| (r * 2 + c) as f64));
        let p = tape.matmul(i, a).unwrap();
        assert_eq!(tape.value(p), tape.value(a));
        let s = tape.sum(p);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(a).unwrap(), &Tensor::ones(3, 2));
    }

    #[test]
    fn sigmoid_at_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(0.0));
        let y = tape.sigmoid(x);
        assert_eq!(tape.value(y).get(0, 0), 0.5);
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().get(0, 0), 0.25);
    }

    #[test]
    fn relu_blocks_negative_inputs() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[&[-1.0, 2.0, -0.5]]));
        let y = tape.relu(x);
        let s = tape.sum(y);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn gather_rows_fans_out() {
        let mut tape = Tape::new();
        let h = tape.leaf(t(&[&[5.0], &[7.0]]));
        let m = tape.gather_rows(h, Arc::from(vec![0, 0, 1])).unwrap();
        assert_eq!(tape.value(m).data(), &[5.0, 5.0, 7.0]);
        let s = tape.sum(m);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(h).unwrap().data(), &[2.0, 1.0]);

        let empty = tape.gather_rows(h, Arc::from(Vec::<usize>::new())).unwrap();
        assert_eq!(tape.value(empty).shape(), (0, 1));
        assert!(matches!(
            tape.gather_rows(h, Arc::from(vec![2])),
            Err(Error::IndexOutOfRange { index: 2, bound: 2, .. })
        ));
    }

    #[test]
    fn segment_sum_cases() {
        let mut tape = Tape::new();
        let m = tape.leaf(t(&[&[1.0], &[2.0]]));
        let out = tape.segment_sum(m, Arc::from(vec![1, 1]), 2).unwrap();
        assert_eq!(tape.value(out).data(), &[0.0, 3.0]);

        let empty = tape.leaf(Tensor::zeros(0, 3));
        let out = tape.segment_sum(empty, Arc::from(Vec::<usize>::new()), 4).unwrap();
        assert_eq!(tape.value(out), &Tensor::zeros(4, 3));

        assert!(tape.segment_sum(m, Arc::from(vec![0, 5]), 2).is_err());
    }

    #[test]
    fn hadamard_const_passes_mask_to_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[&[1.0, 2.0]]));
        let y = tape.hadamard_const(x, t(&[&[0.0, 3.0]])).unwrap();
        let s = tape.sum(y);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 3.0]);
    }

    #[test]
    fn softmax_ce_uniform_logits() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(3, 2));
        let loss = tape
            .masked_softmax_ce(x, &[Some(0), Some(1), Some(1)], &[true, true, false])
            .unwrap();
        assert!((tape.value(loss).get(0, 0) - core::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(
            tape.masked_softmax_ce(x, &[Some(0); 3], &[false; 3]).unwrap_err(),
            Error::EmptyMask
        );
    }

    #[test]
    fn binary_ce_formula_and_stability() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[&[0.0], &[50.0], &[-50.0], &[50.0]]));
        let labels = [Some(1), Some(1), Some(0), Some(0)];
        let l0 = tape.masked_binary_ce(x, &labels, &[true, false, false, false]).unwrap();
        assert!((tape.value(l0).get(0, 0) - core::f64::consts::LN_2).abs() < 1e-15);
        let l1 = tape.masked_binary_ce(x, &labels, &[false, true, true, false]).unwrap();
        assert!(tape.value(l1).get(0, 0) < 1e-20);
        let l2 = tape.masked_binary_ce(x, &labels, &[false, false, false, true]).unwrap();
        assert!((tape.value(l2).get(0, 0) - 50.0).abs() < 1e-12);
        assert_eq!(
            tape.masked_binary_ce(x, &[Some(2); 4], &[true; 4]).unwrap_err(),
            Error::NonBinaryLabels
        );
    }

    #[test]
    fn shape_errors_report_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(2, 3));
        let b = tape.leaf(Tensor::zeros(1, 2));
        assert_eq!(
            tape.add_rowvec(a, b).unwrap_err(),
            Error::ShapeMismatch {
                op: "add_rowvec",
                left: (2, 3),
                right: (1, 2)
            }
        );
    }
}
