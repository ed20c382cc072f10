use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::softplus;
use crate::drop::{sample_mask, DropKind, DropMask, DropSpec, MessageLayout};
use crate::graph::Graph;
use crate::stats::{mean, sample_std};
use crate::{Error, Result, Tensor};

/// Where the per-node variances of the perturbed logits come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum VarSource {
    Mc,
    /// `Var(h_i) = sum_{j -> i, l} delta_j / (1 - delta_j) * (coeff_j x_{src j, l} w_l)^2`,
    /// DropMessage only.
    ClosedForm,
}

/// Second-order check of `E[L~] = L + sum_i z_i (1 - z_i) Var(h~_i) / 2` for
/// the single-layer sigmoid model `h = aggregate(messages(X)) w` with the
/// summed binary cross-entropy over labeled nodes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegCheckReport {
    pub method: DropKind,
    pub trials: usize,
    pub base_loss: f64,
    /// `base_loss` plus the mean of `L~ - L - sum_i f'_i (h~_i - h_i)`; the
    /// linear term has zero mean because the masks are unbiased.
    pub mc_expected_loss: f64,
    pub mc_std_error: f64,
    /// Plain mean of the perturbed losses.
    pub raw_mc_expected_loss: f64,
    pub raw_mc_std_error: f64,
    pub taylor_term: f64,
    pub var_source: VarSource,
    /// `(mc_expected_loss - base_loss) - taylor_term`.
    pub residual: f64,
    pub residual_std_error: f64,
    /// Per-node `E[(h~_i - h_i)^2]` estimates and their standard errors.
    pub var_mc: Vec<f64>,
    pub var_mc_std_error: Vec<f64>,
    pub var_closed_form: Option<Vec<f64>>,
}

impl RegCheckReport {
    pub fn gap(&self) -> f64 {
        self.mc_expected_loss - self.base_loss
    }

    /// `|residual| / taylor_term` (0 when both vanish).
    pub fn relative_residual(&self) -> f64 {
        if self.residual == 0.0 {
            0.0
        } else {
            self.residual.abs() / self.taylor_term
        }
    }

    /// `|gap - taylor| <= max(rel_tol * taylor, z * mc_std_error)`.
    pub fn agrees(&self, rel_tol: f64, z: f64) -> bool {
        self.residual.abs() <= f64::max(rel_tol * self.taylor_term, z * self.mc_std_error)
    }
}

fn sigmoid(h: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-h))
}

/// Logits of every node under `mask` given per-row, per-column terms `a`.
fn logits(layout: &MessageLayout, a: &Tensor, mask: &DropMask, out: &mut [f64]) {
    out.iter_mut().for_each(|h| *h = 0.0);
    for (j, &v) in layout.dst().iter().enumerate() {
        let s = mask.row_scale(j);
        let row: f64 = a
            .row(j)
            .iter()
            .zip(mask.keep_row(j))
            .map(|(&x, &k)| if k { x * s } else { 0.0 })
            .sum();
        out[v] += row;
    }
}

#[allow(clippy::too_many_arguments)]
pub fn regularization_check(
    g: &Graph,
    x: &Tensor,
    labels: &[Option<usize>],
    w: &Tensor,
    drop: &DropSpec,
    var_source: VarSource,
    trials: usize,
    seed: u64,
) -> Result<RegCheckReport> {
    if trials < 100 {
        return Err(Error::TooFewTrials { got: trials, min: 100 });
    }
    let n = g.num_nodes();
    let c = x.cols();
    if x.rows() != n {
        return Err(Error::shape("regularization features", x.shape(), (n, c)));
    }
    if w.shape() != (c, 1) {
        return Err(Error::shape("regularization weights", w.shape(), (c, 1)));
    }
    if labels.len() != n {
        return Err(Error::shape("regularization labels", (labels.len(), 1), (n, 1)));
    }
    let mut targets = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Some(y @ (0 | 1)) => targets.push((i, *y as f64)),
            Some(_) => return Err(Error::NonBinaryLabels),
            None => {}
        }
    }
    if targets.is_empty() {
        return Err(Error::EmptyMask);
    }
    if var_source == VarSource::ClosedForm && !matches!(drop.kind, DropKind::DropMessage | DropKind::None) {
        return Err(Error::param("closed-form logit variance is only available for dropmessage"));
    }

    let looped = if g.has_self_loops() { g.clone() } else { g.add_self_loops()? };
    let layout = MessageLayout::normalized(&looped)?;
    let k = layout.num_rows();
    let a = Tensor::from_fn(k, c, |j, l| layout.coeff()[j] * x.get(layout.src()[j], l) * w.get(l, 0));

    let mut h = vec![0.0; n];
    logits(&layout, &a, &DropMask::keep_all(k, c), &mut h);
    let loss_of = |hv: &[f64]| -> f64 {
        targets
            .iter()
            .map(|&(i, y)| if y == 1.0 { softplus(-hv[i]) } else { softplus(hv[i]) })
            .sum()
    };
    let base_loss = loss_of(&h);
    let slope: Vec<f64> = h.iter().zip(labels).map(|(&hi, l)| sigmoid(hi) - l.unwrap_or(0) as f64).collect();
    let curvature: Vec<f64> = h.iter().map(|&hi| sigmoid(hi) * (1.0 - sigmoid(hi))).collect();

    let spec = DropSpec {
        stream: seed,
        ..drop.clone()
    };
    let mut ht = vec![0.0; n];
    let mut raw = Vec::with_capacity(trials);
    let mut first_order = Vec::with_capacity(trials);
    let mut second_order = Vec::with_capacity(trials);
    let mut sq = vec![Vec::with_capacity(trials); n];
    for t in 0..trials {
        let mut rng = spec.rng(0, 0, t as u64);
        let mask = sample_mask(&spec, &layout, c, &mut rng)?;
        logits(&layout, &a, &mask, &mut ht);
        let lt = loss_of(&ht);
        let mut linear = 0.0;
        let mut quad = 0.0;
        for &(i, _) in &targets {
            let dh = ht[i] - h[i];
            linear += slope[i] * dh;
            quad += 0.5 * curvature[i] * dh * dh;
        }
        for i in 0..n {
            let dh = ht[i] - h[i];
            sq[i].push(dh * dh);
        }
        raw.push(lt);
        first_order.push(lt - base_loss - linear);
        second_order.push(lt - base_loss - linear - quad);
    }

    let root_t = libm::sqrt(trials as f64);
    let var_mc: Vec<f64> = sq.iter().map(|s| mean(s)).collect();
    let var_mc_std_error: Vec<f64> = sq.iter().map(|s| sample_std(s) / root_t).collect();
    let var_closed_form = (var_source == VarSource::ClosedForm).then(|| {
        let mut v = vec![0.0; n];
        for (j, &dst) in layout.dst().iter().enumerate() {
            let d = spec.rate.for_node(layout.src()[j]);
            let odds = if spec.kind == DropKind::None { 0.0 } else { d / (1.0 - d) };
            v[dst] += odds * a.row(j).iter().map(|&e| e * e).sum::<f64>();
        }
        v
    });
    let variances = var_closed_form.as_ref().unwrap_or(&var_mc);
    let taylor_term: f64 = targets.iter().map(|&(i, _)| 0.5 * curvature[i] * variances[i]).sum();

    let gap = mean(&first_order);
    let mc_std_error = sample_std(&first_order) / root_t;
    let residual_std_error = match var_source {
        VarSource::Mc => sample_std(&second_order) / root_t,
        VarSource::ClosedForm => mc_std_error,
    };
    Ok(RegCheckReport {
        method: spec.kind,
        trials,
        base_loss,
        mc_expected_loss: base_loss + gap,
        mc_std_error,
        raw_mc_expected_loss: mean(&raw),
        raw_mc_std_error: sample_std(&raw) / root_t,
        taylor_term,
        var_source,
        residual: gap - taylor_term,
        residual_std_error,
        var_mc,
        var_mc_std_error,
        var_closed_form,
    })
}
