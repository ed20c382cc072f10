use alloc::format;
use alloc::vec::Vec;

use crate::drop::{sample_mask, DropKind, DropSpec, MessageLayout};
use crate::graph::Graph;
use crate::stats::Moments;
use crate::{Error, Result};

/// Variance of the kept-element count of an all-ones `nd x c` message
/// matrix on a loop-free `d`-regular graph.
pub fn variance_closed_form(kind: DropKind, n: usize, c: usize, d: usize, delta: f64) -> f64 {
    let (n, c, d) = (n as f64, c as f64, d as f64);
    let q = (1.0 - delta) * delta;
    match kind {
        DropKind::None => 0.0,
        DropKind::Dropout => q * n * c * d * d,
        DropKind::DropEdge => 2.0 * q * n * c * c * d,
        DropKind::DropNode => q * n * c * c * d * d,
        DropKind::DropMessage => q * n * c * d,
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VarianceReport {
    pub method: DropKind,
    pub n: usize,
    pub c: usize,
    pub d: usize,
    pub delta: f64,
    pub closed_form: f64,
    pub mc_estimate: f64,
    pub mc_trials: usize,
    /// Standard error of `mc_estimate`, `sqrt((mu4 - sigma^4) / T)`.
    pub mc_std_error: f64,
}

impl VarianceReport {
    /// `|mc - closed| / std_error`; infinite when the error is zero but the
    /// values differ.
    pub fn z_score(&self) -> f64 {
        let diff = (self.mc_estimate - self.closed_form).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.mc_std_error
        }
    }
}

/// Samples unscaled masks of `kind` over the all-ones message matrix of a
/// loop-free regular graph and estimates the variance of the kept count.
pub fn variance_monte_carlo(
    kind: DropKind,
    g: &Graph,
    c: usize,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<VarianceReport> {
    if trials < 2 {
        return Err(Error::TooFewTrials { got: trials, min: 2 });
    }
    if g.has_self_loops() {
        return Err(Error::param("variance analysis expects a loop-free graph"));
    }
    let degrees = g.degrees();
    let d = degrees.first().copied().unwrap_or(0);
    if let Some(v) = degrees.iter().position(|&x| x != d) {
        return Err(Error::param(format!(
            "variance analysis expects a regular graph; node {v} has degree {} instead of {d}",
            degrees[v]
        )));
    }
    let spec = DropSpec::global(kind, delta, seed)?;
    let layout = MessageLayout::unit(g);
    let samples = (0..trials)
        .map(|t| {
            let mut rng = spec.rng(0, 0, t as u64);
            sample_mask(&spec, &layout, c, &mut rng).map(|m| m.kept_count() as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    let moments = Moments::of(&samples);
    Ok(VarianceReport {
        method: kind,
        n: g.num_nodes(),
        c,
        d,
        delta,
        closed_form: variance_closed_form(kind, g.num_nodes(), c, d, delta),
        mc_estimate: moments.variance,
        mc_trials: trials,
        mc_std_error: moments.variance_std_error,
    })
}
