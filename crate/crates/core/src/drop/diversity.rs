use alloc::format;
use alloc::vec::Vec;

use super::mask::{draw_feature_keep, draw_node_keep};
use super::{apply_mask, build_messages, sample_mask, DropKind, DropSpec, MessageFrame, MessageLayout};
use crate::{Error, Graph, Result, Tensor};

/// Per-node DropMessage rates that keep information diversity in
/// expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBound {
    pub rates: Vec<f64>,
    /// Nodes without out-edges; their bound is reported as 0.
    pub isolated: Vec<usize>,
}

/// `delta_i = 1 - max(1/d_i, 1/c)`: the largest rate keeping, in
/// expectation, at least one element per message row (`(1-delta) c >= 1`)
/// and at least one message per (source node, feature) pair
/// (`(1-delta) d_i >= 1`). `d_i` is the loop-free out-degree.
pub fn diversity_rate_bound(g: &Graph, c: usize) -> Result<RateBound> {
    if c == 0 {
        return Err(Error::param("feature dimension must be positive"));
    }
    let mut isolated = Vec::new();
    let rates = g
        .loop_free_degrees()
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            if d == 0 {
                isolated.push(i);
                0.0
            } else {
                1.0 - f64::max(1.0 / d as f64, 1.0 / c as f64)
            }
        })
        .collect();
    Ok(RateBound { rates, isolated })
}

/// Runs Dropout or DropNode both ways with one shared Bernoulli draw:
/// masking the message matrix, and zeroing the feature matrix before
/// building messages. Both frames are rescaled by `1 / (1 - rate)` after
/// construction, so the two paths perform identical floating-point work and
/// agree exactly.
pub fn equivalence_witness<'a>(
    layout: &'a MessageLayout,
    h: &Tensor,
    kind: DropKind,
    rate: f64,
    seed: u64,
) -> Result<(MessageFrame<'a>, MessageFrame<'a>)> {
    if !matches!(kind, DropKind::Dropout | DropKind::DropNode) {
        return Err(Error::param(format!("{kind} has no feature-matrix form")));
    }
    let spec = DropSpec::global(kind, rate, seed)?;
    let (n, c) = h.shape();

    let clean = build_messages(layout, h)?;
    let mask = sample_mask(&spec, layout, c, &mut spec.rng(0, 0, 0))?;
    let on_messages = apply_mask(&clean, &mask)?;

    let mut rng = spec.rng(0, 0, 0);
    let keep: Vec<bool> = match kind {
        DropKind::Dropout => draw_feature_keep(n, c, rate, &mut rng),
        _ => draw_node_keep(n, rate, &mut rng)
            .into_iter()
            .flat_map(|k| core::iter::repeat_n(k, c))
            .collect(),
    };
    let mut dropped = h.clone();
    for (x, k) in dropped.data_mut().iter_mut().zip(keep) {
        if !k {
            *x = 0.0;
        }
    }
    let built = build_messages(layout, &dropped)?;
    let scale = 1.0 / (1.0 - rate);
    let mut values = built.into_values();
    values.data_mut().iter_mut().for_each(|v| *v *= scale);
    Ok((on_messages, MessageFrame::new(layout, values)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::make_regular_graph;

    #[test]
    fn bound_values() {
        // degree 4 with a wide feature space: degree decides
        let g = make_regular_graph(10, 4, 0).unwrap();
        let b = diversity_rate_bound(&g, 1433).unwrap();
        assert!(b.rates.iter().all(|&r| r == 0.75));
        assert!(b.isolated.is_empty());

        let p2 = Graph::from_undirected_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(diversity_rate_bound(&p2, 50).unwrap().rates, alloc::vec![0.0, 0.0]);

        let k11: Vec<_> = (0..11).flat_map(|u| ((u + 1)..11).map(move |v| (u, v))).collect();
        let g10 = Graph::from_undirected_edges(11, &k11).unwrap();
        let b = diversity_rate_bound(&g10, 3).unwrap();
        assert!(b.rates.iter().all(|&r| (r - 2.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn loops_do_not_count_towards_degree() {
        let g = make_regular_graph(10, 4, 0).unwrap().add_self_loops().unwrap();
        let b = diversity_rate_bound(&g, 100).unwrap();
        assert!(b.rates.iter().all(|&r| r == 0.75));
    }

    #[test]
    fn isolated_nodes_are_reported() {
        let g = Graph::from_undirected_edges(3, &[(0, 1)]).unwrap();
        let b = diversity_rate_bound(&g, 5).unwrap();
        assert_eq!(b.rates[2], 0.0);
        assert_eq!(b.isolated, alloc::vec![2]);
    }

    #[test]
    fn witness_at_zero_rate_is_clean() {
        let g = make_regular_graph(6, 2, 1).unwrap().add_self_loops().unwrap();
        let layout = MessageLayout::normalized(&g).unwrap();
        let h = Tensor::from_fn(6, 3, |i, j| (i * 3 + j) as f64 * 0.1 - 0.4);
        let clean = build_messages(&layout, &h).unwrap();
        for kind in [DropKind::Dropout, DropKind::DropNode] {
            let (a, b) = equivalence_witness(&layout, &h, kind, 0.0, 5).unwrap();
            assert_eq!(a, clean);
            assert_eq!(b, clean);
        }
        assert!(equivalence_witness(&layout, &h, DropKind::DropEdge, 0.2, 0).is_err());
    }
}
