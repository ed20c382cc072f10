use alloc::vec;
use alloc::vec::Vec;

use crate::drop::{sample_mask, DropKind, DropMask, DropRate, DropSpec, MessageLayout};
use crate::graph::Graph;
use crate::{Error, Result};

fn check_shape(layout: &MessageLayout, mask: &DropMask) -> Result<()> {
    if mask.shape().0 != layout.num_rows() {
        return Err(Error::shape("diversity mask", mask.shape(), (layout.num_rows(), mask.shape().1)));
    }
    Ok(())
}

/// Number of (source node, column) pairs with at least one kept element
/// among the rows sourced from that node.
pub fn feature_diversity(layout: &MessageLayout, mask: &DropMask) -> Result<usize> {
    check_shape(layout, mask)?;
    let c = mask.shape().1;
    let mut count = 0;
    for u in 0..layout.num_nodes() {
        let rows = layout.rows_from(u);
        count += (0..c).filter(|&l| rows.clone().any(|j| mask.keep(j, l))).count();
    }
    Ok(count)
}

/// Number of message rows with at least one kept element.
pub fn topology_diversity(layout: &MessageLayout, mask: &DropMask) -> Result<usize> {
    check_shape(layout, mask)?;
    Ok((0..layout.num_rows())
        .filter(|&j| mask.keep_row(j).iter().any(|&k| k))
        .count())
}

/// Mean preserved counts under nodewise DropMessage: kept elements per
/// message row, and kept messages per (source node, column).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiversityCheck {
    pub trials: usize,
    pub cols: usize,
    pub row_means: Vec<f64>,
    pub row_std_errors: Vec<f64>,
    /// Source node of each row.
    pub row_sources: Vec<usize>,
    /// Row-major `nodes x cols`; nodes without outgoing rows are omitted from
    /// `pair_nodes`.
    pub pair_means: Vec<f64>,
    pub pair_std_errors: Vec<f64>,
    pub pair_nodes: Vec<usize>,
}

impl DiversityCheck {
    /// Every entity keeps at least one element in expectation, up to `z`
    /// standard errors.
    pub fn holds(&self, z: f64) -> bool {
        self.shortfalls(z).next().is_none()
    }

    /// Entities whose mean is below `1 - z * stderr`.
    pub fn shortfalls(&self, z: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_means
            .iter()
            .zip(&self.row_std_errors)
            .chain(self.pair_means.iter().zip(&self.pair_std_errors))
            .enumerate()
            .filter(move |(_, (&m, &se))| m < 1.0 - z * se)
            .map(|(i, (&m, _))| (i, m))
    }

    /// Entities whose mean is below one by more than `z` standard errors.
    pub fn violations(&self, z: f64) -> usize {
        self.row_means
            .iter()
            .zip(&self.row_std_errors)
            .chain(self.pair_means.iter().zip(&self.pair_std_errors))
            .filter(|(&m, &se)| m + z * se < 1.0)
            .count()
    }
}

fn mean_and_se(sum: f64, sum_sq: f64, trials: usize) -> (f64, f64) {
    let t = trials as f64;
    let m = sum / t;
    let var = ((sum_sq - t * m * m) / (t - 1.0)).max(0.0);
    (m, libm::sqrt(var / t))
}

/// Draws nodewise DropMessage masks on the message rows of `g` (one row per
/// directed edge, unit values) and averages the preserved counts.
pub fn diversity_expectation_check(g: &Graph, c: usize, rates: &[f64], trials: usize, seed: u64) -> Result<DiversityCheck> {
    if trials < 2 {
        return Err(Error::TooFewTrials { got: trials, min: 2 });
    }
    let layout = MessageLayout::unit(g);
    let n = layout.num_nodes();
    let k = layout.num_rows();
    let spec = DropSpec::new(DropKind::DropMessage, DropRate::Nodewise(rates.to_vec()), seed)?;
    let pair_nodes: Vec<usize> = (0..n).filter(|&u| !layout.rows_from(u).is_empty()).collect();
    let mut row_sum = vec![0.0; k];
    let mut row_sq = vec![0.0; k];
    let mut pair_sum = vec![0.0; pair_nodes.len() * c];
    let mut pair_sq = vec![0.0; pair_nodes.len() * c];
    let mut counts = vec![0usize; c];
    for t in 0..trials {
        let mut rng = spec.rng(0, 0, t as u64);
        let mask = sample_mask(&spec, &layout, c, &mut rng)?;
        for j in 0..k {
            let kept = mask.keep_row(j).iter().filter(|&&b| b).count() as f64;
            row_sum[j] += kept;
            row_sq[j] += kept * kept;
        }
        for (p, &u) in pair_nodes.iter().enumerate() {
            counts.iter_mut().for_each(|x| *x = 0);
            for j in layout.rows_from(u) {
                for (l, &keep) in mask.keep_row(j).iter().enumerate() {
                    counts[l] += usize::from(keep);
                }
            }
            for (l, &cnt) in counts.iter().enumerate() {
                let v = cnt as f64;
                pair_sum[p * c + l] += v;
                pair_sq[p * c + l] += v * v;
            }
        }
    }
    let (row_means, row_std_errors) = row_sum.iter().zip(&row_sq).map(|(&s, &q)| mean_and_se(s, q, trials)).unzip();
    let (pair_means, pair_std_errors) = pair_sum.iter().zip(&pair_sq).map(|(&s, &q)| mean_and_se(s, q, trials)).unzip();
    Ok(DiversityCheck {
        trials,
        cols: c,
        row_means,
        row_std_errors,
        row_sources: layout.src().to_vec(),
        pair_means,
        pair_std_errors,
        pair_nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drop::{diversity_rate_bound, DropMask};
    use crate::graph::make_regular_graph;
    use proptest::prelude::*;

    fn star_plus() -> Graph {
        Graph::from_undirected_edges(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (4, 5)]).unwrap()
    }

    #[test]
    fn clean_mask_counts_everything() {
        let g = star_plus();
        let layout = MessageLayout::unit(&g);
        let mask = DropMask::keep_all(layout.num_rows(), 3);
        assert_eq!(feature_diversity(&layout, &mask).unwrap(), 18);
        assert_eq!(topology_diversity(&layout, &mask).unwrap(), 10);
    }

    #[test]
    fn dropping_a_node_or_edge() {
        let g = star_plus();
        let layout = MessageLayout::unit(&g);
        let k = layout.num_rows();
        let mut keep = vec![true; k];
        for j in layout.rows_from(0) {
            keep[j] = false;
        }
        let mask = DropMask::from_rows(&keep, &vec![1.0; k], 3);
        assert_eq!(feature_diversity(&layout, &mask).unwrap(), 15);
        assert_eq!(topology_diversity(&layout, &mask).unwrap(), 6);

        // Edge 4-5: node 5 loses its only row, node 4 keeps its row to 0.
        let mut keep = vec![true; k];
        let j = layout.rows_from(4).find(|&j| layout.dst()[j] == 5).unwrap();
        keep[j] = false;
        keep[layout.twin()[j]] = false;
        let mask = DropMask::from_rows(&keep, &vec![1.0; k], 3);
        assert_eq!(topology_diversity(&layout, &mask).unwrap(), 8);
        assert_eq!(feature_diversity(&layout, &mask).unwrap(), 15);
    }

    #[test]
    fn bound_keeps_diversity_and_excess_breaks_it() {
        // Every row and every (node, column) pair sits exactly at mean 1 here,
        // so the fixture stays small to keep the per-entity 3-sigma checks few.
        let g = make_regular_graph(8, 4, 2).unwrap();
        let c = 4;
        let bound = diversity_rate_bound(&g, c).unwrap().rates;
        assert!(bound.iter().all(|&r| r == 0.75));
        let check = diversity_expectation_check(&g, c, &bound, 10_000, 1).unwrap();
        assert!(check.holds(3.0));
        for m in check.pair_means.iter().chain(&check.row_means) {
            assert!((m - 1.0).abs() < 0.05);
        }
        let excess: Vec<f64> = bound.iter().map(|&r| f64::min(r + 0.1, 0.999)).collect();
        let check = diversity_expectation_check(&g, c, &excess, 10_000, 1).unwrap();
        assert!(check.violations(3.0) > 0);
    }

    #[test]
    fn zero_rates_are_exact() {
        let g = star_plus();
        let check = diversity_expectation_check(&g, 3, &[0.0; 6], 10, 0).unwrap();
        assert!(check.row_means.iter().all(|&m| m == 3.0));
        let degrees = g.degrees();
        for (p, &u) in check.pair_nodes.iter().enumerate() {
            for l in 0..3 {
                assert_eq!(check.pair_means[p * 3 + l], degrees[u] as f64);
            }
        }
    }

    proptest! {
        #[test]
        fn diversity_is_monotone_under_more_masking(
            seed in 0u64..1000,
            extra in proptest::collection::vec((0usize..10, 0usize..3), 0..12),
        ) {
            let g = star_plus();
            let layout = MessageLayout::unit(&g);
            let spec = DropSpec::global(DropKind::DropMessage, 0.3, seed).unwrap();
            let base = sample_mask(&spec, &layout, 3, &mut spec.rng(0, 0, 0)).unwrap();
            let mut keep: Vec<Vec<bool>> = (0..layout.num_rows()).map(|j| base.keep_row(j).to_vec()).collect();
            let (fd, td) = (feature_diversity(&layout, &base).unwrap(), topology_diversity(&layout, &base).unwrap());
            for (j, l) in extra {
                keep[j][l] = false;
            }
            let tighter = DropMask::from_keep(keep, vec![1.0; layout.num_rows()]).unwrap();
            prop_assert!(feature_diversity(&layout, &tighter).unwrap() <= fd);
            prop_assert!(topology_diversity(&layout, &tighter).unwrap() <= td);
        }
    }
}
