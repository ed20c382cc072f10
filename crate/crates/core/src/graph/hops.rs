//! Hop-distance pair classes for MADGap.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::Graph;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairTag {
    Near,
    Far,
    Neither,
}

/// Tags for every unordered node pair `i < j`, stored row-major over the
/// strict upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct HopClasses {
    n: usize,
    tags: Vec<PairTag>,
}

impl HopClasses {
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    fn offset(&self, i: usize) -> usize {
        // pairs (a, b) with a < i come first: sum_{a < i} (n - 1 - a)
        i * (2 * self.n - i - 1) / 2
    }

    pub fn tag(&self, i: usize, j: usize) -> PairTag {
        let (a, b) = (i.min(j), i.max(j));
        assert!(a != b && b < self.n, "pair ({i}, {j}) out of range");
        self.tags[self.offset(a) + (b - a - 1)]
    }

    /// Iterates `(i, j, tag)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, PairTag)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
            .zip(self.tags.iter())
            .map(|((i, j), &t)| (i, j, t))
    }

    pub fn count(&self, tag: PairTag) -> usize {
        self.tags.iter().filter(|&&t| t == tag).count()
    }
}

/// BFS hop distances classified as near (`<= near_max`), far
/// (`>= far_min`, disconnected pairs included) or neither.
pub fn hop_distance_classes(g: &Graph, near_max: usize, far_min: usize) -> Result<HopClasses> {
    if near_max >= far_min {
        return Err(Error::param(alloc::format!(
            "near_max ({near_max}) must be below far_min ({far_min})"
        )));
    }
    let n = g.num_nodes();
    let mut tags = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let mut dist = alloc::vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for &d in &dist[(s + 1)..] {
            tags.push(if d <= near_max {
                PairTag::Near
            } else if d >= far_min {
                PairTag::Far
            } else {
                PairTag::Neither
            });
        }
    }
    Ok(HopClasses { n, tags })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::from_undirected_edges(n, &edges).unwrap()
    }

    #[test]
    fn p2_single_near_pair() {
        let h = hop_distance_classes(&path(2), 1, 2).unwrap();
        assert_eq!(h.tag(0, 1), PairTag::Near);
        assert_eq!(h.pairs().count(), 1);
    }

    #[test]
    fn p10_thresholds() {
        let h = hop_distance_classes(&path(10), 3, 8).unwrap();
        assert_eq!(h.tag(0, 9), PairTag::Far);
        assert_eq!(h.tag(0, 3), PairTag::Near);
        assert_eq!(h.tag(0, 5), PairTag::Neither);
        assert_eq!(h.tag(9, 1), PairTag::Far);
        // every pair visited exactly once, in the same order as `tag`
        for (i, j, t) in h.pairs() {
            assert_eq!(h.tag(i, j), t);
        }
        assert_eq!(h.pairs().count(), 45);
    }

    #[test]
    fn disconnected_pairs_are_far() {
        let g = Graph::from_undirected_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let h = hop_distance_classes(&g, 3, 8).unwrap();
        assert_eq!(h.tag(0, 2), PairTag::Far);
        assert_eq!(h.tag(1, 3), PairTag::Far);
        assert_eq!(h.tag(0, 1), PairTag::Near);
        assert_eq!(h.count(PairTag::Far), 4);
    }

    #[test]
    fn rejects_inverted_thresholds() {
        assert!(hop_distance_classes(&path(3), 3, 3).is_err());
    }
}
