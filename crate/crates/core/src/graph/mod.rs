//! Undirected graphs stored as symmetric directed-edge arrays in CSR order.
//!
//! Each undirected edge `{u, v}` appears as the two directed rows `u -> v`
//! and `v -> u`; `twin` maps every row to its reverse. This matches the
//! message matrix, which carries one row per directed edge.

mod generate;
mod hops;

use alloc::vec::Vec;

use crate::{Error, Result, Tensor};

pub use generate::{make_regular_graph, make_sbm, perturb_add_edges, rewire, SbmParams};
pub use hops::{hop_distance_classes, HopClasses, PairTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Val,
    Test,
    None,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::None => "none",
        }
    }
}

impl core::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "none" => Ok(Split::None),
            other => Err(Error::param(alloc::format!("unknown split tag '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    src: Vec<usize>,
    dst: Vec<usize>,
    offsets: Vec<usize>,
    twin: Vec<usize>,
    self_loop: Vec<bool>,
    has_self_loops: bool,
    features: Option<Tensor>,
    labels: Vec<Option<usize>>,
    split: Vec<Split>,
}

impl Graph {
    /// Builds a simple undirected graph. Each pair must appear once (in
    /// either orientation); self-loops are rejected, use
    /// [`Graph::add_self_loops`] instead.
    pub fn from_undirected_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut canon: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::IndexOutOfRange {
                        what: "edge endpoint",
                        index: x,
                        bound: n,
                    });
                }
            }
            if u == v {
                return Err(Error::SelfLoopEdge(u));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEdge(w[0].0, w[0].1));
        }
        let mut directed: Vec<(usize, usize)> = Vec::with_capacity(2 * canon.len());
        for &(u, v) in &canon {
            directed.push((u, v));
            directed.push((v, u));
        }
        Ok(Self::from_directed(n, directed, false))
    }

    fn from_directed(n: usize, mut directed: Vec<(usize, usize)>, loops: bool) -> Self {
        directed.sort_unstable();
        let k = directed.len();
        let mut offsets = alloc::vec![0usize; n + 1];
        for &(u, _) in &directed {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let src: Vec<usize> = directed.iter().map(|e| e.0).collect();
        let dst: Vec<usize> = directed.iter().map(|e| e.1).collect();
        let self_loop: Vec<bool> = directed.iter().map(|e| e.0 == e.1).collect();
        let mut twin = alloc::vec![0usize; k];
        for j in 0..k {
            let (u, v) = (src[j], dst[j]);
            let row = &dst[offsets[v]..offsets[v + 1]];
            // the symmetric construction guarantees the reverse edge exists
            let pos = row.binary_search(&u).expect("reverse edge present");
            twin[j] = offsets[v] + pos;
        }
        Graph {
            n,
            src,
            dst,
            offsets,
            twin,
            self_loop,
            has_self_loops: loops,
            features: None,
            labels: alloc::vec![None; n],
            split: alloc::vec![Split::None; n],
        }
    }

    /// A graph on the same nodes, carrying over features, labels and split.
    pub fn with_edges(&self, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::from_undirected_edges(self.n, edges)?;
        g.features = self.features.clone();
        g.labels = self.labels.clone();
        g.split = self.split.clone();
        Ok(g)
    }

    pub fn with_features(mut self, features: Tensor) -> Result<Self> {
        if features.rows() != self.n {
            return Err(Error::shape(
                "features",
                features.shape(),
                (self.n, features.cols()),
            ));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<Option<usize>>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::shape("labels", (labels.len(), 1), (self.n, 1)));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn with_split(mut self, split: Vec<Split>) -> Result<Self> {
        if split.len() != self.n {
            return Err(Error::shape("split", (split.len(), 1), (self.n, 1)));
        }
        self.split = split;
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Directed rows, self-loops included.
    pub fn num_directed_edges(&self) -> usize {
        self.src.len()
    }

    pub fn num_undirected_edges(&self) -> usize {
        self.self_loop.iter().filter(|l| !**l).count() / 2
    }

    pub fn src(&self) -> &[usize] {
        &self.src
    }

    pub fn dst(&self) -> &[usize] {
        &self.dst
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn twin(&self) -> &[usize] {
        &self.twin
    }

    pub fn self_loop_flags(&self) -> &[bool] {
        &self.self_loop
    }

    pub fn has_self_loops(&self) -> bool {
        self.has_self_loops
    }

    pub fn features(&self) -> Option<&Tensor> {
        self.features.as_ref()
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn split(&self) -> &[Split] {
        &self.split
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.dst[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && v < self.n && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Canonical `(u, v)` with `u < v`, sorted, self-loops excluded.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        self.src
            .iter()
            .zip(&self.dst)
            .filter(|(u, v)| u < v)
            .map(|(&u, &v)| (u, v))
            .collect()
    }

    /// Out-degree per node (self-loops count once when present).
    pub fn degrees(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Out-degree ignoring self-loops.
    pub fn loop_free_degrees(&self) -> Vec<usize> {
        let mut deg = alloc::vec![0usize; self.n];
        for (j, &u) in self.src.iter().enumerate() {
            if !self.self_loop[j] {
                deg[u] += 1;
            }
        }
        deg
    }

    /// Number of distinct classes among labeled nodes (max label + 1).
    pub fn num_classes(&self) -> usize {
        self.labels.iter().flatten().map(|&c| c + 1).max().unwrap_or(0)
    }

    /// Node indices carrying the given split tag.
    pub fn split_mask(&self, tag: Split) -> Vec<bool> {
        self.split.iter().map(|&s| s == tag).collect()
    }

    /// Appends one flagged self-loop per node.
    pub fn add_self_loops(&self) -> Result<Self> {
        if self.has_self_loops {
            return Err(Error::SelfLoopsPresent);
        }
        let mut directed: Vec<(usize, usize)> =
            self.src.iter().copied().zip(self.dst.iter().copied()).collect();
        directed.extend((0..self.n).map(|v| (v, v)));
        let mut g = Self::from_directed(self.n, directed, true);
        g.features = self.features.clone();
        g.labels = self.labels.clone();
        g.split = self.split.clone();
        Ok(g)
    }

    /// Symmetric GCN normalization `1 / sqrt(deg(u) deg(v))` per directed
    /// row, with loop-inclusive degrees.
    pub fn sym_norm_coeffs(&self) -> Result<Vec<f64>> {
        if !self.has_self_loops {
            return Err(Error::param(
                "symmetric normalization requires self-loops (call add_self_loops first)",
            ));
        }
        let deg = self.degrees();
        Ok(self
            .src
            .iter()
            .zip(&self.dst)
            .map(|(&u, &v)| 1.0 / libm::sqrt((deg[u] * deg[v]) as f64))
            .collect())
    }

    /// Checks every structural invariant; used by tests and loaders.
    pub fn validate(&self) -> Result<()> {
        let k = self.src.len();
        let bad = |msg: &str| Err(Error::param(alloc::format!("invalid graph: {msg}")));
        if self.dst.len() != k || self.twin.len() != k || self.self_loop.len() != k {
            return bad("edge array lengths differ");
        }
        if self.offsets.len() != self.n + 1 || self.offsets[self.n] != k || self.offsets[0] != 0 {
            return bad("csr offsets do not cover the edge arrays");
        }
        if self.offsets.windows(2).any(|w| w[0] > w[1]) {
            return bad("csr offsets decrease");
        }
        for u in 0..self.n {
            for j in self.offsets[u]..self.offsets[u + 1] {
                if self.src[j] != u {
                    return bad("edge not in its source's csr slice");
                }
            }
        }
        for j in 0..k {
            let (u, v) = (self.src[j], self.dst[j]);
            if u >= self.n || v >= self.n {
                return bad("endpoint out of range");
            }
            let t = self.twin[j];
            if t >= k || self.twin[t] != j || self.src[t] != v || self.dst[t] != u {
                return bad("twin map is not an involution onto reverse edges");
            }
            if self.self_loop[j] != (u == v) {
                return bad("self-loop flag mismatch");
            }
            if u == v && !self.has_self_loops {
                return bad("unflagged self-loop");
            }
        }
        for u in 0..self.n {
            if self.neighbors(u).windows(2).any(|w| w[0] >= w[1]) {
                return bad("duplicate or unsorted adjacency");
            }
        }
        if let Some(f) = &self.features {
            if f.rows() != self.n {
                return bad("feature row count differs from n");
            }
        }
        if self.labels.len() != self.n || self.split.len() != self.n {
            return bad("label/split length differs from n");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::from_undirected_edges(n, &edges).unwrap()
    }

    #[test]
    fn path_degrees() {
        let g = path(3);
        assert_eq!(g.degrees(), vec![1, 2, 1]);
        assert_eq!(g.num_directed_edges(), 4);
        g.validate().unwrap();
    }

    #[test]
    fn empty_edge_graph_has_zero_degrees() {
        let g = Graph::from_undirected_edges(5, &[]).unwrap();
        assert_eq!(g.degrees(), vec![0; 5]);
        g.validate().unwrap();
    }

    #[test]
    fn rejects_bad_edges() {
        assert_eq!(
            Graph::from_undirected_edges(3, &[(0, 1), (1, 0)]),
            Err(Error::DuplicateEdge(0, 1))
        );
        assert_eq!(
            Graph::from_undirected_edges(3, &[(2, 2)]),
            Err(Error::SelfLoopEdge(2))
        );
        assert!(matches!(
            Graph::from_undirected_edges(3, &[(0, 3)]),
            Err(Error::IndexOutOfRange { index: 3, .. })
        ));
    }

    #[test]
    fn twin_is_involution() {
        let g = Graph::from_undirected_edges(4, &[(0, 1), (1, 2), (0, 3), (2, 3)]).unwrap();
        for j in 0..g.num_directed_edges() {
            let t = g.twin()[j];
            assert_ne!(t, j);
            assert_eq!(g.twin()[t], j);
            assert_eq!((g.src()[t], g.dst()[t]), (g.dst()[j], g.src()[j]));
        }
    }

    #[test]
    fn self_loops_add_one_row_per_node() {
        let g = path(3).add_self_loops().unwrap();
        assert_eq!(g.num_directed_edges(), 7);
        assert_eq!(g.degrees(), vec![2, 3, 2]);
        assert_eq!(g.loop_free_degrees(), vec![1, 2, 1]);
        assert_eq!(g.self_loop_flags().iter().filter(|f| **f).count(), 3);
        g.validate().unwrap();
        assert_eq!(g.add_self_loops(), Err(Error::SelfLoopsPresent));

        let single = Graph::from_undirected_edges(1, &[]).unwrap().add_self_loops().unwrap();
        assert_eq!(single.num_directed_edges(), 1);
        assert_eq!(single.twin(), &[0]);
    }

    #[test]
    fn sym_norm_coefficients() {
        let iso = Graph::from_undirected_edges(1, &[]).unwrap().add_self_loops().unwrap();
        assert_eq!(iso.sym_norm_coeffs().unwrap(), vec![1.0]);

        let p2 = path(2).add_self_loops().unwrap();
        assert!(p2.sym_norm_coeffs().unwrap().iter().all(|&c| c == 0.5));

        assert!(path(2).sym_norm_coeffs().is_err());
    }

    #[test]
    fn feature_rows_must_match() {
        let g = path(3);
        assert!(g.clone().with_features(Tensor::zeros(2, 4)).is_err());
        assert!(g.with_features(Tensor::zeros(3, 4)).is_ok());
    }
}
