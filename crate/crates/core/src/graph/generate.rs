//! Seeded graph generators and structural perturbations.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::{Graph, Split};
use crate::rng::{Rng, StreamKey};
use crate::{Error, Result, Tensor};

const REGULAR_RETRY_BUDGET: usize = 1000;

/// Simple undirected `d`-regular graph from the pairing (configuration)
/// model, restarting from scratch whenever a pairing produces a self-loop or
/// a multi-edge.
pub fn make_regular_graph(n: usize, d: usize, seed: u64) -> Result<Graph> {
    if !(n * d).is_multiple_of(2) {
        return Err(Error::Infeasible(format!("n*d must be even (n={n}, d={d})")));
    }
    if d >= n && !(n == 0 && d == 0) {
        return Err(Error::Infeasible(format!("degree {d} must be below n={n}")));
    }
    let mut rng = StreamKey::root(seed).label("regular").rng();
    let mut points: Vec<usize> = (0..n).flat_map(|v| core::iter::repeat_n(v, d)).collect();
    'attempt: for _ in 0..REGULAR_RETRY_BUDGET {
        points.shuffle(&mut rng);
        let mut seen = BTreeSet::new();
        let mut edges = Vec::with_capacity(n * d / 2);
        for pair in points.chunks_exact(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u == v || !seen.insert((u, v)) {
                continue 'attempt;
            }
            edges.push((u, v));
        }
        return Graph::from_undirected_edges(n, &edges);
    }
    Err(Error::RetryBudgetExhausted(REGULAR_RETRY_BUDGET))
}

/// Stochastic block model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SbmParams {
    pub n: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_noise: f64,
}

/// Stochastic block model with contiguous equal-size blocks.
///
/// Feature dimension `l` belongs to block `l % blocks`; a node's clean
/// feature vector is the indicator of its block's dimensions, plus i.i.d.
/// `N(0, feature_noise^2)` noise. Labels are block ids. Within every block
/// the nodes are assigned train/val/test round-robin in a 1:2:7 pattern.
pub fn make_sbm(params: &SbmParams, seed: u64) -> Result<Graph> {
    let SbmParams {
        n,
        blocks,
        p_in,
        p_out,
        feature_dim,
        feature_noise,
    } = *params;
    let valid_p = |p: f64| (0.0..=1.0).contains(&p);
    if !valid_p(p_in) || !valid_p(p_out) || p_out > p_in {
        return Err(Error::param(format!(
            "need 0 <= p_out <= p_in <= 1 (p_in={p_in}, p_out={p_out})"
        )));
    }
    if blocks == 0 || n % blocks != 0 {
        return Err(Error::param(format!("n={n} must be divisible by blocks={blocks}")));
    }
    if !(feature_noise >= 0.0 && feature_noise.is_finite()) {
        return Err(Error::param("feature noise must be a finite non-negative number"));
    }
    let size = n / blocks;
    let block_of = |v: usize| v / size;

    let key = StreamKey::root(seed).label("sbm");
    let mut rng = key.label("edges").rng();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if block_of(u) == block_of(v) { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }

    let mut features = Tensor::zeros(n, feature_dim);
    let mut rng = key.label("features").rng();
    let noise = Normal::new(0.0, feature_noise).map_err(|e| Error::param(format!("{e}")))?;
    for v in 0..n {
        for l in 0..feature_dim {
            let mean = if l % blocks == block_of(v) { 1.0 } else { 0.0 };
            let eps = if feature_noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            features.set(v, l, mean + eps);
        }
    }

    let labels = (0..n).map(|v| Some(block_of(v))).collect();
    let split = (0..n)
        .map(|v| match (v % size) % 10 {
            0 => Split::Train,
            1 | 2 => Split::Val,
            _ => Split::Test,
        })
        .collect();

    Graph::from_undirected_edges(n, &edges)?
        .with_features(features)?
        .with_labels(labels)?
        .with_split(split)
}

fn round_count(ratio: f64, edges: usize) -> usize {
    libm::round(ratio * edges as f64) as usize
}

/// Draws `count` distinct node pairs absent from `present`, uniformly.
fn sample_absent_pairs(
    n: usize,
    present: &BTreeSet<(usize, usize)>,
    count: usize,
    rng: &mut Rng,
) -> Result<Vec<(usize, usize)>> {
    let total = n * n.saturating_sub(1) / 2;
    let available = total - present.len();
    if count > available {
        return Err(Error::CapacityExceeded {
            requested: count,
            available,
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    if 2 * count <= available {
        // sparse regime: rejection sampling over ordered pairs
        let mut chosen = BTreeSet::new();
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u == v {
                continue;
            }
            let pair = (u.min(v), u.max(v));
            if !present.contains(&pair) && chosen.insert(pair) {
                out.push(pair);
            }
        }
        Ok(out)
    } else {
        let mut absent = Vec::with_capacity(available);
        for u in 0..n {
            for v in (u + 1)..n {
                if !present.contains(&(u, v)) {
                    absent.push((u, v));
                }
            }
        }
        Ok(index::sample(rng, available, count)
            .into_iter()
            .map(|i| absent[i])
            .collect())
    }
}

fn require_loop_free(g: &Graph) -> Result<()> {
    if g.has_self_loops() {
        Err(Error::SelfLoopsPresent)
    } else {
        Ok(())
    }
}

/// Adds `round(ratio * E)` new undirected edges drawn uniformly among absent
/// non-self pairs. Existing edges are untouched.
pub fn perturb_add_edges(g: &Graph, ratio: f64, seed: u64) -> Result<Graph> {
    require_loop_free(g)?;
    if !(ratio >= 0.0 && ratio.is_finite()) {
        return Err(Error::param(format!("ratio must be >= 0, got {ratio}")));
    }
    let mut edges = g.undirected_edges();
    let count = round_count(ratio, edges.len());
    let present: BTreeSet<_> = edges.iter().copied().collect();
    let mut rng = StreamKey::root(seed).label("perturb-add").rng();
    edges.extend(sample_absent_pairs(g.num_nodes(), &present, count, &mut rng)?);
    g.with_edges(&edges)
}

/// Removes `round(ratio * E)` undirected edges uniformly at random, then adds
/// the same number of pairs absent from the remaining graph.
pub fn rewire(g: &Graph, ratio: f64, seed: u64) -> Result<Graph> {
    require_loop_free(g)?;
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::param(format!("rewire ratio must lie in [0, 1], got {ratio}")));
    }
    let edges = g.undirected_edges();
    let count = round_count(ratio, edges.len());
    let key = StreamKey::root(seed).label("rewire");
    let mut rng = key.label("remove").rng();
    let removed: BTreeSet<usize> = index::sample(&mut rng, edges.len(), count).into_iter().collect();
    let mut kept: Vec<(usize, usize)> = edges
        .iter()
        .enumerate()
        .filter(|(i, _)| !removed.contains(i))
        .map(|(_, &e)| e)
        .collect();
    let present: BTreeSet<_> = kept.iter().copied().collect();
    let mut rng = key.label("add").rng();
    kept.extend(sample_absent_pairs(g.num_nodes(), &present, count, &mut rng)?);
    g.with_edges(&kept)
}
