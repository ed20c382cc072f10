//! Multi-seed experiment drivers shared by the CLI and the test suites.
//!
//! Every training run is seeded by [`run_seed`]; identical training cells
//! (same method, rate and perturbation) therefore reproduce each other
//! across commands, while distinct cells never share a stream.

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use droplab_core::drop::{diversity_rate_bound, DropKind, DropRate, DropSpec};
use droplab_core::graph::{hop_distance_classes, make_sbm, perturb_add_edges, rewire, SbmParams};
use droplab_core::optim::glorot_init;
use droplab_core::models::{train, TrainConfig, TrainReport};
use droplab_core::rng::StreamKey;
use droplab_core::stats::{mean, sample_std};
use droplab_core::theory::madgap;
use droplab_core::{Graph, Tensor};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

/// Seed of the `i`-th run of a training cell.
pub fn run_seed(root: u64, cell: &str, i: usize) -> u64 {
    StreamKey::root(root).label("run").label(cell).index(i as u64).value()
}

/// Seed of the `i`-th draw of an auxiliary random input (perturbed graph,
/// rate assignment) shared by all arms of a command.
pub fn aux_seed(root: u64, purpose: &str, i: usize) -> u64 {
    StreamKey::root(root).label("aux").label(purpose).index(i as u64).value()
}

/// Identifier of a training cell.
pub fn cell_id(drop: &DropSpec) -> String {
    match &drop.rate {
        DropRate::Global(r) => format!("{}/{r}", drop.kind),
        DropRate::Nodewise(_) => format!("{}/nodewise", drop.kind),
    }
}

/// Mean and sample standard deviation (n - 1) over runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        Summary {
            runs: values.len(),
            mean: mean(values),
            std: if values.len() > 1 { sample_std(values) } else { 0.0 },
        }
    }
}

/// Runs `f` over `items` on at most `jobs` threads (0 = all cores),
/// returning results in input order.
pub fn run_parallel<T, R, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building thread pool")?;
    pool.install(|| items.par_iter().map(&f).collect())
}

fn configured(template: &TrainConfig, drop: &DropSpec, seed: u64) -> TrainConfig {
    TrainConfig {
        drop: drop.clone(),
        seed,
        ..template.clone()
    }
}

/// Nodewise DropMessage rates at the diversity bound of `g`.
pub fn nodewise_bound(g: &Graph) -> Result<DropSpec> {
    let c = g.features().context("nodewise rates need node features")?.cols();
    let bound = diversity_rate_bound(g, c)?;
    if !bound.isolated.is_empty() {
        log::warn!("{} isolated nodes get dropping rate 0", bound.isolated.len());
    }
    Ok(DropSpec::new(DropKind::DropMessage, DropRate::Nodewise(bound.rates), 0)?)
}

/// One cell trained over `seeds` runs.
#[derive(Debug, Clone)]
pub struct CellRuns {
    pub seeds: Vec<u64>,
    pub reports: Vec<TrainReport>,
}

impl CellRuns {
    pub fn test_acc(&self) -> Summary {
        Summary::of(&self.reports.iter().map(|r| r.test_acc).collect::<Vec<_>>())
    }
}

pub fn train_cell(g: &Graph, template: &TrainConfig, drop: &DropSpec, seeds: usize, root: u64, jobs: usize) -> Result<CellRuns> {
    let cell = cell_id(drop);
    let seeds: Vec<u64> = (0..seeds).map(|i| run_seed(root, &cell, i)).collect();
    let reports = run_parallel(jobs, &seeds, |&s| {
        train(g, &configured(template, drop, s)).with_context(|| format!("training {cell} (seed {s})"))
    })?;
    Ok(CellRuns { seeds, reports })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub method: DropKind,
    pub delta: f64,
    pub runs: usize,
    pub test_acc_mean: f64,
    pub test_acc_std: f64,
}

/// Best-validation test accuracy for every (method, rate) pair.
pub fn sweep(g: &Graph, template: &TrainConfig, methods: &[DropKind], rates: &[f64], seeds: usize, root: u64, jobs: usize) -> Result<Vec<SweepRow>> {
    let mut tasks = Vec::new();
    for &m in methods {
        for &r in rates {
            let drop = DropSpec::global(m, r, 0)?;
            let cell = cell_id(&drop);
            for i in 0..seeds {
                tasks.push((drop.clone(), run_seed(root, &cell, i)));
            }
        }
    }
    let acc = run_parallel(jobs, &tasks, |(drop, s)| Ok(train(g, &configured(template, drop, *s))?.test_acc))?;
    let mut rows = Vec::new();
    for (cell, chunk) in acc.chunks(seeds.max(1)).enumerate() {
        let (m, r) = (methods[cell / rates.len()], rates[cell % rates.len()]);
        let acc = Summary::of(chunk);
        rows.push(SweepRow {
            method: m,
            delta: r,
            runs: acc.runs,
            test_acc_mean: acc.mean,
            test_acc_std: acc.std,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perturbation {
    AddEdges,
    Rewire,
}

impl Perturbation {
    fn name(self) -> &'static str {
        match self {
            Perturbation::AddEdges => "add-edges",
            Perturbation::Rewire => "rewire",
        }
    }

    fn apply(self, g: &Graph, ratio: f64, seed: u64) -> Result<Graph> {
        Ok(match self {
            Perturbation::AddEdges => perturb_add_edges(g, ratio, seed)?,
            Perturbation::Rewire => rewire(g, ratio, seed)?,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PerturbRow {
    pub method: DropKind,
    pub delta: f64,
    pub ratio: f64,
    pub runs: usize,
    pub test_acc_mean: f64,
    pub test_acc_std: f64,
}

/// Trains every arm on the `i`-th perturbed graph of each ratio; all arms
/// see the same perturbed graphs.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_study(
    g: &Graph,
    perturbation: Perturbation,
    template: &TrainConfig,
    arms: &[DropSpec],
    ratios: &[f64],
    seeds: usize,
    root: u64,
    jobs: usize,
) -> Result<Vec<PerturbRow>> {
    let graph_tasks: Vec<(f64, usize)> = ratios.iter().flat_map(|&r| (0..seeds).map(move |i| (r, i))).collect();
    let graphs = run_parallel(jobs, &graph_tasks, |&(r, i)| {
        let purpose = format!("{}={r}", perturbation.name());
        perturbation.apply(g, r, aux_seed(root, &purpose, i))
    })?;
    let mut tasks = Vec::new();
    for arm in arms {
        for (ri, &r) in ratios.iter().enumerate() {
            let cell = if r == 0.0 {
                cell_id(arm)
            } else {
                format!("{}/{}={r}", cell_id(arm), perturbation.name())
            };
            for i in 0..seeds {
                tasks.push((arm, ri * seeds + i, run_seed(root, &cell, i)));
            }
        }
    }
    let acc = run_parallel(jobs, &tasks, |&(arm, gi, s)| Ok(train(&graphs[gi], &configured(template, arm, s))?.test_acc))?;
    let mut rows = Vec::new();
    for (cell, chunk) in acc.chunks(seeds.max(1)).enumerate() {
        let arm = &arms[cell / ratios.len()];
        let acc = Summary::of(chunk);
        rows.push(PerturbRow {
            method: arm.kind,
            delta: arm.rate.mean(),
            ratio: ratios[cell % ratios.len()],
            runs: acc.runs,
            test_acc_mean: acc.mean,
            test_acc_std: acc.std,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OversmoothRow {
    pub method: DropKind,
    pub delta: f64,
    pub layers: usize,
    pub runs: usize,
    pub madgap_mean: f64,
    pub madgap_std: f64,
    pub test_acc_mean: f64,
    pub test_acc_std: f64,
}

/// Per-run MADGap and test accuracy of a depth sweep.
#[derive(Debug, Clone)]
pub struct OversmoothRuns {
    pub rows: Vec<OversmoothRow>,
    /// `madgap[arm][depth][seed]`.
    pub madgap: Vec<Vec<Vec<f64>>>,
}

/// Trains GCNs of each depth and measures MADGap of their outputs with the
/// hop classes `(near_max, far_min)`.
#[allow(clippy::too_many_arguments)]
pub fn oversmooth_study(
    g: &Graph,
    template: &TrainConfig,
    arms: &[DropSpec],
    depths: &[usize],
    hops: (usize, usize),
    seeds: usize,
    root: u64,
    jobs: usize,
) -> Result<OversmoothRuns> {
    let droplab_core::models::Model::Gcn(gcn) = &template.model else {
        bail!("the over-smoothing study trains GCN backbones");
    };
    let classes = hop_distance_classes(g, hops.0, hops.1)?;
    let mut tasks = Vec::new();
    for (a, arm) in arms.iter().enumerate() {
        for (di, &depth) in depths.iter().enumerate() {
            let cell = format!("{}/layers={depth}", cell_id(arm));
            for i in 0..seeds {
                tasks.push((a, di, run_seed(root, &cell, i)));
            }
        }
    }
    let results = run_parallel(jobs, &tasks, |&(a, di, s)| {
        let mut cfg = configured(template, &arms[a], s);
        cfg.model = droplab_core::models::Model::Gcn(droplab_core::models::Gcn {
            layers: depths[di],
            ..gcn.clone()
        });
        let report = train(g, &cfg)?;
        Ok((madgap(&report.representations, &classes)?, report.test_acc))
    })?;
    let mut rows = Vec::new();
    let mut gaps = vec![Vec::new(); arms.len()];
    for (cell, chunk) in results.chunks(seeds.max(1)).enumerate() {
        let (a, di) = (cell / depths.len(), cell % depths.len());
        let m: Vec<f64> = chunk.iter().map(|r| r.0).collect();
        let t: Vec<f64> = chunk.iter().map(|r| r.1).collect();
        let (ms, ts) = (Summary::of(&m), Summary::of(&t));
        rows.push(OversmoothRow {
            method: arms[a].kind,
            delta: arms[a].rate.mean(),
            layers: depths[di],
            runs: ms.runs,
            madgap_mean: ms.mean,
            madgap_std: ms.std,
            test_acc_mean: ts.mean,
            test_acc_std: ts.std,
        });
        gaps[a].push(m);
    }
    Ok(OversmoothRuns { rows, madgap: gaps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiversityArm {
    /// Every node at its diversity bound.
    Nw,
    /// `0.75 + U(-0.15, 0.15)` per node, redrawn per run.
    Avg,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DiversityRow {
    pub arm: DiversityArm,
    pub mean_rate: f64,
    pub runs: usize,
    pub test_acc_mean: f64,
    pub test_acc_std: f64,
}

/// Per-node rates of the average arm for run `i`.
pub fn average_rates(n: usize, root: u64, i: usize) -> Vec<f64> {
    let mut rng = StreamKey::root(aux_seed(root, "average-rates", i)).rng();
    (0..n).map(|_| 0.75 + rng.random_range(-0.15..0.15)).collect()
}

/// Paired nodewise DropMessage training: bound rates against randomized
/// rates around 0.75.
pub fn diversity_study(g: &Graph, template: &TrainConfig, seeds: usize, root: u64, jobs: usize) -> Result<Vec<DiversityRow>> {
    let nw = nodewise_bound(g)?;
    let mut tasks = Vec::new();
    for i in 0..seeds {
        tasks.push((DiversityArm::Nw, nw.clone(), run_seed(root, "dropmessage/nodewise", i)));
    }
    for i in 0..seeds {
        let rates = average_rates(g.num_nodes(), root, i);
        let spec = DropSpec::new(DropKind::DropMessage, DropRate::Nodewise(rates), 0)?;
        tasks.push((DiversityArm::Avg, spec, run_seed(root, "dropmessage/average", i)));
    }
    let acc = run_parallel(jobs, &tasks, |(_, drop, s)| Ok(train(g, &configured(template, drop, *s))?.test_acc))?;
    let mean_rate = |arm| {
        let rates: Vec<f64> = tasks.iter().filter(|t| t.0 == arm).map(|t| t.1.rate.mean()).collect();
        mean(&rates)
    };
    let row = |arm, values: &[f64]| {
        let acc = Summary::of(values);
        DiversityRow {
            arm,
            mean_rate: mean_rate(arm),
            runs: acc.runs,
            test_acc_mean: acc.mean,
            test_acc_std: acc.std,
        }
    };
    Ok(vec![row(DiversityArm::Nw, &acc[..seeds]), row(DiversityArm::Avg, &acc[seeds..])])
}

/// Binary single-layer fixture for the regularization check: a two-block
/// SBM on `nodes` nodes (labels are the blocks), standard normal features
/// and Glorot-initialized weights.
pub fn regcheck_fixture(nodes: usize, features: usize, seed: u64) -> Result<(Graph, Tensor)> {
    let params = SbmParams {
        n: nodes,
        blocks: 2,
        p_in: 0.6,
        p_out: 0.1,
        feature_dim: features,
        feature_noise: 0.0,
    };
    let g = make_sbm(&params, aux_seed(seed, "regcheck-graph", 0))?;
    let mut rng = StreamKey::root(aux_seed(seed, "regcheck-features", 0)).rng();
    let x = Tensor::from_fn(nodes, features, |_, _| StandardNormal.sample(&mut rng));
    let w = glorot_init(features, 1, aux_seed(seed, "regcheck-weights", 0));
    Ok((g.with_features(x)?, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_distinct_per_cell_and_index() {
        let a = run_seed(0, "dropout/0.5", 0);
        assert_ne!(a, run_seed(0, "dropout/0.5", 1));
        assert_ne!(a, run_seed(0, "dropout/0.55", 0));
        assert_ne!(a, run_seed(1, "dropout/0.5", 0));
        assert_eq!(a, run_seed(0, "dropout/0.5", 0));
    }

    #[test]
    fn summary_uses_sample_std() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!((s.runs, s.mean), (4, 2.5));
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(Summary::of(&[0.7]).std, 0.0);
    }

    #[test]
    fn average_rates_stay_in_band() {
        let r = average_rates(500, 3, 0);
        assert!(r.iter().all(|&x| (0.6..0.9).contains(&x)));
        assert_ne!(r, average_rates(500, 3, 1));
    }
}
