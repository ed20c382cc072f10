//! Command-line surface. Every argument struct doubles as the JSON config
//! echo written next to a command's outputs, so `droplab replay` can re-run
//! a command from that file alone.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use droplab_core::drop::{DropKind, DropSpec};
use droplab_core::graph::{make_regular_graph, make_sbm, SbmParams};
use droplab_core::models::{Appnp, EpochRecord, Gcn, Model, Placement, TrainConfig};
use droplab_core::theory::{
    diversity_expectation_check, entropy_ordering_scan, regularization_check, variance_monte_carlo, EntropyInputs,
    VarSource,
};
use droplab_core::Graph;

use crate::dataset::{load_dataset, save_dataset};
use crate::experiments::{
    aux_seed, cell_id, diversity_study, nodewise_bound, oversmooth_study, perturbation_study, regcheck_fixture,
    run_parallel, run_seed, sweep, train_cell, Perturbation, Summary,
};
use crate::output::{write_csv, write_json};

pub const CONFIG_FILE: &str = "config.json";
pub const SEED_ENV: &str = "DROPLAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "droplab", version, about = "Random-dropping experiments on message-passing GNNs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Generate a synthetic dataset directory.
    Gen(GenArgs),
    /// Train one configuration over several seeds.
    Train(TrainArgs),
    /// Best-validation test accuracy over a grid of methods and rates.
    Sweep(SweepArgs),
    /// Accuracy under randomly added edges.
    Robustness(PerturbArgs),
    /// Accuracy under edge rewiring.
    Rewire(PerturbArgs),
    /// MADGap and accuracy of GCNs of increasing depth.
    Oversmooth(OversmoothArgs),
    /// Sample variance of each method against its closed form.
    Variance(VarianceArgs),
    /// Expected message entropy over a grid of rates.
    Entropy(EntropyArgs),
    /// Second-order regularization check on a frozen binary model.
    Regcheck(RegcheckArgs),
    /// Diversity-bound rates: expectation check and nodewise vs average training.
    Diversity(DiversityArgs),
    /// Re-run a command from its config.json.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenArgs {
    #[command(subcommand)]
    pub generator: Generator,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Generator {
    /// Stochastic block model with block-indicator features.
    Sbm(SbmArgs),
    /// Random d-regular graph without features.
    Regular(RegularArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SbmArgs {
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub blocks: usize,
    #[arg(long = "p-in", default_value_t = 0.032)]
    pub p_in: f64,
    #[arg(long = "p-out", default_value_t = 0.0037)]
    pub p_out: f64,
    #[arg(long = "feature-dim", default_value_t = 30)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 4.0)]
    pub noise: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: SeedOut,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RegularArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: SeedOut,
}

/// Root seed and output directory of a command without repeated runs.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SeedOut {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    #[serde(skip)]
    pub jobs: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

/// Repetitions, root seed and output directory.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RunArgs {
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: SeedOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Gcn,
    Appnp,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ModelName::Gcn)]
    pub model: ModelName,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    /// APPNP teleport probability.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// APPNP propagation steps.
    #[arg(long = "power-steps", default_value_t = 10)]
    pub power_steps: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.005)]
    pub lr: f64,
    #[arg(long = "weight-decay", default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value = "message")]
    pub placement: Placement,
}

impl ModelArgs {
    pub fn template(&self, layers: usize) -> TrainConfig {
        let model = match self.model {
            ModelName::Gcn => Model::Gcn(Gcn {
                layers,
                hidden: self.hidden,
                bias: true,
            }),
            ModelName::Appnp => Model::Appnp(Appnp {
                alpha: self.alpha,
                k: self.power_steps,
                bias: true,
            }),
        };
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            weight_decay: self.weight_decay,
            placement: self.placement,
            ..TrainConfig::new(model, DropSpec::none(), 0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// GCN depth.
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value = "none")]
    pub drop: DropKind,
    #[arg(long, default_value_t = 0.5)]
    pub rate: f64,
    /// Per-node DropMessage rates at the diversity bound (ignores --rate).
    #[arg(long)]
    pub nodewise: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, value_delimiter = ',', default_value = "dropout,dropedge,dropnode,dropmessage")]
    pub drop: Vec<DropKind>,
    #[arg(long, value_delimiter = ',', default_values_t = default_rate_grid())]
    pub rates: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

/// 0.05, 0.10, ..., 0.95.
pub fn default_rate_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PerturbArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, value_delimiter = ',', default_value = "none,dropmessage")]
    pub drop: Vec<DropKind>,
    #[arg(long, default_value_t = 0.5)]
    pub rate: f64,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3")]
    pub ratios: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OversmoothArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// GCN depths to train.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
    pub layers: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "none,dropout,dropedge,dropnode,dropmessage")]
    pub drop: Vec<DropKind>,
    #[arg(long, default_value_t = 0.5)]
    pub rate: f64,
    /// Pairs at most this many hops apart are "near".
    #[arg(long, default_value_t = 3)]
    pub near: usize,
    /// Pairs at least this many hops apart (or disconnected) are "far".
    #[arg(long, default_value_t = 8)]
    pub far: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VarianceArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    #[arg(long, default_value_t = 8)]
    pub c: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub rate: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "dropout,dropedge,dropnode,dropmessage")]
    pub drop: Vec<DropKind>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: SeedOut,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EntropyArgs {
    /// Message-type proportions.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.25,0.25,0.25")]
    pub p: Vec<f64>,
    /// Sending nodes per type.
    #[arg(long, value_delimiter = ',', default_value = "2,2,2,2")]
    pub senders: Vec<usize>,
    /// Deliveries per type.
    #[arg(long, value_delimiter = ',', default_value = "8,8,8,8")]
    pub deliveries: Vec<usize>,
    #[arg(long = "msg-dim", default_value_t = 16)]
    pub msg_dim: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub rates: Vec<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarSourceArg {
    Mc,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RegcheckArgs {
    /// Dataset with binary labels; defaults to a generated fixture.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Fixture size when no dataset is given.
    #[arg(long, default_value_t = 12)]
    pub nodes: usize,
    #[arg(long, default_value_t = 16)]
    pub features: usize,
    #[arg(long, value_delimiter = ',', default_value = "dropout,dropedge,dropnode,dropmessage")]
    pub drop: Vec<DropKind>,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub rate: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long = "var-source", value_enum, default_value_t = VarSourceArg::Mc)]
    pub var_source: VarSourceArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: SeedOut,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DiversityArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    /// Mask draws for the expectation check.
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ReplayArgs {
    /// A config.json written by an earlier command.
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

impl Command {
    fn seed_out(&mut self) -> Option<&mut SeedOut> {
        match self {
            Command::Gen(g) => match &mut g.generator {
                Generator::Sbm(a) => Some(&mut a.out),
                Generator::Regular(a) => Some(&mut a.out),
            },
            Command::Train(a) => Some(&mut a.run.out),
            Command::Sweep(a) => Some(&mut a.run.out),
            Command::Robustness(a) | Command::Rewire(a) => Some(&mut a.run.out),
            Command::Oversmooth(a) => Some(&mut a.run.out),
            Command::Variance(a) => Some(&mut a.out),
            Command::Regcheck(a) => Some(&mut a.out),
            Command::Diversity(a) => Some(&mut a.run.out),
            Command::Entropy(_) | Command::Replay(_) => None,
        }
    }

    /// Applies a root-seed override (the `DROPLAB_SEED` variable).
    pub fn override_seed(&mut self, seed: u64) {
        if let Some(s) = self.seed_out() {
            s.seed = seed;
        }
    }

    pub fn set_output(&mut self, out: PathBuf, jobs: usize) {
        match self {
            Command::Entropy(a) => a.out = out,
            Command::Replay(a) => {
                a.out = out;
                a.jobs = jobs;
            }
            other => {
                let s = other.seed_out().expect("every other command has an output");
                s.out = out;
                s.jobs = jobs;
            }
        }
    }

    fn out_dir(&mut self) -> PathBuf {
        match self {
            Command::Entropy(a) => a.out.clone(),
            Command::Replay(a) => a.out.clone(),
            other => other.seed_out().expect("every other command has an output").out.clone(),
        }
    }

    /// Runs the command, writing its outputs and config echo.
    pub fn run(mut self) -> Result<()> {
        if let Command::Replay(r) = &self {
            let text = fs::read_to_string(&r.config).with_context(|| format!("reading {}", r.config.display()))?;
            let mut cmd: Command =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", r.config.display()))?;
            cmd.set_output(r.out.clone(), r.jobs);
            return cmd.run();
        }
        let out = self.out_dir();
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        write_json(&out.join(CONFIG_FILE), &self)?;
        match &self {
            Command::Gen(a) => run_gen(a, &out),
            Command::Train(a) => run_train(a, &self, &out),
            Command::Sweep(a) => run_sweep(a, &out),
            Command::Robustness(a) => run_perturb(a, Perturbation::AddEdges, &out.join("robustness.csv")),
            Command::Rewire(a) => run_perturb(a, Perturbation::Rewire, &out.join("rewire.csv")),
            Command::Oversmooth(a) => run_oversmooth(a, &out),
            Command::Variance(a) => run_variance(a, &out),
            Command::Entropy(a) => run_entropy(a, &out),
            Command::Regcheck(a) => run_regcheck(a, &out),
            Command::Diversity(a) => run_diversity(a, &out),
            Command::Replay(_) => unreachable!(),
        }
    }
}

fn load(path: &Path) -> Result<Graph> {
    load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

/// A global-rate arm; `none` is normalized to rate 0.
fn arm(kind: DropKind, rate: f64) -> Result<DropSpec> {
    let rate = if kind == DropKind::None { 0.0 } else { rate };
    Ok(DropSpec::global(kind, rate, 0)?)
}

fn run_gen(a: &GenArgs, out: &Path) -> Result<()> {
    let g = match &a.generator {
        Generator::Sbm(s) => make_sbm(
            &SbmParams {
                n: s.n,
                blocks: s.blocks,
                p_in: s.p_in,
                p_out: s.p_out,
                feature_dim: s.feature_dim,
                feature_noise: s.noise,
            },
            s.out.seed,
        )?,
        Generator::Regular(r) => make_regular_graph(r.n, r.d, r.out.seed)?,
    };
    save_dataset(&g, out)?;
    log::info!(
        "wrote {} nodes, {} edges to {}",
        g.num_nodes(),
        g.num_undirected_edges(),
        out.display()
    );
    Ok(())
}

/// `report.json` of the train command.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub config: Command,
    pub generator: String,
    pub root_seed: u64,
    pub cell: String,
    pub runs: Vec<RunSummary>,
    pub test_acc: Summary,
    /// Per-epoch metrics averaged over runs.
    pub epochs: Vec<EpochRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub index: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub test_acc: f64,
}

pub const RNG_GENERATOR: &str = "ChaCha8 streams keyed by splitmix64-mixed FNV-1a labels";

fn run_train(a: &TrainArgs, echo: &Command, out: &Path) -> Result<()> {
    let g = load(&a.data)?;
    let drop = if a.nodewise {
        if a.drop != DropKind::DropMessage {
            bail!("--nodewise applies to dropmessage only");
        }
        nodewise_bound(&g)?
    } else {
        arm(a.drop, a.rate)?
    };
    let template = a.model.template(a.layers);
    let started = std::time::Instant::now();
    let cell = train_cell(&g, &template, &drop, a.run.seeds, a.run.out.seed, a.run.out.jobs)?;
    log::info!("trained {} runs in {:.2?}", cell.reports.len(), started.elapsed());

    let epochs = (0..=a.model.epochs)
        .map(|e| {
            let avg = |f: fn(&EpochRecord) -> f64| -> f64 {
                let v: Vec<f64> = cell.reports.iter().map(|r| f(&r.records[e])).collect();
                droplab_core::stats::mean(&v)
            };
            EpochRecord {
                epoch: e,
                train_loss: avg(|r| r.train_loss),
                train_acc: avg(|r| r.train_acc),
                val_acc: avg(|r| r.val_acc),
                test_acc: avg(|r| r.test_acc),
            }
        })
        .collect::<Vec<_>>();
    write_csv(&out.join("metrics.csv"), &epochs)?;
    let report = RunReport {
        config: echo.clone(),
        generator: RNG_GENERATOR.to_owned(),
        root_seed: a.run.out.seed,
        cell: cell_id(&drop),
        runs: cell
            .reports
            .iter()
            .zip(&cell.seeds)
            .enumerate()
            .map(|(index, (r, &seed))| RunSummary {
                index,
                seed,
                best_epoch: r.best_epoch,
                best_val_acc: r.best_val_acc,
                test_acc: r.test_acc,
            })
            .collect(),
        test_acc: cell.test_acc(),
        epochs,
    };
    write_json(&out.join("report.json"), &report)?;
    println!(
        "{}: test accuracy {:.4} ± {:.4} over {} runs",
        report.cell, report.test_acc.mean, report.test_acc.std, report.test_acc.runs
    );
    Ok(())
}

fn run_sweep(a: &SweepArgs, out: &Path) -> Result<()> {
    let g = load(&a.data)?;
    let rows = sweep(
        &g,
        &a.model.template(a.layers),
        &a.drop,
        &a.rates,
        a.run.seeds,
        a.run.out.seed,
        a.run.out.jobs,
    )?;
    write_csv(&out.join("sweep.csv"), &rows)
}

fn run_perturb(a: &PerturbArgs, perturbation: Perturbation, path: &Path) -> Result<()> {
    let g = load(&a.data)?;
    let arms = a.drop.iter().map(|&k| arm(k, a.rate)).collect::<Result<Vec<_>>>()?;
    let rows = perturbation_study(
        &g,
        perturbation,
        &a.model.template(a.layers),
        &arms,
        &a.ratios,
        a.run.seeds,
        a.run.out.seed,
        a.run.out.jobs,
    )?;
    write_csv(path, &rows)
}

fn run_oversmooth(a: &OversmoothArgs, out: &Path) -> Result<()> {
    if a.model.model != ModelName::Gcn {
        bail!("oversmooth trains GCN backbones only");
    }
    let g = load(&a.data)?;
    let arms = a.drop.iter().map(|&k| arm(k, a.rate)).collect::<Result<Vec<_>>>()?;
    let runs = oversmooth_study(
        &g,
        &a.model.template(1),
        &arms,
        &a.layers,
        (a.near, a.far),
        a.run.seeds,
        a.run.out.seed,
        a.run.out.jobs,
    )?;
    write_csv(&out.join("oversmooth.csv"), &runs.rows)
}

#[derive(Debug, Serialize)]
struct VarianceRow {
    method: DropKind,
    n: usize,
    c: usize,
    d: usize,
    delta: f64,
    closed_form: f64,
    mc_estimate: f64,
    mc_std_error: f64,
    trials: usize,
    z_score: f64,
}

fn run_variance(a: &VarianceArgs, out: &Path) -> Result<()> {
    let g = make_regular_graph(a.n, a.d, aux_seed(a.out.seed, "regular-graph", 0))?;
    let cells: Vec<(DropKind, f64)> = a.rate.iter().flat_map(|&r| a.drop.iter().map(move |&k| (k, r))).collect();
    let rows = run_parallel(a.out.jobs, &cells, |&(kind, delta)| {
        let seed = run_seed(a.out.seed, &format!("variance/{kind}/{delta}"), 0);
        let r = variance_monte_carlo(kind, &g, a.c, delta, a.trials, seed)?;
        Ok(VarianceRow {
            method: kind,
            n: r.n,
            c: r.c,
            d: r.d,
            delta,
            closed_form: r.closed_form,
            mc_estimate: r.mc_estimate,
            mc_std_error: r.mc_std_error,
            trials: r.mc_trials,
            z_score: r.z_score(),
        })
    })?;
    write_csv(&out.join("variance.csv"), &rows)
}

#[derive(Debug, Serialize)]
struct EntropyCsvRow {
    delta: f64,
    clean: f64,
    dropout: f64,
    dropedge: f64,
    dropnode: f64,
    dropmessage: f64,
    dm_ge_dropout: bool,
    dm_ge_structural: bool,
    all_ge_clean: bool,
}

fn run_entropy(a: &EntropyArgs, out: &Path) -> Result<()> {
    let inputs = EntropyInputs::new(a.p.clone(), a.senders.clone(), a.deliveries.clone(), a.msg_dim)?;
    let rows: Vec<EntropyCsvRow> = entropy_ordering_scan(&inputs, &a.rates)?
        .into_iter()
        .map(|r| EntropyCsvRow {
            delta: r.delta,
            clean: r.clean,
            dropout: r.dropout,
            dropedge: r.dropedge,
            dropnode: r.dropnode,
            dropmessage: r.dropmessage,
            dm_ge_dropout: r.dm_ge_dropout(),
            dm_ge_structural: r.dm_ge_structural(),
            all_ge_clean: r.all_ge_clean(),
        })
        .collect();
    write_csv(&out.join("entropy.csv"), &rows)
}

#[derive(Debug, Serialize)]
struct RegcheckRow {
    method: DropKind,
    delta: f64,
    trials: usize,
    var_source: VarSourceArg,
    base_loss: f64,
    mc_expected_loss: f64,
    mc_std_error: f64,
    taylor_term: f64,
    residual: f64,
    relative_residual: f64,
    agrees: bool,
}

fn run_regcheck(a: &RegcheckArgs, out: &Path) -> Result<()> {
    let (g, w) = match &a.data {
        Some(path) => {
            let g = load(path)?;
            let c = g.features().context("regcheck needs node features")?.cols();
            let w = droplab_core::optim::glorot_init(c, 1, aux_seed(a.out.seed, "regcheck-weights", 0));
            (g, w)
        }
        None => regcheck_fixture(a.nodes, a.features, a.out.seed)?,
    };
    let x = g.features().context("regcheck needs node features")?;
    let source = match a.var_source {
        VarSourceArg::Mc => VarSource::Mc,
        VarSourceArg::ClosedForm => VarSource::ClosedForm,
    };
    let cells: Vec<(DropKind, f64)> = a.rate.iter().flat_map(|&r| a.drop.iter().map(move |&k| (k, r))).collect();
    let rows = run_parallel(a.out.jobs, &cells, |&(kind, delta)| {
        let seed = run_seed(a.out.seed, &format!("regcheck/{kind}/{delta}"), 0);
        let drop = arm(kind, delta)?;
        let r = regularization_check(&g, x, g.labels(), &w, &drop, source, a.trials, seed)?;
        Ok(RegcheckRow {
            method: kind,
            delta,
            trials: r.trials,
            var_source: a.var_source,
            base_loss: r.base_loss,
            mc_expected_loss: r.mc_expected_loss,
            mc_std_error: r.mc_std_error,
            taylor_term: r.taylor_term,
            residual: r.residual,
            relative_residual: r.relative_residual(),
            agrees: r.agrees(0.1, 3.0),
        })
    })?;
    write_csv(&out.join("regcheck.csv"), &rows)
}

#[derive(Debug, Serialize)]
struct BoundRow {
    node: usize,
    degree: usize,
    bound: f64,
}

#[derive(Debug, Serialize)]
struct ExpectationRow {
    entity: &'static str,
    node: usize,
    row: Option<usize>,
    column: Option<usize>,
    mean: f64,
    std_error: f64,
}

fn run_diversity(a: &DiversityArgs, out: &Path) -> Result<()> {
    let g = load(&a.data)?;
    let nw = nodewise_bound(&g)?;
    let c = g.features().context("diversity needs node features")?.cols();
    let degrees = g.loop_free_degrees();
    let bound = match &nw.rate {
        droplab_core::drop::DropRate::Nodewise(r) => r.clone(),
        droplab_core::drop::DropRate::Global(_) => unreachable!(),
    };
    let rows: Vec<BoundRow> = bound
        .iter()
        .enumerate()
        .map(|(node, &b)| BoundRow {
            node,
            degree: degrees[node],
            bound: b,
        })
        .collect();
    write_csv(&out.join("bound.csv"), &rows)?;

    let check = diversity_expectation_check(&g, c, &bound, a.trials, aux_seed(a.run.out.seed, "diversity-check", 0))?;
    let mut entities = Vec::new();
    for (j, (&m, &se)) in check.row_means.iter().zip(&check.row_std_errors).enumerate() {
        entities.push(ExpectationRow {
            entity: "row",
            node: check.row_sources[j],
            row: Some(j),
            column: None,
            mean: m,
            std_error: se,
        });
    }
    for (p, &u) in check.pair_nodes.iter().enumerate() {
        for l in 0..c {
            entities.push(ExpectationRow {
                entity: "pair",
                node: u,
                row: None,
                column: Some(l),
                mean: check.pair_means[p * c + l],
                std_error: check.pair_std_errors[p * c + l],
            });
        }
    }
    write_csv(&out.join("expectation.csv"), &entities)?;
    log::info!(
        "expectation check: {} entities below 1 - 3 s.e.",
        check.shortfalls(3.0).count()
    );

    let rows = diversity_study(&g, &a.model.template(a.layers), a.run.seeds, a.run.out.seed, a.run.out.jobs)?;
    write_csv(&out.join("diversity.csv"), &rows)
}
