//! Command-line front end for `magc`: cluster, gen-sbm, eval, bench.
//!
//! Exit status: 0 success (for `cluster`, converged), 2 when `cluster`
//! stops at `max_iters`, 1 on error.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

pub mod bench;
pub mod cluster;
pub mod config;
pub mod evaluate;
pub mod generate;
pub mod report;

#[derive(Debug, Parser)]
#[command(name = "magc", version, about = "Attributed graph clustering by coarsening and modularity maximization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster a graph and write labels plus a JSON run report.
    Cluster(ClusterArgs),
    /// Generate an attributed degree-corrected SBM dataset.
    GenSbm(GenSbmArgs),
    /// Score predicted labels against ground truth and the graph.
    Eval(EvalArgs),
    /// Measure per-iteration time across graph sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ClusterArgs {
    /// Edge list: `u v [w]` per line.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Node features, one CSV row per node.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Ground-truth labels, one per line; enables evaluation.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Dataset name for the report.
    #[arg(long)]
    pub name: Option<String>,
    /// `auto` or `names`.
    #[arg(long)]
    pub node_ids: Option<String>,
    /// Minimum node count (keeps isolated trailing nodes).
    #[arg(long)]
    pub num_nodes: Option<usize>,
    /// Number of clusters; defaults to the number of label classes.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `backtracking` or `analytic-bound`.
    #[arg(long)]
    pub step_policy: Option<String>,
    #[arg(long)]
    pub backtracking_shrink: Option<f64>,
    /// `random-uniform` or `degree-seeded`.
    #[arg(long)]
    pub init: Option<String>,
    /// `row-wise` or `global-normalization`.
    #[arg(long)]
    pub projection: Option<String>,
    /// Weight grid, e.g. `alpha=1,10;beta=1e5,1e6;starts=2`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Directory for labels.txt and report.json; labels go to stdout if absent.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GenSbmArgs {
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated block sizes.
    #[arg(long)]
    pub block_sizes: Option<String>,
    /// Explicit block matrix, rows separated by `;`.
    #[arg(long)]
    pub block_matrix: Option<String>,
    /// Expected degree.
    #[arg(long)]
    pub degree: Option<f64>,
    /// Expected degree towards other blocks.
    #[arg(long)]
    pub sub_degree: Option<f64>,
    #[arg(long)]
    pub target_degree: Option<f64>,
    #[arg(long)]
    pub powerlaw_exponent: Option<f64>,
    #[arg(long)]
    pub theta_min: Option<f64>,
    #[arg(long)]
    pub theta_max: Option<f64>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub feature_groups: Option<usize>,
    #[arg(long)]
    pub class_sep: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Ground-truth labels.
    #[arg(long)]
    pub labels: PathBuf,
    /// Predicted labels.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub edges: PathBuf,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Comma-separated node counts.
    #[arg(long, default_value = "500,1000,2000")]
    pub sizes: String,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Feature dimension.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "backtracking")]
    pub step_policy: String,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// How a successful command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    MaxItersReached,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Done => 0,
            Outcome::MaxItersReached => 2,
        }
    }
}

fn write_json<T: serde::Serialize>(value: &T, out: Option<&PathBuf>) -> Result<()> {
    let json = serde_json::to_string_pretty(value).context("cli: serializing")? + "\n";
    match out {
        Some(path) => std::fs::write(path, json).with_context(|| format!("io: writing {}", path.display())),
        None => std::io::stdout()
            .write_all(json.as_bytes())
            .context("io: writing stdout"),
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Cluster(args) => {
            let settings = cluster::ClusterSettings::resolve(&args)?;
            let run = cluster::run_cluster(&settings)?;
            match &settings.out_dir {
                Some(dir) => cluster::write_outputs(&run, dir)?,
                None => std::io::stdout()
                    .write_all(magc::io::labels_to_string(&run.labels).as_bytes())
                    .context("io: writing stdout")?,
            }
            let r = &run.report;
            eprintln!(
                "cluster: {} iterations, converged={}, total={:.6e}, kkt={:.3e}{}",
                r.iterations,
                r.converged,
                r.final_loss.total,
                r.kkt_residual,
                r.evaluation
                    .as_ref()
                    .map(|e| format!(", nmi={:.4} ari={:.4} acc={:.4}", e.nmi, e.ari, e.acc))
                    .unwrap_or_default()
            );
            Ok(if r.converged {
                Outcome::Done
            } else {
                Outcome::MaxItersReached
            })
        }
        Command::GenSbm(args) => {
            let cfg = generate::resolve_sbm_config(&args)?;
            let dir = args
                .out_dir
                .clone()
                .ok_or_else(|| anyhow!("cli: --out-dir is required"))?;
            let gen = generate::generate(&cfg)?;
            let summary = generate::write_generated(&gen, &cfg, &dir)?;
            write_json(&summary, None)?;
            Ok(Outcome::Done)
        }
        Command::Eval(args) => {
            let evaluation = evaluate::run_eval(&args)?;
            write_json(&evaluation, args.out.as_ref())?;
            Ok(Outcome::Done)
        }
        Command::Bench(args) => {
            let settings = bench::BenchSettings {
                sizes: args
                    .sizes
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|e| anyhow!("cli: bad size {s:?}: {e}")))
                    .collect::<Result<_>>()?,
                k: args.k,
                feature_dim: args.n,
                iters: args.iters,
                repeats: args.repeats,
                seed: args.seed,
                step_policy: config::parse_enum(&args.step_policy, "step policy")?,
            };
            let report = bench::run_bench(&settings)?;
            print!("{}", bench::render_table(&report));
            if let Some(path) = &args.out {
                write_json(&report, Some(path))?;
            }
            Ok(Outcome::Done)
        }
    }
}
