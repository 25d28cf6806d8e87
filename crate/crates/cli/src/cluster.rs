//! `cluster`: load a dataset, solve (optionally over a weight grid), write
//! labels and a run report.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use magc::io::{self, DatasetBundle, EdgeListOptions, NodeIds};
use magc::solver::{self, InitStrategy, ProjectionMode, StepPolicy};
use magc::{build_derived, evaluate, AttributedGraph, DerivedMatrices, SolveOutcome, SolverConfig};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::{enum_name, parse_enum, pick, ConfigFile};
use crate::report::{DatasetEcho, GridCandidate, GridReport, RunReport, REPORT_FORMAT};
use crate::ClusterArgs;

/// Keys accepted in a `cluster` config file.
pub const CLUSTER_KEYS: &[&str] = &[
    "edges",
    "features",
    "labels",
    "name",
    "node_ids",
    "num_nodes",
    "k",
    "alpha",
    "beta",
    "gamma",
    "lambda",
    "max_iters",
    "rel_tol",
    "seed",
    "step_policy",
    "backtracking_shrink",
    "init",
    "projection",
    "grid",
    "out_dir",
];

/// Fully resolved `cluster` settings. `k = None` means "number of distinct
/// ground-truth labels".
#[derive(Debug, Clone)]
pub struct ClusterSettings {
    pub edges: PathBuf,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub name: String,
    pub edge_options: EdgeListOptions,
    pub k: Option<usize>,
    pub solver: SolverConfig,
    pub grid: Option<GridSpec>,
    pub out_dir: Option<PathBuf>,
}

fn config_path(file: &ConfigFile, base: &Path, key: &str) -> Option<PathBuf> {
    file.raw(key).map(|v| base.join(v))
}

impl ClusterSettings {
    /// Merges flags over the config file over library defaults.
    /// Paths inside a config file are relative to the file's directory.
    pub fn resolve(args: &ClusterArgs) -> Result<Self> {
        let (file, base) = match &args.config {
            Some(path) => {
                let file = ConfigFile::load(path)?;
                file.reject_unknown(CLUSTER_KEYS)?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (file, base)
            }
            None => (ConfigFile::default(), PathBuf::new()),
        };
        let path_of = |flag: &Option<PathBuf>, key: &str| flag.clone().or_else(|| config_path(&file, &base, key));
        let edges = path_of(&args.edges, "edges").ok_or_else(|| anyhow!("cli: --edges is required"))?;
        let defaults = SolverConfig::default();
        let mut solver = SolverConfig {
            alpha: pick(args.alpha, &file, "alpha")?.unwrap_or(defaults.alpha),
            beta: pick(args.beta, &file, "beta")?.unwrap_or(defaults.beta),
            gamma: pick(args.gamma, &file, "gamma")?.unwrap_or(defaults.gamma),
            lambda: pick(args.lambda, &file, "lambda")?.unwrap_or(defaults.lambda),
            max_iters: pick(args.max_iters, &file, "max_iters")?.unwrap_or(defaults.max_iters),
            rel_tol: pick(args.rel_tol, &file, "rel_tol")?.unwrap_or(defaults.rel_tol),
            seed: pick(args.seed, &file, "seed")?.unwrap_or(defaults.seed),
            backtracking_shrink: pick(args.backtracking_shrink, &file, "backtracking_shrink")?
                .unwrap_or(defaults.backtracking_shrink),
            ..defaults
        };
        let text = |flag: &Option<String>, key: &str| flag.clone().or_else(|| file.raw(key).map(str::to_string));
        if let Some(v) = text(&args.step_policy, "step_policy") {
            solver.step_policy = parse_enum::<StepPolicy>(&v, "step policy")?;
        }
        if let Some(v) = text(&args.init, "init") {
            solver.init = parse_enum::<InitStrategy>(&v, "init strategy")?;
        }
        if let Some(v) = text(&args.projection, "projection") {
            solver.projection = parse_enum::<ProjectionMode>(&v, "projection mode")?;
        }
        let node_ids = match text(&args.node_ids, "node_ids") {
            Some(v) => parse_enum::<NodeIds>(&v, "node id mode")?,
            None => NodeIds::Auto,
        };
        let grid = text(&args.grid, "grid").map(|g| GridSpec::parse(&g)).transpose()?;
        let name = text(&args.name, "name").unwrap_or_else(|| {
            edges
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "graph".into())
        });
        Ok(Self {
            features: path_of(&args.features, "features"),
            labels: path_of(&args.labels, "labels"),
            out_dir: path_of(&args.out_dir, "out_dir"),
            edge_options: EdgeListOptions {
                node_ids,
                num_nodes: pick(args.num_nodes, &file, "num_nodes")?,
            },
            k: pick(args.k, &file, "k")?,
            edges,
            name,
            solver,
            grid,
        })
    }
}

/// Weight grid: `alpha=1,10;beta=1e5,1e6;gamma=1;lambda=0;starts=3`.
/// Omitted weights keep the base value; `starts` defaults to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub starts: usize,
    pub source: String,
}

/// One concrete run in a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub config: SolverConfig,
    pub start: usize,
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = GridSpec {
            alpha: None,
            beta: None,
            gamma: None,
            lambda: None,
            starts: 1,
            source: text.trim().to_string(),
        };
        for part in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, values) = part
                .split_once('=')
                .ok_or_else(|| anyhow!("grid: expected `name=v1,v2` in {part:?}"))?;
            let key = key.trim();
            if key == "starts" {
                spec.starts = values
                    .trim()
                    .parse()
                    .map_err(|e| anyhow!("grid: bad starts {values:?}: {e}"))?;
                if spec.starts == 0 {
                    bail!("grid: starts must be positive");
                }
                continue;
            }
            let list = values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| anyhow!("grid: bad {key} value {v:?}: {e}"))
                })
                .collect::<Result<Vec<f64>>>()?;
            if list.is_empty() {
                bail!("grid: empty list for {key}");
            }
            let slot = match key {
                "alpha" => &mut spec.alpha,
                "beta" => &mut spec.beta,
                "gamma" => &mut spec.gamma,
                "lambda" => &mut spec.lambda,
                other => bail!("grid: unknown parameter {other:?}"),
            };
            if slot.replace(list).is_some() {
                bail!("grid: {key} given twice");
            }
        }
        Ok(spec)
    }

    /// Cartesian product in alpha, beta, gamma, lambda, start order.
    /// Start 0 uses the base init and seed; start `s > 0` uses a random
    /// uniform init seeded with `seed + s`.
    pub fn points(&self, base: &SolverConfig) -> Vec<GridPoint> {
        let or_base = |v: &Option<Vec<f64>>, b: f64| v.clone().unwrap_or_else(|| vec![b]);
        let mut out = Vec::new();
        for &alpha in &or_base(&self.alpha, base.alpha) {
            for &beta in &or_base(&self.beta, base.beta) {
                for &gamma in &or_base(&self.gamma, base.gamma) {
                    for &lambda in &or_base(&self.lambda, base.lambda) {
                        for start in 0..self.starts {
                            let mut config = SolverConfig {
                                alpha,
                                beta,
                                gamma,
                                lambda,
                                ..base.clone()
                            };
                            if start > 0 {
                                config.init = InitStrategy::RandomUniform;
                                config.seed = base.seed.wrapping_add(start as u64);
                            }
                            out.push(GridPoint { config, start });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Worker count from `MAGC_THREADS`; `None` means the rayon default.
pub fn thread_limit() -> Result<Option<usize>> {
    match std::env::var("MAGC_THREADS") {
        Ok(v) if !v.trim().is_empty() => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|e| anyhow!("cli: bad MAGC_THREADS {v:?}: {e}"))?;
            Ok((n > 0).then_some(n))
        }
        _ => Ok(None),
    }
}

fn pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit()? {
        builder = builder.num_threads(n);
    }
    builder.build().context("cli: building thread pool")
}

fn run_point(graph: &AttributedGraph, derived: &DerivedMatrices, config: &SolverConfig) -> Result<SolveOutcome> {
    let x = graph.features().ok_or_else(|| anyhow!("solver: graph has no features"))?;
    config.validate(graph.num_nodes()).context("solver")?;
    let c0 = solver::initial_assignment(graph, config);
    solver::solve_with(derived, x, config, c0).context("solver")
}

/// Result of a grid search: every candidate plus the chosen outcome.
pub struct GridResult {
    pub candidates: Vec<GridCandidate>,
    pub selected: usize,
    pub outcome: SolveOutcome,
    pub config: SolverConfig,
}

/// Runs every grid point in parallel and picks the lowest final objective.
/// The result does not depend on the thread count.
pub fn run_grid(graph: &AttributedGraph, spec: &GridSpec, base: &SolverConfig) -> Result<GridResult> {
    let derived = build_derived(graph).context("graph")?;
    let points = spec.points(base);
    let outcomes: Vec<Result<SolveOutcome>> =
        pool()?.install(|| points.par_iter().map(|pt| run_point(graph, &derived, &pt.config)).collect());
    let mut best: Option<(usize, f64)> = None;
    let mut candidates = Vec::with_capacity(points.len());
    for (index, (pt, res)) in points.iter().zip(&outcomes).enumerate() {
        let mut cand = GridCandidate {
            index,
            alpha: pt.config.alpha,
            beta: pt.config.beta,
            gamma: pt.config.gamma,
            lambda: pt.config.lambda,
            start: pt.start,
            seed: pt.config.seed,
            init: enum_name(&pt.config.init),
            final_total: None,
            iterations: None,
            converged: None,
            error: None,
        };
        match res {
            Ok(out) => {
                let total = out.state.loss_trace.last().map_or(f64::NAN, |r| r.loss.total);
                cand.final_total = Some(total);
                cand.iterations = Some(out.state.t);
                cand.converged = Some(out.converged);
                if total.is_finite() && best.is_none_or(|(_, b)| total < b) {
                    best = Some((index, total));
                }
            }
            Err(e) => cand.error = Some(format!("{e:#}")),
        }
        candidates.push(cand);
    }
    let (selected, _) = best.ok_or_else(|| {
        let first = candidates.iter().find_map(|c| c.error.clone()).unwrap_or_default();
        anyhow!("solver: no grid point produced a finite objective ({first})")
    })?;
    let outcome = outcomes
        .into_iter()
        .nth(selected)
        .expect("selected index in range")
        .expect("selected run succeeded");
    Ok(GridResult {
        candidates,
        selected,
        outcome,
        config: points[selected].config.clone(),
    })
}

/// Everything `cluster` produces, before it is written to disk.
pub struct ClusterRun {
    pub report: RunReport,
    pub labels: Vec<usize>,
    pub node_names: Option<Vec<String>>,
}

/// Loads the dataset, substituting degree one-hot features when none are given.
pub fn load_dataset(settings: &ClusterSettings) -> Result<(DatasetBundle, bool)> {
    let mut bundle = DatasetBundle::load(
        settings.name.clone(),
        &settings.edges,
        settings.features.as_deref(),
        settings.labels.as_deref(),
        &settings.edge_options,
    )
    .context("io")?;
    let substituted = bundle.graph.features().is_none();
    if substituted {
        log::info!("no features given; using degree one-hot features");
        let x: DMatrix<f64> = io::degree_onehot(&bundle.graph);
        bundle.graph = bundle.graph.with_features(x).context("graph")?;
    }
    Ok((bundle, substituted))
}

pub fn run_cluster(settings: &ClusterSettings) -> Result<ClusterRun> {
    let started = Instant::now();
    let (bundle, substituted) = load_dataset(settings)?;
    let graph = &bundle.graph;
    let k = match (settings.k, graph.labels()) {
        (Some(k), _) => k,
        (None, Some(y)) => y.iter().copied().max().map_or(1, |m| m + 1),
        (None, None) => bail!("cli: --k is required when no labels are given"),
    };
    let base = SolverConfig {
        k,
        ..settings.solver.clone()
    };
    let (outcome, config, grid) = match &settings.grid {
        Some(spec) => {
            let res = run_grid(graph, spec, &base)?;
            let report = GridReport {
                expression: spec.source.clone(),
                selection: "min-objective".into(),
                selected: res.selected,
                candidates: res.candidates,
            };
            (res.outcome, res.config, Some(report))
        }
        None => {
            let derived = build_derived(graph).context("graph")?;
            (run_point(graph, &derived, &base)?, base, None)
        }
    };
    let evaluation = graph
        .labels()
        .map(|y| evaluate(graph, y, &outcome.labels))
        .transpose()
        .context("metrics")?;
    let final_loss = outcome
        .state
        .loss_trace
        .last()
        .map(|r| r.loss)
        .ok_or_else(|| anyhow!("solver: empty loss trace"))?;
    let report = RunReport {
        format: REPORT_FORMAT.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        dataset: DatasetEcho {
            name: bundle.name.clone(),
            edges: settings.edges.clone(),
            features: settings.features.clone(),
            labels: settings.labels.clone(),
            num_nodes: graph.num_nodes(),
            num_edges: graph.num_edges(),
            feature_dim: graph.features().map_or(0, |x| x.ncols()),
            feature_source: if substituted { "degree-onehot" } else { "file" }.into(),
        },
        seed: config.seed,
        iterations: outcome.state.t,
        converged: outcome.converged,
        final_loss,
        kkt_residual: outcome.kkt_residual,
        wall_time_secs: started.elapsed().as_secs_f64(),
        evaluation,
        grid,
        loss_trace: outcome.state.loss_trace.clone(),
        config,
    };
    Ok(ClusterRun {
        report,
        labels: outcome.labels,
        node_names: bundle.node_names,
    })
}

/// Writes `labels.txt`, `report.json` and, for named nodes, `nodes.txt`.
pub fn write_outputs(run: &ClusterRun, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("io: creating {}", out_dir.display()))?;
    io::write_labels(out_dir.join("labels.txt"), &run.labels).context("io")?;
    if let Some(names) = &run.node_names {
        io::write_node_names(out_dir.join("nodes.txt"), names).context("io")?;
    }
    let json = serde_json::to_string_pretty(&run.report).context("cli: serializing report")?;
    let path = out_dir.join("report.json");
    std::fs::write(&path, json + "\n").with_context(|| format!("io: writing {}", path.display()))?;
    Ok(())
}
