//! `gen-sbm`: sample an attributed DC-SBM graph and write it in the
//! formats `cluster` reads.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use magc::io;
use magc::sbm::{self, BlockSpec, GeneratedSbm};
use magc::SbmConfig;
use serde::Serialize;

use crate::config::{pick, render, ConfigFile};
use crate::GenSbmArgs;

pub const GEN_KEYS: &[&str] = &[
    "p",
    "k",
    "block_sizes",
    "block_matrix",
    "degree",
    "sub_degree",
    "target_degree",
    "powerlaw_exponent",
    "theta_min",
    "theta_max",
    "feature_dim",
    "feature_groups",
    "class_sep",
    "seed",
    "out_dir",
];

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|v| v.trim().parse::<T>().map_err(|e| anyhow!("cli: bad {what} entry {v:?}: {e}")))
        .collect()
}

/// Rows separated by `;`, entries by `,`.
fn parse_block_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';')
        .map(str::trim)
        .filter(|r| !r.is_empty())
        .map(|r| parse_list(r, "block matrix"))
        .collect()
}

fn render_list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Merges flags over a config file over [`SbmConfig::default`].
///
/// Without an explicit target degree, the expected degree of the degree-built
/// block matrix (or the default target for an explicit matrix) is used.
pub fn resolve_sbm_config(args: &GenSbmArgs) -> Result<SbmConfig> {
    let file = match &args.config {
        Some(path) => {
            let file = ConfigFile::load(path)?;
            file.reject_unknown(GEN_KEYS)?;
            file
        }
        None => ConfigFile::default(),
    };
    let d = SbmConfig::default();
    let (default_degree, default_sub) = match d.blocks {
        BlockSpec::Degrees {
            expected_degree,
            sub_degree,
        } => (expected_degree, sub_degree),
        BlockSpec::Matrix(_) => (d.target_degree, 0.0),
    };
    let text = |flag: &Option<String>, key: &str| flag.clone().or_else(|| file.raw(key).map(str::to_string));
    let degree = pick(args.degree, &file, "degree")?;
    let blocks = match text(&args.block_matrix, "block_matrix") {
        Some(m) => BlockSpec::Matrix(parse_block_matrix(&m)?),
        None => BlockSpec::Degrees {
            expected_degree: degree.unwrap_or(default_degree),
            sub_degree: pick(args.sub_degree, &file, "sub_degree")?.unwrap_or(default_sub),
        },
    };
    let target_degree = match pick(args.target_degree, &file, "target_degree")? {
        Some(t) => t,
        None => match &blocks {
            BlockSpec::Degrees { expected_degree, .. } => *expected_degree,
            BlockSpec::Matrix(_) => degree.unwrap_or(d.target_degree),
        },
    };
    let cfg = SbmConfig {
        p: pick(args.p, &file, "p")?.unwrap_or(d.p),
        k: pick(args.k, &file, "k")?.unwrap_or(d.k),
        block_sizes: text(&args.block_sizes, "block_sizes")
            .map(|s| parse_list(&s, "block size"))
            .transpose()?,
        blocks,
        target_degree,
        powerlaw_exponent: pick(args.powerlaw_exponent, &file, "powerlaw_exponent")?.unwrap_or(d.powerlaw_exponent),
        theta_min: pick(args.theta_min, &file, "theta_min")?.unwrap_or(d.theta_min),
        theta_max: pick(args.theta_max, &file, "theta_max")?.unwrap_or(d.theta_max),
        feature_dim: pick(args.feature_dim, &file, "feature_dim")?.unwrap_or(d.feature_dim),
        feature_groups: pick(args.feature_groups, &file, "feature_groups")?.or(d.feature_groups),
        class_sep: pick(args.class_sep, &file, "class_sep")?.unwrap_or(d.class_sep),
        seed: pick(args.seed, &file, "seed")?.unwrap_or(d.seed),
    };
    cfg.validate().context("sbm")?;
    Ok(cfg)
}

/// The configuration as a config file `gen-sbm --config` accepts.
pub fn config_to_text(cfg: &SbmConfig) -> String {
    let mut pairs: Vec<(&str, String)> = vec![("p", cfg.p.to_string()), ("k", cfg.k.to_string())];
    if let Some(sizes) = &cfg.block_sizes {
        pairs.push(("block_sizes", render_list(sizes)));
    }
    match &cfg.blocks {
        BlockSpec::Degrees {
            expected_degree,
            sub_degree,
        } => {
            pairs.push(("degree", expected_degree.to_string()));
            pairs.push(("sub_degree", sub_degree.to_string()));
        }
        BlockSpec::Matrix(rows) => {
            let m = rows.iter().map(|r| render_list(r)).collect::<Vec<_>>().join(";");
            pairs.push(("block_matrix", m));
        }
    }
    pairs.extend([
        ("target_degree", cfg.target_degree.to_string()),
        ("powerlaw_exponent", cfg.powerlaw_exponent.to_string()),
        ("theta_min", cfg.theta_min.to_string()),
        ("theta_max", cfg.theta_max.to_string()),
        ("feature_dim", cfg.feature_dim.to_string()),
    ]);
    if let Some(g) = cfg.feature_groups {
        pairs.push(("feature_groups", g.to_string()));
    }
    pairs.push(("class_sep", cfg.class_sep.to_string()));
    pairs.push(("seed", cfg.seed.to_string()));
    render(&pairs)
}

#[derive(Debug, Clone, Serialize)]
pub struct GenSummary {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub realized_mean_degree: f64,
    pub expected_mean_degree: f64,
    pub scale: f64,
}

pub fn generate(cfg: &SbmConfig) -> Result<GeneratedSbm> {
    sbm::generate(cfg).context("sbm")
}

/// Writes `graph.edges`, `features.csv`, `labels.txt`,
/// `feature_groups.txt` and `sbm.conf`.
pub fn write_generated(gen: &GeneratedSbm, cfg: &SbmConfig, out_dir: &Path) -> Result<GenSummary> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("io: creating {}", out_dir.display()))?;
    let graph = &gen.graph;
    io::write_edge_list(out_dir.join("graph.edges"), graph.adjacency()).context("io")?;
    let x = graph.features().ok_or_else(|| anyhow!("sbm: generated graph has no features"))?;
    io::write_features_csv(out_dir.join("features.csv"), x).context("io")?;
    let labels = graph.labels().ok_or_else(|| anyhow!("sbm: generated graph has no labels"))?;
    io::write_labels(out_dir.join("labels.txt"), labels).context("io")?;
    io::write_labels(out_dir.join("feature_groups.txt"), &gen.feature_groups).context("io")?;
    let conf = out_dir.join("sbm.conf");
    std::fs::write(&conf, config_to_text(cfg)).with_context(|| format!("io: writing {}", conf.display()))?;
    Ok(GenSummary {
        num_nodes: graph.num_nodes(),
        num_edges: graph.num_edges(),
        realized_mean_degree: gen.realized_mean_degree,
        expected_mean_degree: gen.model.expected_mean_degree(),
        scale: gen.model.scale,
    })
}
