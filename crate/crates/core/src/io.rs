//! Plain-text dataset formats.
//!
//! Edge lists: one `u v` or `u v w` per line, tokens split on whitespace or
//! commas, `#` starts a comment. Each line adds an undirected edge; repeated
//! pairs have their weights summed. Features: numeric CSV with an optional
//! header row. Labels: one integer per line.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AttributedGraph, GraphError, SparseMatrix};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: line {line}: self-loop on node {node}")]
    SelfLoop { path: String, line: usize, node: String },
    #[error("{path}: line {line}: negative weight {weight}")]
    NegativeWeight { path: String, line: usize, weight: f64 },
    #[error("{what}: expected {expected} rows, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl IoError {
    /// Line number for parse-level failures.
    pub fn line(&self) -> Option<usize> {
        match self {
            IoError::Parse { line, .. } | IoError::SelfLoop { line, .. } | IoError::NegativeWeight { line, .. } => {
                Some(*line)
            }
            _ => None,
        }
    }
}

/// How node tokens in an edge list are turned into indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeIds {
    /// Integer tokens are used as indices; any non-integer token switches
    /// the whole file to first-seen mapping.
    #[default]
    Auto,
    /// Every token is an opaque name, mapped in first-seen order.
    Names,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeListOptions {
    pub node_ids: NodeIds,
    /// Minimum node count; isolated trailing nodes are kept.
    pub num_nodes: Option<usize>,
}

/// Parsed edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub adjacency: SparseMatrix,
    /// Original token for each dense index, when names were mapped.
    pub node_names: Option<Vec<String>>,
}

pub fn load_edge_list(path: impl AsRef<Path>, options: &EdgeListOptions) -> Result<EdgeList, IoError> {
    let path = path.as_ref();
    let text = read(path)?;
    parse_edge_list(&text, &path.display().to_string(), options)
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("")
}

/// Parses edge-list text; `origin` labels error messages.
///
/// A `# nodes: N` comment sets a minimum node count.
pub fn parse_edge_list(text: &str, origin: &str, options: &EdgeListOptions) -> Result<EdgeList, IoError> {
    let parse_err = |line: usize, message: String| IoError::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut declared = options.num_nodes;
    let mut raw = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if let Some(n) = line
            .trim()
            .strip_prefix('#')
            .and_then(|c| c.trim().strip_prefix("nodes:"))
        {
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad node count {:?}", n.trim())))?;
            declared = Some(declared.map_or(n, |d| d.max(n)));
            continue;
        }
        let fields: Vec<&str> = tokens(strip_comment(line)).collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 2 && fields.len() != 3 {
            return Err(parse_err(
                lineno,
                format!("expected 2 or 3 fields, found {}", fields.len()),
            ));
        }
        let weight = match fields.get(2) {
            Some(w) => w
                .parse::<f64>()
                .ok()
                .filter(|w| w.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("bad weight {w:?}")))?,
            None => 1.0,
        };
        if weight < 0.0 {
            return Err(IoError::NegativeWeight {
                path: origin.to_string(),
                line: lineno,
                weight,
            });
        }
        if fields[0] == fields[1] {
            return Err(IoError::SelfLoop {
                path: origin.to_string(),
                line: lineno,
                node: fields[0].to_string(),
            });
        }
        raw.push((lineno, fields[0].to_string(), fields[1].to_string(), weight));
    }

    let numeric = options.node_ids == NodeIds::Auto
        && raw
            .iter()
            .all(|(_, u, v, _)| u.parse::<usize>().is_ok() && v.parse::<usize>().is_ok());

    let mut triplets = Vec::with_capacity(raw.len() * 2);
    let mut names: Vec<String> = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut max_index = 0usize;
    for (lineno, u, v, w) in raw {
        let (a, b) = if numeric {
            (u.parse::<usize>().unwrap(), v.parse::<usize>().unwrap())
        } else {
            let mut id = |name: String| {
                let next = ids.len();
                *ids.entry(name.clone()).or_insert_with(|| {
                    names.push(name);
                    next
                })
            };
            (id(u), id(v))
        };
        if a == b {
            return Err(IoError::SelfLoop {
                path: origin.to_string(),
                line: lineno,
                node: a.to_string(),
            });
        }
        max_index = max_index.max(a + 1).max(b + 1);
        triplets.push((a, b, w));
        triplets.push((b, a, w));
    }
    let p = if numeric { max_index } else { names.len() };
    let p = declared.map_or(p, |d| d.max(p));
    let adjacency = SparseMatrix::from_triplets(p, triplets)?;
    Ok(EdgeList {
        adjacency,
        node_names: (!numeric).then_some(names),
    })
}

/// Loads a numeric CSV; a first row that does not parse as numbers is a header.
pub fn load_features_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>, IoError> {
    let path = path.as_ref();
    parse_features_csv(&read(path)?, &path.display().to_string())
}

pub fn parse_features_csv(text: &str, origin: &str) -> Result<DMatrix<f64>, IoError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut first = true;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                if let Some(width) = rows.first().map(Vec::len) {
                    if row.len() != width {
                        return Err(IoError::Parse {
                            path: origin.to_string(),
                            line: idx + 1,
                            message: format!("expected {width} columns, found {}", row.len()),
                        });
                    }
                }
                rows.push(row);
            }
            Err(_) if first => {}
            Err(e) => {
                return Err(IoError::Parse {
                    path: origin.to_string(),
                    line: idx + 1,
                    message: e.to_string(),
                })
            }
        }
        first = false;
    }
    let n = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>, IoError> {
    let path = path.as_ref();
    parse_labels(&read(path)?, &path.display().to_string())
}

pub fn parse_labels(text: &str, origin: &str) -> Result<Vec<usize>, IoError> {
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = strip_comment(line).trim();
        if line.is_empty() {
            continue;
        }
        labels.push(line.parse::<usize>().map_err(|e| IoError::Parse {
            path: origin.to_string(),
            line: idx + 1,
            message: format!("bad label {line:?}: {e}"),
        })?);
    }
    Ok(labels)
}

/// One-hot encoding of each node's (rounded) degree; columns in ascending degree.
pub fn degree_onehot(graph: &AttributedGraph) -> DMatrix<f64> {
    let degrees: Vec<i64> = graph.degrees().iter().map(|d| d.round() as i64).collect();
    let columns: BTreeMap<i64, usize> = {
        let mut distinct: Vec<i64> = degrees.clone();
        distinct.sort_unstable();
        distinct.dedup();
        distinct.into_iter().enumerate().map(|(c, d)| (d, c)).collect()
    };
    let mut x = DMatrix::zeros(degrees.len(), columns.len());
    for (i, d) in degrees.iter().enumerate() {
        x[(i, columns[d])] = 1.0;
    }
    x
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SourcePaths {
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

/// A graph together with where it came from.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub graph: AttributedGraph,
    pub name: String,
    pub source_paths: SourcePaths,
    pub node_names: Option<Vec<String>>,
}

impl DatasetBundle {
    /// Loads the edge list and optional feature and label files, checking
    /// that their row counts match the node count.
    pub fn load(
        name: impl Into<String>,
        edges: impl AsRef<Path>,
        features: Option<&Path>,
        labels: Option<&Path>,
        options: &EdgeListOptions,
    ) -> Result<Self, IoError> {
        let edges = edges.as_ref();
        let list = load_edge_list(edges, options)?;
        let mut p = list.adjacency.dim();
        let x = features.map(load_features_csv).transpose()?;
        let y = labels.map(load_labels).transpose()?;
        // trailing isolated nodes are known only from the other files
        let implied = x.as_ref().map(|m| m.nrows()).into_iter().chain(y.as_ref().map(Vec::len));
        if list.node_names.is_none() {
            for rows in implied {
                if rows > p {
                    p = rows;
                }
            }
        }
        let adjacency = if p > list.adjacency.dim() {
            SparseMatrix::from_triplets(p, list.adjacency.iter().collect::<Vec<_>>())?
        } else {
            list.adjacency
        };
        if let Some(x) = &x {
            if x.nrows() != p {
                return Err(IoError::DimensionMismatch {
                    what: "features",
                    expected: p,
                    found: x.nrows(),
                });
            }
        }
        if let Some(y) = &y {
            if y.len() != p {
                return Err(IoError::DimensionMismatch {
                    what: "labels",
                    expected: p,
                    found: y.len(),
                });
            }
        }
        Ok(Self {
            graph: AttributedGraph::new(adjacency, x, y)?,
            name: name.into(),
            source_paths: SourcePaths {
                edges: Some(edges.to_path_buf()),
                features: features.map(Path::to_path_buf),
                labels: labels.map(Path::to_path_buf),
            },
            node_names: list.node_names,
        })
    }
}

/// C-style `%.12g`.
pub fn format_g12(x: f64) -> String {
    const PRECISION: i32 = 12;
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= PRECISION {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PRECISION - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

/// `%.12g` when that reads back to the same value, otherwise the shortest
/// representation that does. Deterministic, so output stays byte-stable.
pub fn format_weight(x: f64) -> String {
    let short = format_g12(x);
    if short.parse::<f64>().ok() == Some(x) {
        short
    } else {
        format!("{x:?}")
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Canonical edge list: `# nodes: p` header, then `u v w` with `u < v`, sorted.
/// Reloading the text gives back the identical adjacency.
pub fn edge_list_to_string(adjacency: &SparseMatrix) -> String {
    let mut out = format!("# nodes: {}\n", adjacency.dim());
    for (u, v, w) in adjacency.iter() {
        if u < v {
            let _ = writeln!(out, "{u} {v} {}", format_weight(w));
        }
    }
    out
}

pub fn features_to_csv(x: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..x.nrows() {
        let row: Vec<String> = x.row(i).iter().map(|&v| format_weight(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn labels_to_string(labels: &[usize]) -> String {
    let mut out = String::with_capacity(labels.len() * 2);
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    out
}

pub fn write_edge_list(path: impl AsRef<Path>, adjacency: &SparseMatrix) -> Result<(), IoError> {
    write(path.as_ref(), &edge_list_to_string(adjacency))
}

pub fn write_features_csv(path: impl AsRef<Path>, x: &DMatrix<f64>) -> Result<(), IoError> {
    write(path.as_ref(), &features_to_csv(x))
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<(), IoError> {
    write(path.as_ref(), &labels_to_string(labels))
}

/// Writes `index name` pairs for a first-seen node mapping.
pub fn write_node_names(path: impl AsRef<Path>, names: &[String]) -> Result<(), IoError> {
    let mut out = String::new();
    for (i, name) in names.iter().enumerate() {
        let _ = writeln!(out, "{i} {name}");
    }
    write(path.as_ref(), &out)
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })
}
