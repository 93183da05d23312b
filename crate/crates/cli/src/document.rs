//! Graph documents (TOML).
//!
//! ```toml
//! vertices = [0, 1, 2]                  # names: strings or integers; or { from = 0, to = 40 }
//! edges = [ { u = 0, v = 1, w = 1.0 } ] # each undirected edge once; w defaults to 1
//!
//! [ambient]                             # optional: G sits inside this graph
//! shape = "complete"                    # or "path" (unit edges in list order), or give `edges`
//! vertices = [0, 1, 2, 3]
//! removed = [[0, 1]]
//! frontier = []
//! kernel = "complete"                   # ambient heat kernel: "complete" or "integers"
//!
//! [positions]                           # optional: embedding in (0, length)
//! length = 1.0
//! at = [0.2, 0.5, 0.8]
//! ```
//!
//! With an ambient block the top-level `edges` are omitted: G is the induced
//! subgraph on the listed vertices minus the removed edges.

use std::collections::HashMap;
use std::fmt;

use heatpar_core::bessel::{Lattice, LatticeKernel};
use heatpar_core::embed1d::Normalization;
use heatpar_core::parametrix::{complete_graph_kernel, CompleteGraphKernel};
use heatpar_core::{SubgraphEmbedding, WeightedGraph};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Deserialize)]
#[serde(untagged)]
pub enum Name {
    Int(i64),
    Str(String),
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Name::Int(i) => write!(f, "{i}"),
            Name::Str(s) => f.write_str(s),
        }
    }
}

impl Name {
    fn as_int(&self) -> Option<i64> {
        match self {
            Name::Int(i) => Some(*i),
            Name::Str(s) => s.parse().ok(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum VertexSpec {
    List(Vec<Name>),
    Range { from: i64, to: i64 },
}

impl VertexSpec {
    fn names(&self) -> Result<Vec<Name>, CliError> {
        match self {
            VertexSpec::List(v) => Ok(v.clone()),
            VertexSpec::Range { from, to } if from <= to => Ok((*from..=*to).map(Name::Int).collect()),
            VertexSpec::Range { from, to } => Err(CliError::Input(format!("empty vertex range {from}..={to}"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeSpec {
    u: Name,
    v: Name,
    #[serde(default = "unit")]
    w: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Shape {
    Complete,
    Path,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmbientKernelKind {
    Complete,
    Integers,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AmbientSpec {
    vertices: VertexSpec,
    shape: Option<Shape>,
    edges: Option<Vec<EdgeSpec>>,
    #[serde(default)]
    removed: Vec<(Name, Name)>,
    #[serde(default)]
    frontier: Vec<Name>,
    kernel: AmbientKernelKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum NormalizationSpec {
    Symmetric,
    RowVolume,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PositionsSpec {
    #[serde(default = "unit")]
    length: f64,
    at: Vec<f64>,
    #[serde(default = "default_delta_fraction")]
    delta_fraction: f64,
    #[serde(default = "default_normalization")]
    normalization: NormalizationSpec,
}

fn default_delta_fraction() -> f64 {
    0.49
}

fn default_normalization() -> NormalizationSpec {
    NormalizationSpec::Symmetric
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    vertices: VertexSpec,
    edges: Option<Vec<EdgeSpec>>,
    ambient: Option<AmbientSpec>,
    positions: Option<PositionsSpec>,
}

#[derive(Debug, Clone)]
pub struct Positions {
    pub length: f64,
    pub at: Vec<f64>,
    pub delta_fraction: f64,
    pub normalization: Normalization,
}

#[derive(Debug, Clone)]
pub struct Ambient {
    pub embedding: SubgraphEmbedding,
    pub kind: AmbientKernelKind,
    names: Vec<Name>,
}

/// A parsed and validated document.
#[derive(Debug, Clone)]
pub struct GraphDocument {
    pub names: Vec<Name>,
    pub graph: WeightedGraph,
    pub ambient: Option<Ambient>,
    pub positions: Option<Positions>,
}

fn index_of(names: &[Name], what: &str) -> Result<HashMap<Name, usize>, CliError> {
    let mut map = HashMap::new();
    for (i, n) in names.iter().enumerate() {
        if map.insert(n.clone(), i).is_some() {
            return Err(CliError::Input(format!("{what} vertex {n} listed twice")));
        }
    }
    Ok(map)
}

fn lookup(map: &HashMap<Name, usize>, n: &Name, what: &str) -> Result<usize, CliError> {
    map.get(n).copied().ok_or_else(|| CliError::Input(format!("{what}: unknown vertex {n}")))
}

fn build_graph(names: &[Name], edges: &[EdgeSpec], what: &str) -> Result<WeightedGraph, CliError> {
    let map = index_of(names, what)?;
    let mut list = Vec::with_capacity(edges.len());
    for e in edges {
        list.push((lookup(&map, &e.u, what)?, lookup(&map, &e.v, what)?, e.w));
    }
    Ok(WeightedGraph::from_edges(names.len(), &list)?)
}

impl GraphDocument {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawDocument = toml::from_str(text).map_err(|e| CliError::Input(e.to_string().trim_end().to_string()))?;
        let names = raw.vertices.names()?;
        if names.is_empty() {
            return Err(CliError::Input("document has no vertices".into()));
        }
        index_of(&names, "graph")?;

        let (graph, ambient) = match raw.ambient {
            None => {
                let edges = raw.edges.unwrap_or_default();
                (build_graph(&names, &edges, "graph")?, None)
            }
            Some(amb) => {
                if raw.edges.is_some() {
                    return Err(CliError::Input(
                        "top-level edges must be omitted when an [ambient] block is given".into(),
                    ));
                }
                let amb_names = amb.vertices.names()?;
                let amb_map = index_of(&amb_names, "ambient")?;
                let ambient_graph = match (amb.shape, &amb.edges) {
                    (Some(_), Some(_)) => {
                        return Err(CliError::Input("ambient: give either `shape` or `edges`, not both".into()))
                    }
                    (None, None) => return Err(CliError::Input("ambient: `shape` or `edges` is required".into())),
                    (None, Some(edges)) => build_graph(&amb_names, edges, "ambient")?,
                    (Some(Shape::Complete), None) => WeightedGraph::complete(amb_names.len()),
                    (Some(Shape::Path), None) => WeightedGraph::path(amb_names.len()),
                };
                let kept = names.iter().map(|n| lookup(&amb_map, n, "ambient")).collect::<Result<Vec<_>, _>>()?;
                let removed = amb
                    .removed
                    .iter()
                    .map(|(u, v)| Ok((lookup(&amb_map, u, "removed")?, lookup(&amb_map, v, "removed")?)))
                    .collect::<Result<Vec<_>, CliError>>()?;
                let frontier = amb.frontier.iter().map(|n| lookup(&amb_map, n, "frontier")).collect::<Result<Vec<_>, _>>()?;
                let embedding = SubgraphEmbedding::new(ambient_graph, kept, removed, frontier)?;
                let a = Ambient { embedding, kind: amb.kernel, names: amb_names };
                a.validate_kind()?;
                (a.embedding.graph().clone(), Some(a))
            }
        };

        let positions = match raw.positions {
            None => None,
            Some(p) => {
                if p.at.len() != names.len() {
                    return Err(CliError::Input(format!(
                        "positions: {} entries for {} vertices",
                        p.at.len(),
                        names.len()
                    )));
                }
                Some(Positions {
                    length: p.length,
                    at: p.at,
                    delta_fraction: p.delta_fraction,
                    normalization: match p.normalization {
                        NormalizationSpec::Symmetric => Normalization::Symmetric,
                        NormalizationSpec::RowVolume => Normalization::RowVolume,
                    },
                })
            }
        };
        Ok(Self { names, graph, ambient, positions })
    }

    /// Nonnegative integer labels of the vertices (for half-line closed forms).
    pub fn halfline_labels(&self) -> Result<Vec<i64>, CliError> {
        self.names
            .iter()
            .map(|n| match n.as_int() {
                Some(i) if i >= 0 => Ok(i),
                _ => Err(CliError::Input(format!("half-line vertex names must be nonnegative integers, got {n}"))),
            })
            .collect()
    }
}

impl Ambient {
    fn validate_kind(&self) -> Result<(), CliError> {
        let g = self.embedding.ambient();
        match self.kind {
            AmbientKernelKind::Complete => {
                let n = g.n();
                let ok = (0..n).all(|x| (0..n).all(|y| g.weight(x, y) == if x == y { 0.0 } else { 1.0 }));
                if !ok {
                    return Err(CliError::Input("ambient kernel \"complete\" needs a unit-weight complete ambient graph".into()));
                }
            }
            AmbientKernelKind::Integers => {
                let labels = self.labels()?;
                let n = g.n();
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by_key(|&i| labels[i]);
                let consecutive = order.windows(2).all(|w| labels[w[1]] == labels[w[0]] + 1);
                let unit_path = (0..n).all(|x| {
                    (0..n).all(|y| g.weight(x, y) == if (labels[x] - labels[y]).abs() == 1 { 1.0 } else { 0.0 })
                });
                if !(consecutive && unit_path) {
                    return Err(CliError::Input(
                        "ambient kernel \"integers\" needs consecutive integer vertex names joined by unit edges".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn labels(&self) -> Result<Vec<i64>, CliError> {
        self.names
            .iter()
            .map(|n| n.as_int().ok_or_else(|| CliError::Input(format!("ambient vertex {n} is not an integer"))))
            .collect()
    }

    pub fn complete_kernel(&self) -> Result<CompleteGraphKernel, CliError> {
        Ok(complete_graph_kernel(self.embedding.ambient().n())?)
    }

    pub fn lattice_kernel(&self) -> Result<LatticeKernel, CliError> {
        Ok(LatticeKernel::new(self.labels()?, Lattice::Integers)?)
    }
}
