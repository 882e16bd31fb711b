//! Meta-path templates and exact random-walk propagation along them.
//!
//! The score of a terminal vertex is the total probability of all tours that
//! follow the template from the start set and end there. A walker picks the
//! next vertex uniformly among out-edges of the required type whose head passes
//! the step filter; a walker with no such edge is absorbed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::graph::{EdgeType, HetGraph, VertexType};
use crate::corpus::OerType;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub edge: EdgeType,
    pub to: VertexType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oer_type: Option<OerType>,
}

impl Step {
    pub fn new(edge: EdgeType, to: VertexType) -> Self {
        Step {
            edge,
            to,
            oer_type: None,
        }
    }

    pub fn oer(edge: EdgeType, oer_type: OerType) -> Self {
        Step {
            edge,
            to: VertexType::Oer,
            oer_type: Some(oer_type),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaPath {
    pub name: String,
    pub steps: Vec<Step>,
}

fn type_letter(t: VertexType) -> &'static str {
    match t {
        VertexType::Paper => "P",
        VertexType::Topic => "T",
        VertexType::Oer => "O",
    }
}

impl MetaPath {
    /// Builds and validates a path, naming it after its steps.
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        let mut name = steps
            .first()
            .map(|s| type_letter(s.edge.endpoints().0).to_string())
            .unwrap_or_default();
        for s in &steps {
            name.push_str(&format!("-{}-{}", s.edge, type_letter(s.to)));
            if let Some(t) = s.oer_type {
                name.push_str(&format!(":{t}"));
            }
        }
        let path = MetaPath { name, steps };
        path.validate()?;
        Ok(path)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Vertex type walks must start from; `None` for the empty path.
    pub fn source_type(&self) -> Option<VertexType> {
        self.steps.first().map(|s| s.edge.endpoints().0)
    }

    pub fn validate(&self) -> Result<()> {
        let mut current = self.source_type();
        for (i, s) in self.steps.iter().enumerate() {
            let (src, dst) = s.edge.endpoints();
            if Some(src) != current {
                return Err(Error::InvalidMetaPath(format!(
                    "{}: step {i} edge `{}` leaves {:?} but the walk is at {:?}",
                    self.name, s.edge, src, current
                )));
            }
            if dst != s.to {
                return Err(Error::InvalidMetaPath(format!(
                    "{}: step {i} edge `{}` reaches {:?}, not {:?}",
                    self.name, s.edge, dst, s.to
                )));
            }
            if s.oer_type.is_some() && s.to != VertexType::Oer {
                return Err(Error::InvalidMetaPath(format!(
                    "{}: step {i} has an OER type filter on a {:?} step",
                    self.name, s.to
                )));
            }
            current = Some(dst);
        }
        Ok(())
    }
}

/// The 12 default templates: P→T→O, P→O and P→T→P→O, each restricted to one OER type.
pub fn default_metapaths() -> Vec<MetaPath> {
    use EdgeType::*;
    use VertexType::*;
    let mut out = Vec::new();
    for t in OerType::ALL {
        out.push(MetaPath::new(vec![Step::new(About, Topic), Step::oer(Related, t)]).expect("valid"));
    }
    for t in OerType::ALL {
        out.push(MetaPath::new(vec![Step::oer(Resource, t)]).expect("valid"));
    }
    for t in OerType::ALL {
        out.push(
            MetaPath::new(vec![
                Step::new(About, Topic),
                Step::new(Covers, Paper),
                Step::oer(Resource, t),
            ])
            .expect("valid"),
        );
    }
    out
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MetaPathRecord {
    Steps(Vec<Step>),
    Named { name: String, steps: Vec<Step> },
}

/// Reads `metapaths.json`: a list of step arrays (or `{name, steps}` objects).
pub fn parse_metapaths(json: &str) -> Result<Vec<MetaPath>> {
    let records: Vec<MetaPathRecord> = serde_json::from_str(json)?;
    records
        .into_iter()
        .map(|r| match r {
            MetaPathRecord::Steps(steps) => MetaPath::new(steps),
            MetaPathRecord::Named { name, steps } => {
                let p = MetaPath { name, steps };
                p.validate()?;
                Ok(p)
            }
        })
        .collect()
}

pub fn metapaths_json(paths: &[MetaPath]) -> String {
    let steps: Vec<&Vec<Step>> = paths.iter().map(|p| &p.steps).collect();
    serde_json::to_string_pretty(&steps).expect("serializable")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WalkResult {
    /// Probability mass reaching each terminal vertex.
    pub scores: BTreeMap<String, f64>,
    /// Mass lost at vertices without a qualifying out-edge.
    pub absorbed: f64,
}

impl WalkResult {
    pub fn score(&self, id: &str) -> f64 {
        self.scores.get(id).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.scores.values().sum()
    }
}

fn passes(graph: &HetGraph, v: usize, step: &Step) -> bool {
    let kind = graph.vertex_at(v).kind;
    kind.vertex_type() == step.to && step.oer_type.is_none_or(|t| kind.oer_type() == Some(t))
}

/// Exact tour-probability propagation from `start` along `path`.
pub fn metapath_score(graph: &HetGraph, start: &[&str], path: &MetaPath) -> Result<WalkResult> {
    path.validate()?;
    let mut starts = Vec::new();
    for id in start {
        let v = graph
            .index_of(id)
            .ok_or_else(|| Error::UnknownVertex(id.to_string()))?;
        if let Some(t) = path.source_type() {
            let actual = graph.vertex_at(v).kind.vertex_type();
            if actual != t {
                return Err(Error::InvalidMetaPath(format!(
                    "{}: start vertex `{id}` is {actual:?}, path starts at {t:?}",
                    path.name
                )));
            }
        }
        starts.push(v);
    }
    starts.sort_unstable();
    starts.dedup();
    if starts.is_empty() {
        return Err(Error::InvalidArgument("meta-path walk needs a start vertex".into()));
    }

    let share = 1.0 / starts.len() as f64;
    let mut mass: BTreeMap<usize, f64> = starts.iter().map(|&v| (v, share)).collect();
    let mut absorbed = 0.0;
    let mut heads = Vec::new();
    for step in &path.steps {
        let mut next: BTreeMap<usize, f64> = BTreeMap::new();
        for (&v, &m) in &mass {
            heads.clear();
            heads.extend(
                graph
                    .out(v, step.edge)
                    .iter()
                    .copied()
                    .filter(|&h| passes(graph, h, step)),
            );
            if heads.is_empty() {
                absorbed += m;
                continue;
            }
            let split = m / heads.len() as f64;
            for &h in &heads {
                *next.entry(h).or_insert(0.0) += split;
            }
        }
        mass = next;
    }
    Ok(WalkResult {
        scores: mass
            .into_iter()
            .map(|(v, m)| (graph.vertex_at(v).id.clone(), m))
            .collect(),
        absorbed,
    })
}
