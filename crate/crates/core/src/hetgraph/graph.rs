use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::OerType;
use crate::error::{Error, Result};

pub const VERTICES_FILE: &str = "vertices.tsv";
pub const EDGES_FILE: &str = "edges.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexType {
    Paper,
    Topic,
    Oer,
}

impl FromStr for VertexType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(VertexType::Paper),
            "topic" => Ok(VertexType::Topic),
            "oer" => Ok(VertexType::Oer),
            _ => Err(Error::InvalidMetaPath(format!("unknown vertex type `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VertexKind {
    Paper,
    Topic,
    Oer(OerType),
}

impl VertexKind {
    pub fn vertex_type(self) -> VertexType {
        match self {
            VertexKind::Paper => VertexType::Paper,
            VertexKind::Topic => VertexType::Topic,
            VertexKind::Oer(_) => VertexType::Oer,
        }
    }

    pub fn oer_type(self) -> Option<OerType> {
        match self {
            VertexKind::Oer(t) => Some(t),
            _ => None,
        }
    }
}

impl fmt::Display for VertexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexKind::Paper => f.write_str("paper"),
            VertexKind::Topic => f.write_str("topic"),
            VertexKind::Oer(t) => write!(f, "{t}"),
        }
    }
}

impl FromStr for VertexKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.to_ascii_lowercase();
        let s = s.strip_prefix("oer:").unwrap_or(&s);
        match s {
            "paper" => Ok(VertexKind::Paper),
            "topic" => Ok(VertexKind::Topic),
            other => other.parse().map(VertexKind::Oer),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeType {
    /// paper → topic
    About,
    /// topic → paper
    Covers,
    /// paper → OER
    Resource,
    /// topic → OER
    Related,
    /// paper → paper
    Cites,
}

impl EdgeType {
    pub const ALL: [EdgeType; 5] = [
        EdgeType::About,
        EdgeType::Covers,
        EdgeType::Resource,
        EdgeType::Related,
        EdgeType::Cites,
    ];

    pub fn endpoints(self) -> (VertexType, VertexType) {
        match self {
            EdgeType::About => (VertexType::Paper, VertexType::Topic),
            EdgeType::Covers => (VertexType::Topic, VertexType::Paper),
            EdgeType::Resource => (VertexType::Paper, VertexType::Oer),
            EdgeType::Related => (VertexType::Topic, VertexType::Oer),
            EdgeType::Cites => (VertexType::Paper, VertexType::Paper),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeType::About => "about",
            EdgeType::Covers => "covers",
            EdgeType::Resource => "resource",
            EdgeType::Related => "related",
            EdgeType::Cites => "cites",
        }
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        EdgeType::ALL
            .into_iter()
            .find(|e| e.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown edge type `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: String,
    pub kind: VertexKind,
    /// Title for papers and OERs, keyword label for topics.
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: String,
    pub edge_type: EdgeType,
    pub dst: String,
}

/// Typed paper/topic/OER graph. Vertices are stored in id order and adjacency
/// lists sorted by head id, so walks do not depend on insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct HetGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    index: HashMap<String, usize>,
    adjacency: HashMap<(usize, EdgeType), Vec<usize>>,
}

impl HetGraph {
    pub fn new(mut vertices: Vec<Vertex>, edges: Vec<Edge>) -> Result<Self> {
        vertices.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = vertices.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::DuplicateId {
                stream: VERTICES_FILE.into(),
                id: w[0].id.clone(),
            });
        }
        let index: HashMap<String, usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.clone(), i))
            .collect();
        let mut adjacency: HashMap<(usize, EdgeType), Vec<usize>> = HashMap::new();
        for e in &edges {
            let s = *index.get(&e.src).ok_or_else(|| Error::UnknownVertex(e.src.clone()))?;
            let d = *index.get(&e.dst).ok_or_else(|| Error::UnknownVertex(e.dst.clone()))?;
            let (st, dt) = e.edge_type.endpoints();
            if vertices[s].kind.vertex_type() != st || vertices[d].kind.vertex_type() != dt {
                return Err(Error::InvalidGraph(format!(
                    "edge {} -{}-> {} connects {} to {}",
                    e.src, e.edge_type, e.dst, vertices[s].kind, vertices[d].kind
                )));
            }
            adjacency.entry((s, e.edge_type)).or_default().push(d);
        }
        for heads in adjacency.values_mut() {
            heads.sort_unstable();
        }
        Ok(HetGraph {
            vertices,
            edges,
            index,
            adjacency,
        })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn vertex(&self, id: &str) -> Option<&Vertex> {
        self.index_of(id).map(|i| &self.vertices[i])
    }

    pub(crate) fn vertex_at(&self, i: usize) -> &Vertex {
        &self.vertices[i]
    }

    pub(crate) fn out(&self, v: usize, edge: EdgeType) -> &[usize] {
        self.adjacency.get(&(v, edge)).map_or(&[], Vec::as_slice)
    }

    pub fn count(&self, t: VertexType) -> usize {
        self.vertices.iter().filter(|v| v.kind.vertex_type() == t).count()
    }

    pub fn parse_tsv(vertices: &str, edges: &str) -> Result<Self> {
        let err = |stream: &str, line: usize, m: String| Error::Parse {
            stream: stream.into(),
            line,
            message: m,
        };
        let mut vs = Vec::new();
        for (i, l) in vertices.lines().enumerate() {
            if l.trim().is_empty() || l.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = l.splitn(3, '\t').collect();
            if cols.len() < 2 {
                return Err(err(VERTICES_FILE, i + 1, "expected id, type, payload".into()));
            }
            let kind = cols[1].parse().map_err(|m| err(VERTICES_FILE, i + 1, m))?;
            vs.push(Vertex {
                id: cols[0].to_string(),
                kind,
                payload: cols.get(2).unwrap_or(&"").to_string(),
            });
        }
        let mut es = Vec::new();
        for (i, l) in edges.lines().enumerate() {
            if l.trim().is_empty() || l.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = l.split('\t').collect();
            if cols.len() != 3 {
                return Err(err(EDGES_FILE, i + 1, "expected src, edge_type, dst".into()));
            }
            es.push(Edge {
                src: cols[0].to_string(),
                edge_type: cols[1].parse().map_err(|m| err(EDGES_FILE, i + 1, m))?,
                dst: cols[2].to_string(),
            });
        }
        HetGraph::new(vs, es)
    }

    pub fn vertices_tsv(&self) -> String {
        self.vertices
            .iter()
            .map(|v| format!("{}\t{}\t{}\n", v.id, v.kind, v.payload.replace(['\t', '\n'], " ")))
            .collect()
    }

    pub fn edges_tsv(&self) -> String {
        self.edges
            .iter()
            .map(|e| format!("{}\t{}\t{}\n", e.src, e.edge_type, e.dst))
            .collect()
    }
}
