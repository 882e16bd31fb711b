//! Heterogeneous paper/topic/OER graph and per-candidate ranking features.
//!
//! A candidate's feature vector holds one walk probability per meta-path, a
//! query-likelihood score, a BM25 score and four OER-type indicators.

pub mod graph;
pub mod metapath;
pub mod textrank;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::OerType;
use crate::error::{Error, Result};

pub use graph::{Edge, EdgeType, HetGraph, Vertex, VertexKind, VertexType, EDGES_FILE, VERTICES_FILE};
pub use metapath::{default_metapaths, metapath_score, parse_metapaths, MetaPath, Step, WalkResult};
pub use textrank::{bm25_score, lm_score, CollectionStats, DocStats, LmScore, TextIndex, TextParams};

pub const LM_FEATURE: &str = "lm";
pub const BM25_FEATURE: &str = "bm25";

pub fn type_feature(t: OerType) -> String {
    format!("type:{t}")
}

/// Feature order shared by every vector extracted with `metapaths`.
pub fn feature_names(metapaths: &[MetaPath]) -> Vec<String> {
    let mut names: Vec<String> = metapaths.iter().map(|m| format!("walk:{}", m.name)).collect();
    names.push(LM_FEATURE.into());
    names.push(BM25_FEATURE.into());
    names.extend(OerType::ALL.iter().map(|&t| type_feature(t)));
    names
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryContext {
    pub paper_id: String,
    pub quote_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankFeatureVector {
    pub oer_id: String,
    pub values: Vec<f64>,
}

/// Start set of a query: its paper plus every topic whose label shares a term with the quote.
pub fn start_vertices(graph: &HetGraph, ctx: &QueryContext, index: &TextIndex) -> Result<Vec<String>> {
    match graph.vertex(&ctx.paper_id) {
        Some(v) if v.kind == VertexKind::Paper => {}
        _ => return Err(Error::UnknownPaper(ctx.paper_id.clone())),
    }
    let quote: BTreeSet<String> = index.tokenizer.tokenize(&ctx.quote_text).into_iter().collect();
    let mut starts = vec![ctx.paper_id.clone()];
    for v in graph.vertices() {
        if v.kind == VertexKind::Topic
            && index
                .tokenizer
                .tokenize(&v.payload)
                .iter()
                .any(|t| quote.contains(t))
        {
            starts.push(v.id.clone());
        }
    }
    Ok(starts)
}

/// Per-candidate features for one query.
///
/// Each meta-path walks from the members of the start set whose type matches
/// its first step; the `lm` feature is the geometric-mean term likelihood
/// `exp(log_likelihood / used_terms)`, and 0 for a body that matches no query term.
pub fn extract_rank_features(
    graph: &HetGraph,
    index: &TextIndex,
    ctx: &QueryContext,
    candidates: &[String],
    metapaths: &[MetaPath],
    params: &TextParams,
) -> Result<Vec<RankFeatureVector>> {
    let starts = start_vertices(graph, ctx, index)?;
    let mut walks = Vec::with_capacity(metapaths.len());
    for mp in metapaths {
        let compatible: Vec<&str> = starts
            .iter()
            .filter(|s| {
                mp.source_type().is_none_or(|t| {
                    graph.vertex(s).is_some_and(|v| v.kind.vertex_type() == t)
                })
            })
            .map(String::as_str)
            .collect();
        walks.push(if compatible.is_empty() {
            WalkResult::default()
        } else {
            metapath_score(graph, &compatible, mp)?
        });
    }

    let query = index.tokenizer.tokenize(&ctx.quote_text);
    let empty = DocStats::default();
    let mut out = Vec::with_capacity(candidates.len());
    for c in candidates {
        let v = graph.vertex(c).ok_or_else(|| Error::UnknownVertex(c.clone()))?;
        let oer_type = v
            .kind
            .oer_type()
            .ok_or_else(|| Error::InvalidArgument(format!("candidate `{c}` is not an OER")))?;
        let mut values: Vec<f64> = walks.iter().map(|w| w.score(c)).collect();
        let doc = index.docs.get(c).unwrap_or(&empty);
        let lm = lm_score(&query, doc, params.mu, &index.collection);
        let matched = query.iter().any(|q| doc.tf(q) > 0);
        values.push(if matched && lm.used_terms > 0 && lm.log_likelihood.is_finite() {
            (lm.log_likelihood / lm.used_terms as f64).exp()
        } else {
            0.0
        });
        values.push(bm25_score(&query, doc, params.k1, params.b, &index.collection));
        values.extend(OerType::ALL.iter().map(|&t| if t == oer_type { 1.0 } else { 0.0 }));
        out.push(RankFeatureVector {
            oer_id: c.clone(),
            values,
        });
    }
    Ok(out)
}
