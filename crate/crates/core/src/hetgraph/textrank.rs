//! Query-likelihood (Dirichlet smoothing) and BM25 scoring of OER bodies.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::OerItem;
use crate::text::TokenizerSettings;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextParams {
    pub mu: f64,
    pub k1: f64,
    pub b: f64,
}

impl Default for TextParams {
    fn default() -> Self {
        TextParams {
            mu: 2000.0,
            k1: 1.2,
            b: 0.75,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocStats {
    pub tf: HashMap<String, usize>,
    pub len: usize,
}

impl DocStats {
    pub fn from_tokens(tokens: &[String]) -> Self {
        let mut tf = HashMap::new();
        for t in tokens {
            *tf.entry(t.clone()).or_insert(0) += 1;
        }
        DocStats {
            tf,
            len: tokens.len(),
        }
    }

    pub fn tf(&self, term: &str) -> usize {
        self.tf.get(term).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CollectionStats {
    pub term_freq: HashMap<String, usize>,
    pub doc_freq: HashMap<String, usize>,
    pub total_len: usize,
    pub n_docs: usize,
}

impl CollectionStats {
    pub fn from_docs<'a>(docs: impl IntoIterator<Item = &'a DocStats>) -> Self {
        let mut c = CollectionStats::default();
        for d in docs {
            c.n_docs += 1;
            c.total_len += d.len;
            for (t, &n) in &d.tf {
                *c.term_freq.entry(t.clone()).or_insert(0) += n;
                *c.doc_freq.entry(t.clone()).or_insert(0) += 1;
            }
        }
        c
    }

    pub fn p_collection(&self, term: &str) -> f64 {
        if self.total_len == 0 {
            return 0.0;
        }
        self.term_freq.get(term).copied().unwrap_or(0) as f64 / self.total_len as f64
    }

    pub fn avg_len(&self) -> f64 {
        if self.n_docs == 0 {
            0.0
        } else {
            self.total_len as f64 / self.n_docs as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmScore {
    pub log_likelihood: f64,
    /// Query terms that contributed.
    pub used_terms: usize,
    /// Query terms skipped for having zero collection frequency.
    pub skipped_terms: usize,
    /// Set for an empty document scored with `mu = 0`.
    pub degenerate: bool,
}

/// `Σ_q log((tf(q,d) + μ·p(q|C)) / (|d| + μ))` over query terms seen in the collection.
pub fn lm_score(query: &[String], doc: &DocStats, mu: f64, coll: &CollectionStats) -> LmScore {
    let mut score = LmScore {
        log_likelihood: 0.0,
        used_terms: 0,
        skipped_terms: 0,
        degenerate: false,
    };
    let denom = doc.len as f64 + mu;
    for q in query {
        let pc = coll.p_collection(q);
        if pc == 0.0 {
            score.skipped_terms += 1;
            continue;
        }
        score.used_terms += 1;
        if denom == 0.0 {
            score.degenerate = true;
            score.log_likelihood = f64::NEG_INFINITY;
            continue;
        }
        score.log_likelihood += ((doc.tf(q) as f64 + mu * pc) / denom).ln();
    }
    score
}

/// BM25 with `idf = ln((N − df + 0.5)/(df + 0.5) + 1)`.
pub fn bm25_score(query: &[String], doc: &DocStats, k1: f64, b: f64, coll: &CollectionStats) -> f64 {
    let avg = coll.avg_len();
    let norm = if avg > 0.0 {
        1.0 - b + b * doc.len as f64 / avg
    } else {
        1.0
    };
    let n = coll.n_docs as f64;
    query
        .iter()
        .map(|q| {
            let tf = doc.tf(q) as f64;
            if tf == 0.0 {
                return 0.0;
            }
            let df = coll.doc_freq.get(q.as_str()).copied().unwrap_or(0) as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            idf * tf * (k1 + 1.0) / (tf + k1 * norm)
        })
        .sum()
}

/// Tokenized OER bodies with collection statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TextIndex {
    pub docs: BTreeMap<String, DocStats>,
    pub collection: CollectionStats,
    pub tokenizer: TokenizerSettings,
}

impl TextIndex {
    pub fn build(oers: &[OerItem], tokenizer: &TokenizerSettings) -> Self {
        let docs: BTreeMap<String, DocStats> = oers
            .iter()
            .map(|o| (o.oer_id.clone(), DocStats::from_tokens(&tokenizer.tokenize(&o.body))))
            .collect();
        let collection = CollectionStats::from_docs(docs.values());
        TextIndex {
            docs,
            collection,
            tokenizer: tokenizer.clone(),
        }
    }
}
