//! Tokenization and vocabularies shared by the behavior features and text ranking.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

const STOPWORDS: &[&str] = &[
    "a", "about", "an", "and", "are", "as", "at", "be", "but", "by", "can", "do", "for", "from",
    "has", "have", "how", "if", "in", "into", "is", "it", "its", "not", "of", "on", "or", "so",
    "than", "that", "the", "their", "then", "there", "these", "this", "to", "was", "we", "were",
    "what", "when", "which", "who", "why", "will", "with", "you",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerSettings {
    pub lowercase: bool,
    pub min_token_len: usize,
    pub use_stopwords: bool,
    pub min_doc_freq: usize,
}

impl Default for TokenizerSettings {
    fn default() -> Self {
        TokenizerSettings {
            lowercase: true,
            min_token_len: 2,
            use_stopwords: true,
            min_doc_freq: 1,
        }
    }
}

impl TokenizerSettings {
    /// Splits on non-alphanumeric characters and drops short tokens and stopwords.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| {
                if self.lowercase {
                    t.to_lowercase()
                } else {
                    t.to_string()
                }
            })
            .filter(|t| t.chars().count() >= self.min_token_len)
            .filter(|t| !(self.use_stopwords && STOPWORDS.contains(&t.as_str())))
            .collect()
    }
}

/// Term counts of a token sequence.
pub fn term_counts(tokens: &[String]) -> BTreeMap<&str, usize> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    counts
}

/// Sorted term list with document frequencies. Term indices are dense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub terms: Vec<String>,
    pub doc_freq: Vec<usize>,
    pub settings: TokenizerSettings,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary where each item of `docs` counts as one document.
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a str>, settings: &TokenizerSettings) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            let tokens = settings.tokenize(doc);
            for term in term_counts(&tokens).keys() {
                *df.entry(term.to_string()).or_insert(0) += 1;
            }
        }
        let (terms, doc_freq): (Vec<String>, Vec<usize>) = df
            .into_iter()
            .filter(|(_, f)| *f >= settings.min_doc_freq)
            .unzip();
        let mut vocab = Vocabulary {
            terms,
            doc_freq,
            settings: settings.clone(),
            index: HashMap::new(),
        };
        vocab.reindex();
        vocab
    }

    fn reindex(&mut self) {
        self.index = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        if self.index.len() != self.terms.len() {
            // deserialized without index
            return self.terms.iter().position(|t| t == term);
        }
        self.index.get(term).copied()
    }

    /// Adds the term frequencies of `text` into `row` (length `self.len()`).
    pub fn accumulate_tf(&self, text: &str, row: &mut [f64]) {
        for token in self.settings.tokenize(text) {
            if let Some(i) = self.index_of(&token) {
                row[i] += 1.0;
            }
        }
    }
}
