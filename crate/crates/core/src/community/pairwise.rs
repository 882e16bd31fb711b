use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairwiseScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub same_community_pairs: usize,
    pub reply_pairs: usize,
    pub matched_pairs: usize,
}

/// Compares same-community reader pairs with pairs that exchanged replies.
///
/// Empty denominators yield 0. Self-pairs are ignored and pair order does not matter.
pub fn pairwise_cluster_eval(
    assignment: &BTreeMap<String, usize>,
    reply_pairs: &BTreeSet<(String, String)>,
) -> Result<PairwiseScores> {
    let mut truth = BTreeSet::new();
    for (a, b) in reply_pairs {
        for r in [a, b] {
            if !assignment.contains_key(r) {
                return Err(Error::UnknownReader(r.clone()));
            }
        }
        if a != b {
            truth.insert(if a < b { (a, b) } else { (b, a) });
        }
    }

    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in assignment.values() {
        *sizes.entry(c).or_default() += 1;
    }
    let same: usize = sizes.values().map(|&s| s * s.saturating_sub(1) / 2).sum();
    let matched = truth
        .iter()
        .filter(|(a, b)| assignment[*a] == assignment[*b])
        .count();

    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(matched, same);
    let recall = ratio(matched, truth.len());
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(PairwiseScores {
        precision,
        recall,
        f1,
        same_community_pairs: same,
        reply_pairs: truth.len(),
        matched_pairs: matched,
    })
}
