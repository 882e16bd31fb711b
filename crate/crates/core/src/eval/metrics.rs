//! Graded ranking metrics over lists of gains (Good=2, OK=1, Bad=0).
//!
//! nDCG uses the gain itself (linear gain) with a `log2(rank + 1)` discount.
//! MAP and MRR treat a grade of at least 1 as relevant. AP@k divides by
//! `min(total relevant, k)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RELEVANT_GRADE: u8 = 1;

fn cut(len: usize, k: Option<usize>) -> usize {
    k.map_or(len, |k| k.min(len))
}

pub fn dcg(grades: &[u8], k: Option<usize>) -> f64 {
    grades[..cut(grades.len(), k)]
        .iter()
        .enumerate()
        .map(|(i, &g)| g as f64 / ((i + 2) as f64).log2())
        .sum()
}

/// `None` when the ideal DCG is zero (the query is skipped).
pub fn ndcg_at_k(grades: &[u8], k: Option<usize>) -> Option<f64> {
    let mut ideal = grades.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(&ideal, k);
    if idcg == 0.0 {
        return None;
    }
    Some(dcg(grades, k) / idcg)
}

pub fn average_precision(grades: &[u8], k: Option<usize>) -> f64 {
    let total_relevant = grades.iter().filter(|&&g| g >= RELEVANT_GRADE).count();
    let n = cut(grades.len(), k);
    let denom = k.map_or(total_relevant, |k| total_relevant.min(k));
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0;
    let mut sum = 0.0;
    for (i, &g) in grades[..n].iter().enumerate() {
        if g >= RELEVANT_GRADE {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / denom as f64
}

pub fn reciprocal_rank(grades: &[u8]) -> f64 {
    grades
        .iter()
        .position(|&g| g >= RELEVANT_GRADE)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// A query counts toward metric means only if some candidate has positive gain.
pub fn is_evaluable(grades: &[u8]) -> bool {
    grades.iter().any(|&g| g > 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Ndcg(Option<usize>),
    Map(Option<usize>),
    Mrr,
}

impl Metric {
    pub const REPORTED: [Metric; 7] = [
        Metric::Map(Some(3)),
        Metric::Map(Some(5)),
        Metric::Map(None),
        Metric::Ndcg(Some(3)),
        Metric::Ndcg(Some(5)),
        Metric::Ndcg(None),
        Metric::Mrr,
    ];

    /// Value for a ranked list; 0 for an unevaluable nDCG.
    pub fn eval(self, grades: &[u8]) -> f64 {
        match self {
            Metric::Ndcg(k) => ndcg_at_k(grades, k).unwrap_or(0.0),
            Metric::Map(k) => average_precision(grades, k),
            Metric::Mrr => reciprocal_rank(grades),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = |k: &Option<usize>| k.map_or("all".to_string(), |k| k.to_string());
        match self {
            Metric::Ndcg(k) => write!(f, "ndcg@{}", at(k)),
            Metric::Map(k) => write!(f, "map@{}", at(k)),
            Metric::Mrr => f.write_str("mrr"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        if s == "mrr" {
            return Ok(Metric::Mrr);
        }
        let bad = || Error::InvalidArgument(format!("unknown metric `{s}`"));
        let (name, k) = s.split_once('@').ok_or_else(bad)?;
        let k = match k {
            "all" => None,
            n => match n.parse::<usize>() {
                Ok(k) if k >= 1 => Some(k),
                _ => return Err(bad()),
            },
        };
        match name {
            "ndcg" => Ok(Metric::Ndcg(k)),
            "map" => Ok(Metric::Map(k)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}
