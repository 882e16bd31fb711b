//! Linear rankers trained by coordinate ascent on a list-wise metric.
//!
//! Features are min-max normalized over the training candidates. Each restart
//! cycles over the weights in order and tries, for the current coordinate, the
//! values `w·s` and `−w·s` for every step `s` in [`STEP_GRID`] plus zero
//! (a zero weight is probed around `1/d`), keeping the best value when it lifts
//! the mean training metric by more than the tolerance. Weights are kept at
//! unit L1 norm. Ranking ties are broken by ascending OER id.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::{dcg, is_evaluable, Metric};
use crate::hetgraph::RankFeatureVector;

pub const STEP_GRID: [f64; 9] = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
pub const GLOBAL_TAG: &str = "global";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCandidate {
    pub oer_id: String,
    pub features: Vec<f64>,
    /// Gain (Good=2, OK=1, Bad=0).
    pub grade: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankQuery {
    pub query_id: String,
    pub reader_id: String,
    pub candidates: Vec<RankCandidate>,
}

impl RankQuery {
    fn trainable(&self) -> bool {
        self.candidates.len() >= 2 && is_evaluable(&self.grades())
    }

    pub fn grades(&self) -> Vec<u8> {
        self.candidates.iter().map(|c| c.grade).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingDataset {
    pub feature_names: Vec<String>,
    pub queries: Vec<RankQuery>,
}

impl RankingDataset {
    pub fn subset(&self, keep: impl Fn(&RankQuery) -> bool) -> RankingDataset {
        RankingDataset {
            feature_names: self.feature_names.clone(),
            queries: self.queries.iter().filter(|q| keep(q)).cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalization {
    fn fit<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> Self {
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for r in rows {
            for j in 0..dim {
                min[j] = min[j].min(r[j]);
                max[j] = max[j].max(r[j]);
            }
        }
        for j in 0..dim {
            if !min[j].is_finite() {
                min[j] = 0.0;
                max[j] = 0.0;
            }
        }
        Normalization { min, max }
    }

    /// Maps into [0, 1]; constant features map to 0.
    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .enumerate()
            .map(|(j, &x)| {
                let range = self.max[j] - self.min[j];
                if range > 0.0 {
                    ((x - self.min[j]) / range).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub metric: Metric,
    pub metric_value: f64,
    pub community: String,
    pub normalization: Normalization,
    pub training_queries: usize,
}

impl RankingModel {
    pub fn score(&self, raw: &[f64]) -> f64 {
        dot(&self.weights, &self.normalization.apply(raw))
    }
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Candidate order by descending score, then ascending id.
pub fn order_by_score(ids: &[&str], scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| ids[a].cmp(ids[b]))
    });
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub oer_id: String,
    pub score: f64,
}

pub fn rank(
    model: &RankingModel,
    feature_names: &[String],
    candidates: &[RankFeatureVector],
) -> Result<Vec<Ranked>> {
    if feature_names != model.feature_names.as_slice() {
        return Err(Error::FeatureMismatch {
            expected: model.feature_names.clone(),
            actual: feature_names.to_vec(),
        });
    }
    let scores: Vec<f64> = candidates.iter().map(|c| model.score(&c.values)).collect();
    let ids: Vec<&str> = candidates.iter().map(|c| c.oer_id.as_str()).collect();
    Ok(order_by_score(&ids, &scores)
        .into_iter()
        .map(|i| Ranked {
            oer_id: candidates[i].oer_id.clone(),
            score: scores[i],
        })
        .collect())
}

/// Gains of a query's candidates in the order `model` ranks them.
pub fn ranked_grades(model: &RankingModel, query: &RankQuery) -> Vec<u8> {
    let scores: Vec<f64> = query.candidates.iter().map(|c| model.score(&c.features)).collect();
    let ids: Vec<&str> = query.candidates.iter().map(|c| c.oer_id.as_str()).collect();
    order_by_score(&ids, &scores)
        .into_iter()
        .map(|i| query.candidates[i].grade)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoordinateAscentParams {
    pub restarts: usize,
    pub metric: Metric,
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for CoordinateAscentParams {
    fn default() -> Self {
        CoordinateAscentParams {
            restarts: 5,
            metric: Metric::Ndcg(Some(3)),
            tolerance: 1e-5,
            max_sweeps: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedStep {
    pub restart: usize,
    pub feature: usize,
    pub weight: f64,
    pub metric: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Starting metric of each restart.
    pub initial: Vec<f64>,
    pub accepted: Vec<AcceptedStep>,
    pub restart_metrics: Vec<f64>,
    pub best_restart: usize,
}

struct PreparedQuery {
    /// Position of each candidate in ascending id order, for tie-breaking.
    id_rank: Vec<usize>,
    grades: Vec<u8>,
    /// Ideal DCG when training on nDCG.
    ideal: Option<f64>,
    /// Normalized features, row per candidate.
    x: Vec<Vec<f64>>,
}

impl PreparedQuery {
    fn metric(&self, metric: Metric, ranked: &[u8]) -> f64 {
        match (metric, self.ideal) {
            (Metric::Ndcg(k), Some(ideal)) => dcg(ranked, k) / ideal,
            _ => metric.eval(ranked),
        }
    }
}

fn ranked_by(q: &PreparedQuery, scores: &[f64], order: &mut Vec<usize>, ranked: &mut Vec<u8>) {
    order.clear();
    order.extend(0..scores.len());
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| q.id_rank[a].cmp(&q.id_rank[b]))
    });
    ranked.clear();
    ranked.extend(order.iter().map(|&i| q.grades[i]));
}

/// Mean metric with candidate scores produced by `score(query, candidate)`.
fn mean_metric_with(
    queries: &[PreparedQuery],
    metric: Metric,
    mut score: impl FnMut(usize, usize) -> f64,
) -> f64 {
    let mut scores = Vec::new();
    let mut order = Vec::new();
    let mut ranked = Vec::new();
    let mut total = 0.0;
    for (qi, q) in queries.iter().enumerate() {
        scores.clear();
        scores.extend((0..q.x.len()).map(|c| score(qi, c)));
        ranked_by(q, &scores, &mut order, &mut ranked);
        total += q.metric(metric, &ranked);
    }
    total / queries.len() as f64
}

fn all_scores(queries: &[PreparedQuery], w: &[f64]) -> Vec<Vec<f64>> {
    queries
        .iter()
        .map(|q| q.x.iter().map(|x| dot(w, x)).collect())
        .collect()
}

fn l1_normalize(w: &mut [f64]) {
    let s: f64 = w.iter().map(|x| x.abs()).sum();
    if s > 0.0 {
        w.iter_mut().for_each(|x| *x /= s);
    }
}

fn ascend(
    prepared: &[PreparedQuery],
    params: &CoordinateAscentParams,
    restart: usize,
    mut w: Vec<f64>,
) -> (Vec<f64>, f64, f64, Vec<AcceptedStep>) {
    let dim = w.len();
    let mut scores = all_scores(prepared, &w);
    let mut current = mean_metric_with(prepared, params.metric, |q, c| scores[q][c]);
    let initial = current;
    let mut steps = Vec::new();
    for _ in 0..params.max_sweeps {
        let mut improved = false;
        for j in 0..dim {
            let original = w[j];
            let base = if original != 0.0 { original } else { 1.0 / dim as f64 };
            let l1_rest: f64 = w.iter().map(|x| x.abs()).sum::<f64>() - original.abs();
            let mut best: Option<(f64, f64)> = None;
            let trial_values = STEP_GRID
                .iter()
                .map(|s| base * s)
                .chain(STEP_GRID.iter().map(|s| -base * s))
                .chain(std::iter::once(0.0));
            for v in trial_values {
                if v == original {
                    continue;
                }
                let norm = l1_rest + v.abs();
                let scale = if norm > 0.0 { 1.0 / norm } else { 1.0 };
                let delta = v - original;
                let m = mean_metric_with(prepared, params.metric, |q, c| {
                    (scores[q][c] + delta * prepared[q].x[c][j]) * scale
                });
                if m > current + params.tolerance && best.is_none_or(|(bm, _)| m > bm) {
                    best = Some((m, v));
                }
            }
            if let Some((_, v)) = best {
                let mut trial = w.clone();
                trial[j] = v;
                l1_normalize(&mut trial);
                let trial_scores = all_scores(prepared, &trial);
                let m = mean_metric_with(prepared, params.metric, |q, c| trial_scores[q][c]);
                if m > current {
                    w = trial;
                    scores = trial_scores;
                    current = m;
                    steps.push(AcceptedStep {
                        restart,
                        feature: j,
                        weight: w[j],
                        metric: current,
                    });
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    (w, initial, current, steps)
}

/// Trains a linear ranker on the queries with at least two candidates and a positive gain.
pub fn coordinate_ascent_train(
    dataset: &RankingDataset,
    params: &CoordinateAscentParams,
    community: &str,
) -> Result<(RankingModel, TrainTrace)> {
    let dim = dataset.feature_names.len();
    if dim == 0 {
        return Err(Error::Untrainable("no features".into()));
    }
    if params.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let usable: Vec<&RankQuery> = dataset.queries.iter().filter(|q| q.trainable()).collect();
    if usable.is_empty() {
        return Err(Error::Untrainable(format!(
            "no query with two candidates and a positive gain ({} given)",
            dataset.queries.len()
        )));
    }
    for q in &usable {
        for c in &q.candidates {
            if c.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: c.features.len(),
                });
            }
            if let Some(col) = c.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: 0, col });
            }
        }
    }
    let normalization = Normalization::fit(
        usable
            .iter()
            .flat_map(|q| q.candidates.iter().map(|c| c.features.as_slice())),
        dim,
    );
    let prepared: Vec<PreparedQuery> = usable
        .iter()
        .map(|q| {
            let mut by_id: Vec<usize> = (0..q.candidates.len()).collect();
            by_id.sort_by(|&a, &b| q.candidates[a].oer_id.cmp(&q.candidates[b].oer_id));
            let mut id_rank = vec![0; by_id.len()];
            for (r, &i) in by_id.iter().enumerate() {
                id_rank[i] = r;
            }
            let grades = q.grades();
            let ideal = match params.metric {
                Metric::Ndcg(k) => {
                    let mut sorted = grades.clone();
                    sorted.sort_unstable_by(|a, b| b.cmp(a));
                    Some(dcg(&sorted, k))
                }
                _ => None,
            };
            PreparedQuery {
                id_rank,
                grades,
                ideal,
                x: q
                    .candidates
                    .iter()
                    .map(|c| normalization.apply(&c.features))
                    .collect(),
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let inits: Vec<Vec<f64>> = (0..params.restarts)
        .map(|r| {
            let mut w: Vec<f64> = if r == 0 {
                vec![1.0 / dim as f64; dim]
            } else {
                (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
            };
            l1_normalize(&mut w);
            w
        })
        .collect();

    let runs: Vec<(Vec<f64>, f64, f64, Vec<AcceptedStep>)> = inits
        .into_par_iter()
        .enumerate()
        .map(|(r, w)| ascend(&prepared, params, r, w))
        .collect();

    let mut trace = TrainTrace::default();
    let mut best = 0;
    for (r, (_, initial, metric, steps)) in runs.iter().enumerate() {
        trace.initial.push(*initial);
        trace.restart_metrics.push(*metric);
        trace.accepted.extend(steps.iter().cloned());
        if *metric > runs[best].2 {
            best = r;
        }
    }
    trace.best_restart = best;
    let (weights, _, metric_value, _) = runs.into_iter().nth(best).expect("restart");
    Ok((
        RankingModel {
            feature_names: dataset.feature_names.clone(),
            weights,
            metric: params.metric,
            metric_value,
            community: community.to_string(),
            normalization,
            training_queries: usable.len(),
        },
        trace,
    ))
}

pub fn community_tag(c: usize) -> String {
    format!("community:{c}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityRankerSet {
    pub models: BTreeMap<usize, RankingModel>,
    pub global: Option<RankingModel>,
    pub min_queries: usize,
    /// Communities that fell back to the global model.
    pub fallback: Vec<usize>,
}

impl CommunityRankerSet {
    pub fn has_own_model(&self, community: usize) -> bool {
        self.models.contains_key(&community)
    }

    /// The community's own model, else the global one.
    pub fn resolve(&self, community: Option<usize>) -> Result<&RankingModel> {
        community
            .and_then(|c| self.models.get(&c))
            .or(self.global.as_ref())
            .ok_or_else(|| {
                Error::NoModel(community.map_or_else(|| GLOBAL_TAG.to_string(), |c| c.to_string()))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankerParams {
    pub ca: CoordinateAscentParams,
    /// Minimum trainable queries for a community to get its own model.
    pub min_queries: usize,
}

impl Default for RankerParams {
    fn default() -> Self {
        RankerParams {
            ca: CoordinateAscentParams::default(),
            min_queries: 10,
        }
    }
}

/// Trains the global model on all queries and one model per community with
/// enough trainable queries.
pub fn train_communitized(
    dataset: &RankingDataset,
    assignment: &BTreeMap<String, usize>,
    params: &RankerParams,
) -> Result<CommunityRankerSet> {
    if dataset.queries.is_empty() {
        return Err(Error::Untrainable("no judged queries".into()));
    }
    let mut by_community: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for c in assignment.values() {
        by_community.entry(*c).or_default();
    }
    for (i, q) in dataset.queries.iter().enumerate() {
        let c = assignment
            .get(&q.reader_id)
            .ok_or_else(|| Error::UnknownReader(q.reader_id.clone()))?;
        by_community.entry(*c).or_default().push(i);
    }

    let (global, _) = coordinate_ascent_train(dataset, &params.ca, GLOBAL_TAG)?;

    let trained: Vec<(usize, Option<RankingModel>)> = by_community
        .into_par_iter()
        .map(|(c, idx)| {
            let sub = RankingDataset {
                feature_names: dataset.feature_names.clone(),
                queries: idx.iter().map(|&i| dataset.queries[i].clone()).collect(),
            };
            let n = sub.queries.iter().filter(|q| q.trainable()).count();
            if n < params.min_queries.max(1) {
                log::info!("community {c}: {n} trainable queries, using the global model");
                return (c, None);
            }
            match coordinate_ascent_train(&sub, &params.ca, &community_tag(c)) {
                Ok((m, _)) => (c, Some(m)),
                Err(e) => {
                    log::info!("community {c}: {e}; using the global model");
                    (c, None)
                }
            }
        })
        .collect();

    let mut set = CommunityRankerSet {
        models: BTreeMap::new(),
        global: Some(global),
        min_queries: params.min_queries,
        fallback: Vec::new(),
    };
    for (c, m) in trained {
        match m {
            Some(m) => {
                set.models.insert(c, m);
            }
            None => set.fallback.push(c),
        }
    }
    Ok(set)
}
