//! End-to-end experiment: features, communities, ranking dataset, cross-validation,
//! the missing-profile simulation and clustering quality against reply exchanges.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::{kmedoids, pairwise_cluster_eval, two_step, Distance, PairwiseScores, TwoStepSettings};
use crate::corpus::Corpus;
use crate::error::Result;
use crate::eval::{cross_validate_ranking, simulate_missing_rpf, CvReport, CvSettings, MissingRpfReport, MissingRpfSettings};
use crate::features::{build_feature_matrix, combine_groups, parse_group_set, unit_weights, FeatureMatrix, FeatureSettings};
use crate::hetgraph::{default_metapaths, extract_rank_features, feature_names, HetGraph, MetaPath, QueryContext, TextIndex, TextParams};
use crate::ranker::{RankCandidate, RankQuery, RankerParams, RankingDataset};
use crate::seed;
use crate::text::TokenizerSettings;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub queries: usize,
    pub judgments: usize,
    pub not_sure_dropped: usize,
}

/// Ranking features for every judged query; `NotSure` judgments are dropped.
pub fn build_rank_dataset(
    corpus: &Corpus,
    graph: &HetGraph,
    metapaths: &[MetaPath],
    text: &TextParams,
    tokenizer: &TokenizerSettings,
) -> Result<(RankingDataset, DatasetStats)> {
    let index = TextIndex::build(corpus.oers(), tokenizer);
    let queries: Vec<RankQuery> = corpus
        .queries()
        .par_iter()
        .map(|q| {
            let graded: Vec<(String, u8)> = q
                .judgments
                .iter()
                .filter_map(|j| j.grade.gain().map(|g| (j.oer_id.clone(), g)))
                .collect();
            let ids: Vec<String> = graded.iter().map(|(o, _)| o.clone()).collect();
            let ctx = QueryContext {
                paper_id: q.paper_id.clone(),
                quote_text: q.quote_text.clone(),
            };
            let vectors = extract_rank_features(graph, &index, &ctx, &ids, metapaths, text)?;
            Ok(RankQuery {
                query_id: q.query_id.clone(),
                reader_id: q.reader_id.clone(),
                candidates: vectors
                    .into_iter()
                    .zip(graded)
                    .map(|(v, (_, g))| RankCandidate {
                        oer_id: v.oer_id,
                        features: v.values,
                        grade: g,
                    })
                    .collect(),
            })
        })
        .collect::<Result<_>>()?;
    let total: usize = corpus.queries().iter().map(|q| q.judgments.len()).sum();
    let kept: usize = queries.iter().map(|q| q.candidates.len()).sum();
    Ok((
        RankingDataset {
            feature_names: feature_names(metapaths),
            queries,
        },
        DatasetStats {
            queries: corpus.queries().len(),
            judgments: kept,
            not_sure_dropped: total - kept,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollaborationRow {
    pub features: String,
    pub clustered_readers: usize,
    pub scores: PairwiseScores,
}

/// Clusters readers on each named group set and scores the clusters against reply pairs.
///
/// Sets with profile groups only cluster readers that have a profile; reply
/// pairs are restricted to the clustered readers.
pub fn physical_collaboration(
    fm: &FeatureMatrix,
    reply_pairs: &BTreeSet<(String, String)>,
    sets: &[String],
    k: usize,
    distance: Distance,
    seed: u64,
) -> Result<Vec<CollaborationRow>> {
    sets.iter()
        .map(|name| {
            let groups = parse_group_set(name)?;
            let u = combine_groups(fm, &unit_weights(&groups))?;
            let keep: Vec<usize> = (0..u.reader_ids.len())
                .filter(|&i| !groups.iter().any(|g| g.is_rpf()) || fm.has_rpf[i])
                .collect();
            let ids: Vec<String> = keep.iter().map(|&i| u.reader_ids[i].clone()).collect();
            let vecs: Vec<Vec<f64>> = keep.iter().map(|&i| u.vectors[i].clone()).collect();
            let model = kmedoids(&ids, &vecs, k, distance, seed)?;
            let pairs: BTreeSet<(String, String)> = reply_pairs
                .iter()
                .filter(|(a, b)| model.assignment.contains_key(a) && model.assignment.contains_key(b))
                .cloned()
                .collect();
            Ok(CollaborationRow {
                features: name.clone(),
                clustered_readers: ids.len(),
                scores: pairwise_cluster_eval(&model.assignment, &pairs)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSettings {
    pub features: FeatureSettings,
    pub communities: TwoStepSettings,
    pub text: TextParams,
    /// Meta-path templates; the default set when absent.
    pub metapaths: Option<Vec<MetaPath>>,
    pub ranker: RankerParams,
    pub folds: usize,
    pub missing_fraction: f64,
    pub missing_folds: usize,
    pub collaboration_sets: Vec<String>,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            features: FeatureSettings::default(),
            communities: TwoStepSettings::default(),
            text: TextParams::default(),
            metapaths: None,
            ranker: RankerParams::default(),
            folds: 10,
            missing_fraction: 0.25,
            missing_folds: 4,
            collaboration_sets: ["RPF-C", "RPF-TB", "RPF-all", "RBF"].iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ExperimentSettings {
    pub fn metapaths(&self) -> Vec<MetaPath> {
        self.metapaths.clone().unwrap_or_else(default_metapaths)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunitySummary {
    pub k: usize,
    pub medoids: Vec<String>,
    pub cost: f64,
    pub sizes: BTreeMap<usize, usize>,
    pub predicted_readers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub dataset: DatasetStats,
    pub feature_names: Vec<String>,
    pub communities: CommunitySummary,
    pub collaboration: Vec<CollaborationRow>,
    pub cross_validation: CvReport,
    /// Absent when some reader has no profile.
    pub missing_rpf: Option<MissingRpfReport>,
}

/// Intermediate results of an experiment, for callers that need more than the report.
pub struct ExperimentArtifacts {
    pub features: FeatureMatrix,
    pub dataset: RankingDataset,
    pub assignment: BTreeMap<String, usize>,
    pub report: ExperimentReport,
}

pub fn run_experiment(
    corpus: &Corpus,
    graph: &HetGraph,
    settings: &ExperimentSettings,
    seed: u64,
) -> Result<ExperimentArtifacts> {
    let (fm, _) = build_feature_matrix(corpus, &settings.features, seed::derive(seed, "features"))?;
    let metapaths = settings.metapaths();
    let (dataset, stats) = build_rank_dataset(corpus, graph, &metapaths, &settings.text, &settings.features.tokenizer)?;

    let communities = two_step(&fm, &settings.communities, seed::derive(seed, "cluster"))?;
    let assignment = communities.assignment.labels();
    let mut sizes = BTreeMap::new();
    for &c in assignment.values() {
        *sizes.entry(c).or_insert(0) += 1;
    }

    let collaboration = physical_collaboration(
        &fm,
        &corpus.reply_pairs(),
        &settings.collaboration_sets,
        settings.communities.k,
        settings.communities.distance,
        seed::derive(seed, "collaboration"),
    )?;

    let mut ranker = settings.ranker.clone();
    ranker.ca.seed = seed::derive(seed, "ranker");
    let cv_settings = CvSettings {
        folds: settings.folds,
        seed: seed::derive(seed, "cv"),
        ranker: ranker.clone(),
        ..Default::default()
    };
    let cv = cross_validate_ranking(&dataset, &assignment, &cv_settings)?;

    let missing_rpf = if fm.has_rpf.iter().all(|&h| h) && !fm.reader_ids.is_empty() {
        let ms = MissingRpfSettings {
            fraction: settings.missing_fraction,
            folds: settings.missing_folds,
            seed: seed::derive(seed, "missing-rpf"),
            two_step: settings.communities.clone(),
            cv: cv_settings.clone(),
        };
        Some(simulate_missing_rpf(&fm, &dataset, &ms)?)
    } else {
        log::info!("some readers have no profile; skipping the missing-profile simulation");
        None
    };

    let report = ExperimentReport {
        seed,
        dataset: stats,
        feature_names: dataset.feature_names.clone(),
        communities: CommunitySummary {
            k: communities.clustering.k,
            medoids: communities.clustering.medoids.clone(),
            cost: communities.clustering.cost,
            sizes,
            predicted_readers: communities
                .assignment
                .entries
                .values()
                .filter(|(_, s)| *s == crate::community::AssignmentSource::Predicted)
                .count(),
        },
        collaboration,
        cross_validation: cv,
        missing_rpf,
    };
    Ok(ExperimentArtifacts {
        features: fm,
        dataset,
        assignment,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{generate_corpus, SimConfig};

    #[test]
    fn not_sure_judgments_are_dropped() {
        let out = generate_corpus(&SimConfig {
            readers: 9,
            queries_per_reader: 3,
            not_sure_rate: 0.5,
            seed: 2,
            ..Default::default()
        })
        .unwrap();
        let (ds, stats) = build_rank_dataset(
            &out.corpus,
            &out.graph,
            &default_metapaths(),
            &TextParams::default(),
            &TokenizerSettings::default(),
        )
        .unwrap();
        assert!(stats.not_sure_dropped > 0);
        assert_eq!(ds.queries.len(), 27);
        assert_eq!(ds.feature_names.len(), 18);
        for q in &ds.queries {
            for c in &q.candidates {
                assert!(c.features.iter().all(|v| v.is_finite()));
            }
        }
    }
}
