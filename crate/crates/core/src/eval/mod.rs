//! Ranking evaluation: metric reports, stratified k-fold cross-validation of
//! communitized vs global rankers, the missing-profile simulation and a paired
//! sign test.

pub mod metrics;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::community::{
    assign_communities, cluster_profiled, two_step, train_community_classifier, CommunityModel, TwoStepSettings,
};
use crate::error::{Error, Result};
use crate::features::{combine_groups, FeatureMatrix};
use crate::ranker::{ranked_grades, train_communitized, RankQuery, RankerParams, RankingDataset};
use crate::seed;

pub use metrics::{average_precision, dcg, is_evaluable, ndcg_at_k, reciprocal_rank, Metric, RELEVANT_GRADE};

pub type MetricValues = BTreeMap<Metric, f64>;

/// All reported metrics for one ranked list; `None` when no candidate has positive gain.
pub fn evaluate_grades(grades: &[u8]) -> Option<MetricValues> {
    is_evaluable(grades).then(|| Metric::REPORTED.iter().map(|&m| (m, m.eval(grades))).collect())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub evaluated: usize,
    pub skipped: usize,
    pub means: MetricValues,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Means over evaluated queries pooled across folds.
    pub means: MetricValues,
    pub evaluated: usize,
    pub skipped: usize,
    pub total: usize,
    pub folds: Vec<FoldMetrics>,
}

fn mean_of<'a>(values: impl Iterator<Item = &'a MetricValues>) -> (MetricValues, usize) {
    let mut sums: MetricValues = Metric::REPORTED.iter().map(|&m| (m, 0.0)).collect();
    let mut n = 0;
    for v in values {
        n += 1;
        for (m, x) in v {
            *sums.entry(*m).or_insert(0.0) += x;
        }
    }
    if n > 0 {
        sums.values_mut().for_each(|s| *s /= n as f64);
    }
    (sums, n)
}

impl MetricReport {
    /// Aggregates `(fold, values)` pairs; `None` values count as skipped.
    pub fn from_values(items: &[(usize, Option<&MetricValues>)], n_folds: usize) -> MetricReport {
        let (means, evaluated) = mean_of(items.iter().filter_map(|(_, v)| *v));
        let folds = (0..n_folds)
            .map(|f| {
                let in_fold: Vec<_> = items.iter().filter(|(g, _)| *g == f).collect();
                let (means, evaluated) = mean_of(in_fold.iter().filter_map(|(_, v)| *v));
                FoldMetrics {
                    fold: f,
                    evaluated,
                    skipped: in_fold.len() - evaluated,
                    means,
                }
            })
            .collect();
        MetricReport {
            means,
            evaluated,
            skipped: items.len() - evaluated,
            total: items.len(),
            folds,
        }
    }

    pub fn mean(&self, metric: Metric) -> f64 {
        self.means.get(&metric).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// P(at least `wins` wins) under a fair coin over the untied pairs.
    pub p_one_sided: f64,
    pub p_two_sided: f64,
}

/// Paired sign test of `a` against `b`; ties are dropped.
pub fn sign_test(pairs: &[(f64, f64)]) -> SignTest {
    let wins = pairs.iter().filter(|(a, b)| a > b).count();
    let losses = pairs.iter().filter(|(a, b)| a < b).count();
    let ties = pairs.len() - wins - losses;
    let n = (wins + losses) as u64;
    if n == 0 {
        return SignTest {
            wins,
            losses,
            ties,
            p_one_sided: 1.0,
            p_two_sided: 1.0,
        };
    }
    let bin = Binomial::new(0.5, n).expect("valid binomial");
    let at_least = |k: usize| if k == 0 { 1.0 } else { bin.sf(k as u64 - 1) };
    let p_one = at_least(wins);
    let p_two = (2.0 * at_least(wins.max(losses))).min(1.0);
    SignTest {
        wins,
        losses,
        ties,
        p_one_sided: p_one,
        p_two_sided: p_two,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub query_id: String,
    pub reader_id: String,
    pub fold: usize,
    /// Community whose model ranked the query (`None`: no community known).
    pub community: Option<usize>,
    /// The community had no own model and the global one was used.
    pub fallback: bool,
    pub communitized: Option<MetricValues>,
    pub global: Option<MetricValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<MetricValues>,
}

fn paired(outcomes: &[QueryOutcome], metric: Metric) -> Vec<(f64, f64)> {
    outcomes
        .iter()
        .filter_map(|o| Some((o.communitized.as_ref()?[&metric], o.global.as_ref()?[&metric])))
        .collect()
}

fn report_of(
    outcomes: &[QueryOutcome],
    n_folds: usize,
    pick: impl Fn(&QueryOutcome) -> Option<&MetricValues>,
) -> MetricReport {
    let items: Vec<(usize, Option<&MetricValues>)> = outcomes.iter().map(|o| (o.fold, pick(o))).collect();
    MetricReport::from_values(&items, n_folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvSettings {
    pub folds: usize,
    pub seed: u64,
    pub ranker: RankerParams,
    /// Metric for the paired sign test.
    pub test_metric: Metric,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            folds: 10,
            seed: 0,
            ranker: RankerParams::default(),
            test_metric: Metric::Ndcg(Some(3)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub seed: u64,
    pub communitized: MetricReport,
    pub global: MetricReport,
    pub sign_test: SignTest,
    pub fallback_queries: usize,
    pub queries: Vec<QueryOutcome>,
}

/// Fold index per query: queries are grouped by community (ascending, unknown
/// readers last), shuffled within each group and dealt round-robin.
pub fn fold_assignment(
    queries: &[RankQuery],
    assignment: &BTreeMap<String, usize>,
    folds: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if folds < 2 || folds > queries.len() {
        return Err(Error::InvalidArgument(format!(
            "folds must be in 2..={}, got {folds}",
            queries.len()
        )));
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, q) in queries.iter().enumerate() {
        let c = assignment.get(&q.reader_id).copied().unwrap_or(usize::MAX);
        groups.entry(c).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; queries.len()];
    let mut next = 0;
    for (_, mut idx) in groups {
        idx.shuffle(&mut rng);
        for i in idx {
            out[i] = next % folds;
            next += 1;
        }
    }
    Ok(out)
}

/// Trains on the out-of-fold queries and evaluates the in-fold ones with both
/// the communitized set and the global model.
fn evaluate_fold(
    dataset: &RankingDataset,
    train_assignment: &BTreeMap<String, usize>,
    test_assignment: &BTreeMap<String, usize>,
    train: &[usize],
    test: &[usize],
    fold: usize,
    params: &RankerParams,
    reference: Option<&BTreeMap<String, usize>>,
) -> Result<Vec<QueryOutcome>> {
    let train_ds = RankingDataset {
        feature_names: dataset.feature_names.clone(),
        queries: train.iter().map(|&i| dataset.queries[i].clone()).collect(),
    };
    let set = train_communitized(&train_ds, train_assignment, params)?;
    let global = set.global.as_ref().expect("trained");
    let mut out = Vec::with_capacity(test.len());
    for &i in test {
        let q = &dataset.queries[i];
        let community = test_assignment.get(&q.reader_id).copied();
        let fallback = community.is_none_or(|c| !set.has_own_model(c));
        if fallback {
            log::info!(
                "fold {fold}: query {} (community {community:?}) uses the global model",
                q.query_id
            );
        }
        let model = set.resolve(community)?;
        let reference = match reference {
            Some(r) => {
                let model = set.resolve(r.get(&q.reader_id).copied())?;
                evaluate_grades(&ranked_grades(model, q))
            }
            None => None,
        };
        out.push(QueryOutcome {
            query_id: q.query_id.clone(),
            reader_id: q.reader_id.clone(),
            fold,
            community,
            fallback,
            communitized: evaluate_grades(&ranked_grades(model, q)),
            global: evaluate_grades(&ranked_grades(global, q)),
            reference,
        });
    }
    Ok(out)
}

/// k-fold comparison of communitized rankers against the global baseline.
pub fn cross_validate_ranking(
    dataset: &RankingDataset,
    assignment: &BTreeMap<String, usize>,
    settings: &CvSettings,
) -> Result<CvReport> {
    let fold_of = fold_assignment(&dataset.queries, assignment, settings.folds, settings.seed)?;
    let per_fold: Vec<Vec<QueryOutcome>> = (0..settings.folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..fold_of.len()).filter(|&i| fold_of[i] != f).collect();
            let test: Vec<usize> = (0..fold_of.len()).filter(|&i| fold_of[i] == f).collect();
            evaluate_fold(dataset, assignment, assignment, &train, &test, f, &settings.ranker, None)
        })
        .collect::<Result<_>>()?;
    let queries: Vec<QueryOutcome> = per_fold.into_iter().flatten().collect();
    Ok(CvReport {
        folds: settings.folds,
        seed: settings.seed,
        communitized: report_of(&queries, settings.folds, |o| o.communitized.as_ref()),
        global: report_of(&queries, settings.folds, |o| o.global.as_ref()),
        sign_test: sign_test(&paired(&queries, settings.test_metric)),
        fallback_queries: queries.iter().filter(|o| o.fallback).count(),
        queries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissingRpfSettings {
    /// Share of readers stripped of their profile per round.
    pub fraction: f64,
    /// Number of rounds; round `r` holds out the readers starting at `r·n/folds`
    /// in the shuffled order.
    pub folds: usize,
    pub seed: u64,
    pub two_step: TwoStepSettings,
    pub cv: CvSettings,
}

impl Default for MissingRpfSettings {
    fn default() -> Self {
        MissingRpfSettings {
            fraction: 0.25,
            folds: 4,
            seed: 0,
            two_step: TwoStepSettings::default(),
            cv: CvSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub held_out: Vec<String>,
    pub correct: usize,
    pub accuracy: f64,
    /// Held-out readers predicted from intercepts only.
    pub empty_behavior: Vec<String>,
    pub clustering_medoids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingRpfReport {
    pub fraction: f64,
    pub folds: usize,
    pub seed: u64,
    /// Share of held-out readers whose predicted community equals their
    /// profile-based community; `None` when nothing was predicted.
    pub accuracy: Option<f64>,
    /// `confusion[truth][predicted]` summed over rounds.
    pub confusion: Vec<Vec<usize>>,
    pub rounds: Vec<RoundSummary>,
    /// Held-out queries ranked by the predicted community's model.
    pub communitized: MetricReport,
    pub global: MetricReport,
    /// Held-out queries ranked by the profile-based community's model.
    pub rpf_reference: MetricReport,
    pub sign_test: SignTest,
    pub fallback_queries: usize,
    pub queries: Vec<QueryOutcome>,
}

/// Accuracy of `predicted` against `truth` with its confusion matrix.
pub fn confusion_matrix(truth: &[usize], predicted: &[usize], k: usize) -> (Vec<Vec<usize>>, usize) {
    let mut m = vec![vec![0; k]; k];
    let mut correct = 0;
    for (&t, &p) in truth.iter().zip(predicted) {
        m[t][p] += 1;
        if t == p {
            correct += 1;
        }
    }
    (m, correct)
}

/// Nearest-medoid community of each reader on the profile groups.
fn profile_communities(
    fm: &FeatureMatrix,
    clustering: &CommunityModel,
    settings: &TwoStepSettings,
    readers: &[String],
) -> Result<Vec<usize>> {
    let u = combine_groups(fm, &settings.rpf_groups)?;
    let medoids: Vec<&[f64]> = clustering
        .medoids
        .iter()
        .map(|m| u.vector(m).ok_or_else(|| Error::UnknownReader(m.clone())))
        .collect::<Result<_>>()?;
    readers
        .iter()
        .map(|r| {
            let v = u.vector(r).ok_or_else(|| Error::UnknownReader(r.clone()))?;
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, m) in medoids.iter().enumerate() {
                let d = settings.distance.eval(v, m);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            Ok(best)
        })
        .collect()
}

/// Repeatedly hides the profile of a share of readers, predicts their
/// communities from behavior, and evaluates rankers trained on the remaining
/// readers' queries on the hidden readers' queries.
pub fn simulate_missing_rpf(
    fm: &FeatureMatrix,
    dataset: &RankingDataset,
    settings: &MissingRpfSettings,
) -> Result<MissingRpfReport> {
    if let Some(i) = fm.has_rpf.iter().position(|&h| !h) {
        return Err(Error::InvalidArgument(format!(
            "reader `{}` has no profile; the simulation needs profiles for everyone",
            fm.reader_ids[i]
        )));
    }
    if !(0.0..1.0).contains(&settings.fraction) {
        return Err(Error::InvalidArgument(format!(
            "fraction must be in [0, 1), got {}",
            settings.fraction
        )));
    }
    let n = fm.reader_ids.len();
    let held_count = (settings.fraction * n as f64).round() as usize;
    let k = settings.two_step.k;
    if held_count == 0 {
        let full = two_step(fm, &settings.two_step, seed::derive(settings.seed, "cluster"))?;
        let cv = cross_validate_ranking(dataset, &full.assignment.labels(), &settings.cv)?;
        return Ok(MissingRpfReport {
            fraction: settings.fraction,
            folds: settings.folds,
            seed: settings.seed,
            accuracy: None,
            confusion: vec![vec![0; k]; k],
            rounds: Vec::new(),
            rpf_reference: cv.communitized.clone(),
            communitized: cv.communitized,
            global: cv.global,
            sign_test: cv.sign_test,
            fallback_queries: cv.fallback_queries,
            queries: cv.queries,
        });
    }
    if settings.folds < 1 {
        return Err(Error::InvalidArgument("at least one round is needed".into()));
    }

    let mut order = fm.reader_ids.clone();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed::derive(settings.seed, "held-out")));

    let rounds: Vec<(RoundSummary, Vec<usize>, Vec<usize>, Vec<QueryOutcome>)> = (0..settings.folds)
        .into_par_iter()
        .map(|r| {
            let start = r * n / settings.folds;
            let held: BTreeSet<String> = (0..held_count).map(|j| order[(start + j) % n].clone()).collect();
            let stripped = fm.with_rpf_absent(&held);
            let round_seed = seed::derive(settings.seed, &format!("round-{r}"));
            let clustering = cluster_profiled(&stripped, &settings.two_step, round_seed)?;
            let classifier = train_community_classifier(&stripped, &clustering, &settings.two_step)?;
            let (assignment, empty) =
                assign_communities(&stripped, &clustering, Some(&classifier), &settings.two_step)?;
            let held_ids: Vec<String> = held.iter().cloned().collect();
            let truth = profile_communities(fm, &clustering, &settings.two_step, &held_ids)?;
            let predicted: Vec<usize> = held_ids
                .iter()
                .map(|h| assignment.community(h).expect("assigned"))
                .collect();
            let (_, correct) = confusion_matrix(&truth, &predicted, k);

            let train_labels = clustering.assignment.clone();
            let predicted_labels: BTreeMap<String, usize> =
                held_ids.iter().cloned().zip(predicted.iter().copied()).collect();
            let truth_labels: BTreeMap<String, usize> = held_ids.iter().cloned().zip(truth.iter().copied()).collect();
            let train: Vec<usize> = (0..dataset.queries.len())
                .filter(|&i| !held.contains(&dataset.queries[i].reader_id))
                .collect();
            let test: Vec<usize> = (0..dataset.queries.len())
                .filter(|&i| held.contains(&dataset.queries[i].reader_id))
                .collect();
            let mut cv = settings.cv.ranker.clone();
            cv.ca.seed = seed::derive(cv.ca.seed, &format!("round-{r}"));
            let outcomes = evaluate_fold(
                dataset,
                &train_labels,
                &predicted_labels,
                &train,
                &test,
                r,
                &cv,
                Some(&truth_labels),
            )?;
            let summary = RoundSummary {
                round: r,
                held_out: held_ids,
                correct,
                accuracy: correct as f64 / held_count as f64,
                empty_behavior: empty,
                clustering_medoids: clustering.medoids.clone(),
            };
            Ok((summary, truth, predicted, outcomes))
        })
        .collect::<Result<_>>()?;

    let mut confusion = vec![vec![0; k]; k];
    let mut correct = 0;
    let mut total = 0;
    let mut summaries = Vec::new();
    let mut queries = Vec::new();
    for (s, truth, predicted, outcomes) in rounds {
        let (m, c) = confusion_matrix(&truth, &predicted, k);
        for (row, add) in confusion.iter_mut().zip(m) {
            row.iter_mut().zip(add).for_each(|(a, b)| *a += b);
        }
        correct += c;
        total += truth.len();
        summaries.push(s);
        queries.extend(outcomes);
    }
    Ok(MissingRpfReport {
        fraction: settings.fraction,
        folds: settings.folds,
        seed: settings.seed,
        accuracy: Some(correct as f64 / total as f64),
        confusion,
        rounds: summaries,
        communitized: report_of(&queries, settings.folds, |o| o.communitized.as_ref()),
        global: report_of(&queries, settings.folds, |o| o.global.as_ref()),
        rpf_reference: report_of(&queries, settings.folds, |o| o.reference.as_ref()),
        sign_test: sign_test(&paired(&queries, settings.cv.test_metric)),
        fallback_queries: queries.iter().filter(|o| o.fallback).count(),
        queries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranker::RankCandidate;

    fn q(id: &str, reader: &str, cands: &[(&str, f64, u8)]) -> RankQuery {
        RankQuery {
            query_id: id.into(),
            reader_id: reader.into(),
            candidates: cands
                .iter()
                .map(|&(o, x, g)| RankCandidate {
                    oer_id: o.into(),
                    features: vec![x],
                    grade: g,
                })
                .collect(),
        }
    }

    #[test]
    fn sign_test_binomial_tail() {
        let mut pairs = vec![(1.0, 0.0); 8];
        pairs.extend([(0.0, 1.0), (0.0, 1.0), (0.5, 0.5)]);
        let t = sign_test(&pairs);
        assert_eq!((t.wins, t.losses, t.ties), (8, 2, 1));
        assert!((t.p_one_sided - 56.0 / 1024.0).abs() < 1e-12);
        assert!((t.p_two_sided - 112.0 / 1024.0).abs() < 1e-12);
        assert_eq!(sign_test(&[(1.0, 1.0)]).p_two_sided, 1.0);
    }

    #[test]
    fn one_query_per_fold() {
        let queries: Vec<RankQuery> = (0..10)
            .map(|i| q(&format!("q{i}"), &format!("r{}", i % 3), &[("a", 0.0, 1)]))
            .collect();
        let assignment: BTreeMap<String, usize> = (0..3).map(|i| (format!("r{i}"), i)).collect();
        let folds = fold_assignment(&queries, &assignment, 10, 5).unwrap();
        let mut sorted = folds.clone();
        sorted.sort();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
        assert_eq!(folds, fold_assignment(&queries, &assignment, 10, 5).unwrap());
        assert!(fold_assignment(&queries, &assignment, 11, 5).is_err());
        assert!(fold_assignment(&queries, &assignment, 1, 5).is_err());
    }

    #[test]
    fn report_means_pool_fold_values() {
        let a: MetricValues = Metric::REPORTED.iter().map(|&m| (m, 1.0)).collect();
        let b: MetricValues = Metric::REPORTED.iter().map(|&m| (m, 0.5)).collect();
        let c: MetricValues = Metric::REPORTED.iter().map(|&m| (m, 0.0)).collect();
        let r = MetricReport::from_values(&[(0, Some(&a)), (0, None), (1, Some(&b)), (1, Some(&c))], 2);
        assert_eq!(r.evaluated + r.skipped, r.total);
        assert_eq!(r.skipped, 1);
        assert!((r.mean(Metric::Mrr) - 0.5).abs() < 1e-15);
        assert_eq!(r.folds[0].means[&Metric::Mrr], 1.0);
        assert_eq!(r.folds[1].means[&Metric::Mrr], 0.25);
    }

    #[test]
    fn toy_cross_validation_matches_hand_aggregation() {
        // feature equals gain and spans 0..=2 in every query, so every trained model ranks perfectly
        let queries = vec![
            q("q1", "r1", &[("a", 2.0, 2), ("b", 0.0, 0), ("c", 1.0, 1)]),
            q("q2", "r1", &[("a", 0.0, 0), ("b", 1.0, 1), ("c", 2.0, 2)]),
            q("q3", "r2", &[("a", 1.0, 1), ("b", 2.0, 2), ("c", 0.0, 0)]),
            q("q4", "r2", &[("a", 0.0, 0), ("b", 0.0, 0)]),
        ];
        let ds = RankingDataset {
            feature_names: vec!["x".into()],
            queries,
        };
        let assignment: BTreeMap<String, usize> = [("r1".to_string(), 0), ("r2".to_string(), 1)].into();
        let settings = CvSettings {
            folds: 2,
            seed: 1,
            ..Default::default()
        };
        let r = cross_validate_ranking(&ds, &assignment, &settings).unwrap();
        assert_eq!(r.global.total, 4);
        assert_eq!(r.global.skipped, 1);
        assert_eq!(r.global.mean(Metric::Ndcg(Some(3))), 1.0);
        assert_eq!(r.fallback_queries, 4);
        let by_fold: f64 = r
            .global
            .folds
            .iter()
            .map(|f| f.means[&Metric::Mrr] * f.evaluated as f64)
            .sum::<f64>()
            / r.global.evaluated as f64;
        assert!((by_fold - r.global.mean(Metric::Mrr)).abs() < 1e-15);
        assert_eq!(r, cross_validate_ranking(&ds, &assignment, &settings).unwrap());
    }

    #[test]
    fn confusion_counts() {
        let (m, c) = confusion_matrix(&[0, 0, 1, 2, 2], &[0, 1, 1, 2, 0], 3);
        assert_eq!(c, 3);
        assert_eq!(m, vec![vec![1, 1, 0], vec![0, 1, 0], vec![1, 0, 1]]);
    }
}
