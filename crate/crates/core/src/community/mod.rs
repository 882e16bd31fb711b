//! Reader communities: K-medoids clustering, pairwise evaluation against reply
//! exchanges, and the two-step procedure that clusters profiled readers and
//! predicts communities for behavior-only readers with a MaxEnt classifier.

pub mod kmedoids;
pub mod maxent;
pub mod pairwise;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{combine_groups, FeatureGroup, FeatureMatrix};

pub use kmedoids::Distance;
pub use maxent::{predict_community, train_maxent, MaxEntModel, Prediction};
pub use pairwise::{pairwise_cluster_eval, PairwiseScores};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityModel {
    pub k: usize,
    /// Medoid reader of each community.
    pub medoids: Vec<String>,
    pub assignment: BTreeMap<String, usize>,
    pub cost: f64,
    pub distance: Distance,
    pub source_groups: Vec<FeatureGroup>,
    pub cost_trace: Vec<f64>,
}

/// K-medoids over reader vectors. Readers are processed in ascending id order,
/// so the result does not depend on input order.
pub fn kmedoids(
    reader_ids: &[String],
    vectors: &[Vec<f64>],
    k: usize,
    distance: Distance,
    seed: u64,
) -> Result<CommunityModel> {
    if reader_ids.len() != vectors.len() {
        return Err(Error::DimensionMismatch {
            expected: reader_ids.len(),
            actual: vectors.len(),
        });
    }
    let mut order: Vec<usize> = (0..reader_ids.len()).collect();
    order.sort_by(|&a, &b| reader_ids[a].cmp(&reader_ids[b]));
    let points: Vec<Vec<f64>> = order.iter().map(|&i| vectors[i].clone()).collect();
    let dm = kmedoids::DistanceMatrix::from_points(&points, distance);
    let r = kmedoids::pam(&dm, k, seed)?;
    Ok(CommunityModel {
        k,
        medoids: r
            .medoids
            .iter()
            .map(|&m| reader_ids[order[m]].clone())
            .collect(),
        assignment: order
            .iter()
            .zip(&r.assignment)
            .map(|(&i, &c)| (reader_ids[i].clone(), c))
            .collect(),
        cost: r.cost,
        distance,
        source_groups: Vec::new(),
        cost_trace: r.cost_trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentSource {
    Clustered,
    Predicted,
}

impl fmt::Display for AssignmentSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssignmentSource::Clustered => "clustered",
            AssignmentSource::Predicted => "predicted",
        })
    }
}

impl FromStr for AssignmentSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clustered" => Ok(AssignmentSource::Clustered),
            "predicted" => Ok(AssignmentSource::Predicted),
            _ => Err(Error::InvalidArgument(format!("unknown source `{s}`"))),
        }
    }
}

/// Community per reader with the way it was obtained. Serialized as `communities.tsv`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CommunityAssignment {
    pub entries: BTreeMap<String, (usize, AssignmentSource)>,
}

impl CommunityAssignment {
    pub fn community(&self, reader_id: &str) -> Option<usize> {
        self.entries.get(reader_id).map(|(c, _)| *c)
    }

    pub fn labels(&self) -> BTreeMap<String, usize> {
        self.entries.iter().map(|(r, (c, _))| (r.clone(), *c)).collect()
    }

    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .map(|(r, (c, s))| format!("{r}\t{c}\t{s}\n"))
            .collect()
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::Parse {
                stream: "communities.tsv".into(),
                line: i + 1,
                message: m,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(err(format!("expected 3 columns, found {}", cols.len())));
            }
            let c: usize = cols[1].parse().map_err(|e| err(format!("{e}")))?;
            let s: AssignmentSource = cols[2].parse().map_err(|e| err(format!("{e}")))?;
            if entries.insert(cols[0].to_string(), (c, s)).is_some() {
                return Err(Error::DuplicateId {
                    stream: "communities.tsv".into(),
                    id: cols[0].to_string(),
                });
            }
        }
        Ok(CommunityAssignment { entries })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStepSettings {
    pub k: usize,
    pub distance: Distance,
    pub lambda: f64,
    pub rpf_groups: Vec<(FeatureGroup, f64)>,
    pub rbf_groups: Vec<(FeatureGroup, f64)>,
}

impl Default for TwoStepSettings {
    fn default() -> Self {
        TwoStepSettings {
            k: 3,
            distance: Distance::Euclidean,
            lambda: 1.0,
            rpf_groups: FeatureGroup::RPF.iter().map(|&g| (g, 1.0)).collect(),
            rbf_groups: FeatureGroup::RBF_NO_REPLY.iter().map(|&g| (g, 1.0)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStepResult {
    pub clustering: CommunityModel,
    pub classifier: Option<MaxEntModel>,
    pub assignment: CommunityAssignment,
    /// Behavior-only readers whose behavior vector was empty (intercept-only prediction).
    pub empty_behavior: Vec<String>,
}

/// Clusters readers that have a profile on their profile groups.
pub fn cluster_profiled(fm: &FeatureMatrix, settings: &TwoStepSettings, seed: u64) -> Result<CommunityModel> {
    let u = combine_groups(fm, &settings.rpf_groups)?;
    let (ids, vecs): (Vec<String>, Vec<Vec<f64>>) = u
        .reader_ids
        .iter()
        .zip(&u.vectors)
        .zip(&fm.has_rpf)
        .filter(|(_, &has)| has)
        .map(|((r, v), _)| (r.clone(), v.clone()))
        .unzip();
    let mut model = kmedoids(&ids, &vecs, settings.k, settings.distance, seed)?;
    model.source_groups = u.groups();
    Ok(model)
}

/// Fits the behavior classifier on clustered readers' labels.
pub fn train_community_classifier(
    fm: &FeatureMatrix,
    clustering: &CommunityModel,
    settings: &TwoStepSettings,
) -> Result<MaxEntModel> {
    let u = combine_groups(fm, &settings.rbf_groups)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (r, v) in u.reader_ids.iter().zip(&u.vectors) {
        if let Some(&c) = clustering.assignment.get(r) {
            x.push(v.clone());
            y.push(c);
        }
    }
    train_maxent(&x, &y, settings.lambda)
}

/// Assigns every reader of `fm`: clustered readers keep their cluster, the rest
/// are predicted by `classifier`.
pub fn assign_communities(
    fm: &FeatureMatrix,
    clustering: &CommunityModel,
    classifier: Option<&MaxEntModel>,
    settings: &TwoStepSettings,
) -> Result<(CommunityAssignment, Vec<String>)> {
    let u = combine_groups(fm, &settings.rbf_groups)?;
    let mut entries = BTreeMap::new();
    let mut empty = Vec::new();
    for (r, v) in u.reader_ids.iter().zip(&u.vectors) {
        if let Some(&c) = clustering.assignment.get(r) {
            entries.insert(r.clone(), (c, AssignmentSource::Clustered));
            continue;
        }
        let model = classifier.ok_or_else(|| {
            Error::InvalidArgument(format!("reader `{r}` needs a community classifier"))
        })?;
        if v.iter().all(|&x| x == 0.0) {
            log::info!("reader {r} has no behavior features; using class priors");
            empty.push(r.clone());
        }
        let p = model.predict(v)?;
        entries.insert(r.clone(), (p.label, AssignmentSource::Predicted));
    }
    Ok((CommunityAssignment { entries }, empty))
}

/// Clusters profiled readers, labels them, trains MaxEnt on their behavior
/// features and predicts the behavior-only readers. When nobody has a profile,
/// everyone is clustered on behavior features instead.
pub fn two_step(fm: &FeatureMatrix, settings: &TwoStepSettings, seed: u64) -> Result<TwoStepResult> {
    if !fm.has_rpf.iter().any(|&h| h) {
        log::warn!("no reader has profile features; clustering on behavior features");
        let u = combine_groups(fm, &settings.rbf_groups)?;
        let mut clustering = kmedoids(&u.reader_ids, &u.vectors, settings.k, settings.distance, seed)?;
        clustering.source_groups = u.groups();
        let entries = clustering
            .assignment
            .iter()
            .map(|(r, &c)| (r.clone(), (c, AssignmentSource::Clustered)))
            .collect();
        return Ok(TwoStepResult {
            clustering,
            classifier: None,
            assignment: CommunityAssignment { entries },
            empty_behavior: Vec::new(),
        });
    }
    let clustering = cluster_profiled(fm, settings, seed)?;
    let classifier = train_community_classifier(fm, &clustering, settings)?;
    let (assignment, empty_behavior) = assign_communities(fm, &clustering, Some(&classifier), settings)?;
    Ok(TwoStepResult {
        clustering,
        classifier: Some(classifier),
        assignment,
        empty_behavior,
    })
}
