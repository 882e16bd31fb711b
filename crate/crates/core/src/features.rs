//! Reader profile (RPF) and reading behavior (RBF) feature groups.
//!
//! Every reader of the corpus gets one row per group, rows ordered by reader id.
//! Location groups count events per location cluster, text groups hold raw term
//! frequencies, `OerRating` holds grade gains and `ReplyRelation` counts reply
//! exchanges with each co-reader (undirected).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Bound;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::community::kmedoids::{pam, Distance, DistanceMatrix};
use crate::corpus::{BBox, Corpus, EventKind, ReadingEvent};
use crate::error::{Error, Result};
use crate::text::{TokenizerSettings, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    #[serde(rename = "RPF-C")]
    RpfCourses,
    #[serde(rename = "RPF-TB")]
    RpfSkills,
    QuoteLocation,
    QuoteText,
    QuestionText,
    OerRating,
    #[serde(rename = "CQLocation")]
    CqLocation,
    #[serde(rename = "CQQuoteText")]
    CqQuoteText,
    #[serde(rename = "CQContentText")]
    CqContentText,
    ReplyRelation,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 10] = [
        FeatureGroup::RpfCourses,
        FeatureGroup::RpfSkills,
        FeatureGroup::QuoteLocation,
        FeatureGroup::QuoteText,
        FeatureGroup::QuestionText,
        FeatureGroup::OerRating,
        FeatureGroup::CqLocation,
        FeatureGroup::CqQuoteText,
        FeatureGroup::CqContentText,
        FeatureGroup::ReplyRelation,
    ];

    pub const RPF: [FeatureGroup; 2] = [FeatureGroup::RpfCourses, FeatureGroup::RpfSkills];

    /// Behavior groups usable when reply exchanges serve as ground truth.
    pub const RBF_NO_REPLY: [FeatureGroup; 7] = [
        FeatureGroup::QuoteLocation,
        FeatureGroup::QuoteText,
        FeatureGroup::QuestionText,
        FeatureGroup::OerRating,
        FeatureGroup::CqLocation,
        FeatureGroup::CqQuoteText,
        FeatureGroup::CqContentText,
    ];

    pub fn is_rpf(self) -> bool {
        matches!(self, FeatureGroup::RpfCourses | FeatureGroup::RpfSkills)
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::RpfCourses => "RPF-C",
            FeatureGroup::RpfSkills => "RPF-TB",
            FeatureGroup::QuoteLocation => "QuoteLocation",
            FeatureGroup::QuoteText => "QuoteText",
            FeatureGroup::QuestionText => "QuestionText",
            FeatureGroup::OerRating => "OerRating",
            FeatureGroup::CqLocation => "CQLocation",
            FeatureGroup::CqQuoteText => "CQQuoteText",
            FeatureGroup::CqContentText => "CQContentText",
            FeatureGroup::ReplyRelation => "ReplyRelation",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature group `{s}`")))
    }
}

/// Expands a named group set (`RPF-all`, `RBF`, `RBF+reply`) or a single group name.
pub fn parse_group_set(name: &str) -> Result<Vec<FeatureGroup>> {
    match name.to_ascii_lowercase().as_str() {
        "rpf-all" | "rpf" => Ok(FeatureGroup::RPF.to_vec()),
        "rbf" => Ok(FeatureGroup::RBF_NO_REPLY.to_vec()),
        "rbf+reply" => {
            let mut g = FeatureGroup::RBF_NO_REPLY.to_vec();
            g.push(FeatureGroup::ReplyRelation);
            Ok(g)
        }
        "rpf-all+rbf" => {
            let mut g = FeatureGroup::RPF.to_vec();
            g.extend(FeatureGroup::RBF_NO_REPLY);
            Ok(g)
        }
        _ => name
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<Vec<_>>>(),
    }
}

// ---------------------------------------------------------------------------
// Location clusters
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationPoint {
    pub page: u32,
    pub x_center: f64,
    pub y_center: f64,
}

impl LocationPoint {
    pub fn of(page: u32, bbox: &BBox) -> Self {
        LocationPoint {
            page,
            x_center: bbox.x_center(),
            y_center: bbox.y_center(),
        }
    }

    /// Vertical reading position (one unit per page) then horizontal position.
    pub fn coords(&self) -> Vec<f64> {
        vec![self.page as f64 + self.y_center, self.x_center]
    }

    fn sort_key(&self) -> (f64, f64) {
        (self.page as f64 + self.y_center, self.x_center)
    }
}

/// Per-paper location clusters; feature columns follow paper id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationClusterModel {
    pub k_loc: usize,
    pub papers: BTreeMap<String, Vec<LocationPoint>>,
}

impl LocationClusterModel {
    pub fn dim(&self) -> usize {
        self.papers.values().map(Vec::len).sum()
    }

    pub fn column_labels(&self) -> Vec<String> {
        self.papers
            .iter()
            .flat_map(|(p, centers)| (0..centers.len()).map(move |i| format!("{p}#{i}")))
            .collect()
    }

    /// Nearest center of the event's paper; ties go to the lower cluster index.
    pub fn assign(&self, paper_id: &str, page: u32, bbox: &BBox) -> Option<usize> {
        let centers = self.papers.get(paper_id)?;
        let p = LocationPoint::of(page, bbox).coords();
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (i, c) in centers.iter().enumerate() {
            let d = Distance::Euclidean.eval(&p, &c.coords());
            if d < best_d {
                best_d = d;
                best = Some(i);
            }
        }
        best
    }

    /// Global feature column of an event, if its paper was clustered.
    pub fn column(&self, paper_id: &str, page: u32, bbox: &BBox) -> Option<usize> {
        let local = self.assign(paper_id, page, bbox)?;
        let offset: usize = self
            .papers
            .range::<str, _>((Bound::Unbounded, Bound::Excluded(paper_id)))
            .map(|(_, c)| c.len())
            .sum();
        Some(offset + local)
    }
}

fn paper_seed(seed: u64, paper_index: usize) -> u64 {
    seed ^ (paper_index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// K-medoids over the (page + y, x) positions of the selected events of each paper.
pub fn build_location_clusters_for(
    corpus: &Corpus,
    k_loc: usize,
    seed: u64,
    include: impl Fn(EventKind) -> bool,
) -> Result<LocationClusterModel> {
    if k_loc == 0 {
        return Err(Error::InvalidArgument("k_loc must be at least 1".into()));
    }
    let mut per_paper: BTreeMap<&str, Vec<LocationPoint>> = BTreeMap::new();
    for e in corpus.events() {
        if let (true, Some(b)) = (include(e.kind), e.bbox.as_ref()) {
            per_paper
                .entry(&e.paper_id)
                .or_default()
                .push(LocationPoint::of(e.page, b));
        }
    }
    let mut papers = BTreeMap::new();
    for (pi, (paper, mut points)) in per_paper.into_iter().enumerate() {
        points.sort_by(|a, b| a.sort_key().partial_cmp(&b.sort_key()).expect("finite"));
        let mut distinct = points.clone();
        distinct.dedup();
        let centers = if distinct.len() <= k_loc {
            distinct
        } else {
            let coords: Vec<Vec<f64>> = points.iter().map(LocationPoint::coords).collect();
            let dm = DistanceMatrix::from_points(&coords, Distance::Euclidean);
            let r = pam(&dm, k_loc, paper_seed(seed, pi))?;
            r.medoids.iter().map(|&m| points[m]).collect()
        };
        papers.insert(paper.to_string(), centers);
    }
    Ok(LocationClusterModel { k_loc, papers })
}

/// Clusters every located event (quotes, questions, comments) per paper.
pub fn build_location_clusters(
    corpus: &Corpus,
    k_loc: usize,
    seed: u64,
) -> Result<LocationClusterModel> {
    build_location_clusters_for(corpus, k_loc, seed, EventKind::is_located)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationModels {
    /// Clusters used by `QuoteLocation` (quote and question events).
    pub query: LocationClusterModel,
    /// Clusters used by `CQLocation` (comment and question events).
    pub comment: LocationClusterModel,
}

// ---------------------------------------------------------------------------
// Feature matrix
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSettings {
    pub k_loc: usize,
    /// One location clustering for query and comment/question events.
    pub shared_location_clusters: bool,
    pub tokenizer: TokenizerSettings,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        FeatureSettings {
            k_loc: 10,
            shared_location_clusters: true,
            tokenizer: TokenizerSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBlock {
    pub group: FeatureGroup,
    pub columns: Vec<String>,
    /// One row per reader, aligned with `FeatureMatrix::reader_ids`.
    pub rows: Vec<Vec<f64>>,
}

impl GroupBlock {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub reader_ids: Vec<String>,
    pub has_rpf: Vec<bool>,
    pub groups: Vec<GroupBlock>,
    pub settings: FeatureSettings,
}

impl FeatureMatrix {
    pub fn block(&self, group: FeatureGroup) -> Option<&GroupBlock> {
        self.groups.iter().find(|b| b.group == group)
    }

    pub fn reader_index(&self, reader_id: &str) -> Option<usize> {
        self.reader_ids.binary_search_by(|r| r.as_str().cmp(reader_id)).ok()
    }

    /// Copy where the listed readers lose their profile rows.
    pub fn with_rpf_absent(&self, readers: &BTreeSet<String>) -> FeatureMatrix {
        let mut out = self.clone();
        for (i, r) in out.reader_ids.iter().enumerate() {
            if readers.contains(r) {
                out.has_rpf[i] = false;
                for b in out.groups.iter_mut().filter(|b| b.group.is_rpf()) {
                    b.rows[i].iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
        out
    }
}

fn profile_blocks(corpus: &Corpus, readers: &[String]) -> (GroupBlock, GroupBlock) {
    let courses: Vec<String> = corpus
        .readers()
        .iter()
        .flat_map(|r| r.courses.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let skills: Vec<String> = corpus
        .readers()
        .iter()
        .flat_map(|r| r.skills.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut c_rows = Vec::with_capacity(readers.len());
    let mut s_rows = Vec::with_capacity(readers.len());
    for id in readers {
        let profile = corpus.reader(id).expect("reader from corpus");
        c_rows.push(
            courses
                .iter()
                .map(|c| if profile.courses.contains(c) { 1.0 } else { 0.0 })
                .collect(),
        );
        s_rows.push(
            skills
                .iter()
                .map(|s| profile.skills.get(s).map_or(0.0, |&l| (l as f64 - 1.0) / 3.0))
                .collect(),
        );
    }
    (
        GroupBlock {
            group: FeatureGroup::RpfCourses,
            columns: courses,
            rows: c_rows,
        },
        GroupBlock {
            group: FeatureGroup::RpfSkills,
            columns: skills,
            rows: s_rows,
        },
    )
}

fn text_block<'a>(
    group: FeatureGroup,
    events: &[&'a ReadingEvent],
    text_of: impl Fn(&'a ReadingEvent) -> &'a str,
    reader_pos: &HashMap<&str, usize>,
    n_readers: usize,
    settings: &TokenizerSettings,
) -> GroupBlock {
    let vocab = Vocabulary::build(events.iter().map(|e| text_of(e)), settings);
    let mut rows = vec![vec![0.0; vocab.len()]; n_readers];
    for e in events {
        if let Some(&i) = reader_pos.get(e.reader_id.as_str()) {
            vocab.accumulate_tf(text_of(e), &mut rows[i]);
        }
    }
    GroupBlock {
        group,
        columns: vocab.terms,
        rows,
    }
}

fn location_block(
    group: FeatureGroup,
    events: &[&ReadingEvent],
    model: &LocationClusterModel,
    reader_pos: &HashMap<&str, usize>,
    n_readers: usize,
) -> GroupBlock {
    let mut rows = vec![vec![0.0; model.dim()]; n_readers];
    for e in events {
        let (Some(&i), Some(b)) = (reader_pos.get(e.reader_id.as_str()), e.bbox.as_ref()) else {
            continue;
        };
        if let Some(col) = model.column(&e.paper_id, e.page, b) {
            rows[i][col] += 1.0;
        }
    }
    GroupBlock {
        group,
        columns: model.column_labels(),
        rows,
    }
}

/// Behavior feature groups for every reader of the corpus.
pub fn extract_rbf(
    corpus: &Corpus,
    locations: &LocationModels,
    tokenizer: &TokenizerSettings,
) -> (Vec<String>, Vec<GroupBlock>) {
    let readers = corpus.sorted_reader_ids();
    let n = readers.len();
    let pos: HashMap<&str, usize> = readers
        .iter()
        .enumerate()
        .map(|(i, r)| (r.as_str(), i))
        .collect();

    let queries: Vec<&ReadingEvent> = corpus.events().iter().filter(|e| e.kind.is_query()).collect();
    let questions: Vec<&ReadingEvent> = corpus
        .events()
        .iter()
        .filter(|e| e.kind == EventKind::Question)
        .collect();
    let cq: Vec<&ReadingEvent> = corpus
        .events()
        .iter()
        .filter(|e| e.kind.is_comment_or_question())
        .collect();

    let mut blocks = vec![
        location_block(FeatureGroup::QuoteLocation, &queries, &locations.query, &pos, n),
        text_block(FeatureGroup::QuoteText, &queries, |e| &e.quote_text, &pos, n, tokenizer),
        text_block(FeatureGroup::QuestionText, &questions, |e| &e.content_text, &pos, n, tokenizer),
    ];

    // latest non-NotSure rating per (reader, oer)
    let mut ratings: BTreeMap<(usize, &str), f64> = BTreeMap::new();
    for e in corpus.events() {
        if let (Some(&i), Some((oer, grade))) = (pos.get(e.reader_id.as_str()), e.rating.as_ref()) {
            if let Some(g) = grade.gain() {
                ratings.insert((i, oer.as_str()), g as f64);
            }
        }
    }
    let oer_cols: Vec<String> = ratings
        .keys()
        .map(|(_, o)| o.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rating_rows = vec![vec![0.0; oer_cols.len()]; n];
    for ((i, oer), v) in &ratings {
        let col = oer_cols.binary_search_by(|c| c.as_str().cmp(oer)).expect("column");
        rating_rows[*i][col] = *v;
    }
    blocks.push(GroupBlock {
        group: FeatureGroup::OerRating,
        columns: oer_cols,
        rows: rating_rows,
    });

    blocks.push(location_block(FeatureGroup::CqLocation, &cq, &locations.comment, &pos, n));
    blocks.push(text_block(FeatureGroup::CqQuoteText, &cq, |e| &e.quote_text, &pos, n, tokenizer));
    blocks.push(text_block(FeatureGroup::CqContentText, &cq, |e| &e.content_text, &pos, n, tokenizer));

    let mut reply_rows = vec![vec![0.0; n]; n];
    for e in corpus.events().iter().filter(|e| e.kind == EventKind::Reply) {
        let Some(target) = e.target_event_id.as_deref().and_then(|t| corpus.event(t)) else {
            continue;
        };
        if let (Some(&a), Some(&b)) = (
            pos.get(e.reader_id.as_str()),
            pos.get(target.reader_id.as_str()),
        ) {
            if a != b {
                reply_rows[a][b] += 1.0;
                reply_rows[b][a] += 1.0;
            }
        }
    }
    blocks.push(GroupBlock {
        group: FeatureGroup::ReplyRelation,
        columns: readers.clone(),
        rows: reply_rows,
    });
    (readers, blocks)
}

pub fn fit_location_models(
    corpus: &Corpus,
    settings: &FeatureSettings,
    seed: u64,
) -> Result<LocationModels> {
    if settings.shared_location_clusters {
        let shared = build_location_clusters(corpus, settings.k_loc, seed)?;
        Ok(LocationModels {
            query: shared.clone(),
            comment: shared,
        })
    } else {
        Ok(LocationModels {
            query: build_location_clusters_for(corpus, settings.k_loc, seed, EventKind::is_query)?,
            comment: build_location_clusters_for(
                corpus,
                settings.k_loc,
                seed,
                EventKind::is_comment_or_question,
            )?,
        })
    }
}

/// Fits location clusters and extracts all ten groups.
pub fn build_feature_matrix(
    corpus: &Corpus,
    settings: &FeatureSettings,
    seed: u64,
) -> Result<(FeatureMatrix, LocationModels)> {
    let locations = fit_location_models(corpus, settings, seed)?;
    let (readers, rbf) = extract_rbf(corpus, &locations, &settings.tokenizer);
    let (courses, skills) = profile_blocks(corpus, &readers);
    let has_rpf = readers
        .iter()
        .map(|r| corpus.reader(r).is_some_and(|p| p.has_rpf()))
        .collect();
    let mut groups = vec![courses, skills];
    groups.extend(rbf);
    Ok((
        FeatureMatrix {
            reader_ids: readers,
            has_rpf,
            groups,
            settings: settings.clone(),
        },
        locations,
    ))
}

// ---------------------------------------------------------------------------
// Group combination
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSlice {
    pub group: FeatureGroup,
    pub offset: usize,
    pub dim: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifiedVectors {
    pub reader_ids: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub layout: Vec<GroupSlice>,
    /// Readers lacking a profile while a profile group was requested.
    pub flagged: Vec<String>,
}

impl UnifiedVectors {
    pub fn dim(&self) -> usize {
        self.layout.iter().map(|s| s.dim).sum()
    }

    pub fn vector(&self, reader_id: &str) -> Option<&[f64]> {
        self.reader_ids
            .iter()
            .position(|r| r == reader_id)
            .map(|i| self.vectors[i].as_slice())
    }

    pub fn groups(&self) -> Vec<FeatureGroup> {
        self.layout.iter().map(|s| s.group).collect()
    }
}

/// L2-normalizes each group per reader, scales by its weight and concatenates.
pub fn combine_groups(fm: &FeatureMatrix, groups: &[(FeatureGroup, f64)]) -> Result<UnifiedVectors> {
    if groups.is_empty() {
        return Err(Error::InvalidArgument("no feature groups selected".into()));
    }
    let mut layout = Vec::new();
    let mut offset = 0;
    for &(group, weight) in groups {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight for {group} must be positive, got {weight}"
            )));
        }
        let block = fm
            .block(group)
            .ok_or_else(|| Error::InvalidArgument(format!("feature group {group} missing")))?;
        layout.push(GroupSlice {
            group,
            offset,
            dim: block.dim(),
            weight,
        });
        offset += block.dim();
    }
    let wants_rpf = groups.iter().any(|(g, _)| g.is_rpf());
    let mut vectors = Vec::with_capacity(fm.reader_ids.len());
    let mut flagged = Vec::new();
    for (i, reader) in fm.reader_ids.iter().enumerate() {
        if wants_rpf && !fm.has_rpf[i] {
            flagged.push(reader.clone());
        }
        let mut v = Vec::with_capacity(offset);
        for slice in &layout {
            let row = &fm.block(slice.group).expect("checked").rows[i];
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.extend(row.iter().map(|x| slice.weight * x / norm));
            } else {
                v.extend(std::iter::repeat_n(0.0, row.len()));
            }
        }
        vectors.push(v);
    }
    Ok(UnifiedVectors {
        reader_ids: fm.reader_ids.clone(),
        vectors,
        layout,
        flagged,
    })
}

pub fn unit_weights(groups: &[FeatureGroup]) -> Vec<(FeatureGroup, f64)> {
    groups.iter().map(|&g| (g, 1.0)).collect()
}
