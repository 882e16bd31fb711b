//! Reader, event, OER and judgment records plus their line-delimited file formats.
//!
//! Four streams make up a corpus:
//!
//! * `readers.jsonl` – one reader profile per line (optional; absent means every
//!   reader is behavior-only),
//! * `events.jsonl` – reading events (quote, question, comment, reply, rating),
//! * `oers.jsonl` – the indexed open education resources,
//! * `judgments.tsv` – graded candidate OERs per recommendation request.
//!
//! Lines starting with `#` and blank lines are skipped in every stream.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const READERS_FILE: &str = "readers.jsonl";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const OERS_FILE: &str = "oers.jsonl";
pub const JUDGMENTS_FILE: &str = "judgments.tsv";

/// Relevance judgment given by a reader to a recommended OER.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Grade {
    Good,
    Ok,
    Bad,
    NotSure,
}

impl Grade {
    /// Linear gain (Good=2, OK=1, Bad=0). `NotSure` carries no gain.
    pub fn gain(self) -> Option<u8> {
        match self {
            Grade::Good => Some(2),
            Grade::Ok => Some(1),
            Grade::Bad => Some(0),
            Grade::NotSure => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Grade::Good => "good",
            Grade::Ok => "ok",
            Grade::Bad => "bad",
            Grade::NotSure => "notsure",
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Grade {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, ' ' | '_' | '-'))
            .flat_map(char::to_lowercase)
            .collect();
        match norm.as_str() {
            "good" => Ok(Grade::Good),
            "ok" => Ok(Grade::Ok),
            "bad" => Ok(Grade::Bad),
            "notsure" => Ok(Grade::NotSure),
            _ => Err(format!("unknown grade `{s}`")),
        }
    }
}

impl Serialize for Grade {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Grade {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Quote,
    Question,
    Comment,
    Reply,
    Rating,
}

impl EventKind {
    pub const ALL: [EventKind; 5] = [
        EventKind::Quote,
        EventKind::Question,
        EventKind::Comment,
        EventKind::Reply,
        EventKind::Rating,
    ];

    /// Quote and question events launch an OER recommendation request.
    pub fn is_query(self) -> bool {
        matches!(self, EventKind::Quote | EventKind::Question)
    }

    /// Comment and question events carry a written body.
    pub fn is_comment_or_question(self) -> bool {
        matches!(self, EventKind::Comment | EventKind::Question)
    }

    pub fn is_located(self) -> bool {
        matches!(
            self,
            EventKind::Quote | EventKind::Question | EventKind::Comment
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OerType {
    Video,
    Slides,
    Wiki,
    Code,
}

impl OerType {
    pub const ALL: [OerType; 4] = [OerType::Video, OerType::Slides, OerType::Wiki, OerType::Code];

    pub fn as_str(self) -> &'static str {
        match self {
            OerType::Video => "video",
            OerType::Slides => "slides",
            OerType::Wiki => "wiki",
            OerType::Code => "code",
        }
    }
}

impl fmt::Display for OerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OerType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "video" => Ok(OerType::Video),
            "slides" => Ok(OerType::Slides),
            "wiki" => Ok(OerType::Wiki),
            "code" => Ok(OerType::Code),
            _ => Err(format!("unknown OER type `{s}`")),
        }
    }
}

/// Highlight rectangle in normalized page coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> std::result::Result<Self, String> {
        let b = BBox { x0, y0, x1, y1 };
        b.check()?;
        Ok(b)
    }

    fn check(&self) -> std::result::Result<(), String> {
        let vals = [self.x0, self.y0, self.x1, self.y1];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(format!("bbox {vals:?} has a coordinate outside [0,1]"));
        }
        if self.x0 > self.x1 {
            return Err(format!("bbox x0 ({}) > x1 ({})", self.x0, self.x1));
        }
        if self.y0 > self.y1 {
            return Err(format!("bbox y0 ({}) > y1 ({})", self.y0, self.y1));
        }
        Ok(())
    }

    pub fn x_center(&self) -> f64 {
        0.5 * (self.x0 + self.x1)
    }

    pub fn y_center(&self) -> f64 {
        0.5 * (self.y0 + self.y1)
    }

    fn to_array(self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReaderProfile {
    pub reader_id: String,
    /// Courses taken (boolean presence).
    pub courses: BTreeSet<String>,
    /// Self-rated skills, ordinal 1..=4.
    pub skills: BTreeMap<String, u8>,
}

impl ReaderProfile {
    pub fn new(reader_id: impl Into<String>) -> Self {
        ReaderProfile {
            reader_id: reader_id.into(),
            ..Default::default()
        }
    }

    pub fn has_rpf(&self) -> bool {
        !self.courses.is_empty() || !self.skills.is_empty()
    }

    /// Same reader with the profile removed.
    pub fn without_rpf(&self) -> Self {
        ReaderProfile::new(self.reader_id.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadingEvent {
    pub event_id: String,
    pub kind: EventKind,
    pub reader_id: String,
    pub paper_id: String,
    pub page: u32,
    /// Required for quote, question and comment events.
    pub bbox: Option<BBox>,
    pub quote_text: String,
    pub content_text: String,
    /// Present iff `kind == Reply`.
    pub target_event_id: Option<String>,
    /// Present iff `kind == Rating`.
    pub rating: Option<(String, Grade)>,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OerItem {
    pub oer_id: String,
    pub oer_type: OerType,
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgment {
    pub oer_id: String,
    pub grade: Grade,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgedQuery {
    pub query_id: String,
    pub reader_id: String,
    pub paper_id: String,
    pub quote_text: String,
    pub judgments: Vec<Judgment>,
}

/// Immutable collection of readers, events, OERs and judged queries, indexed by id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    readers: Vec<ReaderProfile>,
    events: Vec<ReadingEvent>,
    oers: Vec<OerItem>,
    queries: Vec<JudgedQuery>,
    reader_index: HashMap<String, usize>,
    event_index: HashMap<String, usize>,
    oer_index: HashMap<String, usize>,
    query_index: HashMap<String, usize>,
    warnings: Vec<String>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.readers == other.readers
            && self.events == other.events
            && self.oers == other.oers
            && self.queries == other.queries
    }
}

fn index_ids<'a>(
    stream: &str,
    ids: impl Iterator<Item = &'a str>,
) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::new();
    for (i, id) in ids.enumerate() {
        if index.insert(id.to_string(), i).is_some() {
            return Err(Error::DuplicateId {
                stream: stream.to_string(),
                id: id.to_string(),
            });
        }
    }
    Ok(index)
}

impl Corpus {
    pub fn new(
        readers: Vec<ReaderProfile>,
        events: Vec<ReadingEvent>,
        oers: Vec<OerItem>,
        queries: Vec<JudgedQuery>,
    ) -> Result<Self> {
        let reader_index = index_ids(READERS_FILE, readers.iter().map(|r| r.reader_id.as_str()))?;
        let event_index = index_ids(EVENTS_FILE, events.iter().map(|e| e.event_id.as_str()))?;
        let oer_index = index_ids(OERS_FILE, oers.iter().map(|o| o.oer_id.as_str()))?;
        let query_index =
            index_ids(JUDGMENTS_FILE, queries.iter().map(|q| q.query_id.as_str()))?;
        for q in &queries {
            let mut seen = BTreeSet::new();
            for j in &q.judgments {
                if !seen.insert(j.oer_id.as_str()) {
                    return Err(Error::DuplicateId {
                        stream: JUDGMENTS_FILE.to_string(),
                        id: format!("{}/{}", q.query_id, j.oer_id),
                    });
                }
            }
        }
        Ok(Corpus {
            readers,
            events,
            oers,
            queries,
            reader_index,
            event_index,
            oer_index,
            query_index,
            warnings: Vec::new(),
        })
    }

    pub fn readers(&self) -> &[ReaderProfile] {
        &self.readers
    }

    pub fn events(&self) -> &[ReadingEvent] {
        &self.events
    }

    pub fn oers(&self) -> &[OerItem] {
        &self.oers
    }

    pub fn queries(&self) -> &[JudgedQuery] {
        &self.queries
    }

    /// Non-fatal notes collected while parsing (e.g. ignored fields).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn reader(&self, id: &str) -> Option<&ReaderProfile> {
        self.reader_index.get(id).map(|&i| &self.readers[i])
    }

    pub fn event(&self, id: &str) -> Option<&ReadingEvent> {
        self.event_index.get(id).map(|&i| &self.events[i])
    }

    pub fn oer(&self, id: &str) -> Option<&OerItem> {
        self.oer_index.get(id).map(|&i| &self.oers[i])
    }

    pub fn query(&self, id: &str) -> Option<&JudgedQuery> {
        self.query_index.get(id).map(|&i| &self.queries[i])
    }

    /// Reader ids in ascending order.
    pub fn sorted_reader_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.readers.iter().map(|r| r.reader_id.clone()).collect();
        ids.sort();
        ids
    }

    /// Copy of the corpus where the given readers have their profiles removed.
    pub fn strip_rpf(&self, reader_ids: &BTreeSet<String>) -> Corpus {
        let mut out = self.clone();
        for r in &mut out.readers {
            if reader_ids.contains(&r.reader_id) {
                *r = r.without_rpf();
            }
        }
        out
    }

    /// Unordered reader pairs `(a, b)` with `a < b` that exchanged at least one reply.
    /// Replies whose target is missing or written by the replier are ignored.
    pub fn reply_pairs(&self) -> BTreeSet<(String, String)> {
        let mut pairs = BTreeSet::new();
        for e in &self.events {
            if e.kind != EventKind::Reply {
                continue;
            }
            let Some(target) = e.target_event_id.as_deref().and_then(|t| self.event(t)) else {
                continue;
            };
            let (a, b) = (&e.reader_id, &target.reader_id);
            if a == b {
                continue;
            }
            let pair = if a < b {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            };
            pairs.insert(pair);
        }
        pairs
    }
}

// ---------------------------------------------------------------------------
// Wire records
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ReaderRecord {
    reader: String,
    #[serde(default)]
    courses: Vec<String>,
    #[serde(default)]
    skills: BTreeMap<String, i64>,
    #[serde(flatten, skip_serializing)]
    extra: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct EventRecord {
    event: String,
    kind: EventKind,
    reader: String,
    paper: String,
    #[serde(default)]
    page: u32,
    #[serde(default)]
    bbox: Option<[f64; 4]>,
    #[serde(default)]
    quote_text: String,
    #[serde(default)]
    content_text: String,
    #[serde(default)]
    target: Option<String>,
    #[serde(default)]
    oer: Option<String>,
    #[serde(default)]
    grade: Option<Grade>,
    #[serde(default)]
    ts: i64,
    #[serde(flatten, skip_serializing)]
    extra: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct OerRecord {
    oer: String,
    #[serde(rename = "type")]
    oer_type: OerType,
    #[serde(default)]
    title: String,
    #[serde(default)]
    body: String,
    #[serde(flatten, skip_serializing)]
    extra: BTreeMap<String, Value>,
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn parse_err(stream: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        stream: stream.to_string(),
        line,
        message: message.into(),
    }
}

fn note_extra(
    warnings: &mut Vec<String>,
    stream: &str,
    line: usize,
    extra: &BTreeMap<String, Value>,
) {
    if !extra.is_empty() {
        let keys: Vec<&str> = extra.keys().map(String::as_str).collect();
        let msg = format!("{stream}:{line}: ignoring unknown fields {keys:?}");
        log::warn!("{msg}");
        warnings.push(msg);
    }
}

fn parse_readers(text: &str, warnings: &mut Vec<String>) -> Result<Vec<ReaderProfile>> {
    let mut out = Vec::new();
    for (line, l) in data_lines(text) {
        let rec: ReaderRecord =
            serde_json::from_str(l).map_err(|e| parse_err(READERS_FILE, line, e.to_string()))?;
        note_extra(warnings, READERS_FILE, line, &rec.extra);
        let mut profile = ReaderProfile::new(rec.reader);
        for c in rec.courses {
            if !profile.courses.insert(c.clone()) {
                return Err(parse_err(READERS_FILE, line, format!("course `{c}` listed twice")));
            }
        }
        for (skill, level) in rec.skills {
            if !(1..=4).contains(&level) {
                return Err(parse_err(
                    READERS_FILE,
                    line,
                    format!("skill `{skill}` level {level} outside 1..=4"),
                ));
            }
            profile.skills.insert(skill, level as u8);
        }
        out.push(profile);
    }
    Ok(out)
}

fn parse_events(text: &str, warnings: &mut Vec<String>) -> Result<Vec<ReadingEvent>> {
    let mut out = Vec::new();
    for (line, l) in data_lines(text) {
        let rec: EventRecord =
            serde_json::from_str(l).map_err(|e| parse_err(EVENTS_FILE, line, e.to_string()))?;
        note_extra(warnings, EVENTS_FILE, line, &rec.extra);
        let bbox = match rec.bbox {
            Some([x0, y0, x1, y1]) => {
                Some(BBox::new(x0, y0, x1, y1).map_err(|m| parse_err(EVENTS_FILE, line, m))?)
            }
            None => None,
        };
        if rec.kind.is_located() && bbox.is_none() {
            return Err(parse_err(
                EVENTS_FILE,
                line,
                format!("{:?} event requires a bbox", rec.kind),
            ));
        }
        let is_reply = rec.kind == EventKind::Reply;
        if is_reply != rec.target.is_some() {
            return Err(parse_err(
                EVENTS_FILE,
                line,
                "`target` must be present exactly for reply events",
            ));
        }
        let is_rating = rec.kind == EventKind::Rating;
        let rating = match (rec.oer, rec.grade) {
            (Some(oer), Some(grade)) if is_rating => Some((oer, grade)),
            (None, None) if !is_rating => None,
            _ => {
                return Err(parse_err(
                    EVENTS_FILE,
                    line,
                    "`oer` and `grade` must be present exactly for rating events",
                ))
            }
        };
        out.push(ReadingEvent {
            event_id: rec.event,
            kind: rec.kind,
            reader_id: rec.reader,
            paper_id: rec.paper,
            page: rec.page,
            bbox,
            quote_text: rec.quote_text,
            content_text: rec.content_text,
            target_event_id: rec.target,
            rating,
            timestamp: rec.ts,
        });
    }
    Ok(out)
}

fn parse_oers(text: &str, warnings: &mut Vec<String>) -> Result<Vec<OerItem>> {
    let mut out = Vec::new();
    for (line, l) in data_lines(text) {
        let rec: OerRecord =
            serde_json::from_str(l).map_err(|e| parse_err(OERS_FILE, line, e.to_string()))?;
        note_extra(warnings, OERS_FILE, line, &rec.extra);
        out.push(OerItem {
            oer_id: rec.oer,
            oer_type: rec.oer_type,
            title: rec.title,
            body: rec.body,
        });
    }
    Ok(out)
}

fn parse_judgments(text: &str) -> Result<Vec<JudgedQuery>> {
    let mut out: Vec<JudgedQuery> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for (line, l) in data_lines(text) {
        let cols: Vec<&str> = l.split('\t').collect();
        if cols.len() != 6 {
            return Err(parse_err(
                JUDGMENTS_FILE,
                line,
                format!("expected 6 tab-separated columns, found {}", cols.len()),
            ));
        }
        let grade: Grade = cols[5]
            .trim()
            .parse()
            .map_err(|m: String| parse_err(JUDGMENTS_FILE, line, m))?;
        let judgment = Judgment {
            oer_id: cols[4].to_string(),
            grade,
        };
        match by_id.get(cols[0]) {
            Some(&qi) => {
                let q = &mut out[qi];
                if q.reader_id != cols[1] || q.paper_id != cols[2] || q.quote_text != cols[3] {
                    return Err(parse_err(
                        JUDGMENTS_FILE,
                        line,
                        format!("query `{}` redeclared with different context", cols[0]),
                    ));
                }
                if q.judgments.iter().any(|j| j.oer_id == judgment.oer_id) {
                    return Err(Error::DuplicateId {
                        stream: JUDGMENTS_FILE.to_string(),
                        id: format!("{}/{}", cols[0], judgment.oer_id),
                    });
                }
                q.judgments.push(judgment);
            }
            None => {
                by_id.insert(cols[0].to_string(), out.len());
                out.push(JudgedQuery {
                    query_id: cols[0].to_string(),
                    reader_id: cols[1].to_string(),
                    paper_id: cols[2].to_string(),
                    quote_text: cols[3].to_string(),
                    judgments: vec![judgment],
                });
            }
        }
    }
    Ok(out)
}

/// Parses the four corpus streams. With no reader stream every reader seen in
/// events or judgments is created without a profile, in order of first appearance.
pub fn parse_corpus(
    events: &str,
    readers: Option<&str>,
    oers: &str,
    judgments: &str,
) -> Result<Corpus> {
    let mut warnings = Vec::new();
    let events = parse_events(events, &mut warnings)?;
    let oers = parse_oers(oers, &mut warnings)?;
    let queries = parse_judgments(judgments)?;
    let readers = match readers {
        Some(text) => parse_readers(text, &mut warnings)?,
        None => {
            let mut seen = BTreeSet::new();
            events
                .iter()
                .map(|e| &e.reader_id)
                .chain(queries.iter().map(|q| &q.reader_id))
                .filter(|id| seen.insert(id.as_str()))
                .map(ReaderProfile::new)
                .collect()
        }
    };
    let mut corpus = Corpus::new(readers, events, oers, queries)?;
    corpus.warnings = warnings;
    Ok(corpus)
}

/// Serialized form of a corpus, one string per stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusStreams {
    pub readers: String,
    pub events: String,
    pub oers: String,
    pub judgments: String,
}

fn tsv_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

impl Corpus {
    pub fn to_streams(&self) -> CorpusStreams {
        let mut readers = String::new();
        for r in &self.readers {
            let rec = ReaderRecord {
                reader: r.reader_id.clone(),
                courses: r.courses.iter().cloned().collect(),
                skills: r.skills.iter().map(|(k, v)| (k.clone(), *v as i64)).collect(),
                extra: BTreeMap::new(),
            };
            readers.push_str(&serde_json::to_string(&rec).expect("reader record"));
            readers.push('\n');
        }
        let mut events = String::new();
        for e in &self.events {
            let rec = EventRecord {
                event: e.event_id.clone(),
                kind: e.kind,
                reader: e.reader_id.clone(),
                paper: e.paper_id.clone(),
                page: e.page,
                bbox: e.bbox.map(BBox::to_array),
                quote_text: e.quote_text.clone(),
                content_text: e.content_text.clone(),
                target: e.target_event_id.clone(),
                oer: e.rating.as_ref().map(|(o, _)| o.clone()),
                grade: e.rating.as_ref().map(|(_, g)| *g),
                ts: e.timestamp,
                extra: BTreeMap::new(),
            };
            events.push_str(&serde_json::to_string(&rec).expect("event record"));
            events.push('\n');
        }
        let mut oers = String::new();
        for o in &self.oers {
            let rec = OerRecord {
                oer: o.oer_id.clone(),
                oer_type: o.oer_type,
                title: o.title.clone(),
                body: o.body.clone(),
                extra: BTreeMap::new(),
            };
            oers.push_str(&serde_json::to_string(&rec).expect("oer record"));
            oers.push('\n');
        }
        let mut judgments = String::new();
        for q in &self.queries {
            for j in &q.judgments {
                judgments.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    tsv_field(&q.query_id),
                    tsv_field(&q.reader_id),
                    tsv_field(&q.paper_id),
                    tsv_field(&q.quote_text),
                    tsv_field(&j.oer_id),
                    j.grade
                ));
            }
        }
        CorpusStreams {
            readers,
            events,
            oers,
            judgments,
        }
    }

    /// Reads the four standard file names from `dir`; `readers.jsonl` may be absent.
    pub fn read_dir(dir: &Path) -> Result<Corpus> {
        let events = fs::read_to_string(dir.join(EVENTS_FILE))?;
        let oers = fs::read_to_string(dir.join(OERS_FILE))?;
        let judgments = fs::read_to_string(dir.join(JUDGMENTS_FILE))?;
        let readers_path = dir.join(READERS_FILE);
        let readers = if readers_path.exists() {
            Some(fs::read_to_string(readers_path)?)
        } else {
            None
        };
        parse_corpus(&events, readers.as_deref(), &oers, &judgments)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        let s = self.to_streams();
        fs::create_dir_all(dir)?;
        fs::write(dir.join(READERS_FILE), s.readers)?;
        fs::write(dir.join(EVENTS_FILE), s.events)?;
        fs::write(dir.join(OERS_FILE), s.oers)?;
        fs::write(dir.join(JUDGMENTS_FILE), s.judgments)?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum Issue {
    UnknownReader { event_id: String, reader_id: String },
    DanglingReply { event_id: String, target_event_id: String },
    SelfReply { event_id: String },
    UnknownOer { event_id: String, oer_id: String },
    JudgmentUnknownReader { query_id: String, reader_id: String },
    JudgmentUnknownOer { query_id: String, oer_id: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
    pub counts: BTreeMap<EventKind, usize>,
}

impl ValidationReport {
    pub fn is_consistent(&self) -> bool {
        self.issues.is_empty()
    }
}

pub fn validate_corpus(corpus: &Corpus) -> ValidationReport {
    let mut report = ValidationReport::default();
    for kind in EventKind::ALL {
        report.counts.insert(kind, 0);
    }
    for e in corpus.events() {
        *report.counts.entry(e.kind).or_default() += 1;
        if corpus.reader(&e.reader_id).is_none() {
            report.issues.push(Issue::UnknownReader {
                event_id: e.event_id.clone(),
                reader_id: e.reader_id.clone(),
            });
        }
        if let Some(target) = &e.target_event_id {
            match corpus.event(target) {
                None => report.issues.push(Issue::DanglingReply {
                    event_id: e.event_id.clone(),
                    target_event_id: target.clone(),
                }),
                Some(t) if t.reader_id == e.reader_id => report.issues.push(Issue::SelfReply {
                    event_id: e.event_id.clone(),
                }),
                Some(_) => {}
            }
        }
        if let Some((oer, _)) = &e.rating {
            if corpus.oer(oer).is_none() {
                report.issues.push(Issue::UnknownOer {
                    event_id: e.event_id.clone(),
                    oer_id: oer.clone(),
                });
            }
        }
    }
    for q in corpus.queries() {
        if corpus.reader(&q.reader_id).is_none() {
            report.issues.push(Issue::JudgmentUnknownReader {
                query_id: q.query_id.clone(),
                reader_id: q.reader_id.clone(),
            });
        }
        for j in &q.judgments {
            if corpus.oer(&j.oer_id).is_none() {
                report.issues.push(Issue::JudgmentUnknownOer {
                    query_id: q.query_id.clone(),
                    oer_id: j.oer_id.clone(),
                });
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUOTE: &str = r#"{"event":"e1","kind":"quote","reader":"r1","paper":"p1","page":2,"bbox":[0.1,0.2,0.5,0.25],"quote_text":"graph walk","content_text":"","target":null,"oer":null,"grade":null,"ts":0}"#;

    #[test]
    fn empty_streams_give_empty_corpus() {
        let c = parse_corpus("", Some(""), "", "").unwrap();
        assert!(c.readers().is_empty());
        assert!(c.events().is_empty());
        assert!(validate_corpus(&c).is_consistent());
    }

    #[test]
    fn single_quote_line() {
        let readers = r#"{"reader":"r1","courses":["ml","stats"],"skills":{"R":3,"NoSQL":1}}"#;
        let c = parse_corpus(QUOTE, Some(readers), "", "").unwrap();
        assert_eq!(c.events().len(), 1);
        assert_eq!(c.events()[0].kind, EventKind::Quote);
        assert_eq!(c.events()[0].bbox.unwrap().y_center(), 0.225);
        assert!(c.reader("r1").unwrap().has_rpf());
        assert_eq!(c.reader("r1").unwrap().skills["R"], 3);
    }

    #[test]
    fn inverted_bbox_is_rejected_with_line_number() {
        let bad = QUOTE.replace("[0.1,0.2,0.5,0.25]", "[0.6,0.2,0.5,0.25]");
        let text = format!("# header\n{QUOTE}\n{}", bad.replace("\"e1\"", "\"e2\""));
        let err = parse_corpus(&text, None, "", "").unwrap_err();
        match err {
            Error::Parse { stream, line, message } => {
                assert_eq!(stream, EVENTS_FILE);
                assert_eq!(line, 3);
                assert!(message.contains("x0"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_names_stream_and_line() {
        let err = parse_corpus("", None, "{\"oer\":\"o1\",\"type\":\"video\"}\nnot json", "")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { ref stream, line: 2, .. } if stream == OERS_FILE));
    }

    #[test]
    fn skill_out_of_range_rejected() {
        let err = parse_corpus("", Some(r#"{"reader":"r1","skills":{"R":5}}"#), "", "")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn duplicate_event_id_rejected() {
        let text = format!("{QUOTE}\n{QUOTE}");
        let err = parse_corpus(&text, None, "", "").unwrap_err();
        assert!(matches!(err, Error::DuplicateId { ref id, .. } if id == "e1"));
    }

    #[test]
    fn duplicate_judgment_rejected() {
        let j = "q1\tr1\tp1\tgraph\to1\tgood\nq1\tr1\tp1\tgraph\to1\tbad\n";
        let err = parse_corpus("", None, "", j).unwrap_err();
        assert!(matches!(err, Error::DuplicateId { ref id, .. } if id == "q1/o1"));
    }

    #[test]
    fn rating_needs_oer_and_grade() {
        let line = r#"{"event":"e9","kind":"rating","reader":"r1","paper":"p1","oer":"o1","grade":null}"#;
        assert!(parse_corpus(line, None, "", "").is_err());
        let ok = r#"{"event":"e9","kind":"rating","reader":"r1","paper":"p1","oer":"o1","grade":"NotSure"}"#;
        let c = parse_corpus(ok, None, "", "").unwrap();
        assert_eq!(c.events()[0].rating, Some(("o1".into(), Grade::NotSure)));
    }

    #[test]
    fn unknown_fields_warn_but_parse() {
        let line = QUOTE.replace("\"ts\":0", "\"ts\":0,\"device\":\"tablet\"");
        let c = parse_corpus(&line, None, "", "").unwrap();
        assert_eq!(c.warnings().len(), 1);
        assert!(c.warnings()[0].contains("device"));
    }

    #[test]
    fn absent_reader_stream_creates_rbf_only_readers() {
        let c = parse_corpus(QUOTE, None, "", "q1\tr2\tp1\tx\to1\tok\n").unwrap();
        assert_eq!(c.sorted_reader_ids(), vec!["r1", "r2"]);
        assert!(c.readers().iter().all(|r| !r.has_rpf()));
    }

    #[test]
    fn validation_reports_dangling_references() {
        let reply = r#"{"event":"e2","kind":"reply","reader":"r2","paper":"p1","target":"missing","content_text":"hi"}"#;
        let rating = r#"{"event":"e3","kind":"rating","reader":"r1","paper":"p1","oer":"o404","grade":"good"}"#;
        let text = format!("{QUOTE}\n{reply}\n{rating}");
        let readers = "{\"reader\":\"r1\"}\n{\"reader\":\"r2\"}";
        let c = parse_corpus(&text, Some(readers), "", "").unwrap();
        let report = validate_corpus(&c);
        assert_eq!(
            report.issues,
            vec![
                Issue::DanglingReply {
                    event_id: "e2".into(),
                    target_event_id: "missing".into()
                },
                Issue::UnknownOer {
                    event_id: "e3".into(),
                    oer_id: "o404".into()
                },
            ]
        );
        assert_eq!(report.counts[&EventKind::Reply], 1);
    }

    #[test]
    fn consistent_corpus_has_no_issues() {
        let reply = r#"{"event":"e2","kind":"reply","reader":"r2","paper":"p1","target":"e1","content_text":"hi"}"#;
        let text = format!("{QUOTE}\n{reply}");
        let readers = "{\"reader\":\"r1\"}\n{\"reader\":\"r2\"}";
        let c = parse_corpus(&text, Some(readers), "", "").unwrap();
        assert!(validate_corpus(&c).is_consistent());
        let pairs: Vec<_> = c.reply_pairs().into_iter().collect();
        assert_eq!(pairs, vec![("r1".to_string(), "r2".to_string())]);
    }

    #[test]
    fn grade_parsing_is_lenient() {
        assert_eq!("OK".parse::<Grade>().unwrap(), Grade::Ok);
        assert_eq!("Not Sure".parse::<Grade>().unwrap(), Grade::NotSure);
        assert_eq!("not_sure".parse::<Grade>().unwrap(), Grade::NotSure);
        assert!("great".parse::<Grade>().is_err());
    }
}
