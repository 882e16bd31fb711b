//! Seeded synthetic corpora with planted reader communities.
//!
//! All randomness comes from one `ChaCha8Rng` seeded with `SimConfig::seed`,
//! consumed in this order:
//!
//! 1. community labels: a balanced list (`i mod communities`) shuffled once;
//! 2. the paper/topic/OER graph: topics per paper, topics per OER, resource
//!    edges, then OER body words;
//! 3. per reader profile: courses (from the community's pool with
//!    probability α, else any course), then skill levels (community pattern
//!    with probability α, else uniform over 1..=4);
//! 4. per reader behavior: personal words, event count, then each event;
//! 5. per reader judged queries, each with its quote event, candidates,
//!    grades and mirrored rating events;
//! 6. reply exchanges over reader pairs in ascending order.
//!
//! Latent labels are returned next to the corpus and never written into it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    BBox, Corpus, EventKind, Grade, JudgedQuery, Judgment, OerItem, OerType, ReaderProfile, ReadingEvent,
};
use crate::error::{Error, Result};
use crate::hetgraph::{Edge, EdgeType, HetGraph, Vertex, VertexKind};

pub const LATENT_FILE: &str = "latent.tsv";

const PAGES: u32 = 10;
const TOPIC_WORDS: usize = 3;
const QUOTE_TOKENS: usize = 6;
const COURSES_PER_READER: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub readers: usize,
    pub communities: usize,
    /// 1 keeps profiles and reply partners inside the community.
    pub alpha: f64,
    pub papers: usize,
    pub topics: usize,
    pub oers_per_type: usize,
    /// Poisson mean of free reading events per reader.
    pub events_per_reader: f64,
    pub queries_per_reader: usize,
    pub candidates_per_query: usize,
    /// Preferred OER type of community `c` is `preferred_types[c % len]`.
    pub preferred_types: Vec<OerType>,
    pub grade_noise: f64,
    pub not_sure_rate: f64,
    pub vocab_size: usize,
    pub courses: usize,
    pub skills: usize,
    /// Probability that a behavior token or location follows the community pattern.
    pub behavior_signal: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            readers: 60,
            communities: 3,
            alpha: 0.9,
            papers: 8,
            topics: 24,
            oers_per_type: 30,
            events_per_reader: 6.0,
            queries_per_reader: 8,
            candidates_per_query: 5,
            preferred_types: vec![OerType::Video, OerType::Code, OerType::Slides, OerType::Wiki],
            grade_noise: 0.2,
            not_sure_rate: 0.05,
            vocab_size: 300,
            courses: 12,
            skills: 6,
            behavior_signal: 0.35,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, p) in [
            ("alpha", self.alpha),
            ("grade_noise", self.grade_noise),
            ("not_sure_rate", self.not_sure_rate),
            ("behavior_signal", self.behavior_signal),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if !(self.events_per_reader >= 0.0 && self.events_per_reader.is_finite()) {
            return bad(format!("events_per_reader must be nonnegative, got {}", self.events_per_reader));
        }
        if self.readers == 0 {
            return Ok(());
        }
        for (name, n) in [
            ("communities", self.communities),
            ("papers", self.papers),
            ("topics", self.topics),
            ("oers_per_type", self.oers_per_type),
            ("candidates_per_query", self.candidates_per_query),
            ("courses", self.courses),
            ("skills", self.skills),
        ] {
            if n == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.preferred_types.is_empty() {
            return bad("preferred_types must not be empty".into());
        }
        if self.candidates_per_query > 4 * self.oers_per_type {
            return bad(format!(
                "candidates_per_query ({}) exceeds the number of OERs ({})",
                self.candidates_per_query,
                4 * self.oers_per_type
            ));
        }
        if self.courses < self.communities || self.skills < self.communities {
            return bad("need at least one course and one skill per community".into());
        }
        let needed = self.topics * TOPIC_WORDS + 2 * (self.communities + 1);
        if self.vocab_size < needed {
            return bad(format!("vocab_size must be at least {needed}, got {}", self.vocab_size));
        }
        Ok(())
    }

    pub fn preferred_type(&self, community: usize) -> OerType {
        self.preferred_types[community % self.preferred_types.len()]
    }
}

/// Ground truth kept out of the corpus streams.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatentLabels {
    pub community: BTreeMap<String, usize>,
}

impl LatentLabels {
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (r, c) in &self.community {
            let _ = writeln!(s, "{r}\t{c}");
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<BTreeMap<String, usize>> {
        let mut out = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: &str| Error::Parse {
                stream: LATENT_FILE.into(),
                line: i + 1,
                message: m.into(),
            };
            let (r, c) = line.split_once('\t').ok_or_else(|| err("expected reader<TAB>community"))?;
            let c = c.trim().parse().map_err(|_| err("community must be an integer"))?;
            out.insert(r.to_string(), c);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub corpus: Corpus,
    pub graph: HetGraph,
    pub latent: LatentLabels,
}

struct Vocab {
    topic_words: Vec<Vec<String>>,
    community_words: Vec<Vec<String>>,
    general: Vec<String>,
}

fn word(i: usize) -> String {
    format!("w{i:04}")
}

fn build_vocab(cfg: &SimConfig) -> Vocab {
    let mut next = 0;
    let mut take = |n: usize| -> Vec<String> {
        let v = (next..next + n).map(word).collect();
        next += n;
        v
    };
    let topic_words = (0..cfg.topics).map(|_| take(TOPIC_WORDS)).collect();
    let rest = cfg.vocab_size - cfg.topics * TOPIC_WORDS;
    let block = rest / (cfg.communities + 1);
    let community_words = (0..cfg.communities).map(|_| take(block)).collect();
    let general = take(rest - block * cfg.communities);
    Vocab {
        topic_words,
        community_words,
        general,
    }
}

struct World {
    graph: HetGraph,
    oers: Vec<OerItem>,
    paper_ids: Vec<String>,
    paper_topics: Vec<Vec<usize>>,
    /// OER indices related to each topic.
    topic_oers: Vec<Vec<usize>>,
    /// Candidate pool per paper: OERs of its topics and its resources.
    paper_pool: Vec<Vec<usize>>,
}

fn build_world(cfg: &SimConfig, vocab: &Vocab, rng: &mut ChaCha8Rng) -> Result<World> {
    let paper_ids: Vec<String> = (0..cfg.papers).map(|i| format!("p{i:03}")).collect();
    let topic_ids: Vec<String> = (0..cfg.topics).map(|i| format!("t{i:03}")).collect();
    let n_oers = 4 * cfg.oers_per_type;
    let oer_ids: Vec<String> = (0..n_oers).map(|i| format!("o{i:04}")).collect();
    let oer_types: Vec<OerType> = (0..n_oers).map(|i| OerType::ALL[i % 4]).collect();

    let per_paper = cfg.topics.div_ceil(cfg.papers).clamp(1, 4).min(cfg.topics);
    let paper_topics: Vec<Vec<usize>> = (0..cfg.papers)
        .map(|_| {
            let mut t = rand::seq::index::sample(rng, cfg.topics, per_paper).into_vec();
            t.sort_unstable();
            t
        })
        .collect();
    let mut topic_oers = vec![Vec::new(); cfg.topics];
    let mut oer_topics = Vec::with_capacity(n_oers);
    for o in 0..n_oers {
        let n = if cfg.topics > 1 && rng.random_bool(0.3) { 2 } else { 1 };
        let mut ts = rand::seq::index::sample(rng, cfg.topics, n).into_vec();
        ts.sort_unstable();
        for &t in &ts {
            topic_oers[t].push(o);
        }
        oer_topics.push(ts);
    }
    let mut paper_resources = vec![Vec::new(); cfg.papers];
    for (p, res) in paper_resources.iter_mut().enumerate() {
        let own: Vec<usize> = paper_topics[p]
            .iter()
            .flat_map(|&t| topic_oers[t].iter().copied())
            .collect();
        for &o in &own {
            if rng.random_bool(0.25) {
                res.push(o);
            }
        }
        res.sort_unstable();
        res.dedup();
    }

    let mut oers = Vec::with_capacity(n_oers);
    for o in 0..n_oers {
        let mut body = Vec::new();
        for &t in &oer_topics[o] {
            for _ in 0..2 {
                body.extend(vocab.topic_words[t].iter().cloned());
            }
        }
        for _ in 0..6 {
            body.push(vocab.general.choose(rng).expect("general words").clone());
        }
        oers.push(OerItem {
            oer_id: oer_ids[o].clone(),
            oer_type: oer_types[o],
            title: format!("{} {}", oer_types[o], o),
            body: body.join(" "),
        });
    }

    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    for (p, id) in paper_ids.iter().enumerate() {
        vertices.push(Vertex {
            id: id.clone(),
            kind: VertexKind::Paper,
            payload: format!("paper {p}"),
        });
        for &t in &paper_topics[p] {
            edges.push(Edge {
                src: id.clone(),
                edge_type: EdgeType::About,
                dst: topic_ids[t].clone(),
            });
            edges.push(Edge {
                src: topic_ids[t].clone(),
                edge_type: EdgeType::Covers,
                dst: id.clone(),
            });
        }
        for &o in &paper_resources[p] {
            edges.push(Edge {
                src: id.clone(),
                edge_type: EdgeType::Resource,
                dst: oer_ids[o].clone(),
            });
        }
    }
    for (t, id) in topic_ids.iter().enumerate() {
        vertices.push(Vertex {
            id: id.clone(),
            kind: VertexKind::Topic,
            payload: vocab.topic_words[t].join(" "),
        });
        for &o in &topic_oers[t] {
            edges.push(Edge {
                src: id.clone(),
                edge_type: EdgeType::Related,
                dst: oer_ids[o].clone(),
            });
        }
    }
    for o in &oers {
        vertices.push(Vertex {
            id: o.oer_id.clone(),
            kind: VertexKind::Oer(o.oer_type),
            payload: o.title.clone(),
        });
    }
    let graph = HetGraph::new(vertices, edges)?;

    let paper_pool = (0..cfg.papers)
        .map(|p| {
            let mut pool: BTreeSet<usize> = paper_topics[p]
                .iter()
                .flat_map(|&t| topic_oers[t].iter().copied())
                .collect();
            pool.extend(paper_resources[p].iter().copied());
            pool.into_iter().collect()
        })
        .collect();
    Ok(World {
        graph,
        oers,
        paper_ids,
        paper_topics,
        topic_oers,
        paper_pool,
    })
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    vocab: &'a Vocab,
    world: &'a World,
    rng: ChaCha8Rng,
    events: Vec<ReadingEvent>,
    clock: i64,
}

impl Sim<'_> {
    fn next_event_id(&self) -> String {
        format!("e{:06}", self.events.len())
    }

    fn tick(&mut self) -> i64 {
        self.clock += 1000;
        self.clock
    }

    /// Community reading spot: a page and vertical band per (community, paper).
    fn location(&mut self, community: usize, paper: usize) -> (u32, BBox) {
        let (page, y) = if self.rng.random_bool(self.cfg.behavior_signal) {
            let page = ((community * 3 + paper) as u32) % PAGES;
            let band = (community as f64 + 0.5) / self.cfg.communities as f64;
            (page, (band + self.rng.random_range(-0.05..0.05)).clamp(0.05, 0.95))
        } else {
            (self.rng.random_range(0..PAGES), self.rng.random_range(0.05..0.95))
        };
        let x = self.rng.random_range(0.1..0.6);
        let h = 0.02;
        let bbox = BBox::new(x, y - h, x + 0.3, y + h).expect("inside the page");
        (page, bbox)
    }

    fn words(&mut self, community: usize, personal: &[String], topic: Option<usize>, n: usize) -> String {
        let mut out = Vec::with_capacity(n + 2);
        if let Some(t) = topic {
            out.extend(self.vocab.topic_words[t].choose_multiple(&mut self.rng, 2).cloned());
        }
        for _ in 0..n {
            let w = if self.rng.random_bool(self.cfg.behavior_signal) {
                self.vocab.community_words[community].choose(&mut self.rng)
            } else if !personal.is_empty() && self.rng.random_bool(0.5) {
                personal.choose(&mut self.rng)
            } else {
                self.vocab.general.choose(&mut self.rng)
            };
            out.push(w.expect("nonempty word list").clone());
        }
        out.join(" ")
    }

    #[allow(clippy::too_many_arguments)]
    fn push_event(
        &mut self,
        kind: EventKind,
        reader: &str,
        paper: usize,
        located: Option<(u32, BBox)>,
        quote_text: String,
        content_text: String,
        target: Option<String>,
        rating: Option<(String, Grade)>,
    ) -> String {
        let id = self.next_event_id();
        let ts = self.tick();
        let (page, bbox) = match located {
            Some((p, b)) => (p, Some(b)),
            None => (0, None),
        };
        self.events.push(ReadingEvent {
            event_id: id.clone(),
            kind,
            reader_id: reader.to_string(),
            paper_id: self.world.paper_ids[paper].clone(),
            page,
            bbox,
            quote_text,
            content_text,
            target_event_id: target,
            rating,
            timestamp: ts,
        });
        id
    }

    fn grade(&mut self, community: usize, oer: usize, topic: usize) -> Grade {
        if self.rng.random_bool(self.cfg.not_sure_rate) {
            return Grade::NotSure;
        }
        if self.rng.random_bool(self.cfg.grade_noise) {
            return *[Grade::Good, Grade::Ok, Grade::Bad].choose(&mut self.rng).expect("grades");
        }
        let preferred = self.world.oers[oer].oer_type == self.cfg.preferred_type(community);
        let on_topic = self.world.topic_oers[topic].contains(&oer);
        match (preferred, on_topic) {
            (true, true) => Grade::Good,
            (true, false) | (false, true) => Grade::Ok,
            (false, false) => Grade::Bad,
        }
    }
}

fn profile(cfg: &SimConfig, reader_id: &str, community: usize, rng: &mut ChaCha8Rng) -> ReaderProfile {
    let per = cfg.courses / cfg.communities;
    let own: Vec<usize> = (community * per..(community + 1) * per).collect();
    let take = COURSES_PER_READER.min(own.len());
    let mut chosen = BTreeSet::new();
    while chosen.len() < take {
        let c = if rng.random_bool(cfg.alpha) {
            *own.choose(rng).expect("course pool")
        } else {
            rng.random_range(0..cfg.courses)
        };
        chosen.insert(c);
    }
    let mut p = ReaderProfile::new(reader_id);
    p.courses = chosen.into_iter().map(|c| format!("c{c:02}")).collect();
    let per_skill = cfg.skills / cfg.communities;
    for s in 0..cfg.skills {
        let level = if rng.random_bool(cfg.alpha) {
            let own = s / per_skill.max(1) == community && s < per_skill * cfg.communities;
            if own {
                rng.random_range(3..=4)
            } else {
                rng.random_range(1..=2)
            }
        } else {
            rng.random_range(1..=4)
        };
        p.skills.insert(format!("s{s:02}"), level);
    }
    p
}

/// Generates a corpus, its graph and the planted labels.
pub fn generate_corpus(cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    if cfg.readers == 0 {
        return Ok(SimOutput {
            corpus: Corpus::default(),
            graph: HetGraph::new(Vec::new(), Vec::new())?,
            latent: LatentLabels::default(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let width = cfg.readers.to_string().len().max(3);
    let reader_ids: Vec<String> = (0..cfg.readers).map(|i| format!("r{i:0width$}")).collect();

    let mut labels: Vec<usize> = (0..cfg.readers).map(|i| i % cfg.communities).collect();
    labels.shuffle(&mut rng);
    let vocab = build_vocab(cfg);
    let world = build_world(cfg, &vocab, &mut rng)?;

    let mut readers = Vec::with_capacity(cfg.readers);
    let mut latent = LatentLabels::default();
    for (i, id) in reader_ids.iter().enumerate() {
        readers.push(profile(cfg, id, labels[i], &mut rng));
        latent.community.insert(id.clone(), labels[i]);
    }

    let mut sim = Sim {
        cfg,
        vocab: &vocab,
        world: &world,
        rng,
        events: Vec::new(),
        clock: 0,
    };
    let mut comments: Vec<Vec<String>> = vec![Vec::new(); cfg.readers];
    let mut queries = Vec::new();
    for (i, id) in reader_ids.iter().enumerate() {
        let c = labels[i];
        let personal: Vec<String> = vocab.general.choose_multiple(&mut sim.rng, 8).cloned().collect();
        let n_events = if cfg.events_per_reader > 0.0 {
            Poisson::new(cfg.events_per_reader).expect("positive mean").sample(&mut sim.rng) as usize
        } else {
            0
        };
        for k in 0..n_events.max(1) {
            let kind = if k == 0 {
                EventKind::Comment
            } else {
                *[EventKind::Quote, EventKind::Question, EventKind::Comment]
                    .choose(&mut sim.rng)
                    .expect("kinds")
            };
            let paper = sim.rng.random_range(0..cfg.papers);
            let topic = *world.paper_topics[paper].choose(&mut sim.rng).expect("paper topics");
            let loc = sim.location(c, paper);
            let quote = sim.words(c, &personal, Some(topic), QUOTE_TOKENS);
            let content = if kind == EventKind::Quote {
                String::new()
            } else {
                sim.words(c, &personal, None, QUOTE_TOKENS)
            };
            let e = sim.push_event(kind, id, paper, Some(loc), quote, content, None, None);
            if kind == EventKind::Comment {
                comments[i].push(e);
            }
        }

        for qn in 0..cfg.queries_per_reader {
            let paper = sim.rng.random_range(0..cfg.papers);
            let topic = *world.paper_topics[paper].choose(&mut sim.rng).expect("paper topics");
            let loc = sim.location(c, paper);
            let quote = sim.words(c, &personal, Some(topic), QUOTE_TOKENS - 2);
            sim.push_event(EventKind::Quote, id, paper, Some(loc), quote.clone(), String::new(), None, None);
            let pool = &world.paper_pool[paper];
            let mut cands: Vec<usize> = if pool.len() >= cfg.candidates_per_query {
                pool.choose_multiple(&mut sim.rng, cfg.candidates_per_query).copied().collect()
            } else {
                let mut v = pool.clone();
                let rest: Vec<usize> = (0..world.oers.len()).filter(|o| !pool.contains(o)).collect();
                v.extend(rest.choose_multiple(&mut sim.rng, cfg.candidates_per_query - pool.len()));
                v
            };
            cands.sort_unstable();
            let mut judgments = Vec::with_capacity(cands.len());
            for o in cands {
                let g = sim.grade(c, o, topic);
                let oer_id = world.oers[o].oer_id.clone();
                sim.push_event(
                    EventKind::Rating,
                    id,
                    paper,
                    None,
                    String::new(),
                    String::new(),
                    None,
                    Some((oer_id.clone(), g)),
                );
                judgments.push(Judgment { oer_id, grade: g });
            }
            queries.push(JudgedQuery {
                query_id: format!("q{i:0width$}-{qn:02}"),
                reader_id: id.clone(),
                paper_id: world.paper_ids[paper].clone(),
                quote_text: quote,
                judgments,
            });
        }
    }

    let p_out = (1.0 - cfg.alpha) * 0.2;
    let p_in = cfg.alpha + p_out;
    for a in 0..cfg.readers {
        for b in a + 1..cfg.readers {
            let p = if labels[a] == labels[b] { p_in } else { p_out };
            if !sim.rng.random_bool(p.clamp(0.0, 1.0)) {
                continue;
            }
            let (from, to) = if sim.rng.random_bool(0.5) { (a, b) } else { (b, a) };
            let target = comments[to].choose(&mut sim.rng).expect("one comment per reader").clone();
            let paper = {
                let t = sim.events.iter().find(|e| e.event_id == target).expect("target");
                world.paper_ids.iter().position(|p| *p == t.paper_id).expect("paper")
            };
            let content = sim.words(labels[from], &[], None, 3);
            sim.push_event(
                EventKind::Reply,
                &reader_ids[from],
                paper,
                None,
                String::new(),
                content,
                Some(target),
                None,
            );
        }
    }

    let events = sim.events;
    let corpus = Corpus::new(readers, events, world.oers.clone(), queries)?;
    Ok(SimOutput {
        corpus,
        graph: world.graph,
        latent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::community::pairwise_cluster_eval;
    use crate::corpus::validate_corpus;

    fn small() -> SimConfig {
        SimConfig {
            readers: 12,
            queries_per_reader: 2,
            seed: 4,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_streams() {
        let a = generate_corpus(&small()).unwrap();
        let b = generate_corpus(&small()).unwrap();
        assert_eq!(a.corpus.to_streams(), b.corpus.to_streams());
        assert_eq!(a.graph.edges_tsv(), b.graph.edges_tsv());
        assert_eq!(a.latent, b.latent);
    }

    #[test]
    fn zero_readers_is_empty() {
        let out = generate_corpus(&SimConfig { readers: 0, ..Default::default() }).unwrap();
        assert!(out.corpus.readers().is_empty());
        assert!(out.corpus.events().is_empty());
    }

    #[test]
    fn generated_corpus_is_consistent() {
        let out = generate_corpus(&small()).unwrap();
        assert!(validate_corpus(&out.corpus).is_consistent());
        assert_eq!(out.corpus.queries().len(), 24);
        let counts: Vec<usize> = (0..3)
            .map(|c| out.latent.community.values().filter(|&&x| x == c).count())
            .collect();
        assert_eq!(counts, vec![4, 4, 4]);
    }

    #[test]
    fn separated_communities_form_reply_blocks() {
        let cfg = SimConfig {
            alpha: 1.0,
            grade_noise: 0.0,
            ..small()
        };
        let out = generate_corpus(&cfg).unwrap();
        let pairs = out.corpus.reply_pairs();
        for (a, b) in &pairs {
            assert_eq!(out.latent.community[a], out.latent.community[b]);
        }
        assert_eq!(pairs.len(), 3 * 6);
        let s = pairwise_cluster_eval(&out.latent.community, &pairs).unwrap();
        assert_eq!(s.f1, 1.0);
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(generate_corpus(&SimConfig { alpha: 1.5, ..Default::default() }).is_err());
        assert!(generate_corpus(&SimConfig { vocab_size: 10, ..Default::default() }).is_err());
    }

    #[test]
    fn latent_tsv_round_trip() {
        let out = generate_corpus(&small()).unwrap();
        assert_eq!(LatentLabels::from_tsv(&out.latent.to_tsv()).unwrap(), out.latent.community);
    }
}
