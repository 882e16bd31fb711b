//! One function per subcommand. Steps exchange data through files in the
//! output directory, so each can be run on its own or chained by `pipeline`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use commrec::community::{
    assign_communities, cluster_profiled, kmedoids, train_community_classifier, AssignmentSource,
    CommunityAssignment, CommunityModel, MaxEntModel,
};
use commrec::corpus::{validate_corpus, Corpus, ValidationReport, JUDGMENTS_FILE, OERS_FILE};
use commrec::eval::{cross_validate_ranking, simulate_missing_rpf, CvSettings, MissingRpfSettings};
use commrec::features::{build_feature_matrix, combine_groups, FeatureMatrix, LocationModels};
use commrec::hetgraph::{
    extract_rank_features, feature_names, parse_metapaths, HetGraph, MetaPath, QueryContext, TextIndex,
    VertexType, EDGES_FILE, VERTICES_FILE,
};
use commrec::ranker::{rank, train_communitized, CommunityRankerSet, Ranked, RankingDataset, RankingModel};
use commrec::seed;
use commrec::simgen::{generate_corpus, LATENT_FILE};
use commrec::workflow::{build_rank_dataset, physical_collaboration, CommunitySummary, DatasetStats, ExperimentReport};
use serde::{Deserialize, Serialize};

use crate::artifact::{read_json, read_text, Outputs};
use crate::config::RunConfig;

pub const VALIDATION_FILE: &str = "validation.json";
pub const FEATURES_FILE: &str = "features.json";
pub const CLUSTERING_FILE: &str = "clustering.json";
pub const CLASSIFIER_FILE: &str = "classifier.json";
pub const COMMUNITIES_FILE: &str = "communities.tsv";
pub const GRAPH_FILE: &str = "graph.json";
pub const RANKFEATURES_FILE: &str = "rankfeatures.json";
pub const RANKERS_FILE: &str = "rankers.json";
pub const RECOMMENDATIONS_FILE: &str = "recommendations.json";
pub const REPORT_FILE: &str = "report.json";

pub struct Run {
    pub cfg: RunConfig,
    pub seed: u64,
    pub corpus_dir: PathBuf,
    pub graph_dir: PathBuf,
    pub out: Outputs,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IngestSummary {
    pub readers: usize,
    pub readers_with_profile: usize,
    pub events: usize,
    pub oers: usize,
    pub queries: usize,
    pub judgments: usize,
    pub warnings: Vec<String>,
    pub validation: ValidationReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeatureArtifact {
    pub matrix: FeatureMatrix,
    pub locations: LocationModels,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GraphSummary {
    pub vertices: BTreeMap<VertexType, usize>,
    pub edges: usize,
    pub metapaths: Vec<MetaPath>,
    /// Corpus OERs with no vertex in the graph.
    pub missing_oers: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RankFeatureArtifact {
    pub stats: DatasetStats,
    pub dataset: RankingDataset,
}

/// Index of the trained rankers; model files are relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerIndex {
    pub feature_names: Vec<String>,
    pub min_queries: usize,
    pub global: Option<String>,
    pub models: BTreeMap<usize, String>,
    pub fallback: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Recommendation {
    pub paper_id: String,
    pub quote: String,
    pub reader_id: Option<String>,
    pub community: Option<usize>,
    pub model: String,
    pub ranked: Vec<Ranked>,
}

#[derive(Debug, Clone, Default)]
pub struct RecommendRequest {
    pub paper: String,
    pub quote: String,
    pub reader: Option<String>,
    pub community: Option<usize>,
    pub candidates: Option<Vec<String>>,
    pub top: Option<usize>,
}

impl Run {
    fn corpus(&self) -> Result<Corpus> {
        Corpus::read_dir(&self.corpus_dir).with_context(|| format!("loading corpus from {}", self.corpus_dir.display()))
    }

    fn graph(&self) -> Result<HetGraph> {
        let v = read_text(&self.graph_dir.join(VERTICES_FILE))?;
        let e = read_text(&self.graph_dir.join(EDGES_FILE))?;
        HetGraph::parse_tsv(&v, &e).context("loading graph")
    }

    fn artifact<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<T> {
        read_json(&self.out.path(name)).with_context(|| format!("`{name}` is missing or invalid; run the step that writes it first"))
    }

    fn assignment(&self) -> Result<CommunityAssignment> {
        let text = read_text(&self.out.path(COMMUNITIES_FILE))?;
        Ok(CommunityAssignment::from_tsv(&text)?)
    }

    fn metapaths(&self) -> Result<Vec<MetaPath>> {
        match &self.cfg.metapaths {
            Some(p) => Ok(parse_metapaths(&read_text(p)?)?),
            None => Ok(self.cfg.experiment.metapaths()),
        }
    }
}

pub fn simulate(run: &mut Run) -> Result<String> {
    let mut sim = run.cfg.simulation.clone();
    sim.seed = seed::derive(run.seed, "simulate");
    let out = generate_corpus(&sim)?;
    let s = out.corpus.to_streams();
    run.out.text(commrec::corpus::READERS_FILE, &s.readers)?;
    run.out.text(commrec::corpus::EVENTS_FILE, &s.events)?;
    run.out.text(OERS_FILE, &s.oers)?;
    run.out.text(JUDGMENTS_FILE, &s.judgments)?;
    run.out.text(VERTICES_FILE, &out.graph.vertices_tsv())?;
    run.out.text(EDGES_FILE, &out.graph.edges_tsv())?;
    run.out.text(LATENT_FILE, &out.latent.to_tsv())?;
    Ok(format!(
        "simulated {} readers, {} events, {} OERs, {} queries",
        out.corpus.readers().len(),
        out.corpus.events().len(),
        out.corpus.oers().len(),
        out.corpus.queries().len()
    ))
}

pub fn ingest(run: &mut Run) -> Result<String> {
    let corpus = run.corpus()?;
    let validation = validate_corpus(&corpus);
    for w in corpus.warnings() {
        log::warn!("{w}");
    }
    let summary = IngestSummary {
        readers: corpus.readers().len(),
        readers_with_profile: corpus.readers().iter().filter(|r| r.has_rpf()).count(),
        events: corpus.events().len(),
        oers: corpus.oers().len(),
        queries: corpus.queries().len(),
        judgments: corpus.queries().iter().map(|q| q.judgments.len()).sum(),
        warnings: corpus.warnings().to_vec(),
        validation,
    };
    run.out.json(VALIDATION_FILE, &summary)?;
    Ok(format!(
        "ingested {} readers ({} with profile), {} events, {} queries; {} consistency issues",
        summary.readers,
        summary.readers_with_profile,
        summary.events,
        summary.queries,
        summary.validation.issues.len()
    ))
}

pub fn featurize(run: &mut Run) -> Result<String> {
    let corpus = run.corpus()?;
    let (matrix, locations) =
        build_feature_matrix(&corpus, &run.cfg.experiment.features, seed::derive(run.seed, "features"))?;
    let msg = format!(
        "featurized {} readers over {} groups ({} columns)",
        matrix.reader_ids.len(),
        matrix.groups.len(),
        matrix.groups.iter().map(|g| g.dim()).sum::<usize>()
    );
    run.out.json(FEATURES_FILE, &FeatureArtifact { matrix, locations })?;
    Ok(msg)
}

pub fn cluster(run: &mut Run) -> Result<String> {
    let fa: FeatureArtifact = run.artifact(FEATURES_FILE)?;
    let settings = &run.cfg.experiment.communities;
    let s = seed::derive(run.seed, "cluster");
    let model = if fa.matrix.has_rpf.iter().any(|&h| h) {
        cluster_profiled(&fa.matrix, settings, s)?
    } else {
        log::warn!("no reader has profile features; clustering on behavior features");
        let u = combine_groups(&fa.matrix, &settings.rbf_groups)?;
        let mut m = kmedoids(&u.reader_ids, &u.vectors, settings.k, settings.distance, s)?;
        m.source_groups = u.groups();
        m
    };
    run.out.json(CLUSTERING_FILE, &model)?;
    Ok(format!(
        "clustered {} readers into {} communities (cost {:.4})",
        model.assignment.len(),
        model.k,
        model.cost
    ))
}

fn clustered_on_profiles(model: &CommunityModel) -> bool {
    model.source_groups.iter().any(|g| g.is_rpf())
}

pub fn train_classifier(run: &mut Run) -> Result<String> {
    let fa: FeatureArtifact = run.artifact(FEATURES_FILE)?;
    let clustering: CommunityModel = run.artifact(CLUSTERING_FILE)?;
    let classifier: Option<MaxEntModel> = if clustered_on_profiles(&clustering) {
        Some(train_community_classifier(&fa.matrix, &clustering, &run.cfg.experiment.communities)?)
    } else {
        None
    };
    run.out.json(CLASSIFIER_FILE, &classifier)?;
    Ok(match &classifier {
        Some(m) => format!(
            "trained the community classifier on {} readers ({} iterations)",
            clustering.assignment.len(),
            m.convergence.iterations
        ),
        None => "every reader was clustered on behavior; no classifier needed".into(),
    })
}

pub fn assign(run: &mut Run) -> Result<String> {
    let fa: FeatureArtifact = run.artifact(FEATURES_FILE)?;
    let clustering: CommunityModel = run.artifact(CLUSTERING_FILE)?;
    let classifier: Option<MaxEntModel> = if run.out.path(CLASSIFIER_FILE).exists() {
        run.artifact(CLASSIFIER_FILE)?
    } else {
        None
    };
    let (assignment, empty) =
        assign_communities(&fa.matrix, &clustering, classifier.as_ref(), &run.cfg.experiment.communities)?;
    run.out.text(COMMUNITIES_FILE, &assignment.to_tsv())?;
    let predicted = assignment
        .entries
        .values()
        .filter(|(_, s)| *s == AssignmentSource::Predicted)
        .count();
    Ok(format!(
        "assigned {} readers ({} predicted, {} without behavior)",
        assignment.entries.len(),
        predicted,
        empty.len()
    ))
}

pub fn graph_build(run: &mut Run) -> Result<String> {
    let graph = run.graph()?;
    let metapaths = run.metapaths()?;
    for m in &metapaths {
        m.validate()?;
    }
    let missing_oers = match run.corpus() {
        Ok(c) => c
            .oers()
            .iter()
            .filter(|o| graph.vertex(&o.oer_id).is_none())
            .map(|o| o.oer_id.clone())
            .collect(),
        Err(e) => {
            log::warn!("corpus not checked against the graph: {e:#}");
            Vec::new()
        }
    };
    let summary = GraphSummary {
        vertices: [VertexType::Paper, VertexType::Topic, VertexType::Oer]
            .into_iter()
            .map(|t| (t, graph.count(t)))
            .collect(),
        edges: graph.edges().len(),
        metapaths,
        missing_oers,
    };
    run.out.json(GRAPH_FILE, &summary)?;
    Ok(format!(
        "graph has {} vertices, {} edges; {} meta-paths",
        graph.vertices().len(),
        summary.edges,
        summary.metapaths.len()
    ))
}

pub fn rankfeat(run: &mut Run) -> Result<String> {
    let corpus = run.corpus()?;
    let graph = run.graph()?;
    let gs: GraphSummary = run.artifact(GRAPH_FILE)?;
    let exp = &run.cfg.experiment;
    let (dataset, stats) = build_rank_dataset(&corpus, &graph, &gs.metapaths, &exp.text, &exp.features.tokenizer)?;
    let msg = format!(
        "extracted {} features for {} judgments in {} queries ({} not-sure dropped)",
        dataset.feature_names.len(),
        stats.judgments,
        stats.queries,
        stats.not_sure_dropped
    );
    run.out.json(RANKFEATURES_FILE, &RankFeatureArtifact { stats, dataset })?;
    Ok(msg)
}

fn ranker_params(run: &Run) -> commrec::ranker::RankerParams {
    let mut p = run.cfg.experiment.ranker.clone();
    p.ca.seed = seed::derive(run.seed, "ranker");
    p
}

pub fn train_ranker(run: &mut Run) -> Result<String> {
    let rf: RankFeatureArtifact = run.artifact(RANKFEATURES_FILE)?;
    let assignment = run.assignment()?.labels();
    let set = train_communitized(&rf.dataset, &assignment, &ranker_params(run))?;
    let mut index = RankerIndex {
        feature_names: rf.dataset.feature_names.clone(),
        min_queries: set.min_queries,
        global: None,
        models: BTreeMap::new(),
        fallback: set.fallback.clone(),
    };
    if let Some(g) = &set.global {
        let name = "models/global.json".to_string();
        run.out.json(&name, g)?;
        index.global = Some(name);
    }
    for (c, m) in &set.models {
        let name = format!("models/community-{c}.json");
        run.out.json(&name, m)?;
        index.models.insert(*c, name);
    }
    run.out.json(RANKERS_FILE, &index)?;
    Ok(format!(
        "trained the global ranker and {} community rankers; {} communities fall back",
        set.models.len(),
        set.fallback.len()
    ))
}

fn load_rankers(run: &Run) -> Result<CommunityRankerSet> {
    let index: RankerIndex = run.artifact(RANKERS_FILE)?;
    let load = |name: &String| -> Result<RankingModel> { read_json(&run.out.path(name)) };
    Ok(CommunityRankerSet {
        models: index
            .models
            .iter()
            .map(|(c, n)| Ok((*c, load(n)?)))
            .collect::<Result<_>>()?,
        global: index.global.as_ref().map(load).transpose()?,
        min_queries: index.min_queries,
        fallback: index.fallback,
    })
}

pub fn recommend(run: &mut Run, req: &RecommendRequest) -> Result<String> {
    let set = load_rankers(run)?;
    let community = match (req.community, &req.reader) {
        (Some(c), _) => Some(c),
        (None, Some(r)) => {
            let a = run.assignment()?;
            let c = a.community(r);
            if c.is_none() {
                log::warn!("reader `{r}` has no community; using the global model");
            }
            c
        }
        (None, None) => None,
    };
    let model = set.resolve(community)?;
    let corpus = run.corpus()?;
    let graph = run.graph()?;
    let gs: GraphSummary = run.artifact(GRAPH_FILE)?;
    let candidates: Vec<String> = match &req.candidates {
        Some(c) => c.clone(),
        None => graph
            .vertices()
            .iter()
            .filter(|v| v.kind.vertex_type() == VertexType::Oer)
            .map(|v| v.id.clone())
            .collect(),
    };
    if candidates.is_empty() {
        bail!("no candidate OERs to rank");
    }
    let exp = &run.cfg.experiment;
    let index = TextIndex::build(corpus.oers(), &exp.features.tokenizer);
    let ctx = QueryContext {
        paper_id: req.paper.clone(),
        quote_text: req.quote.clone(),
    };
    let vectors = extract_rank_features(&graph, &index, &ctx, &candidates, &gs.metapaths, &exp.text)?;
    let mut ranked = rank(model, &feature_names(&gs.metapaths), &vectors)?;
    if let Some(n) = req.top {
        ranked.truncate(n);
    }
    let rec = Recommendation {
        paper_id: req.paper.clone(),
        quote: req.quote.clone(),
        reader_id: req.reader.clone(),
        community,
        model: model.community.clone(),
        ranked,
    };
    run.out.json(RECOMMENDATIONS_FILE, &rec)?;
    let mut msg = format!("ranked {} OERs with the {} model", rec.ranked.len(), rec.model);
    for (i, r) in rec.ranked.iter().enumerate() {
        msg.push_str(&format!("\n{}\t{}\t{:.6}", i + 1, r.oer_id, r.score));
    }
    Ok(msg)
}

pub fn evaluate(run: &mut Run) -> Result<String> {
    let corpus = run.corpus()?;
    let fa: FeatureArtifact = run.artifact(FEATURES_FILE)?;
    let clustering: CommunityModel = run.artifact(CLUSTERING_FILE)?;
    let rf: RankFeatureArtifact = run.artifact(RANKFEATURES_FILE)?;
    let assignment = run.assignment()?;
    let labels = assignment.labels();
    let exp = &run.cfg.experiment;

    let mut sizes = BTreeMap::new();
    for &c in labels.values() {
        *sizes.entry(c).or_insert(0) += 1;
    }
    let collaboration = physical_collaboration(
        &fa.matrix,
        &corpus.reply_pairs(),
        &exp.collaboration_sets,
        exp.communities.k,
        exp.communities.distance,
        seed::derive(run.seed, "collaboration"),
    )?;
    let cv_settings = CvSettings {
        folds: exp.folds,
        seed: seed::derive(run.seed, "cv"),
        ranker: ranker_params(run),
        ..Default::default()
    };
    let cv = cross_validate_ranking(&rf.dataset, &labels, &cv_settings)?;
    let missing_rpf = if !fa.matrix.reader_ids.is_empty() && fa.matrix.has_rpf.iter().all(|&h| h) {
        let ms = MissingRpfSettings {
            fraction: exp.missing_fraction,
            folds: exp.missing_folds,
            seed: seed::derive(run.seed, "missing-rpf"),
            two_step: exp.communities.clone(),
            cv: cv_settings.clone(),
        };
        Some(simulate_missing_rpf(&fa.matrix, &rf.dataset, &ms)?)
    } else {
        log::info!("some readers have no profile; skipping the missing-profile simulation");
        None
    };

    let report = ExperimentReport {
        seed: run.seed,
        dataset: rf.stats,
        feature_names: rf.dataset.feature_names.clone(),
        communities: CommunitySummary {
            k: clustering.k,
            medoids: clustering.medoids.clone(),
            cost: clustering.cost,
            sizes,
            predicted_readers: assignment
                .entries
                .values()
                .filter(|(_, s)| *s == AssignmentSource::Predicted)
                .count(),
        },
        collaboration,
        cross_validation: cv,
        missing_rpf,
    };
    run.out.json(REPORT_FILE, &report)?;

    let mut msg = String::new();
    for (name, r) in [("communitized", &report.cross_validation.communitized), ("global", &report.cross_validation.global)] {
        let means: Vec<String> = r.means.iter().map(|(m, v)| format!("{m}={v:.4}")).collect();
        msg.push_str(&format!("{name}: {}\n", means.join(" ")));
    }
    let st = &report.cross_validation.sign_test;
    msg.push_str(&format!(
        "sign test: {} wins, {} losses, {} ties, p={:.4}",
        st.wins, st.losses, st.ties, st.p_two_sided
    ));
    if let Some(m) = &report.missing_rpf {
        if let Some(acc) = m.accuracy {
            msg.push_str(&format!("\nmissing-profile assignment accuracy: {acc:.4}"));
        }
    }
    for row in &report.collaboration {
        msg.push_str(&format!("\nclusters on {}: pairwise F1 {:.4}", row.features, row.scores.f1));
    }
    Ok(msg)
}

/// Simulates a corpus when none is configured, then runs every step in order.
pub fn pipeline(run: &mut Run, simulate_first: bool) -> Result<String> {
    let mut lines = Vec::new();
    if simulate_first {
        lines.push(simulate(run)?);
    }
    let steps: [fn(&mut Run) -> Result<String>; 9] = [
        ingest,
        featurize,
        cluster,
        train_classifier,
        assign,
        graph_build,
        rankfeat,
        train_ranker,
        evaluate,
    ];
    for step in steps {
        lines.push(step(run)?);
    }
    Ok(lines.join("\n"))
}
