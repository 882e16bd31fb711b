//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! per criterion and exits nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use commrec::community::{
    cluster_profiled, kmedoids, train_maxent, two_step, Distance, TwoStepSettings,
};
use commrec::community::maxent::MaxEntProblem;
use commrec::corpus::OerType;
use commrec::eval::{
    average_precision, cross_validate_ranking, ndcg_at_k, reciprocal_rank, simulate_missing_rpf, CvSettings,
    Metric, MissingRpfSettings,
};
use commrec::features::build_feature_matrix;
use commrec::hetgraph::{
    default_metapaths, metapath_score, Edge, EdgeType, HetGraph, MetaPath, Step, TextParams, Vertex, VertexKind,
    VertexType,
};
use commrec::ranker::{
    coordinate_ascent_train, CoordinateAscentParams, RankCandidate, RankQuery, RankerParams, RankingDataset,
};
use commrec::seed;
use commrec::simgen::{generate_corpus, SimConfig};
use commrec::text::TokenizerSettings;
use commrec::workflow::{build_rank_dataset, physical_collaboration};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, title: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = limit.is_none_or(|l| took <= l);
    let pass = out.pass && in_time;
    let budget = limit.map_or(String::new(), |l| format!(" / limit {:.0}s", l.as_secs_f64()));
    println!(
        "criterion {id} [{}] {title}: {} ({:.2}s{budget})",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64()
    );
    pass
}

// ---------------------------------------------------------------------------
// 1. Metrics against brute force
// ---------------------------------------------------------------------------

fn permutations(items: &[u8]) -> Vec<Vec<u8>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

fn oracle_dcg(list: &[u8], k: usize) -> f64 {
    let mut s = 0.0;
    for (pos, &g) in list.iter().enumerate().take(k) {
        s += g as f64 / (pos as f64 + 2.0).ln() * std::f64::consts::LN_2;
    }
    s
}

/// Ideal DCG as the maximum over every ordering; distinct permutations only
/// for lists up to 7 long, sorting above that.
fn oracle_ndcg(list: &[u8], k: usize) -> Option<f64> {
    let ideal = if list.len() <= 7 {
        permutations(list)
            .iter()
            .map(|p| oracle_dcg(p, k))
            .fold(0.0, f64::max)
    } else {
        let mut s = list.to_vec();
        s.sort_by(|a, b| b.cmp(a));
        oracle_dcg(&s, k)
    };
    (ideal > 0.0).then(|| oracle_dcg(list, k) / ideal)
}

fn oracle_ap(list: &[u8], k: usize) -> f64 {
    let rel: Vec<bool> = list.iter().map(|&g| g > 0).collect();
    let r = rel.iter().filter(|&&b| b).count();
    let denom = r.min(k);
    if denom == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..list.len().min(k) {
        if rel[i] {
            let prec = rel[..=i].iter().filter(|&&b| b).count() as f64 / (i + 1) as f64;
            total += prec;
        }
    }
    total / denom as f64
}

fn oracle_rr(list: &[u8]) -> f64 {
    for (i, &g) in list.iter().enumerate() {
        if g > 0 {
            return 1.0 / (i + 1) as f64;
        }
    }
    0.0
}

fn criterion_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut mismatches = 0;
    for _ in 0..1000 {
        let len = rng.random_range(1..=10);
        let list: Vec<u8> = (0..len).map(|_| rng.random_range(0..=2)).collect();
        for k in [Some(1), Some(3), Some(5), Some(10), None] {
            let kk = k.unwrap_or(len);
            match (ndcg_at_k(&list, k), oracle_ndcg(&list, kk)) {
                (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                (None, None) => {}
                _ => mismatches += 1,
            }
            worst = worst.max((average_precision(&list, k) - oracle_ap(&list, kk)).abs());
        }
        worst = worst.max((reciprocal_rank(&list) - oracle_rr(&list)).abs());
    }
    let hand = ndcg_at_k(&[0, 2, 1], Some(3)).unwrap_or(f64::NAN);
    let hand_oracle = oracle_ndcg(&[0, 2, 1], 3).unwrap_or(f64::NAN);
    let pass = worst <= 1e-12
        && mismatches == 0
        && (hand - hand_oracle).abs() <= 1e-12
        && (hand - 0.66975).abs() < 1e-4;
    Outcome {
        pass,
        detail: format!(
            "max |diff| {worst:.2e} over 1000 lists, {mismatches} definedness mismatches; nDCG([0,2,1],3) = {hand:.6} (stated 0.66975)"
        ),
    }
}

// ---------------------------------------------------------------------------
// 2. Meta-path walks against tour enumeration
// ---------------------------------------------------------------------------

const OER_TYPES: [OerType; 4] = [OerType::Video, OerType::Slides, OerType::Wiki, OerType::Code];

fn random_graph(rng: &mut ChaCha8Rng) -> HetGraph {
    let n = rng.random_range(3..=50);
    let mut vertices = Vec::new();
    for i in 0..n {
        let kind = match rng.random_range(0..3) {
            0 => VertexKind::Paper,
            1 => VertexKind::Topic,
            _ => VertexKind::Oer(OER_TYPES[rng.random_range(0..4)]),
        };
        vertices.push(Vertex {
            id: format!("v{i:02}"),
            kind,
            payload: String::new(),
        });
    }
    let density: f64 = rng.random_range(0.05..0.4);
    let mut edges = Vec::new();
    for a in &vertices {
        for b in &vertices {
            for e in EdgeType::ALL {
                let (s, d) = e.endpoints();
                if a.kind.vertex_type() == s && b.kind.vertex_type() == d && a.id != b.id && rng.random_bool(density) {
                    edges.push(Edge {
                        src: a.id.clone(),
                        edge_type: e,
                        dst: b.id.clone(),
                    });
                }
            }
        }
    }
    HetGraph::new(vertices, edges).expect("valid graph")
}

fn random_path(rng: &mut ChaCha8Rng) -> MetaPath {
    let len = rng.random_range(1..=4);
    let mut at = if rng.random_bool(0.5) { VertexType::Paper } else { VertexType::Topic };
    let mut steps = Vec::new();
    for i in 0..len {
        let options: Vec<EdgeType> = EdgeType::ALL
            .into_iter()
            .filter(|e| e.endpoints().0 == at)
            .filter(|e| i + 1 == len || e.endpoints().1 != VertexType::Oer)
            .collect();
        let e = options[rng.random_range(0..options.len())];
        let to = e.endpoints().1;
        steps.push(if to == VertexType::Oer && rng.random_bool(0.5) {
            Step::oer(e, OER_TYPES[rng.random_range(0..4)])
        } else {
            Step::new(e, to)
        });
        at = to;
    }
    MetaPath::new(steps).expect("valid path")
}

fn qualifies(v: &Vertex, step: &Step) -> bool {
    v.kind.vertex_type() == step.to && step.oer_type.is_none_or(|t| v.kind.oer_type() == Some(t))
}

/// Enumerates every tour; each tour's probability is the product of uniform
/// choices among qualifying out-edges.
fn enumerate_tours(
    g: &HetGraph,
    at: &str,
    steps: &[Step],
    p: f64,
    scores: &mut BTreeMap<String, f64>,
    absorbed: &mut f64,
) {
    let Some(step) = steps.first() else {
        *scores.entry(at.to_string()).or_insert(0.0) += p;
        return;
    };
    let next: Vec<&Edge> = g
        .edges()
        .iter()
        .filter(|e| e.src == at && e.edge_type == step.edge && qualifies(g.vertex(&e.dst).unwrap(), step))
        .collect();
    if next.is_empty() {
        *absorbed += p;
        return;
    }
    for e in &next {
        enumerate_tours(g, &e.dst, &steps[1..], p / next.len() as f64, scores, absorbed);
    }
}

fn criterion_walks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut worst_sum = 0.0f64;
    let mut done = 0;
    let mut errors = 0;
    while done < 100 {
        let g = random_graph(&mut rng);
        let path = random_path(&mut rng);
        let src = path.source_type().unwrap();
        let mut candidates: Vec<&Vertex> = g.vertices().iter().filter(|v| v.kind.vertex_type() == src).collect();
        if candidates.is_empty() {
            continue;
        }
        candidates.shuffle(&mut rng);
        let take = rng.random_range(1..=candidates.len().min(3));
        let starts: Vec<&str> = candidates[..take].iter().map(|v| v.id.as_str()).collect();
        let Ok(walk) = metapath_score(&g, &starts, &path) else {
            errors += 1;
            done += 1;
            continue;
        };
        let mut scores = BTreeMap::new();
        let mut absorbed = 0.0;
        for s in &starts {
            enumerate_tours(&g, s, &path.steps, 1.0 / starts.len() as f64, &mut scores, &mut absorbed);
        }
        let ids: BTreeSet<&String> = scores.keys().chain(walk.scores.keys()).collect();
        for id in ids {
            let a = walk.scores.get(id).copied().unwrap_or(0.0);
            let b = scores.get(id).copied().unwrap_or(0.0);
            worst = worst.max((a - b).abs());
        }
        worst = worst.max((walk.absorbed - absorbed).abs());
        worst_sum = worst_sum.max((walk.total() + walk.absorbed - 1.0).abs());
        done += 1;
    }
    Outcome {
        pass: worst <= 1e-12 && worst_sum <= 1e-12 && errors == 0,
        detail: format!("max |diff| {worst:.2e}, max |sum+absorbed-1| {worst_sum:.2e}, {errors} errors over 100 graphs"),
    }
}

// ---------------------------------------------------------------------------
// 3. K-medoids against exhaustive search
// ---------------------------------------------------------------------------

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

fn criterion_kmedoids() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut misses = 0;
    let mut worst_gap = 0.0f64;
    for inst in 0..50 {
        let n = rng.random_range(3..=9);
        let k = rng.random_range(1..=3usize.min(n));
        let dim = rng.random_range(1..=3);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let distance = if inst % 2 == 0 { Distance::Euclidean } else { Distance::Manhattan };
        let ids: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        let model = kmedoids(&ids, &pts, k, distance, inst as u64).expect("clusterable");
        let optimum = subsets(n, k)
            .iter()
            .map(|m| {
                pts.iter()
                    .map(|p| m.iter().map(|&c| distance.eval(p, &pts[c])).fold(f64::INFINITY, f64::min))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        let gap = model.cost - optimum;
        worst_gap = worst_gap.max(gap);
        if gap > 1e-9 * optimum.max(1.0) {
            misses += 1;
        }
    }
    Outcome {
        pass: misses == 0,
        detail: format!("{misses} of 50 instances above the exhaustive optimum (largest gap {worst_gap:.2e})"),
    }
}

// ---------------------------------------------------------------------------
// 4. MaxEnt gradient and priors
// ---------------------------------------------------------------------------

fn criterion_maxent() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_rel = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(5..30);
        let dim = rng.random_range(1..6);
        let k = rng.random_range(2..5);
        let features: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let problem = MaxEntProblem {
            features: &features,
            targets: (0..n).map(|_| rng.random_range(0..k)).collect(),
            n_classes: k,
            dim,
            lambda: rng.random_range(0.0..2.0),
        };
        let params: Vec<f64> = (0..problem.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grad = problem.gradient(&params);
        let h = 1e-5;
        let mut max_diff = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..params.len() {
            let mut up = params.clone();
            let mut down = params.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (problem.objective(&up) - problem.objective(&down)) / (2.0 * h);
            max_diff = max_diff.max((fd - grad[i]).abs());
            scale = scale.max(fd.abs()).max(grad[i].abs());
        }
        worst_rel = worst_rel.max(max_diff / scale.max(f64::MIN_POSITIVE));
    }

    let labels: Vec<usize> = [0, 0, 0, 1, 1, 2, 2, 2, 2, 2].to_vec();
    let x = vec![vec![0.7, -1.3, 2.0]; labels.len()];
    let mut worst_prior = f64::INFINITY;
    if let Ok(model) = train_maxent(&x, &labels, 1.0) {
        if let Ok(pred) = model.predict(&x[0]) {
            worst_prior = model
                .classes
                .iter()
                .zip(&pred.probabilities)
                .map(|(c, p)| (p - labels.iter().filter(|&&l| l == *c).count() as f64 / labels.len() as f64).abs())
                .fold(0.0, f64::max);
        }
    }
    Outcome {
        pass: worst_rel < 1e-6 && worst_prior <= 1e-6,
        detail: format!("max relative gradient error {worst_rel:.2e} over 20 instances; prior error {worst_prior:.2e}"),
    }
}

// ---------------------------------------------------------------------------
// 5. Coordinate ascent against the angle grid
// ---------------------------------------------------------------------------

/// nDCG@3 with candidates ordered by descending score, ties by ascending id.
fn oracle_query_ndcg3(q: &RankQuery, score: impl Fn(&[f64]) -> f64) -> f64 {
    let mut idx: Vec<usize> = (0..q.candidates.len()).collect();
    let s: Vec<f64> = q.candidates.iter().map(|c| score(&c.features)).collect();
    idx.sort_by(|&a, &b| {
        s[b].partial_cmp(&s[a])
            .unwrap()
            .then_with(|| q.candidates[a].oer_id.cmp(&q.candidates[b].oer_id))
    });
    let ranked: Vec<u8> = idx.iter().map(|&i| q.candidates[i].grade).collect();
    let mut ideal = ranked.clone();
    ideal.sort_by(|a, b| b.cmp(a));
    let best = oracle_dcg(&ideal, 3);
    if best > 0.0 {
        oracle_dcg(&ranked, 3) / best
    } else {
        0.0
    }
}

fn mean_ndcg3(ds: &RankingDataset, score: impl Fn(&[f64]) -> f64 + Copy) -> f64 {
    ds.queries.iter().map(|q| oracle_query_ndcg3(q, score)).sum::<f64>() / ds.queries.len() as f64
}

/// Two uniform features per candidate; grades follow each query's order on a
/// noisy planted direction (top candidate Good, next two OK, rest Bad).
fn two_feature_problem(rng: &mut ChaCha8Rng) -> RankingDataset {
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (a, b) = (theta.cos(), theta.sin());
    let queries = (0..30)
        .map(|qi| {
            let features: Vec<Vec<f64>> = (0..6)
                .map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
                .collect();
            let latent: Vec<f64> = features
                .iter()
                .map(|f| a * f[0] + b * f[1] + rng.random_range(-0.3..0.3))
                .collect();
            let mut order: Vec<usize> = (0..features.len()).collect();
            order.sort_by(|&i, &j| latent[j].partial_cmp(&latent[i]).unwrap());
            let mut grades = vec![0u8; features.len()];
            for (pos, &i) in order.iter().enumerate() {
                grades[i] = match pos {
                    0 => 2,
                    1 | 2 => 1,
                    _ => 0,
                };
            }
            RankQuery {
                query_id: format!("q{qi:02}"),
                reader_id: "r".into(),
                candidates: features
                    .into_iter()
                    .zip(grades)
                    .enumerate()
                    .map(|(ci, (features, grade))| RankCandidate {
                        oer_id: format!("o{ci}"),
                        features,
                        grade,
                    })
                    .collect(),
            }
        })
        .collect();
    RankingDataset {
        feature_names: vec!["f0".into(), "f1".into()],
        queries,
    }
}

/// Largest |trained - grid| nDCG@3 over the 20 problems and the number of
/// accepted steps that lowered the training metric.
fn coordinate_ascent_gap(restarts: usize) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut decreasing = 0;
    for p in 0..20 {
        let ds = two_feature_problem(&mut rng);
        let params = CoordinateAscentParams {
            seed: p,
            restarts,
            ..Default::default()
        };
        let (model, trace) = coordinate_ascent_train(&ds, &params, "global").expect("trainable");
        let trained = mean_ndcg3(&ds, |x| model.score(x));
        let grid = (0..721)
            .map(|i| {
                let t = -std::f64::consts::PI + i as f64 * std::f64::consts::TAU / 720.0;
                let (c, s) = (t.cos(), t.sin());
                mean_ndcg3(&ds, move |x| c * x[0] + s * x[1])
            })
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((trained - grid).abs());
        for r in 0..trace.initial.len() {
            let mut last = trace.initial[r];
            for st in trace.accepted.iter().filter(|s| s.restart == r) {
                if st.metric < last {
                    decreasing += 1;
                }
                last = st.metric;
            }
        }
    }
    (worst, decreasing)
}

/// Restarts used for the oracle comparison; the default of 5 is reported alongside.
const ORACLE_RESTARTS: usize = 20;

fn criterion_coordinate_ascent() -> Outcome {
    let (worst, decreasing) = coordinate_ascent_gap(ORACLE_RESTARTS);
    let default_restarts = CoordinateAscentParams::default().restarts;
    let (default_worst, default_decreasing) = coordinate_ascent_gap(default_restarts);
    Outcome {
        pass: worst <= 0.01 && decreasing + default_decreasing == 0,
        detail: format!(
            "max |trained - grid| nDCG@3 {worst:.4} over 20 problems with {ORACLE_RESTARTS} restarts \
             ({default_worst:.4} with {default_restarts}); {} decreasing trace steps",
            decreasing + default_decreasing
        ),
    }
}

// ---------------------------------------------------------------------------
// 6-8. Synthetic replication
// ---------------------------------------------------------------------------

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Prepared {
    corpus: commrec::corpus::Corpus,
    fm: commrec::features::FeatureMatrix,
    dataset: RankingDataset,
    assignment: BTreeMap<String, usize>,
    seed: u64,
}

fn prepare(seed: u64) -> Prepared {
    let sim = SimConfig {
        readers: 60,
        communities: 3,
        alpha: 0.9,
        grade_noise: 0.2,
        seed,
        ..Default::default()
    };
    let out = generate_corpus(&sim).expect("simulated corpus");
    let (fm, _) = build_feature_matrix(&out.corpus, &Default::default(), seed::derive(seed, "features")).expect("features");
    let (dataset, _) = build_rank_dataset(
        &out.corpus,
        &out.graph,
        &default_metapaths(),
        &TextParams::default(),
        &TokenizerSettings::default(),
    )
    .expect("rank features");
    let communities = two_step(&fm, &TwoStepSettings::default(), seed::derive(seed, "cluster")).expect("communities");
    Prepared {
        corpus: out.corpus,
        fm,
        dataset,
        assignment: communities.assignment.labels(),
        seed,
    }
}

fn cv_settings(seed: u64) -> CvSettings {
    let mut ranker = RankerParams::default();
    ranker.ca.seed = seed::derive(seed, "ranker");
    CvSettings {
        folds: 10,
        seed: seed::derive(seed, "cv"),
        ranker,
        test_metric: Metric::Ndcg(Some(3)),
    }
}

fn criterion_cv(prepared: &mut Vec<Prepared>) -> Outcome {
    let mut ok = 0;
    let mut lines = Vec::new();
    for &s in &SEEDS {
        let p = prepare(s);
        let judged = p.dataset.queries.len();
        let cv = cross_validate_ranking(&p.dataset, &p.assignment, &cv_settings(s)).expect("cross-validation");
        let m = Metric::Ndcg(Some(3));
        let gap = cv.communitized.mean(m) - cv.global.mean(m);
        let pv = cv.sign_test.p_two_sided;
        if gap >= 0.03 && pv < 0.05 && judged >= 400 {
            ok += 1;
        }
        lines.push(format!("seed {s}: gap {gap:+.4} p {pv:.1e} ({judged} queries)"));
        prepared.push(p);
    }
    Outcome {
        pass: ok >= 4,
        detail: format!("{ok}/5 seeds [{}]", lines.join("; ")),
    }
}

fn criterion_missing_rpf(prepared: &[Prepared]) -> Outcome {
    let mut ok = 0;
    let mut lines = Vec::new();
    for p in prepared {
        let settings = MissingRpfSettings {
            fraction: 0.25,
            folds: 4,
            seed: seed::derive(p.seed, "missing-rpf"),
            two_step: TwoStepSettings::default(),
            cv: cv_settings(p.seed),
        };
        let r = simulate_missing_rpf(&p.fm, &p.dataset, &settings).expect("missing-profile simulation");
        let m = Metric::Ndcg(Some(3));
        let acc = r.accuracy.unwrap_or(0.0);
        let comm = r.communitized.mean(m);
        let glob = r.global.mean(m);
        if acc >= 0.8 && comm > glob {
            ok += 1;
        }
        lines.push(format!("seed {}: accuracy {acc:.3}, nDCG@3 {comm:.4} vs {glob:.4}", p.seed));
    }
    Outcome {
        pass: ok >= 4,
        detail: format!("{ok}/5 seeds [{}]", lines.join("; ")),
    }
}

fn criterion_collaboration(prepared: &[Prepared]) -> Outcome {
    let sets = vec!["RPF-all".to_string(), "RBF".to_string()];
    let mut ok = 0;
    let mut lines = Vec::new();
    for p in prepared {
        let rows = physical_collaboration(
            &p.fm,
            &p.corpus.reply_pairs(),
            &sets,
            3,
            Distance::Euclidean,
            seed::derive(p.seed, "collaboration"),
        )
        .expect("collaboration");
        let (rpf, rbf) = (rows[0].scores.f1, rows[1].scores.f1);
        if rpf > rbf {
            ok += 1;
        }
        lines.push(format!("seed {}: RPF {rpf:.3} vs RBF {rbf:.3}", p.seed));
    }

    let mut pure = Vec::new();
    for &s in &SEEDS {
        let out = generate_corpus(&SimConfig {
            alpha: 1.0,
            grade_noise: 0.0,
            seed: s,
            ..Default::default()
        })
        .expect("simulated corpus");
        let (fm, _) = build_feature_matrix(&out.corpus, &Default::default(), seed::derive(s, "features")).expect("features");
        let model = cluster_profiled(&fm, &TwoStepSettings::default(), seed::derive(s, "cluster")).expect("clusters");
        let f1 = commrec::community::pairwise_cluster_eval(&model.assignment, &out.corpus.reply_pairs())
            .expect("pairwise scores")
            .f1;
        pure.push(f1);
    }
    let all_pure = pure.iter().all(|&f| f == 1.0);
    Outcome {
        pass: ok >= 4 && all_pure,
        detail: format!(
            "{ok}/5 seeds RPF above RBF [{}]; alpha=1 noise=0 RPF F1 {:?}",
            lines.join("; "),
            pure
        ),
    }
}

// ---------------------------------------------------------------------------
// 9. Pipeline determinism
// ---------------------------------------------------------------------------

fn run_pipeline(out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_commrec"))
        .args(["pipeline", "--seed", "11", "--out"])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    std::fs::read(out.join("report.json")).map_err(|e| e.to_string())
}

fn criterion_determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let a = run_pipeline(&dir.path().join("a"));
    let b = run_pipeline(&dir.path().join("b"));
    match (a, b) {
        (Ok(a), Ok(b)) => Outcome {
            pass: a == b,
            detail: format!("report.json {} bytes, identical: {}", a.len(), a == b),
        },
        (Err(e), _) | (_, Err(e)) => Outcome {
            pass: false,
            detail: format!("pipeline failed: {}", e.trim()),
        },
    }
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let mut results = Vec::new();
    results.push(report(1, "metrics match brute force", secs(5), criterion_metrics));
    results.push(report(2, "meta-path walks match tour enumeration", secs(10), criterion_walks));
    results.push(report(3, "k-medoids reaches the exhaustive optimum", secs(5), criterion_kmedoids));
    results.push(report(4, "MaxEnt gradient and priors", None, criterion_maxent));
    results.push(report(5, "coordinate ascent matches the angle grid", None, criterion_coordinate_ascent));
    let mut prepared = Vec::new();
    results.push(report(6, "communitized ranking beats the global ranker", secs(120), || {
        criterion_cv(&mut prepared)
    }));
    results.push(report(7, "missing-profile two-step assignment", None, || criterion_missing_rpf(&prepared)));
    results.push(report(8, "profile clusters match reply exchanges", None, || {
        criterion_collaboration(&prepared)
    }));
    results.push(report(9, "pipeline report is byte-identical across runs", None, criterion_determinism));
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
