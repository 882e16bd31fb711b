use std::collections::{BTreeMap, BTreeSet};

use commrec::corpus::{parse_corpus, validate_corpus};
use commrec::simgen::{generate_corpus, SimConfig};
use proptest::prelude::*;

fn small(seed: u64, alpha: f64, readers: usize) -> SimConfig {
    SimConfig {
        readers,
        alpha,
        queries_per_reader: 2,
        oers_per_type: 6,
        seed,
        ..Default::default()
    }
}

fn components(nodes: &BTreeSet<String>, edges: &BTreeSet<(String, String)>) -> usize {
    let mut parent: BTreeMap<&str, &str> = nodes.iter().map(|n| (n.as_str(), n.as_str())).collect();
    fn find<'a>(p: &BTreeMap<&'a str, &'a str>, mut x: &'a str) -> &'a str {
        while p[x] != x {
            x = p[x];
        }
        x
    }
    for (a, b) in edges {
        let (ra, rb) = (find(&parent, a), find(&parent, b));
        if ra != rb {
            parent.insert(ra, rb);
        }
    }
    nodes.iter().filter(|n| find(&parent, n) == n.as_str()).count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parse_of_serialize_is_identity(seed in 0u64..1000, alpha in 0.0f64..=1.0, readers in 1usize..15) {
        let out = generate_corpus(&small(seed, alpha, readers)).unwrap();
        let s = out.corpus.to_streams();
        let back = parse_corpus(&s.events, Some(&s.readers), &s.oers, &s.judgments).unwrap();
        prop_assert_eq!(back.to_streams(), s);
        prop_assert!(back.warnings().is_empty());
    }

    #[test]
    fn generated_corpora_are_consistent(seed in 0u64..1000, alpha in 0.0f64..=1.0, readers in 0usize..15) {
        let out = generate_corpus(&small(seed, alpha, readers)).unwrap();
        let report = validate_corpus(&out.corpus);
        prop_assert!(report.is_consistent(), "{:?}", report.issues);
    }

    #[test]
    fn pure_communities_give_one_reply_component_each(seed in 0u64..1000, communities in 1usize..5) {
        let cfg = SimConfig {
            communities,
            readers: communities * 4,
            ..small(seed, 1.0, 0)
        };
        let out = generate_corpus(&cfg).unwrap();
        let readers: BTreeSet<String> = out.corpus.sorted_reader_ids().into_iter().collect();
        let pairs = out.corpus.reply_pairs();
        prop_assert_eq!(components(&readers, &pairs), communities);
        for (a, b) in &pairs {
            prop_assert_eq!(out.latent.community[a], out.latent.community[b]);
        }
    }
}

#[test]
fn inverted_bbox_is_rejected_with_its_line() {
    let events = concat!(
        r#"{"event":"e1","kind":"quote","reader":"r1","paper":"p1","page":0,"bbox":[0.1,0.2,0.5,0.3],"quote_text":"a","ts":0}"#,
        "\n",
        r#"{"event":"e2","kind":"quote","reader":"r1","paper":"p1","page":0,"bbox":[0.6,0.2,0.5,0.3],"quote_text":"b","ts":1}"#,
        "\n"
    );
    let err = parse_corpus(events, None, "", "").unwrap_err().to_string();
    assert!(err.contains(":2:"), "{err}");
    assert!(err.contains("x0"), "{err}");
}

#[test]
fn dangling_reply_and_unknown_oer_are_reported() {
    let events = concat!(
        r#"{"event":"e1","kind":"reply","reader":"r1","paper":"p1","page":0,"target":"zz","content_text":"hi","ts":0}"#,
        "\n",
        r#"{"event":"e2","kind":"rating","reader":"r1","paper":"p1","page":0,"oer":"o9","grade":"good","ts":1}"#,
        "\n"
    );
    let corpus = parse_corpus(events, None, "", "").unwrap();
    let report = validate_corpus(&corpus);
    assert_eq!(report.issues.len(), 2, "{:?}", report.issues);
    let text = serde_json::to_string(&report.issues).unwrap();
    assert!(text.contains("zz") && text.contains("o9"));
}
