use std::collections::{BTreeMap, BTreeSet};

use commrec::community::kmedoids::{pam, DistanceMatrix};
use commrec::community::{kmedoids, pairwise_cluster_eval, train_maxent, Distance};
use proptest::prelude::*;

fn points(max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=max_n, 1usize..4).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), n)
    })
}

fn distance() -> impl Strategy<Value = Distance> {
    prop_oneof![Just(Distance::Euclidean), Just(Distance::Manhattan)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn clustering_ignores_input_order(
        pts in points(16),
        k in 1usize..5,
        dist in distance(),
        seed in any::<u64>(),
        perm_seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        prop_assume!(k <= pts.len());
        let ids: Vec<String> = (0..pts.len()).map(|i| format!("r{i:03}")).collect();
        let a = kmedoids(&ids, &pts, k, dist, seed).unwrap();

        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        let p_ids: Vec<String> = order.iter().map(|&i| ids[i].clone()).collect();
        let p_pts: Vec<Vec<f64>> = order.iter().map(|&i| pts[i].clone()).collect();
        let b = kmedoids(&p_ids, &p_pts, k, dist, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn pam_ends_in_a_swap_local_optimum(
        pts in points(14),
        k in 1usize..5,
        dist in distance(),
        seed in any::<u64>(),
    ) {
        prop_assume!(k <= pts.len());
        let dm = DistanceMatrix::from_points(&pts, dist);
        let r = pam(&dm, k, seed).unwrap();

        for w in r.cost_trace.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert_eq!(*r.cost_trace.last().unwrap(), r.cost);
        prop_assert!((dm.cost(&r.medoids) - r.cost).abs() <= 1e-12 * r.cost.max(1.0));

        let n = pts.len();
        let medoids: BTreeSet<usize> = r.medoids.iter().copied().collect();
        prop_assert_eq!(medoids.len(), k);
        for slot in 0..k {
            for h in (0..n).filter(|h| !medoids.contains(h)) {
                let mut swapped = r.medoids.clone();
                swapped[slot] = h;
                let c = dm.cost(&swapped);
                prop_assert!(c >= r.cost - 1e-9 * r.cost.max(1.0), "swap {slot}->{h}: {c} < {}", r.cost);
            }
        }

        for (c, &m) in r.medoids.iter().enumerate() {
            let d_own = dm.get(m, m);
            prop_assert!(r.medoids.iter().all(|&o| dm.get(m, o) >= d_own));
            if r.medoids.iter().all(|&o| o == m || dm.get(m, o) > 0.0) {
                prop_assert_eq!(r.assignment[m], c);
            }
        }
        for (i, &c) in r.assignment.iter().enumerate() {
            let own = dm.get(i, r.medoids[c]);
            prop_assert!(r.medoids.iter().all(|&m| dm.get(i, m) >= own));
        }
    }

    #[test]
    fn pairwise_scores_match_brute_force(
        labels in prop::collection::vec(0usize..4, 1..14),
        pairs in prop::collection::vec((0usize..14, 0usize..14), 0..30),
    ) {
        let n = labels.len();
        let name = |i: usize| format!("r{i:02}");
        let assignment: BTreeMap<String, usize> = labels.iter().enumerate().map(|(i, &c)| (name(i), c)).collect();
        let replies: BTreeSet<(String, String)> =
            pairs.iter().map(|&(a, b)| (name(a % n), name(b % n))).collect();
        let s = pairwise_cluster_eval(&assignment, &replies).unwrap();

        let (mut same, mut truth, mut hit) = (0usize, 0usize, 0usize);
        for i in 0..n {
            for j in i + 1..n {
                let together = labels[i] == labels[j];
                let replied = replies.contains(&(name(i), name(j))) || replies.contains(&(name(j), name(i)));
                same += together as usize;
                truth += replied as usize;
                hit += (together && replied) as usize;
            }
        }
        prop_assert_eq!(s.same_community_pairs, same);
        prop_assert_eq!(s.reply_pairs, truth);
        prop_assert_eq!(s.matched_pairs, hit);
        let p = if same == 0 { 0.0 } else { hit as f64 / same as f64 };
        let r = if truth == 0 { 0.0 } else { hit as f64 / truth as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        prop_assert!((s.precision - p).abs() < 1e-15);
        prop_assert!((s.recall - r).abs() < 1e-15);
        prop_assert!((s.f1 - f).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn maxent_climbs_and_predicts_distributions(
        rows in prop::collection::vec((prop::collection::vec(-3.0f64..3.0, 3), 0usize..4), 2..30),
        lambda in prop_oneof![Just(0.0), 0.01f64..2.0],
        probe in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let (x, y): (Vec<Vec<f64>>, Vec<usize>) = rows.into_iter().unzip();
        let m = train_maxent(&x, &y, lambda).unwrap();
        for w in m.objective_trace.windows(2) {
            prop_assert!(w[1] >= w[0], "{} then {}", w[0], w[1]);
        }
        for v in x.iter().chain([&probe]) {
            let p = m.predict(v).unwrap();
            prop_assert!(p.probabilities.iter().all(|&q| (0.0..=1.0).contains(&q)));
            prop_assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(m.classes.contains(&p.label));
        }
    }
}
