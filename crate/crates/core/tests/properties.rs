use std::collections::{BTreeMap, BTreeSet};

use polarprop::commnet::{homophily_index, k_core, CommGraph, NodePolarity};
use polarprop::corpus::TokenizedTweet;
use polarprop::evalkit::{self, AnnotationTable, EvalUnit, GoldLabel, GoldLabelSet, Pole};
use polarprop::lexgraph::{build_cooccurrence, CooccurrenceGraph, GraphMode};
use polarprop::polarity::{score_aggregate, ternarize, PolarityScore, Scale, TernaryLabel, Weighting};
use polarprop::proplabel::{propagate_greedy, propagate_random_walk, LabelStatus, PolarityLexicon, RandomWalkConfig, SeedLexicon};
use proptest::prelude::*;

fn node(i: usize) -> String {
    format!("h{i:02}")
}

/// Node count and an edge list with small integer weights.
fn graph_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize, u8)>)> {
    (3usize..20).prop_flat_map(|n| {
        let edge = (0..n, 0..n, 1u8..5).prop_filter("no self-loops", |(a, b, _)| a != b);
        (Just(n), prop::collection::vec(edge, 0..60))
    })
}

fn build<T: polarprop::Scalar>(n: usize, edges: &[(usize, usize, u8)]) -> CooccurrenceGraph<T> {
    CooccurrenceGraph::from_parts(
        GraphMode::Hashtag,
        (0..n).map(|i| (node(i), 1)).collect(),
        edges.iter().map(|&(a, b, w)| (node(a), node(b), T::from_count(w as usize))),
    )
    .unwrap()
}

fn seeds<T: polarprop::Scalar>(a: &[usize], b: &[usize], va: f64, vb: f64) -> SeedLexicon<T> {
    SeedLexicon::new(
        "d",
        a.iter().map(|&i| node(i)),
        b.iter().map(|&i| node(i)),
        T::from_f64_lossy(va),
        T::from_f64_lossy(vb),
    )
    .unwrap()
}

/// Nodes connected to any of `from`.
fn reachable(g: &CooccurrenceGraph<f64>, from: &[usize]) -> BTreeSet<usize> {
    let mut seen: BTreeSet<usize> = from.iter().copied().collect();
    let mut stack: Vec<usize> = from.to_vec();
    while let Some(v) = stack.pop() {
        for &(u, _) in g.neighbors(v) {
            if seen.insert(u) {
                stack.push(u);
            }
        }
    }
    seen
}

proptest! {
    #[test]
    fn greedy_labels_exactly_the_seed_components((n, edges) in graph_strategy(), gamma in 1u64..6) {
        let g: CooccurrenceGraph<f64> = build(n, &edges);
        let s = seeds::<f64>(&[0], &[1], 1.0, -1.0);
        let lex = propagate_greedy(&g, &s, gamma, u64::MAX).unwrap();
        let reach = reachable(&g, &[g.index_of(&node(0)).unwrap(), g.index_of(&node(1)).unwrap()]);
        for (i, name) in g.nodes().iter().enumerate() {
            let status = lex.get(name).unwrap().status();
            prop_assert_eq!(status != LabelStatus::Unlabeled, reach.contains(&i), "{}", name);
        }
    }

    #[test]
    fn greedy_label_pattern_is_independent_of_precision((n, edges) in graph_strategy(), gamma in 1u64..4) {
        let g64: CooccurrenceGraph<f64> = build(n, &edges);
        let g32: CooccurrenceGraph<f32> = build(n, &edges);
        let l64 = propagate_greedy(&g64, &seeds::<f64>(&[0, 2], &[1], 1.0, -1.0), gamma, u64::MAX).unwrap();
        let l32 = propagate_greedy(&g32, &seeds::<f32>(&[0, 2], &[1], 1.0, -1.0), gamma, u64::MAX).unwrap();
        for ((k64, a), (k32, b)) in l64.iter().zip(l32.iter()) {
            prop_assert_eq!(k64, k32);
            prop_assert_eq!(a.status(), b.status());
            if let (Some(x), Some(y)) = (a.score(), b.score()) {
                prop_assert!((x - f64::from(y)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn greedy_commutes_with_affine_maps((n, edges) in graph_strategy()) {
        // halving and shifting by a power of two keeps every mean exact
        let g: CooccurrenceGraph<f64> = build(n, &edges);
        let signed = propagate_greedy(&g, &seeds::<f64>(&[0], &[1], 1.0, -1.0), 2, u64::MAX).unwrap();
        let unit = propagate_greedy(&g, &seeds::<f64>(&[0], &[1], 1.0, 0.0), 2, u64::MAX).unwrap();
        let mapped = signed.map_affine(0.5, 0.5);
        for ((_, a), (_, b)) in mapped.iter().zip(unit.iter()) {
            prop_assert_eq!(a.status(), b.status());
            if let (Some(x), Some(y)) = (a.score(), b.score()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_walk_scores_stay_in_range((n, edges) in graph_strategy()) {
        let g: CooccurrenceGraph<f64> = build(n, &edges);
        let lex = propagate_random_walk(&g, &seeds::<f64>(&[0], &[1, 2], 2.0, -0.5), &RandomWalkConfig::default()).unwrap();
        for (_, label) in lex.iter() {
            if let Some(v) = label.score() {
                prop_assert!((-0.5..=2.0).contains(&v));
            }
        }
        prop_assert_eq!(lex.score(&node(0)), Some(2.0));
        prop_assert_eq!(lex.score(&node(2)), Some(-0.5));
    }

    #[test]
    fn lexicon_files_round_trip((n, edges) in graph_strategy()) {
        let g: CooccurrenceGraph<f64> = build(n, &edges);
        let lex = propagate_greedy(&g, &seeds::<f64>(&[0], &[1], 1.0, -1.0), 3, u64::MAX).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lex.tsv");
        lex.write(&p).unwrap();
        let back = PolarityLexicon::<f64>::read(&p).unwrap();
        let q = dir.path().join("again.tsv");
        back.write(&q).unwrap();
        prop_assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
        for ((_, a), (_, b)) in lex.iter().zip(back.iter()) {
            prop_assert_eq!(a.status(), b.status());
        }
    }

    #[test]
    fn cooccurrence_weights_count_shared_tweets(
        tweets in prop::collection::vec(prop::collection::vec(0usize..8, 0..5), 0..25)
    ) {
        let corpus: Vec<TokenizedTweet> = tweets
            .iter()
            .enumerate()
            .map(|(i, tags)| {
                let tags: Vec<String> = tags.iter().map(|&t| format!("tag{t}")).collect();
                TokenizedTweet { tweet_id: format!("t{i}"), hashtags: tags.clone(), tokens: tags }
            })
            .collect();
        let g: CooccurrenceGraph<f64> = build_cooccurrence(&corpus, GraphMode::Hashtag, 0).unwrap();
        for a in 0..8 {
            for b in 0..8 {
                let (ta, tb) = (format!("tag{a}"), format!("tag{b}"));
                let shared = tweets.iter().filter(|t| t.contains(&a) && t.contains(&b)).count();
                let w = g.weight(&ta, &tb);
                if a == b || shared == 0 {
                    prop_assert_eq!(w, None);
                } else {
                    prop_assert_eq!(w, Some(shared as f64));
                    prop_assert_eq!(g.weight(&tb, &ta), w);
                }
            }
        }
    }

    #[test]
    fn by_tweet_is_the_mean_of_tweet_values(values in prop::collection::vec(prop::option::of(-1.0f64..1.0), 1..30)) {
        let scores: BTreeMap<String, PolarityScore<f64>> = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let items: Vec<f64> = v.iter().copied().collect();
                (format!("t{i:02}"), PolarityScore::from_items("d", &items))
            })
            .collect();
        let agg = score_aggregate("d", scores.keys().map(String::as_str), &scores, Weighting::ByTweet).unwrap();
        let present: Vec<f64> = values.iter().flatten().copied().collect();
        match agg.value {
            None => prop_assert!(present.is_empty()),
            Some(v) => prop_assert!((v - present.iter().sum::<f64>() / present.len() as f64).abs() < 1e-12),
        }
    }

    #[test]
    fn swapping_scale_ends_swaps_poles(v in -1.0f64..=1.0) {
        let s = PolarityScore { dimension: "d".into(), value: Some(v), n_items: 1 };
        let forward = ternarize(&s, &Scale::new(1.0, -1.0));
        let reversed = ternarize(&s, &Scale::new(-1.0, 1.0));
        prop_assert_eq!(forward.flipped(), reversed);
    }

    #[test]
    fn pole_metrics_are_symmetric(rows in prop::collection::vec((0usize..3, 0usize..4), 1..40)) {
        let gold_of = |g: usize| GoldLabel::ALL[g];
        let swap_gold = |g: GoldLabel| match g {
            GoldLabel::PoleA => GoldLabel::PoleB,
            GoldLabel::PoleB => GoldLabel::PoleA,
            n => n,
        };
        let gold = GoldLabelSet {
            unit: EvalUnit::Account,
            labels: rows.iter().enumerate().map(|(i, r)| (format!("k{i}"), gold_of(r.0))).collect(),
            provenance: String::new(),
        };
        let swapped_gold = GoldLabelSet {
            labels: gold.labels.iter().map(|(k, g)| (k.clone(), swap_gold(*g))).collect(),
            ..gold.clone()
        };
        let preds: BTreeMap<String, TernaryLabel> =
            rows.iter().enumerate().map(|(i, r)| (format!("k{i}"), TernaryLabel::ALL[r.1])).collect();
        let swapped_preds: BTreeMap<String, TernaryLabel> = preds.iter().map(|(k, p)| (k.clone(), p.flipped())).collect();
        let a = evalkit::pole_metrics::<f64>(&preds, &gold, Pole::A);
        let b_swapped = evalkit::pole_metrics::<f64>(&swapped_preds, &swapped_gold, Pole::B);
        match (a, b_swapped) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn alpha_ignores_category_names(rows in prop::collection::vec((0usize..3, 0usize..3), 2..40), perm in Just([2usize, 0, 1])) {
        let table = |f: &dyn Fn(usize) -> usize| {
            AnnotationTable::new(
                (0..rows.len()).map(|i| i.to_string()).collect(),
                rows.iter().map(|r| GoldLabel::ALL[f(r.0)]).collect(),
                rows.iter().map(|r| GoldLabel::ALL[f(r.1)]).collect(),
            )
            .unwrap()
        };
        let plain = evalkit::agreement::<f64>(&table(&|c| c)).unwrap();
        let renamed = evalkit::agreement::<f64>(&table(&|c| perm[c])).unwrap();
        prop_assert!((plain.krippendorff_alpha - renamed.krippendorff_alpha).abs() < 1e-12);
        prop_assert_eq!(plain.percent_agreement, renamed.percent_agreement);
        let all_agree = rows.iter().all(|r| r.0 == r.1);
        prop_assert_eq!(plain.krippendorff_alpha == 1.0, all_agree);
    }

    #[test]
    fn k_core_is_idempotent_and_homophily_bounded(
        labels in prop::collection::vec(0usize..4, 2..40),
        raw_edges in prop::collection::vec((0usize..40, 0usize..40), 0..120),
        k in 1usize..4,
    ) {
        let n = labels.len();
        let names: Vec<String> = (0..n).map(|i| format!("u{i:02}")).collect();
        let nodes = names
            .iter()
            .zip(&labels)
            .map(|(name, &l)| (name.clone(), vec![NodePolarity { value: None, n_items: 0, label: TernaryLabel::ALL[l] }]))
            .collect();
        let edges = raw_edges
            .iter()
            .filter(|(a, b)| a % n != b % n)
            .map(|(a, b)| (names[a % n].clone(), names[b % n].clone(), 1, 0));
        let g: CommGraph<f64> = CommGraph::from_parts(vec!["d".into()], nodes, edges).unwrap();
        let core = k_core(&g, k);
        let again = k_core(&core, k);
        prop_assert_eq!(core.nodes(), again.nodes());
        prop_assert!(core.degrees().iter().all(|&d| d >= k));
        if let Ok(h) = homophily_index(&g, "d") {
            prop_assert!((-1.0..=1.0).contains(&h));
        }
    }
}
