use proptest::prelude::*;

use reviewlens_core::aspects::{
    evaluate_extraction, match_terms, sentiment_distribution, term_overlap, AspectMention, ExtractionReport,
    GoldAnnotation, GoldAspect, MatchPolicy, MentionSource,
};
use reviewlens_core::sentiment::Polarity;

fn polarity() -> impl Strategy<Value = Polarity> {
    prop::sample::select(Polarity::ALL.to_vec())
}

fn terms() -> impl Strategy<Value = Vec<String>> {
    let word = prop::sample::select(vec!["auto", "save", "sync", "dark", "mode", "login", "ads"]);
    let term = prop::collection::vec(word, 1..4).prop_map(|w| w.join(" "));
    prop::collection::vec(term, 0..6)
}

proptest! {
    #[test]
    fn distribution_sums_to_one(labels in prop::collection::vec(polarity(), 1..50)) {
        let mentions: Vec<AspectMention> = labels.iter().map(|&p| AspectMention::gold("s", "x", p)).collect();
        let d = sentiment_distribution(&mentions).unwrap();
        prop_assert!((d.positive + d.negative + d.neutral - 1.0).abs() < 1e-12);
        prop_assert_eq!(d.count, labels.len() as u64);
    }

    #[test]
    fn f1_sits_between_precision_and_recall(tp in 0u64..50, fp in 0u64..50, fn_ in 0u64..50) {
        let r = ExtractionReport::from_counts(tp, fp, fn_, MatchPolicy::Exact);
        let lo = r.precision.min(r.recall);
        let hi = r.precision.max(r.recall);
        prop_assert!(r.f1 >= lo - 1e-12 && r.f1 <= hi + 1e-12);
    }

    #[test]
    fn one_more_true_positive_never_lowers_f1(tp in 0u64..50, fp in 0u64..50, fn_ in 1u64..50) {
        let before = ExtractionReport::from_counts(tp, fp, fn_, MatchPolicy::Exact);
        let after = ExtractionReport::from_counts(tp + 1, fp, fn_ - 1, MatchPolicy::Exact);
        prop_assert!(after.f1 >= before.f1);
    }

    #[test]
    fn overlap_is_symmetric_and_bounded(a in "[a-c ]{0,12}", b in "[a-c ]{0,12}") {
        let x = term_overlap(&a, &b);
        prop_assert_eq!(x, term_overlap(&b, &a));
        prop_assert!((0.0..=1.0).contains(&x));
    }

    #[test]
    fn matching_is_one_to_one_and_overlap_matches_at_least_exact(pred in terms(), gold in terms()) {
        let exact = match_terms(&pred, &gold, MatchPolicy::Exact);
        let loose = match_terms(&pred, &gold, MatchPolicy::TokenOverlap);
        for pairs in [&exact, &loose] {
            let mut p: Vec<usize> = pairs.iter().map(|x| x.0).collect();
            let mut g: Vec<usize> = pairs.iter().map(|x| x.1).collect();
            p.sort();
            p.dedup();
            g.sort();
            g.dedup();
            prop_assert_eq!(p.len(), pairs.len());
            prop_assert_eq!(g.len(), pairs.len());
        }
        prop_assert!(loose.len() >= exact.len());
    }

    #[test]
    fn perfect_predictions_score_one(gold_terms in prop::collection::vec("[a-z]{3,8}", 1..5)) {
        let mut uniq = gold_terms.clone();
        uniq.sort();
        uniq.dedup();
        let gold = vec![GoldAnnotation {
            sentence_id: "s".into(),
            sentence: uniq.join(" "),
            aspects: uniq.iter().map(|t| GoldAspect { term: t.clone(), category: String::new(), sentiment: Polarity::Neutral }).collect(),
        }];
        let pred: Vec<AspectMention> = uniq
            .iter()
            .map(|t| AspectMention { source: MentionSource::Llm, ..AspectMention::gold("s", t, Polarity::Neutral) })
            .collect();
        for policy in [MatchPolicy::Exact, MatchPolicy::TokenOverlap] {
            let r = evaluate_extraction(&pred, &gold, policy).unwrap();
            prop_assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        }
    }
}
