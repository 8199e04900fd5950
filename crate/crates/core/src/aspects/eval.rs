use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{normalize_term, AspectMention, GoldAnnotation};
use crate::sentiment::Polarity;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("prediction for unknown sentence {0}")]
    UnknownSentence(String),
    #[error("no mentions to summarise")]
    NoMentions,
}

/// How a predicted term is paired with a gold term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchPolicy {
    /// Equal after normalization.
    #[default]
    Exact,
    /// Token overlap `|P ∩ G| / max(|P|, |G|) >= 0.5`, assigned greedily by
    /// overlap, then longer gold term.
    TokenOverlap,
}

impl MatchPolicy {
    pub fn id(self) -> &'static str {
        match self {
            MatchPolicy::Exact => "exact",
            MatchPolicy::TokenOverlap => "token-overlap-0.5",
        }
    }
}

pub const OVERLAP_THRESHOLD: f64 = 0.5;

/// Token-set overlap of two terms, in `[0, 1]`.
pub fn term_overlap(a: &str, b: &str) -> f64 {
    let a: BTreeSet<&str> = a.split_whitespace().collect();
    let b: BTreeSet<&str> = b.split_whitespace().collect();
    let denom = a.len().max(b.len());
    if denom == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / denom as f64
}

/// One-to-one `(predicted index, gold index)` pairs; terms must already be
/// normalized.
pub fn match_terms(predicted: &[String], gold: &[String], policy: MatchPolicy) -> Vec<(usize, usize)> {
    let mut gold_used = vec![false; gold.len()];
    let mut pairs = Vec::new();
    match policy {
        MatchPolicy::Exact => {
            for (pi, p) in predicted.iter().enumerate() {
                if let Some(gi) = (0..gold.len()).find(|&gi| !gold_used[gi] && gold[gi] == *p) {
                    gold_used[gi] = true;
                    pairs.push((pi, gi));
                }
            }
        }
        MatchPolicy::TokenOverlap => {
            let mut candidates = Vec::new();
            for (pi, p) in predicted.iter().enumerate() {
                for (gi, g) in gold.iter().enumerate() {
                    let o = term_overlap(p, g);
                    if o >= OVERLAP_THRESHOLD {
                        candidates.push((o, gi, pi));
                    }
                }
            }
            candidates.sort_by(|a, b| {
                b.0.total_cmp(&a.0)
                    .then(gold[b.1].len().cmp(&gold[a.1].len()))
                    .then(a.2.cmp(&b.2))
                    .then(a.1.cmp(&b.1))
            });
            let mut pred_used = vec![false; predicted.len()];
            for (_, gi, pi) in candidates {
                if !pred_used[pi] && !gold_used[gi] {
                    pred_used[pi] = true;
                    gold_used[gi] = true;
                    pairs.push((pi, gi));
                }
            }
            pairs.sort_unstable();
        }
    }
    pairs
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub policy: MatchPolicy,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ExtractionReport {
    /// Micro-averaged scores; an empty denominator gives 0.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, policy: MatchPolicy) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        ExtractionReport {
            policy,
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

struct Aligned<'a> {
    gold: &'a GoldAnnotation,
    predicted: Vec<&'a AspectMention>,
    pairs: Vec<(usize, usize)>,
}

fn align<'a>(
    predicted: &'a [AspectMention],
    gold: &'a [GoldAnnotation],
    policy: MatchPolicy,
) -> Result<Vec<Aligned<'a>>, EvalError> {
    let mut by_sentence: BTreeMap<&str, Vec<&AspectMention>> = BTreeMap::new();
    for m in predicted {
        by_sentence.entry(m.sentence_id.as_str()).or_default().push(m);
    }
    for id in by_sentence.keys() {
        if !gold.iter().any(|g| g.sentence_id == *id) {
            return Err(EvalError::UnknownSentence(id.to_string()));
        }
    }
    Ok(gold
        .iter()
        .map(|g| {
            let predicted = by_sentence.remove(g.sentence_id.as_str()).unwrap_or_default();
            let p_terms: Vec<String> = predicted.iter().map(|m| normalize_term(&m.term)).collect();
            let g_terms: Vec<String> = g.aspects.iter().map(|a| a.term.clone()).collect();
            let pairs = match_terms(&p_terms, &g_terms, policy);
            Aligned { gold: g, predicted, pairs }
        })
        .collect())
}

pub fn evaluate_extraction(
    predicted: &[AspectMention],
    gold: &[GoldAnnotation],
    policy: MatchPolicy,
) -> Result<ExtractionReport, EvalError> {
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for a in align(predicted, gold, policy)? {
        let m = a.pairs.len() as u64;
        tp += m;
        fp += a.predicted.len() as u64 - m;
        fn_ += a.gold.aspects.len() as u64 - m;
    }
    Ok(ExtractionReport::from_counts(tp, fp, fn_, policy))
}

/// Which gold aspects the sentiment metrics range over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SentimentMode {
    /// Only gold aspects paired with a prediction.
    #[default]
    MatchedOnly,
    /// Every gold aspect; unmatched ones count against recall of their class.
    AllGold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: Polarity,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentReport {
    pub policy: MatchPolicy,
    pub mode: SentimentMode,
    /// In [`Polarity::ALL`] order.
    pub classes: Vec<ClassMetrics>,
    pub weighted: WeightedMetrics,
    /// `confusion[gold][predicted]`, indices in [`Polarity::ALL`] order.
    pub confusion: [[u64; 3]; 3],
    /// Gold aspects without a matched prediction, per gold class.
    pub unmatched_gold: [u64; 3],
}

pub(crate) fn class_index(p: Polarity) -> usize {
    Polarity::ALL.iter().position(|&c| c == p).expect("known class")
}

impl SentimentReport {
    /// Per-class metrics from a confusion matrix. `unmatched_gold` enters
    /// recall and support only in [`SentimentMode::AllGold`].
    pub fn from_counts(
        confusion: [[u64; 3]; 3],
        unmatched_gold: [u64; 3],
        policy: MatchPolicy,
        mode: SentimentMode,
    ) -> Self {
        let classes: Vec<ClassMetrics> = Polarity::ALL
            .iter()
            .enumerate()
            .map(|(c, &class)| {
                let tp = confusion[c][c];
                let predicted: u64 = (0..3).map(|g| confusion[g][c]).sum();
                let missed = match mode {
                    SentimentMode::MatchedOnly => 0,
                    SentimentMode::AllGold => unmatched_gold[c],
                };
                let support: u64 = confusion[c].iter().sum::<u64>() + missed;
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, support);
                ClassMetrics {
                    class,
                    precision,
                    recall,
                    f1: f1(precision, recall),
                    support,
                }
            })
            .collect();
        let support: u64 = classes.iter().map(|c| c.support).sum();
        let weigh = |get: fn(&ClassMetrics) -> f64| {
            if support == 0 {
                0.0
            } else {
                classes.iter().map(|c| c.support as f64 * get(c)).sum::<f64>() / support as f64
            }
        };
        let weighted = WeightedMetrics {
            precision: weigh(|c| c.precision),
            recall: weigh(|c| c.recall),
            f1: weigh(|c| c.f1),
            support,
        };
        SentimentReport {
            policy,
            mode,
            classes,
            weighted,
            confusion,
            unmatched_gold,
        }
    }

    pub fn class(&self, class: Polarity) -> &ClassMetrics {
        &self.classes[class_index(class)]
    }
}

pub fn evaluate_sentiment(
    predicted: &[AspectMention],
    gold: &[GoldAnnotation],
    policy: MatchPolicy,
    mode: SentimentMode,
) -> Result<SentimentReport, EvalError> {
    let mut confusion = [[0u64; 3]; 3];
    let mut unmatched = [0u64; 3];
    for a in align(predicted, gold, policy)? {
        let mut matched = vec![false; a.gold.aspects.len()];
        for &(pi, gi) in &a.pairs {
            matched[gi] = true;
            let g = class_index(a.gold.aspects[gi].sentiment);
            let p = class_index(a.predicted[pi].sentiment);
            confusion[g][p] += 1;
        }
        for (gi, aspect) in a.gold.aspects.iter().enumerate() {
            if !matched[gi] {
                unmatched[class_index(aspect.sentiment)] += 1;
            }
        }
    }
    Ok(SentimentReport::from_counts(confusion, unmatched, policy, mode))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentDistribution {
    pub positive: f64,
    pub negative: f64,
    pub neutral: f64,
    pub count: u64,
}

impl SentimentDistribution {
    pub fn from_labels(labels: impl IntoIterator<Item = Polarity>) -> Result<Self, EvalError> {
        let mut counts = [0u64; 3];
        for l in labels {
            counts[class_index(l)] += 1;
        }
        let count: u64 = counts.iter().sum();
        if count == 0 {
            return Err(EvalError::NoMentions);
        }
        let frac = |i: usize| counts[i] as f64 / count as f64;
        Ok(SentimentDistribution {
            positive: frac(0),
            negative: frac(1),
            neutral: frac(2),
            count,
        })
    }

    pub fn get(&self, class: Polarity) -> f64 {
        match class {
            Polarity::Positive => self.positive,
            Polarity::Negative => self.negative,
            Polarity::Neutral => self.neutral,
        }
    }
}

pub fn sentiment_distribution(mentions: &[AspectMention]) -> Result<SentimentDistribution, EvalError> {
    SentimentDistribution::from_labels(mentions.iter().map(|m| m.sentiment))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aspects::GoldAspect;

    fn gold(id: &str, terms: &[(&str, Polarity)]) -> GoldAnnotation {
        GoldAnnotation {
            sentence_id: id.into(),
            sentence: String::new(),
            aspects: terms
                .iter()
                .map(|&(t, s)| GoldAspect {
                    term: t.into(),
                    category: String::new(),
                    sentiment: s,
                })
                .collect(),
        }
    }

    fn pred(id: &str, t: &str, s: Polarity) -> AspectMention {
        let mut m = AspectMention::gold(id, t, s);
        m.source = super::super::MentionSource::Llm;
        m
    }

    use Polarity::*;

    #[test]
    fn extraction_counting() {
        let g = [gold("s", &[("b", Positive), ("c", Positive)])];
        let r = evaluate_extraction(&[pred("s", "a", Positive), pred("s", "b", Positive)], &g, MatchPolicy::Exact)
            .unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.5, 0.5, 0.5));

        let r = evaluate_extraction(&[], &g, MatchPolicy::Exact).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));

        let r = evaluate_extraction(&[pred("s", "B", Neutral), pred("s", "c", Neutral)], &g, MatchPolicy::Exact)
            .unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));

        assert_eq!(
            evaluate_extraction(&[pred("zz", "a", Positive)], &g, MatchPolicy::Exact),
            Err(EvalError::UnknownSentence("zz".into()))
        );
    }

    #[test]
    fn overlap_policy_prefers_longer_gold_on_ties() {
        let p = vec!["auto save".to_string()];
        let g = vec!["save".to_string(), "auto save button".to_string(), "auto save".to_string()];
        assert_eq!(match_terms(&p, &g, MatchPolicy::TokenOverlap), [(0, 2)]);
        let g = vec!["save".to_string(), "save auto".to_string()];
        // Both at 0.5 and 1.0: the full overlap wins.
        assert_eq!(match_terms(&p, &g, MatchPolicy::TokenOverlap), [(0, 1)]);
        let p = vec!["auto".to_string()];
        let g = vec!["auto ui".to_string(), "auto sync".to_string()];
        assert_eq!(match_terms(&p, &g, MatchPolicy::TokenOverlap), [(0, 1)]);
        assert_eq!(term_overlap("a b", "b c"), 0.5);
    }

    #[test]
    fn sentiment_modes() {
        let g = [gold("s", &[("a", Positive), ("b", Negative)])];
        let p = [pred("s", "a", Positive)];
        let matched = evaluate_sentiment(&p, &g, MatchPolicy::Exact, SentimentMode::MatchedOnly).unwrap();
        assert_eq!(matched.class(Positive).f1, 1.0);
        assert_eq!(matched.weighted.support, 1);
        let all = evaluate_sentiment(&p, &g, MatchPolicy::Exact, SentimentMode::AllGold).unwrap();
        assert_eq!(all.class(Negative).support, 1);
        assert_eq!(all.class(Negative).recall, 0.0);
        assert_eq!(all.weighted.recall, 0.5);

        let empty = evaluate_sentiment(&[], &g, MatchPolicy::Exact, SentimentMode::MatchedOnly).unwrap();
        assert_eq!(empty.weighted.support, 0);
        assert_eq!(empty.weighted.f1, 0.0);
    }

    #[test]
    fn distribution() {
        let labels = [Positive, Positive, Negative, Negative, Negative]
            .into_iter()
            .chain(std::iter::repeat_n(Neutral, 5));
        let d = SentimentDistribution::from_labels(labels).unwrap();
        assert_eq!((d.positive, d.negative, d.neutral), (0.2, 0.3, 0.5));
        assert_eq!(sentiment_distribution(&[]), Err(EvalError::NoMentions));
    }
}
