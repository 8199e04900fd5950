use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::text::{is_stopword, word_tokens};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub term: String,
    pub weight: f64,
}

/// Class-based TF-IDF: each cluster's concatenated documents form one
/// class, and `weight(t, c) = tf(t, c) * ln(1 + A / f(t))` with `f(t)` the
/// term's frequency over all classes and `A` the mean class length in words.
///
/// Returns the top `n` terms per class, by weight then term.
pub fn ctfidf_keywords(classes: &[Vec<&str>], n: usize, remove_stopwords: bool) -> Vec<Vec<Keyword>> {
    let counts: Vec<HashMap<String, u64>> = classes
        .iter()
        .map(|docs| {
            let mut tf: HashMap<String, u64> = HashMap::new();
            for doc in docs {
                for token in word_tokens(doc) {
                    if remove_stopwords && is_stopword(&token) {
                        continue;
                    }
                    *tf.entry(token).or_default() += 1;
                }
            }
            tf
        })
        .collect();
    let mut total: BTreeMap<&str, u64> = BTreeMap::new();
    for tf in &counts {
        for (t, &c) in tf {
            *total.entry(t.as_str()).or_default() += c;
        }
    }
    let words: u64 = total.values().sum();
    let avg = if classes.is_empty() {
        0.0
    } else {
        words as f64 / classes.len() as f64
    };
    counts
        .iter()
        .map(|tf| {
            let mut scored: Vec<Keyword> = tf
                .iter()
                .map(|(t, &c)| Keyword {
                    term: t.clone(),
                    weight: c as f64 * (1.0 + avg / total[t.as_str()] as f64).ln(),
                })
                .collect();
            scored.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.term.cmp(&b.term)));
            scored.truncate(n);
            scored
        })
        .collect()
}
