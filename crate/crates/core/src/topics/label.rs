use crate::llm::{vars, CallError, Gateway, PromptTemplate, Record, StructuredOutput, Variables};

pub const MAX_LABEL_WORDS: usize = 8;

const MINOR_WORDS: [&str; 14] = [
    "a", "an", "and", "as", "at", "but", "by", "for", "in", "of", "on", "or", "the", "to",
];

/// Capitalise each word's first letter; short function words stay lowercase
/// except at either end.
pub fn title_case(text: &str) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    let last = words.len().saturating_sub(1);
    words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let lower = w.to_lowercase();
            if i != 0 && i != last && MINOR_WORDS.contains(&lower.as_str()) {
                return lower;
            }
            let mut chars = w.chars();
            match chars.next() {
                Some(c) => c.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn check_label(label: &str) -> Result<(), String> {
    let label = label.trim();
    if label.is_empty() {
        return Err("the label is empty".into());
    }
    if label.contains(['\n', '\r']) {
        return Err("the label must be a single line".into());
    }
    let words = label.split_whitespace().count();
    if words > MAX_LABEL_WORDS {
        return Err(format!("the label has {words} words; use at most {MAX_LABEL_WORDS}"));
    }
    Ok(())
}

pub fn label_variables(keywords: &[String]) -> Variables {
    vars([("keywords", keywords.join(", ").as_str())])
}

/// Documents numbered from 1, one per line, whitespace collapsed.
pub fn summary_variables(docs: &[&str]) -> Variables {
    let numbered = docs
        .iter()
        .enumerate()
        .map(|(i, d)| format!("{}. {}", i + 1, d.split_whitespace().collect::<Vec<_>>().join(" ")))
        .collect::<Vec<_>>()
        .join("\n");
    vars([("documents", numbered.as_str())])
}

/// Title-case topic label for `keywords`, validated (single line, at most
/// eight words) with one repair re-prompt.
pub fn label_topic(
    keywords: &[String],
    gateway: &Gateway,
    template: &PromptTemplate,
) -> Result<(String, StructuredOutput), CallError> {
    let check = |r: &Record| check_label(r.text("label").unwrap_or_default());
    let out = gateway.call_structured_checked(template, &label_variables(keywords), &check)?;
    let label = title_case(out.record.text("label").unwrap_or_default());
    Ok((label, out))
}

#[derive(Debug, thiserror::Error)]
pub enum SummaryError {
    #[error("need between 1 and {cap} sample documents, got {got}")]
    SampleSize { got: usize, cap: usize },
    #[error(transparent)]
    Call(#[from] CallError),
}

pub fn summarize_topic(
    docs: &[&str],
    cap: usize,
    gateway: &Gateway,
    template: &PromptTemplate,
) -> Result<(String, StructuredOutput), SummaryError> {
    if docs.is_empty() || docs.len() > cap {
        return Err(SummaryError::SampleSize { got: docs.len(), cap });
    }
    let check = |r: &Record| {
        if r.text("summary").unwrap_or_default().trim().is_empty() {
            Err("the summary is empty".to_string())
        } else {
            Ok(())
        }
    };
    let out = gateway.call_structured_checked(template, &summary_variables(docs), &check)?;
    let summary = out.record.text("summary").unwrap_or_default().trim().to_string();
    Ok((summary, out))
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Up to `cap` members nearest the cluster medoid (the member with the
/// smallest total distance to the others), medoid first; ties by index.
pub fn representative_members(members: &[usize], vectors: &[Vec<f64>], cap: usize) -> Vec<usize> {
    let Some(&medoid) = members.iter().min_by(|&&a, &&b| {
        let cost = |p: usize| members.iter().map(|&q| euclidean(&vectors[p], &vectors[q])).sum::<f64>();
        cost(a).total_cmp(&cost(b)).then(a.cmp(&b))
    }) else {
        return Vec::new();
    };
    let mut ranked: Vec<(f64, usize)> = members
        .iter()
        .map(|&m| (euclidean(&vectors[medoid], &vectors[m]), m))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked.into_iter().take(cap).map(|(_, m)| m).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn title_casing() {
        assert_eq!(title_case("unexpected playback and queue failures"), "Unexpected Playback and Queue Failures");
        assert_eq!(title_case("the UI of the app"), "The UI of the App");
        assert_eq!(title_case("  offline   playback issues "), "Offline Playback Issues");
    }

    #[test]
    fn label_rules() {
        assert!(check_label("Offline Playback Issues").is_ok());
        assert!(check_label("one two three four five six seven eight nine").is_err());
        assert!(check_label("two\nlines").is_err());
        assert!(check_label("  ").is_err());
    }

    #[test]
    fn medoid_sampling() {
        let v: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 10.0].iter().map(|&x| vec![x]).collect();
        assert_eq!(representative_members(&[0, 1, 2, 3], &v, 2), [1, 0]);
        assert_eq!(representative_members(&[3], &v, 10), [3]);
        assert!(representative_members(&[], &v, 3).is_empty());
    }
}
