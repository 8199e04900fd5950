//! Choosing between prompt variants on a development set, and asking the
//! model to rewrite an instruction from its failures.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::gateway::{CallError, Gateway};
use super::template::{placeholders, vars, PromptTemplate, Record, Variables};

/// Scores one example: its variables and the parsed record, `None` on failure.
pub type Scorer<'a> = &'a (dyn Fn(&Variables, Option<&Record>) -> f64 + Sync);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateScore {
    pub template_id: String,
    pub score: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub best: String,
    pub scores: Vec<TemplateScore>,
}

#[derive(Debug, Error, PartialEq)]
pub enum OptimizeError {
    #[error("no candidate templates")]
    NoCandidates,
    #[error("empty development set")]
    EmptyDevSet,
    #[error("every variant failed on every example")]
    AllFailed,
    #[error("no failure cases to learn from")]
    NoFailures,
    #[error("meta-prompt failed: {0}")]
    Meta(#[source] CallError),
    #[error("rewritten instruction changes placeholders (missing {missing:?}, unexpected {unexpected:?})")]
    PlaceholderMismatch {
        missing: Vec<String>,
        unexpected: Vec<String>,
    },
}

/// Mean score of `template` over `dev_set`.
pub fn score_template(
    gateway: &Gateway,
    template: &PromptTemplate,
    dev_set: &[Variables],
    scorer: Scorer<'_>,
) -> TemplateScore {
    let mut total = 0.0;
    let mut failures = 0;
    for example in dev_set {
        match gateway.call_structured(template, example) {
            Ok(out) => total += scorer(example, Some(&out.record)),
            Err(e) => {
                log::debug!("{}: dev example failed: {e}", template.template_id);
                failures += 1;
                total += scorer(example, None);
            }
        }
    }
    TemplateScore {
        template_id: template.template_id.clone(),
        score: if dev_set.is_empty() {
            0.0
        } else {
            total / dev_set.len() as f64
        },
        failures,
    }
}

/// Highest mean score wins; ties go to the lexicographically smallest id.
pub fn select_template(
    gateway: &Gateway,
    candidates: &[PromptTemplate],
    dev_set: &[Variables],
    scorer: Scorer<'_>,
) -> Result<Selection, OptimizeError> {
    if candidates.is_empty() {
        return Err(OptimizeError::NoCandidates);
    }
    if dev_set.is_empty() {
        return Err(OptimizeError::EmptyDevSet);
    }
    let scores: Vec<TemplateScore> = candidates
        .iter()
        .map(|t| score_template(gateway, t, dev_set, scorer))
        .collect();
    if scores.iter().all(|s| s.failures == dev_set.len()) {
        return Err(OptimizeError::AllFailed);
    }
    let best = scores
        .iter()
        .reduce(|best, s| {
            let better = s.score > best.score
                || (s.score == best.score && s.template_id < best.template_id);
            if better {
                s
            } else {
                best
            }
        })
        .expect("non-empty")
        .template_id
        .clone();
    Ok(Selection { best, scores })
}

/// A dev example the current template got wrong.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureCase {
    pub input: String,
    pub wrong_output: String,
    pub gold: String,
}

fn format_failures(failures: &[FailureCase]) -> String {
    failures
        .iter()
        .enumerate()
        .map(|(i, f)| {
            format!(
                "{}. Input: {}\n   Wrong output: {}\n   Expected: {}",
                i + 1,
                f.input,
                f.wrong_output,
                f.gold
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Ask `meta` (schema `{instruction}`) to rewrite the instruction of
/// `template` in light of `failures`. Each round rewrites the previous
/// round's variant; the result has id `{id}-r{rounds}` and the same schema,
/// few-shot examples and placeholders as `template`.
///
/// `meta` receives `{template_id}`, `{instructions}` and `{failures}`.
pub fn refine_template(
    gateway: &Gateway,
    template: &PromptTemplate,
    meta: &PromptTemplate,
    failures: &[FailureCase],
    rounds: u32,
) -> Result<PromptTemplate, OptimizeError> {
    if failures.is_empty() {
        return Err(OptimizeError::NoFailures);
    }
    let wanted = template.placeholders();
    let failure_text = format_failures(failures);
    let mut current = template.clone();
    for round in 1..=rounds.max(1) {
        let request = vars([
            ("template_id", current.template_id.as_str()),
            ("instructions", current.instructions.as_str()),
            ("failures", failure_text.as_str()),
        ]);
        let proposal = gateway
            .call_structured(meta, &request)
            .map_err(OptimizeError::Meta)?;
        let instruction = proposal.record.text("instruction").unwrap_or_default();
        let got = placeholders(instruction);
        if got != wanted {
            return Err(OptimizeError::PlaceholderMismatch {
                missing: wanted.difference(&got).cloned().collect(),
                unexpected: got.difference(&wanted).cloned().collect(),
            });
        }
        current = PromptTemplate {
            template_id: format!("{}-r{round}", template.template_id),
            instructions: instruction.to_string(),
            ..current
        };
    }
    Ok(current)
}
