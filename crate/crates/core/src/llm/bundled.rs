//! Prompt templates shipped with the crate.

use super::template::PromptTemplate;

pub const ASPECT_EXTRACT: &str = include_str!("../../templates/aspect_extract.toml");
pub const ASPECT_SENTIMENT: &str = include_str!("../../templates/aspect_sentiment.toml");
pub const RECOMMEND: &str = include_str!("../../templates/recommend.toml");
pub const TOPIC_LABEL: &str = include_str!("../../templates/topic_label.toml");
pub const TOPIC_SUMMARY: &str = include_str!("../../templates/topic_summary.toml");
pub const RAG_ANSWER: &str = include_str!("../../templates/rag_answer.toml");
pub const REFINE_INSTRUCTION: &str = include_str!("../../templates/refine_instruction.toml");

/// `(file stem, TOML text)` for every bundled template.
pub const ALL: [(&str, &str); 7] = [
    ("aspect_extract", ASPECT_EXTRACT),
    ("aspect_sentiment", ASPECT_SENTIMENT),
    ("recommend", RECOMMEND),
    ("topic_label", TOPIC_LABEL),
    ("topic_summary", TOPIC_SUMMARY),
    ("rag_answer", RAG_ANSWER),
    ("refine_instruction", REFINE_INSTRUCTION),
];

/// Parse one of the bundled template texts.
pub fn load(text: &str) -> PromptTemplate {
    PromptTemplate::from_toml(text).expect("bundled template is valid")
}
