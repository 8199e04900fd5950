//! Review analytics engine.
//!
//! The crate is organised around the stages of a review-mining pipeline:
//!
//! * [`corpus`] loads, cleans, deduplicates and language-filters raw review files.
//! * [`sentiment`] is a lexicon/rule based polarity scorer plus the star-rating
//!   discrepancy analysis built on top of it.
//! * [`llm`] is a provider-agnostic chat-completion layer with prompt templates,
//!   structured output parsing, prompt chaining and an offline fixture backend.
//! * [`aspects`] extracts aspect/sentiment/recommendation triples and evaluates them.
//! * [`retrieval`] chunks reviews, embeds them and serves exact cosine top-k search.
//! * [`topics`] reduces, density-clusters and labels chunk embeddings.
//! * [`ragqa`] answers questions from retrieved, cited review snippets.

pub mod aspects;
pub mod corpus;
pub mod jsonpath;
pub mod llm;
pub mod ragqa;
pub mod retrieval;
pub mod sentiment;
pub mod text;
pub mod topics;

pub use corpus::{Review, ReviewCorpus};
pub use sentiment::{Lexicon, SentimentScores};
