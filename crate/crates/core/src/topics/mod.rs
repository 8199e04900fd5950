//! Topic discovery over chunk embeddings: reduce, density-cluster, score
//! keywords, then label and summarise each cluster.

mod hdbscan;
mod keywords;
mod label;
mod reduce;
mod silhouette;

pub use hdbscan::{hdbscan, ClusterError, NOISE};
pub use keywords::{ctfidf_keywords, Keyword};
pub use label::{
    check_label, label_topic, label_variables, representative_members, summarize_topic,
    summary_variables, title_case, SummaryError, MAX_LABEL_WORDS,
};
pub use reduce::{PcaReducer, ReduceError, Reducer};
pub use silhouette::{silhouette, SilhouetteError};

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{bundled, CallError, Gateway, PromptTemplate};
use crate::retrieval::VectorIndex;

#[derive(Debug, Error)]
pub enum TopicError {
    #[error("index is empty")]
    EmptyIndex,
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("labelling topic {topic_id}: {source}")]
    Label {
        topic_id: usize,
        #[source]
        source: CallError,
    },
    #[error("summarising topic {topic_id}: {source}")]
    Summary {
        topic_id: usize,
        #[source]
        source: SummaryError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicSettings {
    pub target_dim: usize,
    pub min_cluster_size: usize,
    pub top_keywords: usize,
    /// Documents sampled per topic for its summary.
    pub summary_docs: usize,
    pub remove_stopwords: bool,
}

impl Default for TopicSettings {
    fn default() -> Self {
        TopicSettings {
            target_dim: 5,
            min_cluster_size: 15,
            top_keywords: 10,
            summary_docs: 10,
            remove_stopwords: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub chunk_id: String,
    /// `-1` for noise.
    pub cluster_id: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCluster {
    pub topic_id: usize,
    pub member_chunk_ids: Vec<String>,
    pub count: usize,
    pub keywords: Vec<Keyword>,
    pub label: String,
    pub summary: String,
    #[serde(default)]
    pub exchange_ids: Vec<u64>,
}

/// Silhouette in the reduced space and in the original embedding space;
/// `None` when fewer than two topics were found.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SilhouetteScores {
    pub reduced: Option<f64>,
    pub full: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub reducer: String,
    pub settings: TopicSettings,
    pub assignments: Vec<ClusterAssignment>,
    pub topics: Vec<TopicCluster>,
    pub noise: usize,
    pub silhouette: SilhouetteScores,
    #[serde(skip)]
    reduced: Vec<Vec<f64>>,
}

impl TopicModel {
    pub fn topic(&self, topic_id: usize) -> Option<&TopicCluster> {
        self.topics.iter().find(|t| t.topic_id == topic_id)
    }
}

fn full_vectors(index: &VectorIndex) -> Vec<Vec<f64>> {
    index
        .vectors()
        .map(|v| v.iter().map(|&x| x as f64).collect())
        .collect()
}

/// Reduce, cluster and keyword-score every chunk of `index`. Labels and
/// summaries are left empty; see [`describe_topics`].
pub fn discover_topics(
    index: &VectorIndex,
    reducer: &dyn Reducer,
    settings: TopicSettings,
) -> Result<TopicModel, TopicError> {
    if index.is_empty() {
        return Err(TopicError::EmptyIndex);
    }
    let full = full_vectors(index);
    let reduced = reducer.reduce(&full, settings.target_dim)?;
    let labels = hdbscan(&reduced, settings.min_cluster_size)?;
    let chunks = index.chunks();
    let assignments: Vec<ClusterAssignment> = chunks
        .iter()
        .zip(&labels)
        .map(|(c, &l)| ClusterAssignment {
            chunk_id: c.chunk_id.clone(),
            cluster_id: l,
        })
        .collect();
    let n_topics = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_topics];
    for (i, &l) in labels.iter().enumerate() {
        if l >= 0 {
            members[l as usize].push(i);
        }
    }
    let classes: Vec<Vec<&str>> = members
        .iter()
        .map(|m| m.iter().map(|&i| chunks[i].text.as_str()).collect())
        .collect();
    let keywords = ctfidf_keywords(&classes, settings.top_keywords, settings.remove_stopwords);
    let topics = members
        .iter()
        .zip(keywords)
        .enumerate()
        .map(|(topic_id, (m, keywords))| TopicCluster {
            topic_id,
            member_chunk_ids: m.iter().map(|&i| chunks[i].chunk_id.clone()).collect(),
            count: m.len(),
            keywords,
            label: String::new(),
            summary: String::new(),
            exchange_ids: Vec::new(),
        })
        .collect();
    let silhouette = if n_topics >= 2 {
        SilhouetteScores {
            reduced: silhouette(&reduced, &labels).ok(),
            full: silhouette(&full, &labels).ok(),
        }
    } else {
        SilhouetteScores::default()
    };
    Ok(TopicModel {
        reducer: reducer.id(),
        settings,
        noise: labels.iter().filter(|&&l| l == NOISE).count(),
        assignments,
        topics,
        silhouette,
        reduced,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicTemplates {
    pub label: PromptTemplate,
    pub summary: PromptTemplate,
}

impl TopicTemplates {
    pub fn bundled() -> Self {
        TopicTemplates {
            label: bundled::load(bundled::TOPIC_LABEL),
            summary: bundled::load(bundled::TOPIC_SUMMARY),
        }
    }
}

/// Keywords and representative documents for one topic's prompts.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicPromptInputs {
    pub topic_id: usize,
    pub keywords: Vec<String>,
    pub documents: Vec<String>,
}

/// Prompt inputs for every topic, in id order. Documents are the members
/// nearest the medoid in the reduced space.
pub fn topic_prompt_inputs(model: &TopicModel, index: &VectorIndex) -> Vec<TopicPromptInputs> {
    let chunks = index.chunks();
    let position: std::collections::HashMap<&str, usize> = chunks
        .iter()
        .enumerate()
        .map(|(i, c)| (c.chunk_id.as_str(), i))
        .collect();
    let space = if model.reduced.len() == chunks.len() {
        model.reduced.clone()
    } else {
        full_vectors(index)
    };
    model
        .topics
        .iter()
        .map(|topic| {
            let members: Vec<usize> = topic
                .member_chunk_ids
                .iter()
                .filter_map(|id| position.get(id.as_str()).copied())
                .collect();
            let sample = representative_members(&members, &space, model.settings.summary_docs);
            TopicPromptInputs {
                topic_id: topic.topic_id,
                keywords: topic.keywords.iter().map(|k| k.term.clone()).collect(),
                documents: sample.iter().map(|&i| chunks[i].text.clone()).collect(),
            }
        })
        .collect()
}

/// Fill in labels and summaries, topic by topic in id order.
pub fn describe_topics(
    model: &mut TopicModel,
    index: &VectorIndex,
    gateway: &Gateway,
    templates: &TopicTemplates,
) -> Result<(), TopicError> {
    let inputs = topic_prompt_inputs(model, index);
    for (topic, input) in model.topics.iter_mut().zip(inputs) {
        let (label, out) = label_topic(&input.keywords, gateway, &templates.label).map_err(|source| TopicError::Label {
            topic_id: topic.topic_id,
            source,
        })?;
        topic.label = label;
        topic.exchange_ids.extend(out.exchange_ids);

        let docs: Vec<&str> = input.documents.iter().map(String::as_str).collect();
        let (summary, out) = summarize_topic(&docs, model.settings.summary_docs, gateway, &templates.summary)
            .map_err(|source| TopicError::Summary {
                topic_id: topic.topic_id,
                source,
            })?;
        topic.summary = summary;
        topic.exchange_ids.extend(out.exchange_ids);
    }
    Ok(())
}

/// Columns `topic_id, count, top_keywords, label, summary`; keywords are
/// `;`-joined.
pub fn write_topic_table(topics: &[TopicCluster], w: impl Write) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["topic_id", "count", "top_keywords", "label", "summary"])?;
    for t in topics {
        let keywords = t.keywords.iter().map(|k| k.term.as_str()).collect::<Vec<_>>().join(";");
        out.write_record([
            t.topic_id.to_string(),
            t.count.to_string(),
            keywords,
            t.label.clone(),
            t.summary.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::Chunk;

    fn index_with_two_groups() -> VectorIndex {
        let mut idx = VectorIndex::new(3, "test");
        for i in 0..12 {
            let (text, base) = if i < 6 {
                ("shuffle keeps playing the same songs", [1.0f32, 0.0, 0.0])
            } else {
                ("offline downloads vanish in offline mode", [0.0f32, 1.0, 0.0])
            };
            let jitter = 0.01 * (i % 6) as f32;
            let chunk = Chunk {
                chunk_id: format!("r{i}#0"),
                review_id: format!("r{i}"),
                text: text.into(),
                char_offset: 0,
            };
            idx.insert(chunk, vec![base[0] + jitter, base[1], base[2] + jitter]).unwrap();
        }
        idx
    }

    #[test]
    fn discovers_planted_groups() {
        let settings = TopicSettings {
            target_dim: 2,
            min_cluster_size: 3,
            ..Default::default()
        };
        let model = discover_topics(&index_with_two_groups(), &PcaReducer, settings).unwrap();
        assert_eq!(model.topics.len(), 2);
        assert_eq!(model.noise, 0);
        let counts: usize = model.topics.iter().map(|t| t.count).sum();
        assert_eq!(counts, 12);
        let kw: Vec<&str> = model.topics.iter().map(|t| t.keywords[0].term.as_str()).collect();
        assert!(kw.contains(&"offline"), "{kw:?}");
        assert!(model.silhouette.reduced.unwrap() > 0.5);

        let mut csv = Vec::new();
        write_topic_table(&model.topics, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("topic_id,count,top_keywords,label,summary\n0,6,"));
    }

    #[test]
    fn empty_table_is_header_only() {
        let mut csv = Vec::new();
        write_topic_table(&[], &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "topic_id,count,top_keywords,label,summary\n");
    }
}
