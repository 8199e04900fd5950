//! Chunking, embedding, exact cosine search and retrieval quality metrics.

mod chunk;
mod embed;
mod index;

pub use chunk::{chunk_corpus, reassemble, split_text, Chunk, ChunkConfig, ChunkError, MIN_TAIL_CHARS};
pub use embed::{
    normalize, EmbedError, Embedder, HashedNgramEmbedder, RemoteEmbedConfig, RemoteEmbedder,
    FALLBACK_DIM, NGRAM_RANGE,
};
pub use index::{IndexError, IndexHeader, SearchHit, SearchResult, VectorIndex};

use std::collections::BTreeSet;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("vectors have dimensions {0} and {1}")]
    DimMismatch(usize, usize),
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("empty search result")]
    EmptyResult,
}

pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::DimMismatch(a.len(), b.len()));
    }
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(MetricError::ZeroNorm);
    }
    Ok(ab / (aa.sqrt() * bb.sqrt()))
}

/// Distinct source reviews over retrieved chunks.
pub fn retrieval_diversity(result: &SearchResult) -> Result<f64, MetricError> {
    if result.hits.is_empty() {
        return Err(MetricError::EmptyResult);
    }
    let distinct: BTreeSet<&str> = result.hits.iter().map(|h| h.review_id.as_str()).collect();
    Ok(distinct.len() as f64 / result.hits.len() as f64)
}

pub fn avg_cosine(result: &SearchResult) -> Result<f64, MetricError> {
    if result.hits.is_empty() {
        return Err(MetricError::EmptyResult);
    }
    Ok(result.hits.iter().map(|h| h.score).sum::<f64>() / result.hits.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(reviews: &[&str], scores: &[f64]) -> SearchResult {
        SearchResult {
            query: "q".into(),
            hits: reviews
                .iter()
                .zip(scores)
                .enumerate()
                .map(|(i, (r, &s))| SearchHit {
                    chunk_id: format!("{r}#{i}"),
                    review_id: r.to_string(),
                    score: s,
                })
                .collect(),
        }
    }

    #[test]
    fn cosine_cases() {
        let v = [0.3f32, -0.2, 0.9];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = std::f32::consts::FRAC_1_SQRT_2;
        assert!((cosine(&[s, s, 0.0], &[1.0, 0.0, 0.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert_eq!(cosine(&[1.0], &[1.0, 0.0]), Err(MetricError::DimMismatch(1, 2)));
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(MetricError::ZeroNorm));
    }

    #[test]
    fn proxy_metrics() {
        assert_eq!(retrieval_diversity(&result(&["a"], &[0.5])).unwrap(), 1.0);
        assert_eq!(retrieval_diversity(&result(&["a", "a", "b", "b"], &[0.0; 4])).unwrap(), 0.5);
        assert!((avg_cosine(&result(&["a", "b"], &[0.8, 0.6])).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(avg_cosine(&result(&[], &[])), Err(MetricError::EmptyResult));
    }
}
