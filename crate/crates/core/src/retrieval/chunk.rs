use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ReviewCorpus;

/// Shortest trailing chunk worth keeping when a review yields several.
pub const MIN_TAIL_CHARS: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chunk {
    /// `{review_id}#{n}`, `n` counting from 0.
    pub chunk_id: String,
    pub review_id: String,
    pub text: String,
    /// Offset of `text` in the review, in characters.
    pub char_offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkConfig {
    /// Characters per chunk.
    pub size: usize,
    /// Characters shared by consecutive chunks.
    pub overlap: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig {
            size: 512,
            overlap: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("chunk overlap {overlap} must be smaller than chunk size {size}")]
pub struct ChunkError {
    pub size: usize,
    pub overlap: usize,
}

impl ChunkConfig {
    pub fn validate(&self) -> Result<(), ChunkError> {
        if self.size == 0 || self.overlap >= self.size {
            return Err(ChunkError {
                size: self.size,
                overlap: self.overlap,
            });
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.size - self.overlap
    }
}

/// `(char offset, text)` windows of `text`.
pub fn split_text(text: &str, config: ChunkConfig) -> Result<Vec<(usize, String)>, ChunkError> {
    config.validate()?;
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + config.size).min(n);
        let piece: String = chars[start..end].iter().collect();
        if out.is_empty() || end - start >= MIN_TAIL_CHARS {
            out.push((start, piece));
        }
        if end >= n {
            break;
        }
        start += config.stride();
    }
    Ok(out)
}

pub fn chunk_corpus(corpus: &ReviewCorpus, config: ChunkConfig) -> Result<Vec<Chunk>, ChunkError> {
    config.validate()?;
    let mut chunks = Vec::new();
    for review in corpus.reviews() {
        for (n, (char_offset, text)) in split_text(&review.text, config)?.into_iter().enumerate() {
            chunks.push(Chunk {
                chunk_id: format!("{}#{n}", review.review_id),
                review_id: review.review_id.clone(),
                text,
                char_offset,
            });
        }
    }
    Ok(chunks)
}

/// Concatenate one review's chunks (in offset order) with overlaps removed.
pub fn reassemble(chunks: &[Chunk]) -> String {
    let mut out = String::new();
    let mut covered: usize = 0;
    for c in chunks {
        let skip = covered.saturating_sub(c.char_offset);
        out.extend(c.text.chars().skip(skip));
        covered = covered.max(c.char_offset + c.text.chars().count());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn offsets(n: usize, size: usize, overlap: usize) -> Vec<usize> {
        split_text(&"x".repeat(n), ChunkConfig { size, overlap })
            .unwrap()
            .into_iter()
            .map(|(o, _)| o)
            .collect()
    }

    #[test]
    fn stride_arithmetic() {
        assert_eq!(offsets(1000, 512, 128), [0, 384, 768]);
        assert_eq!(offsets(100, 512, 128), [0]);
        assert_eq!(offsets(512, 512, 128), [0]);
        assert!(split_text("abc", ChunkConfig { size: 10, overlap: 10 }).is_err());
    }

    #[test]
    fn short_tail_dropped_unless_only_chunk() {
        // 520 chars, no overlap: the 8-char tail goes.
        assert_eq!(offsets(520, 512, 0), [0]);
        assert_eq!(offsets(5, 512, 0), [0]);
        assert_eq!(offsets(544, 512, 0), [0, 512]);
    }

    #[test]
    fn multibyte_text_is_split_on_chars() {
        let text = "é".repeat(600);
        let parts = split_text(&text, ChunkConfig { size: 512, overlap: 128 }).unwrap();
        assert_eq!(parts[0].1.chars().count(), 512);
        assert_eq!(parts[1].0, 384);
    }
}
