use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::chunk::Chunk;
use super::embed::{normalize, EmbedError, Embedder};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("index is empty")]
    Empty,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("vector has dimension {got}, index has {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("vector for {0} has zero norm")]
    ZeroNorm(String),
    #[error("duplicate chunk id {0}")]
    DuplicateId(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("index file: {0}")]
    Io(#[from] std::io::Error),
    #[error("index file is corrupt: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub chunk_id: String,
    pub review_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub query: String,
    pub hits: Vec<SearchHit>,
}

impl SearchResult {
    pub fn scores(&self) -> Vec<f64> {
        self.hits.iter().map(|h| h.score).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexHeader {
    pub dim: usize,
    pub count: usize,
    pub embedder_id: String,
}

/// Exact cosine index: unit vectors in one flat f32 buffer, scanned in full.
#[derive(Debug, Clone, Default)]
pub struct VectorIndex {
    dim: usize,
    embedder_id: String,
    chunks: Vec<Chunk>,
    vectors: Vec<f32>,
    positions: HashMap<String, usize>,
}

/// Heap entry ordered so that the heap's max is the weakest kept hit.
struct Candidate<'a> {
    score: f64,
    chunk_id: &'a str,
    pos: usize,
}

impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Greater = ranks later: lower score, then larger id.
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.chunk_id.cmp(other.chunk_id))
    }
}

impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate<'_> {}

pub(crate) fn dot(q: &[f64], v: &[f32]) -> f64 {
    q.iter().zip(v).map(|(&a, &b)| a * b as f64).sum()
}

impl VectorIndex {
    pub fn new(dim: usize, embedder_id: impl Into<String>) -> Self {
        VectorIndex {
            dim,
            embedder_id: embedder_id.into(),
            ..Default::default()
        }
    }

    /// Embed and insert every chunk.
    pub fn build(chunks: Vec<Chunk>, embedder: &dyn Embedder) -> Result<Self, IndexError> {
        const BATCH: usize = 64;
        let vectors: Vec<Vec<Vec<f32>>> = chunks
            .par_chunks(BATCH)
            .map(|batch| {
                let texts: Vec<&str> = batch.iter().map(|c| c.text.as_str()).collect();
                embedder.embed(&texts)
            })
            .collect::<Result<_, _>>()?;
        let mut index = VectorIndex::new(embedder.dim(), embedder.id());
        for (chunk, v) in chunks.into_iter().zip(vectors.into_iter().flatten()) {
            index.insert(chunk, v)?;
        }
        Ok(index)
    }

    /// Insert `vector` (normalized here) for `chunk`.
    pub fn insert(&mut self, chunk: Chunk, mut vector: Vec<f32>) -> Result<(), IndexError> {
        if vector.len() != self.dim {
            return Err(IndexError::DimMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if self.positions.contains_key(&chunk.chunk_id) {
            return Err(IndexError::DuplicateId(chunk.chunk_id));
        }
        if !normalize(&mut vector) {
            return Err(IndexError::ZeroNorm(chunk.chunk_id));
        }
        self.positions.insert(chunk.chunk_id.clone(), self.chunks.len());
        self.chunks.push(chunk);
        self.vectors.extend_from_slice(&vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.positions.get(chunk_id).map(|&p| &self.chunks[p])
    }

    pub fn vector(&self, chunk_id: &str) -> Option<&[f32]> {
        self.positions.get(chunk_id).map(|&p| self.row(p))
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f32]> {
        self.vectors.chunks_exact(self.dim.max(1))
    }

    fn row(&self, pos: usize) -> &[f32] {
        &self.vectors[pos * self.dim..(pos + 1) * self.dim]
    }

    pub fn header(&self) -> IndexHeader {
        IndexHeader {
            dim: self.dim,
            count: self.len(),
            embedder_id: self.embedder_id.clone(),
        }
    }

    /// Exact top-`k` by cosine; ties broken by ascending chunk id.
    pub fn search(&self, query: &[f32], k: usize) -> Result<Vec<SearchHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        if self.is_empty() {
            return Err(IndexError::Empty);
        }
        if query.len() != self.dim {
            return Err(IndexError::DimMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        let norm = query.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(IndexError::ZeroNorm("query".into()));
        }
        let q: Vec<f64> = query.iter().map(|&x| x as f64 / norm).collect();
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        for (pos, chunk) in self.chunks.iter().enumerate() {
            let cand = Candidate {
                score: dot(&q, self.row(pos)).clamp(-1.0, 1.0),
                chunk_id: &chunk.chunk_id,
                pos,
            };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("heap holds k items") {
                heap.pop();
                heap.push(cand);
            }
        }
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| SearchHit {
                chunk_id: c.chunk_id.to_string(),
                review_id: self.chunks[c.pos].review_id.clone(),
                score: c.score,
            })
            .collect())
    }

    pub fn search_text(&self, query: &str, embedder: &dyn Embedder, k: usize) -> Result<SearchResult, IndexError> {
        let v = embedder.embed_one(query)?;
        Ok(SearchResult {
            query: query.to_string(),
            hits: self.search(&v, k)?,
        })
    }

    /// Header line (JSON) then `count * dim` little-endian f32 values.
    pub fn write_vectors(&self, mut w: impl Write) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &self.header())?;
        w.write_all(b"\n")?;
        for x in &self.vectors {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    /// One JSON chunk record per line, in index order.
    pub fn write_chunks(&self, mut w: impl Write) -> std::io::Result<()> {
        for c in &self.chunks {
            serde_json::to_writer(&mut w, c)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, vectors_path: &Path, chunks_path: &Path) -> Result<(), IndexError> {
        let mut v = std::io::BufWriter::new(std::fs::File::create(vectors_path)?);
        self.write_vectors(&mut v)?;
        v.flush()?;
        let mut c = std::io::BufWriter::new(std::fs::File::create(chunks_path)?);
        self.write_chunks(&mut c)?;
        c.flush()?;
        Ok(())
    }

    pub fn load(vectors_path: &Path, chunks_path: &Path) -> Result<Self, IndexError> {
        let vectors = std::fs::read(vectors_path)?;
        let chunks = std::fs::read(chunks_path)?;
        Self::from_bytes(&vectors, &chunks)
    }

    /// Decode the two persisted files.
    pub fn from_bytes(vectors: &[u8], chunks: &[u8]) -> Result<Self, IndexError> {
        let corrupt = |m: String| IndexError::Corrupt(m);
        let newline = vectors
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| corrupt("missing header line".into()))?;
        let header: IndexHeader = serde_json::from_slice(&vectors[..newline])
            .map_err(|e| corrupt(format!("header: {e}")))?;
        let body = &vectors[newline + 1..];
        let expected = header
            .count
            .checked_mul(header.dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| corrupt("header sizes overflow".into()))?;
        if body.len() != expected {
            return Err(corrupt(format!(
                "{} vector bytes, header implies {expected}",
                body.len()
            )));
        }
        let mut records = Vec::with_capacity(header.count);
        for (i, line) in chunks.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let c: Chunk = serde_json::from_str(&line)
                .map_err(|e| corrupt(format!("chunk line {}: {e}", i + 1)))?;
            records.push(c);
        }
        if records.len() != header.count {
            return Err(corrupt(format!(
                "{} chunk records, header says {}",
                records.len(),
                header.count
            )));
        }
        let mut index = VectorIndex::new(header.dim, header.embedder_id);
        let floats = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
        let mut floats = floats.collect::<Vec<f32>>().into_iter();
        for chunk in records {
            let row: Vec<f32> = floats.by_ref().take(header.dim).collect();
            if row.iter().any(|x| !x.is_finite()) {
                return Err(corrupt(format!("non-finite value for {}", chunk.chunk_id)));
            }
            index.insert(chunk, row)?;
        }
        Ok(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(id: &str, review: &str) -> Chunk {
        Chunk {
            chunk_id: id.into(),
            review_id: review.into(),
            text: id.into(),
            char_offset: 0,
        }
    }

    fn small() -> VectorIndex {
        let mut idx = VectorIndex::new(2, "test");
        idx.insert(chunk("c", "r1"), vec![1.0, 0.0]).unwrap();
        idx.insert(chunk("a", "r2"), vec![0.0, 1.0]).unwrap();
        idx.insert(chunk("b", "r3"), vec![0.0, 2.0]).unwrap();
        idx
    }

    #[test]
    fn ranks_with_id_tiebreak() {
        let hits = small().search(&[0.0, 1.0], 10).unwrap();
        let ids: Vec<&str> = hits.iter().map(|h| h.chunk_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(hits[0].score, 1.0);
        assert_eq!(hits[2].score, 0.0);
        let top1 = small().search(&[0.0, 1.0], 1).unwrap();
        assert_eq!(top1[0].chunk_id, "a");
    }

    #[test]
    fn rejects_bad_input() {
        let mut idx = small();
        assert!(matches!(idx.search(&[1.0], 1), Err(IndexError::DimMismatch { .. })));
        assert!(matches!(idx.search(&[1.0, 0.0], 0), Err(IndexError::ZeroK)));
        assert!(matches!(idx.search(&[0.0, 0.0], 1), Err(IndexError::ZeroNorm(_))));
        assert!(matches!(
            idx.insert(chunk("a", "r"), vec![1.0, 1.0]),
            Err(IndexError::DuplicateId(_))
        ));
        assert!(matches!(
            VectorIndex::new(2, "e").search(&[1.0, 0.0], 1),
            Err(IndexError::Empty)
        ));
    }

    #[test]
    fn persistence_round_trip() {
        let idx = small();
        let (mut v, mut c) = (Vec::new(), Vec::new());
        idx.write_vectors(&mut v).unwrap();
        idx.write_chunks(&mut c).unwrap();
        let back = VectorIndex::from_bytes(&v, &c).unwrap();
        assert_eq!(back.header(), idx.header());
        assert_eq!(back.chunks(), idx.chunks());
        assert_eq!(
            back.search(&[0.3, 0.7], 3).unwrap(),
            idx.search(&[0.3, 0.7], 3).unwrap()
        );
        assert!(VectorIndex::from_bytes(&v[..v.len() - 1], &c).is_err());
        assert!(VectorIndex::from_bytes(b"nope", &c).is_err());
    }
}
