use proptest::prelude::*;

use reviewlens_core::retrieval::{
    avg_cosine, chunk_corpus, cosine, reassemble, retrieval_diversity, split_text, Chunk, ChunkConfig, Embedder,
    HashedNgramEmbedder, VectorIndex, MIN_TAIL_CHARS,
};
use reviewlens_core::{Review, ReviewCorpus};

fn chunk(review: &str, n: usize, text: &str) -> Chunk {
    Chunk {
        chunk_id: format!("{review}#{n}"),
        review_id: review.to_string(),
        text: text.to_string(),
        char_offset: 0,
    }
}

fn config() -> impl Strategy<Value = ChunkConfig> {
    (40usize..200).prop_flat_map(|size| {
        (MIN_TAIL_CHARS..size.min(MIN_TAIL_CHARS + 40)).prop_map(move |overlap| ChunkConfig { size, overlap })
    })
}

proptest! {
    #[test]
    fn chunks_reassemble_to_the_review(text in "x[a-zé😀 .,!]{0,600}", cfg in config()) {
        let review = Review::new("r1", text.clone(), 4).unwrap();
        let corpus = ReviewCorpus::from_reviews(vec![review]).unwrap();
        let chunks = chunk_corpus(&corpus, cfg).unwrap();
        prop_assert_eq!(reassemble(&chunks), corpus.reviews()[0].text.clone());
        for c in &chunks {
            prop_assert!(c.text.chars().count() <= cfg.size);
        }
    }

    #[test]
    fn chunk_offsets_advance_by_stride(text in "[a-z ]{1,800}", cfg in config()) {
        let parts = split_text(&text, cfg).unwrap();
        for w in parts.windows(2) {
            prop_assert_eq!(w[1].0 - w[0].0, cfg.size - cfg.overlap);
        }
    }

    #[test]
    fn ranking_ignores_query_scale(scale in 0.01f32..100.0, seed in 0usize..50) {
        let emb = HashedNgramEmbedder::default();
        let texts = ["app crashes", "great playlists", "login fails", "sync is slow", "ads everywhere", "crashes on login"];
        let chunks: Vec<Chunk> = texts.iter().enumerate().map(|(i, t)| chunk(&format!("r{i}"), 0, t)).collect();
        let index = VectorIndex::build(chunks, &emb).unwrap();
        let q = emb.embed_one(texts[seed % texts.len()]).unwrap();
        let scaled: Vec<f32> = q.iter().map(|x| x * scale).collect();
        let a: Vec<String> = index.search(&q, 4).unwrap().into_iter().map(|h| h.chunk_id).collect();
        let b: Vec<String> = index.search(&scaled, 4).unwrap().into_iter().map(|h| h.chunk_id).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn cosine_is_symmetric_and_bounded(a in prop::collection::vec(-10.0f32..10.0, 8), b in prop::collection::vec(-10.0f32..10.0, 8)) {
        if let (Ok(x), Ok(y)) = (cosine(&a, &b), cosine(&b, &a)) {
            prop_assert!((x - y).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn diversity_is_a_fraction(reviews in prop::collection::vec(0usize..6, 1..20), k in 1usize..20) {
        let emb = HashedNgramEmbedder::default();
        let chunks: Vec<Chunk> = reviews.iter().enumerate().map(|(i, r)| chunk(&format!("r{r}"), i, &format!("text {i}"))).collect();
        let index = VectorIndex::build(chunks, &emb).unwrap();
        let result = index.search_text("text", &emb, k).unwrap();
        let d = retrieval_diversity(&result).unwrap();
        prop_assert!(d > 0.0 && d <= 1.0);
        if k == 1 {
            prop_assert_eq!(d, 1.0);
        }
    }

    #[test]
    fn hashed_embeddings_are_unit_and_deterministic(text in "\\PC{0,80}") {
        let emb = HashedNgramEmbedder::default();
        let v = emb.embed_one(&text).unwrap();
        prop_assert_eq!(v.len(), emb.dim());
        let norm: f64 = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-5);
        prop_assert_eq!(v, emb.embed_one(&text).unwrap());
    }
}

#[test]
fn persisted_index_answers_identically() {
    let emb = HashedNgramEmbedder::default();
    let texts = ["app crashes on start", "love the dark mode", "sync fails offline", "crashes after update"];
    let chunks: Vec<Chunk> = texts.iter().enumerate().map(|(i, t)| chunk(&format!("r{i}"), 0, t)).collect();
    let index = VectorIndex::build(chunks, &emb).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (vp, cp) = (dir.path().join("index.bin"), dir.path().join("chunks.jsonl"));
    index.save(&vp, &cp).unwrap();
    let loaded = VectorIndex::load(&vp, &cp).unwrap();
    assert_eq!(loaded.header(), index.header());
    let a = index.search_text("crashes", &emb, 3).unwrap();
    let b = loaded.search_text("crashes", &emb, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn identical_query_row_has_the_highest_average() {
    let emb = HashedNgramEmbedder::default();
    let texts = [
        "the app crashes whenever I open my library",
        "the app crashes when I open the library tab",
        "offline mode never works on the train",
        "ads play at full volume",
        "shuffle repeats the same songs",
    ];
    let chunks: Vec<Chunk> = texts.iter().enumerate().map(|(i, t)| chunk(&format!("r{i}"), 0, t)).collect();
    let index = VectorIndex::build(chunks, &emb).unwrap();
    let queries = [texts[0], "battery usage", "podcast downloads"];
    let rows: Vec<f64> = queries
        .iter()
        .map(|q| avg_cosine(&index.search_text(q, &emb, 3).unwrap()).unwrap())
        .collect();
    assert!(rows[1..].iter().all(|&r| rows[0] >= r), "{rows:?}");
    let top = index.search_text(texts[0], &emb, 1).unwrap();
    assert_eq!(top.hits[0].chunk_id, "r0#0");
    assert!((top.hits[0].score - 1.0).abs() < 1e-6);
}
