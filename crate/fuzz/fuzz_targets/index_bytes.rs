#![no_main]
use libfuzzer_sys::fuzz_target;
use reviewlens_core::retrieval::VectorIndex;

// A little-endian u32 length, that many bytes of vector file, then chunk JSONL.
fuzz_target!(|data: &[u8]| {
    let Some((len, rest)) = data.split_first_chunk::<4>() else { return };
    let at = (u32::from_le_bytes(*len) as usize).min(rest.len());
    let (vectors, chunks) = rest.split_at(at);
    if let Ok(index) = VectorIndex::from_bytes(vectors, chunks) {
        assert_eq!(index.vectors().count(), index.len());
        if index.dim() > 0 {
            let q = vec![1.0f32; index.dim()];
            let _ = index.search(&q, 3);
        }
    }
});
