#![no_main]
use libfuzzer_sys::fuzz_target;
use reviewlens_core::corpus::{parse_reviews, InputFormat, SchemaMapping};

// First byte picks the format; the rest is the file body.
fuzz_target!(|data: &[u8]| {
    let Some((&sel, body)) = data.split_first() else { return };
    let format = if sel & 1 == 0 { InputFormat::Csv } else { InputFormat::JsonLines };
    let schema = if sel & 2 == 0 { SchemaMapping::canonical() } else { SchemaMapping::new("content", "score") };
    if let Ok(report) = parse_reviews(body, format, &schema) {
        for r in report.corpus.reviews() {
            assert!(!r.text.trim().is_empty());
            assert!((1..=5).contains(&r.rating));
        }
    }
});
