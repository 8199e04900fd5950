#![no_main]
use libfuzzer_sys::fuzz_target;
use reviewlens_core::llm::{parse_structured, FieldSpec, OutputSchema};

fuzz_target!(|response: &str| {
    let schema = OutputSchema(vec![
        FieldSpec::string("answer"),
        FieldSpec::list("citations"),
        FieldSpec::one_of("sentiment", &["positive", "negative", "neutral"]),
    ]);
    if let Ok(record) = parse_structured(response, &schema) {
        assert!(record.text("answer").is_some());
        assert!(record.list("citations").is_some());
    }
});
