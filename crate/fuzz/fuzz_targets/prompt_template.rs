#![no_main]
use libfuzzer_sys::fuzz_target;
use reviewlens_core::llm::PromptTemplate;

fuzz_target!(|text: &str| {
    if let Ok(t) = PromptTemplate::from_toml(text) {
        let _ = t.placeholders();
    }
});
