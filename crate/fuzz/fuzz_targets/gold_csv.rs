#![no_main]
use libfuzzer_sys::fuzz_target;
use reviewlens_core::aspects::parse_gold;

fuzz_target!(|data: &[u8]| {
    if let Ok(gold) = parse_gold(data) {
        for g in &gold {
            assert!(!g.sentence_id.is_empty());
            assert!(g.aspects.iter().all(|a| !a.term.is_empty()));
        }
    }
});
