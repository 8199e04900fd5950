#![no_main]
use libfuzzer_sys::fuzz_target;
use reviewlens_core::llm::FixtureTable;

fuzz_target!(|text: &str| {
    if let Ok(table) = FixtureTable::parse_jsonl(text) {
        let mut out = Vec::new();
        table.write_jsonl(&mut out).unwrap();
        let again = FixtureTable::parse_jsonl(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(again, table);
    }
});
