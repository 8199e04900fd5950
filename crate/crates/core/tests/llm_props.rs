use proptest::prelude::*;

use reviewlens_core::llm::{
    bundled, digest_messages, parse_structured, FieldSpec, FixtureTable, Message, OutputSchema, Record,
};

#[test]
fn every_few_shot_output_parses_back() {
    for (name, text) in bundled::ALL {
        let t = bundled::load(text);
        for ex in &t.few_shot {
            let json = ex.output.to_json_in_order(&t.output_schema);
            let parsed = parse_structured(&json, &t.output_schema).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(parsed, ex.output, "{name}");
        }
    }
}

fn schema() -> OutputSchema {
    OutputSchema(vec![
        FieldSpec::string("answer"),
        FieldSpec::list("citations"),
        FieldSpec::one_of("sentiment", &["positive", "negative", "neutral"]),
    ])
}

proptest! {
    #[test]
    fn records_survive_rendering_and_chatter(
        answer in "\\PC{0,40}",
        citations in prop::collection::vec("\\PC{0,8}", 0..4),
        sentiment in prop::sample::select(vec!["positive", "negative", "neutral"]),
        before in "[a-zA-Z .:]{0,30}",
        after in "[a-zA-Z .]{0,30}",
    ) {
        let record = Record::new()
            .with_text("answer", answer)
            .with_list("citations", citations)
            .with_text("sentiment", sentiment);
        let json = record.to_json_in_order(&schema());
        let wrapped = format!("{before}{json}{after}");
        prop_assert_eq!(parse_structured(&wrapped, &schema()).unwrap(), record);
    }

    #[test]
    fn parser_never_panics(input in "\\PC{0,200}") {
        let _ = parse_structured(&input, &schema());
    }

    #[test]
    fn digests_separate_distinct_conversations(a in "\\PC{0,40}", b in "\\PC{0,40}") {
        let da = digest_messages(&[Message::user(a.clone())]);
        prop_assert_eq!(&da, &digest_messages(&[Message::user(a.clone())]));
        if a != b {
            prop_assert_ne!(&da, &digest_messages(&[Message::user(b)]));
        }
        prop_assert_ne!(da, digest_messages(&[Message::system(a)]));
    }

    #[test]
    fn fixture_tables_round_trip(entries in prop::collection::btree_map("[a-f0-9]{8}", "\\PC{0,30}", 0..8)) {
        let mut table = FixtureTable::new();
        for (k, v) in &entries {
            table.insert(k.clone(), v.clone());
        }
        let mut buf = Vec::new();
        table.write_jsonl(&mut buf).unwrap();
        let back = FixtureTable::parse_jsonl(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back.len(), entries.len());
        for (k, v) in &entries {
            prop_assert_eq!(back.get(k), Some(v.as_str()));
        }
    }
}
