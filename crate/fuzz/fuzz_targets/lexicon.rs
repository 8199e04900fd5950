#![no_main]
use libfuzzer_sys::fuzz_target;
use reviewlens_core::Lexicon;

fuzz_target!(|text: &str| {
    if let Ok(lex) = Lexicon::parse(text) {
        let s = lex.polarity_scores("not very good, but GREAT!!");
        assert!((-1.0..=1.0).contains(&s.compound));
    }
});
