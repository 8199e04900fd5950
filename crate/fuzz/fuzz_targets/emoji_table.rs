#![no_main]
use libfuzzer_sys::fuzz_target;
use reviewlens_core::Lexicon;

fuzz_target!(|text: &str| {
    if let Ok(lex) = Lexicon::bundled().with_emoji_table(text) {
        let s = lex.polarity_scores("love it 😀 👎");
        assert!((-1.0..=1.0).contains(&s.compound));
    }
});
