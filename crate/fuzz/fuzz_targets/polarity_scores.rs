#![no_main]
use libfuzzer_sys::fuzz_target;
use reviewlens_core::Lexicon;

fuzz_target!(|text: &str| {
    let s = Lexicon::bundled().polarity_scores(text);
    assert!((-1.0..=1.0).contains(&s.compound));
    let total = s.pos + s.neg + s.neu;
    assert!(total == 0.0 || (total - 1.0).abs() < 1e-6, "{s:?}");
});
