//! Rule-based valence scorer.
//!
//! Token valences come from a [`Lexicon`]; they are then adjusted by degree
//! modifiers, ALL-CAPS emphasis, negation, special idioms, contrastive "but"
//! and punctuation before being squashed into a compound score in [-1, 1].
//! The constants and the order in which the rules fire follow the published
//! reference implementation, including its quirks, so scores agree with it
//! to floating-point precision.

use serde::{Deserialize, Serialize};

use super::Lexicon;

/// Rating increase contributed by a booster word.
pub const BOOSTER_INCREMENT: f64 = 0.293;
/// Emphasis added to an ALL-CAPS word in mixed-case text.
pub const CAPS_INCREMENT: f64 = 0.733;
/// Multiplier applied to a negated valence.
pub const NEGATION_SCALAR: f64 = -0.74;
/// Normalization constant of the compound score.
pub const NORMALIZATION_ALPHA: f64 = 15.0;
pub const EXCLAMATION_INCREMENT: f64 = 0.292;
pub const MAX_EXCLAMATIONS: usize = 4;
pub const QUESTION_INCREMENT: f64 = 0.18;
pub const QUESTION_CAP: f64 = 0.96;
pub const BUT_BEFORE_WEIGHT: f64 = 0.5;
pub const BUT_AFTER_WEIGHT: f64 = 1.5;

const NEGATIONS: &[&str] = &[
    "aint", "arent", "cannot", "cant", "couldnt", "darent", "didnt", "doesnt", "ain't", "aren't",
    "can't", "couldn't", "daren't", "didn't", "doesn't", "dont", "hadnt", "hasnt", "havent",
    "isnt", "mightnt", "mustnt", "neither", "don't", "hadn't", "hasn't", "haven't", "isn't",
    "mightn't", "mustn't", "neednt", "needn't", "never", "none", "nope", "nor", "not", "nothing",
    "nowhere", "oughtnt", "shant", "shouldnt", "uhuh", "wasnt", "werent", "oughtn't", "shan't",
    "shouldn't", "uh-uh", "wasn't", "weren't", "without", "wont", "wouldnt", "won't", "wouldn't",
    "rarely", "seldom", "despite",
];

const B_INCR: f64 = BOOSTER_INCREMENT;
const B_DECR: f64 = -BOOSTER_INCREMENT;

const BOOSTERS: &[(&str, f64)] = &[
    ("absolutely", B_INCR), ("amazingly", B_INCR), ("awfully", B_INCR), ("completely", B_INCR),
    ("considerable", B_INCR), ("considerably", B_INCR), ("decidedly", B_INCR),
    ("deeply", B_INCR), ("effing", B_INCR), ("enormous", B_INCR), ("enormously", B_INCR),
    ("entirely", B_INCR), ("especially", B_INCR), ("exceptional", B_INCR),
    ("exceptionally", B_INCR), ("extreme", B_INCR), ("extremely", B_INCR),
    ("fabulously", B_INCR), ("flipping", B_INCR), ("flippin", B_INCR), ("frackin", B_INCR),
    ("fracking", B_INCR), ("fricking", B_INCR), ("frickin", B_INCR), ("frigging", B_INCR),
    ("friggin", B_INCR), ("fully", B_INCR), ("fuckin", B_INCR), ("fucking", B_INCR),
    ("fuggin", B_INCR), ("fugging", B_INCR), ("greatly", B_INCR), ("hella", B_INCR),
    ("highly", B_INCR), ("hugely", B_INCR), ("incredible", B_INCR), ("incredibly", B_INCR),
    ("intensely", B_INCR), ("major", B_INCR), ("majorly", B_INCR), ("more", B_INCR),
    ("most", B_INCR), ("particularly", B_INCR), ("purely", B_INCR), ("quite", B_INCR),
    ("really", B_INCR), ("remarkably", B_INCR), ("so", B_INCR), ("substantially", B_INCR),
    ("thoroughly", B_INCR), ("total", B_INCR), ("totally", B_INCR), ("tremendous", B_INCR),
    ("tremendously", B_INCR), ("uber", B_INCR), ("unbelievably", B_INCR),
    ("unusually", B_INCR), ("utter", B_INCR), ("utterly", B_INCR), ("very", B_INCR),
    ("almost", B_DECR), ("barely", B_DECR), ("hardly", B_DECR), ("just enough", B_DECR),
    ("kind of", B_DECR), ("kinda", B_DECR), ("kindof", B_DECR), ("kind-of", B_DECR),
    ("less", B_DECR), ("little", B_DECR), ("marginal", B_DECR), ("marginally", B_DECR),
    ("occasional", B_DECR), ("occasionally", B_DECR), ("partly", B_DECR), ("scarce", B_DECR),
    ("scarcely", B_DECR), ("slight", B_DECR), ("slightly", B_DECR), ("somewhat", B_DECR),
    ("sort of", B_DECR), ("sorta", B_DECR), ("sortof", B_DECR), ("sort-of", B_DECR),
];

/// Multi-word expressions whose valence overrides the lexicon word inside them.
const SPECIAL_CASES: &[(&str, f64)] = &[
    ("the shit", 3.0), ("the bomb", 3.0), ("bad ass", 1.5), ("badass", 1.5), ("bus stop", 0.0),
    ("yeah right", -2.0), ("kiss of death", -1.5), ("to die for", 3.0),
    ("beating heart", 3.5),
];

fn booster(word_lower: &str) -> Option<f64> {
    BOOSTERS
        .iter()
        .find(|(w, _)| *w == word_lower)
        .map(|(_, v)| *v)
}

fn special_case(phrase: &str) -> Option<f64> {
    SPECIAL_CASES
        .iter()
        .find(|(w, _)| *w == phrase)
        .map(|(_, v)| *v)
}

/// Proportions of positive/neutral/negative signal and the compound score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScores {
    pub pos: f64,
    pub neu: f64,
    pub neg: f64,
    pub compound: f64,
}

impl SentimentScores {
    pub const EMPTY: SentimentScores = SentimentScores {
        pos: 0.0,
        neu: 0.0,
        neg: 0.0,
        compound: 0.0,
    };
}

/// `x / sqrt(x^2 + alpha)`, clamped to [-1, 1].
pub fn normalize_score(score: f64, alpha: f64) -> f64 {
    (score / (score * score + alpha).sqrt()).clamp(-1.0, 1.0)
}

fn is_negation(word_lower: &str) -> bool {
    NEGATIONS.contains(&word_lower) || word_lower.contains("n't")
}

/// Python's `str.isupper`: at least one cased character and no lowercase ones.
fn is_upper(word: &str) -> bool {
    word.chars().any(char::is_uppercase) && !word.chars().any(char::is_lowercase)
}

fn is_ascii_punct(c: char) -> bool {
    c.is_ascii_punctuation()
}

/// Strip surrounding punctuation unless that leaves two or fewer characters
/// (which keeps emoticons such as `:)` intact).
fn strip_punctuation(token: &str) -> &str {
    let stripped = token.trim_matches(is_ascii_punct);
    if stripped.chars().count() <= 2 {
        token
    } else {
        stripped
    }
}

fn replace_emoji(text: &str, lexicon: &Lexicon) -> String {
    if !lexicon.has_emoji_table() {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut prev_space = true;
    for c in text.chars() {
        if let Some(desc) = lexicon.emoji_description(c) {
            if !prev_space {
                out.push(' ');
            }
            out.push_str(desc);
            prev_space = false;
        } else {
            out.push(c);
            prev_space = c == ' ';
        }
    }
    out
}

struct Tokens<'a> {
    words: Vec<&'a str>,
    lower: Vec<String>,
    cap_differential: bool,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let words: Vec<&str> = text.split_whitespace().map(strip_punctuation).collect();
        let lower = words.iter().map(|w| w.to_lowercase()).collect();
        let caps = words.iter().filter(|w| is_upper(w)).count();
        let diff = words.len() - caps;
        Tokens {
            cap_differential: diff > 0 && diff < words.len(),
            words,
            lower,
        }
    }
}

/// Score `text` against `lexicon`.
pub fn polarity_scores(text: &str, lexicon: &Lexicon) -> SentimentScores {
    let text = replace_emoji(text, lexicon);
    let text = text.trim();
    let tokens = Tokens::new(text);
    let n = tokens.words.len();

    let mut sentiments = Vec::with_capacity(n);
    for i in 0..n {
        let lower = tokens.lower[i].as_str();
        if booster(lower).is_some() {
            sentiments.push(0.0);
            continue;
        }
        if i + 1 < n && lower == "kind" && tokens.lower[i + 1] == "of" {
            sentiments.push(0.0);
            continue;
        }
        sentiments.push(token_valence(&tokens, i, lexicon));
    }
    but_check(&tokens.lower, &mut sentiments);
    score_valence(&sentiments, text)
}

fn scalar_inc_dec(word: &str, word_lower: &str, valence: f64, cap_diff: bool) -> f64 {
    let Some(mut scalar) = booster(word_lower) else {
        return 0.0;
    };
    if valence < 0.0 {
        scalar = -scalar;
    }
    if is_upper(word) && cap_diff {
        if valence > 0.0 {
            scalar += CAPS_INCREMENT;
        } else {
            scalar -= CAPS_INCREMENT;
        }
    }
    scalar
}

fn token_valence(tokens: &Tokens, i: usize, lexicon: &Lexicon) -> f64 {
    let lower = &tokens.lower;
    let item_lower = lower[i].as_str();
    let Some(base) = lexicon.valence(item_lower) else {
        return 0.0;
    };
    let mut valence = base;
    let n = lower.len();

    // "no" directly before another lexicon word acts as a negator, not a word.
    if item_lower == "no" && i != n - 1 && lexicon.contains(&lower[i + 1]) {
        valence = 0.0;
    }
    if (i > 0 && lower[i - 1] == "no")
        || (i > 1 && lower[i - 2] == "no")
        || (i > 2 && lower[i - 3] == "no" && (lower[i - 1] == "or" || lower[i - 1] == "nor"))
    {
        valence = base * NEGATION_SCALAR;
    }

    if is_upper(tokens.words[i]) && tokens.cap_differential {
        if valence > 0.0 {
            valence += CAPS_INCREMENT;
        } else {
            valence -= CAPS_INCREMENT;
        }
    }

    for start in 0..3 {
        if i > start && !lexicon.contains(&lower[i - (start + 1)]) {
            let j = i - (start + 1);
            let mut s = scalar_inc_dec(tokens.words[j], &lower[j], valence, tokens.cap_differential);
            if start == 1 && s != 0.0 {
                s *= 0.95;
            }
            if start == 2 && s != 0.0 {
                s *= 0.9;
            }
            valence += s;
            valence = negation_check(valence, lower, start, i);
            if start == 2 {
                valence = special_idioms_check(valence, lower, i);
            }
        }
    }
    least_check(valence, lower, i, lexicon)
}

fn negation_check(valence: f64, lower: &[String], start: usize, i: usize) -> f64 {
    let w = |k: usize| lower[i - k].as_str();
    match start {
        0 => {
            if is_negation(w(1)) {
                return valence * NEGATION_SCALAR;
            }
        }
        1 => {
            if w(2) == "never" && (w(1) == "so" || w(1) == "this") {
                return valence * 1.25;
            } else if w(2) == "without" && w(1) == "doubt" {
                return valence;
            } else if is_negation(w(2)) {
                return valence * NEGATION_SCALAR;
            }
        }
        _ => {
            // Precedence mirrors the reference: (never AND (so|this)) OR (so|this).
            if (w(3) == "never" && (w(2) == "so" || w(2) == "this"))
                || (w(1) == "so" || w(1) == "this")
            {
                return valence * 1.25;
            } else if w(3) == "without" && (w(2) == "doubt" || w(1) == "doubt") {
                return valence;
            } else if is_negation(w(3)) {
                return valence * NEGATION_SCALAR;
            }
        }
    }
    valence
}

fn special_idioms_check(mut valence: f64, lower: &[String], i: usize) -> f64 {
    let onezero = format!("{} {}", lower[i - 1], lower[i]);
    let twoonezero = format!("{} {} {}", lower[i - 2], lower[i - 1], lower[i]);
    let twoone = format!("{} {}", lower[i - 2], lower[i - 1]);
    let threetwoone = format!("{} {} {}", lower[i - 3], lower[i - 2], lower[i - 1]);
    let threetwo = format!("{} {}", lower[i - 3], lower[i - 2]);

    for seq in [&onezero, &twoonezero, &twoone, &threetwoone, &threetwo] {
        if let Some(v) = special_case(seq) {
            valence = v;
            break;
        }
    }
    if lower.len() - 1 > i {
        if let Some(v) = special_case(&format!("{} {}", lower[i], lower[i + 1])) {
            valence = v;
        }
    }
    if lower.len() - 1 > i + 1 {
        if let Some(v) = special_case(&format!("{} {} {}", lower[i], lower[i + 1], lower[i + 2])) {
            valence = v;
        }
    }
    for ngram in [&threetwoone, &threetwo, &twoone] {
        if let Some(b) = booster(ngram) {
            valence += b;
        }
    }
    valence
}

fn least_check(valence: f64, lower: &[String], i: usize, lexicon: &Lexicon) -> f64 {
    if i > 1 && !lexicon.contains(&lower[i - 1]) && lower[i - 1] == "least" {
        if lower[i - 2] != "at" && lower[i - 2] != "very" {
            return valence * NEGATION_SCALAR;
        }
    } else if i > 0 && !lexicon.contains(&lower[i - 1]) && lower[i - 1] == "least" {
        return valence * NEGATION_SCALAR;
    }
    valence
}

/// Down-weight sentiment before the first "but" and up-weight it after.
///
/// Each value is located by equality search from the start of the list, as
/// the reference does, so repeated values can redirect the update to an
/// earlier slot.
fn but_check(lower: &[String], sentiments: &mut [f64]) {
    let Some(bi) = lower.iter().position(|w| w == "but") else {
        return;
    };
    for p in 0..sentiments.len() {
        let value = sentiments[p];
        let si = sentiments
            .iter()
            .position(|&s| s == value)
            .expect("value present");
        if si < bi {
            sentiments[si] = value * BUT_BEFORE_WEIGHT;
        } else if si > bi {
            sentiments[si] = value * BUT_AFTER_WEIGHT;
        }
    }
}

fn punctuation_emphasis(text: &str) -> f64 {
    let ep = text.matches('!').count().min(MAX_EXCLAMATIONS) as f64 * EXCLAMATION_INCREMENT;
    let qm_count = text.matches('?').count();
    let qm = if qm_count > 1 {
        if qm_count <= 3 {
            qm_count as f64 * QUESTION_INCREMENT
        } else {
            QUESTION_CAP
        }
    } else {
        0.0
    };
    ep + qm
}

fn score_valence(sentiments: &[f64], text: &str) -> SentimentScores {
    if sentiments.is_empty() {
        return SentimentScores::EMPTY;
    }
    let mut sum: f64 = 0.0;
    for s in sentiments {
        sum += s;
    }
    let punct = punctuation_emphasis(text);
    if sum > 0.0 {
        sum += punct;
    } else if sum < 0.0 {
        sum -= punct;
    }
    let compound = normalize_score(sum, NORMALIZATION_ALPHA);

    let mut pos_sum = 0.0;
    let mut neg_sum = 0.0;
    let mut neu_count = 0usize;
    for &s in sentiments {
        if s > 0.0 {
            pos_sum += s + 1.0;
        }
        if s < 0.0 {
            neg_sum += s - 1.0;
        }
        if s == 0.0 {
            neu_count += 1;
        }
    }
    if pos_sum > neg_sum.abs() {
        pos_sum += punct;
    } else if pos_sum < neg_sum.abs() {
        neg_sum -= punct;
    }
    let total = pos_sum + neg_sum.abs() + neu_count as f64;
    SentimentScores {
        pos: (pos_sum / total).abs(),
        neu: (neu_count as f64 / total).abs(),
        neg: (neg_sum / total).abs(),
        compound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundled() -> &'static Lexicon {
        use std::sync::OnceLock;
        static LEX: OnceLock<Lexicon> = OnceLock::new();
        LEX.get_or_init(Lexicon::bundled)
    }

    #[test]
    fn empty_text_is_all_zero() {
        assert_eq!(polarity_scores("", bundled()), SentimentScores::EMPTY);
        assert_eq!(polarity_scores("   ", bundled()), SentimentScores::EMPTY);
    }

    #[test]
    fn reference_demo_sentence() {
        let s = polarity_scores("VADER is smart, handsome, and funny.", bundled());
        assert!((s.compound - 0.8316).abs() < 1e-4, "{s:?}");
        assert!((s.pos + s.neu + s.neg - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mirrored_lexicon_is_sign_symmetric() {
        let lex = Lexicon::from_pairs([("good", 2.0), ("bad", -2.0)]);
        let good = polarity_scores("good", &lex);
        let bad = polarity_scores("bad", &lex);
        assert_eq!(good.compound, -bad.compound);
        assert_eq!(good.pos, bad.neg);
    }

    #[test]
    fn negation_and_booster() {
        let lex = Lexicon::from_pairs([("good", 2.0)]);
        let plain = polarity_scores("it is good", &lex).compound;
        let negated = polarity_scores("it is not good", &lex).compound;
        let boosted = polarity_scores("it is very good", &lex).compound;
        assert!(negated < 0.0);
        let expect_neg = normalize_score(2.0 * NEGATION_SCALAR, NORMALIZATION_ALPHA);
        assert!((negated - expect_neg).abs() < 1e-12);
        assert!(boosted > plain);
        let expect_boost = normalize_score(2.0 + BOOSTER_INCREMENT, NORMALIZATION_ALPHA);
        assert!((boosted - expect_boost).abs() < 1e-12);
    }

    #[test]
    fn caps_emphasis_needs_mixed_case() {
        let lex = Lexicon::from_pairs([("good", 2.0)]);
        let mixed = polarity_scores("it is GOOD", &lex).compound;
        let expect = normalize_score(2.0 + CAPS_INCREMENT, NORMALIZATION_ALPHA);
        assert!((mixed - expect).abs() < 1e-12);
        let all_caps = polarity_scores("IT IS GOOD", &lex).compound;
        assert!((all_caps - normalize_score(2.0, NORMALIZATION_ALPHA)).abs() < 1e-12);
    }

    #[test]
    fn but_reweights_clauses() {
        let lex = Lexicon::from_pairs([("good", 2.0), ("slow", -1.0)]);
        let s = polarity_scores("good but slow", &lex).compound;
        let expect = normalize_score(2.0 * 0.5 - 1.0 * 1.5, NORMALIZATION_ALPHA);
        assert!((s - expect).abs() < 1e-12);
    }

    #[test]
    fn punctuation_amplifies() {
        let lex = Lexicon::from_pairs([("good", 2.0)]);
        let five = polarity_scores("good!!!!!", &lex).compound;
        let expect = normalize_score(2.0 + 4.0 * EXCLAMATION_INCREMENT, NORMALIZATION_ALPHA);
        assert!((five - expect).abs() < 1e-12);
        let q = polarity_scores("good??", &lex).compound;
        assert!((q - normalize_score(2.0 + 0.36, NORMALIZATION_ALPHA)).abs() < 1e-12);
    }

    #[test]
    fn emoticons_survive_stripping() {
        assert_eq!(strip_punctuation(":)"), ":)");
        assert_eq!(strip_punctuation("great!!"), "great");
        assert_eq!(strip_punctuation("ok!"), "ok!");
    }

    #[test]
    fn emoji_are_described() {
        let s = polarity_scores("Love it 😍", bundled());
        assert!(s.compound > 0.6);
        let without = polarity_scores("😍", &Lexicon::from_pairs([("love", 3.2)]));
        assert_eq!(without.compound, 0.0);
    }
}
