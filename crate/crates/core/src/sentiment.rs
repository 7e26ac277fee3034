//! Lexicon-based polarity of knowledge text and sentiment bucketing.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::EmotionLabel;
use crate::error::{invalid, Result};

/// Joins knowledge beams inside a bucket.
pub const SEP: &str = " [sep] ";
/// Text of an empty bucket or an unselected knowledge cell.
pub const NONE: &str = "none";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SentimentLabel {
    Positive,
    Negative,
    Neutral,
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SentimentLabel::Positive => "positive",
            SentimentLabel::Negative => "negative",
            SentimentLabel::Neutral => "neutral",
        })
    }
}

/// Emotion to sentiment: happiness is positive, neutral stays neutral and
/// every other emotion is negative.
pub fn e2s(e: EmotionLabel) -> SentimentLabel {
    match e {
        EmotionLabel::Happiness => SentimentLabel::Positive,
        EmotionLabel::Neutral => SentimentLabel::Neutral,
        EmotionLabel::Sadness
        | EmotionLabel::Anger
        | EmotionLabel::Fear
        | EmotionLabel::Surprise
        | EmotionLabel::Disgust => SentimentLabel::Negative,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordScores {
    pub pos: f64,
    pub neg: f64,
    pub neu: f64,
}

impl WordScores {
    /// Score of a word missing from the lexicon.
    pub const UNKNOWN: WordScores = WordScores { pos: 0.0, neg: 0.0, neu: 1.0 };
}

/// Per-word positive/negative/neutral scores keyed by lowercase word.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: BTreeMap<String, WordScores>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rejects non-finite or negative scores and duplicate words.
    pub fn insert(&mut self, word: &str, scores: WordScores) -> Result<()> {
        let key = word.to_lowercase();
        for (name, v) in [("pos", scores.pos), ("neg", scores.neg), ("neu", scores.neu)] {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(format!("lexicon word `{key}` has invalid {name} score {v}")));
            }
        }
        if self.entries.contains_key(&key) {
            return Err(invalid(format!("duplicate lexicon word `{key}`")));
        }
        self.entries.insert(key, scores);
        Ok(())
    }

    pub fn lookup(&self, word: &str) -> WordScores {
        self.entries.get(word).copied().unwrap_or(WordScores::UNKNOWN)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, WordScores)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Lowercase, split on whitespace, strip ASCII punctuation; tokens that are
/// pure punctuation vanish.
pub fn scoring_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.chars().filter(|c| !c.is_ascii_punctuation()).flat_map(char::to_lowercase).collect::<String>())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Averaged lexicon scores of a text.
pub fn average_scores(text: &str, lex: &Lexicon) -> Result<WordScores> {
    let tokens = scoring_tokens(text);
    if tokens.is_empty() {
        return Err(invalid(format!("knowledge text `{text}` has no scorable tokens")));
    }
    let mut acc = WordScores { pos: 0.0, neg: 0.0, neu: 0.0 };
    for t in &tokens {
        let s = lex.lookup(t);
        acc.pos += s.pos;
        acc.neg += s.neg;
        acc.neu += s.neu;
    }
    let n = tokens.len() as f64;
    Ok(WordScores { pos: acc.pos / n, neg: acc.neg / n, neu: acc.neu / n })
}

/// Polarity score `r_s`: the positive minus negative average when that gap
/// strictly exceeds the neutral average, otherwise zero.
pub fn score_knowledge(text: &str, lex: &Lexicon) -> Result<f64> {
    let avg = average_scores(text, lex)?;
    let diff = avg.pos - avg.neg;
    Ok(if libm::fabs(diff) > avg.neu { diff } else { 0.0 })
}

pub fn polarity(text: &str, lex: &Lexicon) -> Result<SentimentLabel> {
    let rs = score_knowledge(text, lex)?;
    Ok(if rs > 0.0 {
        SentimentLabel::Positive
    } else if rs < 0.0 {
        SentimentLabel::Negative
    } else {
        SentimentLabel::Neutral
    })
}

/// Knowledge beams grouped by polarity. A field is either [`NONE`] or the
/// member beams joined with [`SEP`] in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBuckets {
    pub pos_text: String,
    pub neg_text: String,
    pub neu_text: String,
}

impl KnowledgeBuckets {
    pub fn get(&self, s: SentimentLabel) -> &str {
        match s {
            SentimentLabel::Positive => &self.pos_text,
            SentimentLabel::Negative => &self.neg_text,
            SentimentLabel::Neutral => &self.neu_text,
        }
    }

    /// Bucket-wise join of two splits; `none` halves are dropped.
    pub fn merge(&self, other: &KnowledgeBuckets) -> KnowledgeBuckets {
        KnowledgeBuckets {
            pos_text: join_non_none(&self.pos_text, &other.pos_text),
            neg_text: join_non_none(&self.neg_text, &other.neg_text),
            neu_text: join_non_none(&self.neu_text, &other.neu_text),
        }
    }
}

fn join_non_none(a: &str, b: &str) -> String {
    match (a == NONE, b == NONE) {
        (true, true) => NONE.to_string(),
        (false, true) => a.to_string(),
        (true, false) => b.to_string(),
        (false, false) => format!("{a}{SEP}{b}"),
    }
}

pub const BEAMS: usize = 5;

pub fn split_knowledge<S: AsRef<str>>(beams: &[S], lex: &Lexicon) -> Result<KnowledgeBuckets> {
    if beams.len() != BEAMS {
        return Err(invalid(format!("expected {BEAMS} knowledge beams, got {}", beams.len())));
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut neu = Vec::new();
    for beam in beams {
        let beam = beam.as_ref();
        match polarity(beam, lex)? {
            SentimentLabel::Positive => pos.push(beam),
            SentimentLabel::Negative => neg.push(beam),
            SentimentLabel::Neutral => neu.push(beam),
        }
    }
    let join = |v: Vec<&str>| if v.is_empty() { NONE.to_string() } else { v.join(SEP) };
    Ok(KnowledgeBuckets { pos_text: join(pos), neg_text: join(neg), neu_text: join(neu) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn lex(entries: &[(&str, f64, f64, f64)]) -> Lexicon {
        let mut l = Lexicon::new();
        for (w, p, n, u) in entries {
            l.insert(w, WordScores { pos: *p, neg: *n, neu: *u }).unwrap();
        }
        l
    }

    #[test]
    fn single_positive_word() {
        let l = lex(&[("happy", 0.75, 0.0, 0.25)]);
        assert_eq!(score_knowledge("happy", &l).unwrap(), 0.75);
    }

    #[test]
    fn unknown_word_is_neutral() {
        assert_eq!(score_knowledge("table", &Lexicon::new()).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_cancellation() {
        let l = lex(&[("happy", 0.8, 0.0, 0.2), ("sad", 0.0, 0.8, 0.2)]);
        let avg = average_scores("happy sad", &l).unwrap();
        assert_eq!((avg.pos, avg.neg, avg.neu), (0.4, 0.4, 0.2));
        assert_eq!(score_knowledge("happy sad", &l).unwrap(), 0.0);
    }

    #[test]
    fn tie_is_neutral() {
        let l = lex(&[("meh", 0.5, 0.0, 0.5)]);
        assert_eq!(score_knowledge("meh", &l).unwrap(), 0.0);
    }

    #[test]
    fn empty_text_errors() {
        assert!(score_knowledge("  ", &Lexicon::new()).is_err());
        assert!(score_knowledge("?!", &Lexicon::new()).is_err());
    }

    #[test]
    fn punctuation_and_case() {
        assert_eq!(scoring_tokens("Happy, SAD! [sep]"), ["happy", "sad", "sep"]);
    }

    #[test]
    fn split_all_neutral() {
        let beams = ["a", "b", "c", "d", "e"];
        let b = split_knowledge(&beams, &Lexicon::new()).unwrap();
        assert_eq!(b.pos_text, NONE);
        assert_eq!(b.neg_text, NONE);
        assert_eq!(b.neu_text, "a [sep] b [sep] c [sep] d [sep] e");
    }

    #[test]
    fn split_mixed() {
        let l =
            lex(&[("happy", 0.9, 0.0, 0.1), ("sad", 0.0, 0.9, 0.1), ("glad", 0.7, 0.0, 0.3), ("upset", 0.1, 0.8, 0.1)]);
        let b = split_knowledge(&["happy", "sad", "fine", "glad", "upset"], &l).unwrap();
        assert_eq!(b.pos_text, "happy [sep] glad");
        assert_eq!(b.neg_text, "sad [sep] upset");
        assert_eq!(b.neu_text, "fine");
    }

    #[test]
    fn split_duplicates_kept() {
        let l = lex(&[("joy", 1.0, 0.0, 0.0)]);
        let b = split_knowledge(&["joy"; 5], &l).unwrap();
        assert_eq!(b.pos_text, "joy [sep] joy [sep] joy [sep] joy [sep] joy");
        assert_eq!((b.neg_text.as_str(), b.neu_text.as_str()), (NONE, NONE));
    }

    #[test]
    fn split_wrong_count() {
        assert!(split_knowledge(&["a", "b"], &Lexicon::new()).is_err());
    }

    #[test]
    fn lexicon_contract() {
        let mut l = Lexicon::new();
        assert_eq!(l.lookup("anything"), WordScores::UNKNOWN);
        l.insert("good", WordScores { pos: 0.6, neg: 0.0, neu: 0.4 }).unwrap();
        assert_eq!(l.lookup("good"), WordScores { pos: 0.6, neg: 0.0, neu: 0.4 });
        assert!(l.insert("Good", WordScores::UNKNOWN).is_err());
        assert!(l.insert("bad", WordScores { pos: -0.1, neg: 0.0, neu: 0.0 }).is_err());
        assert!(l.insert("nan", WordScores { pos: f64::NAN, neg: 0.0, neu: 0.0 }).is_err());
    }

    #[test]
    fn e2s_mapping() {
        use EmotionLabel::*;
        assert_eq!(e2s(Happiness), SentimentLabel::Positive);
        assert_eq!(e2s(Neutral), SentimentLabel::Neutral);
        for e in [Sadness, Anger, Fear, Surprise, Disgust] {
            assert_eq!(e2s(e), SentimentLabel::Negative);
        }
    }

    #[test]
    fn merge_drops_none() {
        let a = KnowledgeBuckets { pos_text: "x".into(), neg_text: NONE.into(), neu_text: NONE.into() };
        let b = KnowledgeBuckets { pos_text: "y".into(), neg_text: "z".into(), neu_text: NONE.into() };
        let m = a.merge(&b);
        assert_eq!(m.pos_text, "x [sep] y");
        assert_eq!(m.neg_text, "z");
        assert_eq!(m.neu_text, NONE);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        const WORDS: [&str; 8] = ["joy", "grief", "calm", "table", "glad", "upset", "fine", "rain"];

        fn lexicon_with(neu_max: f64) -> impl Strategy<Value = Lexicon> {
            proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..neu_max), WORDS.len()).prop_map(|s| {
                let mut l = Lexicon::new();
                for (w, (p, n, u)) in WORDS.iter().zip(s) {
                    l.insert(w, WordScores { pos: p, neg: n, neu: u }).unwrap();
                }
                l
            })
        }

        fn lexicon() -> impl Strategy<Value = Lexicon> {
            lexicon_with(1.0)
        }

        fn text() -> impl Strategy<Value = Vec<&'static str>> {
            proptest::collection::vec(proptest::sample::select(&WORDS[..]), 1..6)
        }

        proptest! {
            #[test]
            fn permutation_invariant(l in lexicon(), words in text(), rot in 0usize..6) {
                let a = words.join(" ");
                let mut shuffled = words.clone();
                let k = rot % shuffled.len();
                shuffled.rotate_left(k);
                shuffled.reverse();
                let b = shuffled.join(" ");
                let (sa, sb) = (score_knowledge(&a, &l).unwrap(), score_knowledge(&b, &l).unwrap());
                prop_assert!((sa - sb).abs() < 1e-12 && (sa == 0.0) == (sb == 0.0));
            }

            #[test]
            fn scale_keeps_strict_sign(l in lexicon_with(0.1), words in text(), c in 0.1f64..10.0) {
                let t = words.join(" ");
                let avg = average_scores(&t, &l).unwrap();
                let margin = (avg.pos - avg.neg).abs() - avg.neu;
                prop_assume!(margin > 1e-9);
                let mut scaled = Lexicon::new();
                for (w, s) in l.iter() {
                    scaled.insert(w, WordScores { pos: s.pos * c, neg: s.neg * c, neu: s.neu * c }).unwrap();
                }
                prop_assert_eq!(polarity(&t, &l).unwrap(), polarity(&t, &scaled).unwrap());
            }

            #[test]
            fn split_partitions(l in lexicon(), beams in proptest::collection::vec(text(), 5)) {
                let beams: Vec<String> = beams.iter().map(|b| b.join(" ")).collect();
                let b = split_knowledge(&beams, &l).unwrap();
                let mut seen: Vec<String> = Vec::new();
                for field in [&b.pos_text, &b.neg_text, &b.neu_text] {
                    prop_assert!(!field.is_empty());
                    if field != NONE {
                        seen.extend(field.split(SEP).map(ToString::to_string));
                    }
                }
                let mut expected = beams.clone();
                expected.sort();
                seen.sort();
                prop_assert_eq!(seen, expected);
            }
        }
    }

    #[test]
    fn lexicon_iter_sorted() {
        let l = lex(&[("b", 0.0, 0.0, 1.0), ("a", 0.0, 0.0, 1.0)]);
        assert_eq!(l.iter().map(|(w, _)| w).collect::<Vec<_>>(), vec!["a", "b"]);
    }
}
