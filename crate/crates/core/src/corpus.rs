//! Conversations annotated with speakers, emotions and causal utterance pairs.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{invalid, Error, Result};

/// The seven-way emotion inventory of the dialogue corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EmotionLabel {
    Neutral,
    Happiness,
    Sadness,
    Anger,
    Fear,
    Surprise,
    Disgust,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 7] = [
        EmotionLabel::Neutral,
        EmotionLabel::Happiness,
        EmotionLabel::Sadness,
        EmotionLabel::Anger,
        EmotionLabel::Fear,
        EmotionLabel::Surprise,
        EmotionLabel::Disgust,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Happiness => "happiness",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Anger => "anger",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Surprise => "surprise",
            EmotionLabel::Disgust => "disgust",
        }
    }

    /// Row of this label in emotion embedding tables.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_neutral(self) -> bool {
        self == EmotionLabel::Neutral
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EmotionLabel::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel { kind: "emotion", value: s.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub id: String,
    pub conv_id: String,
    /// 1-based turn position.
    pub index: usize,
    pub speaker: String,
    pub emotion: EmotionLabel,
    pub tokens: Vec<String>,
}

impl Utterance {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// A validated dialogue. Causal pairs are `(target, source)` with 1-based
/// indices and `source <= target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversation {
    id: String,
    utterances: Vec<Utterance>,
    causal_pairs: BTreeSet<(usize, usize)>,
}

impl Conversation {
    /// Validates turn numbering, token content and causal pairs. Duplicate
    /// pairs are rejected rather than merged.
    pub fn new(
        id: impl Into<String>,
        utterances: Vec<Utterance>,
        causal_pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let id = id.into();
        if utterances.is_empty() {
            return Err(invalid(format!("conversation `{id}` has no utterances")));
        }
        for (pos, u) in utterances.iter().enumerate() {
            if u.index != pos + 1 {
                return Err(invalid(format!(
                    "conversation `{id}`: utterance `{}` has index {}, expected {}",
                    u.id,
                    u.index,
                    pos + 1
                )));
            }
            if u.conv_id != id {
                return Err(invalid(format!("utterance `{}` belongs to `{}`, not `{id}`", u.id, u.conv_id)));
            }
            if u.tokens.is_empty() {
                return Err(invalid(format!("utterance `{}` has empty text", u.id)));
            }
        }
        let n = utterances.len();
        let mut pairs = BTreeSet::new();
        for (target, source) in causal_pairs {
            if target < 1 || target > n || source < 1 {
                return Err(invalid(format!(
                    "conversation `{id}`: causal pair ({target},{source}) out of range 1..={n}"
                )));
            }
            if source > target {
                return Err(invalid(format!(
                    "conversation `{id}`: causal pair ({target},{source}) points to the future"
                )));
            }
            if utterances[target - 1].emotion.is_neutral() {
                return Err(invalid(format!(
                    "conversation `{id}`: causal pair ({target},{source}) has a neutral target"
                )));
            }
            if !pairs.insert((target, source)) {
                return Err(invalid(format!("conversation `{id}`: duplicated causal pair ({target},{source})")));
            }
        }
        Ok(Self { id, utterances, causal_pairs: pairs })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// 1-based lookup.
    pub fn utterance(&self, index: usize) -> Option<&Utterance> {
        index.checked_sub(1).and_then(|i| self.utterances.get(i))
    }

    pub fn causal_pairs(&self) -> &BTreeSet<(usize, usize)> {
        &self.causal_pairs
    }

    pub fn is_cause(&self, target: usize, source: usize) -> bool {
        self.causal_pairs.contains(&(target, source))
    }

    pub fn speakers(&self) -> impl Iterator<Item = &str> {
        self.utterances.iter().map(|u| u.speaker.as_str())
    }

    pub fn emotions(&self) -> impl Iterator<Item = EmotionLabel> + '_ {
        self.utterances.iter().map(|u| u.emotion)
    }
}

pub type Corpus = Vec<Conversation>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PairLabel {
    pub target_index: usize,
    pub source_index: usize,
    pub label: bool,
}

/// Every `(i, j)` with `1 <= j <= i <= N`, sorted by target then source.
/// Neutral targets are kept; all of their pairs are negatives.
pub fn enumerate_pairs(conv: &Conversation) -> Vec<PairLabel> {
    let n = conv.len();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 1..=n {
        for j in 1..=i {
            out.push(PairLabel { target_index: i, source_index: j, label: conv.is_cause(i, j) });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StatsReport {
    pub positive_pairs: usize,
    pub negative_pairs: usize,
    pub dialogues: usize,
    pub utterances: usize,
    /// Mean token count, rounded to the nearest integer.
    pub avg_utterance_len: usize,
    pub mean_utterance_len: f64,
}

pub fn compute_stats(corpus: &[Conversation]) -> StatsReport {
    let mut report = StatsReport { dialogues: corpus.len(), ..StatsReport::default() };
    let mut tokens = 0usize;
    for conv in corpus {
        let n = conv.len();
        let total = n * (n + 1) / 2;
        report.positive_pairs += conv.causal_pairs.len();
        report.negative_pairs += total - conv.causal_pairs.len();
        report.utterances += n;
        tokens += conv.utterances.iter().map(|u| u.tokens.len()).sum::<usize>();
    }
    if report.utterances > 0 {
        report.mean_utterance_len = tokens as f64 / report.utterances as f64;
        report.avg_utterance_len = libm::round(report.mean_utterance_len) as usize;
    }
    report
}

/// Whitespace tokenisation used when loading utterance text.
pub fn tokenize_text(text: &str) -> Vec<String> {
    text.split_whitespace().map(ToString::to_string).collect()
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn utt(conv: &str, index: usize, speaker: &str, emotion: EmotionLabel, text: &str) -> Utterance {
        Utterance {
            id: format!("{conv}_u{index}"),
            conv_id: conv.to_string(),
            index,
            speaker: speaker.to_string(),
            emotion,
            tokens: tokenize_text(text),
        }
    }

    pub fn conv(speakers: &[&str], emotions: &[EmotionLabel], pairs: &[(usize, usize)]) -> Conversation {
        let utts = speakers
            .iter()
            .zip(emotions)
            .enumerate()
            .map(|(k, (s, e))| utt("c", k + 1, s, *e, "some words here"))
            .collect();
        Conversation::new("c", utts, pairs.iter().copied()).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::EmotionLabel::*;
    use super::*;
    use alloc::vec;

    #[test]
    fn single_utterance_pairs() {
        let c = conv(&["A"], &[Neutral], &[]);
        assert_eq!(enumerate_pairs(&c), [PairLabel { target_index: 1, source_index: 1, label: false }]);
    }

    #[test]
    fn three_utterances_one_cause() {
        let c = conv(&["A", "B", "A"], &[Neutral, Happiness, Sadness], &[(3, 2)]);
        let pairs = enumerate_pairs(&c);
        assert_eq!(pairs.len(), 6);
        let positives: Vec<_> = pairs.iter().filter(|p| p.label).collect();
        assert_eq!(positives.len(), 1);
        assert_eq!((positives[0].target_index, positives[0].source_index), (3, 2));
    }

    #[test]
    fn four_utterances_ten_pairs() {
        let c = conv(&["A", "B", "A", "B"], &[Neutral; 4], &[]);
        assert_eq!(enumerate_pairs(&c).len(), 10);
    }

    #[test]
    fn stats_on_minimal_corpus() {
        assert_eq!(compute_stats(&[]), StatsReport::default());
        let c = conv(&["A", "B"], &[Neutral, Sadness], &[(2, 1)]);
        let s = compute_stats(&[c]);
        assert_eq!((s.positive_pairs, s.negative_pairs, s.dialogues, s.utterances), (1, 2, 1, 2));
        assert_eq!(s.avg_utterance_len, 3);
    }

    #[test]
    fn average_length_rounds() {
        let a = utt("c", 1, "A", Neutral, "a b");
        let b = utt("c", 2, "B", Neutral, "a b c");
        let s = compute_stats(&[Conversation::new("c", vec![a, b], []).unwrap()]);
        assert_eq!(s.mean_utterance_len, 2.5);
        assert_eq!(s.avg_utterance_len, 3);
    }

    #[test]
    fn self_cause_is_legal() {
        conv(&["A"], &[Anger], &[(1, 1)]);
    }

    #[test]
    fn rejects_bad_pairs() {
        let utts = || vec![utt("c", 1, "A", Sadness, "x"), utt("c", 2, "B", Neutral, "y")];
        assert!(Conversation::new("c", utts(), [(1, 2)]).is_err(), "future source");
        assert!(Conversation::new("c", utts(), [(2, 1)]).is_err(), "neutral target");
        assert!(Conversation::new("c", utts(), [(1, 1), (1, 1)]).is_err(), "duplicate");
        assert!(Conversation::new("c", utts(), [(3, 1)]).is_err(), "out of range");
        assert!(Conversation::new("c", utts(), [(1, 0)]).is_err(), "zero index");
    }

    #[test]
    fn rejects_bad_utterances() {
        let mut u = utt("c", 1, "A", Neutral, "x");
        u.tokens.clear();
        assert!(Conversation::new("c", vec![u], []).is_err());
        let u = utt("c", 2, "A", Neutral, "x");
        assert!(Conversation::new("c", vec![u], []).is_err());
        assert!(Conversation::new("c", vec![], []).is_err());
    }

    #[test]
    fn emotion_labels_parse() {
        for e in EmotionLabel::ALL {
            assert_eq!(e.as_str().parse::<EmotionLabel>().unwrap(), e);
        }
        assert!("joy".parse::<EmotionLabel>().is_err());
    }

    proptest::proptest! {
        #[test]
        fn pair_count_and_order(n in 1usize..12, seed in 0u64..1000) {
            let speakers: Vec<&str> = (0..n).map(|k| if (seed >> (k % 60)) & 1 == 0 { "A" } else { "B" }).collect();
            let emotions = vec![Sadness; n];
            let pairs: Vec<(usize, usize)> = (1..=n).filter(|i| (seed + *i as u64).is_multiple_of(3)).map(|i| (i, 1 + (i - 1) / 2)).collect();
            let c = conv(&speakers, &emotions, &pairs);
            let en = enumerate_pairs(&c);
            proptest::prop_assert_eq!(en.len(), n * (n + 1) / 2);
            proptest::prop_assert!(en.windows(2).all(|w| (w[0].target_index, w[0].source_index) < (w[1].target_index, w[1].source_index)));
            let s = compute_stats(core::slice::from_ref(&c));
            proptest::prop_assert_eq!(s.positive_pairs + s.negative_pairs, en.len());
            proptest::prop_assert_eq!(s.positive_pairs, en.iter().filter(|p| p.label).count());
        }
    }
}
