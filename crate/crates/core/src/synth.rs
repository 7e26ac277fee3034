//! Seeded generator of small dyadic corpora with matching knowledge beams.
//!
//! With a planted signal, a random half of the non-neutral utterances are
//! "marked": every knowledge beam of a marked utterance contains
//! [`MARKER`], and a pair `(i, j)` is causal exactly when `j` is marked and
//! `i` is non-neutral. Utterance text and emotions carry no information about
//! which utterances are marked, so causes are recoverable only through
//! knowledge.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Conversation, Corpus, EmotionLabel, Utterance};
use crate::error::{invalid, Result};
use crate::knowledge::{CskRelation, KnowledgeStore};
use crate::sentiment::{Lexicon, SentimentLabel, WordScores, BEAMS};

pub const MARKER: &str = "zcause";

const UTTERANCE_WORDS: usize = 32;
const FILLER_WORDS: usize = 12;
const POSITIVE: [&str; 4] = ["joy", "glad", "pleased", "grateful"];
const NEGATIVE: [&str; 4] = ["sad", "upset", "afraid", "angry"];
const SWITCH_SPEAKER: f64 = 0.7;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub corpus: Corpus,
    pub knowledge: KnowledgeStore,
    pub lexicon: Lexicon,
}

/// Lexicon covering every knowledge word the generator emits.
pub fn synth_lexicon() -> Lexicon {
    let mut lex = Lexicon::new();
    let add = |lex: &mut Lexicon, w: &str, pos, neg| {
        lex.insert(w, WordScores { pos, neg, neu: 1.0 - pos - neg }).expect("distinct generator words");
    };
    for w in POSITIVE {
        add(&mut lex, w, 0.75, 0.0);
    }
    for w in NEGATIVE {
        add(&mut lex, w, 0.0, 0.75);
    }
    for k in 0..FILLER_WORDS {
        lex.insert(&filler(k), WordScores { pos: 0.0, neg: 0.0, neu: 0.0 }).expect("distinct");
    }
    lex.insert(MARKER, WordScores { pos: 0.0, neg: 0.0, neu: 0.0 }).expect("distinct");
    lex
}

fn filler(k: usize) -> String {
    format!("k{k:02}")
}

fn random_emotion(rng: &mut ChaCha8Rng) -> EmotionLabel {
    use EmotionLabel::*;
    let u: f64 = rng.gen();
    if u < 0.4 {
        Neutral
    } else if u < 0.6 {
        Happiness
    } else {
        *[Sadness, Anger, Fear, Surprise, Disgust].choose(rng).expect("non-empty")
    }
}

fn beam(rng: &mut ChaCha8Rng, polarity: SentimentLabel, marked: bool) -> String {
    let mut words: Vec<String> = (0..rng.gen_range(1..=3)).map(|_| filler(rng.gen_range(0..FILLER_WORDS))).collect();
    match polarity {
        SentimentLabel::Positive => words.push(POSITIVE.choose(rng).expect("non-empty").to_string()),
        SentimentLabel::Negative => words.push(NEGATIVE.choose(rng).expect("non-empty").to_string()),
        SentimentLabel::Neutral => {}
    }
    if marked {
        words.push(MARKER.to_string());
    }
    words.shuffle(rng);
    words.join(" ")
}

/// Five beams with at least one of each polarity.
fn beams(rng: &mut ChaCha8Rng, marked: bool) -> Vec<String> {
    use SentimentLabel::*;
    let all = [Positive, Negative, Neutral];
    let mut pols = [Positive, Negative, Neutral, *all.choose(rng).expect("x"), *all.choose(rng).expect("x")];
    pols.shuffle(rng);
    debug_assert_eq!(pols.len(), BEAMS);
    pols.iter().map(|p| beam(rng, *p, marked)).collect()
}

pub fn synth_corpus(n_convs: usize, max_len: usize, seed: u64, plant_causal_signal: bool) -> Result<SynthData> {
    if n_convs < 1 {
        return Err(invalid("synthetic corpus needs at least one conversation"));
    }
    if max_len < 2 {
        return Err(invalid("synthetic conversations need max_len >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = Vec::with_capacity(n_convs);
    let mut knowledge = KnowledgeStore::new();
    for c in 0..n_convs {
        let conv_id = format!("s{c}");
        let n = rng.gen_range(2..=max_len);
        let mut speaker = "A";
        let mut utterances = Vec::with_capacity(n);
        let mut marked = Vec::with_capacity(n);
        for i in 1..=n {
            if i > 1 && rng.gen_bool(SWITCH_SPEAKER) {
                speaker = if speaker == "A" { "B" } else { "A" };
            }
            let emotion = random_emotion(&mut rng);
            let tokens =
                (0..rng.gen_range(3..=8)).map(|_| format!("w{:02}", rng.gen_range(0..UTTERANCE_WORDS))).collect();
            marked.push(plant_causal_signal && !emotion.is_neutral() && rng.gen_bool(0.5));
            utterances.push(Utterance {
                id: format!("{conv_id}_u{i}"),
                conv_id: conv_id.clone(),
                index: i,
                speaker: speaker.to_string(),
                emotion,
                tokens,
            });
        }
        let mut pairs = Vec::new();
        for i in 1..=n {
            if utterances[i - 1].emotion.is_neutral() {
                continue;
            }
            if plant_causal_signal {
                pairs.extend((1..=i).filter(|&j| marked[j - 1]).map(|j| (i, j)));
            } else {
                let mut sources: Vec<usize> = (1..=i).collect();
                sources.shuffle(&mut rng);
                let k = rng.gen_range(1..=2).min(i);
                pairs.extend(sources[..k].iter().map(|&j| (i, j)));
            }
        }
        for (u, &m) in utterances.iter().zip(&marked) {
            for rel in CskRelation::ALL {
                knowledge.insert(&u.id, rel, beams(&mut rng, m))?;
            }
        }
        corpus.push(Conversation::new(conv_id, utterances, pairs)?);
    }
    Ok(SynthData { corpus, knowledge, lexicon: synth_lexicon() })
}
