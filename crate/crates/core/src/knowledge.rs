//! Commonsense knowledge beams and the knowledge passing matrix.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::corpus::Conversation;
use crate::error::{invalid, Error, Result};
use crate::sentiment::{e2s, split_knowledge, KnowledgeBuckets, Lexicon, SentimentLabel, BEAMS, NONE, SEP};
use crate::tri::LowerTriangular;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CskRelation {
    XEffect,
    XReact,
    OEffect,
    OReact,
}

impl CskRelation {
    pub const ALL: [CskRelation; 4] =
        [CskRelation::XEffect, CskRelation::XReact, CskRelation::OEffect, CskRelation::OReact];

    pub fn as_str(self) -> &'static str {
        match self {
            CskRelation::XEffect => "xEffect",
            CskRelation::XReact => "xReact",
            CskRelation::OEffect => "oEffect",
            CskRelation::OReact => "oReact",
        }
    }
}

impl fmt::Display for CskRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CskRelation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CskRelation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel { kind: "relation", value: s.to_string() })
    }
}

/// Effect and react relations for a (target speaker, source speaker) pair:
/// the speaker's own relations when they coincide, the other party's
/// otherwise.
pub fn select_relations(target_speaker: &str, source_speaker: &str) -> (CskRelation, CskRelation) {
    if target_speaker == source_speaker {
        (CskRelation::XEffect, CskRelation::XReact)
    } else {
        (CskRelation::OEffect, CskRelation::OReact)
    }
}

/// Five generated beams per (utterance id, relation).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeStore {
    entries: BTreeMap<(String, CskRelation), [String; BEAMS]>,
}

impl KnowledgeStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, utterance_id: &str, relation: CskRelation, beams: Vec<String>) -> Result<()> {
        let beams: [String; BEAMS] = beams.try_into().map_err(|b: Vec<String>| {
            invalid(format!("utterance `{utterance_id}` relation {relation}: expected {BEAMS} beams, got {}", b.len()))
        })?;
        if let Some(k) = beams.iter().position(|b| b.trim().is_empty()) {
            return Err(invalid(format!("utterance `{utterance_id}` relation {relation}: beam {k} is empty")));
        }
        let key = (utterance_id.to_string(), relation);
        if self.entries.contains_key(&key) {
            return Err(invalid(format!("duplicate knowledge record for `{utterance_id}` {relation}")));
        }
        self.entries.insert(key, beams);
        Ok(())
    }

    pub fn beams(&self, utterance_id: &str, relation: CskRelation) -> Result<&[String; BEAMS]> {
        // BTreeMap keyed by owned String; the lookup allocates once.
        self.entries
            .get(&(utterance_id.to_string(), relation))
            .ok_or_else(|| Error::MissingKnowledge { utterance: utterance_id.to_string(), relation: relation.as_str() })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, CskRelation, &[String; BEAMS])> {
        self.entries.iter().map(|((id, rel), b)| (id.as_str(), *rel, b))
    }

    /// Every utterance of every conversation must have all four relations.
    pub fn check_coverage(&self, corpus: &[Conversation]) -> Result<()> {
        for conv in corpus {
            for u in conv.utterances() {
                for rel in CskRelation::ALL {
                    self.beams(&u.id, rel)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnowledgeWindow(usize);

impl KnowledgeWindow {
    pub fn new(w: usize) -> Result<Self> {
        if w == 0 {
            return Err(invalid("knowledge window must be at least 1"));
        }
        Ok(Self(w))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeCell {
    pub item: bool,
    pub klg: String,
}

impl Default for KnowledgeCell {
    fn default() -> Self {
        Self { item: false, klg: NONE.to_string() }
    }
}

/// Knowledge passing matrix: lower-triangular, cell `(i, j)` holds the
/// knowledge selected for target `i` from source `j` (0-based).
pub type KnowledgeMatrix = LowerTriangular<KnowledgeCell>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnowledgeOptions {
    /// Prefix neutral knowledge when the source utterance is neutral.
    pub neutral_knowledge: bool,
}

impl Default for KnowledgeOptions {
    fn default() -> Self {
        Self { neutral_knowledge: true }
    }
}

/// Effect and react beams are split separately and their buckets joined.
fn relation_buckets(
    store: &KnowledgeStore,
    lex: &Lexicon,
    utterance_id: &str,
    (effect, react): (CskRelation, CskRelation),
) -> Result<KnowledgeBuckets> {
    let e = split_knowledge(store.beams(utterance_id, effect)?, lex)?;
    let r = split_knowledge(store.beams(utterance_id, react)?, lex)?;
    Ok(e.merge(&r))
}

/// Builds the knowledge passing matrix. For each source `j` and each target
/// `i` in `j..=min(j + w_k, N)`: the relation family follows the speakers,
/// a non-neutral target gets the bucket matching its sentiment, and a neutral
/// source additionally contributes its neutral bucket in front.
pub fn build_knowledge_matrix(
    conv: &Conversation,
    store: &KnowledgeStore,
    lex: &Lexicon,
    window: KnowledgeWindow,
    options: KnowledgeOptions,
) -> Result<KnowledgeMatrix> {
    let utts = conv.utterances();
    let n = utts.len();
    let mut m = KnowledgeMatrix::filled(n, KnowledgeCell::default());
    for j in 0..n {
        let source = &utts[j];
        let same = relation_buckets(store, lex, &source.id, (CskRelation::XEffect, CskRelation::XReact))?;
        let other = relation_buckets(store, lex, &source.id, (CskRelation::OEffect, CskRelation::OReact))?;
        let last = (j + window.get()).min(n - 1);
        for (i, target) in utts.iter().enumerate().take(last + 1).skip(j) {
            let k = if target.speaker == source.speaker { &same } else { &other };
            let target_sent = e2s(target.emotion);
            if target_sent == SentimentLabel::Neutral {
                continue;
            }
            let cell = m.get_mut(i, j).expect("cell within lower triangle");
            cell.item = true;
            cell.klg = if options.neutral_knowledge && e2s(source.emotion) == SentimentLabel::Neutral {
                format!("{}{SEP}{}", k.get(SentimentLabel::Neutral), k.get(target_sent))
            } else {
                k.get(target_sent).to_string()
            };
        }
    }
    Ok(m)
}
