//! Line-oriented input formats.
//!
//! - corpus: one JSON conversation per line,
//!   `{"id", "utterances": [{"id", "speaker", "emotion", "text"}], "causal_pairs": [[i, j]]}`
//!   with 1-based `(target, source)` pairs;
//! - lexicon: `word<TAB>pos<TAB>neg<TAB>neu`, `#` comment lines;
//! - knowledge: one JSON record per line, `{"utterance_id", "relation", "beams": [5 strings]}`;
//! - embeddings: one JSON record per line, `{"key", "vector": [floats]}`.
//!
//! Blank lines are ignored everywhere.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use kec_core::corpus::{tokenize_text, Conversation, Corpus, EmotionLabel, Utterance};
use kec_core::knowledge::{CskRelation, KnowledgeStore};
use kec_core::model::Embeddings;
use kec_core::sentiment::{Lexicon, WordScores};

use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtteranceRecord {
    id: String,
    speaker: String,
    emotion: String,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConversationRecord {
    id: String,
    utterances: Vec<UtteranceRecord>,
    causal_pairs: Vec<[usize; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KnowledgeRecord {
    utterance_id: String,
    relation: String,
    beams: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingRecord {
    key: String,
    vector: Vec<f64>,
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-blank lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(k, l)| (k + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

pub fn parse_corpus(text: &str, path: &Path) -> Result<Corpus> {
    let mut corpus = Vec::new();
    let mut conv_ids = BTreeSet::new();
    let mut utt_ids = BTreeSet::new();
    for (line, raw) in lines(text) {
        let err = |m: String| Error::parse(path, line, m);
        let rec: ConversationRecord = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        if !conv_ids.insert(rec.id.clone()) {
            return Err(err(format!("duplicate conversation id `{}`", rec.id)));
        }
        let mut utterances = Vec::with_capacity(rec.utterances.len());
        for (k, u) in rec.utterances.into_iter().enumerate() {
            if !utt_ids.insert(u.id.clone()) {
                return Err(err(format!("duplicate utterance id `{}`", u.id)));
            }
            let emotion: EmotionLabel = u.emotion.parse().map_err(|e: kec_core::Error| err(e.to_string()))?;
            utterances.push(Utterance {
                id: u.id,
                conv_id: rec.id.clone(),
                index: k + 1,
                speaker: u.speaker,
                emotion,
                tokens: tokenize_text(&u.text),
            });
        }
        let pairs = rec.causal_pairs.into_iter().map(|[i, j]| (i, j));
        corpus.push(Conversation::new(rec.id, utterances, pairs).map_err(|e| err(e.to_string()))?);
    }
    Ok(corpus)
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    parse_corpus(&read_text(path)?, path)
}

pub fn render_corpus(corpus: &[Conversation]) -> String {
    let mut out = String::new();
    for conv in corpus {
        let rec = ConversationRecord {
            id: conv.id().to_string(),
            utterances: conv
                .utterances()
                .iter()
                .map(|u| UtteranceRecord {
                    id: u.id.clone(),
                    speaker: u.speaker.clone(),
                    emotion: u.emotion.as_str().to_string(),
                    text: u.text(),
                })
                .collect(),
            causal_pairs: conv.causal_pairs().iter().map(|&(i, j)| [i, j]).collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn save_corpus(path: &Path, corpus: &[Conversation]) -> Result<()> {
    write_text(path, &render_corpus(corpus))
}

pub fn parse_lexicon(text: &str, path: &Path) -> Result<Lexicon> {
    let mut lex = Lexicon::new();
    for (line, raw) in lines(text) {
        if raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
        let [word, pos, neg, neu] = fields[..] else {
            return Err(Error::parse(path, line, format!("expected 4 tab-separated fields, got {}", fields.len())));
        };
        let num = |s: &str, name: &str| {
            s.parse::<f64>().map_err(|_| Error::parse(path, line, format!("bad {name} score `{s}` for `{word}`")))
        };
        let scores = WordScores { pos: num(pos, "pos")?, neg: num(neg, "neg")?, neu: num(neu, "neu")? };
        lex.insert(word, scores).map_err(|e| Error::parse(path, line, e))?;
    }
    Ok(lex)
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    parse_lexicon(&read_text(path)?, path)
}

pub fn render_lexicon(lex: &Lexicon) -> String {
    let mut out = String::from("# word\tpos\tneg\tneu\n");
    for (w, s) in lex.iter() {
        out.push_str(&format!("{w}\t{}\t{}\t{}\n", s.pos, s.neg, s.neu));
    }
    out
}

pub fn parse_knowledge(text: &str, path: &Path) -> Result<KnowledgeStore> {
    let mut store = KnowledgeStore::new();
    for (line, raw) in lines(text) {
        let err = |m: String| Error::parse(path, line, m);
        let rec: KnowledgeRecord = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        let rel: CskRelation = rec.relation.parse().map_err(|e: kec_core::Error| err(e.to_string()))?;
        store.insert(&rec.utterance_id, rel, rec.beams).map_err(|e| err(e.to_string()))?;
    }
    Ok(store)
}

pub fn load_knowledge(path: &Path) -> Result<KnowledgeStore> {
    parse_knowledge(&read_text(path)?, path)
}

pub fn render_knowledge(store: &KnowledgeStore) -> String {
    let mut out = String::new();
    for (id, rel, beams) in store.iter() {
        let rec =
            KnowledgeRecord { utterance_id: id.to_string(), relation: rel.as_str().to_string(), beams: beams.to_vec() };
        out.push_str(&serde_json::to_string(&rec).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_embeddings(text: &str, path: &Path) -> Result<Embeddings> {
    let mut emb = Embeddings::new();
    let mut width = None;
    for (line, raw) in lines(text) {
        let err = |m: String| Error::parse(path, line, m);
        let rec: EmbeddingRecord = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        if *width.get_or_insert(rec.vector.len()) != rec.vector.len() {
            return Err(err(format!(
                "vector for `{}` has {} values, expected {}",
                rec.key,
                rec.vector.len(),
                width.unwrap()
            )));
        }
        if rec.vector.iter().any(|v| !v.is_finite()) {
            return Err(err(format!("vector for `{}` is not finite", rec.key)));
        }
        if emb.insert(rec.key.clone(), rec.vector).is_some() {
            return Err(err(format!("duplicate embedding key `{}`", rec.key)));
        }
    }
    Ok(emb)
}

pub fn load_embeddings(path: &Path) -> Result<Embeddings> {
    parse_embeddings(&read_text(path)?, path)
}

pub fn render_embeddings(emb: &Embeddings) -> String {
    let mut out = String::new();
    for (key, vector) in emb {
        let rec = EmbeddingRecord { key: key.clone(), vector: vector.clone() };
        out.push_str(&serde_json::to_string(&rec).expect("records serialize"));
        out.push('\n');
    }
    out
}
