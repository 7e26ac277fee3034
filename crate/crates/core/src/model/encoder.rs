//! Utterance and knowledge text encoders.
//!
//! Both modes end in a trainable linear map to `d_u`. The hashed mode embeds
//! each token through a hashed lookup table and max-pools over tokens; the
//! precomputed mode reads fixed vectors supplied by an external encoder.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;

use crate::autodiff::rng::fnv1a;
use crate::autodiff::{ParamId, ParamSet, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Fixed vectors keyed by utterance id or [`klg_key`].
pub type Embeddings = BTreeMap<String, Vec<f64>>;

/// Lookup key of a knowledge text in precomputed embedding files.
pub fn klg_key(text: &str) -> String {
    format!("klg:{:016x}", fnv1a(text.as_bytes()))
}

/// Lookup key of an emotion word in precomputed embedding files.
pub fn emotion_key(label: &str) -> String {
    format!("emotion:{label}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum EncoderMode {
    Hashed { buckets: usize },
    Precomputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderParams {
    pub table: Option<ParamId>,
    pub proj_w: ParamId,
    pub proj_b: ParamId,
}

impl EncoderParams {
    pub fn register<R: Rng>(params: &mut ParamSet, mode: &EncoderMode, d_raw: usize, d_u: usize, rng: &mut R) -> Self {
        let table = match mode {
            EncoderMode::Hashed { buckets } => {
                let data = (0..buckets * d_raw).map(|_| rng.gen_range(-1.0..1.0)).collect();
                Some(params.add("encoder.table", Tensor::matrix(*buckets, d_raw, data).expect("sized")))
            }
            EncoderMode::Precomputed => None,
        };
        let proj_w = params.xavier("encoder.proj_w", d_u, d_raw, rng);
        let proj_b = params.zeros("encoder.proj_b", &[d_u]);
        Self { table, proj_w, proj_b }
    }
}

pub fn hash_tokens(text: &str, buckets: usize) -> Vec<usize> {
    text.split_whitespace().map(|t| (fnv1a(t.to_lowercase().as_bytes()) % buckets as u64) as usize).collect()
}

/// Per-tape encoder: identical inputs within one forward pass share one node.
pub struct Encoder<'m> {
    mode: &'m EncoderMode,
    params: EncoderParams,
    embeddings: Option<&'m Arc<Embeddings>>,
    d_raw: usize,
    cache: BTreeMap<String, Var>,
}

impl<'m> Encoder<'m> {
    pub fn new(
        mode: &'m EncoderMode,
        params: EncoderParams,
        embeddings: Option<&'m Arc<Embeddings>>,
        d_raw: usize,
    ) -> Self {
        Self { mode, params, embeddings, d_raw, cache: BTreeMap::new() }
    }

    /// Raw (pre-projection) features of a text, or of a precomputed key.
    fn raw(&self, t: &mut Tape<'_>, key: &str, text: &str) -> Result<Var> {
        match self.mode {
            EncoderMode::Hashed { buckets } => {
                let ids = hash_tokens(text, *buckets);
                if ids.is_empty() {
                    return Err(Error::Uncovered(text.to_string()));
                }
                let table = t.param(self.params.table.expect("hashed mode has a table"));
                let rows = t.gather_rows(table, &ids)?;
                t.maxpool(rows)
            }
            EncoderMode::Precomputed => {
                let v = self.embeddings.and_then(|e| e.get(key)).ok_or_else(|| Error::Uncovered(key.to_string()))?;
                if v.len() != self.d_raw {
                    return Err(Error::Dimension { expected: self.d_raw, found: v.len() });
                }
                Ok(t.vector(v.clone()))
            }
        }
    }

    fn project(&self, t: &mut Tape<'_>, raw: Var) -> Result<Var> {
        let w = t.param(self.params.proj_w);
        let b = t.param(self.params.proj_b);
        let y = t.matmul(w, raw)?;
        t.add(y, b)
    }

    fn encode(&mut self, t: &mut Tape<'_>, key: &str, text: &str) -> Result<Var> {
        if let Some(v) = self.cache.get(key) {
            return Ok(*v);
        }
        let raw = self.raw(t, key, text)?;
        let v = self.project(t, raw)?;
        self.cache.insert(key.to_string(), v);
        Ok(v)
    }

    /// Utterance representation `s_i`; precomputed files key it by id.
    pub fn utterance(&mut self, t: &mut Tape<'_>, id: &str, tokens: &[String]) -> Result<Var> {
        self.encode(t, id, &tokens.join(" "))
    }

    /// Knowledge representation `k_ij`; precomputed files key it by
    /// [`klg_key`].
    pub fn knowledge(&mut self, t: &mut Tape<'_>, klg: &str) -> Result<Var> {
        self.encode(t, &klg_key(klg), klg)
    }

    /// Raw feature vector for the emotion word, used to seed emotion
    /// embeddings.
    pub fn emotion_raw(&self, t: &mut Tape<'_>, label: &str) -> Result<Var> {
        self.raw(t, &emotion_key(label), label)
    }
}
