//! File formats, training harness and command line for [`kec_core`].
//!
//! - [`io`]: corpus, lexicon, knowledge and embedding files;
//! - [`config`]: flat `key = value` model and training configuration;
//! - [`codec`]: checksummed binary graph files and text dumps;
//! - [`checkpoint`]: parameters and optimizer state on disk;
//! - [`train`]: deterministic parallel training, evaluation, SE/DE analysis
//!   and the window sweep;
//! - [`report`]: text tables and JSON records.

pub mod checkpoint;
pub mod codec;
pub mod config;
mod error;
pub mod io;
pub mod report;
pub mod train;

pub use error::{Error, Result};

use kec_core::autodiff::{grad_check, GradCheckConfig, GradCheckReport};
use kec_core::corpus::enumerate_pairs;
use kec_core::graph::build_graph;
use kec_core::model::{EncoderMode, Model, ModelConfig};
use kec_core::synth::synth_corpus;

/// Small model used by the end-to-end gradient check.
pub fn toy_config(d_u: usize, layers: usize) -> ModelConfig {
    ModelConfig {
        d_u,
        layers,
        d_e: 8,
        d_raw: 16,
        encoder: EncoderMode::Hashed { buckets: 64 },
        mlp_hidden: 16,
        dropout: 0.0,
        ..ModelConfig::default()
    }
}

/// Finite-difference settings for the full model.
pub fn end_to_end_check() -> GradCheckConfig {
    GradCheckConfig { eps: 1e-4, ..GradCheckConfig::default() }
}

/// Finite-difference check of the full loss on a 3-utterance synthetic
/// conversation with dropout off.
pub fn gradcheck_toy(config: ModelConfig, seed: u64, check: &GradCheckConfig) -> Result<GradCheckReport> {
    let data = synth_corpus(16, 3, seed, true)?;
    let conv = data
        .corpus
        .iter()
        .find(|c| c.len() == 3)
        .ok_or_else(|| Error::Config("no 3-utterance conversation generated".into()))?;
    let g = build_graph(
        conv,
        &data.knowledge,
        &data.lexicon,
        config.w_c,
        config.knowledge_window()?,
        config.knowledge_options(),
    )?;
    let labels: Vec<f64> = enumerate_pairs(conv).iter().map(|p| f64::from(u8::from(p.label))).collect();
    let model = Model::new(ModelConfig { dropout: 0.0, dag_dropout: 0.0, ..config }, seed)?;
    Ok(grad_check(
        &model.params,
        |t| {
            let out = model.forward(t, &g)?;
            model.loss(t, &out, &labels)
        },
        check,
    )?)
}
