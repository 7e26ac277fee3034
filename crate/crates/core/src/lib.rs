//! Knowledge-enhanced conversation graphs for conversational causal emotion
//! entailment.
//!
//! Given a dialogue with speaker and emotion annotations, every utterance is
//! paired with each of its historical utterances (itself included) and the
//! model predicts whether the source utterance causes the target's emotion.
//! The pipeline is:
//!
//! - [`sentiment`]: lexicon polarity scoring of commonsense knowledge beams and
//!   the emotion to sentiment mapping;
//! - [`knowledge`]: sentiment- and speaker-aware selection of knowledge for
//!   every (target, source) cell of the knowledge passing matrix;
//! - [`graph`]: the windowed utterance interaction matrix and the assembled
//!   conversation graph;
//! - [`autodiff`]: a small dense-tensor reverse-mode engine with AdamW;
//! - [`model`]: knowledge-enhanced DAG layers and the pairwise cause predictor;
//! - [`metrics`]: pair-level F1 and same/different emotion recall analysis.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the training
//! harness and the command line live in the companion `kec` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod corpus;
mod error;
pub mod graph;
pub mod knowledge;
pub mod metrics;
pub mod model;
pub mod sentiment;
pub mod synth;
pub mod tri;

pub use error::{Error, Result};
