//! Utterance interaction matrix and the assembled conversation graph.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::corpus::{Conversation, EmotionLabel};
use crate::error::{invalid, Error, Result};
use crate::knowledge::KnowledgeMatrix;
use crate::tri::LowerTriangular;

/// Self-dependency (same speaker) or inter-speaker dependency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelationType {
    SD,
    ID,
}

impl RelationType {
    pub fn between(target_speaker: &str, source_speaker: &str) -> Self {
        if target_speaker == source_speaker {
            RelationType::SD
        } else {
            RelationType::ID
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InteractionCell {
    pub item: bool,
    pub rel: RelationType,
}

pub type InteractionMatrix = LowerTriangular<InteractionCell>;

/// Each utterance receives an edge from each of its `w_c` predecessors. The
/// diagonal carries no contextual edge.
pub fn build_interaction_matrix(conv: &Conversation, w_c: usize) -> Result<InteractionMatrix> {
    if w_c == 0 {
        return Err(invalid("context window must be at least 1"));
    }
    let utts = conv.utterances();
    Ok(InteractionMatrix::from_fn(utts.len(), |i, j| InteractionCell {
        item: j < i && i - j <= w_c,
        rel: RelationType::between(&utts[i].speaker, &utts[j].speaker),
    }))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub utterance_id: String,
    pub speaker: String,
    pub emotion: EmotionLabel,
    pub tokens: Vec<String>,
}

/// A conversation graph: nodes, contextual edges and knowledge edges.
/// Node representations are computed by the model, not stored here.
#[derive(Debug, Clone, PartialEq)]
pub struct KecGraph {
    pub conv_id: String,
    pub nodes: Vec<Node>,
    pub a_c: InteractionMatrix,
    pub a_k: KnowledgeMatrix,
}

pub fn assemble_kec(conv: &Conversation, a_c: InteractionMatrix, a_k: KnowledgeMatrix) -> Result<KecGraph> {
    let nodes = conv
        .utterances()
        .iter()
        .map(|u| Node {
            utterance_id: u.id.clone(),
            speaker: u.speaker.clone(),
            emotion: u.emotion,
            tokens: u.tokens.clone(),
        })
        .collect();
    KecGraph::from_parts(String::from(conv.id()), nodes, a_c, a_k)
}

impl KecGraph {
    /// Checks that all components agree on the node count.
    pub fn from_parts(conv_id: String, nodes: Vec<Node>, a_c: InteractionMatrix, a_k: KnowledgeMatrix) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(invalid("cannot assemble an empty graph"));
        }
        for found in [a_c.n(), a_k.n()] {
            if found != n {
                return Err(Error::Dimension { expected: n, found });
            }
        }
        Ok(Self { conv_id, nodes, a_c, a_k })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Contextual predecessors of node `i` (0-based), ascending.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..i).filter(move |&j| self.a_c[(i, j)].item)
    }

    /// Human-readable listing of every cell.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "graph {} N={}", self.conv_id, self.len());
        for (i, j, c) in self.a_c.iter() {
            let k = &self.a_k[(i, j)];
            let preview: String = k.klg.chars().take(40).collect();
            let _ = writeln!(
                out,
                "({}, {}) item_c={} rel={:?} item_k={} klg={preview:?}",
                i + 1,
                j + 1,
                u8::from(c.item),
                c.rel,
                u8::from(k.item)
            );
        }
        out
    }
}

/// Builds both matrices and assembles the graph.
pub fn build_graph(
    conv: &Conversation,
    store: &crate::knowledge::KnowledgeStore,
    lex: &crate::sentiment::Lexicon,
    w_c: usize,
    w_k: crate::knowledge::KnowledgeWindow,
    options: crate::knowledge::KnowledgeOptions,
) -> Result<KecGraph> {
    let a_c = build_interaction_matrix(conv, w_c)?;
    let a_k = crate::knowledge::build_knowledge_matrix(conv, store, lex, w_k, options)?;
    assemble_kec(conv, a_c, a_k)
}

/// Graph with an all-`none` knowledge matrix, for runs without knowledge.
pub fn build_graph_without_knowledge(conv: &Conversation, w_c: usize) -> Result<KecGraph> {
    let a_c = build_interaction_matrix(conv, w_c)?;
    let a_k = KnowledgeMatrix::filled(conv.len(), Default::default());
    assemble_kec(conv, a_c, a_k)
}
