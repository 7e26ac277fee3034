//! Knowledge-enhanced DAG encoder and pairwise cause predictor.
//!
//! Each layer walks the nodes left to right. Node `i` attends over its
//! contextual predecessors `j` using their *current-layer* states and the
//! knowledge `k_ij` on the edge, then sums four recurrent units:
//!
//! - nodal: `GRU_n(x = h_i^{l-1}, h = msg_i)`
//! - contextual: `GRU_c(x = msg_i, h = h_i^{l-1})`
//! - contextual knowledge: `GRU_k(x = nlg_i, h = h_i^{l-1})`
//! - self-loop knowledge: `GRU_s(x = k_ii, h = h_i^{l-1})`
//!
//! where `msg_i` aggregates relation-projected neighbour states and `nlg_i`
//! the projected neighbour knowledge with the same attention weights.

mod encoder;
mod gru;

pub use encoder::{emotion_key, hash_tokens, klg_key, Embeddings, Encoder, EncoderMode, EncoderParams};
pub use gru::{gru_cell, GruParams};

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Gradients, ParamId, ParamSet, Tape, Tensor, Var};
use crate::corpus::EmotionLabel;
use crate::error::{invalid, Result};
use crate::graph::{KecGraph, RelationType};
use crate::knowledge::{KnowledgeOptions, KnowledgeWindow};
use crate::sentiment::NONE;

/// Which layer outputs form the final node representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerConcat {
    /// `h_i^0 || h_i^1 || ... || h_i^L`
    All,
    /// `h_i^L` only.
    Last,
}

/// How the emotion embedding table is seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmotionInit {
    /// Encode the emotion word and project it with a fixed random map.
    FromEncoder,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub d_u: usize,
    pub layers: usize,
    pub w_c: usize,
    pub w_k: usize,
    pub d_e: usize,
    /// Encoder feature size before the projection to `d_u`.
    pub d_raw: usize,
    pub encoder: EncoderMode,
    pub mlp_hidden: usize,
    /// Dropout after each hidden layer of the predictor.
    pub dropout: f64,
    /// Dropout on node states inside DAG layers.
    pub dag_dropout: f64,
    pub use_csk: bool,
    pub use_emotion_emb: bool,
    pub use_gru_k: bool,
    pub use_gru_s: bool,
    pub use_neutral_knowledge: bool,
    pub direct_add_variant: bool,
    pub layer_concat: LayerConcat,
    pub emotion_init: EmotionInit,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_u: 300,
            layers: 5,
            w_c: 2,
            w_k: 2,
            d_e: 200,
            d_raw: 300,
            encoder: EncoderMode::Hashed { buckets: 4096 },
            mlp_hidden: 300,
            dropout: 0.1,
            dag_dropout: 0.0,
            use_csk: true,
            use_emotion_emb: true,
            use_gru_k: true,
            use_gru_s: true,
            use_neutral_knowledge: true,
            direct_add_variant: false,
            layer_concat: LayerConcat::All,
            emotion_init: EmotionInit::FromEncoder,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_u", self.d_u),
            ("layers", self.layers),
            ("w_c", self.w_c),
            ("w_k", self.w_k),
            ("d_e", self.d_e),
            ("d_raw", self.d_raw),
            ("mlp_hidden", self.mlp_hidden),
        ] {
            if v == 0 {
                return Err(invalid(format!("model config `{name}` must be positive")));
            }
        }
        if let EncoderMode::Hashed { buckets: 0 } = self.encoder {
            return Err(invalid("hash bucket count must be positive"));
        }
        for (name, p) in [("dropout", self.dropout), ("dag_dropout", self.dag_dropout)] {
            if !(0.0..1.0).contains(&p) {
                return Err(invalid(format!("`{name}` must lie in [0, 1), got {p}")));
            }
        }
        Ok(())
    }

    /// Contextual knowledge unit is active.
    pub fn has_gru_k(&self) -> bool {
        self.use_csk && !self.direct_add_variant && self.use_gru_k
    }

    /// Self-loop knowledge unit is active.
    pub fn has_gru_s(&self) -> bool {
        self.use_csk && !self.direct_add_variant && self.use_gru_s
    }

    /// Width of the per-node representation fed to the predictor.
    pub fn node_repr_dim(&self) -> usize {
        match self.layer_concat {
            LayerConcat::All => (self.layers + 1) * self.d_u,
            LayerConcat::Last => self.d_u,
        }
    }

    pub fn knowledge_window(&self) -> Result<KnowledgeWindow> {
        KnowledgeWindow::new(self.w_k)
    }

    pub fn knowledge_options(&self) -> KnowledgeOptions {
        KnowledgeOptions { neutral_knowledge: self.use_neutral_knowledge }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LayerParams {
    w_w: ParamId,
    w_k: ParamId,
    w_sd: ParamId,
    w_id: ParamId,
    gru_n: GruParams,
    gru_c: GruParams,
    gru_k: Option<GruParams>,
    gru_s: Option<GruParams>,
}

#[derive(Debug, Clone, PartialEq)]
struct PredictorParams {
    w1_target: ParamId,
    w1_source: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
    w3: ParamId,
    b3: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    encoder: EncoderParams,
    emotion: Option<ParamId>,
    h0_w: ParamId,
    h0_b: ParamId,
    layers: Vec<LayerParams>,
    predictor: PredictorParams,
}

/// Values recorded by one forward pass.
pub struct ForwardOutput {
    /// `p_ij` for every pair, ordered as [`ForwardOutput::pairs`].
    pub probs: Var,
    /// Pre-sigmoid scores, same order.
    pub logits: Var,
    /// 0-based `(target, source)` pairs, sorted.
    pub pairs: Vec<(usize, usize)>,
    /// `states[l][i]` is `h_i^l` for `l = 0..=L`.
    pub states: Vec<Vec<Var>>,
    /// `attention[l][i]` holds node `i`'s weights over its neighbours in
    /// layer `l + 1`, in ascending neighbour order.
    pub attention: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamSet,
    layout: Layout,
    embeddings: Option<Arc<Embeddings>>,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        Self::with_embeddings(config, seed, None)
    }

    /// Precomputed-mode models read utterance and knowledge vectors from
    /// `embeddings`.
    pub fn with_embeddings(config: ModelConfig, seed: u64, embeddings: Option<Arc<Embeddings>>) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let d = config.d_u;
        let encoder = EncoderParams::register(&mut params, &config.encoder, config.d_raw, d, &mut rng);

        let emotion = if config.use_emotion_emb {
            let table = emotion_table(&config, &params, encoder, embeddings.as_deref(), &mut rng);
            Some(params.add("emotion.table", table))
        } else {
            None
        };
        let h0_in = if config.use_emotion_emb { d + config.d_e } else { d };
        let h0_w = params.xavier("h0.w", d, h0_in, &mut rng);
        let h0_b = params.zeros("h0.b", &[d]);

        let mut layers = Vec::with_capacity(config.layers);
        for l in 1..=config.layers {
            let p = format!("layer{l}");
            let w_w = params.xavier(format!("{p}.w_w"), 1, 2 * d, &mut rng);
            let w_k = params.xavier(format!("{p}.w_k"), d, d, &mut rng);
            let w_sd = params.xavier(format!("{p}.w_sd"), d, d, &mut rng);
            let w_id = params.xavier(format!("{p}.w_id"), d, d, &mut rng);
            let gru_n = GruParams::register(&mut params, &format!("{p}.gru_n"), d, &mut rng);
            let gru_c = GruParams::register(&mut params, &format!("{p}.gru_c"), d, &mut rng);
            let gru_k =
                config.has_gru_k().then(|| GruParams::register(&mut params, &format!("{p}.gru_k"), d, &mut rng));
            let gru_s =
                config.has_gru_s().then(|| GruParams::register(&mut params, &format!("{p}.gru_s"), d, &mut rng));
            layers.push(LayerParams { w_w, w_k, w_sd, w_id, gru_n, gru_c, gru_k, gru_s });
        }

        let dn = config.node_repr_dim();
        let hid = config.mlp_hidden;
        let predictor = PredictorParams {
            w1_target: params.xavier("mlp.w1_target", dn, hid, &mut rng),
            w1_source: params.xavier("mlp.w1_source", dn, hid, &mut rng),
            b1: params.zeros("mlp.b1", &[hid]),
            w2: params.xavier("mlp.w2", hid, hid, &mut rng),
            b2: params.zeros("mlp.b2", &[hid]),
            w3: params.xavier("mlp.w3", hid, 1, &mut rng),
            b3: params.zeros("mlp.b3", &[1]),
        };

        Ok(Self { config, params, layout: Layout { encoder, emotion, h0_w, h0_b, layers, predictor }, embeddings })
    }

    pub fn embeddings(&self) -> Option<&Arc<Embeddings>> {
        self.embeddings.as_ref()
    }

    pub fn set_embeddings(&mut self, embeddings: Option<Arc<Embeddings>>) {
        self.embeddings = embeddings;
    }

    pub fn param_count(&self) -> usize {
        self.params.numel()
    }

    /// Encoder for one tape; repeated texts map to one node.
    pub fn encoder(&self) -> Encoder<'_> {
        Encoder::new(&self.config.encoder, self.layout.encoder, self.embeddings.as_ref(), self.config.d_raw)
    }

    /// `h_i^0 = Linear([s_i || eemb_{e_i}])`, or `Linear(s_i)` without
    /// emotion embeddings.
    pub fn initial_state(&self, t: &mut Tape<'_>, s: Var, emotion: EmotionLabel) -> Result<Var> {
        let input = match self.layout.emotion {
            Some(table) => {
                let table = t.param(table);
                let e = t.row(table, emotion.index())?;
                t.concat(&[s, e])?
            }
            None => s,
        };
        let w = t.param(self.layout.h0_w);
        let b = t.param(self.layout.h0_b);
        let y = t.matmul(w, input)?;
        t.add(y, b)
    }

    pub fn forward(&self, t: &mut Tape<'_>, g: &KecGraph) -> Result<ForwardOutput> {
        let cfg = &self.config;
        let n = g.len();
        let mut enc = self.encoder();

        let mut h0 = Vec::with_capacity(n);
        for node in &g.nodes {
            let s = enc.utterance(t, &node.utterance_id, &node.tokens)?;
            h0.push(self.initial_state(t, s, node.emotion)?);
        }

        // k_ij for every contextual edge and the diagonal.
        let klg = |i: usize, j: usize| if cfg.use_csk { g.a_k[(i, j)].klg.as_str() } else { NONE };
        let mut knowledge: Vec<Vec<(usize, Var)>> = Vec::with_capacity(n);
        let mut self_knowledge = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::new();
            for j in g.neighbors(i) {
                row.push((j, enc.knowledge(t, klg(i, j))?));
            }
            knowledge.push(row);
            self_knowledge.push(enc.knowledge(t, klg(i, i))?);
        }

        let zeros = t.constant(Tensor::zeros(&[cfg.d_u]));
        let mut states = vec![h0];
        let mut attention = Vec::with_capacity(cfg.layers);
        for lp in &self.layout.layers {
            let prev = states.last().expect("initial states").clone();
            let mut cur: Vec<Var> = Vec::with_capacity(n);
            let mut layer_attn = Vec::with_capacity(n);
            let w_w = t.param(lp.w_w);
            let w_k = t.param(lp.w_k);
            for i in 0..n {
                let edges = &knowledge[i];
                let (msg, nlg) = if edges.is_empty() {
                    layer_attn.push(Vec::new());
                    (zeros, zeros)
                } else {
                    let mut scores = Vec::with_capacity(edges.len());
                    let mut messages = Vec::with_capacity(edges.len());
                    let mut knowledge_msgs = Vec::with_capacity(edges.len());
                    for &(j, k) in edges {
                        let wk = t.matmul(w_k, k)?;
                        let enriched = t.add(cur[j], wk)?;
                        let cat = t.concat(&[prev[i], enriched])?;
                        scores.push(t.matmul(w_w, cat)?);
                        let w_rel = match g.a_c[(i, j)].rel {
                            RelationType::SD => t.param(lp.w_sd),
                            RelationType::ID => t.param(lp.w_id),
                        };
                        let carried = if cfg.direct_add_variant { enriched } else { cur[j] };
                        messages.push(t.matmul(w_rel, carried)?);
                        knowledge_msgs.push(wk);
                    }
                    let scores = t.concat(&scores)?;
                    let alpha = t.masked_softmax(scores, edges.len())?;
                    layer_attn.push(t.value(alpha).to_vec());
                    let m = t.stack(&messages)?;
                    let msg = t.matmul(alpha, m)?;
                    let km = t.stack(&knowledge_msgs)?;
                    let nlg = t.matmul(alpha, km)?;
                    (msg, nlg)
                };
                let mut parts = vec![gru_cell(t, prev[i], msg, &lp.gru_n)?, gru_cell(t, msg, prev[i], &lp.gru_c)?];
                if let Some(p) = &lp.gru_k {
                    parts.push(gru_cell(t, nlg, prev[i], p)?);
                }
                if let Some(p) = &lp.gru_s {
                    parts.push(gru_cell(t, self_knowledge[i], prev[i], p)?);
                }
                let h = t.add_all(&parts)?;
                cur.push(t.dropout(h, cfg.dag_dropout));
            }
            states.push(cur);
            attention.push(layer_attn);
        }

        let reps: Vec<Var> = match cfg.layer_concat {
            LayerConcat::Last => states.last().expect("states").clone(),
            LayerConcat::All => (0..n)
                .map(|i| {
                    let parts: Vec<Var> = states.iter().map(|layer| layer[i]).collect();
                    t.concat(&parts)
                })
                .collect::<Result<_>>()?,
        };
        let (logits, pairs) = self.pair_logits(t, &reps)?;
        let probs = t.sigmoid(logits);
        Ok(ForwardOutput { probs, logits, pairs, states, attention })
    }

    /// `MLP([h_i || h_j])` for all `j <= i`. The first layer is applied as
    /// `h_i W_t + h_j W_s`, which equals the concatenated form.
    fn pair_logits(&self, t: &mut Tape<'_>, reps: &[Var]) -> Result<(Var, Vec<(usize, usize)>)> {
        let p = &self.layout.predictor;
        let n = reps.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
        let targets: Vec<usize> = pairs.iter().map(|&(i, _)| i).collect();
        let sources: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
        let h = t.stack(reps)?;
        let (w1t, w1s) = (t.param(p.w1_target), t.param(p.w1_source));
        let at = t.matmul(h, w1t)?;
        let as_ = t.matmul(h, w1s)?;
        let zt = t.gather_rows(at, &targets)?;
        let zs = t.gather_rows(as_, &sources)?;
        let z = t.add(zt, zs)?;
        let b1 = t.param(p.b1);
        let z = t.add_row(z, b1)?;
        let z = t.relu(z);
        let z = t.dropout(z, self.config.dropout);
        let w2 = t.param(p.w2);
        let z = t.matmul(z, w2)?;
        let b2 = t.param(p.b2);
        let z = t.add_row(z, b2)?;
        let z = t.relu(z);
        let z = t.dropout(z, self.config.dropout);
        let w3 = t.param(p.w3);
        let z = t.matmul(z, w3)?;
        let b3 = t.param(p.b3);
        let z = t.add_row(z, b3)?;
        let z = t.reshape(z, &[pairs.len()])?;
        Ok((z, pairs))
    }

    /// Summed binary cross entropy over the conversation's pairs.
    pub fn loss(&self, t: &mut Tape<'_>, out: &ForwardOutput, labels: &[f64]) -> Result<Var> {
        t.bce_logits(out.logits, labels)
    }

    /// Pair probabilities with dropout off.
    pub fn predict(&self, g: &KecGraph) -> Result<Vec<f64>> {
        let mut t = Tape::new(&self.params);
        let out = self.forward(&mut t, g)?;
        Ok(t.value(out.probs).to_vec())
    }

    /// Loss and its gradient scaled by `scale`; `dropout_key` enables
    /// dropout with that mask key.
    pub fn gradients(
        &self,
        g: &KecGraph,
        labels: &[f64],
        scale: f64,
        dropout_key: Option<u64>,
    ) -> Result<(f64, Gradients)> {
        let mut t = match dropout_key {
            Some(key) => Tape::training(&self.params, key),
            None => Tape::new(&self.params),
        };
        let out = self.forward(&mut t, g)?;
        let loss = self.loss(&mut t, &out, labels)?;
        let mut grads = Gradients::zeros_like(&self.params);
        t.backward_scaled(loss, scale, &mut grads)?;
        Ok((t.scalar(loss), grads))
    }

    /// Emotion embedding row, if the table exists.
    pub fn emotion_embedding(&self, e: EmotionLabel) -> Option<&[f64]> {
        let id = self.layout.emotion?;
        let d = self.config.d_e;
        Some(&self.params.get(id).data()[e.index() * d..(e.index() + 1) * d])
    }
}

fn emotion_table(
    config: &ModelConfig,
    params: &ParamSet,
    encoder: EncoderParams,
    embeddings: Option<&Embeddings>,
    rng: &mut ChaCha8Rng,
) -> Tensor {
    let (d_e, d_raw) = (config.d_e, config.d_raw);
    let a = libm::sqrt(6.0 / (d_e + d_raw) as f64);
    let projection: Vec<f64> = (0..d_e * d_raw).map(|_| rng.gen_range(-a..a)).collect();
    let mut data = Vec::with_capacity(EmotionLabel::ALL.len() * d_e);
    for e in EmotionLabel::ALL {
        let raw: Option<Vec<f64>> = match (config.emotion_init, &config.encoder) {
            (EmotionInit::Random, _) => None,
            (EmotionInit::FromEncoder, EncoderMode::Hashed { buckets }) => {
                let table = params.get(encoder.table.expect("hashed mode has a table"));
                let mut raw = vec![f64::NEG_INFINITY; d_raw];
                for r in hash_tokens(e.as_str(), *buckets) {
                    for (m, v) in raw.iter_mut().zip(&table.data()[r * d_raw..(r + 1) * d_raw]) {
                        *m = m.max(*v);
                    }
                }
                Some(raw)
            }
            (EmotionInit::FromEncoder, EncoderMode::Precomputed) => {
                embeddings.and_then(|m| m.get(&emotion_key(e.as_str()))).filter(|v| v.len() == d_raw).cloned()
            }
        };
        match raw {
            Some(raw) => data.extend(
                projection.chunks_exact(d_raw).map(|row| row.iter().zip(&raw).map(|(w, x)| w * x).sum::<f64>()),
            ),
            None => data.extend((0..d_e).map(|_| rng.gen_range(-a..a))),
        }
    }
    Tensor::matrix(EmotionLabel::ALL.len(), d_e, data).expect("sized")
}
