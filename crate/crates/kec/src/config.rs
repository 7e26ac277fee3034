//! Flat `key = value` configuration files covering model and training
//! settings. `#` starts a comment line; unknown keys are errors.

use std::path::PathBuf;

use kec_core::model::{EmotionInit, EncoderMode, LayerConcat, ModelConfig};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub accum_steps: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seeds: Vec<u64>,
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            epochs: 40,
            batch_size: 4,
            accum_steps: 2,
            lr: 3e-5,
            weight_decay: 1e-4,
            seeds: vec![0, 1, 2, 3, 4],
            checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch_size == 0 || self.accum_steps == 0 {
            return Err(Error::Config("batch_size and accum_steps must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!("weight_decay must be non-negative, got {}", self.weight_decay)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        Ok(())
    }

    /// Conversations per optimizer step.
    pub fn effective_batch(&self) -> usize {
        self.batch_size * self.accum_steps
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("`{key}` expects a boolean, got `{v}`"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("`{key}` has invalid value `{v}`")))
}

/// Applies one setting on top of `cfg`.
pub fn apply(cfg: &mut TrainConfig, key: &str, v: &str) -> Result<()> {
    let m = &mut cfg.model;
    match key {
        "d_u" => m.d_u = parse_num(key, v)?,
        "layers" => m.layers = parse_num(key, v)?,
        "w_c" => m.w_c = parse_num(key, v)?,
        "w_k" => m.w_k = parse_num(key, v)?,
        "d_e" => m.d_e = parse_num(key, v)?,
        "d_raw" => m.d_raw = parse_num(key, v)?,
        "encoder" => {
            m.encoder = match v {
                "precomputed" => EncoderMode::Precomputed,
                "hashed" => match m.encoder {
                    EncoderMode::Hashed { .. } => m.encoder.clone(),
                    EncoderMode::Precomputed => EncoderMode::Hashed { buckets: 4096 },
                },
                _ => return Err(Error::Config(format!("`encoder` must be hashed or precomputed, got `{v}`"))),
            }
        }
        "hash_buckets" => m.encoder = EncoderMode::Hashed { buckets: parse_num(key, v)? },
        "mlp_hidden" => m.mlp_hidden = parse_num(key, v)?,
        "dropout" => m.dropout = parse_num(key, v)?,
        "dag_dropout" => m.dag_dropout = parse_num(key, v)?,
        "use_csk" => m.use_csk = parse_bool(key, v)?,
        "use_emotion_emb" => m.use_emotion_emb = parse_bool(key, v)?,
        "use_gru_k" => m.use_gru_k = parse_bool(key, v)?,
        "use_gru_s" => m.use_gru_s = parse_bool(key, v)?,
        "use_neutral_knowledge" => m.use_neutral_knowledge = parse_bool(key, v)?,
        "direct_add_variant" => m.direct_add_variant = parse_bool(key, v)?,
        "layer_concat" => {
            m.layer_concat = match v {
                "all" => LayerConcat::All,
                "last" => LayerConcat::Last,
                _ => return Err(Error::Config(format!("`layer_concat` must be all or last, got `{v}`"))),
            }
        }
        "emotion_init" => {
            m.emotion_init = match v {
                "encoder" => EmotionInit::FromEncoder,
                "random" => EmotionInit::Random,
                _ => return Err(Error::Config(format!("`emotion_init` must be encoder or random, got `{v}`"))),
            }
        }
        "epochs" => cfg.epochs = parse_num(key, v)?,
        "batch_size" => cfg.batch_size = parse_num(key, v)?,
        "accum_steps" => cfg.accum_steps = parse_num(key, v)?,
        "lr" => cfg.lr = parse_num(key, v)?,
        "weight_decay" => cfg.weight_decay = parse_num(key, v)?,
        "seeds" => {
            cfg.seeds = v.split(',').map(|s| parse_num(key, s.trim())).collect::<Result<_>>()?;
        }
        "checkpoint" => cfg.checkpoint = (!v.is_empty()).then(|| PathBuf::from(v)),
        _ => return Err(Error::Config(format!("unknown key `{key}`"))),
    }
    Ok(())
}

pub fn parse_config(text: &str) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        apply(&mut cfg, k.trim(), v.trim()).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn render_model_config(m: &ModelConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
    kv("d_u", m.d_u.to_string());
    kv("layers", m.layers.to_string());
    kv("w_c", m.w_c.to_string());
    kv("w_k", m.w_k.to_string());
    kv("d_e", m.d_e.to_string());
    kv("d_raw", m.d_raw.to_string());
    match m.encoder {
        EncoderMode::Hashed { buckets } => {
            kv("encoder", "hashed".into());
            kv("hash_buckets", buckets.to_string());
        }
        EncoderMode::Precomputed => kv("encoder", "precomputed".into()),
    }
    kv("mlp_hidden", m.mlp_hidden.to_string());
    kv("dropout", m.dropout.to_string());
    kv("dag_dropout", m.dag_dropout.to_string());
    kv("use_csk", m.use_csk.to_string());
    kv("use_emotion_emb", m.use_emotion_emb.to_string());
    kv("use_gru_k", m.use_gru_k.to_string());
    kv("use_gru_s", m.use_gru_s.to_string());
    kv("use_neutral_knowledge", m.use_neutral_knowledge.to_string());
    kv("direct_add_variant", m.direct_add_variant.to_string());
    kv(
        "layer_concat",
        match m.layer_concat {
            LayerConcat::All => "all".into(),
            LayerConcat::Last => "last".into(),
        },
    );
    kv(
        "emotion_init",
        match m.emotion_init {
            EmotionInit::FromEncoder => "encoder".into(),
            EmotionInit::Random => "random".into(),
        },
    );
    out
}

pub fn render_config(cfg: &TrainConfig) -> String {
    let mut out = render_model_config(&cfg.model);
    out.push_str(&format!("epochs = {}\n", cfg.epochs));
    out.push_str(&format!("batch_size = {}\n", cfg.batch_size));
    out.push_str(&format!("accum_steps = {}\n", cfg.accum_steps));
    out.push_str(&format!("lr = {}\n", cfg.lr));
    out.push_str(&format!("weight_decay = {}\n", cfg.weight_decay));
    let seeds: Vec<String> = cfg.seeds.iter().map(u64::to_string).collect();
    out.push_str(&format!("seeds = {}\n", seeds.join(",")));
    if let Some(p) = &cfg.checkpoint {
        out.push_str(&format!("checkpoint = {}\n", p.display()));
    }
    out
}

/// Model settings only, e.g. from a checkpoint header.
pub fn parse_model_config(text: &str) -> Result<ModelConfig> {
    let mut cfg = TrainConfig::default();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("malformed line `{line}`")))?;
        apply(&mut cfg, k.trim(), v.trim())?;
    }
    cfg.model.validate()?;
    Ok(cfg.model)
}
