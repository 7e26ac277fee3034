//! Training loop, evaluation and the window sweep.
//!
//! An optimizer step covers `batch_size * accum_steps` conversations. Their
//! gradients are computed in parallel and summed in conversation order with
//! every backward pass seeded by `1 / pairs_in_step`, so the update is the
//! gradient of the mean pair loss over the step regardless of how it is
//! split into micro-batches. Dropout masks are keyed by seed, epoch and the
//! conversation's position in the training set.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use kec_core::autodiff::rng::derive;
use kec_core::autodiff::{AdamW, AdamWConfig, Gradients};
use kec_core::corpus::{enumerate_pairs, Conversation};
use kec_core::graph::{build_graph, build_graph_without_knowledge, KecGraph};
use kec_core::knowledge::KnowledgeStore;
use kec_core::metrics::{analyze_se_de, evaluate_predictions, mean_std, MeanStd, MetricsReport, SeDeReport};
use kec_core::model::{Embeddings, Model, ModelConfig};
use kec_core::sentiment::Lexicon;

use crate::checkpoint::Checkpoint;
use crate::config::TrainConfig;
use crate::error::{Error, Result};

/// Conversations with their graphs and pair labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub convs: Vec<Conversation>,
    pub graphs: Vec<KecGraph>,
    pub labels: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.convs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.convs.is_empty()
    }

    pub fn pair_count(&self) -> usize {
        self.labels.iter().map(Vec::len).sum()
    }
}

/// Builds graphs for `corpus`. Knowledge is required and must cover the
/// corpus when the model uses it.
pub fn prepare(
    corpus: &[Conversation],
    knowledge: Option<&KnowledgeStore>,
    lexicon: &Lexicon,
    model: &ModelConfig,
) -> Result<Dataset> {
    let graphs: Vec<KecGraph> = if model.use_csk {
        let store = knowledge.ok_or_else(|| Error::Config("knowledge is required unless use_csk is off".into()))?;
        store.check_coverage(corpus)?;
        let w_k = model.knowledge_window()?;
        let opts = model.knowledge_options();
        corpus.par_iter().map(|c| build_graph(c, store, lexicon, model.w_c, w_k, opts)).collect::<Result<_, _>>()?
    } else {
        corpus.par_iter().map(|c| build_graph_without_knowledge(c, model.w_c)).collect::<Result<_, _>>()?
    };
    let labels =
        corpus.iter().map(|c| enumerate_pairs(c).iter().map(|p| if p.label { 1.0 } else { 0.0 }).collect()).collect();
    Ok(Dataset { convs: corpus.to_vec(), graphs, labels })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub steps: usize,
    /// Mean pair loss over the epoch.
    pub loss: f64,
}

/// Stepwise training of one seed.
pub struct Trainer<'a> {
    cfg: &'a TrainConfig,
    data: &'a Dataset,
    pub seed: u64,
    pub model: Model,
    pub optimizer: AdamW,
    pub epoch: usize,
    pub steps: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        cfg: &'a TrainConfig,
        seed: u64,
        data: &'a Dataset,
        embeddings: Option<Arc<Embeddings>>,
    ) -> Result<Self> {
        cfg.validate()?;
        let model = Model::with_embeddings(cfg.model.clone(), seed, embeddings)?;
        let optimizer = AdamW::new(
            &model.params,
            AdamWConfig { lr: cfg.lr, weight_decay: cfg.weight_decay, ..AdamWConfig::default() },
        );
        Ok(Self { cfg, data, seed, model, optimizer, epoch: 0, steps: 0 })
    }

    /// Summed step gradient over `members` (positions in the training
    /// set), seeded by the mean-pair-loss scale. Returns the mean pair loss.
    pub fn step_gradients(&self, members: &[usize]) -> Result<(f64, Gradients)> {
        let pairs: usize = members.iter().map(|&k| self.data.labels[k].len()).sum();
        let scale = 1.0 / pairs as f64;
        let epoch_key = derive(self.seed, self.epoch as u64);
        let mut total = Gradients::zeros_like(&self.model.params);
        let mut loss = 0.0;
        for micro in members.chunks(self.cfg.batch_size) {
            let parts: Vec<(f64, Gradients)> = micro
                .par_iter()
                .map(|&k| {
                    let key = (self.model.config.dropout > 0.0 || self.model.config.dag_dropout > 0.0)
                        .then(|| derive(epoch_key, k as u64));
                    self.model.gradients(&self.data.graphs[k], &self.data.labels[k], scale, key)
                })
                .collect::<Result<_, _>>()?;
            for (&k, (l, g)) in micro.iter().zip(parts) {
                if !l.is_finite() || !g.is_finite() {
                    return Err(Error::NonFinite {
                        seed: self.seed,
                        epoch: self.epoch,
                        step: self.steps,
                        conv_id: self.data.convs[k].id().to_string(),
                    });
                }
                loss += l;
                total.add_assign(&g);
            }
        }
        Ok((loss * scale, total))
    }

    /// One optimizer update over `members`.
    pub fn step(&mut self, members: &[usize]) -> Result<f64> {
        let (loss, grads) = self.step_gradients(members)?;
        self.optimizer.step(&mut self.model.params, &grads)?;
        self.steps += 1;
        Ok(loss)
    }

    pub fn run_epoch(&mut self) -> Result<EpochStats> {
        self.epoch += 1;
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive(self.seed, self.epoch as u64)));
        let mut weighted = 0.0;
        let mut steps = 0;
        for members in order.chunks(self.cfg.effective_batch()) {
            let pairs: usize = members.iter().map(|&k| self.data.labels[k].len()).sum();
            weighted += self.step(members)? * pairs as f64;
            steps += 1;
        }
        let total = self.data.pair_count().max(1);
        Ok(EpochStats { epoch: self.epoch, steps, loss: weighted / total as f64 })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            optimizer: Some(self.optimizer.clone()),
            seed: self.seed,
            epoch: self.epoch,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub probs: Vec<Vec<f64>>,
}

pub fn predict_all(model: &Model, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    Ok(data.graphs.par_iter().map(|g| model.predict(g)).collect::<Result<_, _>>()?)
}

pub fn evaluate(model: &Model, data: &Dataset) -> Result<Evaluation> {
    let probs = predict_all(model, data)?;
    let report = evaluate_predictions(&data.convs, &probs)?;
    Ok(Evaluation { report, probs })
}

pub fn analyze(model: &Model, data: &Dataset) -> Result<SeDeReport> {
    Ok(analyze_se_de(&data.convs, &predict_all(model, data)?)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Best-dev checkpoint, or the final one without a dev set.
    pub best: Checkpoint,
    pub best_dev: Option<MetricsReport>,
    pub log: Vec<String>,
}

pub fn metrics_fields(prefix: &str, r: &MetricsReport) -> String {
    format!("{prefix}_neg_f1={:.6} {prefix}_pos_f1={:.6} {prefix}_macro_f1={:.6}", r.neg_f1, r.pos_f1, r.macro_f1)
}

/// Trains one seed, keeping the epoch with the best dev macro F1 (earliest
/// on ties). Each log line is also passed to `on_log`.
pub fn train_seed(
    cfg: &TrainConfig,
    seed: u64,
    train: &Dataset,
    dev: Option<&Dataset>,
    embeddings: Option<Arc<Embeddings>>,
    on_log: &mut dyn FnMut(&str),
) -> Result<RunResult> {
    let mut trainer = Trainer::new(cfg, seed, train, embeddings)?;
    let mut best: Option<(Checkpoint, MetricsReport)> = None;
    let mut log = Vec::new();
    for _ in 0..cfg.epochs {
        let stats = trainer.run_epoch()?;
        let mut line = format!("seed={seed} epoch={} steps={} loss={:.6}", stats.epoch, trainer.steps, stats.loss);
        if let Some(dev) = dev {
            let report = evaluate(&trainer.model, dev)?.report;
            line.push(' ');
            line.push_str(&metrics_fields("dev", &report));
            if best.as_ref().is_none_or(|(_, b)| report.macro_f1 > b.macro_f1) {
                best = Some((trainer.checkpoint(), report));
            }
        }
        on_log(&line);
        log.push(line);
    }
    Ok(match best {
        Some((ck, report)) => RunResult { best: ck, best_dev: Some(report), log },
        None => RunResult { best: trainer.checkpoint(), best_dev: None, log },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub run: RunResult,
    pub test: Option<MetricsReport>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub neg_f1: MeanStd,
    pub pos_f1: MeanStd,
    pub macro_f1: MeanStd,
}

pub fn summarize(reports: &[MetricsReport]) -> Summary {
    let col = |f: fn(&MetricsReport) -> f64| mean_std(&reports.iter().map(f).collect::<Vec<_>>());
    Summary { neg_f1: col(|r| r.neg_f1), pos_f1: col(|r| r.pos_f1), macro_f1: col(|r| r.macro_f1) }
}

/// Runs every configured seed; the test set is scored with each seed's
/// selected checkpoint.
pub fn train_all(
    cfg: &TrainConfig,
    train: &Dataset,
    dev: Option<&Dataset>,
    test: Option<&Dataset>,
    embeddings: Option<Arc<Embeddings>>,
    on_log: &mut dyn FnMut(&str),
) -> Result<Vec<SeedResult>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let run = train_seed(cfg, seed, train, dev, embeddings.clone(), on_log)?;
        let test = test.map(|t| evaluate(&run.best.model, t).map(|e| e.report)).transpose()?;
        if let Some(r) = &test {
            on_log(&format!("seed={seed} best_epoch={} {}", run.best.epoch, metrics_fields("test", r)));
        }
        out.push(SeedResult { seed, run, test });
    }
    Ok(out)
}

/// Corpora and resources shared by every sweep point.
pub struct SweepInputs<'a> {
    pub train: &'a [Conversation],
    pub dev: &'a [Conversation],
    pub knowledge: Option<&'a KnowledgeStore>,
    pub lexicon: &'a Lexicon,
    pub embeddings: Option<Arc<Embeddings>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub window: usize,
    /// Best dev macro F1 per seed.
    pub per_seed: Vec<f64>,
    pub macro_f1: MeanStd,
}

/// Trains once per window size with `w_c = w_k = w` and the configured
/// seeds.
pub fn sweep_window(
    cfg: &TrainConfig,
    sizes: &[usize],
    inputs: &SweepInputs<'_>,
    on_log: &mut dyn FnMut(&str),
) -> Result<Vec<SweepRow>> {
    let mut seen = BTreeSet::new();
    for &w in sizes {
        if w == 0 {
            return Err(Error::Config("window sizes must be at least 1".into()));
        }
        if !seen.insert(w) {
            return Err(Error::Config(format!("window size {w} listed twice")));
        }
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &w in sizes {
        let mut c = cfg.clone();
        c.model.w_c = w;
        c.model.w_k = w;
        let train = prepare(inputs.train, inputs.knowledge, inputs.lexicon, &c.model)?;
        let dev = prepare(inputs.dev, inputs.knowledge, inputs.lexicon, &c.model)?;
        let mut per_seed = Vec::with_capacity(c.seeds.len());
        for &seed in &c.seeds {
            let mut tagged = |l: &str| on_log(&format!("window={w} {l}"));
            let run = train_seed(&c, seed, &train, Some(&dev), inputs.embeddings.clone(), &mut tagged)?;
            per_seed.push(run.best_dev.map_or(0.0, |r| r.macro_f1));
        }
        on_log(&format!("window={w} dev_macro_f1_mean={:.6}", mean_std(&per_seed).mean));
        rows.push(SweepRow { window: w, macro_f1: mean_std(&per_seed), per_seed });
    }
    Ok(rows)
}
