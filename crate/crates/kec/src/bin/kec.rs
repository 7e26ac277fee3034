use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use kec::checkpoint::{load_checkpoint, save_checkpoint};
use kec::codec::{dump_graphs, serialize_graphs};
use kec::config::{parse_config, render_config, TrainConfig};
use kec::io::{
    load_corpus, load_embeddings, load_knowledge, load_lexicon, render_corpus, render_knowledge, render_lexicon,
    write_text,
};
use kec::report;
use kec::train::{analyze, evaluate, prepare, summarize, sweep_window, train_all, SweepInputs};
use kec::{end_to_end_check, gradcheck_toy, toy_config, Error, Result};
use kec_core::corpus::{compute_stats, Corpus};
use kec_core::knowledge::KnowledgeStore;
use kec_core::model::{Embeddings, ModelConfig};
use kec_core::sentiment::Lexicon;
use kec_core::synth::synth_corpus;

/// Knowledge-enhanced conversation graphs for causal emotion entailment.
#[derive(Parser)]
#[command(name = "kec", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pair, dialogue and utterance counts of a corpus.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build graphs and write them in binary form, or dump them as text.
    BuildGraph {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print a human-readable dump.
        #[arg(long)]
        dump: bool,
    },
    /// Generate a synthetic corpus with knowledge and lexicon files.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        train: usize,
        #[arg(long, default_value_t = 0)]
        dev: usize,
        #[arg(long, default_value_t = 0)]
        test: usize,
        #[arg(long, default_value_t = 8)]
        max_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Draw causes at random instead of planting them in knowledge.
        #[arg(long)]
        no_plant: bool,
    },
    /// Train over the configured seeds.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        /// Output directory for logs, checkpoints and results.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on a corpus.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Same/different emotion recall of a checkpoint.
    Analyze {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dev macro F1 for each window size (context and knowledge tied).
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of the full model on a 3-utterance toy.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        d_u: usize,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        /// Central difference step.
        #[arg(long)]
        eps: Option<f64>,
        /// Magnitude floor of the relative error.
        #[arg(long)]
        floor: Option<f64>,
        /// Largest accepted relative error.
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    knowledge: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Single seed replacing the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    window_context: Option<usize>,
    #[arg(long)]
    window_knowledge: Option<usize>,
    #[arg(long)]
    no_csk: bool,
    #[arg(long)]
    no_emotion_emb: bool,
    #[arg(long)]
    no_gru_k: bool,
    #[arg(long)]
    no_gru_s: bool,
    #[arg(long)]
    no_neutral_knowledge: bool,
    #[arg(long)]
    direct_add: bool,
}

impl ModelArgs {
    fn train_config(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => parse_config(&kec::io::read_text(p)?)?,
            None => TrainConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(lr) = self.lr {
            cfg.lr = lr;
        }
        let m = &mut cfg.model;
        if let Some(w) = self.window_context {
            m.w_c = w;
        }
        if let Some(w) = self.window_knowledge {
            m.w_k = w;
        }
        m.use_csk &= !self.no_csk;
        m.use_emotion_emb &= !self.no_emotion_emb;
        m.use_gru_k &= !self.no_gru_k;
        m.use_gru_s &= !self.no_gru_s;
        m.use_neutral_knowledge &= !self.no_neutral_knowledge;
        m.direct_add_variant |= self.direct_add;
        cfg.validate()?;
        Ok(cfg)
    }

    fn embeddings(&self) -> Result<Option<Arc<Embeddings>>> {
        load_optional_embeddings(self.embeddings.as_deref())
    }
}

fn load_optional_embeddings(path: Option<&Path>) -> Result<Option<Arc<Embeddings>>> {
    path.map(|p| load_embeddings(p).map(Arc::new)).transpose()
}

struct Resources {
    corpus: Corpus,
    knowledge: Option<KnowledgeStore>,
    lexicon: Lexicon,
}

impl DataArgs {
    fn load(&self, model: &ModelConfig) -> Result<Resources> {
        let corpus = load_corpus(&self.corpus)?;
        let knowledge = self.knowledge.as_deref().map(load_knowledge).transpose()?;
        let lexicon = match &self.lexicon {
            Some(p) => load_lexicon(p)?,
            None if model.use_csk => return Err(Error::Config("--lexicon is required unless --no-csk".into())),
            None => Lexicon::new(),
        };
        if model.use_csk && knowledge.is_none() {
            return Err(Error::Config("--knowledge is required unless --no-csk".into()));
        }
        Ok(Resources { corpus, knowledge, lexicon })
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    write_text(path, &format!("{}\n", serde_json::to_string_pretty(value).expect("json values serialize")))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Stats { corpus, out } => {
            let stats = compute_stats(&load_corpus(&corpus)?);
            print!("{}", report::stats_table(&stats));
            if let Some(p) = out {
                write_json(&p, &report::stats_json(&stats))?;
            }
        }
        Command::BuildGraph { data, model, out, dump } => {
            let cfg = model.train_config()?;
            let res = data.load(&cfg.model)?;
            let set = prepare(&res.corpus, res.knowledge.as_ref(), &res.lexicon, &cfg.model)?;
            if let Some(p) = out {
                fs::write(&p, serialize_graphs(&set.graphs)).map_err(|e| Error::Io { path: p.clone(), source: e })?;
            }
            if dump {
                print!("{}", dump_graphs(&set.graphs));
            }
            println!("graphs={}", set.graphs.len());
        }
        Command::Synth { out, train, dev, test, max_len, seed, no_plant } => {
            let data = synth_corpus(train + dev + test, max_len, seed, !no_plant)?;
            create_dir(&out)?;
            let (tr, rest) = data.corpus.split_at(train);
            let (dv, te) = rest.split_at(dev);
            for (name, part) in [("train.jsonl", tr), ("dev.jsonl", dv), ("test.jsonl", te)] {
                if !part.is_empty() {
                    write_text(&out.join(name), &render_corpus(part))?;
                }
            }
            write_text(&out.join("knowledge.jsonl"), &render_knowledge(&data.knowledge))?;
            write_text(&out.join("lexicon.tsv"), &render_lexicon(&data.lexicon))?;
            println!("conversations={} train={train} dev={dev} test={test}", data.corpus.len());
        }
        Command::Train { data, model, dev, test, out } => {
            let cfg = model.train_config()?;
            let res = data.load(&cfg.model)?;
            let load =
                |p: &Path| -> Result<_> { prepare(&load_corpus(p)?, res.knowledge.as_ref(), &res.lexicon, &cfg.model) };
            let train_set = prepare(&res.corpus, res.knowledge.as_ref(), &res.lexicon, &cfg.model)?;
            let dev_set = dev.as_deref().map(load).transpose()?;
            let test_set = test.as_deref().map(load).transpose()?;
            create_dir(&out)?;
            write_text(&out.join("config.txt"), &render_config(&cfg))?;
            let mut log = String::new();
            let mut on_log = |l: &str| {
                println!("{l}");
                log.push_str(l);
                log.push('\n');
            };
            let results =
                train_all(&cfg, &train_set, dev_set.as_ref(), test_set.as_ref(), model.embeddings()?, &mut on_log)?;
            write_text(&out.join("train.log"), &log)?;
            for r in &results {
                save_checkpoint(&out.join(format!("checkpoint-seed{}.bin", r.seed)), &r.run.best)?;
            }
            let tests: Vec<_> = results.iter().filter_map(|r| r.test).collect();
            let summary = (!tests.is_empty()).then(|| summarize(&tests));
            if let Some(s) = &summary {
                print!("{}", report::summary_table(s));
            }
            write_json(&out.join("results.json"), &report::runs_json(&results, summary.as_ref()))?;
        }
        Command::Eval { data, checkpoint, embeddings, out } => {
            let mut ck = load_checkpoint(&checkpoint)?;
            ck.model.set_embeddings(load_optional_embeddings(embeddings.as_deref())?);
            let res = data.load(&ck.model.config)?;
            let set = prepare(&res.corpus, res.knowledge.as_ref(), &res.lexicon, &ck.model.config)?;
            let r = evaluate(&ck.model, &set)?.report;
            print!("{}", report::metrics_table(&r));
            if let Some(p) = out {
                write_json(&p, &report::metrics_json(&r))?;
            }
        }
        Command::Analyze { data, checkpoint, embeddings, out } => {
            let mut ck = load_checkpoint(&checkpoint)?;
            ck.model.set_embeddings(load_optional_embeddings(embeddings.as_deref())?);
            let res = data.load(&ck.model.config)?;
            let set = prepare(&res.corpus, res.knowledge.as_ref(), &res.lexicon, &ck.model.config)?;
            let r = analyze(&ck.model, &set)?;
            print!("{}", report::se_de_table(&r));
            if let Some(p) = out {
                write_json(&p, &report::se_de_json(&r))?;
            }
        }
        Command::Sweep { data, model, dev, sizes, out } => {
            let cfg = model.train_config()?;
            let res = data.load(&cfg.model)?;
            let dev_corpus = load_corpus(&dev)?;
            let inputs = SweepInputs {
                train: &res.corpus,
                dev: &dev_corpus,
                knowledge: res.knowledge.as_ref(),
                lexicon: &res.lexicon,
                embeddings: model.embeddings()?,
            };
            let rows = sweep_window(&cfg, &sizes, &inputs, &mut |l| println!("{l}"))?;
            print!("{}", report::sweep_table(&rows));
            if let Some(p) = out {
                write_json(&p, &report::sweep_json(&rows))?;
            }
        }
        Command::Gradcheck { seed, d_u, layers, eps, floor, tolerance } => {
            let mut check = end_to_end_check();
            check.eps = eps.unwrap_or(check.eps);
            check.floor = floor.unwrap_or(check.floor);
            let r = gradcheck_toy(toy_config(d_u, layers), seed, &check)?;
            println!("checked={} max_rel_error={:.3e}", r.checked, r.max_rel_error);
            if let Some((name, k)) = &r.worst {
                println!("worst={name}[{k}] analytic={:.6e} numeric={:.6e}", r.worst_analytic, r.worst_numeric);
            }
            if r.max_rel_error.is_nan() || r.max_rel_error > tolerance {
                return Err(Error::GradCheck { max_rel_error: r.max_rel_error, tolerance });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
