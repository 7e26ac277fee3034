//! Text tables for the terminal and JSON records for files.

use serde_json::{json, Value};

use kec_core::corpus::{EmotionLabel, StatsReport};
use kec_core::metrics::{MeanStd, MetricsReport, PairKind, SeDeReport};

use crate::train::{SeedResult, Summary, SweepRow};

pub fn stats_table(s: &StatsReport) -> String {
    format!(
        "positive_pairs\t{}\nnegative_pairs\t{}\ndialogues\t{}\nutterances\t{}\navg_utterance_len\t{}\n",
        s.positive_pairs, s.negative_pairs, s.dialogues, s.utterances, s.avg_utterance_len
    )
}

pub fn stats_json(s: &StatsReport) -> Value {
    json!({
        "positive_pairs": s.positive_pairs,
        "negative_pairs": s.negative_pairs,
        "dialogues": s.dialogues,
        "utterances": s.utterances,
        "avg_utterance_len": s.avg_utterance_len,
        "mean_utterance_len": s.mean_utterance_len,
    })
}

pub fn metrics_table(r: &MetricsReport) -> String {
    let c = &r.confusion;
    format!(
        "neg_f1\tpos_f1\tmacro_f1\ttp\tfp\tfn\ttn\n{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}\t{}\n",
        r.neg_f1, r.pos_f1, r.macro_f1, c.tp, c.fp, c.fn_, c.tn
    )
}

pub fn metrics_json(r: &MetricsReport) -> Value {
    let c = &r.confusion;
    json!({
        "neg_f1": r.neg_f1,
        "pos_f1": r.pos_f1,
        "macro_f1": r.macro_f1,
        "confusion": {"tp": c.tp, "fp": c.fp, "fn": c.fn_, "tn": c.tn},
    })
}

fn pct(m: &MeanStd) -> String {
    format!("{:.2}({:.2})", m.mean * 100.0, m.std * 100.0)
}

/// `mean(std)` in percent, one row per metric.
pub fn summary_table(s: &Summary) -> String {
    format!("neg_f1\t{}\npos_f1\t{}\nmacro_f1\t{}\n", pct(&s.neg_f1), pct(&s.pos_f1), pct(&s.macro_f1))
}

fn mean_std_json(m: &MeanStd) -> Value {
    json!({"mean": m.mean, "std": m.std})
}

pub fn runs_json(results: &[SeedResult], summary: Option<&Summary>) -> Value {
    let runs: Vec<Value> = results
        .iter()
        .map(|r| {
            json!({
                "seed": r.seed,
                "best_epoch": r.run.best.epoch,
                "dev": r.run.best_dev.as_ref().map(metrics_json),
                "test": r.test.as_ref().map(metrics_json),
            })
        })
        .collect();
    json!({
        "runs": runs,
        "summary": summary.map(|s| json!({
            "neg_f1": mean_std_json(&s.neg_f1),
            "pos_f1": mean_std_json(&s.pos_f1),
            "macro_f1": mean_std_json(&s.macro_f1),
        })),
    })
}

fn kind_name(k: PairKind) -> &'static str {
    match k {
        PairKind::SameEmotion => "SE",
        PairKind::DifferentEmotion => "DE",
    }
}

/// One row per target emotion; empty buckets print `-`.
pub fn se_de_table(r: &SeDeReport) -> String {
    let mut out = String::from("emotion\tSE_recall\tSE_n\tDE_recall\tDE_n\n");
    for e in EmotionLabel::ALL.into_iter().filter(|e| !e.is_neutral()) {
        out.push_str(e.as_str());
        for k in [PairKind::SameEmotion, PairKind::DifferentEmotion] {
            let c = r.counts(e, k);
            match c.recall() {
                Some(v) => out.push_str(&format!("\t{v:.3}\t{}", c.total)),
                None => out.push_str("\t-\t0"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn se_de_json(r: &SeDeReport) -> Value {
    let rows: Vec<Value> = r
        .buckets
        .iter()
        .map(|((e, k), c)| {
            json!({
                "emotion": e.as_str(),
                "kind": kind_name(*k),
                "total": c.total,
                "detected": c.detected,
                "recall": c.recall(),
            })
        })
        .collect();
    json!({ "buckets": rows })
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("window\tdev_macro_f1_mean\tdev_macro_f1_std\n");
    for r in rows {
        out.push_str(&format!("{}\t{:.4}\t{:.4}\n", r.window, r.macro_f1.mean, r.macro_f1.std));
    }
    out
}

pub fn sweep_json(rows: &[SweepRow]) -> Value {
    Value::Array(
        rows.iter()
            .map(
                |r| json!({"window": r.window, "per_seed": r.per_seed, "mean": r.macro_f1.mean, "std": r.macro_f1.std}),
            )
            .collect(),
    )
}
