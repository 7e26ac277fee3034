//! Pair classification metrics and same/different emotion recall.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::corpus::{enumerate_pairs, Conversation, EmotionLabel};
use crate::error::{Error, Result};

/// Pairs with probability strictly above this are predicted causal.
pub const THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

/// `2tp / (2tp + fp + fn)`, zero when the class never occurs.
pub fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

impl Confusion {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn pos_f1(&self) -> f64 {
        f1(self.tp, self.fp, self.fn_)
    }

    /// F1 of the negative class.
    pub fn neg_f1(&self) -> f64 {
        f1(self.tn, self.fn_, self.fp)
    }

    pub fn report(&self) -> MetricsReport {
        let (neg_f1, pos_f1) = (self.neg_f1(), self.pos_f1());
        MetricsReport { neg_f1, pos_f1, macro_f1: (neg_f1 + pos_f1) / 2.0, confusion: *self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub neg_f1: f64,
    pub pos_f1: f64,
    /// Mean of the two class F1 scores.
    pub macro_f1: f64,
    pub confusion: Confusion,
}

/// Confusion of one conversation; `probs` follows [`enumerate_pairs`] order.
pub fn confusion_for(conv: &Conversation, probs: &[f64]) -> Result<Confusion> {
    let pairs = enumerate_pairs(conv);
    if pairs.len() != probs.len() {
        return Err(Error::Dimension { expected: pairs.len(), found: probs.len() });
    }
    let mut c = Confusion::default();
    for (p, prob) in pairs.iter().zip(probs) {
        c.record(*prob > THRESHOLD, p.label);
    }
    Ok(c)
}

/// Global confusion over all pairs of all conversations.
pub fn evaluate_predictions(corpus: &[Conversation], probs: &[Vec<f64>]) -> Result<MetricsReport> {
    if corpus.len() != probs.len() {
        return Err(Error::Dimension { expected: corpus.len(), found: probs.len() });
    }
    let mut total = Confusion::default();
    for (conv, p) in corpus.iter().zip(probs) {
        total.merge(&confusion_for(conv, p)?);
    }
    Ok(total.report())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len();
    if n == 0 {
        return MeanStd { mean: 0.0, std: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64)
    } else {
        0.0
    };
    MeanStd { mean, std }
}

/// Whether a causal pair's source shares the target's emotion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PairKind {
    SameEmotion,
    DifferentEmotion,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecallCounts {
    pub total: usize,
    pub detected: usize,
}

impl RecallCounts {
    /// `None` for an empty bucket.
    pub fn recall(&self) -> Option<f64> {
        (self.total > 0).then(|| self.detected as f64 / self.total as f64)
    }
}

/// Positive-pair recall bucketed by target emotion and SE/DE kind.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeDeReport {
    pub buckets: BTreeMap<(EmotionLabel, PairKind), RecallCounts>,
}

impl SeDeReport {
    pub fn counts(&self, target: EmotionLabel, kind: PairKind) -> RecallCounts {
        self.buckets.get(&(target, kind)).copied().unwrap_or_default()
    }

    pub fn recall(&self, target: EmotionLabel, kind: PairKind) -> Option<f64> {
        self.counts(target, kind).recall()
    }

    pub fn total_detected(&self) -> usize {
        self.buckets.values().map(|c| c.detected).sum()
    }

    pub fn total_positives(&self) -> usize {
        self.buckets.values().map(|c| c.total).sum()
    }
}

pub fn analyze_se_de(corpus: &[Conversation], probs: &[Vec<f64>]) -> Result<SeDeReport> {
    if corpus.len() != probs.len() {
        return Err(Error::Dimension { expected: corpus.len(), found: probs.len() });
    }
    let mut report = SeDeReport::default();
    for (conv, p) in corpus.iter().zip(probs) {
        let pairs = enumerate_pairs(conv);
        if pairs.len() != p.len() {
            return Err(Error::Dimension { expected: pairs.len(), found: p.len() });
        }
        for (pair, prob) in pairs.iter().zip(p) {
            if !pair.label {
                continue;
            }
            let target = conv.utterances()[pair.target_index - 1].emotion;
            let source = conv.utterances()[pair.source_index - 1].emotion;
            let kind = if target == source { PairKind::SameEmotion } else { PairKind::DifferentEmotion };
            let c = report.buckets.entry((target, kind)).or_default();
            c.total += 1;
            if *prob > THRESHOLD {
                c.detected += 1;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::test_support::conv;
    use crate::corpus::EmotionLabel::*;
    use alloc::vec;

    #[test]
    fn hand_confusion() {
        let c = Confusion { tp: 2, fp: 1, fn_: 1, tn: 6 };
        assert!((c.pos_f1() - 2.0 / 3.0).abs() < 1e-15);
        // Negative class: tp=6, fp=1, fn=1.
        assert!((c.neg_f1() - 12.0 / 14.0).abs() < 1e-15);
        let r = c.report();
        assert_eq!(r.macro_f1, (r.neg_f1 + r.pos_f1) / 2.0);
    }

    #[test]
    fn perfect_and_degenerate_predictors() {
        let c = conv(&["A", "B", "A"], &[Neutral, Sadness, Sadness], &[(3, 2), (2, 2)]);
        let labels: Vec<f64> = enumerate_pairs(&c).iter().map(|p| if p.label { 0.9 } else { 0.1 }).collect();
        let r = evaluate_predictions(core::slice::from_ref(&c), &[labels]).unwrap();
        assert_eq!((r.neg_f1, r.pos_f1, r.macro_f1), (1.0, 1.0, 1.0));
        let r = evaluate_predictions(core::slice::from_ref(&c), &[vec![0.0; 6]]).unwrap();
        assert_eq!(r.pos_f1, 0.0);
        assert!(r.neg_f1 > 0.0);
    }

    #[test]
    fn threshold_is_strict() {
        let c = conv(&["A"], &[Anger], &[(1, 1)]);
        let r = evaluate_predictions(core::slice::from_ref(&c), &[vec![0.5]]).unwrap();
        assert_eq!(r.confusion.fn_, 1);
    }

    #[test]
    fn mismatched_lengths() {
        let c = conv(&["A", "B"], &[Neutral, Anger], &[]);
        assert!(evaluate_predictions(core::slice::from_ref(&c), &[vec![0.1]]).is_err());
        assert!(evaluate_predictions(core::slice::from_ref(&c), &[]).is_err());
    }

    #[test]
    fn se_de_buckets() {
        // Three different-emotion sadness positives, two detected.
        let c = conv(&["A", "B", "A", "B"], &[Anger, Happiness, Fear, Sadness], &[(4, 1), (4, 2), (4, 3), (3, 3)]);
        let mut probs = vec![0.0; 10];
        let idx = |i: usize, j: usize| i * (i - 1) / 2 + j - 1;
        probs[idx(4, 1)] = 0.9;
        probs[idx(4, 3)] = 0.8;
        let r = analyze_se_de(core::slice::from_ref(&c), &[probs]).unwrap();
        let de = r.counts(Sadness, PairKind::DifferentEmotion);
        assert_eq!((de.total, de.detected), (3, 2));
        assert!((de.recall().unwrap() - 0.667).abs() < 1e-3);
        assert_eq!(r.recall(Fear, PairKind::SameEmotion), Some(0.0));
        assert_eq!(r.recall(Sadness, PairKind::SameEmotion), None);
        assert_eq!(r.total_positives(), 4);
        assert_eq!(r.total_detected(), 2);
    }

    #[test]
    fn only_same_emotion_positives() {
        let c = conv(&["A", "B"], &[Anger, Anger], &[(2, 1), (2, 2)]);
        let r = analyze_se_de(core::slice::from_ref(&c), &[vec![0.9; 3]]).unwrap();
        for e in EmotionLabel::ALL {
            assert_eq!(r.recall(e, PairKind::DifferentEmotion), None);
        }
        assert_eq!(r.recall(Anger, PairKind::SameEmotion), Some(1.0));
    }

    #[test]
    fn mean_and_std() {
        let m = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!((m.mean, m.std), (2.0, 1.0));
        assert_eq!(mean_std(&[4.0]).std, 0.0);
    }
}
