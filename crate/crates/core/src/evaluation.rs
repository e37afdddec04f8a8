//! Correctness labelling and dataset-level detection metrics.
//!
//! Every method is oriented so that a larger value means more confident
//! before AUROC or PCC is computed: uncertainty-like scores (perplexity,
//! LN-entropy) are negated.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ItemScores;
use crate::rouge::{rouge_l_max_beta, RougeError};

/// Default correctness threshold on Rouge-L against gold.
pub const DEFAULT_ROUGE_THRESHOLD: f64 = 0.7;

/// Default correctness thresholds for the sweep.
pub const DEFAULT_SWEEP_THRESHOLDS: [f64; 3] = [0.5, 0.7, 0.9];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("only one correctness class present at threshold {0}")]
    SingleClass(f64),
    #[error("labels hold a single class")]
    SingleClassLabels,
    #[error("zero variance")]
    ZeroVariance,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations")]
    TooFewObservations,
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error(transparent)]
    Rouge(#[from] RougeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// larger score means more confident
    Confidence,
    /// larger score means less confident
    Uncertainty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cleanse,
    CosineScore,
    LexicalSimilarity,
    Perplexity,
    LnEntropy,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Perplexity,
        Method::LnEntropy,
        Method::LexicalSimilarity,
        Method::CosineScore,
        Method::Cleanse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cleanse => "cleanse",
            Method::CosineScore => "cosine_score",
            Method::LexicalSimilarity => "lexical_similarity",
            Method::Perplexity => "perplexity",
            Method::LnEntropy => "ln_entropy",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Method::Cleanse => "Cleanse Score",
            Method::CosineScore => "Cosine Score",
            Method::LexicalSimilarity => "Lexical Similarity",
            Method::Perplexity => "Perplexity",
            Method::LnEntropy => "LN-Entropy",
        }
    }

    pub fn polarity(self) -> Polarity {
        match self {
            Method::Perplexity | Method::LnEntropy => Polarity::Uncertainty,
            _ => Polarity::Confidence,
        }
    }

    /// Raw score for this method, if the item was scored for it.
    pub fn raw(self, scores: &ItemScores) -> Option<f64> {
        match self {
            Method::Cleanse => scores.cleanse,
            Method::CosineScore => scores.cosine_score,
            Method::LexicalSimilarity => scores.lexical_similarity,
            Method::Perplexity => scores.perplexity,
            Method::LnEntropy => scores.ln_entropy,
        }
    }

    /// Score oriented so that larger means more confident.
    pub fn confidence(self, scores: &ItemScores) -> Option<f64> {
        self.raw(scores).map(|v| match self.polarity() {
            Polarity::Confidence => v,
            Polarity::Uncertainty => -v,
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| EvalError::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correctness {
    pub rouge: f64,
    pub correct: bool,
}

/// Labels a generation correct when its best Rouge-L against the gold
/// answers is strictly above `threshold`.
pub fn correctness_label(
    most_likely_text: &str,
    golds: &[String],
    threshold: f64,
    beta: f64,
) -> Result<Correctness, EvalError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(EvalError::InvalidThreshold(threshold));
    }
    let rouge = rouge_l_max_beta(most_likely_text, golds, beta)?;
    Ok(Correctness {
        rouge,
        correct: rouge > threshold,
    })
}

fn check_finite(values: &[f64]) -> Result<(), EvalError> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(&v) => Err(EvalError::NonFinite(v)),
        None => Ok(()),
    }
}

/// Area under the ROC curve by the Mann–Whitney pair count, ties counted
/// as half a win. `labels[i]` is true for a correct item.
pub fn auroc(confidences: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    if confidences.len() != labels.len() {
        return Err(EvalError::LengthMismatch(confidences.len(), labels.len()));
    }
    check_finite(confidences)?;
    let n_pos = labels.iter().filter(|&&l| l).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClassLabels);
    }
    let mut order: Vec<usize> = (0..confidences.len()).collect();
    order.sort_by(|&a, &b| confidences[a].total_cmp(&confidences[b]));

    // twice the number of wins, so ties stay integral
    let mut doubled_wins: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let value = confidences[order[start]];
        let mut end = start;
        let (mut pos, mut neg) = (0u128, 0u128);
        while end < order.len() && confidences[order[end]] == value {
            if labels[order[end]] {
                pos += 1;
            } else {
                neg += 1;
            }
            end += 1;
        }
        doubled_wins += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        start = end;
    }
    Ok(doubled_wins as f64 / (2 * n_pos * n_neg) as f64)
}

/// Pearson correlation coefficient.
pub fn pcc(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(EvalError::TooFewObservations);
    }
    check_finite(x)?;
    check_finite(y)?;
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if constant(x) || constant(y) {
        return Err(EvalError::ZeroVariance);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Dataset-level result for one method at one correctness threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub method: Method,
    /// `None` when the scored subset holds a single correctness class.
    pub auroc: Option<f64>,
    /// `None` when either series has zero variance.
    pub pcc: Option<f64>,
    pub n_items: usize,
    pub n_correct: usize,
    pub n_excluded: usize,
    pub threshold: f64,
}

fn labels_at(scores: &[ItemScores], threshold: f64) -> Result<Vec<bool>, EvalError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(EvalError::InvalidThreshold(threshold));
    }
    let labels: Vec<bool> = scores.iter().map(|s| s.rouge_vs_gold > threshold).collect();
    let n_correct = labels.iter().filter(|&&l| l).count();
    if n_correct == 0 || n_correct == labels.len() {
        return Err(EvalError::SingleClass(threshold));
    }
    Ok(labels)
}

fn summarize(scores: &[ItemScores], labels: &[bool], method: Method, threshold: f64) -> Result<EvalSummary, EvalError> {
    let mut conf = Vec::new();
    let mut lab = Vec::new();
    let mut rouge = Vec::new();
    for (s, &l) in scores.iter().zip(labels) {
        if let Some(c) = method.confidence(s) {
            conf.push(c);
            lab.push(l);
            rouge.push(s.rouge_vs_gold);
        }
    }
    let n_excluded = scores.len() - conf.len();
    if n_excluded > 0 {
        log::info!("{method}: {n_excluded} unscored items excluded");
    }
    let auroc = match auroc(&conf, &lab) {
        Ok(a) => Some(a),
        Err(EvalError::SingleClassLabels) => None,
        Err(e) => return Err(e),
    };
    let pcc = match pcc(&rouge, &conf) {
        Ok(p) => Some(p),
        Err(EvalError::ZeroVariance | EvalError::TooFewObservations) => None,
        Err(e) => return Err(e),
    };
    Ok(EvalSummary {
        method,
        auroc,
        pcc,
        n_items: conf.len(),
        n_correct: lab.iter().filter(|&&l| l).count(),
        n_excluded,
        threshold,
    })
}

/// Relabels correctness at `threshold` and summarizes each method.
///
/// Correctness is recomputed from each record's `rouge_vs_gold`, so one
/// scores file serves any threshold.
pub fn evaluate(scores: &[ItemScores], methods: &[Method], threshold: f64) -> Result<Vec<EvalSummary>, EvalError> {
    let labels = labels_at(scores, threshold)?;
    methods
        .iter()
        .map(|&m| summarize(scores, &labels, m, threshold))
        .collect()
}

/// AUROC per (threshold, method). A threshold leaving one class empty
/// yields an empty row and the error alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub thresholds: Vec<f64>,
    pub methods: Vec<Method>,
    /// `cells[t][m]`
    pub cells: Vec<Vec<Option<f64>>>,
    pub errors: Vec<Option<String>>,
}

impl SweepTable {
    pub fn cell(&self, threshold_idx: usize, method: Method) -> Option<f64> {
        let m = self.methods.iter().position(|&x| x == method)?;
        self.cells[threshold_idx][m]
    }

    /// AUROC of `target` minus AUROC of `baseline` at each threshold.
    pub fn difference_series(&self, target: Method, baseline: Method) -> Vec<Option<f64>> {
        (0..self.thresholds.len())
            .map(|t| Some(self.cell(t, target)? - self.cell(t, baseline)?))
            .collect()
    }
}

pub fn threshold_sweep(scores: &[ItemScores], methods: &[Method], thresholds: &[f64]) -> Result<SweepTable, EvalError> {
    if let Some(&bad) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(EvalError::InvalidThreshold(bad));
    }
    let mut cells = Vec::with_capacity(thresholds.len());
    let mut errors = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        match evaluate(scores, methods, t) {
            Ok(summaries) => {
                cells.push(summaries.iter().map(|s| s.auroc).collect());
                errors.push(None);
            }
            Err(e @ EvalError::SingleClass(_)) => {
                cells.push(vec![None; methods.len()]);
                errors.push(Some(e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(SweepTable {
        thresholds: thresholds.to_vec(),
        methods: methods.to_vec(),
        cells,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_auroc(c: &[f64], l: &[bool]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for i in 0..c.len() {
            for j in 0..c.len() {
                if l[i] && !l[j] {
                    pairs += 1.0;
                    if c[i] > c[j] {
                        wins += 1.0;
                    } else if c[i] == c[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    fn record(id: usize, rouge: f64, cleanse: Option<f64>, ppl: f64) -> ItemScores {
        let mut s = ItemScores::new(format!("q{id:03}"), rouge, rouge > 0.7);
        s.cleanse = cleanse;
        s.perplexity = Some(ppl);
        s
    }

    #[test]
    fn correctness_is_strict() {
        let gold = vec!["a b c d e f g h i j".to_string()];
        // 8 of 10 tokens: F = 0.8
        let c = correctness_label("a b c d e f g h", &gold, 0.7, 1.0).unwrap();
        assert!(c.correct && (c.rouge - 1.6 / 1.8).abs() < 1e-15);
        let exact = correctness_label("a b c d e f g", &gold, 0.7, 1.0).unwrap();
        // P = 1, R = 0.7: F = 1.4 / 1.7 > 0.7
        assert!(exact.correct);
        let seven = vec!["a b c d e f g x y z".to_string()];
        let c = correctness_label("a b c d e f g q r s", &seven, 0.7, 1.0).unwrap();
        assert!((c.rouge - 0.7).abs() < 1e-15);
        assert!(!c.correct);
        let empty = correctness_label("", &gold, 0.7, 1.0).unwrap();
        assert_eq!((empty.rouge, empty.correct), (0.0, false));
        assert!(matches!(
            correctness_label("x", &[], 0.7, 1.0),
            Err(EvalError::Rouge(_))
        ));
        assert!(matches!(
            correctness_label("x", &gold, 1.5, 1.0),
            Err(EvalError::InvalidThreshold(_))
        ));
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.8, 0.4, 0.6, 0.2], &[true, true, false, false]).unwrap(), 0.75);
        assert_eq!(auroc(&[0.1, 0.2], &[true, true]), Err(EvalError::SingleClassLabels));
        assert!(matches!(
            auroc(&[f64::NAN, 0.2], &[true, false]),
            Err(EvalError::NonFinite(_))
        ));
    }

    #[test]
    fn pcc_examples() {
        assert!((pcc(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pcc(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((pcc(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(pcc(&[1.0, 1.0], &[1.0, 2.0]), Err(EvalError::ZeroVariance));
        assert_eq!(pcc(&[1.0], &[1.0]), Err(EvalError::TooFewObservations));
    }

    #[test]
    fn method_orientation() {
        let s = record(0, 0.9, Some(0.4), 3.0);
        assert_eq!(Method::Cleanse.confidence(&s), Some(0.4));
        assert_eq!(Method::Perplexity.confidence(&s), Some(-3.0));
        assert_eq!("ln_entropy".parse::<Method>().unwrap(), Method::LnEntropy);
        assert!("entropy".parse::<Method>().is_err());
    }

    #[test]
    fn evaluate_separating_and_constant() {
        let scores: Vec<_> = (0..10)
            .map(|i| {
                let correct = i % 2 == 0;
                record(
                    i,
                    if correct { 0.9 } else { 0.2 },
                    Some(if correct { 0.95 } else { 0.4 }),
                    2.0,
                )
            })
            .collect();
        let out = evaluate(&scores, &[Method::Cleanse, Method::Perplexity], 0.7).unwrap();
        assert_eq!(out[0].auroc, Some(1.0));
        assert!((out[0].pcc.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(out[1].auroc, Some(0.5));
        assert_eq!(out[1].pcc, None);
        assert_eq!((out[0].n_items, out[0].n_correct), (10, 5));
    }

    #[test]
    fn evaluate_excludes_unscored() {
        let mut scores: Vec<_> = (0..6)
            .map(|i| record(i, if i < 3 { 1.0 } else { 0.0 }, Some(i as f64), 1.0))
            .collect();
        scores[0].cleanse = None;
        let out = evaluate(&scores, &[Method::Cleanse], 0.7).unwrap();
        assert_eq!(out[0].n_excluded, 1);
        assert_eq!(out[0].n_items, 5);
        assert_eq!(out[0].auroc, Some(0.0));
    }

    #[test]
    fn evaluate_single_class() {
        let scores: Vec<_> = (0..4).map(|i| record(i, 1.0, Some(0.5), 1.0)).collect();
        assert_eq!(
            evaluate(&scores, &[Method::Cleanse], 0.7),
            Err(EvalError::SingleClass(0.7))
        );
        let t = threshold_sweep(&scores, &[Method::Cleanse], &DEFAULT_SWEEP_THRESHOLDS).unwrap();
        assert!(t.cells.iter().all(|row| row.iter().all(Option::is_none)));
        assert!(t.errors.iter().all(Option::is_some));
    }

    #[test]
    fn sweep_cells_match_evaluate() {
        let scores: Vec<_> = (0..40)
            .map(|i| {
                let r = (i as f64 * 0.37) % 1.0;
                record(i, r, Some((i as f64 * 0.61) % 1.0), 1.0 + (i % 7) as f64)
            })
            .collect();
        let methods = [Method::Cleanse, Method::Perplexity];
        let table = threshold_sweep(&scores, &methods, &[0.5, 0.9]).unwrap();
        for (t_idx, &t) in [0.5, 0.9].iter().enumerate() {
            let direct = evaluate(&scores, &methods, t).unwrap();
            for (m_idx, s) in direct.iter().enumerate() {
                assert_eq!(table.cells[t_idx][m_idx], s.auroc);
            }
        }
        let diff = table.difference_series(Method::Cleanse, Method::Perplexity);
        assert_eq!(diff[0], Some(table.cells[0][0].unwrap() - table.cells[0][1].unwrap()));
        assert!(threshold_sweep(&scores, &methods, &[1.2]).is_err());
    }

    proptest! {
        #[test]
        fn auroc_matches_pair_count(pairs in prop::collection::vec((0u8..6, any::<bool>()), 2..60)) {
            let c: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 5.0).collect();
            let l: Vec<bool> = pairs.iter().map(|p| p.1).collect();
            prop_assume!(l.iter().any(|&x| x) && l.iter().any(|&x| !x));
            prop_assert!((auroc(&c, &l).unwrap() - brute_auroc(&c, &l)).abs() < 1e-12);
        }

        #[test]
        fn auroc_monotone_invariance(c in prop::collection::vec(-5.0f64..5.0, 4..40), seed in any::<u64>()) {
            let l: Vec<bool> = (0..c.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
            prop_assume!(l.iter().any(|&x| x) && l.iter().any(|&x| !x));
            let a = auroc(&c, &l).unwrap();
            let t: Vec<f64> = c.iter().map(|x| x.exp() * 3.0 + 1.0).collect();
            prop_assert!((a - auroc(&t, &l).unwrap()).abs() < 1e-12);
            let neg: Vec<f64> = c.iter().map(|x| -x).collect();
            let mut dedup = c.clone();
            dedup.sort_by(f64::total_cmp);
            dedup.dedup();
            if dedup.len() == c.len() {
                prop_assert!((a + auroc(&neg, &l).unwrap() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn pcc_affine_invariance(xy in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40), a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let x: Vec<f64> = xy.iter().map(|p| p.0).collect();
            let y: Vec<f64> = xy.iter().map(|p| p.1).collect();
            if let Ok(r) = pcc(&x, &y) {
                let x2: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                prop_assert!((r - pcc(&x2, &y).unwrap()).abs() < 1e-9);
                prop_assert!((pcc(&x, &x).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }
}
