//! End-to-end runs: score a dataset, summarize scores, sweep thresholds,
//! and compare clusterers. Every function here is deterministic in its
//! inputs; output records are sorted by item id whatever the worker count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{cluster_item, cluster_stats, ClusterError};
use crate::evaluation::{
    auroc, correctness_label, evaluate, threshold_sweep, EvalError, EvalSummary, Method, SweepTable,
    DEFAULT_ROUGE_THRESHOLD, DEFAULT_SWEEP_THRESHOLDS,
};
use crate::model::{ClusterAssignment, ItemScores, QAItem, RecordError};
use crate::nli::{EntailmentOracle, FileOracle, HttpOracle, HttpOracleConfig};
use crate::scoring::{cleanse_score, cosine_score, lexical_similarity, ln_entropy, perplexity, similarity_matrix};
use crate::synth::SynthError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit code: 2 when evaluation is undefined, else 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Eval(EvalError::SingleClass(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleSource {
    File(PathBuf),
    Http(String),
}

impl OracleSource {
    pub fn open(&self) -> Result<Box<dyn EntailmentOracle>, PipelineError> {
        Ok(match self {
            OracleSource::File(path) => Box::new(FileOracle::from_path(path)?),
            OracleSource::Http(url) => Box::new(HttpOracle::new(HttpOracleConfig::new(url.clone()))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset_path: Option<PathBuf>,
    pub oracle: Option<OracleSource>,
    pub rouge_threshold: f64,
    pub rouge_beta: f64,
    pub thresholds: Vec<f64>,
    pub methods: Vec<Method>,
    pub parallelism: usize,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_path: None,
            oracle: None,
            rouge_threshold: DEFAULT_ROUGE_THRESHOLD,
            rouge_beta: 1.0,
            thresholds: DEFAULT_SWEEP_THRESHOLDS.to_vec(),
            methods: Method::ALL.to_vec(),
            parallelism: 1,
            output_dir: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Resolves the oracle from an oracle path, an explicit URL, or the
    /// environment fallback. Exactly one source must result.
    pub fn resolve_oracle(
        oracle_path: Option<PathBuf>,
        nli_url: Option<String>,
        env_url: Option<String>,
    ) -> Result<Option<OracleSource>, PipelineError> {
        match (oracle_path, nli_url) {
            (Some(_), Some(_)) => Err(PipelineError::Config(
                "--oracle and --nli-url are mutually exclusive".to_string(),
            )),
            (Some(p), None) => Ok(Some(OracleSource::File(p))),
            (None, Some(u)) => Ok(Some(OracleSource::Http(u))),
            (None, None) => Ok(env_url.filter(|u| !u.is_empty()).map(OracleSource::Http)),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(0.0..=1.0).contains(&self.rouge_threshold) {
            return bad(format!("rouge threshold {} outside [0, 1]", self.rouge_threshold));
        }
        if !(self.rouge_beta.is_finite() && self.rouge_beta > 0.0) {
            return bad(format!("rouge beta {} must be positive", self.rouge_beta));
        }
        if let Some(t) = self.thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return bad(format!("sweep threshold {t} outside [0, 1]"));
        }
        if self.methods.is_empty() {
            return bad("no methods selected".to_string());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".to_string());
        }
        Ok(())
    }

    pub fn score_options(&self) -> ScoreOptions {
        ScoreOptions {
            methods: self.methods.clone(),
            rouge_threshold: self.rouge_threshold,
            rouge_beta: self.rouge_beta,
        }
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>, PipelineError> {
    let mut out = Vec::new();
    for name in list.split(',').filter(|s| !s.trim().is_empty()) {
        let m: Method = name.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

pub fn parse_thresholds(list: &str) -> Result<Vec<f64>, PipelineError> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| PipelineError::Config(format!("bad threshold {s:?}: {e}")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOptions {
    pub methods: Vec<Method>,
    pub rouge_threshold: f64,
    pub rouge_beta: f64,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        RunConfig::default().score_options()
    }
}

fn pool(parallelism: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))
}

/// Scores one item. Failures of individual methods leave that score empty
/// and are described in the record's `error` field.
pub fn score_item<O: EntailmentOracle + ?Sized>(item: &QAItem, oracle: &O, opts: &ScoreOptions) -> ItemScores {
    let (rouge, correct, label_err) = match correctness_label(
        &item.most_likely.text,
        &item.gold_answers,
        opts.rouge_threshold,
        opts.rouge_beta,
    ) {
        Ok(c) => (c.rouge, c.correct, None),
        Err(e) => (0.0, false, Some(e)),
    };
    let mut out = ItemScores::new(item.id.clone(), rouge, correct);
    if let Some(e) = label_err {
        out.push_error(format!("correctness: {e}"));
    }
    let wants = |m: Method| opts.methods.contains(&m);

    let sim = if wants(Method::Cleanse) || wants(Method::CosineScore) {
        match similarity_matrix(&item.samples) {
            Ok(s) => Some(s),
            Err(e) => {
                out.push_error(format!("similarity: {}: {e}", e.kind()));
                None
            }
        }
    } else {
        None
    };

    if wants(Method::Cleanse) {
        match cluster_item(item, oracle) {
            Ok(clusters) => {
                out.num_clusters = Some(clusters.num_clusters);
                if let Some(sim) = &sim {
                    match cleanse_score(sim, &clusters) {
                        Ok(v) => out.cleanse = Some(v),
                        Err(e) => out.push_error(format!("cleanse: {}: {e}", e.kind())),
                    }
                }
            }
            Err(ClusterError::Oracle { source, .. }) => out.push_error(format!("cleanse: {}: {source}", source.kind())),
            Err(e) => out.push_error(format!("cleanse: {e}")),
        }
    }
    if wants(Method::CosineScore) {
        if let Some(sim) = &sim {
            match cosine_score(sim) {
                Ok(v) => out.cosine_score = Some(v),
                Err(e) => out.push_error(format!("cosine_score: {}: {e}", e.kind())),
            }
        }
    }
    if wants(Method::LexicalSimilarity) {
        match lexical_similarity(&item.samples, opts.rouge_beta) {
            Ok(v) => out.lexical_similarity = Some(v),
            Err(e) => out.push_error(format!("lexical_similarity: {}: {e}", e.kind())),
        }
    }
    if wants(Method::Perplexity) {
        match perplexity(&item.most_likely) {
            Ok(v) => out.perplexity = Some(v),
            Err(e) => out.push_error(format!("perplexity: {}: {e}", e.kind())),
        }
    }
    if wants(Method::LnEntropy) {
        match ln_entropy(&item.samples) {
            Ok(v) => out.ln_entropy = Some(v),
            Err(e) => out.push_error(format!("ln_entropy: {}: {e}", e.kind())),
        }
    }
    out
}

/// Scores every item on a pool of `parallelism` workers.
pub fn score_dataset<O: EntailmentOracle + ?Sized>(
    items: &[QAItem],
    oracle: &O,
    opts: &ScoreOptions,
    parallelism: usize,
) -> Result<Vec<ItemScores>, PipelineError> {
    let mut scores: Vec<ItemScores> =
        pool(parallelism)?.install(|| items.par_iter().map(|it| score_item(it, oracle, opts)).collect());
    scores.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    Ok(scores)
}

/// One line of the `cluster` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub item_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_clusters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn cluster_dataset<O: EntailmentOracle + ?Sized>(
    items: &[QAItem],
    oracle: &O,
    parallelism: usize,
) -> Result<Vec<ClusterRecord>, PipelineError> {
    let mut records: Vec<ClusterRecord> = pool(parallelism)?.install(|| {
        items
            .par_iter()
            .map(|item| match cluster_item(item, oracle) {
                Ok(a) => ClusterRecord {
                    item_id: a.item_id,
                    assignment: Some(a.assignment),
                    num_clusters: Some(a.num_clusters),
                    error: None,
                },
                Err(e) => ClusterRecord {
                    item_id: item.id.clone(),
                    assignment: None,
                    num_clusters: None,
                    error: Some(e.to_string()),
                },
            })
            .collect()
    });
    records.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    Ok(records)
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.1}", 100.0 * x))
        .unwrap_or_else(|| "-".to_string())
}

/// Machine-readable result of `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub threshold: f64,
    pub n_items: usize,
    pub n_correct: usize,
    pub summaries: Vec<EvalSummary>,
}

impl EvalReport {
    pub fn build(scores: &[ItemScores], methods: &[Method], threshold: f64) -> Result<Self, PipelineError> {
        if scores.is_empty() {
            return Err(PipelineError::Config("scores file holds no records".to_string()));
        }
        let summaries = evaluate(scores, methods, threshold)?;
        Ok(Self {
            threshold,
            n_items: scores.len(),
            n_correct: scores.iter().filter(|s| s.rouge_vs_gold > threshold).count(),
            summaries,
        })
    }

    /// Method × {AUC, PCC} table in percent with one decimal.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "items: {}  correct: {}  rouge-l threshold: {}",
            self.n_items, self.n_correct, self.threshold
        );
        let _ = writeln!(out, "{:<20} {:>6} {:>6} {:>9}", "Method", "AUC", "PCC", "excluded");
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{:<20} {:>6} {:>6} {:>9}",
                s.method.display_name(),
                pct(s.auroc),
                pct(s.pcc),
                s.n_excluded
            );
        }
        out
    }
}

/// Result of `sweep`: the AUROC grid plus Cleanse-minus-baseline series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub table: SweepTable,
    pub differences: Vec<DifferenceSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceSeries {
    pub baseline: Method,
    /// Cleanse AUROC minus baseline AUROC per threshold
    pub values: Vec<Option<f64>>,
}

impl SweepReport {
    pub fn build(scores: &[ItemScores], methods: &[Method], thresholds: &[f64]) -> Result<Self, PipelineError> {
        if scores.is_empty() {
            return Err(PipelineError::Config("scores file holds no records".to_string()));
        }
        let table = threshold_sweep(scores, methods, thresholds)?;
        let differences = if methods.contains(&Method::Cleanse) {
            methods
                .iter()
                .filter(|&&m| m != Method::Cleanse)
                .map(|&baseline| DifferenceSeries {
                    baseline,
                    values: table.difference_series(Method::Cleanse, baseline),
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self { table, differences })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<34}", "Method \\ threshold");
        for t in &self.table.thresholds {
            let _ = write!(out, " {t:>6}");
        }
        out.push('\n');
        for (m_idx, m) in self.table.methods.iter().enumerate() {
            let _ = write!(out, "{:<34}", m.display_name());
            for row in &self.table.cells {
                let _ = write!(out, " {:>6}", pct(row[m_idx]));
            }
            out.push('\n');
        }
        for d in &self.differences {
            let _ = write!(out, "{:<34}", format!("Cleanse - {}", d.baseline.display_name()));
            for v in &d.values {
                let _ = write!(out, " {:>6}", pct(*v));
            }
            out.push('\n');
        }
        for (t, e) in self.table.thresholds.iter().zip(&self.table.errors) {
            if let Some(e) = e {
                let _ = writeln!(out, "threshold {t}: {e}");
            }
        }
        out
    }

    /// Long-format CSV for plotting: `threshold,method,auroc,cleanse_minus_method`.
    pub fn csv(&self) -> String {
        let mut out = String::from("threshold,method,auroc,cleanse_minus_method\n");
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (t_idx, t) in self.table.thresholds.iter().enumerate() {
            for (m_idx, m) in self.table.methods.iter().enumerate() {
                let diff = self
                    .differences
                    .iter()
                    .find(|d| d.baseline == *m)
                    .and_then(|d| d.values[t_idx]);
                let _ = writeln!(
                    out,
                    "{t},{},{},{}",
                    m.name(),
                    cell(self.table.cells[t_idx][m_idx]),
                    cell(diff)
                );
            }
        }
        out
    }
}

/// One row of the clusterer comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClustererRow {
    pub name: String,
    pub auroc: Option<f64>,
    pub mean_clusters_correct: Option<f64>,
    pub mean_clusters_incorrect: Option<f64>,
    pub gap: Option<f64>,
    pub n_scored: usize,
}

impl ClustererRow {
    /// `AUC (gap)` with AUC in percent.
    pub fn cell(&self) -> String {
        let gap = self.gap.map(|g| format!("{g:.2}")).unwrap_or_else(|| "-".to_string());
        format!("{} ({gap})", pct(self.auroc))
    }
}

/// Cleanse AUROC and cluster-count gap under each named oracle.
pub fn compare_clusterers(
    items: &[QAItem],
    oracles: &[(String, Box<dyn EntailmentOracle>)],
    threshold: f64,
    beta: f64,
    parallelism: usize,
) -> Result<Vec<ClustererRow>, PipelineError> {
    if oracles.len() < 2 {
        return Err(PipelineError::Config(
            "compare-clusterers needs at least two oracles".to_string(),
        ));
    }
    let labels: Vec<bool> = items
        .iter()
        .map(|it| correctness_label(&it.most_likely.text, &it.gold_answers, threshold, beta).map(|c| c.correct))
        .collect::<Result<_, _>>()?;
    let sims: Vec<_> = items.iter().map(|it| similarity_matrix(&it.samples).ok()).collect();
    let workers = pool(parallelism)?;
    oracles
        .iter()
        .map(|(name, oracle)| {
            let assignments: Vec<ClusterAssignment> = workers.install(|| {
                items
                    .par_iter()
                    .map(|it| cluster_item(it, oracle.as_ref()))
                    .collect::<Result<_, _>>()
            })?;
            let (mut conf, mut lab) = (Vec::new(), Vec::new());
            for ((a, sim), &l) in assignments.iter().zip(&sims).zip(&labels) {
                if let Some(c) = sim.as_ref().and_then(|s| cleanse_score(s, a).ok()) {
                    conf.push(c);
                    lab.push(l);
                }
            }
            let auc = match auroc(&conf, &lab) {
                Ok(a) => Some(a),
                Err(EvalError::SingleClassLabels) => None,
                Err(e) => return Err(e.into()),
            };
            let stats = match cluster_stats(&assignments, &labels) {
                Ok(s) => Some(s),
                Err(ClusterError::DegenerateSplit) => None,
                Err(e) => return Err(e.into()),
            };
            Ok(ClustererRow {
                name: name.clone(),
                auroc: auc,
                mean_clusters_correct: stats.map(|s| s.mean_clusters_correct),
                mean_clusters_incorrect: stats.map(|s| s.mean_clusters_incorrect),
                gap: stats.map(|s| s.gap),
                n_scored: conf.len(),
            })
        })
        .collect()
}

pub fn render_clusterers(rows: &[ClustererRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(9);
    let mut out = format!("{:<width$}  Cleanse AUC (gap)\n", "Clusterer");
    for r in rows {
        let _ = writeln!(out, "{:<width$}  {}", r.name, r.cell());
    }
    out
}

pub fn ensure_dir(dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize to JSON");
    text.push('\n');
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EntailmentLabel, GenerationSample};
    use crate::nli::ConstantOracle;

    fn item(id: &str, text: &str) -> QAItem {
        let s = |e: Vec<f64>| GenerationSample::new("a b", vec![-0.5, -0.5], e);
        QAItem {
            id: id.into(),
            question: "q?".into(),
            gold_answers: vec!["a b".into()],
            most_likely: GenerationSample::new(text, vec![-0.1; 2], vec![1.0, 0.0]),
            samples: vec![s(vec![1.0, 0.0]), s(vec![0.8, 0.6]), s(vec![0.6, 0.8])],
        }
    }

    #[test]
    fn scores_all_methods() {
        let s = score_item(
            &item("x", "a b"),
            &ConstantOracle(EntailmentLabel::Entailment),
            &ScoreOptions::default(),
        );
        assert_eq!(s.cleanse, Some(1.0));
        assert_eq!(s.num_clusters, Some(1));
        assert!((s.cosine_score.unwrap() - (0.8 + 0.6 + 0.96) / 3.0).abs() < 1e-12);
        assert_eq!(s.lexical_similarity, Some(1.0));
        assert!((s.perplexity.unwrap() - 0.1f64.exp()).abs() < 1e-12);
        assert!((s.ln_entropy.unwrap() - 0.5).abs() < 1e-12);
        assert!(s.correct && s.rouge_vs_gold == 1.0 && s.error.is_none());
    }

    #[test]
    fn method_subset_leaves_others_empty() {
        let opts = ScoreOptions {
            methods: vec![Method::Perplexity],
            ..ScoreOptions::default()
        };
        let s = score_item(&item("x", "a b"), &ConstantOracle(EntailmentLabel::Neutral), &opts);
        assert!(s.cleanse.is_none() && s.cosine_score.is_none() && s.num_clusters.is_none());
        assert!(s.perplexity.is_some());
    }

    #[test]
    fn dataset_output_sorted() {
        let items = vec![item("b", "a b"), item("a", "z"), item("c", "a")];
        let s = score_dataset(
            &items,
            &ConstantOracle(EntailmentLabel::Entailment),
            &ScoreOptions::default(),
            3,
        )
        .unwrap();
        let ids: Vec<_> = s.iter().map(|r| r.item_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn oracle_resolution() {
        assert!(RunConfig::resolve_oracle(Some("a".into()), Some("u".into()), None).is_err());
        assert_eq!(
            RunConfig::resolve_oracle(None, None, Some("http://x".into())).unwrap(),
            Some(OracleSource::Http("http://x".into()))
        );
        assert_eq!(
            RunConfig::resolve_oracle(Some("o.jsonl".into()), None, Some("http://x".into())).unwrap(),
            Some(OracleSource::File("o.jsonl".into()))
        );
        assert_eq!(RunConfig::resolve_oracle(None, None, None).unwrap(), None);
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig {
            rouge_threshold: 1.5,
            ..RunConfig::default()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            parallelism: 0,
            ..RunConfig::default()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            methods: vec![],
            ..RunConfig::default()
        }
        .validate()
        .is_err());
        assert_eq!(
            parse_methods("cleanse,perplexity,cleanse").unwrap(),
            vec![Method::Cleanse, Method::Perplexity]
        );
        assert!(parse_methods("cleanse,bogus").is_err());
        assert_eq!(parse_thresholds("0.5, 0.9").unwrap(), vec![0.5, 0.9]);
    }

    #[test]
    fn single_class_exit_code() {
        assert_eq!(PipelineError::Eval(EvalError::SingleClass(0.7)).exit_code(), 2);
        assert_eq!(PipelineError::Config("x".into()).exit_code(), 1);
    }

    #[test]
    fn clusterer_cell_format() {
        let row = ClustererRow {
            name: "a".into(),
            auroc: Some(0.817),
            mean_clusters_correct: Some(1.0),
            mean_clusters_incorrect: Some(3.78),
            gap: Some(2.78),
            n_scored: 10,
        };
        assert_eq!(row.cell(), "81.7 (2.78)");
    }
}
