//! Domain types and the line-delimited record formats shared by every stage.
//!
//! A dataset file holds one [`QAItem`] per line:
//!
//! ```text
//! {"id":"q1","question":"...","gold_answers":["..."],
//!  "most_likely":{"text":"...","token_logprobs":[-0.1],"embedding":[0.3,0.7]},
//!  "samples":[{...}, {...}]}
//! ```
//!
//! An entailment oracle file holds one [`EntailmentRecord`] per line:
//!
//! ```text
//! {"item_id":"q1","i":0,"j":1,"forward":"entailment","backward":"neutral"}
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("embedding dimension mismatch in item {0}")]
    DimensionMismatch(String),
    #[error("duplicate item id {0}")]
    DuplicateId(String),
    #[error("item {0} has fewer than 2 samples")]
    TooFewSamples(String),
    #[error("unknown entailment label {0:?}")]
    UnknownLabel(String),
}

/// One generated answer: its text, per-token natural-log probabilities, and
/// the hidden-state embedding of its final token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSample {
    pub text: String,
    pub token_logprobs: Vec<f64>,
    pub embedding: Vec<f64>,
}

impl GenerationSample {
    pub fn new(text: impl Into<String>, token_logprobs: Vec<f64>, embedding: Vec<f64>) -> Self {
        Self {
            text: text.into(),
            token_logprobs,
            embedding,
        }
    }

    fn check(&self, dim: usize) -> Result<(), String> {
        if self.embedding.len() != dim {
            return Err(format!(
                "embedding has dimension {} but dataset dimension is {dim}",
                self.embedding.len()
            ));
        }
        if let Some(v) = self.embedding.iter().find(|v| !v.is_finite()) {
            return Err(format!("non-finite embedding value {v}"));
        }
        if let Some(lp) = self.token_logprobs.iter().find(|lp| !lp.is_finite() || **lp > 0.0) {
            return Err(format!("token logprob {lp} is not a finite value <= 0"));
        }
        if !self.text.is_empty() && self.token_logprobs.is_empty() {
            return Err("non-empty text without token logprobs".to_string());
        }
        Ok(())
    }
}

/// A question, its gold answers, the greedy answer judged for correctness,
/// and the K sampled answers used for consistency scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAItem {
    pub id: String,
    pub question: String,
    pub gold_answers: Vec<String>,
    pub most_likely: GenerationSample,
    pub samples: Vec<GenerationSample>,
}

impl QAItem {
    pub fn k(&self) -> usize {
        self.samples.len()
    }

    pub fn dim(&self) -> usize {
        self.most_likely.embedding.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntailmentLabel {
    Entailment,
    Neutral,
    Contradiction,
}

impl EntailmentLabel {
    pub const ALL: [EntailmentLabel; 3] = [
        EntailmentLabel::Entailment,
        EntailmentLabel::Neutral,
        EntailmentLabel::Contradiction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntailmentLabel::Entailment => "entailment",
            EntailmentLabel::Neutral => "neutral",
            EntailmentLabel::Contradiction => "contradiction",
        }
    }
}

impl fmt::Display for EntailmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntailmentLabel {
    type Err = RecordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entailment" => Ok(EntailmentLabel::Entailment),
            "neutral" => Ok(EntailmentLabel::Neutral),
            "contradiction" => Ok(EntailmentLabel::Contradiction),
            other => Err(RecordError::UnknownLabel(other.to_string())),
        }
    }
}

/// Directed NLI labels for an ordered pair of samples of one item.
///
/// `forward` is the label with sample `i` as premise and sample `j` as
/// hypothesis; `backward` is the reverse direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntailmentRecord {
    pub item_id: String,
    pub i: usize,
    pub j: usize,
    pub forward: EntailmentLabel,
    pub backward: EntailmentLabel,
}

impl EntailmentRecord {
    pub fn swapped(&self) -> Self {
        Self {
            item_id: self.item_id.clone(),
            i: self.j,
            j: self.i,
            forward: self.backward,
            backward: self.forward,
        }
    }
}

/// Cluster membership for the K samples of one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub item_id: String,
    pub assignment: Vec<usize>,
    pub num_clusters: usize,
    pub cluster_sizes: Vec<usize>,
}

impl ClusterAssignment {
    /// Builds an assignment from raw labels, relabelling clusters densely in
    /// order of first appearance so that sample 0 is always in cluster 0.
    pub fn from_labels(item_id: impl Into<String>, labels: &[usize]) -> Self {
        let mut remap: HashMap<usize, usize> = HashMap::new();
        let mut assignment = Vec::with_capacity(labels.len());
        let mut cluster_sizes = Vec::new();
        for &label in labels {
            let next = remap.len();
            let id = *remap.entry(label).or_insert(next);
            if id == cluster_sizes.len() {
                cluster_sizes.push(0);
            }
            cluster_sizes[id] += 1;
            assignment.push(id);
        }
        Self {
            item_id: item_id.into(),
            assignment,
            num_clusters: cluster_sizes.len(),
            cluster_sizes,
        }
    }

    pub fn k(&self) -> usize {
        self.assignment.len()
    }

    pub fn singletons(item_id: impl Into<String>, k: usize) -> Self {
        Self::from_labels(item_id, &(0..k).collect::<Vec<_>>())
    }

    pub fn single_cluster(item_id: impl Into<String>, k: usize) -> Self {
        Self::from_labels(item_id, &vec![0; k])
    }

    /// Checks the dense creation-order labelling and the size bookkeeping.
    pub fn is_valid(&self) -> bool {
        let mut seen = 0usize;
        let mut sizes = vec![0usize; self.num_clusters];
        for &c in &self.assignment {
            if c > seen || c >= self.num_clusters {
                return false;
            }
            if c == seen {
                seen += 1;
            }
            sizes[c] += 1;
        }
        seen == self.num_clusters && sizes == self.cluster_sizes && sizes.iter().all(|&n| n >= 1)
    }
}

/// Per-item scores as written to the scores file. A method that could not
/// be computed for the item is `None`, and the reason is appended to `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScores {
    pub item_id: String,
    pub cleanse: Option<f64>,
    pub cosine_score: Option<f64>,
    pub lexical_similarity: Option<f64>,
    pub perplexity: Option<f64>,
    pub ln_entropy: Option<f64>,
    pub rouge_vs_gold: f64,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_clusters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ItemScores {
    pub fn new(item_id: impl Into<String>, rouge_vs_gold: f64, correct: bool) -> Self {
        Self {
            item_id: item_id.into(),
            cleanse: None,
            cosine_score: None,
            lexical_similarity: None,
            perplexity: None,
            ln_entropy: None,
            rouge_vs_gold,
            correct,
            num_clusters: None,
            error: None,
        }
    }

    pub fn push_error(&mut self, message: impl AsRef<str>) {
        match &mut self.error {
            Some(e) => {
                e.push_str("; ");
                e.push_str(message.as_ref());
            }
            None => self.error = Some(message.as_ref().to_string()),
        }
    }
}

/// Reads a scores file written by [`write_jsonl`].
pub fn parse_scores(path: impl AsRef<Path>) -> Result<Vec<ItemScores>, RecordError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (line_no, line) in read_lines(path)? {
        let line = line.map_err(|source| RecordError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| RecordError::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

fn read_lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>, RecordError> {
    let file = File::open(path).map_err(|source| RecordError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(idx, line)| (idx + 1, line)))
}

/// Validates parsed items in file order. The dataset dimension is
/// `expected_dim` when given, else the first item's dimension.
pub fn validate_items(items: &[QAItem], expected_dim: Option<usize>) -> Result<(), RecordError> {
    let mut dim = expected_dim;
    let mut ids = HashSet::new();
    for (idx, item) in items.iter().enumerate() {
        validate_item(item, idx + 1, &mut dim)?;
        if !ids.insert(item.id.as_str()) {
            return Err(RecordError::DuplicateId(item.id.clone()));
        }
    }
    Ok(())
}

fn validate_item(item: &QAItem, line: usize, dim: &mut Option<usize>) -> Result<(), RecordError> {
    let malformed = |reason: String| RecordError::MalformedRecord { line, reason };
    if item.gold_answers.is_empty() {
        return Err(malformed(format!("item {} has no gold answers", item.id)));
    }
    if item.samples.len() < 2 {
        return Err(RecordError::TooFewSamples(item.id.clone()));
    }
    let d = *dim.get_or_insert(item.most_likely.embedding.len());
    if d == 0 {
        return Err(malformed("embedding dimension must be at least 1".to_string()));
    }
    for sample in std::iter::once(&item.most_likely).chain(&item.samples) {
        if sample.embedding.len() != d {
            return Err(RecordError::DimensionMismatch(item.id.clone()));
        }
        sample
            .check(d)
            .map_err(|reason| malformed(format!("item {}: {reason}", item.id)))?;
    }
    Ok(())
}

/// Parses and validates a line-delimited dataset file. Blank lines are skipped.
pub fn parse_dataset(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<Vec<QAItem>, RecordError> {
    let path = path.as_ref();
    let mut items = Vec::new();
    let mut ids = HashSet::new();
    let mut dim = expected_dim;
    for (line_no, line) in read_lines(path)? {
        let line = line.map_err(|source| RecordError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let item: QAItem = serde_json::from_str(&line).map_err(|e| RecordError::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        validate_item(&item, line_no, &mut dim)?;
        if !ids.insert(item.id.clone()) {
            return Err(RecordError::DuplicateId(item.id));
        }
        items.push(item);
    }
    Ok(items)
}

#[derive(Deserialize)]
struct RawEntailmentRecord {
    item_id: String,
    i: usize,
    j: usize,
    forward: String,
    backward: String,
}

/// Entailment judgments keyed by `(item_id, i, j)`, queryable in either
/// direction. Each unordered pair is stored once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntailmentTable {
    records: HashMap<(String, usize, usize), EntailmentRecord>,
}

impl EntailmentTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a record, replacing any existing judgment for the same pair.
    pub fn insert(&mut self, record: EntailmentRecord) {
        let record = if record.i <= record.j { record } else { record.swapped() };
        self.records
            .insert((record.item_id.clone(), record.i, record.j), record);
    }

    /// Looks up the pair, swapping forward/backward when stored reversed.
    pub fn get(&self, item_id: &str, i: usize, j: usize) -> Option<EntailmentRecord> {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let rec = self.records.get(&(item_id.to_string(), lo, hi))?;
        Some(if rec.i == i { rec.clone() } else { rec.swapped() })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in canonical order (item id, then i, then j).
    pub fn records(&self) -> Vec<&EntailmentRecord> {
        let mut out: Vec<_> = self.records.values().collect();
        out.sort_by(|a, b| (&a.item_id, a.i, a.j).cmp(&(&b.item_id, b.i, b.j)));
        out
    }
}

impl FromIterator<EntailmentRecord> for EntailmentTable {
    fn from_iter<T: IntoIterator<Item = EntailmentRecord>>(iter: T) -> Self {
        let mut table = Self::new();
        for record in iter {
            table.insert(record);
        }
        table
    }
}

/// Parses a line-delimited entailment oracle file.
pub fn parse_entailment_oracle(path: impl AsRef<Path>) -> Result<EntailmentTable, RecordError> {
    let path = path.as_ref();
    let mut table = EntailmentTable::new();
    for (line_no, line) in read_lines(path)? {
        let line = line.map_err(|source| RecordError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawEntailmentRecord = serde_json::from_str(&line).map_err(|e| RecordError::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if raw.i == raw.j {
            return Err(RecordError::MalformedRecord {
                line: line_no,
                reason: format!("self-pair i = j = {}", raw.i),
            });
        }
        table.insert(EntailmentRecord {
            item_id: raw.item_id,
            i: raw.i,
            j: raw.j,
            forward: raw.forward.parse()?,
            backward: raw.backward.parse()?,
        });
    }
    Ok(table)
}

/// Writes any serializable records one JSON document per line.
pub fn write_jsonl<T: Serialize>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = T>,
) -> Result<(), RecordError> {
    let path = path.as_ref();
    let io_err = |source| RecordError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    for record in records {
        let line = serde_json::to_string(&record).expect("records serialize to JSON");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn write_dataset(path: impl AsRef<Path>, items: &[QAItem]) -> Result<(), RecordError> {
    write_jsonl(path, items)
}

pub fn write_entailment_oracle(path: impl AsRef<Path>, table: &EntailmentTable) -> Result<(), RecordError> {
    write_jsonl(path, table.records())
}
