//! Entailment judgments behind one interface.
//!
//! Two backends: [`FileOracle`] serves precomputed judgments from an
//! [`EntailmentTable`], and [`HttpOracle`] asks an external NLI service.
//! Premise and hypothesis are always the question joined to an answer by a
//! single space.

pub mod stub;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EntailmentLabel, EntailmentTable, QAItem};

/// Environment variable consulted for the NLI service base URL.
pub const NLI_URL_ENV: &str = "CLEANSE_NLI_URL";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NliError {
    #[error("missing judgment for item {item_id} pair ({i}, {j})")]
    MissingJudgment { item_id: String, i: usize, j: usize },
    #[error("sample index {index} out of range for item {item_id}")]
    IndexOutOfRange { item_id: String, index: usize },
    #[error("nli transport failure (status {status:?}): {body}")]
    Transport { status: Option<u16>, body: String },
    #[error("invalid nli verdict: {0}")]
    InvalidVerdict(String),
}

impl NliError {
    /// Short variant name used in per-item error fields.
    pub fn kind(&self) -> &'static str {
        match self {
            NliError::MissingJudgment { .. } => "MissingJudgment",
            NliError::IndexOutOfRange { .. } => "IndexOutOfRange",
            NliError::Transport { .. } => "Transport",
            NliError::InvalidVerdict(_) => "InvalidVerdict",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliQuery {
    pub premise: String,
    pub hypothesis: String,
}

impl NliQuery {
    /// Builds the directed query with sample `i` as premise and `j` as hypothesis.
    pub fn for_pair(item: &QAItem, i: usize, j: usize) -> Result<Self, NliError> {
        let text = |index: usize| {
            item.samples
                .get(index)
                .map(|s| join_question(&item.question, &s.text))
                .ok_or_else(|| NliError::IndexOutOfRange {
                    item_id: item.id.clone(),
                    index,
                })
        };
        Ok(Self {
            premise: text(i)?,
            hypothesis: text(j)?,
        })
    }
}

pub fn join_question(question: &str, answer: &str) -> String {
    format!("{question} {answer}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliVerdict {
    pub label: EntailmentLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<[f64; 3]>,
}

impl NliVerdict {
    pub fn label(label: EntailmentLabel) -> Self {
        Self { label, probs: None }
    }

    /// Verdict from class scores ordered (entailment, neutral, contradiction);
    /// the label is the argmax, first index winning ties.
    pub fn from_probs(probs: [f64; 3]) -> Self {
        let mut best = 0;
        for k in 1..3 {
            if probs[k] > probs[best] {
                best = k;
            }
        }
        Self {
            label: EntailmentLabel::ALL[best],
            probs: Some(probs),
        }
    }

    pub fn validate(&self) -> Result<(), NliError> {
        let Some(probs) = self.probs else {
            return Ok(());
        };
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(NliError::InvalidVerdict(format!(
                "probabilities out of [0,1]: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-3 {
            return Err(NliError::InvalidVerdict(format!("probabilities sum to {sum}")));
        }
        let argmax = NliVerdict::from_probs(probs).label;
        if probs[label_index(self.label)] < probs[label_index(argmax)] {
            return Err(NliError::InvalidVerdict(format!(
                "label {} is not the argmax of {probs:?}",
                self.label
            )));
        }
        Ok(())
    }

    pub fn is_entailment(&self) -> bool {
        self.label == EntailmentLabel::Entailment
    }
}

fn label_index(label: EntailmentLabel) -> usize {
    match label {
        EntailmentLabel::Entailment => 0,
        EntailmentLabel::Neutral => 1,
        EntailmentLabel::Contradiction => 2,
    }
}

/// A source of directed entailment judgments over an item's samples.
pub trait EntailmentOracle: Sync {
    /// Label for premise = sample `i`, hypothesis = sample `j`.
    fn judge(&self, item: &QAItem, i: usize, j: usize) -> Result<NliVerdict, NliError>;
}

impl<O: EntailmentOracle + ?Sized> EntailmentOracle for &O {
    fn judge(&self, item: &QAItem, i: usize, j: usize) -> Result<NliVerdict, NliError> {
        (**self).judge(item, i, j)
    }
}

/// True iff samples `i` and `j` entail each other.
pub fn bidirectional_entailment<O: EntailmentOracle + ?Sized>(
    oracle: &O,
    item: &QAItem,
    i: usize,
    j: usize,
) -> Result<bool, NliError> {
    if !oracle.judge(item, i, j)?.is_entailment() {
        return Ok(false);
    }
    Ok(oracle.judge(item, j, i)?.is_entailment())
}

/// Serves precomputed judgments keyed by item id and sample indices.
#[derive(Debug, Clone, Default)]
pub struct FileOracle {
    table: EntailmentTable,
}

impl FileOracle {
    pub fn new(table: EntailmentTable) -> Self {
        Self { table }
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self, crate::model::RecordError> {
        Ok(Self::new(crate::model::parse_entailment_oracle(path)?))
    }

    pub fn table(&self) -> &EntailmentTable {
        &self.table
    }
}

impl EntailmentOracle for FileOracle {
    fn judge(&self, item: &QAItem, i: usize, j: usize) -> Result<NliVerdict, NliError> {
        self.table
            .get(&item.id, i, j)
            .map(|r| NliVerdict::label(r.forward))
            .ok_or_else(|| NliError::MissingJudgment {
                item_id: item.id.clone(),
                i,
                j,
            })
    }
}

#[derive(Debug, Clone)]
pub struct HttpOracleConfig {
    pub base_url: String,
    pub timeout: Duration,
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl HttpOracleConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            timeout: Duration::from_secs(10),
            attempts: 3,
            initial_backoff: Duration::from_millis(200),
        }
    }

    /// Reads the base URL from `CLEANSE_NLI_URL`.
    pub fn from_env() -> Option<Self> {
        std::env::var(NLI_URL_ENV)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .map(Self::new)
    }
}

/// Client for `POST {base_url}/nli`.
///
/// Failed attempts are retried with exponential backoff; after the last
/// attempt the error is returned rather than a default label.
pub struct HttpOracle {
    config: HttpOracleConfig,
    agent: ureq::Agent,
}

impl HttpOracle {
    pub fn new(config: HttpOracleConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn endpoint(&self) -> String {
        format!("{}/nli", self.config.base_url.trim_end_matches('/'))
    }

    pub fn request(&self, query: &NliQuery) -> Result<NliVerdict, NliError> {
        let url = self.endpoint();
        let mut backoff = self.config.initial_backoff;
        let mut last = NliError::Transport {
            status: None,
            body: "no attempts made".to_string(),
        };
        for attempt in 0..self.config.attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
            match self.attempt(&url, query) {
                Ok(verdict) => return Ok(verdict),
                Err((err, retryable)) => {
                    log::warn!("nli request attempt {} failed: {err}", attempt + 1);
                    last = err;
                    if !retryable {
                        break;
                    }
                }
            }
        }
        Err(last)
    }

    fn attempt(&self, url: &str, query: &NliQuery) -> Result<NliVerdict, (NliError, bool)> {
        let mut response = self.agent.post(url).send_json(query).map_err(|e| {
            (
                NliError::Transport {
                    status: None,
                    body: e.to_string(),
                },
                true,
            )
        })?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(|e| {
            (
                NliError::Transport {
                    status: Some(status),
                    body: e.to_string(),
                },
                true,
            )
        })?;
        if !(200..300).contains(&status) {
            let retryable = status >= 500 || status == 429;
            return Err((
                NliError::Transport {
                    status: Some(status),
                    body,
                },
                retryable,
            ));
        }
        let verdict: NliVerdict =
            serde_json::from_str(&body).map_err(|e| (NliError::InvalidVerdict(format!("{e}: {body}")), false))?;
        verdict.validate().map_err(|e| (e, false))?;
        Ok(verdict)
    }
}

impl EntailmentOracle for HttpOracle {
    fn judge(&self, item: &QAItem, i: usize, j: usize) -> Result<NliVerdict, NliError> {
        self.request(&NliQuery::for_pair(item, i, j)?)
    }
}

/// Wraps an oracle and counts directed judgments issued through it.
pub struct CountingOracle<O> {
    inner: O,
    calls: AtomicUsize,
}

impl<O> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }
}

impl<O: EntailmentOracle> EntailmentOracle for CountingOracle<O> {
    fn judge(&self, item: &QAItem, i: usize, j: usize) -> Result<NliVerdict, NliError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.judge(item, i, j)
    }
}

/// Fixed-answer oracle: every pair gets the same label.
#[derive(Debug, Clone, Copy)]
pub struct ConstantOracle(pub EntailmentLabel);

impl EntailmentOracle for ConstantOracle {
    fn judge(&self, _item: &QAItem, _i: usize, _j: usize) -> Result<NliVerdict, NliError> {
        Ok(NliVerdict::label(self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EntailmentRecord, GenerationSample};
    use EntailmentLabel::*;

    fn item(id: &str, k: usize) -> QAItem {
        let s = |t: &str| GenerationSample::new(t, vec![-0.1], vec![1.0]);
        QAItem {
            id: id.into(),
            question: "Who wrote Hamlet?".into(),
            gold_answers: vec!["Shakespeare".into()],
            most_likely: s("Shakespeare"),
            samples: (0..k).map(|i| s(&format!("answer {i}"))).collect(),
        }
    }

    fn oracle(records: &[(usize, usize, EntailmentLabel, EntailmentLabel)]) -> FileOracle {
        FileOracle::new(
            records
                .iter()
                .map(|&(i, j, forward, backward)| EntailmentRecord {
                    item_id: "q1".into(),
                    i,
                    j,
                    forward,
                    backward,
                })
                .collect(),
        )
    }

    #[test]
    fn file_oracle_lookup_and_swap() {
        let o = oracle(&[(0, 1, Entailment, Neutral)]);
        let it = item("q1", 3);
        assert_eq!(o.judge(&it, 0, 1).unwrap().label, Entailment);
        assert_eq!(o.judge(&it, 1, 0).unwrap().label, Neutral);
        assert_eq!(
            o.judge(&it, 0, 2),
            Err(NliError::MissingJudgment {
                item_id: "q1".into(),
                i: 0,
                j: 2
            })
        );
    }

    #[test]
    fn bidirectional_requires_both_directions() {
        let it = item("q1", 2);
        let cases = [
            (Entailment, Entailment, true),
            (Entailment, Neutral, false),
            (Neutral, Entailment, false),
            (Contradiction, Contradiction, false),
        ];
        for (f, b, want) in cases {
            let o = oracle(&[(0, 1, f, b)]);
            assert_eq!(bidirectional_entailment(&o, &it, 0, 1).unwrap(), want);
            assert_eq!(bidirectional_entailment(&o, &it, 1, 0).unwrap(), want);
        }
    }

    #[test]
    fn query_joins_question_and_answer() {
        let q = NliQuery::for_pair(&item("q1", 2), 1, 0).unwrap();
        assert_eq!(q.premise, "Who wrote Hamlet? answer 1");
        assert_eq!(q.hypothesis, "Who wrote Hamlet? answer 0");
        assert!(matches!(
            NliQuery::for_pair(&item("q1", 2), 0, 5),
            Err(NliError::IndexOutOfRange { index: 5, .. })
        ));
    }

    #[test]
    fn verdict_argmax_and_validation() {
        assert_eq!(NliVerdict::from_probs([0.1, 0.7, 0.2]).label, Neutral);
        assert!(NliVerdict::from_probs([0.1, 0.2, 0.7]).validate().is_ok());
        let bad = NliVerdict {
            label: Entailment,
            probs: Some([0.1, 0.8, 0.1]),
        };
        assert!(matches!(bad.validate(), Err(NliError::InvalidVerdict(_))));
        let unnormalized = NliVerdict {
            label: Entailment,
            probs: Some([0.9, 0.9, 0.1]),
        };
        assert!(unnormalized.validate().is_err());
    }

    #[test]
    fn counting_oracle_counts() {
        let o = CountingOracle::new(ConstantOracle(Entailment));
        let it = item("q1", 2);
        assert!(bidirectional_entailment(&o, &it, 0, 1).unwrap());
        assert_eq!(o.calls(), 2);
        let o = CountingOracle::new(ConstantOracle(Neutral));
        assert!(!bidirectional_entailment(&o, &it, 0, 1).unwrap());
        assert_eq!(o.calls(), 1);
    }
}
