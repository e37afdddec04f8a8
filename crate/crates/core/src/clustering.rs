//! Groups an item's samples into meanings by bi-directional entailment.
//!
//! Samples are visited in index order. Each one is compared against the
//! first member of every existing cluster, in creation order, and joins the
//! first cluster it mutually entails; otherwise it starts a new cluster.
//! Only representatives are queried, so an item costs at most `2·K·C`
//! directed judgments.

use thiserror::Error;

use crate::model::{ClusterAssignment, QAItem};
use crate::nli::{bidirectional_entailment, EntailmentOracle, NliError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("item {item_id}: {source}")]
    Oracle {
        item_id: String,
        #[source]
        source: NliError,
    },
    #[error("item {0} has no samples to cluster")]
    Empty(String),
    #[error("cluster statistics need both correct and incorrect items")]
    DegenerateSplit,
    #[error("{assignments} assignments but {labels} correctness labels")]
    LengthMismatch { assignments: usize, labels: usize },
}

pub fn cluster_item<O: EntailmentOracle + ?Sized>(
    item: &QAItem,
    oracle: &O,
) -> Result<ClusterAssignment, ClusterError> {
    if item.samples.is_empty() {
        return Err(ClusterError::Empty(item.id.clone()));
    }
    // representative sample index per cluster, in creation order
    let mut representatives = vec![0usize];
    let mut labels = vec![0usize];
    for m in 1..item.samples.len() {
        let mut joined = None;
        for (cluster, &rep) in representatives.iter().enumerate() {
            let same = bidirectional_entailment(oracle, item, rep, m).map_err(|source| ClusterError::Oracle {
                item_id: item.id.clone(),
                source,
            })?;
            if same {
                joined = Some(cluster);
                break;
            }
        }
        let cluster = joined.unwrap_or_else(|| {
            representatives.push(m);
            representatives.len() - 1
        });
        labels.push(cluster);
    }
    Ok(ClusterAssignment::from_labels(item.id.clone(), &labels))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterStats {
    pub mean_clusters_correct: f64,
    pub mean_clusters_incorrect: f64,
    /// `mean_clusters_incorrect - mean_clusters_correct`
    pub gap: f64,
}

/// Mean cluster counts of correct and incorrect items and their difference.
pub fn cluster_stats(assignments: &[ClusterAssignment], correctness: &[bool]) -> Result<ClusterStats, ClusterError> {
    if assignments.len() != correctness.len() {
        return Err(ClusterError::LengthMismatch {
            assignments: assignments.len(),
            labels: correctness.len(),
        });
    }
    let mean_for = |want: bool| {
        let counts: Vec<f64> = assignments
            .iter()
            .zip(correctness)
            .filter(|(_, &c)| c == want)
            .map(|(a, _)| a.num_clusters as f64)
            .collect();
        (!counts.is_empty()).then(|| counts.iter().sum::<f64>() / counts.len() as f64)
    };
    match (mean_for(true), mean_for(false)) {
        (Some(correct), Some(incorrect)) => Ok(ClusterStats {
            mean_clusters_correct: correct,
            mean_clusters_incorrect: incorrect,
            gap: incorrect - correct,
        }),
        _ => Err(ClusterError::DegenerateSplit),
    }
}
