//! Hallucination risk scoring for sampled LLM answers.
//!
//! Sampled answers to a question are grouped into meanings by mutual NLI
//! entailment ([`clustering`]); the Cleanse score is then the share of the
//! total pairwise embedding similarity that falls inside those groups
//! ([`scoring`]). Baselines (Cosine Score, Lexical Similarity, Perplexity,
//! LN-Entropy) and the evaluation protocol (Rouge-L correctness, AUROC,
//! PCC, threshold sweeps, clusterer comparison) live alongside.
//!
//! ```
//! use cleanse::{cleanse_score, ClusterAssignment, SimilarityMatrix};
//!
//! // samples 0 and 1 share a meaning, sample 2 stands alone
//! let sim = SimilarityMatrix::from_upper(3, &[0.9, 0.1, 0.1]);
//! let clusters = ClusterAssignment::from_labels("q1", &[0, 0, 1]);
//! let score = cleanse_score(&sim, &clusters).unwrap();
//! assert!((score - 0.9 / 1.1).abs() < 1e-12);
//! ```

pub mod clustering;
pub mod evaluation;
pub mod model;
pub mod nli;
pub mod pipeline;
pub mod rouge;
pub mod scoring;
pub mod synth;

pub use clustering::{cluster_item, cluster_stats, ClusterError, ClusterStats};
pub use evaluation::{
    auroc, correctness_label, evaluate, pcc, threshold_sweep, EvalError, EvalSummary, Method, Polarity, SweepTable,
};
pub use model::{
    parse_dataset, parse_entailment_oracle, ClusterAssignment, EntailmentLabel, EntailmentRecord, EntailmentTable,
    GenerationSample, ItemScores, QAItem, RecordError,
};
pub use nli::{bidirectional_entailment, EntailmentOracle, FileOracle, HttpOracle, NliError, NliVerdict};
pub use rouge::{lcs_length, rouge_l, rouge_l_max, tokenize};
pub use scoring::{
    cleanse_score, cosine, cosine_score, intra_total_split, lexical_similarity, ln_entropy, perplexity,
    similarity_matrix, ScoreError, SimilarityMatrix,
};
