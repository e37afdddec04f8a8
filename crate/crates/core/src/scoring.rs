//! Similarity kernels and the per-item uncertainty scores.
//!
//! Pair sums always run row-major over `i < j` so results are reproducible
//! bit for bit.

use thiserror::Error;

use crate::model::{ClusterAssignment, GenerationSample};
use crate::rouge::{rouge_l_tokens, tokenize};

/// Guard on total similarity below which the Cleanse ratio is undefined.
pub const TOTAL_SIMILARITY_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("embedding {0} has zero norm")]
    ZeroVector(usize),
    #[error("embedding dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("total similarity {0} is not above epsilon")]
    DegenerateTotalSimilarity(f64),
    #[error("sample {0} has no token logprobs")]
    EmptyLogprobs(usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("clustering covers {clusters} samples but similarity matrix has {k}")]
    SizeMismatch { clusters: usize, k: usize },
}

impl ScoreError {
    pub fn kind(&self) -> &'static str {
        match self {
            ScoreError::ZeroVector(_) => "ZeroVector",
            ScoreError::DimensionMismatch(..) => "DimensionMismatch",
            ScoreError::DegenerateTotalSimilarity(_) => "DegenerateTotalSimilarity",
            ScoreError::EmptyLogprobs(_) => "EmptyLogprobs",
            ScoreError::TooFewSamples { .. } => "TooFewSamples",
            ScoreError::SizeMismatch { .. } => "SizeMismatch",
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, ScoreError> {
    if a.len() != b.len() {
        return Err(ScoreError::DimensionMismatch(a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 {
        return Err(ScoreError::ZeroVector(0));
    }
    if nb == 0.0 {
        return Err(ScoreError::ZeroVector(1));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Symmetric K×K cosine matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    k: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_embeddings<V: AsRef<[f64]>>(embeddings: &[V]) -> Result<Self, ScoreError> {
        let k = embeddings.len();
        let normed: Vec<Vec<f64>> = embeddings
            .iter()
            .enumerate()
            .map(|(idx, e)| {
                let e = e.as_ref();
                let n = norm(e);
                if n == 0.0 {
                    Err(ScoreError::ZeroVector(idx))
                } else {
                    Ok(e.iter().map(|x| x / n).collect())
                }
            })
            .collect::<Result<_, _>>()?;
        if let Some(d) = normed.first().map(Vec::len) {
            if let Some(bad) = normed.iter().find(|v| v.len() != d) {
                return Err(ScoreError::DimensionMismatch(d, bad.len()));
            }
        }
        let mut values = vec![0.0; k * k];
        for i in 0..k {
            values[i * k + i] = 1.0;
            for j in i + 1..k {
                let dot: f64 = normed[i].iter().zip(&normed[j]).map(|(x, y)| x * y).sum();
                let s = dot.clamp(-1.0, 1.0);
                values[i * k + j] = s;
                values[j * k + i] = s;
            }
        }
        Ok(Self { k, values })
    }

    /// Builds a matrix from given upper-triangle values, row-major over `i < j`.
    pub fn from_upper(k: usize, upper: &[f64]) -> Self {
        assert_eq!(upper.len(), k * k.saturating_sub(1) / 2, "upper triangle size");
        let mut values = vec![0.0; k * k];
        let mut it = upper.iter();
        for i in 0..k {
            values[i * k + i] = 1.0;
            for j in i + 1..k {
                let s = *it.next().unwrap();
                values[i * k + j] = s;
                values[j * k + i] = s;
            }
        }
        Self { k, values }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.k + j]
    }

    /// Off-diagonal pairs `(i, j, sim)` with `i < j`, row-major.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.k).flat_map(move |i| (i + 1..self.k).map(move |j| (i, j, self.get(i, j))))
    }

    /// Same similarities with every value multiplied by `factor`
    /// (diagonal included).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            k: self.k,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

pub fn similarity_matrix(samples: &[GenerationSample]) -> Result<SimilarityMatrix, ScoreError> {
    if samples.len() < 2 {
        return Err(ScoreError::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let embeddings: Vec<&[f64]> = samples.iter().map(|s| s.embedding.as_slice()).collect();
    SimilarityMatrix::from_embeddings(&embeddings)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilaritySplit {
    pub intra: f64,
    pub inter: f64,
    pub total: f64,
}

/// Intra-cluster, inter-cluster, and total similarity over unordered pairs.
pub fn intra_total_split(sim: &SimilarityMatrix, clusters: &ClusterAssignment) -> Result<SimilaritySplit, ScoreError> {
    if clusters.k() != sim.k() {
        return Err(ScoreError::SizeMismatch {
            clusters: clusters.k(),
            k: sim.k(),
        });
    }
    let (mut intra, mut inter) = (0.0, 0.0);
    for (i, j, s) in sim.pairs() {
        if clusters.assignment[i] == clusters.assignment[j] {
            intra += s;
        } else {
            inter += s;
        }
    }
    Ok(SimilaritySplit {
        intra,
        inter,
        total: intra + inter,
    })
}

/// Proportion of total pairwise similarity that falls inside clusters.
pub fn cleanse_score(sim: &SimilarityMatrix, clusters: &ClusterAssignment) -> Result<f64, ScoreError> {
    let split = intra_total_split(sim, clusters)?;
    if split.total <= TOTAL_SIMILARITY_EPSILON {
        return Err(ScoreError::DegenerateTotalSimilarity(split.total));
    }
    if split.inter == 0.0 {
        return Ok(1.0);
    }
    if split.intra == 0.0 {
        return Ok(0.0);
    }
    Ok((split.intra / split.total).clamp(0.0, 1.0))
}

/// Mean pairwise cosine over all samples.
pub fn cosine_score(sim: &SimilarityMatrix) -> Result<f64, ScoreError> {
    let k = sim.k();
    if k < 2 {
        return Err(ScoreError::TooFewSamples { needed: 2, got: k });
    }
    let sum: f64 = sim.pairs().map(|(_, _, s)| s).sum();
    Ok(2.0 * sum / (k * (k - 1)) as f64)
}

/// Mean pairwise Rouge-L between sample texts.
pub fn lexical_similarity(samples: &[GenerationSample], beta: f64) -> Result<f64, ScoreError> {
    let k = samples.len();
    if k < 2 {
        return Err(ScoreError::TooFewSamples { needed: 2, got: k });
    }
    let tokens: Vec<_> = samples.iter().map(|s| tokenize(&s.text)).collect();
    let mut sum = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            sum += rouge_l_tokens(&tokens[i], &tokens[j], beta);
        }
    }
    Ok(2.0 * sum / (k * (k - 1)) as f64)
}

fn mean_nll(logprobs: &[f64]) -> f64 {
    -logprobs.iter().sum::<f64>() / logprobs.len() as f64
}

/// `exp` of the mean per-token negative log-likelihood.
pub fn perplexity(sample: &GenerationSample) -> Result<f64, ScoreError> {
    if sample.token_logprobs.is_empty() {
        return Err(ScoreError::EmptyLogprobs(0));
    }
    Ok(mean_nll(&sample.token_logprobs).exp())
}

/// Mean length-normalized negative log-likelihood over samples.
pub fn ln_entropy(samples: &[GenerationSample]) -> Result<f64, ScoreError> {
    if samples.is_empty() {
        return Err(ScoreError::TooFewSamples { needed: 1, got: 0 });
    }
    let mut sum = 0.0;
    for (idx, s) in samples.iter().enumerate() {
        if s.token_logprobs.is_empty() {
            return Err(ScoreError::EmptyLogprobs(idx));
        }
        sum += mean_nll(&s.token_logprobs);
    }
    Ok(sum / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    fn emb(e: Vec<f64>) -> GenerationSample {
        GenerationSample::new("t", vec![-0.1], e)
    }

    fn lp(text: &str, logprobs: Vec<f64>) -> GenerationSample {
        GenerationSample::new(text, logprobs, vec![1.0])
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(close(
            cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2
        ));
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(ScoreError::ZeroVector(0)));
        assert_eq!(cosine(&[1.0, 0.0], &[1.0]), Err(ScoreError::DimensionMismatch(2, 1)));
    }

    #[test]
    fn matrix_examples() {
        let m = similarity_matrix(&[emb(vec![0.3, 0.4]), emb(vec![0.3, 0.4])]).unwrap();
        assert!(close(m.get(0, 1), 1.0) && close(m.get(1, 0), 1.0));
        let m = similarity_matrix(&[emb(vec![1.0, 0.0]), emb(vec![0.0, 2.0])]).unwrap();
        assert_eq!(m.get(0, 1), 0.0);
        let vs = [vec![0.2, -1.0, 0.5], vec![1.5, 0.3, 0.1], vec![-0.4, 0.9, 0.8]];
        let m = similarity_matrix(&vs.iter().cloned().map(emb).collect::<Vec<_>>()).unwrap();
        for i in 0..3 {
            assert_eq!(m.get(i, i), 1.0);
            for j in 0..3 {
                if i != j {
                    assert!(close(m.get(i, j), cosine(&vs[i], &vs[j]).unwrap()));
                    assert_eq!(m.get(i, j), m.get(j, i));
                }
            }
        }
        assert_eq!(
            similarity_matrix(&[emb(vec![1.0]), emb(vec![0.0])]),
            Err(ScoreError::ZeroVector(1))
        );
    }

    #[test]
    fn split_examples() {
        let one = ClusterAssignment::single_cluster("x", 3);
        let s = intra_total_split(&SimilarityMatrix::from_upper(3, &[0.9; 3]), &one).unwrap();
        assert!(close(s.intra, 2.7) && s.inter == 0.0 && close(s.total, 2.7));

        let singles = ClusterAssignment::singletons("x", 3);
        let s = intra_total_split(&SimilarityMatrix::from_upper(3, &[0.1; 3]), &singles).unwrap();
        assert!(s.intra == 0.0 && close(s.inter, 0.3) && close(s.total, 0.3));

        let two = ClusterAssignment::from_labels("x", &[0, 0, 1]);
        let m = SimilarityMatrix::from_upper(3, &[0.9, 0.1, 0.1]);
        let s = intra_total_split(&m, &two).unwrap();
        assert!(close(s.intra, 0.9) && close(s.inter, 0.2) && close(s.total, 1.1));
    }

    #[test]
    fn cleanse_examples() {
        let m = SimilarityMatrix::from_upper(3, &[0.9; 3]);
        assert_eq!(
            cleanse_score(&m, &ClusterAssignment::single_cluster("x", 3)).unwrap(),
            1.0
        );
        let m = SimilarityMatrix::from_upper(3, &[0.1; 3]);
        assert_eq!(cleanse_score(&m, &ClusterAssignment::singletons("x", 3)).unwrap(), 0.0);
        let m = SimilarityMatrix::from_upper(3, &[0.9, 0.1, 0.1]);
        let c = cleanse_score(&m, &ClusterAssignment::from_labels("x", &[0, 0, 1])).unwrap();
        assert!(close(c, 0.9 / 1.1));
    }

    #[test]
    fn cleanse_degenerate_total() {
        let m = SimilarityMatrix::from_upper(3, &[0.0; 3]);
        assert!(matches!(
            cleanse_score(&m, &ClusterAssignment::singletons("x", 3)),
            Err(ScoreError::DegenerateTotalSimilarity(_))
        ));
        let m = SimilarityMatrix::from_upper(2, &[-0.5]);
        assert!(cleanse_score(&m, &ClusterAssignment::single_cluster("x", 2)).is_err());
        let m = SimilarityMatrix::from_upper(2, &[0.5]);
        assert_eq!(
            cleanse_score(&m, &ClusterAssignment::single_cluster("x", 3)),
            Err(ScoreError::SizeMismatch { clusters: 3, k: 2 })
        );
    }

    #[test]
    fn cleanse_clamps_mixed_signs() {
        // intra 0.8, inter -0.3: ratio 1.6 clamps to 1
        let m = SimilarityMatrix::from_upper(3, &[0.8, -0.2, -0.1]);
        let c = cleanse_score(&m, &ClusterAssignment::from_labels("x", &[0, 0, 1])).unwrap();
        assert_eq!(c, 1.0);
    }

    #[test]
    fn cosine_score_examples() {
        assert!(close(
            cosine_score(&SimilarityMatrix::from_upper(2, &[0.6])).unwrap(),
            0.6
        ));
        let same = similarity_matrix(&vec![emb(vec![1.0, 2.0]); 4]).unwrap();
        assert!(close(cosine_score(&same).unwrap(), 1.0));
        let m = similarity_matrix(&[emb(vec![1.0, 0.0]), emb(vec![1.0, 0.0]), emb(vec![0.0, 1.0])]).unwrap();
        assert!(close(cosine_score(&m).unwrap(), 1.0 / 3.0));
    }

    #[test]
    fn lexical_examples() {
        let same = vec![lp("the cat", vec![-0.1]); 3];
        assert_eq!(lexical_similarity(&same, 1.0).unwrap(), 1.0);
        let disjoint = vec![lp("a b", vec![-0.1]), lp("c d", vec![-0.1]), lp("e f", vec![-0.1])];
        assert_eq!(lexical_similarity(&disjoint, 1.0).unwrap(), 0.0);
        let mixed = vec![lp("a b", vec![-0.1]), lp("a b", vec![-0.1]), lp("c d", vec![-0.1])];
        assert!(close(lexical_similarity(&mixed, 1.0).unwrap(), 1.0 / 3.0));
        assert!(lexical_similarity(&same[..1], 1.0).is_err());
    }

    #[test]
    fn perplexity_examples() {
        assert_eq!(perplexity(&lp("a b", vec![0.0, 0.0])).unwrap(), 1.0);
        let half = 0.5f64.ln();
        assert!(close(perplexity(&lp("a b c", vec![half; 3])).unwrap(), 2.0));
        assert!(close(perplexity(&lp("a b", vec![-0.1, -0.3])).unwrap(), 0.2f64.exp()));
        assert_eq!(perplexity(&lp("", vec![])), Err(ScoreError::EmptyLogprobs(0)));
    }

    #[test]
    fn ln_entropy_examples() {
        assert_eq!(ln_entropy(&[lp("a", vec![0.0, 0.0])]).unwrap(), 0.0);
        assert!(close(ln_entropy(&[lp("a", vec![-0.5; 4])]).unwrap(), 0.5));
        let two = [lp("a", vec![-0.25, -0.75]), lp("b", vec![-1.0, -1.5, -0.5])];
        assert!(close(ln_entropy(&two).unwrap(), 0.75));
        let bad = [lp("a", vec![-0.2]), lp("", vec![])];
        assert_eq!(ln_entropy(&bad), Err(ScoreError::EmptyLogprobs(1)));
    }

    #[test]
    fn perplexity_is_exp_of_single_sample_entropy() {
        let s = lp("a b c", vec![-0.3, -1.2, -0.05]);
        assert!(close(perplexity(&s).unwrap(), ln_entropy(&[s]).unwrap().exp()));
    }
}
