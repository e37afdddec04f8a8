//! Seeded synthetic datasets with known cluster structure.
//!
//! Each item draws a true cluster count from a class-conditional
//! distribution, places that many unit-norm centers with a common pairwise
//! cosine, and scatters its K samples around them with spherical Gaussian
//! noise before re-normalizing. The accompanying entailment oracle reports
//! mutual entailment exactly for pairs that share a true cluster.
//!
//! Sample texts open with an item-wide template shared by every cluster,
//! followed by a two-slot answer core. Each slot of a cluster has a few
//! synonyms and each sample picks one independently, so samples with the
//! same meaning need not share core words while samples with different
//! meanings still share the template.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClusterAssignment, EntailmentLabel, EntailmentRecord, EntailmentTable, GenerationSample, QAItem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("cannot place {clusters} centers with cosine {cosine} in dimension {dim}")]
    InfeasibleGeometry { clusters: usize, cosine: f64, dim: usize },
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
}

/// Weighted distribution over cluster counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountDistribution(pub Vec<(usize, f64)>);

impl CountDistribution {
    pub fn fixed(count: usize) -> Self {
        Self(vec![(count, 1.0)])
    }

    fn sampler(&self) -> Result<WeightedIndex<f64>, SynthError> {
        WeightedIndex::new(self.0.iter().map(|(_, w)| *w))
            .map_err(|e| SynthError::InvalidConfig(format!("cluster count weights: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_items: usize,
    /// samples per item
    pub k: usize,
    /// embedding dimension
    pub d: usize,
    pub n_clusters_correct: CountDistribution,
    pub n_clusters_incorrect: CountDistribution,
    /// base per-coordinate noise standard deviation
    pub within_noise: f64,
    /// per-item noise is `within_noise * u`, `u ~ U[1, 1 + noise_spread]`
    pub noise_spread: f64,
    /// in (0, 1]; inter-center cosine is drawn from `U[0, 1 - center_separation]`
    pub center_separation: f64,
    pub p_correct: f64,
    /// template words per item are drawn from `1..=2 * template_words`
    pub template_words: usize,
    /// synonyms per answer-core slot within one cluster
    pub core_synonyms: usize,
    /// extra mean per-token negative log-likelihood on incorrect items
    pub logprob_signal: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_items: 2000,
            k: 10,
            d: 32,
            n_clusters_correct: CountDistribution::fixed(1),
            n_clusters_incorrect: CountDistribution::fixed(2),
            within_noise: 0.05,
            noise_spread: 3.0,
            center_separation: 0.1,
            p_correct: 0.5,
            template_words: 4,
            core_synonyms: 3,
            logprob_signal: 0.3,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.n_items == 0 || self.k < 2 || self.d == 0 {
            return bad("n_items >= 1, k >= 2 and d >= 1 are required");
        }
        if self.within_noise.is_nan()
            || self.noise_spread.is_nan()
            || self.within_noise < 0.0
            || self.noise_spread < 0.0
        {
            return bad("noise parameters must be non-negative");
        }
        if !(self.center_separation > 0.0 && self.center_separation <= 1.0) {
            return bad("center_separation must lie in (0, 1]");
        }
        if self.core_synonyms == 0 {
            return bad("core_synonyms must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.p_correct) {
            return bad("p_correct must lie in [0, 1]");
        }
        for dist in [&self.n_clusters_correct, &self.n_clusters_incorrect] {
            if dist.0.is_empty() || dist.0.iter().any(|&(c, _)| c == 0 || c > self.k) {
                return bad("cluster counts must lie in [1, k]");
            }
            dist.sampler()?;
        }
        Ok(())
    }
}

/// Generated items with their oracle and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub items: Vec<QAItem>,
    pub oracle: EntailmentTable,
    pub truth: Vec<ClusterAssignment>,
    /// whether each item was drawn correct
    pub correct: Vec<bool>,
    /// the common inter-center cosine of each item
    pub center_cosine: Vec<f64>,
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn normalize(v: &mut [f64]) -> bool {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

/// `count` orthonormal random vectors by Gram–Schmidt.
fn orthonormal(rng: &mut ChaCha8Rng, count: usize, d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = gaussian(rng, d);
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        if normalize(&mut v) {
            basis.push(v);
        }
    }
    basis
}

/// Unit centers with pairwise cosine exactly `cosine` (up to rounding):
/// `c_k = sqrt(cosine) * g + sqrt(1 - cosine) * u_k` over an orthonormal
/// family `{g, u_1, ..}`.
pub fn equicorrelated_centers(
    rng: &mut ChaCha8Rng,
    clusters: usize,
    cosine: f64,
    d: usize,
) -> Result<Vec<Vec<f64>>, SynthError> {
    let needs_shared = clusters > 1 && cosine > 0.0;
    let dims_needed = if clusters == 1 {
        1
    } else {
        clusters + usize::from(needs_shared)
    };
    if !(0.0..1.0).contains(&cosine) || dims_needed > d {
        return Err(SynthError::InfeasibleGeometry {
            clusters,
            cosine,
            dim: d,
        });
    }
    let basis = orthonormal(rng, dims_needed, d);
    if clusters == 1 {
        return Ok(vec![basis[0].clone()]);
    }
    if !needs_shared {
        return Ok(basis);
    }
    let (a, b) = (cosine.sqrt(), (1.0 - cosine).sqrt());
    Ok(basis[1..]
        .iter()
        .map(|u| basis[0].iter().zip(u).map(|(g, x)| a * g + b * x).collect())
        .collect())
}

struct Words {
    next: usize,
}

impl Words {
    fn fresh(&mut self) -> String {
        // letters only so the tokenizer leaves words intact
        let mut n = self.next;
        self.next += 1;
        let mut w = String::from("w");
        loop {
            w.push((b'a' + (n % 26) as u8) as char);
            n /= 26;
            if n == 0 {
                break;
            }
        }
        w
    }

    fn many(&mut self, count: usize) -> Vec<String> {
        (0..count).map(|_| self.fresh()).collect()
    }
}

fn logprobs(rng: &mut ChaCha8Rng, tokens: usize, mean_nll: f64) -> Vec<f64> {
    (0..tokens.max(1))
        .map(|_| {
            let e: f64 = rng.sample(Exp1);
            -(mean_nll * e)
        })
        .collect()
}

/// Labels for a pair of samples from different true clusters.
const CROSS_CLUSTER_LABELS: [(EntailmentLabel, EntailmentLabel); 5] = [
    (EntailmentLabel::Neutral, EntailmentLabel::Neutral),
    (EntailmentLabel::Contradiction, EntailmentLabel::Contradiction),
    (EntailmentLabel::Entailment, EntailmentLabel::Neutral),
    (EntailmentLabel::Neutral, EntailmentLabel::Entailment),
    (EntailmentLabel::Contradiction, EntailmentLabel::Neutral),
];

pub fn generate(config: &SynthConfig) -> Result<SynthDataset, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let correct_counts = config.n_clusters_correct.sampler()?;
    let incorrect_counts = config.n_clusters_incorrect.sampler()?;
    let mut words = Words { next: 0 };
    let width = config.n_items.to_string().len().max(5);

    let mut out = SynthDataset {
        items: Vec::with_capacity(config.n_items),
        oracle: EntailmentTable::new(),
        truth: Vec::with_capacity(config.n_items),
        correct: Vec::with_capacity(config.n_items),
        center_cosine: Vec::with_capacity(config.n_items),
    };

    for idx in 0..config.n_items {
        let id = format!("synth-{idx:0width$}");
        let correct = rng.random::<f64>() < config.p_correct;
        let clusters = if correct {
            config.n_clusters_correct.0[correct_counts.sample(&mut rng)].0
        } else {
            config.n_clusters_incorrect.0[incorrect_counts.sample(&mut rng)].0
        };
        let cosine = rng.random::<f64>() * (1.0 - config.center_separation);
        let centers = equicorrelated_centers(&mut rng, clusters, cosine, config.d)?;

        // balanced sizes, shuffled order
        let mut labels: Vec<usize> = (0..config.k).map(|m| m % clusters).collect();
        labels.shuffle(&mut rng);
        let truth = ClusterAssignment::from_labels(id.clone(), &labels);

        let sigma = config.within_noise * (1.0 + config.noise_spread * rng.random::<f64>());
        let mean_nll = 0.2 + 0.6 * rng.random::<f64>() + if correct { 0.0 } else { config.logprob_signal };

        let n_template = rng.random_range(1..=(2 * config.template_words).max(1));
        let template = words.many(n_template);
        // cores[cluster][slot][synonym]
        let cores: Vec<Vec<Vec<String>>> = (0..clusters)
            .map(|_| (0..2).map(|_| words.many(config.core_synonyms)).collect())
            .collect();

        let samples: Vec<GenerationSample> = labels
            .iter()
            .map(|&c| {
                let mut embedding = centers[c].clone();
                if sigma > 0.0 {
                    let noise = gaussian(&mut rng, config.d);
                    embedding.iter_mut().zip(noise).for_each(|(x, z)| *x += sigma * z);
                    normalize(&mut embedding);
                }
                let mut tokens = template.clone();
                for slot in &cores[c] {
                    tokens.push(slot[rng.random_range(0..slot.len())].clone());
                }
                let text = tokens.join(" ");
                let n_tokens = tokens.len();
                GenerationSample::new(text, logprobs(&mut rng, n_tokens, mean_nll), embedding)
            })
            .collect();

        // gold of 4..=8 words; 0.7·n is never an integer there
        let n_gold = rng.random_range(4..=8usize);
        let gold = words.many(n_gold);
        let answer: Vec<String> = if correct {
            let mut a = gold.clone();
            if rng.random::<bool>() {
                let pos = rng.random_range(0..n_gold);
                a[pos] = words.fresh();
            }
            a
        } else {
            let keep = rng.random_range(0..=(7 * n_gold) / 10);
            gold.iter()
                .take(keep)
                .cloned()
                .chain(words.many(n_gold - keep))
                .collect()
        };
        let most_likely_embedding = {
            let mut e = centers[labels[0]].clone();
            if sigma > 0.0 {
                let noise = gaussian(&mut rng, config.d);
                e.iter_mut().zip(noise).for_each(|(x, z)| *x += sigma * z);
                normalize(&mut e);
            }
            e
        };
        let most_likely = GenerationSample::new(
            answer.join(" "),
            logprobs(&mut rng, answer.len(), mean_nll),
            most_likely_embedding,
        );

        for i in 0..config.k {
            for j in i + 1..config.k {
                let (forward, backward) = if labels[i] == labels[j] {
                    (EntailmentLabel::Entailment, EntailmentLabel::Entailment)
                } else {
                    CROSS_CLUSTER_LABELS[rng.random_range(0..CROSS_CLUSTER_LABELS.len())]
                };
                out.oracle.insert(EntailmentRecord {
                    item_id: id.clone(),
                    i,
                    j,
                    forward,
                    backward,
                });
            }
        }

        out.items.push(QAItem {
            id,
            question: format!("synthetic question {idx}?"),
            gold_answers: vec![gold.join(" ")],
            most_likely,
            samples,
        });
        out.truth.push(truth);
        out.correct.push(correct);
        out.center_cosine.push(cosine);
    }
    Ok(out)
}

/// Oracle assigning `label` in both directions to every sample pair.
pub fn uniform_oracle(items: &[QAItem], label: EntailmentLabel) -> EntailmentTable {
    items
        .iter()
        .flat_map(|item| {
            let k = item.k();
            (0..k).flat_map(move |i| {
                (i + 1..k).map(move |j| EntailmentRecord {
                    item_id: item.id.clone(),
                    i,
                    j,
                    forward: label,
                    backward: label,
                })
            })
        })
        .collect()
}

/// Cleanse score of a noiseless item: intra pairs have similarity 1 and
/// cross pairs the common center cosine.
pub fn noiseless_cleanse(cluster_sizes: &[usize], center_cosine: f64) -> f64 {
    let k: usize = cluster_sizes.iter().sum();
    let intra: usize = cluster_sizes.iter().map(|n| n * (n.saturating_sub(1)) / 2).sum();
    let cross = k * (k - 1) / 2 - intra;
    intra as f64 / (intra as f64 + center_cosine * cross as f64)
}
