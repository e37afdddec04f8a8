// Cleanse on hand-built similarity matrices: how the intra/inter split moves
// the score as the clustering changes.
//
// ```bash
// cargo run -p cleanse --example cleanse_score
// ```

use cleanse::model::ClusterAssignment;
use cleanse::scoring::{cleanse_score, cosine_score, intra_total_split, ScoreError, SimilarityMatrix};

pub fn run_example() -> anyhow::Result<()> {
    // four samples: {0,1} and {2,3} are near-duplicates, the two pairs far apart
    let sim = SimilarityMatrix::from_upper(4, &[0.95, 0.2, 0.1, 0.15, 0.2, 0.9]);
    println!("cosine score {:.4}", cosine_score(&sim)?);

    for (name, labels) in [
        ("one cluster", vec![0, 0, 0, 0]),
        ("two clusters", vec![0, 0, 1, 1]),
        ("wrong pairs", vec![0, 1, 0, 1]),
        ("singletons", vec![0, 1, 2, 3]),
    ] {
        let clusters = ClusterAssignment::from_labels("demo", &labels);
        let split = intra_total_split(&sim, &clusters)?;
        let score = cleanse_score(&sim, &clusters)?;
        println!(
            "{name:<13} intra {:.2}  inter {:.2}  total {:.2}  cleanse {score:.4}",
            split.intra, split.inter, split.total
        );
    }

    // orthogonal samples leave nothing to divide
    let flat = SimilarityMatrix::from_upper(3, &[0.0, 0.0, 0.0]);
    match cleanse_score(&flat, &ClusterAssignment::singletons("flat", 3)) {
        Err(ScoreError::DegenerateTotalSimilarity(t)) => println!("orthogonal: degenerate (total {t})"),
        other => anyhow::bail!("expected degenerate total, got {other:?}"),
    }

    let two = cleanse_score(&sim, &ClusterAssignment::from_labels("demo", &[0, 0, 1, 1]))?;
    anyhow::ensure!((two - 1.85 / 2.5).abs() < 1e-12);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
