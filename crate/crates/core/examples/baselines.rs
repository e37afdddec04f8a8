// The four baseline scores on one item: Perplexity, LN-Entropy, Lexical
// Similarity, and Cosine Score.
//
// ```bash
// cargo run -p cleanse --example baselines
// ```

use cleanse::model::GenerationSample;
use cleanse::scoring::{cosine_score, lexical_similarity, ln_entropy, perplexity, similarity_matrix};

pub fn run_example() -> anyhow::Result<()> {
    let most_likely = GenerationSample::new("Mount Everest", vec![-0.05, -0.1], vec![1.0, 0.0, 0.0]);
    let samples = vec![
        GenerationSample::new("Mount Everest", vec![-0.05, -0.1], vec![1.0, 0.0, 0.0]),
        GenerationSample::new("Everest", vec![-0.3], vec![0.9, 0.1, 0.0]),
        GenerationSample::new("K2", vec![-1.2, -0.8], vec![0.2, 0.9, 0.1]),
        GenerationSample::new(
            "it is Mount Everest",
            vec![-0.4, -0.2, -0.1, -0.1],
            vec![0.95, 0.05, 0.1],
        ),
    ];

    let ppl = perplexity(&most_likely)?;
    let lne = ln_entropy(&samples)?;
    let lex = lexical_similarity(&samples, 1.0)?;
    let cos = cosine_score(&similarity_matrix(&samples)?)?;
    println!("perplexity          {ppl:.4}  (higher = less confident)");
    println!("ln-entropy          {lne:.4}  (higher = less confident)");
    println!("lexical similarity  {lex:.4}");
    println!("cosine score        {cos:.4}");

    anyhow::ensure!((ppl - (0.075f64).exp()).abs() < 1e-12);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
