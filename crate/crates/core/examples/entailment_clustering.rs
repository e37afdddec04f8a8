// Bi-directional entailment clustering with an in-memory oracle, and the
// number of NLI queries it spends.
//
// ```bash
// cargo run -p cleanse --example entailment_clustering
// ```

use cleanse::clustering::cluster_item;
use cleanse::model::{EntailmentLabel, EntailmentRecord, EntailmentTable, GenerationSample, QAItem};
use cleanse::nli::{CountingOracle, FileOracle};

fn record(i: usize, j: usize, forward: EntailmentLabel, backward: EntailmentLabel) -> EntailmentRecord {
    EntailmentRecord {
        item_id: "capital".into(),
        i,
        j,
        forward,
        backward,
    }
}

pub fn run_example() -> anyhow::Result<()> {
    use EntailmentLabel::*;
    let texts = ["Paris", "It is Paris.", "Lyon", "The capital is Paris", "Marseille"];
    let item = QAItem {
        id: "capital".into(),
        question: "What is the capital of France?".into(),
        gold_answers: vec!["Paris".into()],
        most_likely: GenerationSample::new("Paris", vec![-0.1], vec![1.0, 0.0]),
        samples: texts
            .iter()
            .map(|t| GenerationSample::new(*t, vec![-0.5], vec![1.0, 0.1]))
            .collect(),
    };

    // only pairs the clusterer can ask about need entries
    let table: EntailmentTable = [
        record(0, 1, Entailment, Entailment),
        record(0, 2, Contradiction, Contradiction),
        record(0, 3, Entailment, Entailment),
        record(0, 4, Contradiction, Contradiction),
        // Lyon vs Marseille: one-way entailment is not enough
        record(2, 4, Entailment, Neutral),
    ]
    .into_iter()
    .collect();

    let oracle = CountingOracle::new(FileOracle::new(table));
    let clusters = cluster_item(&item, &oracle)?;
    for (text, c) in texts.iter().zip(&clusters.assignment) {
        println!("cluster {c}: {text}");
    }
    let (k, c) = (item.k(), clusters.num_clusters);
    println!("{c} clusters, {} NLI queries (bound {})", oracle.calls(), 2 * k * c);

    anyhow::ensure!(clusters.assignment == vec![0, 0, 1, 0, 2]);
    anyhow::ensure!(oracle.calls() <= 2 * k * c);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
