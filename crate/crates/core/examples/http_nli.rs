// Clustering through the HTTP NLI client against an in-process stub service.
// Point `HttpOracleConfig::new` at a real server to use a model instead.
//
// ```bash
// cargo run -p cleanse --example http_nli
// ```

use std::time::Duration;

use cleanse::clustering::cluster_item;
use cleanse::model::{EntailmentLabel, GenerationSample, QAItem};
use cleanse::nli::stub::{StubNliServer, StubResponse};
use cleanse::nli::{HttpOracle, HttpOracleConfig, NliVerdict};

/// Entailment when both texts mention the same city.
fn toy_nli(premise: &str, hypothesis: &str) -> NliVerdict {
    let city = |s: &str| {
        ["paris", "lyon", "nice"]
            .into_iter()
            .find(|c| s.to_lowercase().contains(c))
    };
    if city(premise) == city(hypothesis) {
        NliVerdict::from_probs([0.9, 0.08, 0.02])
    } else {
        NliVerdict::from_probs([0.05, 0.15, 0.8])
    }
}

pub fn run_example() -> anyhow::Result<()> {
    let server = StubNliServer::start(|q, _| StubResponse::verdict(&toy_nli(&q.premise, &q.hypothesis)))?;
    let oracle = HttpOracle::new(HttpOracleConfig {
        timeout: Duration::from_secs(2),
        ..HttpOracleConfig::new(server.url())
    });

    let item = QAItem {
        id: "q".into(),
        question: "Which city hosts the Louvre?".into(),
        gold_answers: vec!["Paris".into()],
        most_likely: GenerationSample::new("Paris", vec![-0.2], vec![1.0, 0.0]),
        samples: ["Paris", "Lyon", "in Paris", "Nice", "Lyon, France"]
            .iter()
            .map(|t| GenerationSample::new(*t, vec![-0.5], vec![1.0, 0.2]))
            .collect(),
    };
    let clusters = cluster_item(&item, &oracle)?;
    println!(
        "assignment {:?} via {} requests to {}",
        clusters.assignment,
        server.requests(),
        oracle.endpoint()
    );

    anyhow::ensure!(clusters.assignment == vec![0, 1, 0, 2, 1]);
    anyhow::ensure!(toy_nli("Paris", "Lyon").label == EntailmentLabel::Contradiction);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
