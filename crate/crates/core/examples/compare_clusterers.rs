// Cleanse AUROC and the correct/incorrect cluster-count gap under three
// clusterers: the generating oracle, "everything entails", and "nothing
// entails".
//
// ```bash
// cargo run -p cleanse --example compare_clusterers
// ```

use cleanse::model::EntailmentLabel;
use cleanse::nli::{ConstantOracle, EntailmentOracle, FileOracle};
use cleanse::pipeline::{compare_clusterers, render_clusterers};
use cleanse::synth::{generate, SynthConfig};

pub fn run_example() -> anyhow::Result<()> {
    let data = generate(&SynthConfig {
        n_items: 300,
        center_separation: 0.5,
        ..SynthConfig::default()
    })?;
    let oracles: Vec<(String, Box<dyn EntailmentOracle>)> = vec![
        ("truth".into(), Box::new(FileOracle::new(data.oracle.clone()))),
        (
            "merge-all".into(),
            Box::new(ConstantOracle(EntailmentLabel::Entailment)),
        ),
        ("split-all".into(), Box::new(ConstantOracle(EntailmentLabel::Neutral))),
    ];
    let rows = compare_clusterers(&data.items, &oracles, 0.7, 1.0, 2)?;
    print!("{}", render_clusterers(&rows));

    // merging everything makes every Cleanse 1 and every gap 0
    anyhow::ensure!(rows[1].gap == Some(0.0));
    anyhow::ensure!(rows[0].gap.unwrap_or(0.0) > 0.5);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
