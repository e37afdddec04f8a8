// AUROC of every method as the Rouge-L correctness threshold moves, and the
// Cleanse advantage over each baseline.
//
// ```bash
// cargo run -p cleanse --example threshold_sweep
// ```

use cleanse::evaluation::{Method, DEFAULT_SWEEP_THRESHOLDS};
use cleanse::nli::FileOracle;
use cleanse::pipeline::{score_dataset, ScoreOptions, SweepReport};
use cleanse::synth::{generate, SynthConfig};

pub fn run_example() -> anyhow::Result<()> {
    let data = generate(&SynthConfig {
        n_items: 300,
        seed: 11,
        ..SynthConfig::default()
    })?;
    let scores = score_dataset(&data.items, &FileOracle::new(data.oracle), &ScoreOptions::default(), 2)?;
    let report = SweepReport::build(&scores, &Method::ALL, &DEFAULT_SWEEP_THRESHOLDS)?;
    print!("{}", report.render());
    print!("{}", report.csv());
    anyhow::ensure!(report.table.thresholds.len() == 3);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
