use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cleanse::model::{parse_dataset, parse_scores, write_dataset, write_entailment_oracle, write_jsonl};
use cleanse::nli::{EntailmentOracle, FileOracle, NLI_URL_ENV};
use cleanse::pipeline::{
    cluster_dataset, compare_clusterers, ensure_dir, parse_methods, parse_thresholds, render_clusterers, score_dataset,
    write_json, write_text, EvalReport, PipelineError, RunConfig, SweepReport,
};
use cleanse::synth::{generate, CountDistribution, SynthConfig};

#[derive(Parser)]
#[command(name = "cleanse", version, about = "Score hallucination risk of sampled LLM answers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every item of a dataset; writes <out>/scores.jsonl
    Score(ScoreArgs),
    /// Summarize a scores file as AUROC / PCC per method
    Eval(EvalArgs),
    /// AUROC per method across correctness thresholds
    Sweep(SweepArgs),
    /// Cleanse AUROC and cluster-count gap under several oracles
    CompareClusterers(CompareArgs),
    /// Dump cluster assignments per item
    Cluster(ClusterArgs),
    /// Write a synthetic dataset, oracle, and ground truth
    Synth(SynthArgs),
}

#[derive(Args)]
struct OracleArgs {
    /// entailment oracle file
    #[arg(long)]
    oracle: Option<PathBuf>,
    /// NLI service base URL (falls back to CLEANSE_NLI_URL)
    #[arg(long)]
    nli_url: Option<String>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    oracle: OracleArgs,
    #[arg(long, default_value_t = 0.7)]
    rouge_threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    rouge_beta: f64,
    /// comma-separated subset of cleanse,cosine_score,lexical_similarity,perplexity,ln_entropy
    #[arg(
        long,
        default_value = "cleanse,cosine_score,lexical_similarity,perplexity,ln_entropy"
    )]
    methods: String,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    rouge_threshold: f64,
    #[arg(
        long,
        default_value = "perplexity,ln_entropy,lexical_similarity,cosine_score,cleanse"
    )]
    methods: String,
    /// directory for summary.json and summary.txt
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, default_value = "0.5,0.7,0.9")]
    thresholds: String,
    #[arg(
        long,
        default_value = "perplexity,ln_entropy,lexical_similarity,cosine_score,cleanse"
    )]
    methods: String,
    /// directory for sweep.json and sweep.csv
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// oracle files, one per clusterer (at least two)
    #[arg(long = "oracle", required = true)]
    oracles: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.7)]
    rouge_threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    rouge_beta: f64,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// directory for clusterers.json
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    oracle: OracleArgs,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// directory for clusters.jsonl; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    n_items: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 32)]
    d: usize,
    #[arg(long, default_value_t = 0.05)]
    within_noise: f64,
    #[arg(long, default_value_t = 3.0)]
    noise_spread: f64,
    #[arg(long, default_value_t = 0.1)]
    center_separation: f64,
    #[arg(long, default_value_t = 0.5)]
    p_correct: f64,
    /// cluster counts for correct items, drawn uniformly
    #[arg(long, default_value = "1")]
    correct_clusters: String,
    /// cluster counts for incorrect items, drawn uniformly
    #[arg(long, default_value = "2")]
    incorrect_clusters: String,
}

fn counts(list: &str) -> Result<CountDistribution, PipelineError> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map(|c| (c, 1.0))
                .map_err(|e| PipelineError::Config(format!("bad cluster count {s:?}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(CountDistribution)
}

fn open_oracle(args: &OracleArgs) -> Result<Box<dyn EntailmentOracle>, PipelineError> {
    RunConfig::resolve_oracle(
        args.oracle.clone(),
        args.nli_url.clone(),
        std::env::var(NLI_URL_ENV).ok(),
    )?
    .ok_or_else(|| PipelineError::Config(format!("one of --oracle, --nli-url or {NLI_URL_ENV} is required")))?
    .open()
}

fn maybe_write(dir: Option<&Path>, f: impl FnOnce(&Path) -> Result<(), PipelineError>) -> Result<(), PipelineError> {
    match dir {
        Some(d) => {
            ensure_dir(d)?;
            f(d)
        }
        None => Ok(()),
    }
}

fn run(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Score(a) => {
            let config = RunConfig {
                dataset_path: Some(a.dataset.clone()),
                rouge_threshold: a.rouge_threshold,
                rouge_beta: a.rouge_beta,
                methods: parse_methods(&a.methods)?,
                parallelism: a.parallelism,
                output_dir: Some(a.out.clone()),
                ..RunConfig::default()
            };
            config.validate()?;
            let oracle = open_oracle(&a.oracle)?;
            let items = parse_dataset(&a.dataset, None)?;
            let scores = score_dataset(&items, oracle.as_ref(), &config.score_options(), config.parallelism)?;
            let failed = scores.iter().filter(|s| s.error.is_some()).count();
            ensure_dir(&a.out)?;
            let path = a.out.join("scores.jsonl");
            write_jsonl(&path, &scores)?;
            eprintln!(
                "scored {} items ({failed} with errors) -> {}",
                scores.len(),
                path.display()
            );
        }
        Command::Eval(a) => {
            let scores = parse_scores(&a.scores)?;
            let report = EvalReport::build(&scores, &parse_methods(&a.methods)?, a.rouge_threshold)?;
            let table = report.render();
            print!("{table}");
            maybe_write(a.out.as_deref(), |d| {
                write_json(&d.join("summary.json"), &report)?;
                write_text(&d.join("summary.txt"), &table)
            })?;
        }
        Command::Sweep(a) => {
            let scores = parse_scores(&a.scores)?;
            let report = SweepReport::build(&scores, &parse_methods(&a.methods)?, &parse_thresholds(&a.thresholds)?)?;
            print!("{}", report.render());
            maybe_write(a.out.as_deref(), |d| {
                write_json(&d.join("sweep.json"), &report)?;
                write_text(&d.join("sweep.csv"), &report.csv())
            })?;
        }
        Command::CompareClusterers(a) => {
            if a.oracles.len() < 2 {
                return Err(PipelineError::Config(
                    "compare-clusterers needs at least two --oracle files".into(),
                ));
            }
            let items = parse_dataset(&a.dataset, None)?;
            let oracles = a
                .oracles
                .iter()
                .map(|p| {
                    let name = p
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    Ok((name, Box::new(FileOracle::from_path(p)?) as Box<dyn EntailmentOracle>))
                })
                .collect::<Result<Vec<_>, PipelineError>>()?;
            let rows = compare_clusterers(&items, &oracles, a.rouge_threshold, a.rouge_beta, a.parallelism)?;
            print!("{}", render_clusterers(&rows));
            maybe_write(a.out.as_deref(), |d| write_json(&d.join("clusterers.json"), &rows))?;
        }
        Command::Cluster(a) => {
            let oracle = open_oracle(&a.oracle)?;
            let items = parse_dataset(&a.dataset, None)?;
            let records = cluster_dataset(&items, oracle.as_ref(), a.parallelism.max(1))?;
            match a.out {
                Some(d) => {
                    ensure_dir(&d)?;
                    write_jsonl(d.join("clusters.jsonl"), &records)?;
                }
                None => {
                    for r in &records {
                        println!("{}", serde_json::to_string(r).expect("records serialize"));
                    }
                }
            }
        }
        Command::Synth(a) => {
            let config = SynthConfig {
                n_items: a.n_items,
                k: a.k,
                d: a.d,
                n_clusters_correct: counts(&a.correct_clusters)?,
                n_clusters_incorrect: counts(&a.incorrect_clusters)?,
                within_noise: a.within_noise,
                noise_spread: a.noise_spread,
                center_separation: a.center_separation,
                p_correct: a.p_correct,
                seed: a.seed,
                ..SynthConfig::default()
            };
            let data = generate(&config)?;
            ensure_dir(&a.out)?;
            write_dataset(a.out.join("dataset.jsonl"), &data.items)?;
            write_entailment_oracle(a.out.join("oracle.jsonl"), &data.oracle)?;
            write_jsonl(a.out.join("truth.jsonl"), &data.truth)?;
            eprintln!("wrote {} items to {}", data.items.len(), a.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
