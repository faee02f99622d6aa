//! `novelty`: simulate corpora, run detectors, score them and run benchmark grids.
//!
//! Exit codes: 0 on success, 1 when the configuration or an input is unusable,
//! 2 when a grid finished but some of its cells failed.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use novelty_core::bench::{
    default_historic_days, failures, holdout_inject, rank_and_auc, run_experiment,
    write_holdout_table, write_outputs, BenchError, ExperimentConfig, Preset, ResultCell,
};
use novelty_core::corpus::{
    ingest_raw, read_corpus, read_corpus_with_truth, write_corpus, write_truth, IngestOptions,
    LabeledCorpus,
};
use novelty_core::detectors::{read_reports_jsonl, run_detector, write_reports_jsonl};
use novelty_core::evaluation::{evaluate, write_curves_csv, AggregationWindow};
use novelty_core::simulator::{generate_corpus, ScenarioSpec};
use novelty_core::{DetectorConfig, DetectorKind};

#[derive(Parser)]
#[command(
    name = "novelty",
    version,
    about = "Novelty detection benchmark for text streams"
)]
struct Cli {
    /// Experiment config (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed override: the simulator seed, and the only seed of a grid.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for grids (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenario corpora with their truth and metadata files.
    Simulate(SimulateArgs),
    /// Stream a corpus through detectors and write their day reports.
    Detect(DetectArgs),
    /// Score day reports against a corpus's ground truth.
    Evaluate(EvaluateArgs),
    /// Run the scenario x detector x seed grid.
    Bench,
    /// Run a one-parameter sweep, from a preset or the config's `[sweep]`.
    Sweep(SweepArgs),
    /// Convert raw timestamped text into the corpus format.
    Ingest(IngestArgs),
    /// Hold a category out of the early days of a labeled corpus.
    Holdout(HoldoutArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario ids to generate (default: every scenario in the config).
    #[arg(long = "scenario")]
    scenarios: Vec<u32>,
    /// Also write a corpus with no novel topic (scenario 0).
    #[arg(long)]
    null: bool,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Detectors to run by name (default: every detector in the config).
    #[arg(long = "detector")]
    detectors: Vec<DetectorKind>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    reports: PathBuf,
    /// Aggregate over the whole run instead of the post-onset days.
    #[arg(long)]
    whole_run: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    preset: Option<Preset>,
}

#[derive(Args)]
struct IngestArgs {
    /// Lines of `doc_id<TAB>timestamp<TAB>label<TAB>text`.
    input: PathBuf,
    #[arg(long)]
    lowercase: bool,
    /// Calendar date of day 0 (YYYY-MM-DD); defaults to the earliest document.
    #[arg(long)]
    origin: Option<NaiveDate>,
}

#[derive(Args)]
struct HoldoutArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Label of the category to hold out.
    #[arg(long)]
    category: String,
    /// Days the category is removed from (default: first quarter of the span).
    #[arg(long)]
    historic_days: Option<u32>,
    /// Also rank documents with every configured detector and write AUCs.
    #[arg(long)]
    auc: bool,
}

/// Errors that map to exit code 1.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(e: impl std::fmt::Display) -> anyhow::Error {
    ConfigError(e.to_string()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{failed} cell(s) failed; see cells.csv");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Runs the command; returns the number of failed cells.
fn run(cli: Cli) -> Result<usize> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p).map_err(config_error)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.simulator.seed = seed;
        config.seeds = vec![seed];
    }
    for w in config.validate().map_err(config_error)? {
        eprintln!("warning: {w}");
    }
    let out = cli.out.clone().unwrap_or_else(|| config.output_dir.clone());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    match cli.command {
        Command::Simulate(args) => simulate(&config, &args, &out).map(|_| 0),
        Command::Detect(args) => detect(&config, &args, &out).map(|_| 0),
        Command::Evaluate(args) => evaluate_reports(&config, &args, &out).map(|_| 0),
        Command::Bench => grid(&config, cli.jobs, &out),
        Command::Sweep(args) => {
            let cfg = match args.preset {
                Some(p) => p.apply(&config),
                None if config.sweep.is_some() => config,
                None => {
                    return Err(config_error(
                        "no --preset given and the config has no [sweep]",
                    ))
                }
            };
            grid(&cfg, cli.jobs, &out)
        }
        Command::Ingest(args) => ingest(&args, &out).map(|_| 0),
        Command::Holdout(args) => holdout(&config, &args, &out).map(|_| 0),
    }
}

fn bench_error(e: BenchError) -> anyhow::Error {
    match e {
        BenchError::Config(_) | BenchError::Sim(_) => config_error(e),
        other => other.into(),
    }
}

fn grid(config: &ExperimentConfig, jobs: usize, out: &Path) -> Result<usize> {
    let cells: Vec<ResultCell> = run_experiment(config, jobs).map_err(bench_error)?;
    write_outputs(&cells, out)?;
    let failed = failures(&cells);
    println!(
        "{} cells ({} failed); results in {}",
        cells.len(),
        failed,
        out.display()
    );
    Ok(failed)
}

fn simulate(config: &ExperimentConfig, args: &SimulateArgs, out: &Path) -> Result<()> {
    let horizon = config.simulator.horizon_days;
    let mut specs: Vec<ScenarioSpec> = config.scenarios.resolve(horizon).map_err(bench_error)?;
    if !args.scenarios.is_empty() {
        for id in &args.scenarios {
            if !specs.iter().any(|s| s.id == *id) {
                return Err(config_error(format!("no scenario with id {id}")));
            }
        }
        specs.retain(|s| args.scenarios.contains(&s.id));
    }
    if args.null {
        specs.push(ScenarioSpec::null(horizon));
    }
    for spec in &specs {
        let sim = generate_corpus(&config.simulator, spec).map_err(config_error)?;
        let stem = out.join(format!("s{}", spec.id));
        let corpus_path = stem.with_extension("corpus.tsv");
        write_corpus(&sim.corpus, &corpus_path)?;
        if let Some(truth) = sim.corpus.ground_truth() {
            write_truth(
                truth,
                sim.corpus.vocabulary(),
                stem.with_extension("truth.json"),
            )?;
        }
        let meta = BufWriter::new(File::create(stem.with_extension("meta.json"))?);
        serde_json::to_writer_pretty(meta, &sim.metadata)?;
        println!(
            "scenario {}: {} documents ({} novel), KL {:.4} -> {}",
            spec.id,
            sim.metadata.documents,
            sim.metadata.novel_documents,
            sim.metadata.kl_symmetric,
            corpus_path.display()
        );
    }
    Ok(())
}

fn detector_configs(config: &ExperimentConfig, kinds: &[DetectorKind]) -> Vec<DetectorConfig> {
    if kinds.is_empty() {
        return config.detectors.clone();
    }
    kinds
        .iter()
        .map(|k| {
            config
                .detectors
                .iter()
                .find(|d| d.kind() == *k)
                .cloned()
                .unwrap_or_else(|| k.default_config())
        })
        .collect()
}

/// File name without the given suffixes, e.g. `s5` for `s5.corpus.tsv`.
fn file_stem(path: &Path, suffixes: &[&str]) -> String {
    let mut name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    for s in suffixes {
        if let Some(stripped) = name.strip_suffix(s) {
            name = stripped.to_string();
        }
    }
    name
}

fn detect(config: &ExperimentConfig, args: &DetectArgs, out: &Path) -> Result<()> {
    let corpus =
        read_corpus(&args.corpus).with_context(|| format!("reading {}", args.corpus.display()))?;
    let seed = config.seeds.first().copied().unwrap_or(0);
    let stem = file_stem(&args.corpus, &[".tsv", ".corpus"]);
    for det in detector_configs(config, &args.detectors) {
        let mut d = det
            .build(corpus.vocabulary().len(), seed)
            .map_err(config_error)?;
        let reports = run_detector(d.as_mut(), &corpus)?;
        let path = out.join(format!("{stem}.{}.reports.jsonl", det.kind().name()));
        write_reports_jsonl(
            &reports,
            corpus.vocabulary(),
            BufWriter::new(File::create(&path)?),
        )?;
        let alerts: usize = reports.iter().map(|r| r.alerts.len()).sum();
        println!(
            "{}: {} days, {alerts} alerts -> {}",
            det.kind(),
            reports.len(),
            path.display()
        );
    }
    Ok(())
}

fn evaluate_reports(config: &ExperimentConfig, args: &EvaluateArgs, out: &Path) -> Result<()> {
    let corpus = read_corpus_with_truth(&args.corpus, &args.truth)
        .with_context(|| format!("reading {}", args.corpus.display()))?;
    let reports = read_reports_jsonl(File::open(&args.reports)?, corpus.vocabulary())
        .with_context(|| format!("reading {}", args.reports.display()))?;
    let mut options = config.evaluation;
    if args.whole_run {
        options.window = AggregationWindow::WholeRun;
    }
    let report = evaluate(&reports, &corpus, &options)?;
    let stem = file_stem(&args.reports, &[".jsonl", ".reports"]);
    let curves = out.join(format!("{stem}.curves.csv"));
    write_curves_csv(File::create(&curves)?, &report.per_day)?;
    let json = out.join(format!("{stem}.eval.json"));
    serde_json::to_writer_pretty(BufWriter::new(File::create(&json)?), &report)?;
    let (w, d) = (report.micro.words, report.micro.docs);
    println!(
        "words P {:.3} R {} F {:.3} | docs P {:.3} R {} F {:.3} | delay {} | false alerts {} | AUC {}",
        w.precision,
        opt(w.recall),
        w.f_measure,
        d.precision,
        opt(d.recall),
        d.f_measure,
        report
            .alert_delay_days
            .map_or_else(|| "-".into(), |x| x.to_string()),
        report.false_alerts,
        opt(report.auc),
    );
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

fn ingest(args: &IngestArgs, out: &Path) -> Result<()> {
    let options = IngestOptions {
        lowercase: args.lowercase,
        origin: args.origin,
    };
    let file =
        File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let (raw, skipped) = ingest_raw(file, &options)?;
    if raw.is_empty() {
        bail!("{} holds no documents", args.input.display());
    }
    let corpus = LabeledCorpus::from_raw(raw, None)?;
    let path = out.join("corpus.tsv");
    write_corpus(&corpus, &path)?;
    println!(
        "{} documents over {} days, {} terms ({skipped} empty records skipped) -> {}",
        corpus.num_documents(),
        corpus.batches().len(),
        corpus.vocabulary().len(),
        path.display()
    );
    Ok(())
}

fn holdout(config: &ExperimentConfig, args: &HoldoutArgs, out: &Path) -> Result<()> {
    let corpus =
        read_corpus(&args.corpus).with_context(|| format!("reading {}", args.corpus.display()))?;
    let historic = args
        .historic_days
        .unwrap_or_else(|| default_historic_days(&corpus));
    let injected = holdout_inject(&corpus, &args.category, historic).map_err(bench_error)?;
    let truth = injected
        .ground_truth()
        .ok_or_else(|| anyhow!("injection produced no ground truth"))?;
    write_corpus(&injected, out.join("holdout.corpus.tsv"))?;
    write_truth(truth, injected.vocabulary(), out.join("holdout.truth.json"))?;
    println!(
        "held `{}` out of days before {historic}: {} novel documents from day {}",
        args.category,
        truth.novel_doc_ids.len(),
        truth.onset_day
    );
    if args.auc {
        let seed = config.seeds.first().copied().unwrap_or(0);
        let rows = config
            .detectors
            .iter()
            .map(|d| rank_and_auc(&injected, d, historic, seed))
            .collect::<Result<Vec<_>, _>>()
            .map_err(bench_error)?;
        for r in &rows {
            println!("{}: AUC {}", r.detector, opt(r.auc));
        }
        write_holdout_table(&rows, File::create(out.join("holdout_auc.csv"))?)?;
    }
    Ok(())
}
