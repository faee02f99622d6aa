//! Experiment grids over scenarios, detectors, seeds and sweep values.
//!
//! A run expands an [`ExperimentConfig`] into cells, generates each distinct
//! corpus once, streams it through every detector and evaluates the reports.
//! Cells run in parallel and are sorted by key before anything is written, so
//! outputs do not depend on the number of jobs.

mod holdout;
mod output;
mod sweep;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::detectors::{run_detector, DetectError, DetectorConfig, DetectorKind};
use crate::evaluation::{evaluate, EvalOptions, EvalReport};
use crate::par::*;
use crate::simulator::{
    generate_corpus, scenario_catalog, ScenarioSpec, SimError, SimulatorConfig,
};

pub use holdout::{
    default_historic_days, holdout_inject, rank_and_auc, write_holdout_table, HoldoutAuc,
};
pub use output::{median, summarize_sweep, write_outputs, write_summary, SweepRow};
pub use sweep::{apply_sweep, Preset, SweepSpec};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error("holdout: {0}")]
    Holdout(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Either the built-in catalog (`"all9"`) or explicit scenario tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scenarios {
    Named(String),
    List(Vec<ScenarioSpec>),
}

impl Default for Scenarios {
    fn default() -> Self {
        Scenarios::Named("all9".into())
    }
}

impl Scenarios {
    pub fn resolve(&self, horizon: u32) -> Result<Vec<ScenarioSpec>, BenchError> {
        match self {
            Scenarios::Named(n) if n == "all9" => Ok(scenario_catalog(horizon)),
            Scenarios::Named(n) => Err(BenchError::Config(format!(
                "unknown scenario set `{n}` (expected \"all9\" or a list)"
            ))),
            Scenarios::List(l) => Ok(l.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub simulator: SimulatorConfig,
    pub scenarios: Scenarios,
    pub detectors: Vec<DetectorConfig>,
    pub seeds: Vec<u64>,
    pub sweep: Option<SweepSpec>,
    pub evaluation: EvalOptions,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            simulator: SimulatorConfig::default(),
            scenarios: Scenarios::default(),
            detectors: DetectorKind::ALL
                .iter()
                .map(|k| k.default_config())
                .collect(),
            seeds: vec![0],
            sweep: None,
            evaluation: EvalOptions::default(),
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks everything that can be checked before a run; returns warnings.
    pub fn validate(&self) -> Result<Vec<String>, BenchError> {
        let cfg_err = |e: &dyn std::fmt::Display| BenchError::Config(e.to_string());
        if self.seeds.is_empty() || self.detectors.is_empty() {
            return Err(BenchError::Config(
                "need at least one seed and one detector".into(),
            ));
        }
        let scenarios = self.scenarios.resolve(self.simulator.horizon_days)?;
        if scenarios.is_empty() {
            return Err(BenchError::Config("need at least one scenario".into()));
        }
        let mut warnings = Vec::new();
        for variant in self.variants()? {
            variant
                .config
                .simulator
                .validate()
                .map_err(|e| cfg_err(&e))?;
            for s in variant
                .config
                .scenarios
                .resolve(self.simulator.horizon_days)?
            {
                s.validate().map_err(|e| cfg_err(&e))?;
            }
            for d in &variant.config.detectors {
                for w in d.validate().map_err(|e| cfg_err(&e))? {
                    if !warnings.contains(&w) {
                        warnings.push(w);
                    }
                }
            }
        }
        Ok(warnings)
    }

    /// One concrete config per sweep value (or just `self`), with the
    /// scenario list expanded.
    pub fn variants(&self) -> Result<Vec<Variant>, BenchError> {
        let mut base = self.clone();
        base.scenarios = Scenarios::List(self.scenarios.resolve(self.simulator.horizon_days)?);
        base.sweep = None;
        match &self.sweep {
            None => Ok(vec![Variant {
                sweep_value: None,
                config: base,
            }]),
            Some(sweep) => sweep
                .values
                .iter()
                .map(|v| {
                    Ok(Variant {
                        sweep_value: Some(sweep::value_label(v)),
                        config: apply_sweep(&base, &sweep.parameter, v)?,
                    })
                })
                .collect(),
        }
    }
}

/// A fully resolved config for one sweep value.
#[derive(Debug, Clone)]
pub struct Variant {
    pub sweep_value: Option<String>,
    pub config: ExperimentConfig,
}

/// Identifies one cell; cells sort by this key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub sweep_index: usize,
    pub scenario_id: u32,
    pub detector_index: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultCell {
    pub key: CellKey,
    pub scenario_id: u32,
    pub detector: String,
    pub seed: u64,
    pub sweep_value: Option<String>,
    pub outcome: Result<EvalReport, String>,
    /// Detection plus evaluation, excluding corpus generation.
    pub runtime_secs: f64,
}

impl ResultCell {
    pub fn report(&self) -> Option<&EvalReport> {
        self.outcome.as_ref().ok()
    }
}

struct CorpusJob {
    sweep_index: usize,
    sweep_value: Option<String>,
    simulator: SimulatorConfig,
    scenario: ScenarioSpec,
    seed: u64,
    detectors: Vec<DetectorConfig>,
    evaluation: EvalOptions,
}

/// Runs every cell of the grid on up to `jobs` threads (0 = all cores).
///
/// Configuration problems are errors; failures inside a cell are recorded in
/// that cell and the run carries on.
pub fn run_experiment(
    config: &ExperimentConfig,
    jobs: usize,
) -> Result<Vec<ResultCell>, BenchError> {
    config.validate()?;
    let mut corpus_jobs = Vec::new();
    for (sweep_index, variant) in config.variants()?.into_iter().enumerate() {
        let cfg = variant.config;
        for scenario in cfg.scenarios.resolve(cfg.simulator.horizon_days)? {
            for &seed in &cfg.seeds {
                corpus_jobs.push(CorpusJob {
                    sweep_index,
                    sweep_value: variant.sweep_value.clone(),
                    simulator: SimulatorConfig {
                        seed,
                        ..cfg.simulator.clone()
                    },
                    scenario: scenario.clone(),
                    seed,
                    detectors: cfg.detectors.clone(),
                    evaluation: cfg.evaluation,
                });
            }
        }
    }
    let grouped: Vec<Vec<ResultCell>> = with_jobs(jobs, || {
        corpus_jobs.par_iter().map(run_corpus_job).collect()
    });
    let mut cells: Vec<ResultCell> = grouped.into_iter().flatten().collect();
    cells.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(cells)
}

fn run_corpus_job(job: &CorpusJob) -> Vec<ResultCell> {
    let generated = generate_corpus(&job.simulator, &job.scenario);
    job.detectors
        .iter()
        .enumerate()
        .map(|(detector_index, det)| {
            let start = Instant::now();
            let outcome = match &generated {
                Err(e) => Err(format!("corpus generation: {e}")),
                Ok(sim) => run_cell(det, &sim.corpus, job.seed, &job.evaluation),
            };
            ResultCell {
                key: CellKey {
                    sweep_index: job.sweep_index,
                    scenario_id: job.scenario.id,
                    detector_index,
                    seed: job.seed,
                },
                scenario_id: job.scenario.id,
                detector: det.kind().name().to_string(),
                seed: job.seed,
                sweep_value: job.sweep_value.clone(),
                outcome,
                runtime_secs: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

/// Streams `corpus` through a fresh detector and evaluates the reports.
pub fn run_cell(
    detector: &DetectorConfig,
    corpus: &crate::corpus::LabeledCorpus,
    seed: u64,
    options: &EvalOptions,
) -> Result<EvalReport, String> {
    let mut d = detector
        .build(corpus.vocabulary().len(), seed)
        .map_err(|e| e.to_string())?;
    let reports = run_detector(d.as_mut(), corpus).map_err(|e| e.to_string())?;
    evaluate(&reports, corpus, options).map_err(|e| e.to_string())
}

/// Number of cells that failed.
pub fn failures(cells: &[ResultCell]) -> usize {
    cells.iter().filter(|c| c.outcome.is_err()).count()
}
