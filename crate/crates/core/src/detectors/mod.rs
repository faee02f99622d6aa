//! Streaming novelty detectors.
//!
//! Every detector is a single-writer state machine fed one [`DayBatch`] at a
//! time through [`Detector::observe`]. It only ever sees the past: the report
//! for day `t` is computed from batches `<= t`.
//!
//! All five detectors share the [`DayReport`] shape so the evaluator can score
//! words, documents and alerts uniformly. Rankings are score-descending with
//! ties broken by ascending id, and flagged lists are always a prefix of that
//! ranking.

mod burstiness;
mod docfreq;
mod knn;
mod olda;
mod report;
mod tfidf;
mod topicsketch;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DayBatch, LabeledCorpus, TermId};

pub use burstiness::{
    aggregate, burstiness_score, Aggregation, BurstinessConfig, BurstinessDetector,
};
pub use docfreq::{df_ratio, jaccard_cluster, jaccard_distance, DfConfig, DfDetector};
pub use knn::{KnnIndex, SparseVector};
pub use olda::{OldaConfig, OldaDetector};
pub use report::{read_reports_jsonl, write_reports_jsonl, Alert, DayReport};
pub use tfidf::{TfidfConfig, TfidfDetector};
pub use topicsketch::{SketchConfig, TopicSketchConfig, TopicSketchDetector};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("batch for day {got} arrived after day {last}; days must strictly increase")]
    OutOfOrder { last: u32, got: u32 },
    #[error("invalid detector parameter: {0}")]
    InvalidConfig(String),
    #[error("term id {term} outside a vocabulary of {vocab_size}")]
    TermOutOfRange { term: TermId, vocab_size: usize },
    #[error("report stream: {0}")]
    Report(String),
}

/// One detector's per-day state machine.
pub trait Detector: Send {
    fn kind(&self) -> DetectorKind;

    /// Consumes the next day and returns its report.
    fn observe(&mut self, batch: &DayBatch) -> Result<DayReport, DetectError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    TfidfKnn,
    Burstiness,
    Df,
    Olda,
    Topicsketch,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::TfidfKnn,
        DetectorKind::Burstiness,
        DetectorKind::Df,
        DetectorKind::Olda,
        DetectorKind::Topicsketch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::TfidfKnn => "tfidf_knn",
            DetectorKind::Burstiness => "burstiness",
            DetectorKind::Df => "df",
            DetectorKind::Olda => "olda",
            DetectorKind::Topicsketch => "topicsketch",
        }
    }

    pub fn default_config(self) -> DetectorConfig {
        match self {
            DetectorKind::TfidfKnn => DetectorConfig::TfidfKnn(TfidfConfig::default()),
            DetectorKind::Burstiness => DetectorConfig::Burstiness(BurstinessConfig::default()),
            DetectorKind::Df => DetectorConfig::Df(DfConfig::default()),
            DetectorKind::Olda => DetectorConfig::Olda(OldaConfig::default()),
            DetectorKind::Topicsketch => DetectorConfig::Topicsketch(TopicSketchConfig::default()),
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = DetectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| DetectError::InvalidConfig(format!("unknown detector `{s}`")))
    }
}

/// Parameters of one detector, tagged by `name` in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DetectorConfig {
    TfidfKnn(TfidfConfig),
    Burstiness(BurstinessConfig),
    Df(DfConfig),
    Olda(OldaConfig),
    Topicsketch(TopicSketchConfig),
}

impl DetectorConfig {
    pub fn kind(&self) -> DetectorKind {
        match self {
            DetectorConfig::TfidfKnn(_) => DetectorKind::TfidfKnn,
            DetectorConfig::Burstiness(_) => DetectorKind::Burstiness,
            DetectorConfig::Df(_) => DetectorKind::Df,
            DetectorConfig::Olda(_) => DetectorKind::Olda,
            DetectorConfig::Topicsketch(_) => DetectorKind::Topicsketch,
        }
    }

    /// Checks the parameters; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, DetectError> {
        match self {
            DetectorConfig::TfidfKnn(c) => c.validate().map(|_| Vec::new()),
            DetectorConfig::Burstiness(c) => c.validate().map(|_| Vec::new()),
            DetectorConfig::Df(c) => c.validate().map(|_| Vec::new()),
            DetectorConfig::Olda(c) => c.validate(),
            DetectorConfig::Topicsketch(c) => c.validate().map(|_| Vec::new()),
        }
    }

    /// Builds a fresh detector for a vocabulary of `vocab_size` terms.
    /// `seed` only matters for the sampling-based detector (OLDA).
    pub fn build(&self, vocab_size: usize, seed: u64) -> Result<Box<dyn Detector>, DetectError> {
        Ok(match self {
            DetectorConfig::TfidfKnn(c) => Box::new(TfidfDetector::new(c.clone(), vocab_size)?),
            DetectorConfig::Burstiness(c) => {
                Box::new(BurstinessDetector::new(c.clone(), vocab_size)?)
            }
            DetectorConfig::Df(c) => Box::new(DfDetector::new(c.clone(), vocab_size)?),
            DetectorConfig::Olda(c) => Box::new(OldaDetector::new(c.clone(), vocab_size, seed)?),
            DetectorConfig::Topicsketch(c) => {
                Box::new(TopicSketchDetector::new(c.clone(), vocab_size)?)
            }
        })
    }

    /// The kNN neighbour count, for detectors that have one.
    pub fn knn_k(&self) -> Option<usize> {
        match self {
            DetectorConfig::TfidfKnn(c) => Some(c.k),
            DetectorConfig::Df(c) => Some(c.k),
            _ => None,
        }
    }
}

/// Streams the whole corpus (empty days included) through `detector`.
pub fn run_detector(
    detector: &mut dyn Detector,
    corpus: &LabeledCorpus,
) -> Result<Vec<DayReport>, DetectError> {
    corpus
        .stream()
        .map(|batch| detector.observe(&batch))
        .collect()
}

/// Enforces strictly increasing days and reports how many days elapsed.
#[derive(Debug, Clone, Default)]
pub(crate) struct DayClock {
    last: Option<u32>,
}

impl DayClock {
    /// Days since the previous batch (1 for consecutive days; 1 for the first).
    pub(crate) fn advance(&mut self, day: u32) -> Result<u32, DetectError> {
        let elapsed = match self.last {
            Some(last) if day <= last => return Err(DetectError::OutOfOrder { last, got: day }),
            Some(last) => day - last,
            None => 1,
        };
        self.last = Some(day);
        Ok(elapsed)
    }
}

pub(crate) fn check_terms(batch: &DayBatch, vocab_size: usize) -> Result<(), DetectError> {
    for d in &batch.documents {
        if let Some(&term) = d.tokens.iter().find(|&&t| t as usize >= vocab_size) {
            return Err(DetectError::TermOutOfRange { term, vocab_size });
        }
    }
    Ok(())
}

/// Sorts by score descending, ties by ascending key.
pub(crate) fn rank<K: Ord + Clone>(scores: impl IntoIterator<Item = (K, f64)>) -> Vec<(K, f64)> {
    let mut v: Vec<(K, f64)> = scores.into_iter().collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

/// Keys of the ranked entries passing `keep`, truncated to `limit`.
pub(crate) fn top<K: Clone>(
    ranked: &[(K, f64)],
    limit: usize,
    keep: impl Fn(f64) -> bool,
) -> Vec<K> {
    ranked
        .iter()
        .take_while(|(_, s)| keep(*s))
        .take(limit)
        .map(|(k, _)| k.clone())
        .collect()
}

pub(crate) fn positive(name: &str, x: f64) -> Result<(), DetectError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(DetectError::InvalidConfig(format!(
            "{name} must be positive, got {x}"
        )))
    }
}
