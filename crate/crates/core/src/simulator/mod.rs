//! Synthetic corpora with a planted novel topic.
//!
//! Every topic is a symmetric Dirichlet draw over the vocabulary. Documents get
//! exactly one topic and `doc_length` i.i.d. tokens from it. The last topic is
//! the novel one: its daily document count follows a [`ScenarioSpec`] curve and
//! its divergence from the closest normal topic can be pinned with
//! [`calibrate_divergence`].

mod generate;
mod scenario;
mod topics;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;

pub use generate::{generate_corpus, term_name, SimulatedCorpus, SimulationMetadata};
pub use scenario::{
    load_catalog, scenario_catalog, scenario_curve, ScenarioCatalog, ScenarioKind, ScenarioSpec,
};
pub use topics::{
    calibrate_divergence, nearest_topic, sample_topics, Calibration, Topic, BISECTION_MAX_ITERS,
    CALIBRATION_TOLERANCE,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator parameter: {0}")]
    InvalidConfig(String),
    #[error("target KL {target} is unreachable; the fresh draw only reaches {max}")]
    Unreachable { target: f64, max: f64 },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorConfig {
    pub vocab_size: usize,
    /// Normal topics plus the single novel topic (always the last id).
    pub n_topics: usize,
    pub doc_length: usize,
    pub horizon_days: u32,
    pub background_docs_per_topic_per_day: usize,
    /// Symmetric Dirichlet concentration; small values give sparse topics.
    pub alpha: f64,
    /// Mean symmetric KL between the novel topic and its nearest normal topic.
    /// `None` keeps the novel topic as an independent draw.
    pub target_kl: Option<f64>,
    pub seed: u64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            vocab_size: 10_000,
            n_topics: 10,
            doc_length: 100,
            horizon_days: 100,
            background_docs_per_topic_per_day: 20,
            alpha: 0.01,
            target_kl: None,
            seed: 0,
        }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be a positive finite number");
        }
        if self.n_topics < 2 {
            return bad("n_topics must be at least 2");
        }
        if self.vocab_size == 0 || self.doc_length == 0 || self.horizon_days == 0 {
            return bad("vocab_size, doc_length and horizon_days must be positive");
        }
        if self.background_docs_per_topic_per_day == 0 {
            return bad("background_docs_per_topic_per_day must be positive");
        }
        if let Some(t) = self.target_kl {
            if !(t > 0.0 && t.is_finite()) {
                return bad("target_kl must be positive");
            }
        }
        Ok(())
    }

    pub fn novel_topic(&self) -> usize {
        self.n_topics - 1
    }
}
