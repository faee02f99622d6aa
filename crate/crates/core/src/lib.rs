//! Benchmark toolkit for novelty detection in textual data streams.
//!
//! The crate is organised the way a benchmark run flows:
//!
//! - [`corpus`]: day-stamped, optionally labeled bag-of-words corpora and their
//!   line-oriented file format.
//! - [`simulator`]: Dirichlet topic mixtures with a controlled divergence between
//!   the novel topic and the normal ones, plus the nine scenario curves that
//!   schedule the novel topic over time.
//! - [`detectors`]: five streaming detectors (TF-IDF kNN, burstiness, document
//!   frequency, online LDA, TopicSketch) behind one per-day contract.
//! - [`evaluation`]: precision/recall/F, alert delay and AUC against ground truth.
//! - [`bench`]: experiment grids, sensitivity sweeps and the holdout-injection
//!   protocol for real labeled corpora.
//!
//! Data-parallel loops (kNN scoring, corpus generation, benchmark cells) run on
//! rayon when the `parallel` feature is enabled and fall back to plain iterators
//! otherwise.

pub mod bench;
pub mod corpus;
pub mod detectors;
pub mod divergence;
pub mod evaluation;
pub mod par;
pub mod simulator;

pub use corpus::{DayBatch, Document, GroundTruth, LabeledCorpus, TermId, Vocabulary};
pub use detectors::{Alert, DayReport, Detector, DetectorConfig, DetectorKind};
pub use evaluation::EvalReport;

pub use simulator::{ScenarioSpec, SimulatorConfig};
