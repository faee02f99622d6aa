//! Burstiness: binomial z-score of today's term frequency against the
//! add-one smoothed historic frequency.

use serde::{Deserialize, Serialize};

use super::{
    check_terms, positive, rank, top, DayClock, DayReport, DetectError, Detector, DetectorKind,
};
use crate::corpus::{DayBatch, DayTermStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Mean,
    Median,
    #[default]
    P90,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BurstinessConfig {
    /// How token z-scores combine into a document score.
    pub aggregation: Aggregation,
    /// Words and documents scoring above this are flagged.
    pub z_threshold: f64,
    pub max_words: usize,
}

impl Default for BurstinessConfig {
    fn default() -> Self {
        Self {
            aggregation: Aggregation::P90,
            z_threshold: 3.0,
            max_words: 100,
        }
    }
}

impl BurstinessConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        positive("z_threshold", self.z_threshold)
    }
}

/// `(tf_t/N_t - p) / sqrt(p (1 - p) / N_t)`.
pub fn burstiness_score(p_hist: f64, tf_t: u64, n_t: u64) -> f64 {
    let n = n_t as f64;
    (tf_t as f64 / n - p_hist) / (p_hist * (1.0 - p_hist) / n).sqrt()
}

/// Mean, median or 90th percentile (linear interpolation between order
/// statistics). Empty input gives 0.
pub fn aggregate(values: &[f64], how: Aggregation) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    if how == Aggregation::Mean {
        return values.iter().sum::<f64>() / values.len() as f64;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = if how == Aggregation::Median { 0.5 } else { 0.9 };
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone)]
pub struct BurstinessDetector {
    cfg: BurstinessConfig,
    vocab_size: usize,
    clock: DayClock,
    tf_hist: Vec<u64>,
    n_hist: u64,
}

impl BurstinessDetector {
    pub fn new(cfg: BurstinessConfig, vocab_size: usize) -> Result<Self, DetectError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            vocab_size,
            clock: DayClock::default(),
            tf_hist: vec![0; vocab_size],
            n_hist: 0,
        })
    }

    fn p_hist(&self, term: usize) -> f64 {
        (self.tf_hist[term] as f64 + 1.0) / (self.n_hist as f64 + self.vocab_size as f64)
    }
}

impl Detector for BurstinessDetector {
    fn kind(&self) -> DetectorKind {
        DetectorKind::Burstiness
    }

    fn observe(&mut self, batch: &DayBatch) -> Result<DayReport, DetectError> {
        self.clock.advance(batch.day)?;
        check_terms(batch, self.vocab_size)?;
        let mut report = DayReport::empty(batch.day);
        let stats = DayTermStats::from_batch(batch, self.vocab_size);
        if stats.n_tokens == 0 {
            return Ok(report);
        }
        let mut z = vec![0.0; self.vocab_size];
        for &t in &stats.active {
            let t = t as usize;
            z[t] = burstiness_score(self.p_hist(t), stats.tf[t], stats.n_tokens);
        }
        report.word_scores = stats.active.iter().map(|&t| (t, z[t as usize])).collect();
        for doc in &batch.documents {
            let token_z: Vec<f64> = doc.tokens.iter().map(|&t| z[t as usize]).collect();
            report.doc_scores.insert(
                doc.doc_id.clone(),
                aggregate(&token_z, self.cfg.aggregation),
            );
        }

        if self.n_hist > 0 {
            let thr = self.cfg.z_threshold;
            let words = rank(report.word_scores.iter().map(|(&t, &s)| (t, s)));
            report.flagged_words = top(&words, self.cfg.max_words, |s| s > thr);
            let docs = rank(report.doc_scores.iter().map(|(d, &s)| (d.clone(), s)));
            report.flagged_docs = top(&docs, usize::MAX, |s| s > thr);
        }

        for &t in &stats.active {
            self.tf_hist[t as usize] += stats.tf[t as usize];
        }
        self.n_hist += stats.n_tokens;
        Ok(report)
    }
}
