//! Online LDA: each day a collapsed Gibbs sampler runs over the day's tokens
//! with topic-word priors seeded by the decayed counts of earlier days. A
//! topic is novel when the words the sampler gave it today are far, in
//! Jensen-Shannon divergence, from every topic snapshot of earlier days.
//! Snapshots hold the full decayed topics.

use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_terms, positive, rank, top, Alert, DayClock, DayReport, DetectError, Detector,
    DetectorKind,
};
use crate::corpus::{DayBatch, TermId};

/// Snapshot entries below this probability are dropped (and the rest
/// renormalised) to keep the all-days comparison affordable.
pub const SNAPSHOT_MIN_PROB: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OldaConfig {
    pub topics: usize,
    /// Per-day multiplier applied to historic topic-word counts.
    pub decay: f64,
    pub gibbs_sweeps: usize,
    /// Sweeps on the first non-empty day, when there is no prior to start from.
    pub initial_sweeps: usize,
    pub js_threshold: f64,
    pub doc_threshold: f64,
    /// Document-topic Dirichlet prior. Small values keep single-topic
    /// documents from leaking tokens into spare topics.
    pub alpha: f64,
    /// Base topic-word prior added to the decayed counts.
    pub beta: f64,
    /// Topics holding less than this share of today's tokens cannot trigger
    /// a detection.
    pub min_topic_share: f64,
    /// Compare only with snapshots of the last `snapshot_window_days` days;
    /// `None` compares with all of them.
    pub snapshot_window_days: Option<u32>,
    pub max_words: usize,
}

impl Default for OldaConfig {
    fn default() -> Self {
        Self {
            topics: 15,
            decay: 0.8,
            gibbs_sweeps: 20,
            initial_sweeps: 100,
            js_threshold: 0.35,
            doc_threshold: 0.5,
            alpha: 0.01,
            beta: 0.01,
            min_topic_share: 0.01,
            snapshot_window_days: None,
            max_words: 100,
        }
    }
}

impl OldaConfig {
    /// Errors on unusable values; warns when no topic can ever be detected.
    pub fn validate(&self) -> Result<Vec<String>, DetectError> {
        if self.topics < 2 {
            return Err(DetectError::InvalidConfig(
                "topics must be at least 2".into(),
            ));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(DetectError::InvalidConfig(
                "decay must lie in (0, 1]".into(),
            ));
        }
        if self.gibbs_sweeps == 0 {
            return Err(DetectError::InvalidConfig(
                "gibbs_sweeps must be positive".into(),
            ));
        }
        if self.snapshot_window_days == Some(0) {
            return Err(DetectError::InvalidConfig(
                "snapshot_window_days must be positive".into(),
            ));
        }
        positive("js_threshold", self.js_threshold)?;
        positive("doc_threshold", self.doc_threshold)?;
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        let mut warnings = Vec::new();
        if self.js_threshold >= LN_2 {
            warnings.push(format!(
                "js_threshold {} is not below ln 2 = {LN_2:.4}; no topic can ever be detected",
                self.js_threshold
            ));
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone)]
struct Snapshot {
    day: u32,
    terms: Vec<TermId>,
    probs: Vec<f64>,
}

/// Jensen-Shannon divergence between a dense distribution and a sparse one,
/// touching only the sparse support.
fn js_dense_sparse(p: &[f64], snap: &Snapshot) -> f64 {
    let (mut p_both, mut q_both, mut acc) = (0.0, 0.0, 0.0);
    for (&t, &q) in snap.terms.iter().zip(&snap.probs) {
        let pw = p[t as usize];
        if pw > 0.0 {
            let m = pw + q;
            acc += 0.5 * pw * (2.0 * pw / m).ln() + 0.5 * q * (2.0 * q / m).ln();
            p_both += pw;
            q_both += q;
        }
    }
    let only = (1.0 - p_both).max(0.0) + (1.0 - q_both).max(0.0);
    (0.5 * LN_2 * only + acc).clamp(0.0, LN_2)
}

#[derive(Debug, Clone)]
pub struct OldaDetector {
    cfg: OldaConfig,
    vocab_size: usize,
    clock: DayClock,
    rng: ChaCha8Rng,
    /// Decayed topic-word counts, row-major `[topic * V + term]`.
    counts: Vec<f64>,
    topic_totals: Vec<f64>,
    snapshots: Vec<Snapshot>,
    trained: bool,
}

impl OldaDetector {
    pub fn new(cfg: OldaConfig, vocab_size: usize, seed: u64) -> Result<Self, DetectError> {
        cfg.validate()?;
        if cfg.topics > vocab_size {
            return Err(DetectError::InvalidConfig(format!(
                "{} topics exceed the vocabulary size {vocab_size}",
                cfg.topics
            )));
        }
        let k = cfg.topics;
        Ok(Self {
            cfg,
            vocab_size,
            clock: DayClock::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            counts: vec![0.0; k * vocab_size],
            topic_totals: vec![0.0; k],
            snapshots: Vec::new(),
            trained: false,
        })
    }

    /// Current topic-word distributions (unsmoothed; all-zero rows for
    /// topics that never received a token).
    pub fn topic_word(&self) -> Vec<Vec<f64>> {
        (0..self.cfg.topics).map(|k| self.topic(k)).collect()
    }

    fn topic(&self, k: usize) -> Vec<f64> {
        let v = self.vocab_size;
        let total = self.topic_totals[k];
        if total <= 0.0 {
            return vec![0.0; v];
        }
        self.counts[k * v..(k + 1) * v]
            .iter()
            .map(|c| c / total)
            .collect()
    }

    fn decay_by(&mut self, days: u32) {
        let f = self.cfg.decay.powi(days as i32);
        if f != 1.0 {
            self.counts.iter_mut().for_each(|c| *c *= f);
            self.topic_totals.iter_mut().for_each(|c| *c *= f);
        }
    }

    /// Gibbs sampling of today's tokens. Returns per-document topic counts,
    /// today's topic-word counts (row-major) and per-topic token counts.
    fn sample(&mut self, batch: &DayBatch) -> (Vec<Vec<u32>>, Vec<u32>, Vec<u32>) {
        let k_n = self.cfg.topics;
        let v = self.vocab_size;
        let (alpha, beta) = (self.cfg.alpha, self.cfg.beta);
        let beta_sum: Vec<f64> = self
            .topic_totals
            .iter()
            .map(|p| p + v as f64 * beta)
            .collect();
        let mut doc_topic = vec![vec![0u32; k_n]; batch.documents.len()];
        let mut today = vec![0u32; k_n * v];
        let mut today_k = vec![0u32; k_n];
        let mut z: Vec<Vec<usize>> = Vec::with_capacity(batch.documents.len());
        let mut weights = vec![0.0f64; k_n];

        let prior = &self.counts;
        let weight = |k: usize, w: usize, ndk: u32, nkw: u32, nk: u32| {
            (f64::from(ndk) + alpha) * (f64::from(nkw) + prior[k * v + w] + beta)
                / (f64::from(nk) + beta_sum[k])
        };
        let rng = &mut self.rng;
        let draw = |weights: &[f64], rng: &mut ChaCha8Rng| {
            let total: f64 = weights.iter().sum();
            let mut u = rng.random::<f64>() * total;
            for (k, &w) in weights.iter().enumerate() {
                if u < w {
                    return k;
                }
                u -= w;
            }
            weights.len() - 1
        };

        // Sequential initialisation from the conditional built so far.
        for (d, doc) in batch.documents.iter().enumerate() {
            let mut zd = Vec::with_capacity(doc.tokens.len());
            for &t in &doc.tokens {
                let w = t as usize;
                for k in 0..k_n {
                    weights[k] = weight(k, w, doc_topic[d][k], today[k * v + w], today_k[k]);
                }
                let k = draw(&weights, rng);
                doc_topic[d][k] += 1;
                today[k * v + w] += 1;
                today_k[k] += 1;
                zd.push(k);
            }
            z.push(zd);
        }
        let sweeps = if self.trained {
            self.cfg.gibbs_sweeps
        } else {
            self.cfg.initial_sweeps.max(1)
        };
        for _ in 0..sweeps {
            for (d, doc) in batch.documents.iter().enumerate() {
                for (i, &t) in doc.tokens.iter().enumerate() {
                    let w = t as usize;
                    let old = z[d][i];
                    doc_topic[d][old] -= 1;
                    today[old * v + w] -= 1;
                    today_k[old] -= 1;
                    for k in 0..k_n {
                        weights[k] = weight(k, w, doc_topic[d][k], today[k * v + w], today_k[k]);
                    }
                    let k = draw(&weights, rng);
                    z[d][i] = k;
                    doc_topic[d][k] += 1;
                    today[k * v + w] += 1;
                    today_k[k] += 1;
                }
            }
        }
        for (c, &n) in self.counts.iter_mut().zip(&today) {
            *c += f64::from(n);
        }
        for (c, &n) in self.topic_totals.iter_mut().zip(&today_k) {
            *c += f64::from(n);
        }
        (doc_topic, today, today_k)
    }

    fn snapshot(&self, day: u32, phi: &[f64]) -> Snapshot {
        let mut terms = Vec::new();
        let mut probs = Vec::new();
        for (t, &p) in phi.iter().enumerate() {
            if p >= SNAPSHOT_MIN_PROB {
                terms.push(t as TermId);
                probs.push(p);
            }
        }
        let s: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= s);
        Snapshot { day, terms, probs }
    }
}

impl Detector for OldaDetector {
    fn kind(&self) -> DetectorKind {
        DetectorKind::Olda
    }

    fn observe(&mut self, batch: &DayBatch) -> Result<DayReport, DetectError> {
        let elapsed = self.clock.advance(batch.day)?;
        check_terms(batch, self.vocab_size)?;
        let mut report = DayReport::empty(batch.day);
        if self.trained {
            self.decay_by(elapsed);
        }
        if batch.is_empty() {
            return Ok(report);
        }
        let (doc_topic, today, today_k) = self.sample(batch);
        self.trained = true;
        let k_n = self.cfg.topics;
        let phis: Vec<Vec<f64>> = self.topic_word();
        let v = self.vocab_size;
        // A topic's current form is what today's tokens made of it; the decayed
        // history it carries is already in the snapshots.
        let current: Vec<Vec<f64>> = (0..k_n)
            .map(|k| {
                let n = f64::from(today_k[k].max(1));
                today[k * v..(k + 1) * v]
                    .iter()
                    .map(|&c| f64::from(c) / n)
                    .collect()
            })
            .collect();

        let min_day = self
            .cfg
            .snapshot_window_days
            .map_or(0, |w| batch.day.saturating_sub(w));
        let history: Vec<&Snapshot> = self.snapshots.iter().filter(|s| s.day >= min_day).collect();
        let novelty: Vec<f64> = if history.is_empty() {
            vec![0.0; k_n]
        } else {
            current
                .iter()
                .enumerate()
                .map(|(k, phi)| {
                    if today_k[k] == 0 {
                        return 0.0;
                    }
                    history
                        .iter()
                        .map(|s| js_dense_sparse(phi, s))
                        .fold(LN_2, f64::min)
                })
                .collect()
        };

        let n_tokens: u32 = today_k.iter().sum();
        let best = (0..k_n)
            .filter(|&k| f64::from(today_k[k]) >= self.cfg.min_topic_share * f64::from(n_tokens))
            .max_by(|&a, &b| novelty[a].total_cmp(&novelty[b]).then(b.cmp(&a)));
        let detected = best.filter(|&k| !history.is_empty() && novelty[k] > self.cfg.js_threshold);

        let alpha = self.cfg.alpha;
        for (doc, nd) in batch.documents.iter().zip(&doc_topic) {
            let len = doc.tokens.len() as f64;
            let score: f64 = (0..k_n)
                .map(|k| (f64::from(nd[k]) + alpha) / (len + k_n as f64 * alpha) * novelty[k])
                .sum();
            report.doc_scores.insert(doc.doc_id.clone(), score);
        }
        if let Some(k) = best.filter(|_| !history.is_empty()) {
            let ranked = rank(
                phis[k]
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(t, &p)| (t as TermId, p * novelty[k])),
            );
            report.word_scores = ranked.into_iter().take(self.cfg.max_words).collect();
        }
        if let Some(k) = detected {
            let words = rank(report.word_scores.iter().map(|(&t, &s)| (t, s)));
            report.flagged_words = top(&words, self.cfg.max_words, |_| true);
            // Every document with more than `doc_threshold` of its mass on
            // the novel topic scores above this cut.
            let cut = self.cfg.doc_threshold * novelty[k];
            let docs = rank(report.doc_scores.iter().map(|(d, &s)| (d.clone(), s)));
            report.flagged_docs = top(&docs, usize::MAX, |s| s > cut);
            report.alerts.push(Alert {
                day: batch.day,
                trigger_terms: report.flagged_words.clone(),
                strength: novelty[k],
            });
        }

        for (k, phi) in phis.iter().enumerate() {
            if self.topic_totals[k] > 0.0 {
                let snap = self.snapshot(batch.day, phi);
                self.snapshots.push(snap);
            }
        }
        Ok(report)
    }
}
