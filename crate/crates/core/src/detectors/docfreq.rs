//! Document-frequency bursts: terms whose share of today's documents jumps
//! relative to history, grouped into "new word" clusters by the Jaccard
//! distance of their document sets. Documents are scored by kNN in a space
//! weighted by the same burst ratio.

use serde::{Deserialize, Serialize};

use super::knn::{dissimilarity, KnnIndex, SparseVector};
use super::{
    check_terms, positive, rank, top, Alert, DayClock, DayReport, DetectError, Detector,
    DetectorKind,
};
use crate::corpus::{DayBatch, DayTermStats, TermId};
use crate::par::*;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DfConfig {
    /// A term bursts when its document-frequency ratio exceeds this.
    pub ratio_threshold: f64,
    /// Terms closer than this (Jaccard distance of document sets) are linked.
    pub jaccard_threshold: f64,
    pub k: usize,
    /// Bursting terms must occur in at least this many of today's documents.
    pub min_df: u32,
    /// Smaller clusters are discarded as noise.
    pub min_cluster_size: usize,
    pub doc_threshold: f64,
    pub max_words: usize,
}

impl Default for DfConfig {
    fn default() -> Self {
        Self {
            ratio_threshold: 10.0,
            jaccard_threshold: 0.5,
            k: 5,
            min_df: 3,
            min_cluster_size: 2,
            doc_threshold: 0.8,
            max_words: 100,
        }
    }
}

impl DfConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        if self.k == 0 {
            return Err(DetectError::InvalidConfig("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.jaccard_threshold) {
            return Err(DetectError::InvalidConfig(
                "jaccard_threshold must lie in [0, 1]".into(),
            ));
        }
        if self.min_cluster_size == 0 {
            return Err(DetectError::InvalidConfig(
                "min_cluster_size must be positive".into(),
            ));
        }
        positive("ratio_threshold", self.ratio_threshold)?;
        positive("doc_threshold", self.doc_threshold)
    }
}

/// `(df_t / N_t) / ((df_hist + 1) / (N_hist + 1))`.
pub fn df_ratio(df_t: u32, n_t: u32, df_hist: u32, n_hist: u64) -> f64 {
    (f64::from(df_t) / f64::from(n_t)) / ((f64::from(df_hist) + 1.0) / (n_hist as f64 + 1.0))
}

/// `1 - |A ∩ B| / |A ∪ B|` on sorted, deduplicated sets.
pub fn jaccard_distance(a: &[u32], b: &[u32]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Single-link clustering: terms whose document sets are within `tau` are
/// linked, clusters are the connected components. Each cluster is sorted, and
/// clusters are ordered by their smallest term.
pub fn jaccard_cluster(terms: &[TermId], doc_sets: &[Vec<u32>], tau: f64) -> Vec<Vec<TermId>> {
    let n = terms.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if jaccard_distance(&doc_sets[i], &doc_sets[j]) <= tau {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<TermId>> = Default::default();
    for (i, &t) in terms.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(t);
    }
    let mut out: Vec<Vec<TermId>> = groups
        .into_values()
        .map(|mut g| {
            g.sort_unstable();
            g
        })
        .collect();
    out.sort();
    out
}

#[derive(Debug, Clone)]
pub struct DfDetector {
    cfg: DfConfig,
    vocab_size: usize,
    clock: DayClock,
    index: KnnIndex,
    df_hist: Vec<u32>,
    n_hist: u64,
}

impl DfDetector {
    pub fn new(cfg: DfConfig, vocab_size: usize) -> Result<Self, DetectError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            vocab_size,
            clock: DayClock::default(),
            index: KnnIndex::new(vocab_size),
            df_hist: vec![0; vocab_size],
            n_hist: 0,
        })
    }

    /// Per-term weight of today's document space: `ln(1 + df_t / (df_hist + 1))`.
    fn burst_weight(&self, stats: &DayTermStats, term: TermId) -> f64 {
        let t = term as usize;
        (1.0 + f64::from(stats.df[t]) / (f64::from(self.df_hist[t]) + 1.0)).ln()
    }
}

impl Detector for DfDetector {
    fn kind(&self) -> DetectorKind {
        DetectorKind::Df
    }

    fn observe(&mut self, batch: &DayBatch) -> Result<DayReport, DetectError> {
        self.clock.advance(batch.day)?;
        check_terms(batch, self.vocab_size)?;
        let mut report = DayReport::empty(batch.day);
        if batch.is_empty() {
            return Ok(report);
        }
        let stats = DayTermStats::from_batch(batch, self.vocab_size);
        let has_history = self.n_hist > 0;
        let rho = self.cfg.ratio_threshold;
        let ratio: Vec<(TermId, f64)> = stats
            .active
            .iter()
            .map(|&t| {
                (
                    t,
                    df_ratio(
                        stats.df[t as usize],
                        stats.n_docs,
                        self.df_hist[t as usize],
                        self.n_hist,
                    ),
                )
            })
            .collect();

        let counts: Vec<Vec<(TermId, u32)>> = batch
            .documents
            .par_iter()
            .map(|d| d.term_counts())
            .collect();

        let mut clustered = vec![false; self.vocab_size];
        if has_history {
            let candidates: Vec<TermId> = ratio
                .iter()
                .filter(|&&(t, r)| r > rho && stats.df[t as usize] >= self.cfg.min_df)
                .map(|&(t, _)| t)
                .collect();
            let mut slot = vec![usize::MAX; self.vocab_size];
            for (i, &t) in candidates.iter().enumerate() {
                slot[t as usize] = i;
            }
            let mut doc_sets = vec![Vec::new(); candidates.len()];
            for (d, c) in counts.iter().enumerate() {
                for &(t, _) in c {
                    if slot[t as usize] != usize::MAX {
                        doc_sets[slot[t as usize]].push(d as u32);
                    }
                }
            }
            let ratio_of = |t: TermId| ratio[stats.active.binary_search(&t).unwrap()].1;
            for cluster in jaccard_cluster(&candidates, &doc_sets, self.cfg.jaccard_threshold) {
                if cluster.len() < self.cfg.min_cluster_size {
                    continue;
                }
                let strength = cluster
                    .iter()
                    .map(|&t| ratio_of(t))
                    .fold(f64::MIN, f64::max);
                for &t in &cluster {
                    clustered[t as usize] = true;
                }
                report.alerts.push(Alert {
                    day: batch.day,
                    trigger_terms: cluster,
                    strength,
                });
            }
        }
        // Terms left out of a cluster are capped at the threshold, so the
        // flagged words are exactly the top of the ranking.
        report.word_scores = ratio
            .iter()
            .map(|&(t, r)| (t, if clustered[t as usize] { r } else { r.min(rho) }))
            .collect();

        let index = &self.index;
        let k = self.cfg.k;
        let vectors: Vec<SparseVector> = counts
            .iter()
            .map(|c| {
                SparseVector::from_counts(c, |t, n| f64::from(n) * self.burst_weight(&stats, t))
            })
            .collect();
        let scored: Vec<(f64, bool)> = vectors
            .par_iter()
            .map(|q| match index.kth_similarity(q, k, None, 0) {
                None => (1.0, false),
                Some(_) if q.norm() == 0.0 => (0.0, true),
                Some(sim) => (dissimilarity(sim), false),
            })
            .collect();
        for (doc, &(score, degenerate)) in batch.documents.iter().zip(&scored) {
            report.doc_scores.insert(doc.doc_id.clone(), score);
            if degenerate {
                report.degenerate_docs.push(doc.doc_id.clone());
            }
        }

        if has_history {
            let words = rank(report.word_scores.iter().map(|(&t, &s)| (t, s)));
            report.flagged_words = top(&words, self.cfg.max_words, |s| s > rho);
            let theta = self.cfg.doc_threshold;
            let docs = rank(report.doc_scores.iter().map(|(d, &s)| (d.clone(), s)));
            report.flagged_docs = top(&docs, usize::MAX, |s| s >= theta);
        }

        for (doc, v) in batch.documents.iter().zip(vectors) {
            self.index.push(doc.day, v, None);
        }
        for &t in &stats.active {
            self.df_hist[t as usize] += stats.df[t as usize];
        }
        self.n_hist += u64::from(stats.n_docs);
        Ok(report)
    }
}
