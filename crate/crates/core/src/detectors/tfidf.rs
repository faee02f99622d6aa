//! First-story detection: TF-IDF vectors and distance to the k-th nearest
//! earlier document.

use serde::{Deserialize, Serialize};

use super::knn::{dissimilarity, KnnIndex, SparseVector};
use super::{
    check_terms, positive, rank, top, DayClock, DayReport, DetectError, Detector, DetectorKind,
};
use crate::corpus::{DayBatch, TermId};
use crate::par::*;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfidfConfig {
    pub k: usize,
    /// Only documents from the last `window_days` days are neighbour
    /// candidates; `None` keeps the full history.
    pub window_days: Option<u32>,
    /// Documents scoring at least this are flagged.
    pub doc_threshold: f64,
    pub max_words: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        Self {
            k: 5,
            window_days: None,
            doc_threshold: 0.6,
            max_words: 100,
        }
    }
}

impl TfidfConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        if self.k == 0 {
            return Err(DetectError::InvalidConfig("k must be at least 1".into()));
        }
        if self.window_days == Some(0) {
            return Err(DetectError::InvalidConfig(
                "window_days must be positive".into(),
            ));
        }
        positive("doc_threshold", self.doc_threshold)
    }
}

/// `ln((N + 1) / (df + 1))`.
pub fn idf(n_docs: u64, df: u32) -> f64 {
    ((n_docs as f64 + 1.0) / (f64::from(df) + 1.0)).ln()
}

#[derive(Debug, Clone)]
pub struct TfidfDetector {
    cfg: TfidfConfig,
    vocab_size: usize,
    clock: DayClock,
    index: KnnIndex,
    df: Vec<u32>,
    n_docs: u64,
}

impl TfidfDetector {
    pub fn new(cfg: TfidfConfig, vocab_size: usize) -> Result<Self, DetectError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            vocab_size,
            clock: DayClock::default(),
            index: KnnIndex::new(vocab_size),
            df: vec![0; vocab_size],
            n_docs: 0,
        })
    }

    /// IDF of every term given the documents seen so far.
    pub fn current_idf(&self) -> Vec<f64> {
        self.df.iter().map(|&df| idf(self.n_docs, df)).collect()
    }
}

impl Detector for TfidfDetector {
    fn kind(&self) -> DetectorKind {
        DetectorKind::TfidfKnn
    }

    fn observe(&mut self, batch: &DayBatch) -> Result<DayReport, DetectError> {
        self.clock.advance(batch.day)?;
        check_terms(batch, self.vocab_size)?;
        let mut report = DayReport::empty(batch.day);
        if batch.is_empty() {
            return Ok(report);
        }
        let idf = self.current_idf();
        let has_history = !self.index.is_empty();
        if has_history {
            self.index.refresh_norms(Some(&idf));
        }
        let min_day = self
            .cfg
            .window_days
            .map_or(0, |w| batch.day.saturating_sub(w));
        let k = self.cfg.k;
        let index = &self.index;
        let counts: Vec<Vec<(TermId, u32)>> = batch
            .documents
            .par_iter()
            .map(|d| d.term_counts())
            .collect();
        let scored: Vec<(f64, bool)> = counts
            .par_iter()
            .map(|c| {
                let q = SparseVector::from_counts(c, |t, n| f64::from(n) * idf[t as usize]);
                match index.kth_similarity(&q, k, Some(&idf), min_day) {
                    None => (1.0, false),
                    Some(_) if q.norm() == 0.0 => (0.0, true),
                    Some(sim) => (dissimilarity(sim), false),
                }
            })
            .collect();

        for (doc, &(score, degenerate)) in batch.documents.iter().zip(&scored) {
            report.doc_scores.insert(doc.doc_id.clone(), score);
            if degenerate {
                report.degenerate_docs.push(doc.doc_id.clone());
            }
        }
        let mut active: Vec<TermId> = counts.iter().flatten().map(|&(t, _)| t).collect();
        active.sort_unstable();
        active.dedup();
        report.word_scores = active.iter().map(|&t| (t, idf[t as usize])).collect();

        if has_history {
            let words = rank(report.word_scores.iter().map(|(&t, &s)| (t, s)));
            report.flagged_words = top(&words, self.cfg.max_words, |_| true);
            let docs = rank(report.doc_scores.iter().map(|(d, &s)| (d.clone(), s)));
            let theta = self.cfg.doc_threshold;
            report.flagged_docs = top(&docs, usize::MAX, |s| s >= theta);
        }

        for (doc, c) in batch.documents.iter().zip(counts) {
            for &(t, _) in &c {
                self.df[t as usize] += 1;
            }
            let base = SparseVector::from_counts(&c, |_, n| f64::from(n));
            self.index.push(doc.day, base, Some(&idf));
        }
        self.n_docs += batch.documents.len() as u64;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::knn::tests::brute_force;
    use crate::detectors::tests::doc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn det(k: usize) -> TfidfDetector {
        TfidfDetector::new(
            TfidfConfig {
                k,
                ..Default::default()
            },
            10,
        )
        .unwrap()
    }

    fn day(d: u32, docs: &[&[TermId]]) -> DayBatch {
        DayBatch {
            day: d,
            documents: docs
                .iter()
                .enumerate()
                .map(|(i, t)| doc(&format!("{d}-{i}"), d, t))
                .collect(),
        }
    }

    #[test]
    fn first_day_scores_one_and_flags_nothing() {
        let mut d = det(1);
        let r = d.observe(&day(0, &[&[1, 2], &[3]])).unwrap();
        assert!(r.doc_scores.values().all(|&s| s == 1.0));
        assert!(r.flagged_docs.is_empty() && r.flagged_words.is_empty());
    }

    #[test]
    fn duplicate_scores_zero_and_orthogonal_scores_one() {
        let mut d = det(1);
        d.observe(&day(0, &[&[1, 2, 2], &[3, 4]])).unwrap();
        let r = d.observe(&day(1, &[&[1, 2, 2], &[7, 8]])).unwrap();
        assert!(r.doc_scores["1-0"].abs() < 1e-12);
        assert_eq!(r.doc_scores["1-1"], 1.0);
        assert_eq!(r.flagged_docs, vec!["1-1".to_string()]);
    }

    #[test]
    fn zero_vector_document_is_degenerate() {
        // Term 1 occurs in every history document, so its IDF is 0.
        let mut d = det(1);
        d.observe(&day(0, &[&[1, 2], &[1, 3]])).unwrap();
        let r = d.observe(&day(1, &[&[1, 1]])).unwrap();
        assert_eq!(r.doc_scores["1-0"], 0.0);
        assert_eq!(r.degenerate_docs, vec!["1-0".to_string()]);
    }

    #[test]
    fn word_flags_rank_by_idf() {
        // History: 4 docs. df: t0=3, t1=1, t2=2, t3=0, t4=4.
        let mut d = TfidfDetector::new(TfidfConfig::default(), 6).unwrap();
        d.observe(&day(0, &[&[0, 1, 4], &[0, 2, 4], &[0, 2, 4], &[4]]))
            .unwrap();
        let r = d.observe(&day(1, &[&[0, 1, 2, 3, 4]])).unwrap();
        let hand = |df: f64| (5.0f64 / (df + 1.0)).ln();
        let mut expect = [
            (0u32, hand(3.0)),
            (1, hand(1.0)),
            (2, hand(2.0)),
            (3, hand(0.0)),
            (4, hand(4.0)),
        ];
        expect.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        assert_eq!(
            r.flagged_words,
            expect.iter().map(|e| e.0).collect::<Vec<_>>()
        );
        assert_eq!(r.flagged_words[0], 3, "first-ever term must rank first");
        assert!((r.word_scores[&4]).abs() < 1e-15);
    }

    #[test]
    fn word_flags_truncate_at_budget() {
        let cfg = TfidfConfig {
            max_words: 2,
            ..Default::default()
        };
        let mut d = TfidfDetector::new(cfg, 10).unwrap();
        d.observe(&day(0, &[&[0]])).unwrap();
        let r = d.observe(&day(1, &[&[0, 5, 6, 7]])).unwrap();
        assert_eq!(r.flagged_words, vec![5, 6]);
    }

    fn random_doc(rng: &mut ChaCha8Rng, vocab: u32) -> Vec<TermId> {
        let len = rng.random_range(1..8);
        (0..len).map(|_| rng.random_range(0..vocab)).collect()
    }

    /// Replays the detector's arithmetic densely: IDF from prior documents,
    /// then brute-force k-th neighbour cosine.
    fn oracle_scores(days: &[Vec<Vec<TermId>>], vocab: usize, k: usize) -> Vec<Vec<f64>> {
        let mut history: Vec<Vec<f64>> = Vec::new();
        let mut out = Vec::new();
        for docs in days {
            let n = history.len() as f64;
            let df: Vec<f64> = (0..vocab)
                .map(|t| history.iter().filter(|h| h[t] > 0.0).count() as f64)
                .collect();
            let idf: Vec<f64> = df.iter().map(|d| ((n + 1.0) / (d + 1.0)).ln()).collect();
            let weigh = |tf: &[f64]| tf.iter().zip(&idf).map(|(x, i)| x * i).collect::<Vec<_>>();
            let hist_w: Vec<Vec<f64>> = history.iter().map(|h| weigh(h)).collect();
            let mut day_scores = Vec::new();
            let mut today = Vec::new();
            for d in docs {
                let mut tf = vec![0.0; vocab];
                for &t in d {
                    tf[t as usize] += 1.0;
                }
                let q = weigh(&tf);
                let score = match brute_force(&hist_w, &q, k) {
                    None => 1.0,
                    Some(_) if q.iter().all(|&x| x == 0.0) => 0.0,
                    Some(sim) => (1.0 - sim).max(0.0),
                };
                day_scores.push(score);
                today.push(tf);
            }
            history.extend(today);
            out.push(day_scores);
        }
        out
    }

    #[test]
    fn matches_exhaustive_oracle_on_random_corpus() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let vocab = 12;
        let days: Vec<Vec<Vec<TermId>>> = (0..4)
            .map(|_| (0..5).map(|_| random_doc(&mut rng, vocab)).collect())
            .collect();
        let expect = oracle_scores(&days, vocab as usize, 3);
        let mut d = TfidfDetector::new(
            TfidfConfig {
                k: 3,
                ..Default::default()
            },
            12,
        )
        .unwrap();
        for (t, docs) in days.iter().enumerate() {
            let refs: Vec<&[TermId]> = docs.iter().map(|v| &v[..]).collect();
            let r = d.observe(&day(t as u32, &refs)).unwrap();
            for (i, e) in expect[t].iter().enumerate() {
                assert_eq!(r.doc_scores[&format!("{t}-{i}")], *e, "day {t} doc {i}");
            }
        }
    }

    #[test]
    fn larger_k_never_lowers_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let days: Vec<Vec<Vec<TermId>>> = (0..3)
            .map(|_| (0..8).map(|_| random_doc(&mut rng, 9)).collect())
            .collect();
        let scores: Vec<Vec<Vec<f64>>> = (1..6).map(|k| oracle_scores(&days, 9, k)).collect();
        for w in scores.windows(2) {
            for (a, b) in w[0].iter().flatten().zip(w[1].iter().flatten()) {
                assert!(b >= a);
            }
        }
    }
}
