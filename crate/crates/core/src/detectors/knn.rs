//! Exact k-nearest-neighbour search under cosine similarity.
//!
//! History documents are kept as sparse base vectors plus an inverted index.
//! A per-term scale (the current IDF for TF-IDF) can be applied at query time,
//! so history does not have to be re-weighted when document frequencies move;
//! only the norms are refreshed.
//!
//! Dot products accumulate contributions in ascending term order, the same
//! order a dense all-pairs loop uses, so scores equal brute force bit for bit.

use crate::corpus::TermId;
use crate::par::*;

/// Non-negative sparse vector with strictly ascending terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    pub terms: Vec<TermId>,
    pub values: Vec<f64>,
}

impl SparseVector {
    /// Builds from ascending `(term, count)` pairs.
    pub fn from_counts(counts: &[(TermId, u32)], weight: impl Fn(TermId, u32) -> f64) -> Self {
        Self {
            terms: counts.iter().map(|&(t, _)| t).collect(),
            values: counts.iter().map(|&(t, c)| weight(t, c)).collect(),
        }
    }

    /// Applies a per-term scale (identity when `None`).
    pub fn scaled(&self, scale: Option<&[f64]>) -> Self {
        match scale {
            None => self.clone(),
            Some(s) => Self {
                terms: self.terms.clone(),
                values: self
                    .terms
                    .iter()
                    .zip(&self.values)
                    .map(|(&t, &v)| v * s[t as usize])
                    .collect(),
            },
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine dissimilarity, clamped so rounding never yields a negative score.
pub fn dissimilarity(cos: f64) -> f64 {
    (1.0 - cos).max(0.0)
}

#[derive(Debug, Clone)]
struct Entry {
    day: u32,
    base: SparseVector,
    norm: f64,
}

#[derive(Debug, Clone)]
pub struct KnnIndex {
    entries: Vec<Entry>,
    /// For each term, `(entry index, base value)` in insertion order.
    postings: Vec<Vec<(u32, f64)>>,
}

impl KnnIndex {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            entries: Vec::new(),
            postings: vec![Vec::new(); vocab_size],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds a history document. Days must be non-decreasing.
    pub fn push(&mut self, day: u32, base: SparseVector, scale: Option<&[f64]>) {
        debug_assert!(self.entries.last().is_none_or(|e| e.day <= day));
        let idx = self.entries.len() as u32;
        for (&t, &v) in base.terms.iter().zip(&base.values) {
            self.postings[t as usize].push((idx, v));
        }
        let norm = base.scaled(scale).norm();
        self.entries.push(Entry { day, base, norm });
    }

    /// Recomputes every history norm under a new scale.
    pub fn refresh_norms(&mut self, scale: Option<&[f64]>) {
        self.entries
            .par_iter_mut()
            .for_each(|e| e.norm = e.base.scaled(scale).norm());
    }

    /// Cosine similarity of the `k`-th most similar eligible history document
    /// (history documents with `day >= min_day`). Documents sharing no term
    /// count with similarity 0. With fewer than `k` eligible documents the
    /// least similar one is used. `None` when nothing is eligible.
    pub fn kth_similarity(
        &self,
        query: &SparseVector,
        k: usize,
        scale: Option<&[f64]>,
        min_day: u32,
    ) -> Option<f64> {
        let start = self.entries.partition_point(|e| e.day < min_day);
        let n = self.entries.len() - start;
        if n == 0 {
            return None;
        }
        let qnorm = query.norm();
        let mut acc = vec![0.0f64; n];
        let mut seen = vec![false; n];
        let mut touched = Vec::new();
        for (&t, &q) in query.terms.iter().zip(&query.values) {
            let postings = &self.postings[t as usize];
            let from = postings.partition_point(|&(i, _)| (i as usize) < start);
            for &(i, base) in &postings[from..] {
                let j = i as usize - start;
                let h = match scale {
                    Some(s) => base * s[t as usize],
                    None => base,
                };
                acc[j] += q * h;
                if !seen[j] {
                    seen[j] = true;
                    touched.push(j);
                }
            }
        }
        let mut sims: Vec<f64> = touched
            .iter()
            .map(|&j| cosine(acc[j], qnorm, self.entries[start + j].norm))
            .collect();
        if n < k {
            if sims.len() < n {
                return Some(0.0);
            }
            return sims.into_iter().min_by(f64::total_cmp);
        }
        if sims.len() < k {
            return Some(0.0);
        }
        let (_, kth, _) = sims.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
        Some(*kth)
    }
}

pub(crate) fn cosine(dot: f64, qnorm: f64, hnorm: f64) -> f64 {
    if qnorm == 0.0 || hnorm == 0.0 {
        0.0
    } else {
        dot / (qnorm * hnorm)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense all-pairs reference: k-th largest cosine, implicit zeros included.
    pub(crate) fn brute_force(history: &[Vec<f64>], query: &[f64], k: usize) -> Option<f64> {
        if history.is_empty() {
            return None;
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let qn = norm(query);
        let mut sims: Vec<f64> = history
            .iter()
            .map(|h| {
                let mut dot = 0.0;
                for (a, b) in query.iter().zip(h) {
                    if *a != 0.0 && *b != 0.0 {
                        dot += a * b;
                    }
                }
                let hn = norm(h);
                if qn == 0.0 || hn == 0.0 {
                    0.0
                } else {
                    dot / (qn * hn)
                }
            })
            .collect();
        sims.sort_by(|a, b| b.total_cmp(a));
        Some(if history.len() < k {
            *sims.last().unwrap()
        } else {
            sims[k - 1]
        })
    }

    fn dense(v: &SparseVector, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (&t, &x) in v.terms.iter().zip(&v.values) {
            out[t as usize] = x;
        }
        out
    }

    fn random_vec(rng: &mut ChaCha8Rng, dim: usize) -> SparseVector {
        let mut counts: Vec<(TermId, u32)> = Vec::new();
        for t in 0..dim as TermId {
            if rng.random_bool(0.3) {
                counts.push((t, rng.random_range(1..4)));
            }
        }
        SparseVector::from_counts(&counts, |_, c| c as f64)
    }

    #[test]
    fn matches_brute_force_with_and_without_scale() {
        let dim = 15;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scale: Vec<f64> = (0..dim).map(|i| 0.1 + i as f64 * 0.37).collect();
        for use_scale in [false, true] {
            let s = use_scale.then_some(&scale[..]);
            let mut index = KnnIndex::new(dim);
            let mut hist = Vec::new();
            for i in 0..40 {
                let v = random_vec(&mut rng, dim);
                hist.push(dense(&v.scaled(s), dim));
                index.push(i / 10, v, s);
            }
            for k in [1, 3, 7, 40, 55] {
                for _ in 0..10 {
                    let q = random_vec(&mut rng, dim).scaled(s);
                    let expect = brute_force(&hist, &dense(&q, dim), k);
                    assert_eq!(index.kth_similarity(&q, k, s, 0), expect, "k={k}");
                }
            }
        }
    }

    #[test]
    fn window_restricts_candidates() {
        let mut index = KnnIndex::new(3);
        let a = SparseVector {
            terms: vec![0],
            values: vec![1.0],
        };
        let b = SparseVector {
            terms: vec![1],
            values: vec![1.0],
        };
        index.push(0, a.clone(), None);
        index.push(5, b, None);
        assert_eq!(index.kth_similarity(&a, 1, None, 0), Some(1.0));
        assert_eq!(index.kth_similarity(&a, 1, None, 1), Some(0.0));
        assert_eq!(index.kth_similarity(&a, 1, None, 6), None);
    }

    #[test]
    fn refreshed_norms_follow_new_scale() {
        let mut index = KnnIndex::new(2);
        let v = SparseVector {
            terms: vec![0, 1],
            values: vec![1.0, 1.0],
        };
        index.push(0, v.clone(), Some(&[1.0, 1.0]));
        let scale = [3.0, 0.5];
        index.refresh_norms(Some(&scale));
        let q = v.scaled(Some(&scale));
        let sim = index.kth_similarity(&q, 1, Some(&scale), 0).unwrap();
        assert!((sim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fewer_than_k_uses_farthest() {
        let mut index = KnnIndex::new(2);
        index.push(
            0,
            SparseVector {
                terms: vec![0],
                values: vec![1.0],
            },
            None,
        );
        index.push(
            0,
            SparseVector {
                terms: vec![0, 1],
                values: vec![1.0, 1.0],
            },
            None,
        );
        let q = SparseVector {
            terms: vec![0],
            values: vec![1.0],
        };
        let sim = index.kth_similarity(&q, 5, None, 0).unwrap();
        assert!((sim - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
