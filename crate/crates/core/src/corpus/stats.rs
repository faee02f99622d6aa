use super::{DayBatch, TermId, Vocabulary};

/// Per-term token and document counts for one day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayTermStats {
    /// Token count per term id.
    pub tf: Vec<u64>,
    /// Number of documents containing each term.
    pub df: Vec<u32>,
    pub n_tokens: u64,
    pub n_docs: u32,
    /// Terms with `tf > 0`, ascending.
    pub active: Vec<TermId>,
}

impl DayTermStats {
    pub fn zeros(vocab_size: usize) -> Self {
        Self {
            tf: vec![0; vocab_size],
            df: vec![0; vocab_size],
            n_tokens: 0,
            n_docs: 0,
            active: Vec::new(),
        }
    }

    pub fn tf(&self, term: TermId) -> u64 {
        self.tf[term as usize]
    }

    pub fn df(&self, term: TermId) -> u32 {
        self.df[term as usize]
    }
}

pub fn day_term_stats(batch: &DayBatch, vocab: &Vocabulary) -> DayTermStats {
    DayTermStats::from_batch(batch, vocab.len())
}

impl DayTermStats {
    /// Counts a batch whose term ids are all below `vocab_size`.
    pub fn from_batch(batch: &DayBatch, vocab_size: usize) -> Self {
        let mut stats = DayTermStats::zeros(vocab_size);
        for doc in &batch.documents {
            stats.n_docs += 1;
            for (term, count) in doc.term_counts() {
                let t = term as usize;
                if stats.tf[t] == 0 {
                    stats.active.push(term);
                }
                stats.tf[t] += u64::from(count);
                stats.df[t] += 1;
                stats.n_tokens += u64::from(count);
            }
        }
        stats.active.sort_unstable();
        stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use proptest::prelude::*;

    fn batch(docs: &[&[TermId]]) -> DayBatch {
        DayBatch {
            day: 0,
            documents: docs
                .iter()
                .enumerate()
                .map(|(i, t)| Document {
                    doc_id: format!("d{i}"),
                    day: 0,
                    tokens: t.to_vec(),
                    label: None,
                })
                .collect(),
        }
    }

    #[test]
    fn hand_counted_example() {
        // a=0, b=1, c=2: docs {a,a,b} and {b,c}
        let v = Vocabulary::from_terms(["a", "b", "c"]);
        let s = day_term_stats(&batch(&[&[0, 0, 1], &[1, 2]]), &v);
        assert_eq!((s.tf(0), s.df(0)), (2, 1));
        assert_eq!((s.tf(1), s.df(1)), (2, 2));
        assert_eq!((s.n_tokens, s.n_docs), (5, 2));
        assert_eq!(s.active, [0, 1, 2]);
    }

    #[test]
    fn empty_batch_is_all_zero() {
        let v = Vocabulary::from_terms(["a", "b"]);
        let s = day_term_stats(&DayBatch::empty(4), &v);
        assert_eq!(s, DayTermStats::zeros(2));
    }

    #[test]
    fn repeated_token_counts_once_for_df() {
        let v = Vocabulary::from_terms(["a"]);
        let s = day_term_stats(&batch(&[&[0, 0, 0]]), &v);
        assert_eq!((s.tf(0), s.df(0)), (3, 1));
    }

    proptest! {
        #[test]
        fn matches_naive_two_pass_count(
            docs in prop::collection::vec(prop::collection::vec(0u32..12, 1..20), 0..15)
        ) {
            let v = Vocabulary::from_terms((0..12).map(|i| format!("t{i:02}")));
            let refs: Vec<&[TermId]> = docs.iter().map(Vec::as_slice).collect();
            let s = day_term_stats(&batch(&refs), &v);
            for w in 0..12u32 {
                let tf: u64 = docs.iter().flatten().filter(|&&t| t == w).count() as u64;
                let df = docs.iter().filter(|d| d.contains(&w)).count() as u32;
                prop_assert_eq!(s.tf(w), tf);
                prop_assert_eq!(s.df(w), df);
                prop_assert!(s.df(w) <= s.n_docs);
            }
            prop_assert_eq!(s.tf.iter().sum::<u64>(), s.n_tokens);
            prop_assert_eq!(s.n_tokens, docs.iter().map(|d| d.len() as u64).sum::<u64>());
        }
    }
}
