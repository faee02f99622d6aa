//! Day-stamped bag-of-words corpora.
//!
//! A [`LabeledCorpus`] is built once (from a file, the simulator or the ingest
//! tool) and is read-only afterwards. Term ids index a [`Vocabulary`] sorted by
//! term string, so two corpora with the same terms always agree on ids.

mod ingest;
mod io;
mod stats;

use std::borrow::Cow;
use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

pub use ingest::{ingest_raw, parse_timestamp, IngestOptions};
pub use io::{
    parse_corpus, read_corpus, read_corpus_with_truth, read_truth, write_corpus, write_corpus_to,
    write_truth, TruthFile,
};
pub use stats::{day_term_stats, DayTermStats};

/// Integer id of a term in a [`Vocabulary`].
pub type TermId = u32;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("document `{0}` has no tokens")]
    EmptyDocument(String),
    #[error("document `{doc_id}` references term id {term} outside a vocabulary of {vocab_size}")]
    TokenOutOfRange {
        doc_id: String,
        term: TermId,
        vocab_size: usize,
    },
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("ground truth: {0}")]
    Truth(String),
    #[error("{0}")]
    Ingest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("truth sidecar: {0}")]
    Json(#[from] serde_json::Error),
}

/// Distinct terms sorted by string; ids are positions in that order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, TermId>,
}

impl Vocabulary {
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = terms.into_iter().map(Into::into).collect();
        let terms: Vec<String> = set.into_iter().collect();
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TermId))
            .collect();
        Self { terms, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<TermId> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// One document: a multiset of term ids observed on a given day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub day: u32,
    /// Token order is kept for faithful file round-trips but carries no meaning.
    pub tokens: Vec<TermId>,
    pub label: Option<String>,
}

impl Document {
    /// `(term, count)` pairs sorted by term id.
    pub fn term_counts(&self) -> Vec<(TermId, u32)> {
        let mut sorted = self.tokens.clone();
        sorted.sort_unstable();
        let mut out: Vec<(TermId, u32)> = Vec::with_capacity(sorted.len());
        for t in sorted {
            match out.last_mut() {
                Some((last, c)) if *last == t => *c += 1,
                _ => out.push((t, 1)),
            }
        }
        out
    }

    /// Distinct terms, ascending.
    pub fn distinct_terms(&self) -> Vec<TermId> {
        let mut terms = self.tokens.clone();
        terms.sort_unstable();
        terms.dedup();
        terms
    }
}

/// All documents sharing one day.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DayBatch {
    pub day: u32,
    pub documents: Vec<Document>,
}

impl DayBatch {
    pub fn empty(day: u32) -> Self {
        Self {
            day,
            documents: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

/// Ground truth for one planted (or held-out) novel topic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    /// Label carried by the novel documents.
    pub novel_label: String,
    /// First day a novel document appears.
    pub onset_day: u32,
    /// Top terms of the novel topic (at most 100).
    pub novel_words: BTreeSet<TermId>,
    pub novel_doc_ids: BTreeSet<String>,
    /// True when `novel_words` is a frequency-ratio proxy rather than the
    /// generating distribution's top terms.
    pub proxy_words: bool,
}

/// Size of the novel-word truth set.
pub const NOVEL_WORDS: usize = 100;

/// A document before its tokens are mapped to ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub doc_id: String,
    pub day: u32,
    pub tokens: Vec<String>,
    pub label: Option<String>,
}

#[derive(Debug, Clone)]
pub struct LabeledCorpus {
    vocabulary: Vocabulary,
    batches: Vec<DayBatch>,
    ground_truth: Option<GroundTruth>,
}

impl LabeledCorpus {
    /// Groups documents into ascending day batches (stable within a day) and
    /// validates every invariant.
    pub fn new(
        vocabulary: Vocabulary,
        mut documents: Vec<Document>,
        ground_truth: Option<GroundTruth>,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(documents.len());
        for doc in &documents {
            if doc.tokens.is_empty() {
                return Err(CorpusError::EmptyDocument(doc.doc_id.clone()));
            }
            if let Some(&bad) = doc.tokens.iter().find(|&&t| t as usize >= vocabulary.len()) {
                return Err(CorpusError::TokenOutOfRange {
                    doc_id: doc.doc_id.clone(),
                    term: bad,
                    vocab_size: vocabulary.len(),
                });
            }
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(CorpusError::DuplicateDocId(doc.doc_id.clone()));
            }
        }
        documents.sort_by_key(|d| d.day);
        let mut batches: Vec<DayBatch> = Vec::new();
        for doc in documents {
            match batches.last_mut() {
                Some(b) if b.day == doc.day => b.documents.push(doc),
                _ => batches.push(DayBatch {
                    day: doc.day,
                    documents: vec![doc],
                }),
            }
        }
        let corpus = Self {
            vocabulary,
            batches,
            ground_truth: None,
        };
        corpus.with_truth(ground_truth)
    }

    /// Maps string tokens to a vocabulary built from their union plus any
    /// truth terms.
    pub fn from_raw(raw: Vec<RawDocument>, truth: Option<TruthFile>) -> Result<Self, CorpusError> {
        let mut terms: BTreeSet<&str> = BTreeSet::new();
        for d in &raw {
            terms.extend(d.tokens.iter().map(String::as_str));
        }
        if let Some(t) = &truth {
            terms.extend(t.novel_words.iter().map(String::as_str));
        }
        let vocabulary = Vocabulary::from_terms(terms);
        let documents = raw
            .into_iter()
            .map(|d| Document {
                tokens: d
                    .tokens
                    .iter()
                    .map(|t| vocabulary.index[t.as_str()])
                    .collect(),
                doc_id: d.doc_id,
                day: d.day,
                label: d.label,
            })
            .collect();
        let truth = truth.map(|t| t.resolve(&vocabulary)).transpose()?;
        Self::new(vocabulary, documents, truth)
    }

    /// Replaces the ground truth after checking it against the corpus.
    pub fn with_truth(mut self, truth: Option<GroundTruth>) -> Result<Self, CorpusError> {
        if let Some(gt) = &truth {
            self.check_truth(gt)?;
        }
        self.ground_truth = truth;
        Ok(self)
    }

    fn check_truth(&self, gt: &GroundTruth) -> Result<(), CorpusError> {
        if gt.novel_words.len() > NOVEL_WORDS {
            return Err(CorpusError::Truth(format!(
                "{} novel words, at most {NOVEL_WORDS} allowed",
                gt.novel_words.len()
            )));
        }
        if let Some(&w) = gt
            .novel_words
            .iter()
            .find(|&&w| w as usize >= self.vocabulary.len())
        {
            return Err(CorpusError::Truth(format!(
                "novel word id {w} outside vocabulary"
            )));
        }
        let mut found = 0usize;
        for doc in self.documents() {
            if gt.novel_doc_ids.contains(&doc.doc_id) {
                found += 1;
                if doc.label.as_deref() != Some(gt.novel_label.as_str()) {
                    return Err(CorpusError::Truth(format!(
                        "novel document `{}` is not labeled `{}`",
                        doc.doc_id, gt.novel_label
                    )));
                }
                if doc.day < gt.onset_day {
                    return Err(CorpusError::Truth(format!(
                        "novel document `{}` on day {} precedes onset {}",
                        doc.doc_id, doc.day, gt.onset_day
                    )));
                }
            }
        }
        if found != gt.novel_doc_ids.len() {
            return Err(CorpusError::Truth(format!(
                "{} novel document ids do not exist in the corpus",
                gt.novel_doc_ids.len() - found
            )));
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn batches(&self) -> &[DayBatch] {
        &self.batches
    }

    pub fn ground_truth(&self) -> Option<&GroundTruth> {
        self.ground_truth.as_ref()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> + '_ {
        self.batches.iter().flat_map(|b| b.documents.iter())
    }

    pub fn num_documents(&self) -> usize {
        self.batches.iter().map(|b| b.documents.len()).sum()
    }

    pub fn first_day(&self) -> Option<u32> {
        self.batches.first().map(|b| b.day)
    }

    pub fn last_day(&self) -> Option<u32> {
        self.batches.last().map(|b| b.day)
    }

    /// Every day from the first to the last batch, with empty batches filling
    /// the gaps.
    pub fn stream(&self) -> impl Iterator<Item = Cow<'_, DayBatch>> + '_ {
        let (first, last) = match (self.first_day(), self.last_day()) {
            (Some(f), Some(l)) => (f, l + 1),
            _ => (0, 0),
        };
        let mut next = 0usize;
        (first..last).map(move |day| match self.batches.get(next) {
            Some(b) if b.day == day => {
                next += 1;
                Cow::Borrowed(b)
            }
            _ => Cow::Owned(DayBatch::empty(day)),
        })
    }

    /// Day of every document, by id.
    pub fn doc_days(&self) -> HashMap<&str, u32> {
        self.documents()
            .map(|d| (d.doc_id.as_str(), d.day))
            .collect()
    }

    /// Distinct labels in first-seen order.
    pub fn labels(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for d in self.documents() {
            if let Some(l) = &d.label {
                if seen.insert(l.as_str()) {
                    out.push(l.clone());
                }
            }
        }
        out
    }

    /// Total occurrences of each term across the corpus.
    pub fn total_term_counts(&self) -> Vec<u64> {
        let mut tf = vec![0u64; self.vocabulary.len()];
        for d in self.documents() {
            for &t in &d.tokens {
                tf[t as usize] += 1;
            }
        }
        tf
    }
}
