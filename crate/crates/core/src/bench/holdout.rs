//! Turning a labeled corpus into a novelty benchmark by holding a category
//! out of its early days.

use std::collections::BTreeSet;

use serde::Serialize;

use super::BenchError;
use crate::corpus::{Document, GroundTruth, LabeledCorpus, TermId, NOVEL_WORDS};
use crate::detectors::{run_detector, DetectorConfig};
use crate::evaluation::{auc, own_day_doc_scores};

/// First quarter of the corpus's day span.
pub fn default_historic_days(corpus: &LabeledCorpus) -> u32 {
    match (corpus.first_day(), corpus.last_day()) {
        (Some(f), Some(l)) => f + (l - f + 1) / 4,
        _ => 0,
    }
}

/// Removes `category` documents dated before `historic_days` and marks the
/// remaining ones as novel.
///
/// Novel words are a proxy: the terms whose add-one smoothed relative
/// frequency inside the surviving category documents most exceeds their
/// frequency in the whole (cut) corpus.
pub fn holdout_inject(
    corpus: &LabeledCorpus,
    category: &str,
    historic_days: u32,
) -> Result<LabeledCorpus, BenchError> {
    if corpus.last_day().is_some_and(|l| historic_days > l) {
        return Err(BenchError::Holdout(format!(
            "historic window of {historic_days} days covers the whole corpus"
        )));
    }
    let is_cat = |d: &Document| d.label.as_deref() == Some(category);
    let kept: Vec<Document> = corpus
        .documents()
        .filter(|d| !(is_cat(d) && d.day < historic_days))
        .cloned()
        .collect();
    let novel: Vec<&Document> = kept.iter().filter(|d| is_cat(d)).collect();
    let onset_day = novel.iter().map(|d| d.day).min().ok_or_else(|| {
        BenchError::Holdout(format!(
            "category `{category}` has no documents from day {historic_days} on"
        ))
    })?;
    let vocab = corpus.vocabulary().clone();
    let v = vocab.len() as f64;
    let mut tf_cat = vec![0u64; vocab.len()];
    let mut tf_all = vec![0u64; vocab.len()];
    for d in &kept {
        for &t in &d.tokens {
            tf_all[t as usize] += 1;
            if is_cat(d) {
                tf_cat[t as usize] += 1;
            }
        }
    }
    let n_cat: u64 = tf_cat.iter().sum();
    let n_all: u64 = tf_all.iter().sum();
    let mut ratios: Vec<(TermId, f64)> = (0..vocab.len())
        .filter(|&t| tf_cat[t] > 0)
        .map(|t| {
            let p_cat = (tf_cat[t] as f64 + 1.0) / (n_cat as f64 + v);
            let p_all = (tf_all[t] as f64 + 1.0) / (n_all as f64 + v);
            (t as TermId, p_cat / p_all)
        })
        .collect();
    ratios.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let truth = GroundTruth {
        novel_label: category.to_string(),
        onset_day,
        novel_words: ratios.iter().take(NOVEL_WORDS).map(|r| r.0).collect(),
        novel_doc_ids: novel
            .iter()
            .map(|d| d.doc_id.clone())
            .collect::<BTreeSet<_>>(),
        proxy_words: true,
    };
    Ok(LabeledCorpus::new(vocab, kept, Some(truth))?)
}

/// One row of the detectors × categories AUC table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoldoutAuc {
    pub category: String,
    pub detector: String,
    pub auc: Option<f64>,
    pub novel_docs: usize,
    pub scored_docs: usize,
}

/// Writes the AUC table, one row per (category, detector).
pub fn write_holdout_table<W: std::io::Write>(rows: &[HoldoutAuc], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Streams the injected corpus through a fresh detector (the historic days
/// act as its initialization) and ranks every later document by its score.
pub fn rank_and_auc(
    injected: &LabeledCorpus,
    detector: &DetectorConfig,
    historic_days: u32,
    seed: u64,
) -> Result<HoldoutAuc, BenchError> {
    let truth = injected
        .ground_truth()
        .ok_or_else(|| BenchError::Holdout("corpus has no ground truth".into()))?;
    let mut d = detector.build(injected.vocabulary().len(), seed)?;
    let reports = run_detector(d.as_mut(), injected)?;
    let doc_days = injected.doc_days();
    let scored: Vec<(f64, bool)> = own_day_doc_scores(&reports, &doc_days)
        .into_iter()
        .filter(|(id, _)| doc_days[id] >= historic_days)
        .map(|(id, s)| (s, truth.novel_doc_ids.contains(id)))
        .collect();
    Ok(HoldoutAuc {
        category: truth.novel_label.clone(),
        detector: detector.kind().name().to_string(),
        auc: auc(&scored).ok(),
        novel_docs: scored.iter().filter(|s| s.1).count(),
        scored_docs: scored.len(),
    })
}
