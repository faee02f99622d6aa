//! Scoring detector output against ground truth.
//!
//! Three tasks are scored from the same report stream: the first alert after
//! onset (delay), the novel words flagged each day, and the novel documents
//! flagged each day. AUC measures how well document scores rank novel
//! documents above normal ones.
//!
//! Word truth is the fixed novel-word set on every day from onset on (empty
//! before). Document truth is per day: the novel documents of that day. A
//! flagged document is credited to its own day, whichever report flagged it,
//! so detectors that flag earlier documents retroactively are scored
//! consistently.

mod csv_out;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{GroundTruth, LabeledCorpus};
use crate::detectors::{Alert, DayReport};

pub use csv_out::{write_curves_csv, CurveRow};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("AUC needs both novel and normal documents ({novel} novel, {normal} normal)")]
    SingleClass { novel: usize, normal: usize },
    #[error("corpus has no ground truth")]
    NoTruth,
}

/// Precision, recall and F-measure. Recall is absent when the truth set is
/// empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: Option<f64>,
    pub f_measure: f64,
}

/// Pooled counts behind a [`Prf`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub true_positives: usize,
    pub predicted: usize,
    pub truth: usize,
}

impl Confusion {
    pub fn of<T: Ord>(predicted: &BTreeSet<T>, truth: &BTreeSet<T>) -> Self {
        Self {
            true_positives: predicted.intersection(truth).count(),
            predicted: predicted.len(),
            truth: truth.len(),
        }
    }

    pub fn add(&mut self, other: Confusion) {
        self.true_positives += other.true_positives;
        self.predicted += other.predicted;
        self.truth += other.truth;
    }

    /// Empty predictions have precision 1 (nothing claimed, nothing wrong).
    pub fn prf(&self) -> Prf {
        let precision = if self.predicted == 0 {
            1.0
        } else {
            self.true_positives as f64 / self.predicted as f64
        };
        let recall = (self.truth > 0).then(|| self.true_positives as f64 / self.truth as f64);
        Prf {
            precision,
            recall,
            f_measure: f_measure(precision, recall.unwrap_or(0.0)),
        }
    }
}

pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn prf<T: Ord>(predicted: &BTreeSet<T>, truth: &BTreeSet<T>) -> Prf {
    Confusion::of(predicted, truth).prf()
}

/// Days from onset to the first alert on or after onset, and the number of
/// alerts raised before onset.
pub fn detection_delay(alerts: &[Alert], onset_day: u32) -> (Option<u32>, usize) {
    let false_alerts = alerts.iter().filter(|a| a.day < onset_day).count();
    let delay = alerts
        .iter()
        .filter(|a| a.day >= onset_day)
        .map(|a| a.day - onset_day)
        .min();
    (delay, false_alerts)
}

/// Probability that a random novel item outscores a random normal one, ties
/// counting one half (Mann-Whitney U over midranks).
pub fn auc(scored: &[(f64, bool)]) -> Result<f64, EvalError> {
    let novel = scored.iter().filter(|s| s.1).count();
    let normal = scored.len() - novel;
    if novel == 0 || normal == 0 {
        return Err(EvalError::SingleClass { novel, normal });
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scored[order[j + 1]].0 == scored[order[i]].0 {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| scored[k].1).count() as f64;
        i = j + 1;
    }
    let (n1, n0) = (novel as f64, normal as f64);
    Ok((rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0))
}

/// Which days enter the aggregated scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationWindow {
    #[default]
    PostOnset,
    WholeRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub window: AggregationWindow,
    /// Leave days without predictions out of the macro averages instead of
    /// counting them with vacuous precision 1.
    pub skip_empty_days: bool,
}

/// One day of the temporal curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayScores {
    pub day: u32,
    pub words: Prf,
    pub docs: Prf,
    pub word_counts: ConfusionRecord,
    pub doc_counts: ConfusionRecord,
    pub novel_count: usize,
    /// `novel_count` divided by the busiest day's count.
    pub novel_count_normalized: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionRecord {
    pub true_positives: usize,
    pub predicted: usize,
    pub truth: usize,
}

impl From<Confusion> for ConfusionRecord {
    fn from(c: Confusion) -> Self {
        Self {
            true_positives: c.true_positives,
            predicted: c.predicted,
            truth: c.truth,
        }
    }
}

impl From<ConfusionRecord> for Confusion {
    fn from(c: ConfusionRecord) -> Self {
        Self {
            true_positives: c.true_positives,
            predicted: c.predicted,
            truth: c.truth,
        }
    }
}

/// Words and documents scored over the same set of days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskScores {
    pub words: Prf,
    pub docs: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_day: Vec<DayScores>,
    /// Pooled confusion counts over the aggregation window.
    pub micro: TaskScores,
    /// Means of the daily scores over the aggregation window.
    pub macro_avg: TaskScores,
    pub alert_delay_days: Option<u32>,
    pub false_alerts: usize,
    pub total_alerts: usize,
    pub auc: Option<f64>,
}

impl EvalReport {
    /// Days (within the window) whose document recall reaches `level`.
    pub fn days_with_doc_recall_at_least(&self, level: f64, onset: u32) -> usize {
        self.per_day
            .iter()
            .filter(|d| d.day >= onset && d.docs.recall.is_some_and(|r| r >= level))
            .count()
    }
}

/// Per-day word and document scores.
pub fn temporal_curves(
    reports: &[DayReport],
    truth: &GroundTruth,
    doc_days: &HashMap<&str, u32>,
) -> Vec<DayScores> {
    let mut flagged_by_day: BTreeMap<u32, BTreeSet<&str>> = BTreeMap::new();
    for r in reports {
        for d in &r.flagged_docs {
            let day = doc_days.get(d.as_str()).copied().unwrap_or(r.day);
            flagged_by_day.entry(day).or_default().insert(d.as_str());
        }
    }
    let mut truth_by_day: BTreeMap<u32, BTreeSet<&str>> = BTreeMap::new();
    for d in &truth.novel_doc_ids {
        if let Some(&day) = doc_days.get(d.as_str()) {
            truth_by_day.entry(day).or_default().insert(d.as_str());
        }
    }
    let max_count = truth_by_day.values().map(BTreeSet::len).max().unwrap_or(0);
    let empty_words = BTreeSet::new();
    let empty_docs = BTreeSet::new();
    reports
        .iter()
        .map(|r| {
            let words: BTreeSet<_> = r.flagged_words.iter().copied().collect();
            let word_truth = if r.day >= truth.onset_day {
                &truth.novel_words
            } else {
                &empty_words
            };
            let wc = Confusion::of(&words, word_truth);
            let docs = flagged_by_day.get(&r.day).unwrap_or(&empty_docs);
            let doc_truth = truth_by_day.get(&r.day).unwrap_or(&empty_docs);
            let dc = Confusion::of(docs, doc_truth);
            let novel_count = doc_truth.len();
            DayScores {
                day: r.day,
                words: wc.prf(),
                docs: dc.prf(),
                word_counts: wc.into(),
                doc_counts: dc.into(),
                novel_count,
                novel_count_normalized: if max_count == 0 {
                    0.0
                } else {
                    novel_count as f64 / max_count as f64
                },
            }
        })
        .collect()
}

/// Micro average: pooled confusion counts.
pub fn micro_average<'a>(days: impl IntoIterator<Item = &'a DayScores>) -> TaskScores {
    let (mut w, mut d) = (Confusion::default(), Confusion::default());
    for day in days {
        w.add(day.word_counts.into());
        d.add(day.doc_counts.into());
    }
    TaskScores {
        words: w.prf(),
        docs: d.prf(),
    }
}

/// Macro average: mean of daily precision (and of daily recall over days with
/// truth); F from the averaged P and R.
pub fn macro_average<'a>(
    days: impl IntoIterator<Item = &'a DayScores> + Clone,
    skip_empty: bool,
) -> TaskScores {
    let avg = |pick: &dyn Fn(&DayScores) -> (Prf, usize)| {
        let (mut p_sum, mut p_n, mut r_sum, mut r_n) = (0.0, 0usize, 0.0, 0usize);
        for d in days.clone() {
            let (prf, predicted) = pick(d);
            if !(skip_empty && predicted == 0) {
                p_sum += prf.precision;
                p_n += 1;
            }
            if let Some(r) = prf.recall {
                r_sum += r;
                r_n += 1;
            }
        }
        let p = if p_n == 0 { 1.0 } else { p_sum / p_n as f64 };
        let r = (r_n > 0).then(|| r_sum / r_n as f64);
        Prf {
            precision: p,
            recall: r,
            f_measure: f_measure(p, r.unwrap_or(0.0)),
        }
    };
    TaskScores {
        words: avg(&|d| (d.words, d.word_counts.predicted)),
        docs: avg(&|d| (d.docs, d.doc_counts.predicted)),
    }
}

/// Full evaluation of one detector run on one corpus.
pub fn evaluate(
    reports: &[DayReport],
    corpus: &LabeledCorpus,
    options: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let truth = corpus.ground_truth().ok_or(EvalError::NoTruth)?;
    let doc_days = corpus.doc_days();
    let per_day = temporal_curves(reports, truth, &doc_days);
    let in_window = |d: &&DayScores| match options.window {
        AggregationWindow::PostOnset => d.day >= truth.onset_day,
        AggregationWindow::WholeRun => true,
    };
    let micro = micro_average(per_day.iter().filter(in_window));
    let macro_avg = macro_average(per_day.iter().filter(in_window), options.skip_empty_days);
    let alerts: Vec<Alert> = reports
        .iter()
        .flat_map(|r| r.alerts.iter().cloned())
        .collect();
    let (alert_delay_days, false_alerts) = detection_delay(&alerts, truth.onset_day);
    let scored = own_day_doc_scores(reports, &doc_days)
        .into_iter()
        .map(|(id, s)| (s, truth.novel_doc_ids.contains(id)))
        .collect::<Vec<_>>();
    Ok(EvalReport {
        per_day,
        micro,
        macro_avg,
        alert_delay_days,
        false_alerts,
        total_alerts: alerts.len(),
        auc: auc(&scored).ok(),
    })
}

/// Each document's score as reported on its own day, in document-id order.
pub fn own_day_doc_scores<'a>(
    reports: &'a [DayReport],
    doc_days: &HashMap<&str, u32>,
) -> BTreeMap<&'a str, f64> {
    let mut out = BTreeMap::new();
    for r in reports {
        for (id, &s) in &r.doc_scores {
            if doc_days.get(id.as_str()) == Some(&r.day) {
                out.insert(id.as_str(), s);
            }
        }
    }
    out
}
