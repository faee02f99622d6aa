use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::{rank, DetectError};
use crate::corpus::{TermId, Vocabulary};

#[derive(Debug, Clone, PartialEq)]
pub struct Alert {
    pub day: u32,
    pub trigger_terms: Vec<TermId>,
    pub strength: f64,
}

/// What a detector says about one day.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DayReport {
    pub day: u32,
    /// Higher means more novel. Only terms the detector scored appear.
    pub word_scores: BTreeMap<TermId, f64>,
    pub flagged_words: Vec<TermId>,
    /// Scores of today's documents, plus any earlier document the detector
    /// re-flags today.
    pub doc_scores: BTreeMap<String, f64>,
    pub flagged_docs: Vec<String>,
    pub alerts: Vec<Alert>,
    /// Documents whose representation was all zeros (scored 0).
    pub degenerate_docs: Vec<String>,
}

impl DayReport {
    pub fn empty(day: u32) -> Self {
        Self {
            day,
            ..Default::default()
        }
    }

    /// Checks finiteness, the flag budget and the prefix-of-ranking property.
    pub fn check_invariants(&self, max_words: usize) -> Result<(), String> {
        if self.flagged_words.len() > max_words {
            return Err(format!(
                "{} flagged words > {max_words}",
                self.flagged_words.len()
            ));
        }
        let words = rank(self.word_scores.iter().map(|(&t, &s)| (t, s)));
        check_prefix(&words, &self.flagged_words, "word")?;
        let docs = rank(self.doc_scores.iter().map(|(d, &s)| (d.clone(), s)));
        check_prefix(&docs, &self.flagged_docs, "doc")?;
        if self
            .alerts
            .iter()
            .any(|a| !a.strength.is_finite() || a.day != self.day)
        {
            return Err("alert with non-finite strength or wrong day".into());
        }
        Ok(())
    }
}

fn check_prefix<K: PartialEq + std::fmt::Debug>(
    ranked: &[(K, f64)],
    flagged: &[K],
    what: &str,
) -> Result<(), String> {
    if let Some((k, s)) = ranked.iter().find(|(_, s)| !s.is_finite()) {
        return Err(format!("{what} {k:?} has non-finite score {s}"));
    }
    if flagged.len() > ranked.len() {
        return Err(format!("more flagged {what}s than scored ones"));
    }
    for (i, (f, (k, _))) in flagged.iter().zip(ranked).enumerate() {
        if f != k {
            return Err(format!("flagged {what} #{i} is {f:?}, ranking has {k:?}"));
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct AlertRecord {
    day: u32,
    trigger_terms: Vec<String>,
    strength: f64,
}

/// One JSON line per day; terms are written as strings so files do not depend
/// on id assignment.
#[derive(Serialize, Deserialize)]
struct ReportRecord {
    day: u32,
    flagged_words: Vec<String>,
    flagged_docs: Vec<String>,
    alerts: Vec<AlertRecord>,
    word_scores: BTreeMap<String, f64>,
    doc_scores: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    degenerate_docs: Vec<String>,
}

pub fn write_reports_jsonl<W: Write>(
    reports: &[DayReport],
    vocab: &Vocabulary,
    mut writer: W,
) -> Result<(), DetectError> {
    let name = |t: &TermId| -> Result<String, DetectError> {
        vocab
            .term(*t)
            .map(str::to_string)
            .ok_or(DetectError::TermOutOfRange {
                term: *t,
                vocab_size: vocab.len(),
            })
    };
    for r in reports {
        let record = ReportRecord {
            day: r.day,
            flagged_words: r.flagged_words.iter().map(name).collect::<Result<_, _>>()?,
            flagged_docs: r.flagged_docs.clone(),
            alerts: r
                .alerts
                .iter()
                .map(|a| {
                    Ok(AlertRecord {
                        day: a.day,
                        trigger_terms: a
                            .trigger_terms
                            .iter()
                            .map(name)
                            .collect::<Result<_, _>>()?,
                        strength: a.strength,
                    })
                })
                .collect::<Result<_, DetectError>>()?,
            word_scores: r
                .word_scores
                .iter()
                .map(|(t, &s)| Ok((name(t)?, s)))
                .collect::<Result<_, DetectError>>()?,
            doc_scores: r.doc_scores.clone(),
            degenerate_docs: r.degenerate_docs.clone(),
        };
        let line =
            serde_json::to_string(&record).map_err(|e| DetectError::Report(e.to_string()))?;
        writeln!(writer, "{line}").map_err(|e| DetectError::Report(e.to_string()))?;
    }
    Ok(())
}

pub fn read_reports_jsonl<R: Read>(
    reader: R,
    vocab: &Vocabulary,
) -> Result<Vec<DayReport>, DetectError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| DetectError::Report(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ReportRecord = serde_json::from_str(&line)
            .map_err(|e| DetectError::Report(format!("line {}: {e}", i + 1)))?;
        let id = |s: &String| {
            vocab
                .id(s)
                .ok_or_else(|| DetectError::Report(format!("line {}: unknown term `{s}`", i + 1)))
        };
        out.push(DayReport {
            day: rec.day,
            word_scores: rec
                .word_scores
                .iter()
                .map(|(t, &s)| Ok((id(t)?, s)))
                .collect::<Result<_, DetectError>>()?,
            flagged_words: rec.flagged_words.iter().map(id).collect::<Result<_, _>>()?,
            doc_scores: rec.doc_scores,
            flagged_docs: rec.flagged_docs,
            alerts: rec
                .alerts
                .iter()
                .map(|a| {
                    Ok(Alert {
                        day: a.day,
                        trigger_terms: a.trigger_terms.iter().map(id).collect::<Result<_, _>>()?,
                        strength: a.strength,
                    })
                })
                .collect::<Result<_, DetectError>>()?,
            degenerate_docs: rec.degenerate_docs,
        });
    }
    Ok(out)
}
