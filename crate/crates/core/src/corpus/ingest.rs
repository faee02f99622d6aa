//! Conversion of raw timestamped text into the corpus format.
//!
//! Input lines are `doc_id<TAB>timestamp<TAB>label<TAB>text`. Timestamps may be
//! unix seconds, RFC 3339 or `YYYY-MM-DD`; each maps to the UTC calendar day it
//! falls in, and day 0 is the earliest such day (or an explicit origin). Text is
//! split on whitespace only.

use std::io::{BufRead, BufReader, Read};

use chrono::{DateTime, NaiveDate};

use super::{CorpusError, RawDocument};

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub lowercase: bool,
    /// Calendar day mapped to day 0; defaults to the earliest document.
    pub origin: Option<NaiveDate>,
}

/// UTC calendar date of a timestamp.
pub fn parse_timestamp(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if let Ok(secs) = s.parse::<i64>() {
        return DateTime::from_timestamp(secs, 0).map(|dt| dt.date_naive());
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc().date());
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

/// Parses raw records; returns the documents and the number of records skipped
/// for having no tokens.
pub fn ingest_raw<R: Read>(
    reader: R,
    options: &IngestOptions,
) -> Result<(Vec<RawDocument>, usize), CorpusError> {
    let mut parsed: Vec<(String, NaiveDate, Option<String>, Vec<String>)> = Vec::new();
    let mut skipped = 0;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let err = |message: String| CorpusError::Parse {
            line: i + 1,
            message,
        };
        let mut fields = line.splitn(4, '\t');
        let (Some(id), Some(ts), Some(label), Some(text)) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(err(
                "expected doc_id, timestamp, label and text fields".into()
            ));
        };
        let date =
            parse_timestamp(ts).ok_or_else(|| err(format!("unparseable timestamp `{ts}`")))?;
        let tokens: Vec<String> = text
            .split_whitespace()
            .map(|t| {
                if options.lowercase {
                    t.to_lowercase()
                } else {
                    t.to_string()
                }
            })
            .collect();
        if tokens.is_empty() {
            skipped += 1;
            continue;
        }
        let label = (!label.is_empty()).then(|| label.to_string());
        parsed.push((id.to_string(), date, label, tokens));
    }
    let Some(origin) = options.origin.or_else(|| parsed.iter().map(|p| p.1).min()) else {
        return Ok((Vec::new(), skipped));
    };
    let docs = parsed
        .into_iter()
        .map(|(doc_id, date, label, tokens)| {
            let day = (date - origin).num_days();
            let day = u32::try_from(day).map_err(|_| {
                CorpusError::Ingest(format!(
                    "document `{doc_id}` dated before the origin {origin}"
                ))
            })?;
            Ok(RawDocument {
                doc_id,
                day,
                tokens,
                label,
            })
        })
        .collect::<Result<Vec<_>, CorpusError>>()?;
    Ok((docs, skipped))
}
