use std::io::Write;

use serde::Serialize;

use super::DayScores;

/// One line of the temporal-curve CSV. Missing recall is an empty field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub day: u32,
    pub word_precision: f64,
    pub word_recall: Option<f64>,
    pub doc_precision: f64,
    pub doc_recall: Option<f64>,
    pub novel_count_normalized: f64,
}

impl From<&DayScores> for CurveRow {
    fn from(d: &DayScores) -> Self {
        Self {
            day: d.day,
            word_precision: d.words.precision,
            word_recall: d.words.recall,
            doc_precision: d.docs.precision,
            doc_recall: d.docs.recall,
            novel_count_normalized: d.novel_count_normalized,
        }
    }
}

pub fn write_curves_csv<W: Write>(out: W, days: &[DayScores]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for d in days {
        w.serialize(CurveRow::from(d))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{ConfusionRecord, Prf};

    #[test]
    fn header_and_empty_recall() {
        let day = DayScores {
            day: 3,
            words: Prf {
                precision: 1.0,
                recall: None,
                f_measure: 0.0,
            },
            docs: Prf {
                precision: 0.5,
                recall: Some(0.25),
                f_measure: 1.0 / 3.0,
            },
            word_counts: ConfusionRecord::default(),
            doc_counts: ConfusionRecord::default(),
            novel_count: 2,
            novel_count_normalized: 0.5,
        };
        let mut buf = Vec::new();
        write_curves_csv(&mut buf, &[day]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "day,word_precision,word_recall,doc_precision,doc_recall,novel_count_normalized"
        );
        assert_eq!(lines.next().unwrap(), "3,1.0,,0.5,0.25,0.5");
    }
}
