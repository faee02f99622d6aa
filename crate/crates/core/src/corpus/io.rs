//! Corpus and ground-truth files.
//!
//! Corpus lines are `doc_id<TAB>day<TAB>tokens<TAB>label`, tokens separated by
//! single spaces and the label field optional. Lines starting with `#` are
//! comments. [`write_corpus`] emits documents by ascending day, keeping the
//! within-day order, so a written file reads back and re-writes byte for byte.
//!
//! Ground truth lives in a JSON sidecar ([`TruthFile`]) because novel words
//! cannot be recovered from document labels alone.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, GroundTruth, LabeledCorpus, RawDocument, Vocabulary};

pub fn parse_corpus<R: Read>(reader: R) -> Result<Vec<RawDocument>, CorpusError> {
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let err = |message: String| CorpusError::Parse {
            line: lineno,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(err(format!(
                "expected 3 or 4 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let doc_id = fields[0];
        if doc_id.is_empty() {
            return Err(err("empty document id".into()));
        }
        let day: i64 = fields[1]
            .parse()
            .map_err(|_| err(format!("day `{}` is not an integer", fields[1])))?;
        if day < 0 {
            return Err(err(format!("negative day {day}")));
        }
        let day = u32::try_from(day).map_err(|_| err(format!("day {day} out of range")))?;
        let tokens: Vec<String> = fields[2].split_whitespace().map(String::from).collect();
        if tokens.is_empty() {
            return Err(err(format!("document `{doc_id}` has an empty token list")));
        }
        let label = fields
            .get(3)
            .filter(|l| !l.is_empty())
            .map(|l| l.to_string());
        docs.push(RawDocument {
            doc_id: doc_id.to_string(),
            day,
            tokens,
            label,
        });
    }
    Ok(docs)
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<LabeledCorpus, CorpusError> {
    let raw = parse_corpus(File::open(path)?)?;
    LabeledCorpus::from_raw(raw, None)
}

/// Reads a corpus and attaches the ground truth from its sidecar.
pub fn read_corpus_with_truth(
    corpus: impl AsRef<Path>,
    truth: impl AsRef<Path>,
) -> Result<LabeledCorpus, CorpusError> {
    let raw = parse_corpus(File::open(corpus)?)?;
    let truth = read_truth(truth)?;
    LabeledCorpus::from_raw(raw, Some(truth))
}

pub fn write_corpus_to<W: Write>(corpus: &LabeledCorpus, writer: W) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(writer);
    let vocab = corpus.vocabulary();
    for doc in corpus.documents() {
        write!(w, "{}\t{}\t", doc.doc_id, doc.day)?;
        for (i, &t) in doc.tokens.iter().enumerate() {
            if i > 0 {
                w.write_all(b" ")?;
            }
            // Tokens were validated against the vocabulary at construction.
            w.write_all(vocab.term(t).unwrap_or_default().as_bytes())?;
        }
        if let Some(label) = &doc.label {
            write!(w, "\t{label}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_corpus(corpus: &LabeledCorpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    write_corpus_to(corpus, File::create(path)?)
}

/// Serialized form of [`GroundTruth`], with terms as strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthFile {
    pub novel_label: String,
    pub onset_day: u32,
    pub novel_words: Vec<String>,
    pub novel_doc_ids: Vec<String>,
    #[serde(default)]
    pub proxy_words: bool,
}

impl TruthFile {
    pub fn from_truth(truth: &GroundTruth, vocab: &Vocabulary) -> Self {
        Self {
            novel_label: truth.novel_label.clone(),
            onset_day: truth.onset_day,
            novel_words: truth
                .novel_words
                .iter()
                .filter_map(|&w| vocab.term(w).map(String::from))
                .collect(),
            novel_doc_ids: truth.novel_doc_ids.iter().cloned().collect(),
            proxy_words: truth.proxy_words,
        }
    }

    pub fn resolve(&self, vocab: &Vocabulary) -> Result<GroundTruth, CorpusError> {
        let novel_words = self
            .novel_words
            .iter()
            .map(|w| {
                vocab.id(w).ok_or_else(|| {
                    CorpusError::Truth(format!("novel word `{w}` not in vocabulary"))
                })
            })
            .collect::<Result<BTreeSet<_>, _>>()?;
        Ok(GroundTruth {
            novel_label: self.novel_label.clone(),
            onset_day: self.onset_day,
            novel_words,
            novel_doc_ids: self.novel_doc_ids.iter().cloned().collect(),
            proxy_words: self.proxy_words,
        })
    }
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<TruthFile, CorpusError> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_truth(
    truth: &GroundTruth,
    vocab: &Vocabulary,
    path: impl AsRef<Path>,
) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &TruthFile::from_truth(truth, vocab))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<LabeledCorpus, CorpusError> {
        LabeledCorpus::from_raw(parse_corpus(text.as_bytes())?, None)
    }

    fn render(c: &LabeledCorpus) -> String {
        let mut out = Vec::new();
        write_corpus_to(c, &mut out).unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn groups_documents_by_day() {
        let c = parse("a\t0\tx y\nb\t0\ty\nc\t1\tz\n").unwrap();
        let sizes: Vec<usize> = c.batches().iter().map(|b| b.documents.len()).collect();
        assert_eq!(sizes, [2, 1]);
    }

    #[test]
    fn orders_days_ascending() {
        let c = parse("a\t3\tx\nb\t1\ty\nc\t1\tz\n").unwrap();
        let shape: Vec<(u32, usize)> = c
            .batches()
            .iter()
            .map(|b| (b.day, b.documents.len()))
            .collect();
        assert_eq!(shape, [(1, 2), (3, 1)]);
    }

    #[test]
    fn singleton_token_gets_its_own_id() {
        let c = parse("a\t0\tcommon rare\nb\t0\tcommon\n").unwrap();
        let v = c.vocabulary();
        assert_eq!(v.len(), 2);
        assert_ne!(v.id("rare"), v.id("common"));
        assert!(v.id("rare").is_some());
    }

    #[test]
    fn skips_comments_and_keeps_labels() {
        let c = parse("# header\na\t0\tx\tsports\nb\t0\ty\t\n").unwrap();
        let docs: Vec<_> = c.documents().collect();
        assert_eq!(docs[0].label.as_deref(), Some("sports"));
        assert_eq!(docs[1].label, None);
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse("a\t0\tx\nb\tnope\ty\n").unwrap_err();
        assert!(matches!(e, CorpusError::Parse { line: 2, .. }), "{e}");
        let e = parse("a\t-1\tx\n").unwrap_err();
        assert!(e.to_string().contains("negative day"), "{e}");
        let e = parse("a\t0\t \n").unwrap_err();
        assert!(e.to_string().contains("empty token list"), "{e}");
        let e = parse("only-one-field\n").unwrap_err();
        assert!(matches!(e, CorpusError::Parse { line: 1, .. }));
    }

    #[test]
    fn single_document_round_trips() {
        let text = "doc-1\t7\tb a b\tnews\n";
        assert_eq!(render(&parse(text).unwrap()), text);
    }

    #[test]
    fn unlabeled_corpus_omits_label_field() {
        let text = "a\t0\tx y\nb\t2\ty\n";
        let out = render(&parse(text).unwrap());
        assert_eq!(out, text);
        assert!(out.lines().all(|l| l.split('\t').count() == 3));
    }

    #[test]
    fn truth_sidecar_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let c = parse("a\t0\tx y\tn\nb\t2\tz\tk\n").unwrap();
        let gt = GroundTruth {
            novel_label: "k".into(),
            onset_day: 2,
            novel_words: [c.vocabulary().id("z").unwrap()].into(),
            novel_doc_ids: ["b".to_string()].into(),
            proxy_words: false,
        };
        let cpath = dir.path().join("c.tsv");
        let tpath = dir.path().join("c.truth.json");
        write_corpus(&c, &cpath).unwrap();
        write_truth(&gt, c.vocabulary(), &tpath).unwrap();
        let back = read_corpus_with_truth(&cpath, &tpath).unwrap();
        assert_eq!(back.ground_truth(), Some(&gt));
    }

    #[test]
    fn truth_word_outside_corpus_extends_vocabulary() {
        let raw = parse_corpus("a\t0\tx\tk\n".as_bytes()).unwrap();
        let truth = TruthFile {
            novel_label: "k".into(),
            onset_day: 0,
            novel_words: vec!["never-seen".into()],
            novel_doc_ids: vec!["a".into()],
            proxy_words: false,
        };
        let c = LabeledCorpus::from_raw(raw, Some(truth)).unwrap();
        assert_eq!(c.vocabulary().len(), 2);
    }
}
