//! Issue-ontology sentence classification: labels, datasets, a one-vs-rest
//! linear SVM, grid search over C and evaluation metrics.

mod grid;
mod metrics;
mod model_io;
mod svm;

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segment::Sentence;

pub use grid::{grid_search, stratified_folds, GridSearchResult, DEFAULT_FOLDS, DEFAULT_GRID};
pub use metrics::{evaluate, ConfusionMatrix, EvalReport};
pub use model_io::{read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use svm::{
    train_binary_svm, train_ovr_linear_svm, ClassWeighting, Prediction, SolverTrace, SvmModel, TrainOptions,
};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("class {0} has no training examples")]
    MissingClass(IssueLabel),
    #[error("class {label} has {count} item(s); at least 2 are required to split")]
    ClassTooSmall { label: IssueLabel, count: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("empty input")]
    Empty,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("class {label} has {count} item(s), so some of the {folds} folds lack it; use fewer folds")]
    FoldMissingClass {
        label: IssueLabel,
        count: usize,
        folds: usize,
    },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("annotation file: {0}")]
    Annotation(#[from] csv::Error),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The three trainable issue classes, in tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IssueLabel {
    Emphasize,
    Improvable,
    Others,
}

impl IssueLabel {
    pub const ALL: [IssueLabel; 3] = [IssueLabel::Emphasize, IssueLabel::Improvable, IssueLabel::Others];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IssueLabel::Emphasize => "emphasize",
            IssueLabel::Improvable => "improvable",
            IssueLabel::Others => "others",
        }
    }

    /// Emphasize ↔ Improvable; Others has no counterpart.
    pub fn opposite(self) -> Option<Self> {
        match self {
            IssueLabel::Emphasize => Some(IssueLabel::Improvable),
            IssueLabel::Improvable => Some(IssueLabel::Emphasize),
            IssueLabel::Others => None,
        }
    }
}

impl fmt::Display for IssueLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IssueLabel {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_lowercase();
        let norm = norm.strip_suffix(" issue").unwrap_or(&norm);
        match norm {
            "emphasize" | "emphasized" | "emphasis" => Ok(IssueLabel::Emphasize),
            "improvable" | "improbable" => Ok(IssueLabel::Improvable),
            "others" | "other" => Ok(IssueLabel::Others),
            _ => Err(ClassifierError::UnknownLabel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSentence {
    pub sentence: Sentence,
    pub label: IssueLabel,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub items: Vec<LabeledSentence>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &LabeledSentence> {
        self.items.iter().filter(move |i| i.split == split)
    }

    /// Per-class counts for one split, indexed by [`IssueLabel::index`].
    pub fn class_counts(&self, split: Split) -> [usize; 3] {
        let mut counts = [0; 3];
        for item in self.split(split) {
            counts[item.label.index()] += 1;
        }
        counts
    }
}

/// Per-class shuffled split: each class sends `round(fraction × size)` items
/// to Test. Item order is preserved; only the split tags change.
pub fn stratified_split(
    items: Vec<LabeledSentence>,
    test_fraction: f64,
    seed: u64,
) -> Result<Dataset, ClassifierError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(ClassifierError::InvalidParameter(format!(
            "test fraction {test_fraction} must lie strictly between 0 and 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = items;
    for label in IssueLabel::ALL {
        let mut members: Vec<usize> = (0..items.len()).filter(|&i| items[i].label == label).collect();
        if members.len() < 2 {
            return Err(ClassifierError::ClassTooSmall {
                label,
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        let n_test = (test_fraction * members.len() as f64).round() as usize;
        for (rank, &i) in members.iter().enumerate() {
            items[i].split = if rank < n_test { Split::Test } else { Split::Train };
        }
    }
    Ok(Dataset { items })
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationRow {
    paper_id: String,
    sentence_index: usize,
    text: String,
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

/// Reads tab-separated annotations with header
/// `paper_id  sentence_index  text  label [split]`. Missing split means Train.
pub fn read_annotations<R: Read>(reader: R) -> Result<Vec<LabeledSentence>, ClassifierError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for row in rdr.deserialize::<AnnotationRow>() {
        let row = row?;
        let label: IssueLabel = row.label.parse()?;
        if !seen.insert((row.paper_id.clone(), row.sentence_index)) {
            return Err(ClassifierError::InvalidParameter(format!(
                "duplicate annotation for ({}, {})",
                row.paper_id, row.sentence_index
            )));
        }
        out.push(LabeledSentence {
            sentence: Sentence {
                paper_id: row.paper_id,
                index: row.sentence_index,
                text: row.text.trim().to_string(),
            },
            label,
            split: row.split.unwrap_or(Split::Train),
        });
    }
    Ok(out)
}

/// Writes annotations in the format read by [`read_annotations`]. Tabs and
/// newlines inside sentence text are replaced by spaces.
pub fn write_annotations<W: Write>(
    writer: W,
    items: &[LabeledSentence],
    with_split: bool,
) -> Result<(), ClassifierError> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .quote_style(csv::QuoteStyle::Never)
        .has_headers(false)
        .from_writer(writer);
    let mut header = vec!["paper_id", "sentence_index", "text", "label"];
    if with_split {
        header.push("split");
    }
    w.write_record(&header)?;
    for item in items {
        let text: String = item
            .sentence
            .text
            .chars()
            .map(|c| if c == '\t' || c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        let mut record = vec![
            item.sentence.paper_id.clone(),
            item.sentence.index.to_string(),
            text,
            item.label.to_string(),
        ];
        if with_split {
            record.push(match item.split {
                Split::Train => "train".into(),
                Split::Test => "test".into(),
            });
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(counts: [usize; 3]) -> Vec<LabeledSentence> {
        let mut out = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                out.push(LabeledSentence {
                    sentence: Sentence {
                        paper_id: format!("p{c}"),
                        index: i,
                        text: format!("s{c}-{i}"),
                    },
                    label: IssueLabel::from_index(c).unwrap(),
                    split: Split::Train,
                });
            }
        }
        out
    }

    #[test]
    fn label_parsing_accepts_common_spellings() {
        assert_eq!("Emphasize issue".parse::<IssueLabel>().unwrap(), IssueLabel::Emphasize);
        assert_eq!("improvable".parse::<IssueLabel>().unwrap(), IssueLabel::Improvable);
        assert_eq!("OTHERS".parse::<IssueLabel>().unwrap(), IssueLabel::Others);
        assert!("prelude".parse::<IssueLabel>().is_err());
    }

    #[test]
    fn split_counts_follow_rounding_rule() {
        let d = stratified_split(items([316, 187, 287]), 0.25, 7).unwrap();
        assert_eq!(d.class_counts(Split::Test), [79, 47, 72]);
        assert_eq!(d.class_counts(Split::Train), [237, 140, 215]);
    }

    #[test]
    fn split_exact_halves() {
        let d = stratified_split(items([4, 4, 4]), 0.5, 1).unwrap();
        assert_eq!(d.class_counts(Split::Test), [2, 2, 2]);
    }

    #[test]
    fn split_is_deterministic_and_lossless() {
        let a = stratified_split(items([10, 7, 9]), 0.3, 42).unwrap();
        let b = stratified_split(items([10, 7, 9]), 0.3, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.items.len(), 26);
        let orig = items([10, 7, 9]);
        for (x, y) in a.items.iter().zip(&orig) {
            assert_eq!(x.sentence, y.sentence);
        }
    }

    #[test]
    fn split_guards() {
        assert!(matches!(
            stratified_split(items([1, 4, 4]), 0.5, 1),
            Err(ClassifierError::ClassTooSmall { .. })
        ));
        assert!(stratified_split(items([4, 4, 4]), 1.0, 1).is_err());
        assert!(stratified_split(items([4, 4, 4]), 0.0, 1).is_err());
    }

    #[test]
    fn annotations_round_trip() {
        let d = stratified_split(items([3, 3, 3]), 0.34, 3).unwrap();
        let mut buf = Vec::new();
        write_annotations(&mut buf, &d.items, true).unwrap();
        let back = read_annotations(buf.as_slice()).unwrap();
        assert_eq!(back, d.items);
    }

    #[test]
    fn annotations_without_split_default_to_train() {
        let tsv = "paper_id\tsentence_index\ttext\tlabel\np1\t0\tWe propose X.\tEmphasize\np1\t1\tPrior work fails.\tImprovable\n";
        let rows = read_annotations(tsv.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].label, IssueLabel::Improvable);
        assert!(rows.iter().all(|r| r.split == Split::Train));
    }

    #[test]
    fn annotations_reject_unknown_label() {
        let tsv = "paper_id\tsentence_index\ttext\tlabel\np1\t0\tx\tprelude\n";
        assert!(matches!(
            read_annotations(tsv.as_bytes()),
            Err(ClassifierError::UnknownLabel(_))
        ));
    }
}
