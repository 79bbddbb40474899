use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ClassifierError, IssueLabel};
use crate::scalar::Scalar;

/// Rows are gold labels, columns predictions, both in [`IssueLabel::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[usize; 3]; 3]);

impl ConfusionMatrix {
    pub fn from_pairs(pred: &[IssueLabel], gold: &[IssueLabel]) -> Result<Self, ClassifierError> {
        if pred.len() != gold.len() {
            return Err(ClassifierError::LengthMismatch {
                features: pred.len(),
                labels: gold.len(),
            });
        }
        if pred.is_empty() {
            return Err(ClassifierError::Empty);
        }
        let mut m = [[0usize; 3]; 3];
        for (p, g) in pred.iter().zip(gold) {
            m[g.index()][p.index()] += 1;
        }
        Ok(Self(m))
    }

    pub fn total(&self) -> usize {
        self.0.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..3).map(|i| self.0[i][i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<T> {
    pub confusion: ConfusionMatrix,
    pub precision: [T; 3],
    pub recall: [T; 3],
    pub f1: [T; 3],
    pub accuracy: T,
}

fn ratio<T: Scalar>(num: usize, den: usize) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::of_usize(num) / T::of_usize(den)
    }
}

impl<T: Scalar> EvalReport<T> {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let m = &confusion.0;
        let mut precision = [T::zero(); 3];
        let mut recall = [T::zero(); 3];
        let mut f1 = [T::zero(); 3];
        for c in 0..3 {
            let col: usize = (0..3).map(|r| m[r][c]).sum();
            let row: usize = m[c].iter().sum();
            precision[c] = ratio(m[c][c], col);
            recall[c] = ratio(m[c][c], row);
            let s = precision[c] + recall[c];
            f1[c] = if s == T::zero() {
                T::zero()
            } else {
                T::lit(2.0) * precision[c] * recall[c] / s
            };
        }
        Self {
            accuracy: ratio(confusion.trace(), confusion.total()),
            confusion,
            precision,
            recall,
            f1,
        }
    }

    /// Plain-text table with values rounded to two decimals.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:<12} {:>9} {:>9} {:>9}", "class", "precision", "recall", "f1").unwrap();
        for label in IssueLabel::ALL {
            let i = label.index();
            writeln!(
                s,
                "{:<12} {:>9.2} {:>9.2} {:>9.2}",
                label.as_str(),
                self.precision[i].as_f64(),
                self.recall[i].as_f64(),
                self.f1[i].as_f64()
            )
            .unwrap();
        }
        writeln!(
            s,
            "accuracy {:.2} ({} / {})",
            self.accuracy.as_f64(),
            self.confusion.trace(),
            self.confusion.total()
        )
        .unwrap();
        s
    }
}

pub fn evaluate<T: Scalar>(pred: &[IssueLabel], gold: &[IssueLabel]) -> Result<EvalReport<T>, ClassifierError> {
    Ok(EvalReport::from_confusion(ConfusionMatrix::from_pairs(pred, gold)?))
}
