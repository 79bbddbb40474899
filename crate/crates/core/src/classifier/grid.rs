use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::svm::{train_ovr_linear_svm, TrainOptions};
use super::{ClassifierError, IssueLabel};
use crate::scalar::Scalar;

pub const DEFAULT_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_c: f64,
    /// `(C, mean validation accuracy)` in ascending C order.
    pub scores: Vec<(f64, f64)>,
}

/// Assigns every item a fold in `0..folds`, dealing each class's shuffled
/// members round-robin. Fails when some fold would lack a class.
pub fn stratified_folds(labels: &[IssueLabel], folds: usize, seed: u64) -> Result<Vec<usize>, ClassifierError> {
    if folds < 2 {
        return Err(ClassifierError::InvalidParameter(format!(
            "cross-validation needs at least 2 folds, got {folds}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    for label in IssueLabel::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if members.len() < folds {
            return Err(ClassifierError::FoldMissingClass {
                label,
                count: members.len(),
                folds,
            });
        }
        members.shuffle(&mut rng);
        for (rank, &i) in members.iter().enumerate() {
            assignment[i] = rank % folds;
        }
    }
    Ok(assignment)
}

/// k-fold cross-validated search over C; the best mean accuracy wins and
/// ties go to the smallest C.
pub fn grid_search<T: Scalar>(
    xs: &[Vec<T>],
    ys: &[IssueLabel],
    grid: &[f64],
    folds: usize,
    base: &TrainOptions<T>,
) -> Result<GridSearchResult, ClassifierError> {
    if grid.is_empty() {
        return Err(ClassifierError::InvalidParameter("grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
        return Err(ClassifierError::InvalidParameter(format!(
            "grid value {bad} is not a positive C"
        )));
    }
    if xs.len() != ys.len() {
        return Err(ClassifierError::LengthMismatch {
            features: xs.len(),
            labels: ys.len(),
        });
    }
    let assignment = stratified_folds(ys, folds, base.seed)?;

    let mut cs = grid.to_vec();
    cs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    cs.dedup();

    let mut scores = Vec::with_capacity(cs.len());
    for &c in &cs {
        let opts = TrainOptions { c: T::lit(c), ..*base };
        let mut total = 0.0;
        for fold in 0..folds {
            let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for (i, &f) in assignment.iter().enumerate() {
                if f == fold {
                    vx.push(xs[i].clone());
                    vy.push(ys[i]);
                } else {
                    tx.push(xs[i].clone());
                    ty.push(ys[i]);
                }
            }
            let (model, _) = train_ovr_linear_svm(&tx, &ty, &opts, "cv")?;
            let pred = model.predict_labels(&vx)?;
            let correct = pred.iter().zip(&vy).filter(|(p, g)| p == g).count();
            total += correct as f64 / vy.len() as f64;
        }
        scores.push((c, total / folds as f64));
    }

    let mut best = scores[0];
    for &s in &scores[1..] {
        if s.1 > best.1 {
            best = s;
        }
    }
    Ok(GridSearchResult { best_c: best.0, scores })
}
