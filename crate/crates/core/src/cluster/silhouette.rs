use serde::{Deserialize, Serialize};

use super::{check_dimensions, kmeans, ClusterConfig, ClusterError};
use crate::scalar::{squared_distance, Scalar};

/// Mean silhouette over all points. Points in singleton clusters score 0,
/// and so does a point whose `a` and `b` are both 0.
pub fn silhouette<T: Scalar>(points: &[Vec<T>], assignments: &[usize]) -> Result<T, ClusterError> {
    if points.len() != assignments.len() {
        return Err(ClusterError::InvalidConfig(format!(
            "{} points but {} assignments",
            points.len(),
            assignments.len()
        )));
    }
    check_dimensions(points)?;
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(ClusterError::SingleCluster);
    }
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(ClusterError::EmptyCluster(empty));
    }

    let n = points.len();
    let mut total = T::zero();
    for i in 0..n {
        let own = assignments[i];
        if sizes[own] == 1 {
            continue;
        }
        let mut sums = vec![T::zero(); k];
        for j in 0..n {
            if j != i {
                sums[assignments[j]] = sums[assignments[j]] + squared_distance(&points[i], &points[j]).sqrt();
            }
        }
        let a = sums[own] / T::of_usize(sizes[own] - 1);
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / T::of_usize(sizes[c]))
            .fold(T::infinity(), T::min);
        let denom = a.max(b);
        if denom > T::zero() {
            total = total + (b - a) / denom;
        }
    }
    Ok(total / T::of_usize(n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChooseK {
    pub k: usize,
    /// `(k, mean silhouette)` for every k tried.
    pub scores: Vec<(usize, f64)>,
    pub warning: Option<String>,
}

/// Runs k-means for every k in `lo..=hi` and keeps the k with the highest
/// mean silhouette (smallest k on ties).
pub fn choose_k<T: Scalar>(
    points: &[Vec<T>],
    range: (usize, usize),
    base: &ClusterConfig,
) -> Result<ChooseK, ClusterError> {
    let n = points.len();
    if n < 3 {
        return Err(ClusterError::TooFewPoints { needed: 3, got: n });
    }
    let (lo, hi) = range;
    if lo < 2 || hi < lo || hi > n - 1 {
        return Err(ClusterError::InvalidRange { lo, hi, max: n - 1 });
    }
    check_dimensions(points)?;

    if points.iter().all(|p| p == &points[0]) {
        let warning = "all points identical; silhouette is undefined, using k = 2".to_string();
        log::warn!("{warning}");
        return Ok(ChooseK {
            k: 2,
            scores: Vec::new(),
            warning: Some(warning),
        });
    }

    let mut scores = Vec::new();
    for k in lo..=hi {
        let result = kmeans(points, &base.with_k(k))?;
        scores.push((k, silhouette(points, &result.assignments)?.as_f64()));
    }
    let mut best = scores[0];
    for &s in &scores[1..] {
        if s.1 > best.1 {
            best = s;
        }
    }
    Ok(ChooseK {
        k: best.0,
        scores,
        warning: None,
    })
}
