use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_dimensions, ClusterConfig, ClusterError};
use crate::scalar::{squared_distance, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult<T> {
    /// Cluster id per input point, each `< k`.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<T>>,
    /// Sum of squared distances from each point to its centroid.
    pub inertia: T,
    pub iterations: usize,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_trace: Vec<T>,
    /// Final inertia of every restart, in restart order.
    pub restart_inertias: Vec<T>,
}

impl<T: Scalar> ClusterResult<T> {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Member indices per cluster, in point order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.k()];
        for (i, &c) in self.assignments.iter().enumerate() {
            groups[c].push(i);
        }
        groups
    }
}

/// Greedy k-means++ seeding: each step draws `2 + ln k` candidates with
/// probability proportional to squared distance and keeps the one that
/// lowers the potential most. When every remaining point coincides with a
/// chosen centre, falls back to the first unchosen index so k distinct
/// indices are always picked.
fn seed_centroids<T: Scalar>(points: &[Vec<T>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let n = points.len();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let dist_to = |c: usize| -> Vec<f64> {
        points
            .iter()
            .map(|p| squared_distance(p, &points[c]).as_f64())
            .collect()
    };

    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2 = dist_to(chosen[0]);
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            let next = (0..n).find(|i| !chosen.contains(i)).expect("k <= n");
            chosen.push(next);
            continue;
        }
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < w {
                    break;
                }
                target -= w;
            }
            let cand = pick.expect("positive total weight");
            let merged: Vec<f64> = d2.iter().zip(dist_to(cand)).map(|(&a, b)| a.min(b)).collect();
            let potential: f64 = merged.iter().sum();
            if best.as_ref().is_none_or(|b| potential < b.0) {
                best = Some((potential, cand, merged));
            }
        }
        let (_, cand, merged) = best.expect("at least one trial");
        chosen.push(cand);
        d2 = merged;
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// Nearest-centroid assignment (ties to the lowest id), followed by repair of
/// empty clusters. Returns the inertia of the resulting assignment.
fn assign<T: Scalar>(points: &[Vec<T>], centroids: &mut [Vec<T>], assignments: &mut [usize]) -> T {
    let k = centroids.len();
    let mut dist = vec![T::zero(); points.len()];
    for (i, p) in points.iter().enumerate() {
        let mut best = 0;
        let mut best_d = squared_distance(p, &centroids[0]);
        for (c, centroid) in centroids.iter().enumerate().skip(1) {
            let d = squared_distance(p, centroid);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        assignments[i] = best;
        dist[i] = best_d;
    }

    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        // Reseed at the point farthest from its own centroid, taken from a
        // cluster that can spare it.
        let donor = (0..points.len())
            .filter(|&i| sizes[assignments[i]] > 1)
            .fold(None::<usize>, |best, i| match best {
                Some(b) if dist[b] >= dist[i] => Some(b),
                _ => Some(i),
            })
            .expect("k <= n guarantees a donor");
        sizes[assignments[donor]] -= 1;
        sizes[empty] = 1;
        assignments[donor] = empty;
        centroids[empty] = points[donor].clone();
        dist[donor] = T::zero();
    }
    dist.into_iter().sum()
}

fn update_centroids<T: Scalar>(points: &[Vec<T>], assignments: &[usize], k: usize, dim: usize) -> Vec<Vec<T>> {
    let mut sums = vec![vec![T::zero(); dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, &v) in sums[a].iter_mut().zip(p) {
            *s = *s + v;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        let n = T::of_usize(n.max(1));
        s.iter_mut().for_each(|v| *v = *v / n);
    }
    sums
}

/// Hartigan refinement: moves single points between clusters while the
/// exact change in inertia, `n_b/(n_b+1)·|x−c_b|² − n_a/(n_a−1)·|x−c_a|²`,
/// is negative. Escapes Lloyd fixed points that one move can improve.
/// Returns whether anything moved.
fn hartigan<T: Scalar>(
    points: &[Vec<T>],
    assignments: &mut [usize],
    centroids: &mut [Vec<T>],
    max_passes: usize,
) -> bool {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    let eps = T::lit(1e-12);
    let mut any = false;
    for _ in 0..max_passes {
        let mut moved = false;
        for (i, x) in points.iter().enumerate() {
            let a = assignments[i];
            if sizes[a] <= 1 {
                continue;
            }
            let na = T::of_usize(sizes[a]);
            let removal = na / (na - T::one()) * squared_distance(x, &centroids[a]);
            let mut best: Option<(T, usize)> = None;
            for b in (0..k).filter(|&b| b != a) {
                let nb = T::of_usize(sizes[b]);
                let added = nb / (nb + T::one()) * squared_distance(x, &centroids[b]);
                if added < removal - eps * removal.max(T::one()) && best.is_none_or(|(c, _)| added < c) {
                    best = Some((added, b));
                }
            }
            if let Some((_, b)) = best {
                let nb = T::of_usize(sizes[b]);
                for (c, &v) in centroids[a].iter_mut().zip(x) {
                    *c = (*c * na - v) / (na - T::one());
                }
                for (c, &v) in centroids[b].iter_mut().zip(x) {
                    *c = (*c * nb + v) / (nb + T::one());
                }
                sizes[a] -= 1;
                sizes[b] += 1;
                assignments[i] = b;
                moved = true;
            }
        }
        if !moved {
            break;
        }
        any = true;
    }
    any
}

fn inertia_of<T: Scalar>(points: &[Vec<T>], assignments: &[usize], centroids: &[Vec<T>]) -> T {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| squared_distance(p, &centroids[a]))
        .sum()
}

fn single_run<T: Scalar>(points: &[Vec<T>], cfg: &ClusterConfig, restart: u64) -> ClusterResult<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart);
    let dim = points[0].len();
    let mut centroids = seed_centroids(points, cfg.k, &mut rng);
    let mut assignments = vec![0usize; points.len()];
    let mut trace = vec![assign(points, &mut centroids, &mut assignments)];
    let mut iterations = 0;
    let tol = T::lit(cfg.tolerance);

    while iterations < cfg.max_iterations {
        iterations += 1;
        let updated = update_centroids(points, &assignments, cfg.k, dim);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(T::zero(), T::max);
        centroids = updated;
        trace.push(assign(points, &mut centroids, &mut assignments));
        if shift < tol {
            break;
        }
    }

    if hartigan(points, &mut assignments, &mut centroids, cfg.max_iterations) {
        centroids = update_centroids(points, &assignments, cfg.k, dim);
        trace.push(inertia_of(points, &assignments, &centroids));
    }

    ClusterResult {
        inertia: *trace.last().expect("non-empty trace"),
        assignments,
        centroids,
        iterations,
        inertia_trace: trace,
        restart_inertias: Vec::new(),
    }
}

/// Lloyd's algorithm from `n_init` k-means++ starts; returns the run with the
/// lowest inertia (earliest on ties).
pub fn kmeans<T: Scalar>(points: &[Vec<T>], cfg: &ClusterConfig) -> Result<ClusterResult<T>, ClusterError> {
    if cfg.k == 0 || cfg.k > points.len() {
        return Err(ClusterError::InvalidK {
            k: cfg.k,
            points: points.len(),
        });
    }
    if cfg.n_init == 0 {
        return Err(ClusterError::InvalidConfig("n_init must be at least 1".into()));
    }
    if !(cfg.tolerance >= 0.0) {
        return Err(ClusterError::InvalidConfig("tolerance must be non-negative".into()));
    }
    check_dimensions(points)?;

    let mut best: Option<ClusterResult<T>> = None;
    let mut inertias = Vec::with_capacity(cfg.n_init);
    for restart in 0..cfg.n_init {
        let run = single_run(points, cfg, restart as u64);
        inertias.push(run.inertia);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let mut best = best.expect("n_init >= 1");
    best.restart_inertias = inertias;
    Ok(best)
}
