use fishbone_core::cluster::{kmeans, silhouette, ClusterConfig};
use serde::Deserialize;

#[derive(Deserialize)]
struct Fixture {
    name: String,
    points: Vec<Vec<f64>>,
}

fn fixtures() -> Vec<Fixture> {
    serde_json::from_str(include_str!("fixtures/kmeans_small.json")).unwrap()
}

fn inertia_of(points: &[Vec<f64>], assignment: &[usize], k: usize) -> f64 {
    let d = points[0].len();
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&Vec<f64>> = points
            .iter()
            .zip(assignment)
            .filter(|(_, &a)| a == c)
            .map(|(p, _)| p)
            .collect();
        let mut centre = vec![0.0; d];
        for p in &members {
            for (m, v) in centre.iter_mut().zip(p.iter()) {
                *m += v / members.len() as f64;
            }
        }
        for p in &members {
            total += p.iter().zip(&centre).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
    }
    total
}

/// Minimum inertia over every assignment of points to k non-empty clusters.
fn brute_force(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let mut best = f64::INFINITY;
    let mut a = vec![0usize; n];
    loop {
        let mut used = vec![false; k];
        a.iter().for_each(|&c| used[c] = true);
        if used.iter().all(|&u| u) {
            best = best.min(inertia_of(points, &a, k));
        }
        let mut i = 0;
        while i < n {
            a[i] += 1;
            if a[i] < k {
                break;
            }
            a[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

#[test]
fn matches_exhaustive_optimum() {
    for f in fixtures() {
        assert!(f.points.len() <= 8);
        for k in 1..=3.min(f.points.len()) {
            let r = kmeans(&f.points, &ClusterConfig::new(k, 42)).unwrap();
            let opt = brute_force(&f.points, k);
            assert!(
                (r.inertia - opt).abs() <= 1e-9,
                "{} k={k}: {} vs {opt}",
                f.name,
                r.inertia
            );
            for w in r.inertia_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{} k={k}: trace rose", f.name);
            }
        }
    }
}

#[test]
fn reported_inertia_matches_assignment() {
    for f in fixtures() {
        let k = 2.min(f.points.len());
        let r = kmeans(&f.points, &ClusterConfig::new(k, 3)).unwrap();
        assert!(
            (inertia_of(&f.points, &r.assignments, k) - r.inertia).abs() < 1e-9,
            "{}",
            f.name
        );
    }
}

#[test]
fn point_order_does_not_change_optimum() {
    for f in fixtures() {
        let mut rev = f.points.clone();
        rev.reverse();
        let k = 3.min(f.points.len());
        let a = kmeans(&f.points, &ClusterConfig::new(k, 5)).unwrap().inertia;
        let b = kmeans(&rev, &ClusterConfig::new(k, 5)).unwrap().inertia;
        assert!((a - b).abs() < 1e-9, "{}", f.name);
    }
}

#[test]
fn silhouette_matches_hand_computation() {
    // Outer points: a = 1, b = (5 + 6) / 2. Inner points: a = 1, b = (4 + 5) / 2.
    let pts: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![5.0], vec![6.0]];
    let s = silhouette(&pts, &[0, 0, 1, 1]).unwrap();
    let outer: f64 = 1.0 - 1.0 / 5.5;
    let inner = 1.0 - 1.0 / 4.5;
    assert!((s - (outer + inner) / 2.0).abs() < 1e-12);
}
