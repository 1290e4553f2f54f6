//! Brute-force reference for the model state, written without any of the
//! crate's internals: plain loops over the window and the pinned samples.

#![allow(dead_code)]

use idks::data::{gen_two_cluster, TwoClusterSpec};
use idks::ModelState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn sq(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += (x - y) * (x - y);
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    /// `assignments[row][j]`.
    pub assignments: Vec<Vec<Option<usize>>>,
    /// `counts[j][k]`.
    pub counts: Vec<Vec<u32>>,
    /// Normal score of every window row.
    pub scores: Vec<f64>,
}

/// Feature maps, counts and scores of `window` (oldest first, first row at
/// stream index `start`) under partitionings built on the given sample
/// sources.
pub fn reference<P: AsRef<[f64]>>(window: &[P], start: u64, sets: &[Vec<u64>]) -> Reference {
    let omega = window.len();
    let t = sets.len();
    let psi = sets[0].len();
    let mut assignments = vec![vec![None; t]; omega];
    let mut counts = vec![vec![0u32; psi]; t];
    for (j, set) in sets.iter().enumerate() {
        let centers: Vec<&[f64]> = set.iter().map(|&s| window[(s - start) as usize].as_ref()).collect();
        let radii: Vec<f64> = (0..psi)
            .map(|a| {
                (0..psi)
                    .filter(|&b| b != a)
                    .map(|b| sq(centers[a], centers[b]))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        for (r, x) in window.iter().enumerate() {
            let mut best = 0;
            for k in 1..psi {
                if sq(x.as_ref(), centers[k]) < sq(x.as_ref(), centers[best]) {
                    best = k;
                }
            }
            if sq(x.as_ref(), centers[best]) < radii[best] {
                assignments[r][j] = Some(best);
                counts[j][best] += 1;
            }
        }
    }
    let scores = assignments
        .iter()
        .map(|row| {
            let total: u64 = row
                .iter()
                .enumerate()
                .filter_map(|(j, a)| a.map(|k| counts[j][k] as u64))
                .sum();
            total as f64 / (t as f64 * omega as f64)
        })
        .collect();
    Reference {
        assignments,
        counts,
        scores,
    }
}

/// Panics with `context` unless `model` agrees with the reference built on
/// its own sample sets: assignments and counts exactly, scores to 1e-12.
pub fn assert_matches_reference<P: AsRef<[f64]>>(model: &ModelState, stream: &[P], context: &str) {
    let start = model.window_start();
    let window = &stream[start as usize..start as usize + model.omega()];
    let want = reference(window, start, &model.sample_sets());
    let matrix = model.assignment_matrix();
    for r in 0..model.omega() {
        let got: Vec<Option<usize>> = matrix.row(r).collect();
        assert_eq!(got, want.assignments[r], "{context}: assignments of row {r}");
    }
    assert_eq!(model.count_table().to_rows(), want.counts, "{context}: counts");
    for (r, &s) in want.scores.iter().enumerate() {
        let got = model.score_row(r);
        let rel = if got == s { 0.0 } else { (got - s).abs() / got.abs().max(s.abs()) };
        assert!(rel <= 1e-12, "{context}: score of row {r}: {got} vs {s}");
    }
}

/// Gaussian points in `dim` dimensions, every coordinate snapped to a grid
/// of step `grid` (0 disables snapping). Snapping produces duplicate points
/// and exact distance ties.
pub fn gaussian_stream(n: usize, dim: usize, grid: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            // A slow drift so later windows differ from earlier ones.
            let shift = i as f64 / n as f64;
            (0..dim)
                .map(|_| {
                    let v: f64 = rng.sample(StandardNormal);
                    let v = v + shift;
                    if grid > 0.0 {
                        (v / grid).round() * grid
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect()
}

pub fn two_cluster_points(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let ds = gen_two_cluster(&TwoClusterSpec {
        n,
        seed,
        ..TwoClusterSpec::default()
    })
    .expect("valid spec");
    ds.instances.iter().map(|i| i.point.coords().to_vec()).collect()
}
