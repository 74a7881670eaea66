#![allow(dead_code)]

use nowcast::data::DesignMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sum of absolute deviations around the median, from scratch.
pub fn sad(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    let m = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
    v.iter().map(|x| (x - m).abs()).sum()
}

pub fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * 1f64.max(a.abs()).max(b.abs())
}

/// Every `(feature, threshold)` split of the node, priced directly.
/// Thresholds sit halfway between consecutive distinct values.
pub fn enumerate_splits(targets: &[f64], features: &[Vec<f64>], min_leaf: usize) -> Vec<(usize, f64, f64)> {
    let d = features.first().map_or(0, Vec::len);
    let mut out = Vec::new();
    for f in 0..d {
        let mut xs: Vec<f64> = features.iter().map(|r| r[f]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        for w in xs.windows(2) {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            let (mut l, mut r) = (Vec::new(), Vec::new());
            for (y, row) in targets.iter().zip(features) {
                if row[f] <= t {
                    l.push(*y)
                } else {
                    r.push(*y)
                }
            }
            if l.len() >= min_leaf && r.len() >= min_leaf {
                out.push((f, t, sad(&l) + sad(&r)));
            }
        }
    }
    out
}

/// Brute-force best split: minimal cost, ties to the lowest feature then the
/// smallest threshold; `None` unless the cost drops below the parent's.
pub fn brute_force_split(targets: &[f64], features: &[Vec<f64>], min_leaf: usize) -> Option<(usize, f64, f64)> {
    let all = enumerate_splits(targets, features, min_leaf.max(1));
    let best = all.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    let winner = *all.iter().find(|c| tied(c.2, best))?;
    let parent = sad(targets);
    if winner.2 >= parent || tied(winner.2, parent) {
        return None;
    }
    Some(winner)
}

/// Small random node: `n` rows, `d` features; values drawn from a coarse set
/// when `coarse` so ties show up.
pub fn random_node(rng: &mut ChaCha8Rng, n: usize, d: usize, coarse: bool) -> (Vec<f64>, Vec<Vec<f64>>) {
    let draw = |rng: &mut ChaCha8Rng| {
        if coarse {
            rng.random_range(0..5) as f64
        } else {
            rng.random_range(-10.0..10.0)
        }
    };
    let features: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| draw(rng)).collect()).collect();
    let targets: Vec<f64> = (0..n).map(|_| draw(rng)).collect();
    (targets, features)
}

pub fn names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

/// `n` rows of a five-feature regression with a step, a slope and noise.
pub fn regression_fixture(n: usize, seed: u64) -> DesignMatrix<f64> {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..5).map(|_| r.random_range(0.0..10.0)).collect()).collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|x| {
            let step = if x[0] > 5.0 { 3.0 } else { 0.0 };
            step + 0.5 * x[1] + r.random_range(-1.0..1.0)
        })
        .collect();
    DesignMatrix::from_rows(y, rows, names(5), None).unwrap()
}
