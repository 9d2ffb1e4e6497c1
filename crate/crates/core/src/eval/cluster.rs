//! Lloyd's k-means over accuracy curves.

use rand::Rng;

use crate::dataset::UtilityTable;
use crate::error::{Error, Result};
use crate::seed;

const MAX_ITERATIONS: usize = 300;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = sq_dist(point, &centroids[0]);
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(point, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Cluster accuracy-curve rows into `k` groups.
///
/// Seeding is greedy farthest-point: a seeded random first centroid, then
/// repeatedly the row farthest from its nearest chosen centroid (lowest
/// index on ties). Lloyd iterations run to an assignment fixpoint or 300
/// rounds; a cluster that empties keeps its previous centroid. Centroids
/// are returned in decreasing order of accuracy at the cheapest budget,
/// with assignments relabeled to match.
pub fn archetype_cluster(
    table: &UtilityTable,
    k: usize,
    seed_value: u64,
) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let n = table.len();
    if k == 0 {
        return Err(Error::Validation("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::Validation(format!(
            "k = {k} exceeds the number of rows {n}"
        )));
    }
    let points: Vec<&[f64]> = table.rows().collect();

    // farthest-point seeding
    let mut rng = seed::rng(seed_value, "kmeans-seed", 0);
    let first = rng.gen_range(0..n);
    let mut centroids: Vec<Vec<f64>> = vec![points[first].to_vec()];
    while centroids.len() < k {
        let mut far_idx = 0;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            let d = centroids
                .iter()
                .map(|c| sq_dist(p, c))
                .fold(f64::INFINITY, f64::min);
            if d > far_d {
                far_d = d;
                far_idx = i;
            }
        }
        centroids.push(points[far_idx].to_vec());
    }

    let width = table.num_budgets();
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    for _ in 0..MAX_ITERATIONS {
        // recompute means
        let mut sums = vec![vec![0.0; width]; k];
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for (j, &x) in points[i].iter().enumerate() {
                sums[a][j] += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..width {
                    centroids[c][j] = sums[c][j] / counts[c] as f64;
                }
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }

    // order clusters by accuracy at b_1, highest first
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        centroids[b][0]
            .partial_cmp(&centroids[a][0])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut relabel = vec![0usize; k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    let centroids: Vec<Vec<f64>> = order.iter().map(|&c| centroids[c].clone()).collect();
    let assignments: Vec<usize> = assignments.into_iter().map(|a| relabel[a]).collect();
    Ok((assignments, centroids))
}
