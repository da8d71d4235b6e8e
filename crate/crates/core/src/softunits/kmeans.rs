use ndarray::{Array2, ArrayView1, Axis};
use rand::Rng as _;

use super::DiscreteUnits;
use crate::error::{invalid, Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Array2<f64>,
    /// Sum of squared distances of every point to its nearest centroid.
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Nearest centroid index (lowest on ties) and its squared distance.
fn nearest(x: ArrayView1<f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init(data: &Array2<f64>, k: usize, seed: u64) -> Array2<f64> {
    let mut rng = rng_from_seed(seed);
    let n = data.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = data
        .rows()
        .into_iter()
        .map(|r| sq_dist(r, data.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = d2.iter().rposition(|&d| d > 0.0).unwrap();
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            // every point coincides with a chosen one
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(next);
        for (i, r) in data.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, data.row(next)));
        }
    }
    data.select(Axis(0), &chosen)
}

/// Lloyd's algorithm from a seeded k-means++ start. Stops after `max_iters`
/// assignment steps or once the relative inertia change drops below 1e-6.
/// Clusters that go empty are re-seeded at the points furthest from their
/// centroids.
pub fn kmeans_fit(data: &Array2<f64>, k: usize, max_iters: usize, seed: u64) -> Result<KMeansFit> {
    let n = data.nrows();
    if k == 0 {
        return Err(invalid("K", "must be positive"));
    }
    if n < k {
        return Err(invalid("K", format!("{n} points cannot form {k} clusters")));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k-means input"));
    }
    let mut centroids = plus_plus_init(data, k, seed);
    let mut history = Vec::new();
    let mut assign = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut iterations = 0;

    loop {
        for (i, r) in data.rows().into_iter().enumerate() {
            let (j, d) = nearest(r, &centroids);
            assign[i] = j;
            dists[i] = d;
        }
        let inertia: f64 = dists.iter().sum();
        let converged = history
            .last()
            .is_some_and(|&prev: &f64| prev - inertia <= 1e-6 * prev.max(f64::MIN_POSITIVE));
        history.push(inertia);
        if converged || iterations >= max_iters {
            break;
        }
        iterations += 1;

        let mut sums = Array2::<f64>::zeros(centroids.dim());
        let mut counts = vec![0usize; k];
        for (i, r) in data.rows().into_iter().enumerate() {
            sums.row_mut(assign[i]).scaled_add(1.0, &r);
            counts[assign[i]] += 1;
        }
        let mut by_distance: Vec<usize> = (0..n).collect();
        by_distance.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
        let mut reseed = by_distance.into_iter();
        for (j, &count) in counts.iter().enumerate() {
            if count > 0 {
                let c = &sums.row(j) / count as f64;
                centroids.row_mut(j).assign(&c);
            } else if let Some(p) = reseed.next() {
                centroids.row_mut(j).assign(&data.row(p));
                dists[p] = 0.0;
            }
        }
    }

    let inertia = *history.last().unwrap();
    Ok(KMeansFit {
        centroids,
        inertia,
        history,
        iterations,
    })
}

/// Nearest centroid per row, lowest index on ties.
pub fn quantize(features: &Array2<f64>, centroids: &Array2<f64>) -> Result<DiscreteUnits> {
    if features.ncols() != centroids.ncols() {
        return Err(Error::DimensionMismatch {
            expected: centroids.ncols(),
            actual: features.ncols(),
        });
    }
    if centroids.nrows() == 0 {
        return Err(Error::EmptyInput("centroids"));
    }
    Ok(DiscreteUnits(
        features
            .rows()
            .into_iter()
            .map(|r| nearest(r, centroids).0)
            .collect(),
    ))
}
