use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{PolyxError, Result};
use crate::matrix::RowMatrix;
use crate::rng::stream_rng;

pub const KMEANS_MAX_ITER: usize = 300;
pub const KMEANS_SHIFT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub centroids: RowMatrix,
    pub inertia: f64,
    pub seed: u64,
    pub iterations: usize,
}

impl KMeansModel {
    pub fn classes(&self) -> usize {
        self.centroids.rows()
    }

    /// Index of the nearest centroid (lowest index on ties).
    pub fn predict_one(&self, x: &[f64]) -> usize {
        nearest(&self.centroids, x).0
    }

    pub fn predict(&self, data: &RowMatrix) -> Vec<usize> {
        data.iter_rows().map(|x| self.predict_one(x)).collect()
    }

    /// Distances from every row to every centroid.
    pub fn centroid_distances(&self, data: &RowMatrix) -> RowMatrix {
        let k = self.classes();
        let mut out = RowMatrix::zeros(data.rows(), k);
        for (i, x) in data.iter_rows().enumerate() {
            for j in 0..k {
                out.set(i, j, sq_dist(x, self.centroids.row(j)).sqrt());
            }
        }
        out
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &RowMatrix, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..centroids.rows() {
        let d = sq_dist(x, centroids.row(j));
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding: first centre uniform, then proportional to the squared
/// distance to the closest centre already chosen.
fn plus_plus(data: &RowMatrix, k: usize, seed: u64) -> RowMatrix {
    let mut rng = stream_rng(seed, "kmeans++");
    let m = data.rows();
    let mut chosen = vec![rng.random_range(0..m)];
    let mut d2: Vec<f64> = data.iter_rows().map(|x| sq_dist(x, data.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = m - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // Fewer distinct points than centres; any point will do.
            rng.random_range(0..m)
        };
        chosen.push(next);
        for (i, x) in data.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, data.row(next)));
        }
    }
    data.select_rows(&chosen)
}

/// Lloyd's algorithm from a k-means++ start.
pub fn kmeans_fit(data: &RowMatrix, k: usize, seed: u64) -> Result<KMeansModel> {
    let (m, n) = (data.rows(), data.cols());
    if k == 0 || m < k {
        return Err(PolyxError::InvalidInput(format!(
            "k-means needs 1 <= K <= pixels, got K={k} with {m} pixels"
        )));
    }
    if !data.is_finite() {
        return Err(PolyxError::NonFinite("k-means data"));
    }
    let mut centroids = plus_plus(data, k, seed);
    let mut labels = vec![0usize; m];
    let mut iterations = 0;
    for iter in 1..=KMEANS_MAX_ITER {
        iterations = iter;
        let mut far = (0usize, -1.0f64);
        for (i, x) in data.iter_rows().enumerate() {
            let (j, d) = nearest(&centroids, x);
            labels[i] = j;
            if d > far.1 {
                far = (i, d);
            }
        }
        let mut sums = RowMatrix::zeros(k, n);
        let mut counts = vec![0usize; k];
        for (i, x) in data.iter_rows().enumerate() {
            counts[labels[i]] += 1;
            for (s, v) in sums.row_mut(labels[i]).iter_mut().zip(x) {
                *s += v;
            }
        }
        let mut shift = 0.0f64;
        for j in 0..k {
            let new: Vec<f64> = if counts[j] == 0 {
                // Empty cluster: restart it at the point worst served so far.
                data.row(far.0).to_vec()
            } else {
                sums.row(j).iter().map(|s| s / counts[j] as f64).collect()
            };
            shift = shift.max(sq_dist(&new, centroids.row(j)).sqrt());
            centroids.row_mut(j).copy_from_slice(&new);
        }
        if shift <= KMEANS_SHIFT_TOL {
            break;
        }
    }
    let inertia = data.iter_rows().map(|x| nearest(&centroids, x).1).sum();
    Ok(KMeansModel {
        centroids,
        inertia,
        seed,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> RowMatrix {
        RowMatrix::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn two_points_on_a_line() {
        let m = kmeans_fit(&col(&[0.0, 0.0, 10.0, 10.0]), 2, 1).unwrap();
        let mut c = m.centroids.column(0);
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.0, 10.0]);
        assert_eq!(m.inertia, 0.0);
    }

    #[test]
    fn repeated_points_become_centroids() {
        let pts = [vec![1.0, 2.0], vec![-3.0, 0.5], vec![4.0, 4.0]];
        let rows: Vec<Vec<f64>> = (0..30).map(|i| pts[i % 3].clone()).collect();
        let m = kmeans_fit(&RowMatrix::from_rows(&rows).unwrap(), 3, 9).unwrap();
        for p in &pts {
            assert!(m.centroids.iter_rows().any(|c| c == p.as_slice()));
        }
        assert_eq!(m.inertia, 0.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let data = col(&(0..50).map(|i| ((i * 37) % 17) as f64).collect::<Vec<_>>());
        assert_eq!(kmeans_fit(&data, 3, 4).unwrap(), kmeans_fit(&data, 3, 4).unwrap());
    }

    #[test]
    fn too_few_points() {
        assert!(kmeans_fit(&col(&[1.0]), 2, 0).is_err());
        assert!(kmeans_fit(&col(&[f64::NAN, 1.0]), 1, 0).is_err());
    }

    #[test]
    fn fewer_distinct_points_than_clusters() {
        let m = kmeans_fit(&col(&[1.0, 1.0, 1.0]), 2, 0).unwrap();
        assert_eq!(m.inertia, 0.0);
    }
}
