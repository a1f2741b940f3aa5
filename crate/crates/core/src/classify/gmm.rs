use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::kmeans::kmeans_fit;
use crate::error::{PolyxError, Result};
use crate::matrix::RowMatrix;
use crate::rng::{derive_seed, stream_rng};

/// Weight below which a component is considered collapsed.
pub const DEGENERATE_WEIGHT: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmSettings {
    pub subsample_ratio: f64,
    pub max_iter: usize,
    /// Relative change of the log-likelihood that stops EM.
    pub tol: f64,
    /// Ridge added to every covariance, as a fraction of trace / n of the
    /// training covariance.
    pub ridge: f64,
}

impl Default for GmmSettings {
    fn default() -> Self {
        Self {
            subsample_ratio: 0.2,
            max_iter: 200,
            tol: 1e-6,
            ridge: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: RowMatrix,
    pub covariances: Vec<RowMatrix>,
    pub seed: u64,
    /// Total training log-likelihood after each EM iteration.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
    pub reinitialized: usize,
}

/// Cholesky factor (row-major lower triangle) and log-determinant.
struct Component {
    log_weight: f64,
    mean: Vec<f64>,
    chol: Vec<f64>,
    half_log_det: f64,
}

impl Component {
    fn new(weight: f64, mean: &[f64], cov: &RowMatrix) -> Result<Self> {
        let n = mean.len();
        let m = DMatrix::from_row_slice(n, n, cov.as_slice());
        let l = m
            .cholesky()
            .ok_or_else(|| PolyxError::IllConditioned("covariance is not positive definite".into()))?
            .unpack();
        let mut chol = vec![0.0; n * n];
        let mut half_log_det = 0.0;
        for i in 0..n {
            for j in 0..=i {
                chol[i * n + j] = l[(i, j)];
            }
            half_log_det += l[(i, i)].ln();
        }
        Ok(Self {
            log_weight: weight.ln(),
            mean: mean.to_vec(),
            chol,
            half_log_det,
        })
    }

    /// `log(w N(x | mean, cov))`, with `buf` as scratch of length n.
    fn log_density(&self, x: &[f64], buf: &mut [f64]) -> f64 {
        let n = x.len();
        let mut maha = 0.0;
        for i in 0..n {
            let row = &self.chol[i * n..i * n + i];
            let mut r = x[i] - self.mean[i];
            for (l, z) in row.iter().zip(&buf[..i]) {
                r -= l * z;
            }
            let z = r / self.chol[i * n + i];
            buf[i] = z;
            maha += z * z;
        }
        self.log_weight - self.half_log_det - 0.5 * (maha + n as f64 * (2.0 * std::f64::consts::PI).ln())
    }
}

fn components(model: &GmmModel) -> Result<Vec<Component>> {
    (0..model.weights.len())
        .map(|k| Component::new(model.weights[k], model.means.row(k), &model.covariances[k]))
        .collect()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + v.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

/// Responsibilities written into `resp`; returns per-row mixture log-density.
fn e_step(comps: &[Component], data: &RowMatrix, resp: &mut RowMatrix) -> Vec<f64> {
    let k = comps.len();
    let mut buf = vec![0.0; data.cols()];
    let mut lp = vec![0.0; k];
    data.iter_rows()
        .enumerate()
        .map(|(i, x)| {
            for (j, c) in comps.iter().enumerate() {
                lp[j] = c.log_density(x, &mut buf);
            }
            let total = log_sum_exp(&lp);
            for (r, l) in resp.row_mut(i).iter_mut().zip(&lp) {
                *r = (l - total).exp();
            }
            total
        })
        .collect()
}

impl GmmModel {
    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    /// Posterior class probabilities of every row.
    pub fn predict_proba(&self, data: &RowMatrix) -> Result<RowMatrix> {
        crate::error::ensure_dim(self.means.cols(), data.cols())?;
        let comps = components(self)?;
        let mut resp = RowMatrix::zeros(data.rows(), self.classes());
        e_step(&comps, data, &mut resp);
        Ok(resp)
    }

    /// Hard labels: argmax responsibility, lowest index on ties.
    pub fn predict(&self, data: &RowMatrix) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.predict_proba(data)?))
    }

    pub fn score(&self, data: &RowMatrix) -> Result<f64> {
        let comps = components(self)?;
        let mut resp = RowMatrix::zeros(data.rows(), self.classes());
        Ok(e_step(&comps, data, &mut resp).iter().sum())
    }
}

pub fn argmax_rows(m: &RowMatrix) -> Vec<usize> {
    m.iter_rows()
        .map(|r| {
            let mut best = 0;
            for (j, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn mean_and_cov(data: &RowMatrix, weights: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let (m, n) = (data.rows(), data.cols());
    let total: f64 = weights.iter().sum();
    let mut mean = vec![0.0; n];
    for (x, &w) in data.iter_rows().zip(weights) {
        for (mu, v) in mean.iter_mut().zip(x) {
            *mu += w * v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= total);
    let centered = DMatrix::from_fn(m, n, |i, j| (data.get(i, j) - mean[j]) * (weights[i] / total).sqrt());
    let cov = centered.transpose() * &centered;
    (mean, cov)
}

fn to_row_matrix(m: &DMatrix<f64>, ridge: f64) -> RowMatrix {
    let n = m.nrows();
    let mut out = RowMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            // Symmetrise to keep Cholesky happy.
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out.set(i, j, if i == j { v + ridge } else { v });
        }
    }
    out
}

/// EM with full covariances on a seeded subsample, initialised from k-means
/// on that subsample.
pub fn gmm_fit(data: &RowMatrix, k: usize, seed: u64, st: &GmmSettings) -> Result<GmmModel> {
    let (m, n) = (data.rows(), data.cols());
    if !(st.subsample_ratio > 0.0 && st.subsample_ratio <= 1.0) {
        return Err(PolyxError::InvalidInput(format!(
            "subsample ratio must lie in (0, 1], got {}",
            st.subsample_ratio
        )));
    }
    let size = ((m as f64) * st.subsample_ratio).floor() as usize;
    if k == 0 || size < 10 * k {
        return Err(PolyxError::InvalidInput(format!(
            "GMM needs at least {} training pixels for K={k}, subsample has {size}",
            10 * k.max(1)
        )));
    }
    if !data.is_finite() {
        return Err(PolyxError::NonFinite("GMM data"));
    }
    let mut idx = rand::seq::index::sample(&mut stream_rng(seed, "gmm-subsample"), m, size).into_vec();
    idx.sort_unstable();
    let train = data.select_rows(&idx);

    let ones = vec![1.0; size];
    let (_, global_cov) = mean_and_cov(&train, &ones);
    let ridge = st.ridge * global_cov.trace() / n as f64;
    let global = to_row_matrix(&global_cov, ridge.max(f64::MIN_POSITIVE));

    let km = kmeans_fit(&train, k, derive_seed(seed, "gmm-init"))?;
    let labels = km.predict(&train);
    let mut model = GmmModel {
        weights: vec![0.0; k],
        means: km.centroids.clone(),
        covariances: vec![global.clone(); k],
        seed,
        log_likelihood: Vec::new(),
        converged: false,
        reinitialized: 0,
    };
    for j in 0..k {
        let w: Vec<f64> = labels.iter().map(|&l| if l == j { 1.0 } else { 0.0 }).collect();
        let count: f64 = w.iter().sum();
        model.weights[j] = count.max(1.0) / size as f64;
        if count >= 2.0 {
            model.covariances[j] = to_row_matrix(&mean_and_cov(&train, &w).1, ridge);
        }
    }
    let wsum: f64 = model.weights.iter().sum();
    model.weights.iter_mut().for_each(|w| *w /= wsum);

    let mut resp = RowMatrix::zeros(size, k);
    for _ in 0..st.max_iter {
        let comps = components(&model)?;
        let point_ll = e_step(&comps, &train, &mut resp);
        let ll: f64 = point_ll.iter().sum();
        if let Some(&prev) = model.log_likelihood.last() {
            model.log_likelihood.push(ll);
            if (ll - prev).abs() <= st.tol * prev.abs() {
                model.converged = true;
                break;
            }
        } else {
            model.log_likelihood.push(ll);
        }
        // M step.
        for j in 0..k {
            let w = resp.column(j);
            let nk: f64 = w.iter().sum();
            let weight = nk / size as f64;
            if weight < DEGENERATE_WEIGHT {
                // Collapsed: restart on the worst explained training pixel.
                let worst = (0..size)
                    .min_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]))
                    .unwrap_or(0);
                model.means.row_mut(j).copy_from_slice(train.row(worst));
                model.covariances[j] = global.clone();
                model.weights[j] = 1.0 / k as f64;
                model.reinitialized += 1;
                continue;
            }
            let (mean, cov) = mean_and_cov(&train, &w);
            model.weights[j] = weight;
            model.means.row_mut(j).copy_from_slice(&mean);
            model.covariances[j] = to_row_matrix(&cov, ridge);
        }
        let wsum: f64 = model.weights.iter().sum();
        model.weights.iter_mut().for_each(|w| *w /= wsum);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(centres: &[[f64; 2]], per: usize, sigma: f64, seed: u64) -> RowMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for _ in 0..per {
            for centre in centres {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                rows.push(vec![centre[0] + sigma * a, centre[1] + sigma * b]);
            }
        }
        RowMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn single_gaussian_moments() {
        let data = blobs(&[[1.0, -2.0]], 2000, 0.5, 3);
        let st = GmmSettings {
            subsample_ratio: 1.0,
            ..GmmSettings::default()
        };
        let g = gmm_fit(&data, 1, 0, &st).unwrap();
        assert_eq!(g.weights, vec![1.0]);
        assert!((g.means.get(0, 0) - 1.0).abs() < 0.05 && (g.means.get(0, 1) + 2.0).abs() < 0.05);
        assert!((g.covariances[0].get(0, 0) - 0.25).abs() < 0.03);
        assert!(g.covariances[0].get(0, 1).abs() < 0.03);
    }

    #[test]
    fn separated_blobs_give_hard_responsibilities() {
        let data = blobs(&[[0.0, 0.0], [10.0, 0.0]], 500, 1.0, 5);
        let g = gmm_fit(&data, 2, 7, &GmmSettings::default()).unwrap();
        let p = g.predict_proba(&data).unwrap();
        let sure = p.iter_rows().filter(|r| r.iter().cloned().fold(0.0, f64::max) > 0.99).count();
        assert!(sure as f64 > 0.99 * data.rows() as f64);
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_never_decreases() {
        let data = blobs(&[[0.0, 0.0], [3.0, 1.0], [1.0, 4.0]], 300, 1.2, 8);
        let g = gmm_fit(&data, 3, 2, &GmmSettings::default()).unwrap();
        assert!(g.log_likelihood.len() >= 2);
        for w in g.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn deterministic_and_validated() {
        let data = blobs(&[[0.0, 0.0], [5.0, 5.0]], 100, 1.0, 1);
        let st = GmmSettings::default();
        assert_eq!(gmm_fit(&data, 2, 4, &st).unwrap(), gmm_fit(&data, 2, 4, &st).unwrap());
        assert!(gmm_fit(&data, 5, 4, &st).is_err());
    }
}
