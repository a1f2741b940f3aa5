//! Abundance and probability maps of spectral images from polyhedral
//! classes, and their evaluation against ground truth.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{gmm_svm_partition, kmeans_fit, voronoi_partition, GmmSettings, PartitionModel, SvmSettings};
use crate::density::{basis_change, softmax_density, softmax_row, std_scale, DensityMap, DistanceKind, DistanceVectors};
use crate::error::{PolyxError, Result};
use crate::matrix::RowMatrix;
use crate::minnorm::MinNormSolver;
use crate::rng::derive_seed;

/// Condition number above which endmembers count as linearly dependent.
pub const ENDMEMBER_CONDITION_LIMIT: f64 = 1e10;
/// Largest class count for the exhaustive permutation search of [`rmse`].
pub const MAX_PERMUTED_CLASSES: usize = 8;

/// Image stored pixel-major: one row of `bands` values per pixel, rows in
/// row-major pixel order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralImage {
    width: usize,
    height: usize,
    data: RowMatrix,
}

impl SpectralImage {
    pub fn new(width: usize, height: usize, data: RowMatrix) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(PolyxError::InvalidInput("image must have at least one pixel".into()));
        }
        if width.checked_mul(height) != Some(data.rows()) {
            return Err(PolyxError::InvalidInput(format!(
                "{width}x{height} image needs {} pixel rows, got {}",
                width.saturating_mul(height),
                data.rows()
            )));
        }
        if data.cols() == 0 {
            return Err(PolyxError::InvalidInput("image has no bands".into()));
        }
        if !data.is_finite() {
            return Err(PolyxError::NonFinite("image data"));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.data.rows()
    }

    pub fn bands(&self) -> usize {
        self.data.cols()
    }

    pub fn data(&self) -> &RowMatrix {
        &self.data
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndmemberSet {
    /// K x bands.
    pub spectra: RowMatrix,
    pub source_pixel: Vec<usize>,
}

/// Signed distance of every pixel to every class, pixels solved in parallel.
pub fn signed_distances(data: &RowMatrix, partition: &PartitionModel, solver: &MinNormSolver) -> Result<RowMatrix> {
    crate::error::ensure_dim(partition.dim(), data.cols())?;
    let k = partition.classes;
    let rows: Vec<Vec<f64>> = (0..data.rows())
        .into_par_iter()
        .map(|i| {
            partition
                .polyhedra
                .iter()
                .map(|p| solver.signed_distance(p, data.row(i)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = RowMatrix::zeros(data.rows(), k);
    for (i, r) in rows.into_iter().enumerate() {
        out.row_mut(i).copy_from_slice(&r);
    }
    Ok(out)
}

/// For each class, the pixel with the lowest signed distance to it (lowest
/// index on ties). A class with no pixel inside is an error.
pub fn endmembers_from_distances(data: &RowMatrix, distances: &RowMatrix) -> Result<EndmemberSet> {
    let k = distances.cols();
    if k < 2 {
        return Err(PolyxError::InvalidInput("endmember extraction needs K >= 2".into()));
    }
    let mut source = Vec::with_capacity(k);
    for class in 0..k {
        let mut best = 0;
        for i in 1..distances.rows() {
            if distances.get(i, class) < distances.get(best, class) {
                best = i;
            }
        }
        if distances.rows() == 0 || distances.get(best, class) > 0.0 {
            return Err(PolyxError::EmptyClass(class));
        }
        source.push(best);
    }
    Ok(EndmemberSet {
        spectra: data.select_rows(&source),
        source_pixel: source,
    })
}

/// The deepest pixel of every class.
pub fn extract_endmembers(img: &SpectralImage, partition: &PartitionModel) -> Result<EndmemberSet> {
    let d = signed_distances(img.data(), partition, &MinNormSolver::default())?;
    endmembers_from_distances(img.data(), &d)
}

/// Least-squares abundances solving `M^T a = y` per pixel through the
/// pseudo-inverse of the endmember matrix. With `clip`, entries are clipped
/// to `[0, 1]` and rows renormalised to sum to one.
pub fn abundances_from_endmembers(img: &SpectralImage, m: &EndmemberSet, clip: bool) -> Result<RowMatrix> {
    let (k, n) = (m.spectra.rows(), m.spectra.cols());
    crate::error::ensure_dim(n, img.bands())?;
    if k > n {
        return Err(PolyxError::InvalidInput(format!(
            "{k} endmembers exceed {n} bands"
        )));
    }
    // Columns of `mt` are the endmember spectra.
    let mt = DMatrix::from_fn(n, k, |b, j| m.spectra.get(j, b));
    let svd = mt.clone().svd(true, true);
    let (hi, lo) = (svd.singular_values.max(), svd.singular_values.min());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= ENDMEMBER_CONDITION_LIMIT) {
        return Err(PolyxError::RankDeficient { condition });
    }
    let pinv = svd
        .pseudo_inverse(0.0)
        .map_err(|e| PolyxError::IllConditioned(e.to_string()))?;
    let mut out = RowMatrix::zeros(img.pixels(), k);
    for (i, y) in img.data().iter_rows().enumerate() {
        let a = out.row_mut(i);
        for (j, aj) in a.iter_mut().enumerate() {
            *aj = (0..n).map(|b| pinv[(j, b)] * y[b]).sum();
        }
        if clip {
            a.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
            let total: f64 = a.iter().sum();
            if total > 0.0 {
                a.iter_mut().for_each(|v| *v /= total);
            } else {
                a.iter_mut().for_each(|v| *v = 1.0 / k as f64);
            }
        }
    }
    Ok(out)
}

/// Softmax of the opposite std-scaled signed distances. With
/// `change_basis`, the scaled distances are first rewritten in the basis of
/// the per-class extreme rows and the softmax is taken over those
/// coordinates, which grow towards each class's extreme.
pub fn densities_from_distances(distances: RowMatrix, alpha: f64, change_basis: bool) -> Result<DensityMap> {
    let scaled = std_scale(&DistanceVectors::new(distances, DistanceKind::SignedPolyhedral)?)?;
    if !change_basis {
        return softmax_density(&scaled, alpha);
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(PolyxError::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    let coords = basis_change(&scaled)?;
    let v = coords.values();
    let mut out = RowMatrix::zeros(v.rows(), v.cols());
    let mut neg = vec![0.0; v.cols()];
    for i in 0..v.rows() {
        neg.iter_mut().zip(v.row(i)).for_each(|(a, b)| *a = -b);
        softmax_row(&neg, alpha, out.row_mut(i));
    }
    Ok(DensityMap {
        values: out,
        class_names: None,
    })
}

/// Probability map: signed distances to all classes, std scaling, softmax.
pub fn probability_pipeline(img: &SpectralImage, partition: &PartitionModel, alpha: f64) -> Result<DensityMap> {
    let d = signed_distances(img.data(), partition, &MinNormSolver::default())?;
    densities_from_distances(d, alpha, false)
}

/// Visits every permutation of `0..k` in lexicographic order.
fn for_each_permutation(k: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..k).collect();
    loop {
        f(&p);
        let Some(i) = (1..k).rev().find(|&i| p[i - 1] < p[i]) else { return };
        let j = (i..k).rev().find(|&j| p[j] > p[i - 1]).unwrap_or(i);
        p.swap(i - 1, j);
        p[i..].reverse();
    }
}

/// Root mean squared error over all entries. With `permute`, estimated
/// column `perm[c]` is compared with true column `c` and the permutation
/// minimising the error is returned (the first in lexicographic order on ties).
pub fn rmse(est: &RowMatrix, truth: &RowMatrix, permute: bool) -> Result<(f64, Vec<usize>)> {
    if est.rows() != truth.rows() || est.cols() != truth.cols() {
        return Err(PolyxError::InvalidInput(format!(
            "shape mismatch: {}x{} vs {}x{}",
            est.rows(),
            est.cols(),
            truth.rows(),
            truth.cols()
        )));
    }
    let k = est.cols();
    if est.rows() == 0 || k == 0 {
        return Err(PolyxError::InvalidInput("empty matrices".into()));
    }
    if permute && k > MAX_PERMUTED_CLASSES {
        return Err(PolyxError::InvalidInput(format!(
            "permutation search supports at most {MAX_PERMUTED_CLASSES} classes, got {k}"
        )));
    }
    // cost[e][t]: squared error between estimated column e and true column t.
    let mut cost = vec![vec![0.0; k]; k];
    for (re, rt) in est.iter_rows().zip(truth.iter_rows()) {
        for e in 0..k {
            for t in 0..k {
                cost[e][t] += (re[e] - rt[t]).powi(2);
            }
        }
    }
    let total = (est.rows() * k) as f64;
    let identity: Vec<usize> = (0..k).collect();
    let score = |p: &[usize]| p.iter().enumerate().map(|(t, &e)| cost[e][t]).sum::<f64>();
    if !permute {
        return Ok(((score(&identity) / total).sqrt(), identity));
    }
    let mut best = (f64::INFINITY, identity);
    for_each_permutation(k, |p| {
        let s = score(p);
        if s < best.0 {
            best = (s, p.to_vec());
        }
    });
    Ok(((best.0 / total).sqrt(), best.1))
}

/// Reorders estimated columns so that column `c` of the result is column
/// `perm[c]` of `est`.
pub fn permute_columns(est: &RowMatrix, perm: &[usize]) -> RowMatrix {
    let mut out = RowMatrix::zeros(est.rows(), perm.len());
    for i in 0..est.rows() {
        for (c, &e) in perm.iter().enumerate() {
            out.set(i, c, est.get(i, e));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    Kmeans,
    GmmSvm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnmixMode {
    Abundance,
    Probability,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnmixConfig {
    pub classifier: ClassifierKind,
    pub classes: usize,
    pub mode: UnmixMode,
    pub alpha: f64,
    pub basis_change: bool,
    pub clip_abundances: bool,
    pub gmm: GmmSettings,
    pub svm: SvmSettings,
}

impl UnmixConfig {
    pub fn new(classifier: ClassifierKind, classes: usize, mode: UnmixMode) -> Self {
        Self {
            classifier,
            classes,
            mode,
            alpha: 1.0,
            basis_change: false,
            clip_abundances: false,
            gmm: GmmSettings::default(),
            svm: SvmSettings::default(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StageTimes {
    pub fit: Duration,
    pub distances: Duration,
    pub density: Duration,
}

#[derive(Clone, Debug)]
pub struct UnmixRun {
    pub seed: u64,
    pub partition: PartitionModel,
    pub densities: DensityMap,
    pub endmembers: Option<EndmemberSet>,
    pub times: StageTimes,
}

/// One seeded run: fit the classifier, compute signed distances, then
/// abundances or probabilities.
pub fn run_unmix(img: &SpectralImage, cfg: &UnmixConfig, seed: u64) -> Result<UnmixRun> {
    let t0 = Instant::now();
    let partition = match cfg.classifier {
        ClassifierKind::Kmeans => {
            let km = kmeans_fit(img.data(), cfg.classes, derive_seed(seed, "kmeans"))?;
            voronoi_partition(&km)?
        }
        ClassifierKind::GmmSvm => {
            gmm_svm_partition(img.data(), cfg.classes, derive_seed(seed, "gmm"), &cfg.gmm, &cfg.svm)?.1
        }
    };
    let fit = t0.elapsed();

    let t1 = Instant::now();
    let distances = signed_distances(img.data(), &partition, &MinNormSolver::default())?;
    let dist_time = t1.elapsed();

    let t2 = Instant::now();
    let (densities, endmembers) = match cfg.mode {
        UnmixMode::Abundance => {
            let m = endmembers_from_distances(img.data(), &distances)?;
            let a = abundances_from_endmembers(img, &m, cfg.clip_abundances)?;
            (
                DensityMap {
                    values: a,
                    class_names: None,
                },
                Some(m),
            )
        }
        UnmixMode::Probability => (densities_from_distances(distances, cfg.alpha, cfg.basis_change)?, None),
    };
    Ok(UnmixRun {
        seed,
        partition,
        densities,
        endmembers,
        times: StageTimes {
            fit,
            distances: dist_time,
            density: t2.elapsed(),
        },
    })
}
