//! Unsupervised linear classifiers whose classes are convex polyhedra:
//! k-means (Voronoi cells) and a Gaussian mixture relabelled by one-vs-one
//! linear SVMs.

mod gmm;
mod kmeans;
mod svm;

pub use gmm::{argmax_rows, gmm_fit, GmmModel, GmmSettings, DEGENERATE_WEIGHT};
pub use kmeans::{kmeans_fit, KMeansModel, KMEANS_MAX_ITER, KMEANS_SHIFT_TOL};
pub use svm::{train_linear_svm, LinearSvm, SvmSettings};

use serde::{Deserialize, Serialize};

use crate::error::{PolyxError, Result};
use crate::geom::{Halfspace, Hyperplane, PolyhedronH};
use crate::matrix::RowMatrix;

/// Pairs of centroids closer than this are rejected as coincident.
pub const MIN_CENTROID_GAP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Kmeans { centroids: RowMatrix },
    GmmSvm { means: RowMatrix, weights: Vec<f64> },
}

/// K convex classes covering the space. Class `i` holds one halfspace per
/// other class `j`, in increasing `j`; the `(i, j)` and `(j, i)` frontiers
/// are the same hyperplane with opposite orientations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionModel {
    pub classes: usize,
    pub polyhedra: Vec<PolyhedronH>,
    pub provenance: Provenance,
}

impl PartitionModel {
    /// Builds the classes from the frontier of every pair `i < j`, oriented
    /// so that class `i` is on the `<=` side.
    pub fn from_frontiers(
        k: usize,
        frontier: impl Fn(usize, usize) -> Result<Hyperplane>,
        provenance: Provenance,
    ) -> Result<Self> {
        if k < 2 {
            return Err(PolyxError::InvalidInput("a partition needs at least 2 classes".into()));
        }
        let mut faces: Vec<Vec<Halfspace>> = vec![Vec::with_capacity(k - 1); k];
        for i in 0..k {
            for j in i + 1..k {
                let h = frontier(i, j)?;
                faces[j].push(Halfspace::from(h.flipped()));
                faces[i].push(Halfspace::from(h));
            }
        }
        // Class j received its (j, i) faces for i < j first, then (j, i) for
        // i > j, which is already increasing order of the opposing class.
        let dim = faces[0][0].dim();
        let polyhedra = faces
            .into_iter()
            .map(|f| PolyhedronH::new(dim, f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            classes: k,
            polyhedra,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.polyhedra[0].dim()
    }

    /// The `(i, j)` frontier as a halfspace of class `i`.
    pub fn frontier(&self, i: usize, j: usize) -> &Halfspace {
        let slot = if j < i { j } else { j - 1 };
        &self.polyhedra[i].halfspaces()[slot]
    }

    /// Indices of the classes whose polyhedron contains `x` within `tol`.
    pub fn containing(&self, x: &[f64], tol: f64) -> Vec<usize> {
        (0..self.classes)
            .filter(|&i| self.polyhedra[i].max_residual(x) <= tol)
            .collect()
    }
}

/// Voronoi cells of the centroids: the `(i, j)` frontier is the perpendicular
/// bisector with normal pointing from `c_i` to `c_j`.
pub fn voronoi_partition(m: &KMeansModel) -> Result<PartitionModel> {
    let c = &m.centroids;
    PartitionModel::from_frontiers(
        c.rows(),
        |i, j| {
            let (ci, cj) = (c.row(i), c.row(j));
            let v: Vec<f64> = cj.iter().zip(ci).map(|(b, a)| b - a).collect();
            let gap = crate::linalg::norm(&v);
            if gap <= MIN_CENTROID_GAP {
                return Err(PolyxError::CoincidentCentroids(i, j));
            }
            let mid: Vec<f64> = ci.iter().zip(cj).map(|(a, b)| 0.5 * (a + b)).collect();
            Hyperplane::new(crate::linalg::dot(&mid, &v), v)
        },
        Provenance::Kmeans {
            centroids: c.clone(),
        },
    )
}

/// One linear SVM per class pair on the pixels labelled with either class;
/// class `i` is the negative side of the `(i, j)` separator.
pub fn ovo_svm_partition(
    data: &RowMatrix,
    labels: &[usize],
    k: usize,
    st: &SvmSettings,
    provenance: Provenance,
) -> Result<PartitionModel> {
    if labels.len() != data.rows() {
        return Err(PolyxError::DimensionMismatch {
            expected: data.rows(),
            found: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(PolyxError::InvalidInput(format!("label {bad} out of range for K={k}")));
    }
    for class in 0..k {
        if labels.iter().filter(|&&l| l == class).count() < 2 {
            return Err(PolyxError::EmptyClass(class));
        }
    }
    PartitionModel::from_frontiers(
        k,
        |i, j| {
            let idx: Vec<usize> = (0..labels.len()).filter(|&p| labels[p] == i || labels[p] == j).collect();
            let sub = data.select_rows(&idx);
            let positive: Vec<bool> = idx.iter().map(|&p| labels[p] == j).collect();
            let svm = train_linear_svm(&sub, &positive, st)?;
            Hyperplane::new(-svm.bias, svm.weights)
        },
        provenance,
    )
}

/// GMM on a subsample, hard labels on every pixel, then pairwise SVMs.
pub fn gmm_svm_partition(
    data: &RowMatrix,
    k: usize,
    seed: u64,
    gmm: &GmmSettings,
    svm: &SvmSettings,
) -> Result<(GmmModel, PartitionModel)> {
    let model = gmm_fit(data, k, seed, gmm)?;
    let labels = model.predict(data)?;
    let partition = ovo_svm_partition(
        data,
        &labels,
        k,
        svm,
        Provenance::GmmSvm {
            means: model.means.clone(),
            weights: model.weights.clone(),
        },
    )?;
    Ok((model, partition))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::DEFAULT_TOL;

    fn km(rows: &[Vec<f64>]) -> KMeansModel {
        KMeansModel {
            centroids: RowMatrix::from_rows(rows).unwrap(),
            inertia: 0.0,
            seed: 0,
            iterations: 0,
        }
    }

    #[test]
    fn bisector_on_a_line() {
        let p = voronoi_partition(&km(&[vec![0.0], vec![10.0]])).unwrap();
        let h0 = &p.polyhedra[0].halfspaces()[0];
        assert_eq!((h0.offset(), h0.normal()), (5.0, &[1.0][..]));
        let h1 = &p.polyhedra[1].halfspaces()[0];
        assert_eq!((h1.offset(), h1.normal()), (-5.0, &[-1.0][..]));
    }

    #[test]
    fn equilateral_cells_meet_at_the_centre() {
        let s3 = 3f64.sqrt();
        let c = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, s3]];
        let p = voronoi_partition(&km(&c)).unwrap();
        let g = [1.0, s3 / 3.0];
        for poly in &p.polyhedra {
            assert_eq!(poly.len(), 2);
            for h in poly.halfspaces() {
                assert!(h.boundary().residual(&g).abs() < 1e-12);
            }
        }
        // Bisector between c0 and c1 is the line x = 1.
        let f = p.frontier(0, 1);
        assert!((f.normal()[0] - 1.0).abs() < 1e-15 && (f.offset() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn frontiers_are_pairwise_consistent() {
        let c = vec![vec![0.0, 1.0, 2.0], vec![3.0, -1.0, 0.5], vec![1.0, 1.0, 1.0], vec![-2.0, 0.0, 4.0]];
        let p = voronoi_partition(&km(&c)).unwrap();
        for i in 0..4 {
            assert_eq!(p.polyhedra[i].len(), 3);
            for j in 0..4 {
                if i != j {
                    assert_eq!(p.frontier(i, j), &p.frontier(j, i).complement());
                }
            }
        }
        // Voronoi correctness at a few points.
        for x in [[0.1, 0.9, 2.2], [2.5, -0.5, 0.5], [-1.0, 0.0, 3.0]] {
            let nearest = km(&c).predict_one(&x);
            assert_eq!(p.containing(&x, DEFAULT_TOL), vec![nearest]);
        }
    }

    #[test]
    fn coincident_centroids_rejected() {
        let r = voronoi_partition(&km(&[vec![1.0, 1.0], vec![1.0, 1.0]]));
        assert!(matches!(r, Err(PolyxError::CoincidentCentroids(0, 1))));
    }

    #[test]
    fn svm_partition_on_two_points() {
        let data = RowMatrix::new(4, 1, vec![-1.0, -1.0, 1.0, 1.0]).unwrap();
        let prov = Provenance::Kmeans {
            centroids: RowMatrix::zeros(2, 1),
        };
        let p = ovo_svm_partition(&data, &[0, 0, 1, 1], 2, &SvmSettings::default(), prov.clone()).unwrap();
        let h = p.frontier(0, 1);
        assert_eq!(h.normal(), &[1.0]);
        assert!(h.offset().abs() < 1e-6);
        assert!(matches!(
            ovo_svm_partition(&data, &[0, 1, 1, 1], 2, &SvmSettings::default(), prov),
            Err(PolyxError::EmptyClass(0))
        ));
    }

    #[test]
    fn partition_json_round_trip() {
        let p = voronoi_partition(&km(&[vec![0.0, 0.0], vec![4.0, 0.0], vec![0.0, 4.0]])).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let q: PartitionModel = serde_json::from_str(&text).unwrap();
        assert_eq!(q.classes, 3);
        assert_eq!(q.provenance, p.provenance);
        for (a, b) in p.polyhedra.iter().zip(&q.polyhedra) {
            for (ha, hb) in a.halfspaces().iter().zip(b.halfspaces()) {
                assert!((ha.offset() - hb.offset()).abs() < 1e-15);
            }
        }
    }
}
