//! Per-class densities from per-pixel distance vectors.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{PolyxError, Result};
use crate::matrix::RowMatrix;

/// Condition number above which [`basis_change`] refuses the new basis.
pub const BASIS_CONDITION_LIMIT: f64 = 1e8;

/// Standard deviation below which a column counts as constant.
pub const MIN_STD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceKind {
    /// Signed distances to polyhedral classes (negative inside).
    SignedPolyhedral,
    /// Euclidean distances to class centroids.
    Centroid,
}

/// Pixels x classes distances.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceVectors {
    values: RowMatrix,
    kind: DistanceKind,
}

impl DistanceVectors {
    pub fn new(values: RowMatrix, kind: DistanceKind) -> Result<Self> {
        if !values.is_finite() {
            return Err(PolyxError::NonFinite("distance vectors"));
        }
        if kind == DistanceKind::Centroid && values.as_slice().iter().any(|&v| v < 0.0) {
            return Err(PolyxError::InvalidInput(
                "centroid distances must be non-negative".into(),
            ));
        }
        Ok(Self { values, kind })
    }

    pub fn values(&self) -> &RowMatrix {
        &self.values
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    pub fn pixels(&self) -> usize {
        self.values.rows()
    }

    pub fn classes(&self) -> usize {
        self.values.cols()
    }
}

/// Pixels x classes densities; every row is a probability vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMap {
    pub values: RowMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
}

impl DensityMap {
    pub fn pixels(&self) -> usize {
        self.values.rows()
    }

    pub fn classes(&self) -> usize {
        self.values.cols()
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_sum_error(&self) -> f64 {
        self.values
            .iter_rows()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Softmax of one row of opposite distances, `exp(-alpha d_k) / sum_i exp(-alpha d_i)`.
pub fn softmax_row(d: &[f64], alpha: f64, out: &mut [f64]) {
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(d) {
        *o = (-alpha * (v - lo)).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

pub fn softmax_density(d: &DistanceVectors, alpha: f64) -> Result<DensityMap> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(PolyxError::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    let v = d.values();
    let mut out = RowMatrix::zeros(v.rows(), v.cols());
    for i in 0..v.rows() {
        softmax_row(v.row(i), alpha, out.row_mut(i));
    }
    Ok(DensityMap {
        values: out,
        class_names: None,
    })
}

/// Normalised inverse distance `d_k^-p / sum_i d_i^-p`. A row with a zero
/// distance becomes the indicator of its first zero.
pub fn inverse_distance_density(d: &DistanceVectors, p: f64) -> Result<DensityMap> {
    if d.kind() != DistanceKind::Centroid {
        return Err(PolyxError::InvalidInput(
            "inverse distance density needs centroid distances".into(),
        ));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(PolyxError::InvalidInput(format!("power must be positive, got {p}")));
    }
    let v = d.values();
    let mut out = RowMatrix::zeros(v.rows(), v.cols());
    for i in 0..v.rows() {
        let row = v.row(i);
        let o = out.row_mut(i);
        if let Some(z) = row.iter().position(|&x| x == 0.0) {
            o[z] = 1.0;
            continue;
        }
        // Scale by the smallest distance first so huge powers stay finite.
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for (oj, &x) in o.iter_mut().zip(row) {
            *oj = (lo / x).powf(p);
            total += *oj;
        }
        o.iter_mut().for_each(|x| *x /= total);
    }
    Ok(DensityMap {
        values: out,
        class_names: None,
    })
}

/// Population standard deviation of each column.
pub fn column_std(m: &RowMatrix) -> Vec<f64> {
    let n = m.rows() as f64;
    (0..m.cols())
        .map(|j| {
            let col = m.column(j);
            let mean = col.iter().sum::<f64>() / n;
            (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect()
}

/// Divides every column by its population standard deviation.
pub fn std_scale(d: &DistanceVectors) -> Result<DistanceVectors> {
    let v = d.values();
    if v.rows() < 2 {
        return Err(PolyxError::InvalidInput("std scaling needs at least 2 pixels".into()));
    }
    let std = column_std(v);
    if let Some(j) = std.iter().position(|&s| s <= MIN_STD) {
        return Err(PolyxError::InvalidInput(format!(
            "distance column {j} has zero variance"
        )));
    }
    let mut out = v.clone();
    for i in 0..out.rows() {
        for (x, s) in out.row_mut(i).iter_mut().zip(&std) {
            *x /= s;
        }
    }
    Ok(DistanceVectors {
        values: out,
        kind: d.kind(),
    })
}

/// Re-expresses every distance row in the basis formed by, for each class,
/// the row with the lowest distance to that class.
pub fn basis_change(d: &DistanceVectors) -> Result<DistanceVectors> {
    if d.kind() != DistanceKind::SignedPolyhedral {
        return Err(PolyxError::InvalidInput(
            "basis change applies to signed polyhedral distances".into(),
        ));
    }
    let v = d.values();
    let k = v.cols();
    if v.rows() == 0 || k == 0 {
        return Err(PolyxError::InvalidInput("empty distance matrix".into()));
    }
    // Row b of B is the distance row minimising column b.
    let b = DMatrix::from_fn(k, k, |r, c| {
        let best = (0..v.rows())
            .min_by(|&i, &j| v.get(i, r).total_cmp(&v.get(j, r)))
            .unwrap_or(0);
        v.get(best, c)
    });
    let sv = b.clone().svd(false, false).singular_values;
    let (hi, lo) = (sv.max(), sv.min());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition < BASIS_CONDITION_LIMIT) {
        return Err(PolyxError::IllConditioned(format!(
            "basis of extreme distance rows has condition number {condition:e}; disable the basis change"
        )));
    }
    // Coordinates y of a row d in the basis: B^T y = d, each basis vector being a row of B.
    let lu = b.transpose().lu();
    let mut out = RowMatrix::zeros(v.rows(), k);
    for i in 0..v.rows() {
        let rhs = nalgebra::DVector::from_column_slice(v.row(i));
        let y = lu
            .solve(&rhs)
            .ok_or_else(|| PolyxError::IllConditioned("singular basis".into()))?;
        out.row_mut(i).copy_from_slice(y.as_slice());
    }
    DistanceVectors::new(out, d.kind())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(rows: &[Vec<f64>], kind: DistanceKind) -> DistanceVectors {
        DistanceVectors::new(RowMatrix::from_rows(rows).unwrap(), kind).unwrap()
    }

    fn signed(rows: &[Vec<f64>]) -> DistanceVectors {
        dv(rows, DistanceKind::SignedPolyhedral)
    }

    #[test]
    fn softmax_examples() {
        let m = softmax_density(&signed(&[vec![-1.0, 1.0], vec![3.0, 3.0], vec![-700.0, 700.0]]), 1.0).unwrap();
        let e = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((m.values.get(0, 0) - e).abs() < 1e-12);
        assert!((m.values.get(0, 0) - 0.8808).abs() < 1e-4);
        assert_eq!(m.values.row(1), &[0.5, 0.5]);
        assert_eq!(m.values.row(2), &[1.0, 0.0]);
        assert!(m.max_row_sum_error() < 1e-12);
    }

    #[test]
    fn softmax_rejects_bad_alpha() {
        assert!(softmax_density(&signed(&[vec![0.0]]), 0.0).is_err());
        assert!(softmax_density(&signed(&[vec![0.0]]), f64::NAN).is_err());
    }

    #[test]
    fn non_finite_distances_rejected() {
        let m = RowMatrix::from_rows(&[vec![f64::INFINITY, 0.0]]).unwrap();
        assert!(matches!(
            DistanceVectors::new(m, DistanceKind::SignedPolyhedral),
            Err(PolyxError::NonFinite(_))
        ));
        let m = RowMatrix::from_rows(&[vec![-1.0, 0.0]]).unwrap();
        assert!(DistanceVectors::new(m, DistanceKind::Centroid).is_err());
    }

    #[test]
    fn inverse_distance_examples() {
        let d = dv(&[vec![1.0, 1.0], vec![1.0, 3.0], vec![0.0, 5.0], vec![2.0, 0.0]], DistanceKind::Centroid);
        let m = inverse_distance_density(&d, 1.0).unwrap();
        assert_eq!(m.values.row(0), &[0.5, 0.5]);
        assert!((m.values.get(1, 0) - 0.75).abs() < 1e-15);
        assert_eq!(m.values.row(2), &[1.0, 0.0]);
        assert_eq!(m.values.row(3), &[0.0, 1.0]);
        assert!(inverse_distance_density(&signed(&[vec![1.0, 2.0]]), 1.0).is_err());
    }

    #[test]
    fn inverse_distance_defect_on_line() {
        // Centroids at 0 and 10; the point at -5 lies beyond centroid 0, yet
        // its class-0 density is lower than that of a point near the centroid.
        let at = |x: f64| vec![(x - 0.0f64).abs(), (x - 10.0f64).abs()];
        let d = dv(&[at(-5.0), at(0.5)], DistanceKind::Centroid);
        let m = inverse_distance_density(&d, 1.0).unwrap();
        assert!(m.values.get(0, 0) < m.values.get(1, 0));
    }

    #[test]
    fn std_scale_examples() {
        let d = signed(&[vec![2.0, -4.0], vec![-2.0, 4.0]]);
        let s = std_scale(&d).unwrap();
        assert_eq!(column_std(s.values()), vec![1.0, 1.0]);
        let twice = std_scale(&s).unwrap();
        for (a, b) in twice.values().as_slice().iter().zip(s.values().as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(std_scale(&signed(&[vec![1.0, 2.0], vec![1.0, 3.0]])).is_err());
        assert!(std_scale(&signed(&[vec![1.0, 2.0]])).is_err());
    }

    #[test]
    fn basis_change_examples() {
        let id = signed(&[vec![-1.0, 0.0], vec![0.0, -1.0], vec![0.5, 0.25]]);
        // Extreme rows (-1, 0) and (0, -1): B = -I, so coordinates are negated.
        let out = basis_change(&id).unwrap();
        assert_eq!(out.values().row(0), &[1.0, 0.0]);
        assert_eq!(out.values().row(2), &[-0.5, -0.25]);

        let scaled = signed(&[vec![2.0, 0.0], vec![0.0, 2.0], vec![1.0, 3.0]]);
        // Column minima: row 1 for class 0, row 0 for class 1, so B = 2 * swap.
        let out = basis_change(&scaled).unwrap();
        assert_eq!(out.values().row(2), &[1.5, 0.5]);
    }

    #[test]
    fn basis_change_singular() {
        let d = signed(&[vec![1.0, 1.0], vec![2.0, 2.0]]);
        assert!(matches!(basis_change(&d), Err(PolyxError::IllConditioned(_))));
    }
}
