use serde::{Deserialize, Serialize};

use crate::error::{PolyxError, Result};
use crate::linalg::dot;
use crate::matrix::RowMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmSettings {
    pub c: f64,
    pub tol: f64,
    pub max_epochs: usize,
}

impl Default for SvmSettings {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-6,
            max_epochs: 1000,
        }
    }
}

/// Separator `<w, x> + bias`, negative on the first class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs: usize,
    pub converged: bool,
}

impl LinearSvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

/// Soft-margin linear SVM with hinge loss, trained by dual coordinate descent
/// over the samples in their given order. The bias is the weight of an extra
/// feature fixed at 1. `positive[i]` selects the `+1` side for row `i`.
pub fn train_linear_svm(data: &RowMatrix, positive: &[bool], st: &SvmSettings) -> Result<LinearSvm> {
    let (m, n) = (data.rows(), data.cols());
    if positive.len() != m {
        return Err(PolyxError::DimensionMismatch {
            expected: m,
            found: positive.len(),
        });
    }
    let y: Vec<f64> = positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
    let diag: Vec<f64> = data.iter_rows().map(|x| dot(x, x) + 1.0).collect();
    let mut alpha = vec![0.0; m];
    let mut w = vec![0.0; n];
    let mut b = 0.0;
    let mut epochs = 0;
    let mut converged = false;
    while epochs < st.max_epochs {
        epochs += 1;
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..m {
            let x = data.row(i);
            let g = y[i] * (dot(&w, x) + b) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= st.c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / diag[i]).clamp(0.0, st.c);
                let step = (alpha[i] - old) * y[i];
                for (wj, xj) in w.iter_mut().zip(x) {
                    *wj += step * xj;
                }
                b += step;
            }
        }
        if pg_max - pg_min <= st.tol {
            converged = true;
            break;
        }
    }
    Ok(LinearSvm {
        weights: w,
        bias: b,
        epochs,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_in_one_dimension() {
        let data = RowMatrix::new(2, 1, vec![-1.0, 1.0]).unwrap();
        let svm = train_linear_svm(&data, &[false, true], &SvmSettings::default()).unwrap();
        assert!(svm.converged);
        // Frontier at w x + b = 0.
        assert!((-svm.bias / svm.weights[0]).abs() < 1e-6);
    }

    #[test]
    fn separable_blobs_have_no_violations() {
        let mut rows = Vec::new();
        let mut lab = Vec::new();
        for i in 0..40 {
            let t = i as f64 * 0.37;
            let side = i % 2 == 0;
            let cx = if side { 3.0 } else { -3.0 };
            rows.push(vec![cx + 0.5 * t.sin(), 1.0 + 0.5 * t.cos()]);
            lab.push(side);
        }
        let data = RowMatrix::from_rows(&rows).unwrap();
        let svm = train_linear_svm(&data, &lab, &SvmSettings::default()).unwrap();
        for (x, &p) in rows.iter().zip(&lab) {
            let margin = if p { 1.0 } else { -1.0 } * svm.decision(x);
            assert!(margin >= 1.0 - 1e-4, "hinge violation {margin}");
        }
    }
}
