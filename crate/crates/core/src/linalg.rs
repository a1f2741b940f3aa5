//! Small dense helpers shared by the geometric code. Everything here works on
//! plain slices so the hot paths avoid allocation-heavy matrix types.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Removes from `v` its components along the orthonormal vectors in `basis`.
/// Runs the projection twice, which keeps the result orthogonal to working
/// precision even when `v` is nearly inside the span.
pub fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for u in basis {
            let c = dot(v, u);
            axpy(-c, u, v);
        }
    }
}

/// Solves the square system `a * x = b` (row-major `m x m`) by Gaussian
/// elimination with complete pivoting. Returns `None` when a pivot falls
/// below `singular_tol`.
pub fn solve_full_pivot(a: &[f64], b: &[f64], m: usize, singular_tol: f64) -> Option<Vec<f64>> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    let mut col_perm: Vec<usize> = (0..m).collect();
    for k in 0..m {
        let (mut pr, mut pc, mut best) = (k, k, 0.0);
        for r in k..m {
            for c in k..m {
                let v = a[r * m + c].abs();
                if v > best {
                    best = v;
                    pr = r;
                    pc = c;
                }
            }
        }
        if best < singular_tol {
            return None;
        }
        if pr != k {
            for c in 0..m {
                a.swap(k * m + c, pr * m + c);
            }
            b.swap(k, pr);
        }
        if pc != k {
            for r in 0..m {
                a.swap(r * m + k, r * m + pc);
            }
            col_perm.swap(k, pc);
        }
        let piv = a[k * m + k];
        for r in k + 1..m {
            let f = a[r * m + k] / piv;
            if f != 0.0 {
                for c in k..m {
                    a[r * m + c] -= f * a[k * m + c];
                }
                b[r] -= f * b[k];
            }
        }
    }
    let mut z = vec![0.0; m];
    for k in (0..m).rev() {
        let mut acc = b[k];
        for c in k + 1..m {
            acc -= a[k * m + c] * z[c];
        }
        z[k] = acc / a[k * m + k];
    }
    let mut x = vec![0.0; m];
    for (k, &p) in col_perm.iter().enumerate() {
        x[p] = z[k];
    }
    Some(x)
}
