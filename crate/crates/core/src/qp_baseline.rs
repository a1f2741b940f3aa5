//! Reference solvers for the nearest-point problem
//! `min |y|^2  s.t.  V y <= s` (coordinates centered on the query).
//!
//! * [`solve_approx`]: an ADMM operator-splitting solver in the style of
//!   OSQP. Approximate by design; it is the timing and accuracy baseline.
//! * [`brute_force`]: exhaustive enumeration of active sets. Exact but
//!   exponential; used as a test oracle and never by the exact solver.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_dim, ensure_finite, PolyxError, Result};
use crate::geom::{PolyhedronH, DEFAULT_TOL};
use crate::linalg::{axpy, distance, dot, solve_full_pivot};
use crate::minnorm::DEPENDENCE_TOL;

/// Largest number of subsets [`brute_force`] agrees to enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    n: usize,
    /// `k x n`, row-major.
    constraint_matrix: Vec<f64>,
    constraint_rhs: Vec<f64>,
}

impl QpProblem {
    pub fn new(n: usize, constraint_matrix: Vec<f64>, constraint_rhs: Vec<f64>) -> Result<Self> {
        if n == 0 || constraint_rhs.is_empty() || constraint_matrix.len() != n * constraint_rhs.len() {
            return Err(PolyxError::InvalidInput("malformed QP problem".into()));
        }
        ensure_finite(&constraint_matrix, "QP constraint matrix")?;
        ensure_finite(&constraint_rhs, "QP constraint rhs")?;
        Ok(Self {
            n,
            constraint_matrix,
            constraint_rhs,
        })
    }

    /// The nearest-point problem from `x` to `p`, shifted so `x` is the origin.
    pub fn from_polyhedron(p: &PolyhedronH, x: &[f64]) -> Result<Self> {
        ensure_dim(p.dim(), x.len())?;
        let v = p.halfspaces().iter().flat_map(|h| h.normal().iter().copied()).collect();
        let s = p.halfspaces().iter().map(|h| h.offset() - dot(h.normal(), x)).collect();
        Self::new(p.dim(), v, s)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_constraints(&self) -> usize {
        self.constraint_rhs.len()
    }
}

#[derive(Clone, Debug)]
pub struct AdmmSettings {
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    /// Residual checks and step-size updates happen every this many iterations.
    pub check_interval: usize,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            rho: 1.0,
            sigma: 1e-6,
            alpha: 1.6,
            eps_abs: 1e-3,
            eps_rel: 1e-6,
            max_iter: 100_000,
            check_interval: 25,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ApproxSolution {
    /// Minimizer in query-centered coordinates.
    pub point: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// ADMM with `rel_tol` as the relative tolerance and the other settings at
/// their defaults.
pub fn solve_approx(p: &QpProblem, rel_tol: f64, max_iter: usize) -> ApproxSolution {
    solve_admm(
        p,
        &AdmmSettings {
            eps_rel: rel_tol,
            max_iter,
            ..AdmmSettings::default()
        },
    )
}

/// Nearest point of `p` from `x` (absolute coordinates) via ADMM.
pub fn approx_min_norm(p: &PolyhedronH, x: &[f64], settings: &AdmmSettings) -> Result<ApproxSolution> {
    let qp = QpProblem::from_polyhedron(p, x)?;
    let mut sol = solve_admm(&qp, settings);
    for (yi, xi) in sol.point.iter_mut().zip(x) {
        *yi += xi;
    }
    Ok(sol)
}

/// OSQP-style iteration for `P = I, q = 0, A = V, l = -inf, u = s`.
pub fn solve_admm(p: &QpProblem, st: &AdmmSettings) -> ApproxSolution {
    let (n, k) = (p.n, p.num_constraints());
    let a = DMatrix::from_row_slice(k, n, &p.constraint_matrix);
    let ata = a.transpose() * &a;
    let u = DVector::from_column_slice(&p.constraint_rhs);

    let factor = |rho: f64| {
        let mut m = &ata * rho;
        for i in 0..n {
            m[(i, i)] += 1.0 + st.sigma;
        }
        m.cholesky().expect("I + sigma I + rho A^T A is positive definite")
    };
    let mut rho = st.rho;
    let mut chol = factor(rho);

    let mut x = DVector::<f64>::zeros(n);
    let mut z = DVector::<f64>::zeros(k);
    let mut y = DVector::<f64>::zeros(k);
    let mut prim = f64::INFINITY;
    let mut dual = f64::INFINITY;

    let mut iter = 0;
    while iter < st.max_iter {
        iter += 1;
        let rhs = &x * st.sigma + a.transpose() * (&z * rho - &y);
        let x_tilde = chol.solve(&rhs);
        let z_tilde = &a * &x_tilde;
        x = &x_tilde * st.alpha + &x * (1.0 - st.alpha);
        let z_relaxed = &z_tilde * st.alpha + &z * (1.0 - st.alpha);
        let mut z_next = &z_relaxed + &y / rho;
        for (zi, ui) in z_next.iter_mut().zip(u.iter()) {
            *zi = zi.min(*ui);
        }
        y += (&z_relaxed - &z_next) * rho;
        z = z_next;

        if iter % st.check_interval == 0 || iter == st.max_iter {
            let ax = &a * &x;
            let aty = a.transpose() * &y;
            prim = (&ax - &z).amax();
            dual = (&x + &aty).amax();
            let eps_prim = st.eps_abs + st.eps_rel * ax.amax().max(z.amax());
            let eps_dual = st.eps_abs + st.eps_rel * x.amax().max(aty.amax());
            if prim <= eps_prim && dual <= eps_dual {
                return ApproxSolution {
                    point: x.iter().copied().collect(),
                    iterations: iter,
                    converged: true,
                    primal_residual: prim,
                    dual_residual: dual,
                };
            }
            // Residual balancing.
            let prim_scale = prim / ax.amax().max(z.amax()).max(1e-30);
            let dual_scale = dual / x.amax().max(aty.amax()).max(1e-30);
            let ratio = (prim_scale / dual_scale.max(1e-30)).sqrt();
            let new_rho = (rho * ratio).clamp(1e-6, 1e6);
            if new_rho > 5.0 * rho || new_rho < 0.2 * rho {
                rho = new_rho;
                chol = factor(rho);
            }
        }
    }
    ApproxSolution {
        point: x.iter().copied().collect(),
        iterations: iter,
        converged: false,
        primal_residual: prim,
        dual_residual: dual,
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of subsets of size at most `min(n, k)` among `k` constraints.
pub fn subset_count(k: usize, n: usize) -> u128 {
    (0..=n.min(k)).map(|s| binomial(k as u128, s as u128)).sum()
}

/// Exact nearest point by enumerating every independent subset of at most `n`
/// boundary hyperplanes, projecting through the normal equations
/// `(V V^T) lambda = V x - s`, and keeping the closest feasible candidate.
pub fn brute_force(p: &PolyhedronH, x: &[f64]) -> Result<Vec<f64>> {
    ensure_dim(p.dim(), x.len())?;
    ensure_finite(x, "query point")?;
    let (n, k) = (p.dim(), p.len());
    let subsets = subset_count(k, n);
    if subsets > BRUTE_FORCE_LIMIT {
        return Err(PolyxError::GuardExceeded {
            subsets,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let hs = p.halfspaces();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |y: Vec<f64>| {
        if p.max_residual(&y) <= DEFAULT_TOL {
            let d = distance(&y, x);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, y));
            }
        }
    };
    consider(x.to_vec());
    let mut subset = Vec::with_capacity(n);
    for size in 1..=n.min(k) {
        for_each_combination(k, size, &mut subset, &mut |idx| {
            let m = idx.len();
            let mut gram = vec![0.0; m * m];
            let mut r = vec![0.0; m];
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    gram[a * m + b] = dot(hs[i].normal(), hs[j].normal());
                }
                r[a] = hs[i].boundary().residual(x);
            }
            if let Some(lambda) = solve_full_pivot(&gram, &r, m, DEPENDENCE_TOL) {
                let mut y = x.to_vec();
                for (a, &i) in idx.iter().enumerate() {
                    axpy(-lambda[a], hs[i].normal(), &mut y);
                }
                consider(y);
            }
        });
    }
    best.map(|(_, y)| y).ok_or(PolyxError::EmptyPolyhedron)
}

fn for_each_combination(k: usize, size: usize, buf: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    fn go(start: usize, k: usize, size: usize, buf: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if buf.len() == size {
            f(buf);
            return;
        }
        let need = size - buf.len();
        for i in start..=k - need {
            buf.push(i);
            go(i + 1, k, size, buf, f);
            buf.pop();
        }
    }
    buf.clear();
    go(0, k, size, buf, f);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> PolyhedronH {
        PolyhedronH::from_raw(
            2,
            [
                (1.0, vec![1.0, 0.0]),
                (0.0, vec![-1.0, 0.0]),
                (1.0, vec![0.0, 1.0]),
                (0.0, vec![0.0, -1.0]),
            ],
        )
        .unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn brute_force_square() {
        assert!(close(&brute_force(&unit_square(), &[2.0, 2.0]).unwrap(), &[1.0, 1.0], 1e-12));
        assert!(close(&brute_force(&unit_square(), &[2.0, 0.5]).unwrap(), &[1.0, 0.5], 1e-12));
        assert!(close(&brute_force(&unit_square(), &[0.2, 0.5]).unwrap(), &[0.2, 0.5], 1e-15));
    }

    #[test]
    fn brute_force_triangle() {
        // Projection of (1,1) onto x1 + x2 = 1 is (1,1) - ((2-1)/2)(1,1).
        let t = PolyhedronH::from_raw(
            2,
            [(0.0, vec![-1.0, 0.0]), (0.0, vec![0.0, -1.0]), (1.0, vec![1.0, 1.0])],
        )
        .unwrap();
        assert!(close(&brute_force(&t, &[1.0, 1.0]).unwrap(), &[0.5, 0.5], 1e-12));
    }

    #[test]
    fn brute_force_guard() {
        let hs: Vec<(f64, Vec<f64>)> = (0..60)
            .map(|i| {
                let a = i as f64 * 0.1;
                (1.0, vec![a.cos(), a.sin(), 0.3, 0.1, 0.2, 0.5])
            })
            .collect();
        let p = PolyhedronH::from_raw(6, hs).unwrap();
        assert!(matches!(
            brute_force(&p, &[0.0; 6]),
            Err(PolyxError::GuardExceeded { .. })
        ));
    }

    #[test]
    fn admm_single_constraint() {
        // y1 <= -1 with the query at the origin.
        let qp = QpProblem::new(3, vec![1.0, 0.0, 0.0], vec![-1.0]).unwrap();
        let sol = solve_approx(&qp, 1e-6, 100_000);
        assert!(sol.converged);
        assert!(close(&sol.point, &[-1.0, 0.0, 0.0], 1e-4));
    }

    #[test]
    fn admm_origin_feasible() {
        let qp = QpProblem::new(2, vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 2.0]).unwrap();
        let sol = solve_approx(&qp, 1e-6, 100_000);
        assert!(sol.converged);
        assert!(close(&sol.point, &[0.0, 0.0], 1e-4));
    }

    #[test]
    fn admm_square_corner() {
        let sol = approx_min_norm(&unit_square(), &[2.0, 2.0], &AdmmSettings::default()).unwrap();
        assert!(sol.converged);
        assert!(close(&sol.point, &[1.0, 1.0], 1e-2));
    }

    #[test]
    fn admm_reports_non_convergence() {
        let qp = QpProblem::new(2, vec![1.0, 1.0], vec![-3.0]).unwrap();
        let sol = solve_approx(&qp, 1e-12, 3);
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 3);
    }

    #[test]
    fn subset_counts() {
        assert_eq!(subset_count(4, 2), 1 + 4 + 6);
        assert_eq!(subset_count(2, 5), 4);
    }
}
