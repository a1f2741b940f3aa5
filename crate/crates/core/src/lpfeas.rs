//! Linear feasibility engine.
//!
//! Decides whether `A x <= b` (non-strict) or `A x < b` (strict) has a
//! solution, using a dense two-phase simplex with Bland's anti-cycling rule.
//! Rows are rescaled to unit norm before solving, so both answers are
//! invariant under positive row scaling.
//!
//! Strict feasibility is decided through the slack LP
//! `max t  s.t.  A x + t 1 <= b,  t <= 1`, which is strict-feasible iff the
//! optimal `t` exceeds [`STRICT_TOL`].

use crate::error::{ensure_finite, PolyxError, Result};

/// Phase-1 objective threshold below which a system is declared feasible.
pub const PHASE1_TOL: f64 = 1e-9;
/// Minimum slack for a strict system to count as feasible.
pub const STRICT_TOL: f64 = 1e-9;

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;
const ZERO_ROW: f64 = 1e-14;
const MAX_PIVOTS: usize = 200_000;

/// `m x n` system of linear inequalities `rows * x (<=|<) rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    n: usize,
    rows: Vec<f64>,
    rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn new(rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(PolyxError::InvalidInput("ragged constraint rows".into()));
        }
        Self::from_flat(n, rows.concat(), rhs)
    }

    pub fn from_flat(n: usize, rows: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        if n == 0 || rhs.is_empty() {
            return Err(PolyxError::InvalidInput(
                "a linear system needs at least one row and one column".into(),
            ));
        }
        if rows.len() != n * rhs.len() {
            return Err(PolyxError::InvalidInput(format!(
                "{} coefficients do not form {} rows of width {n}",
                rows.len(),
                rhs.len()
            )));
        }
        ensure_finite(&rows, "constraint rows")?;
        ensure_finite(&rhs, "constraint rhs")?;
        Ok(Self { n, rows, rhs })
    }

    pub fn push(&mut self, row: &[f64], rhs: f64) -> Result<()> {
        if row.len() != self.n {
            return Err(PolyxError::DimensionMismatch {
                expected: self.n,
                found: row.len(),
            });
        }
        ensure_finite(row, "constraint rows")?;
        ensure_finite(&[rhs], "constraint rhs")?;
        self.rows.extend_from_slice(row);
        self.rhs.push(rhs);
        Ok(())
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }
}

/// True iff some `x` satisfies every row non-strictly.
pub fn feasible(sys: &LinearSystem) -> Result<bool> {
    Ok(max_margin(sys, &vec![false; sys.num_rows()])?.is_some())
}

/// True iff some `x` satisfies every row strictly.
pub fn strict_feasible(sys: &LinearSystem) -> Result<bool> {
    mixed_feasible(sys, &vec![true; sys.num_rows()])
}

/// Feasibility of a system where `strict[i]` selects `<` for row `i` and
/// `<=` otherwise.
pub fn mixed_feasible(sys: &LinearSystem, strict: &[bool]) -> Result<bool> {
    Ok(matches!(max_margin(sys, strict)?, Some(t) if t > STRICT_TOL))
}

/// Largest common slack `t <= 1` of the strict rows (unit-normalized) while
/// the non-strict rows hold. `None` when the non-strict rows are infeasible.
/// With no strict rows the margin is reported as `1.0`.
pub fn max_margin(sys: &LinearSystem, strict: &[bool]) -> Result<Option<f64>> {
    margin_impl(sys, strict, None)
}

/// [`mixed_feasible`] restricted to the L1 ball `|x - center|_1 <= radius`.
///
/// For a system whose non-strict rows hold at `center`, a strict solution
/// exists anywhere iff one exists in the ball, since the segment from
/// `center` to any solution stays feasible. The bounded form is the one to
/// use when strict rows come from rounded data and the feasible set is
/// unbounded: a direction tilted by rounding then gains at most
/// `radius * tilt` instead of an arbitrary amount far away.
pub fn mixed_feasible_near(sys: &LinearSystem, strict: &[bool], center: &[f64], radius: f64) -> Result<bool> {
    if center.len() != sys.n {
        return Err(PolyxError::DimensionMismatch {
            expected: sys.n,
            found: center.len(),
        });
    }
    ensure_finite(center, "ball center")?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(PolyxError::InvalidInput("ball radius must be positive".into()));
    }
    // Shift the origin to the center: rows * d (<|<=) rhs - rows * center.
    let mut shifted = sys.clone();
    for i in 0..sys.num_rows() {
        let r = sys.row(i);
        shifted.rhs[i] -= r.iter().zip(center).map(|(a, c)| a * c).sum::<f64>();
    }
    Ok(matches!(margin_impl(&shifted, strict, Some(radius))?, Some(t) if t > STRICT_TOL))
}

fn margin_impl(sys: &LinearSystem, strict: &[bool], l1_radius: Option<f64>) -> Result<Option<f64>> {
    if strict.len() != sys.num_rows() {
        return Err(PolyxError::DimensionMismatch {
            expected: sys.num_rows(),
            found: strict.len(),
        });
    }
    let n = sys.n;
    let mut rows: Vec<f64> = Vec::with_capacity(sys.rows.len());
    let mut rhs = Vec::with_capacity(sys.rhs.len());
    let mut is_strict = Vec::with_capacity(sys.rhs.len());
    let mut cap = 1.0_f64;
    for i in 0..sys.num_rows() {
        let row = sys.row(i);
        let scale = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let b = sys.rhs[i];
        if scale <= ZERO_ROW {
            // 0 <= b (or 0 < b): decided without the LP.
            if strict[i] {
                cap = cap.min(b);
            } else if b < -PHASE1_TOL {
                return Ok(None);
            }
            continue;
        }
        rows.extend(row.iter().map(|v| v / scale));
        rhs.push(b / scale);
        is_strict.push(strict[i]);
    }
    let any_strict = is_strict.iter().any(|&s| s);
    if rhs.is_empty() {
        return Ok(Some(cap));
    }
    let margin = solve_margin(n, &rows, &rhs, &is_strict, l1_radius)?;
    Ok(margin.map(|t| if any_strict { t.min(cap) } else { cap }))
}

/// Builds and solves the standard-form LP behind [`max_margin`].
///
/// Columns: `x+ (n) | x- (n) | tau (1, if any strict row) | slack (m) | artificial`.
/// With `t = 1 - tau`, the strict rows read `a x - tau <= b - 1` and the
/// objective is `min tau`, bounded below by zero. An L1 radius adds the row
/// `sum(x+) + sum(x-) <= radius`.
fn solve_margin(
    n: usize,
    rows: &[f64],
    rhs: &[f64],
    strict: &[bool],
    l1_radius: Option<f64>,
) -> Result<Option<f64>> {
    let base = rhs.len();
    let m = base + usize::from(l1_radius.is_some());
    let any_strict = strict.iter().any(|&s| s);
    let tau_col = any_strict.then_some(2 * n);
    let slack0 = 2 * n + usize::from(any_strict);
    let art0 = slack0 + m;
    let needs_art: Vec<bool> = (0..base)
        .map(|i| rhs[i] - if strict[i] { 1.0 } else { 0.0 } < 0.0)
        .chain(l1_radius.map(|_| false))
        .collect();
    let n_art = needs_art.iter().filter(|&&a| a).count();
    let width = art0 + n_art + 1;
    let mut tab = Tableau::new(m, width);

    let mut art = art0;
    for i in 0..base {
        let a = &rows[i * n..(i + 1) * n];
        let mut b = rhs[i];
        let r = tab.row_mut(i);
        for j in 0..n {
            r[j] = a[j];
            r[n + j] = -a[j];
        }
        if strict[i] {
            r[tau_col.unwrap()] = -1.0;
            b -= 1.0;
        }
        r[slack0 + i] = 1.0;
        r[width - 1] = b;
        if needs_art[i] {
            for v in r.iter_mut() {
                *v = -*v;
            }
            r[art] = 1.0;
            tab.basis[i] = art;
            art += 1;
        } else {
            tab.basis[i] = slack0 + i;
        }
    }
    if let Some(radius) = l1_radius {
        let r = tab.row_mut(base);
        r[..2 * n].iter_mut().for_each(|v| *v = 1.0);
        r[slack0 + base] = 1.0;
        r[width - 1] = radius;
        tab.basis[base] = slack0 + base;
    }

    if n_art > 0 {
        // Phase 1: minimize the sum of the artificials.
        let obj = tab.obj_mut();
        obj.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            if needs_art[i] {
                for j in 0..width {
                    let v = tab.t[i * width + j];
                    tab.t[m * width + j] -= v;
                }
            }
        }
        for j in art0..art0 + n_art {
            tab.t[m * width + j] = 0.0;
        }
        tab.run(width - 1)?;
        let phase1 = -tab.t[m * width + width - 1];
        if phase1 > PHASE1_TOL {
            return Ok(None);
        }
        // Drive zero-valued artificials out of the basis where possible.
        for i in 0..m {
            if tab.basis[i] >= art0 {
                if let Some(j) = (0..art0).find(|&j| tab.t[i * width + j].abs() > 1e-9) {
                    tab.pivot(i, j);
                }
            }
        }
    }

    let Some(tau) = tau_col else {
        return Ok(Some(1.0));
    };
    // Phase 2: minimize tau. Artificial columns are barred from entering.
    {
        let obj = tab.obj_mut();
        obj.iter_mut().for_each(|v| *v = 0.0);
        obj[tau] = 1.0;
    }
    for i in 0..m {
        if tab.basis[i] == tau {
            for j in 0..width {
                let v = tab.t[i * width + j];
                tab.t[m * width + j] -= v;
            }
        }
    }
    tab.run(art0)?;
    let tau_value = (0..m)
        .find(|&i| tab.basis[i] == tau)
        .map_or(0.0, |i| tab.t[i * width + width - 1]);
    Ok(Some(1.0 - tau_value))
}

struct Tableau {
    m: usize,
    width: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn new(m: usize, width: usize) -> Self {
        Self {
            m,
            width,
            t: vec![0.0; (m + 1) * width],
            basis: vec![0; m],
        }
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.t[i * self.width..(i + 1) * self.width]
    }

    fn obj_mut(&mut self) -> &mut [f64] {
        let w = self.width;
        &mut self.t[self.m * w..(self.m + 1) * w]
    }

    /// Bland's rule iterations; only columns `< enter_limit` may enter.
    fn run(&mut self, enter_limit: usize) -> Result<()> {
        let (m, w) = (self.m, self.width);
        for _ in 0..MAX_PIVOTS {
            let obj = &self.t[m * w..];
            let Some(col) = (0..enter_limit).find(|&j| obj[j] < -COST_EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i * w + col];
                if a > PIVOT_EPS {
                    let ratio = self.t[i * w + w - 1].max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - 1e-12
                                || (ratio <= best + 1e-12 && self.basis[i] < self.basis[r])
                            {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            match leave {
                // Unbounded direction: cannot occur for the bounded
                // objectives used here, so treat it as converged.
                None => return Ok(()),
                Some((row, _)) => self.pivot(row, col),
            }
        }
        Err(PolyxError::IllConditioned(
            "simplex pivot limit reached".into(),
        ))
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.t[row * w + col];
        for j in 0..w {
            self.t[row * w + j] /= p;
        }
        let (before, rest) = self.t.split_at_mut(row * w);
        let (prow, after) = rest.split_at_mut(w);
        for other in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = other[col];
            if f != 0.0 {
                for (o, &pv) in other.iter_mut().zip(prow.iter()) {
                    *o -= f * pv;
                }
                other[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }
}
