//! Exact minimum-norm point (nearest point) of an H-polyhedron.
//!
//! The search successively projects the query onto support hyperplanes. Each
//! recursion level works in the affine subspace cut out by the hyperplanes
//! already projected onto: remaining constraints are re-expressed in that
//! subspace, filtered (independent of the current basis, violated by the
//! current point, irredundant), sorted by decreasing signed distance and
//! tried in order. A candidate point is accepted once it lies in the
//! polyhedron and no point of the polyhedron lies strictly on the query's
//! side of the hyperplane through it orthogonal to `y - x`.
//!
//! [`project_intersection`] is the plain projection onto an intersection of
//! hyperplanes with independent normals, and [`reduce_family`] the one-pivot
//! change of subspace; the solver applies the same reduction against the
//! whole accumulated basis at once.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{ensure_dim, ensure_finite, PolyxError, Result};
use crate::geom::{irredundant_indices, Hyperplane, PolyhedronH, DEFAULT_TOL};
use crate::linalg::{axpy, distance, dot, norm, orthogonalize};
use crate::lpfeas::{self, LinearSystem};

/// Residual norm below which a normal counts as dependent on the basis.
pub const DEPENDENCE_TOL: f64 = 1e-10;
/// Residuals at or below this are not treated as violated when branching.
const POSITIVE_EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Containment tolerance.
    pub tol: f64,
    pub dependence_tol: f64,
    /// Maximum number of recursion nodes per solve.
    pub node_budget: u64,
    /// Skip the irredundancy filter below the top level.
    pub skip_deep_min_h: bool,
    /// Wall-clock budget per solve.
    pub time_budget: Option<Duration>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            dependence_tol: DEPENDENCE_TOL,
            node_budget: 10_000_000,
            skip_deep_min_h: false,
            time_budget: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinNormResult {
    pub point: Vec<f64>,
    pub signed_distance: f64,
    /// Recursion nodes visited; zero when the query lies inside.
    pub iterations: u64,
}

/// Moving point, orthonormal projection directions and active hyperplanes.
#[derive(Clone, Debug, Default)]
pub struct ProjectionState {
    pub current: Vec<f64>,
    pub ortho_basis: Vec<Vec<f64>>,
    pub active: Vec<usize>,
}

impl ProjectionState {
    pub fn new(x: &[f64]) -> Self {
        Self {
            current: x.to_vec(),
            ..Self::default()
        }
    }

    /// Moves `current` onto `plane` along the component of its normal that is
    /// orthogonal to every previous direction, so earlier planes stay satisfied.
    pub fn project_onto(&mut self, index: usize, plane: &Hyperplane, dependence_tol: f64) -> Result<()> {
        let v = plane.normal();
        let mut w = v.to_vec();
        orthogonalize(&mut w, &self.ortho_basis);
        let len = norm(&w);
        if len < dependence_tol {
            return Err(PolyxError::LinearDependence { index });
        }
        w.iter_mut().for_each(|c| *c /= len);
        let d = plane.residual(&self.current) / dot(&w, v);
        axpy(-d, &w, &mut self.current);
        self.ortho_basis.push(w);
        self.active.push(index);
        Ok(())
    }
}

/// Minimum-norm point from `x` in the intersection of `planes`, whose normals
/// must be linearly independent.
pub fn project_intersection(x: &[f64], planes: &[Hyperplane]) -> Result<Vec<f64>> {
    ensure_finite(x, "query point")?;
    let mut state = ProjectionState::new(x);
    for (i, plane) in planes.iter().enumerate() {
        ensure_dim(x.len(), plane.dim())?;
        state.project_onto(i, plane, DEPENDENCE_TOL)?;
    }
    Ok(state.current)
}

/// A constraint re-expressed in the current affine subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedConstraint {
    /// Index in the original family.
    pub index: usize,
    pub offset: f64,
    /// Unit normal, orthogonal to every projection direction so far.
    pub normal: Vec<f64>,
}

impl ReducedConstraint {
    pub fn residual(&self, x: &[f64]) -> f64 {
        dot(x, &self.normal) - self.offset
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reduction {
    pub family: Vec<ReducedConstraint>,
    /// Original indices of constraints parallel to the pivot.
    pub dropped: Vec<usize>,
}

/// Re-expresses `family` in the hyperplane of `family[pivot]` on which `x`
/// already lies: `v' = normalized(v - <v,p> p)`,
/// `s' = <x, v'> - (<x, v> - s) / <v, v'>`. Constraints parallel to the pivot
/// are dropped and reported.
pub fn reduce_family(x: &[f64], family: &[ReducedConstraint], pivot: usize) -> Result<Reduction> {
    let p = family
        .get(pivot)
        .ok_or_else(|| PolyxError::InvalidInput(format!("pivot {pivot} out of range")))?;
    ensure_dim(p.normal.len(), x.len())?;
    let p_sq = dot(&p.normal, &p.normal);
    let mut out = Reduction {
        family: Vec::with_capacity(family.len().saturating_sub(1)),
        dropped: Vec::new(),
    };
    for (j, c) in family.iter().enumerate() {
        if j == pivot {
            continue;
        }
        ensure_dim(x.len(), c.normal.len())?;
        let mut w = c.normal.clone();
        axpy(-dot(&c.normal, &p.normal) / p_sq, &p.normal, &mut w);
        let len = norm(&w);
        if len < DEPENDENCE_TOL * norm(&c.normal) {
            out.dropped.push(c.index);
            continue;
        }
        w.iter_mut().for_each(|v| *v /= len);
        let offset = dot(x, &w) - c.residual(x) / dot(&c.normal, &w);
        out.family.push(ReducedConstraint {
            index: c.index,
            offset,
            normal: w,
        });
    }
    Ok(out)
}

/// Optimality test for a point `y` of `P` as nearest point from `x`: true iff
/// no point of `P` lies in the open halfspace `<z, y - x> < <y, y - x>`.
///
/// The polyhedron's rows are kept non-strict; for full-dimensional `P` this
/// coincides with requiring its interior to miss that open halfspace, and it
/// stays sound when `P` has empty interior. The search is confined to a unit
/// L1 ball around `y`, which is equivalent by convexity and keeps rounding in
/// `y - x` from being amplified along unbounded directions of `P`.
pub fn is_min_norm(x: &[f64], y: &[f64], p: &PolyhedronH, tol: f64) -> Result<bool> {
    ensure_dim(p.dim(), x.len())?;
    ensure_dim(p.dim(), y.len())?;
    if !p.contains(y, tol)? {
        return Err(PolyxError::Precondition(
            "candidate point is not in the polyhedron".into(),
        ));
    }
    let v: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    if norm(&v) <= tol {
        return Ok(true);
    }
    let mut sys = p.as_linear_system();
    sys.push(&v, dot(y, &v))?;
    let mut strict = vec![false; sys.num_rows()];
    *strict.last_mut().unwrap() = true;
    Ok(!lpfeas::mixed_feasible_near(&sys, &strict, y, 1.0)?)
}

/// The criterion in its interior form: the interior of `P` and the open
/// halfspace must be disjoint. Only meaningful for full-dimensional `P`.
pub fn is_min_norm_interior_form(x: &[f64], y: &[f64], p: &PolyhedronH) -> Result<bool> {
    let v: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    if norm(&v) == 0.0 {
        return Ok(true);
    }
    let mut sys = p.as_linear_system();
    sys.push(&v, dot(y, &v))?;
    let strict = vec![true; sys.num_rows()];
    Ok(!lpfeas::mixed_feasible_near(&sys, &strict, y, 1.0)?)
}

pub struct MinNormSolver {
    cfg: SolverConfig,
}

impl Default for MinNormSolver {
    fn default() -> Self {
        Self::new(SolverConfig::default())
    }
}

impl MinNormSolver {
    pub fn new(cfg: SolverConfig) -> Self {
        Self { cfg }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn solve(&self, p: &PolyhedronH, x: &[f64]) -> Result<MinNormResult> {
        ensure_dim(p.dim(), x.len())?;
        ensure_finite(x, "query point")?;
        if p.contains(x, self.cfg.tol)? {
            return Ok(MinNormResult {
                point: x.to_vec(),
                signed_distance: p.max_residual(x).min(0.0),
                iterations: 0,
            });
        }
        if !p.is_feasible()? {
            return Err(PolyxError::EmptyPolyhedron);
        }
        let mut search = Search {
            p,
            x,
            cfg: &self.cfg,
            nodes: 0,
            started: Instant::now(),
            excluded: vec![false; p.len()],
        };
        let mut state = ProjectionState::new(x);
        let point = search
            .recurse(&mut state)?
            .ok_or(PolyxError::EmptyPolyhedron)?;
        debug_assert!(
            is_min_norm(x, &point, p, self.cfg.tol).unwrap_or(false),
            "accepted point fails the optimality criterion"
        );
        Ok(MinNormResult {
            signed_distance: distance(&point, x),
            point,
            iterations: search.nodes,
        })
    }

    pub fn signed_distance(&self, p: &PolyhedronH, x: &[f64]) -> Result<f64> {
        self.solve(p, x).map(|r| r.signed_distance)
    }
}

/// Solves with the default configuration.
pub fn solve(p: &PolyhedronH, x: &[f64]) -> Result<MinNormResult> {
    MinNormSolver::default().solve(p, x)
}

pub fn signed_distance(p: &PolyhedronH, x: &[f64]) -> Result<f64> {
    MinNormSolver::default().signed_distance(p, x)
}

struct Search<'a> {
    p: &'a PolyhedronH,
    x: &'a [f64],
    cfg: &'a SolverConfig,
    nodes: u64,
    started: Instant,
    /// Constraints withdrawn by earlier siblings of the current path.
    excluded: Vec<bool>,
}

struct Candidate {
    index: usize,
    distance: f64,
    direction: Vec<f64>,
}

impl Search<'_> {
    fn recurse(&mut self, state: &mut ProjectionState) -> Result<Option<Vec<f64>>> {
        self.nodes += 1;
        if self.nodes > self.cfg.node_budget {
            return Err(PolyxError::BudgetExceeded { nodes: self.nodes });
        }
        if let Some(budget) = self.cfg.time_budget {
            if self.nodes.is_multiple_of(16) && self.started.elapsed() > budget {
                return Err(PolyxError::Timeout { nodes: self.nodes });
            }
        }
        let depth = state.active.len();
        assert!(depth <= self.p.dim(), "recursion deeper than the dimension");
        let y = &state.current;

        if self.p.contains(y, self.cfg.tol)? {
            return Ok(if is_min_norm(self.x, y, self.p, self.cfg.tol)? {
                Some(y.clone())
            } else {
                None
            });
        }

        // Reduce the remaining family to the current subspace and keep the
        // independent constraints violated by y.
        let mut cands: Vec<Candidate> = Vec::new();
        for (i, h) in self.p.halfspaces().iter().enumerate() {
            if self.excluded[i] || state.active.contains(&i) {
                continue;
            }
            let r = h.boundary().residual(y);
            if r <= POSITIVE_EPS {
                continue;
            }
            let mut w = h.normal().to_vec();
            orthogonalize(&mut w, &state.ortho_basis);
            let len = norm(&w);
            if len < self.cfg.dependence_tol {
                continue;
            }
            w.iter_mut().for_each(|c| *c /= len);
            cands.push(Candidate {
                index: i,
                distance: r / len,
                direction: w,
            });
        }

        if !(self.cfg.skip_deep_min_h && depth > 0) && cands.len() > 1 {
            // Reduced halfspaces: <z, w> <= <y, w> - d.
            let rhs: Vec<f64> = cands
                .iter()
                .map(|c| dot(y, &c.direction) - c.distance)
                .collect();
            let rows: Vec<&[f64]> = cands.iter().map(|c| c.direction.as_slice()).collect();
            let flat: Vec<f64> = rows.concat();
            if !lpfeas::feasible(&LinearSystem::from_flat(self.p.dim(), flat, rhs.clone())?)? {
                return Ok(None);
            }
            let keep = irredundant_indices(self.p.dim(), &rows, &rhs)?;
            let mut kept = keep.into_iter().peekable();
            let mut pos = 0;
            cands.retain(|_| {
                let hit = kept.peek() == Some(&pos);
                if hit {
                    kept.next();
                }
                pos += 1;
                hit
            });
        }
        if cands.is_empty() {
            return Ok(None);
        }
        cands.sort_by(|a, b| b.distance.total_cmp(&a.distance));

        let mut withdrawn = Vec::with_capacity(cands.len());
        let mut outcome = Ok(None);
        for c in &cands {
            let saved = state.current.clone();
            axpy(-c.distance, &c.direction, &mut state.current);
            state.ortho_basis.push(c.direction.clone());
            state.active.push(c.index);
            outcome = self.recurse(state);
            state.active.pop();
            state.ortho_basis.pop();
            state.current = saved;
            // Later siblings (and their subtrees) no longer see this constraint.
            self.excluded[c.index] = true;
            withdrawn.push(c.index);
            if !matches!(outcome, Ok(None)) {
                break;
            }
        }
        for &i in &withdrawn {
            self.excluded[i] = false;
        }
        outcome
    }
}
