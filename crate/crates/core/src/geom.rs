//! Hyperplanes, halfspaces and polyhedra in H-representation.
//!
//! A hyperplane is stored as `(offset, normal)` with a unit normal, and bounds
//! the closed halfspace `{x : <x, normal> <= offset}`. A polyhedron is a
//! finite intersection of such halfspaces; it may be unbounded, lower
//! dimensional or empty.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, PolyxError, Result};
use crate::linalg::{axpy, dot, norm};
use crate::lpfeas::{self, LinearSystem};

/// Default absolute tolerance of geometric predicates.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Normals shorter than this are rejected at construction.
pub const MIN_NORMAL_NORM: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCouple")]
pub struct Hyperplane {
    offset: f64,
    normal: Vec<f64>,
}

impl Hyperplane {
    /// Builds `{x : <x, v> = s}`, rescaling `(s, v)` to `(s/|v|, v/|v|)`.
    pub fn new(offset: f64, normal: Vec<f64>) -> Result<Self> {
        if normal.is_empty() {
            return Err(PolyxError::InvalidInput("hyperplane of dimension 0".into()));
        }
        ensure_finite(&normal, "hyperplane normal")?;
        ensure_finite(&[offset], "hyperplane offset")?;
        let len = norm(&normal);
        if len < MIN_NORMAL_NORM {
            return Err(PolyxError::DegenerateHyperplane { norm: len });
        }
        Ok(Self {
            offset: offset / len,
            normal: normal.into_iter().map(|v| v / len).collect(),
        })
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// `<x, normal> - offset`, without a dimension check.
    #[inline]
    pub fn residual(&self, x: &[f64]) -> f64 {
        dot(x, &self.normal) - self.offset
    }

    /// Orthogonal projection of `x` onto the hyperplane.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        axpy(-self.residual(x), &self.normal, &mut y);
        y
    }

    pub fn translated(&self, t: &[f64]) -> Self {
        Self {
            offset: self.offset + dot(&self.normal, t),
            normal: self.normal.clone(),
        }
    }

    /// The same hyperplane with the opposite orientation.
    pub fn flipped(&self) -> Self {
        Self {
            offset: -self.offset,
            normal: self.normal.iter().map(|v| -v).collect(),
        }
    }
}

/// Wire form of a couple; normals in files need not be normalized.
#[derive(Deserialize)]
struct RawCouple {
    offset: f64,
    normal: Vec<f64>,
}

impl TryFrom<RawCouple> for Hyperplane {
    type Error = PolyxError;

    fn try_from(raw: RawCouple) -> Result<Self> {
        Hyperplane::new(raw.offset, raw.normal)
    }
}

/// Closed halfspace `{x : <x, normal> <= offset}` bounded by `boundary`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Halfspace {
    boundary: Hyperplane,
}

impl Halfspace {
    pub fn new(offset: f64, normal: Vec<f64>) -> Result<Self> {
        Hyperplane::new(offset, normal).map(Self::from)
    }

    pub fn boundary(&self) -> &Hyperplane {
        &self.boundary
    }

    pub fn offset(&self) -> f64 {
        self.boundary.offset
    }

    pub fn normal(&self) -> &[f64] {
        &self.boundary.normal
    }

    pub fn dim(&self) -> usize {
        self.boundary.dim()
    }

    /// The closure of the complement.
    pub fn complement(&self) -> Self {
        Self {
            boundary: self.boundary.flipped(),
        }
    }
}

impl From<Hyperplane> for Halfspace {
    fn from(boundary: Hyperplane) -> Self {
        Self { boundary }
    }
}

/// Signed distance from `x` to the boundary of `b`: negative inside, zero on
/// the boundary, positive outside.
pub fn halfspace_signed_distance(x: &[f64], b: &Halfspace) -> Result<f64> {
    ensure_dim(b.dim(), x.len())?;
    Ok(b.boundary.residual(x))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolyhedron")]
pub struct PolyhedronH {
    dim: usize,
    halfspaces: Vec<Halfspace>,
}

#[derive(Deserialize)]
struct RawPolyhedron {
    dim: usize,
    halfspaces: Vec<Halfspace>,
}

impl TryFrom<RawPolyhedron> for PolyhedronH {
    type Error = PolyxError;

    fn try_from(raw: RawPolyhedron) -> Result<Self> {
        PolyhedronH::new(raw.dim, raw.halfspaces)
    }
}

impl PolyhedronH {
    pub fn new(dim: usize, halfspaces: Vec<Halfspace>) -> Result<Self> {
        if dim == 0 {
            return Err(PolyxError::InvalidInput("polyhedron of dimension 0".into()));
        }
        if halfspaces.is_empty() {
            return Err(PolyxError::InvalidInput(
                "a polyhedron needs at least one halfspace".into(),
            ));
        }
        for h in &halfspaces {
            ensure_dim(dim, h.dim())?;
        }
        Ok(Self { dim, halfspaces })
    }

    /// Convenience constructor from raw `(offset, normal)` couples.
    pub fn from_raw<I, V>(dim: usize, couples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, V)>,
        V: Into<Vec<f64>>,
    {
        let hs = couples
            .into_iter()
            .map(|(s, v)| Halfspace::new(s, v.into()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, hs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn len(&self) -> usize {
        self.halfspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.halfspaces.is_empty()
    }

    /// Sub-polyhedron keeping the halfspaces at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            self.dim,
            indices.iter().map(|&i| self.halfspaces[i].clone()).collect(),
        )
    }

    pub fn translated(&self, t: &[f64]) -> Result<Self> {
        ensure_dim(self.dim, t.len())?;
        Ok(Self {
            dim: self.dim,
            halfspaces: self
                .halfspaces
                .iter()
                .map(|h| Halfspace::from(h.boundary.translated(t)))
                .collect(),
        })
    }

    /// `max_i (<x, v_i> - s_i)`, unchecked.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        self.halfspaces
            .iter()
            .map(|h| h.boundary.residual(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        ensure_dim(self.dim, x.len())?;
        Ok(self.max_residual(x) <= tol)
    }

    /// Signed distance of an inside point to the frontier, `max_i <x,v_i> - s_i`.
    /// Equals `-d(x, boundary)` on a minimum H-description; redundant
    /// halfspaces never raise the maximum for points of the polyhedron.
    pub fn inside_signed_distance(&self, x: &[f64]) -> Result<f64> {
        ensure_dim(self.dim, x.len())?;
        let d = self.max_residual(x);
        if d > 0.0 {
            return Err(PolyxError::Precondition(format!(
                "point lies outside the polyhedron (max residual {d:e})"
            )));
        }
        Ok(d)
    }

    pub fn as_linear_system(&self) -> LinearSystem {
        let rows = self
            .halfspaces
            .iter()
            .flat_map(|h| h.normal().iter().copied())
            .collect();
        let rhs = self.halfspaces.iter().map(Halfspace::offset).collect();
        LinearSystem::from_flat(self.dim, rows, rhs).expect("polyhedron rows are finite")
    }

    /// Non-strict feasibility of the defining system.
    pub fn is_feasible(&self) -> Result<bool> {
        lpfeas::feasible(&self.as_linear_system())
    }

    pub fn has_interior(&self) -> Result<bool> {
        lpfeas::strict_feasible(&self.as_linear_system())
    }

    fn ensure_nonempty(&self) -> Result<()> {
        if self.is_feasible()? {
            Ok(())
        } else {
            Err(PolyxError::EmptyPolyhedron)
        }
    }

    /// Indices of halfspaces whose boundary hyperplane touches the polyhedron.
    pub fn support_indices(&self) -> Result<Vec<usize>> {
        self.ensure_nonempty()?;
        let base = self.as_linear_system();
        let mut keep = Vec::new();
        for (i, h) in self.halfspaces.iter().enumerate() {
            let mut sys = base.clone();
            let neg: Vec<f64> = h.normal().iter().map(|v| -v).collect();
            sys.push(&neg, -h.offset())?;
            if lpfeas::feasible(&sys)? {
                keep.push(i);
            }
        }
        Ok(keep)
    }

    /// Drops every halfspace whose boundary hyperplane misses the polyhedron.
    pub fn support_filter(&self) -> Result<Self> {
        self.select(&self.support_indices()?)
    }

    /// Indices of the minimum H-description (lowest index kept among duplicates).
    pub fn min_h_indices(&self) -> Result<Vec<usize>> {
        self.ensure_nonempty()?;
        let rows: Vec<&[f64]> = self.halfspaces.iter().map(Halfspace::normal).collect();
        let rhs: Vec<f64> = self.halfspaces.iter().map(Halfspace::offset).collect();
        irredundant_indices(self.dim, &rows, &rhs)
    }

    /// True iff the minimum H-description keeps every halfspace. Stops at the
    /// first redundant one.
    pub fn is_irredundant(&self) -> Result<bool> {
        self.ensure_nonempty()?;
        let rows: Vec<&[f64]> = self.halfspaces.iter().map(Halfspace::normal).collect();
        let rhs: Vec<f64> = self.halfspaces.iter().map(Halfspace::offset).collect();
        let alive = vec![true; rows.len()];
        for j in (0..rows.len()).rev() {
            if !has_witness(self.dim, &rows, &rhs, j, &alive)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The irredundant sub-family defining the same set.
    pub fn min_h_description(&self) -> Result<Self> {
        self.select(&self.min_h_indices()?)
    }
}

/// Keeps halfspace `j` iff the system with row `j` reversed and every other
/// surviving row strict is feasible, i.e. `B_j^c` meets the interior of the
/// others. Rows are visited from last to first and redundant ones are removed
/// immediately, so among duplicates the lowest index survives.
pub(crate) fn irredundant_indices(dim: usize, rows: &[&[f64]], rhs: &[f64]) -> Result<Vec<usize>> {
    let k = rows.len();
    let mut alive = vec![true; k];
    for j in (0..k).rev() {
        if !has_witness(dim, rows, rhs, j, &alive)? {
            alive[j] = false;
        }
    }
    Ok((0..k).filter(|&i| alive[i]).collect())
}

/// Whether some point violates row `j` while strictly satisfying every other
/// alive row.
fn has_witness(dim: usize, rows: &[&[f64]], rhs: &[f64], j: usize, alive: &[bool]) -> Result<bool> {
    let others: Vec<usize> = (0..rows.len()).filter(|&i| i != j && alive[i]).collect();
    if others.is_empty() {
        return Ok(true);
    }
    let mut flat = Vec::with_capacity((others.len() + 1) * dim);
    let mut b = Vec::with_capacity(others.len() + 1);
    flat.extend(rows[j].iter().map(|v| -v));
    b.push(-rhs[j]);
    for &i in &others {
        flat.extend_from_slice(rows[i]);
        b.push(rhs[i]);
    }
    lpfeas::strict_feasible(&LinearSystem::from_flat(dim, flat, b)?)
}
