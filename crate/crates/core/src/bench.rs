//! Timing and accuracy harness: exact solver against the ADMM baseline on
//! randomly generated polyhedra with a prescribed number of support
//! hyperplanes.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PolyxError, Result};
use crate::geom::{Halfspace, PolyhedronH, DEFAULT_TOL};
use crate::linalg::{distance, dot, norm};
use crate::minnorm::{MinNormSolver, SolverConfig};
use crate::qp_baseline::{approx_min_norm, AdmmSettings};
use crate::rng::derive_seed;

/// Attempts before [`random_polyhedron`] gives up.
pub const GENERATION_ATTEMPTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMode {
    FixedN,
    NEqK,
}

impl BenchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BenchMode::FixedN => "fixed-n",
            BenchMode::NEqK => "n-eq-k",
        }
    }

    pub fn dim_for(self, n_fixed: usize, k: usize) -> usize {
        match self {
            BenchMode::FixedN => n_fixed,
            BenchMode::NEqK => k,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub mode: BenchMode,
    pub n_fixed: usize,
    pub model: GeneratorModel,
    pub k_values: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub time_budget_per_solve: Duration,
    pub admm: AdmmSettings,
}

impl BenchConfig {
    pub fn new(mode: BenchMode, k_values: Vec<usize>) -> Self {
        Self {
            mode,
            n_fixed: 3,
            model: GeneratorModel::default(),
            k_values,
            reps: 1000,
            seed: 42,
            time_budget_per_solve: Duration::from_secs(10),
            admm: AdmmSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(PolyxError::InvalidInput("reps must be at least 1".into()));
        }
        if self.k_values.is_empty() || self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PolyxError::InvalidInput(
                "k values must be non-empty and strictly increasing".into(),
            ));
        }
        if self.k_values[0] == 0 || (self.mode == BenchMode::FixedN && self.n_fixed == 0) {
            return Err(PolyxError::InvalidInput("n and k must be positive".into()));
        }
        Ok(())
    }
}

fn nonzero_gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        if norm(&v) > 1e-9 {
            return v;
        }
    }
}

fn unit_gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v = nonzero_gaussian(rng, n);
    let len = norm(&v);
    v.into_iter().map(|c| c / len).collect()
}

/// Uniform-offset draws tried before switching to the tangent model.
pub const UNIFORM_ATTEMPTS: usize = 20;

/// How halfspace normals are drawn before the offset is attached.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorModel {
    /// Standard normal entries, offset attached to the raw vector, so the
    /// boundary sits at distance `s / |g|` (about `1 / sqrt(n)`) from the origin.
    #[default]
    Gaussian,
    /// Unit normals, so the boundary sits at distance `s` from the origin.
    UnitSphere,
}

impl GeneratorModel {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorModel::Gaussian => "gaussian",
            GeneratorModel::UnitSphere => "unit-sphere",
        }
    }
}

/// [`random_polyhedron_with`] using the default model.
pub fn random_polyhedron(n: usize, k: usize, seed: u64) -> Result<(PolyhedronH, Vec<f64>)> {
    random_polyhedron_with(GeneratorModel::default(), n, k, seed)
}

/// Random polyhedron in dimension `n` whose minimum H-description has exactly
/// `k` halfspaces, with the origin in its interior, plus a query point
/// outside it.
///
/// The first [`UNIFORM_ATTEMPTS`] draws take offsets uniform in `[0.5, 1.5]`
/// on normals drawn per `model`, and are rejected unless every halfspace is
/// irredundant. That rarely succeeds once `k` is well above `n`, so later
/// draws make each halfspace tangent to a random axis-aligned ellipsoid with
/// semi-axes in `[0.5, 1.5]`, which makes every halfspace touch the
/// polyhedron at its own tangency point. The query is `r u` with `u` uniform
/// on the sphere and `r` uniform in `[2, 5]`, resampled until it falls
/// outside.
pub fn random_polyhedron_with(
    model: GeneratorModel,
    n: usize,
    k: usize,
    seed: u64,
) -> Result<(PolyhedronH, Vec<f64>)> {
    if n == 0 || k == 0 {
        return Err(PolyxError::InvalidInput("n and k must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..GENERATION_ATTEMPTS {
        let candidate = if attempt < UNIFORM_ATTEMPTS {
            uniform_offsets(&mut rng, model, n, k)?
        } else {
            ellipsoid_tangents(&mut rng, n, k)?
        };
        let Some(p) = candidate else { continue };
        for _ in 0..GENERATION_ATTEMPTS {
            let u = unit_gaussian(&mut rng, n);
            let r = rng.random_range(2.0..5.0);
            let x: Vec<f64> = u.iter().map(|c| c * r).collect();
            if p.max_residual(&x) > DEFAULT_TOL {
                return Ok((p, x));
            }
        }
    }
    Err(PolyxError::GenerationFailed {
        n,
        k,
        attempts: GENERATION_ATTEMPTS,
    })
}

fn uniform_offsets(
    rng: &mut ChaCha8Rng,
    model: GeneratorModel,
    n: usize,
    k: usize,
) -> Result<Option<PolyhedronH>> {
    let hs = (0..k)
        .map(|_| {
            let v = match model {
                GeneratorModel::UnitSphere => unit_gaussian(rng, n),
                GeneratorModel::Gaussian => nonzero_gaussian(rng, n),
            };
            Halfspace::new(rng.random_range(0.5..1.5), v)
        })
        .collect::<Result<Vec<_>>>()?;
    let p = PolyhedronH::new(n, hs)?;
    Ok(p.is_irredundant()?.then_some(p))
}

fn ellipsoid_tangents(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Result<Option<PolyhedronH>> {
    let axes: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let normals: Vec<Vec<f64>> = (0..k).map(|_| unit_gaussian(rng, n)).collect();
    let offsets: Vec<f64> = normals
        .iter()
        .map(|v| v.iter().zip(&axes).map(|(vi, ai)| (ai * vi).powi(2)).sum::<f64>().sqrt())
        .collect();
    // Tangency point of halfspace i: diag(a^2) v / h(v). It certifies
    // irredundancy when it is strictly inside every other halfspace.
    let certified = (0..k).all(|i| {
        let t: Vec<f64> = normals[i]
            .iter()
            .zip(&axes)
            .map(|(vi, ai)| ai * ai * vi / offsets[i])
            .collect();
        (0..k).all(|j| j == i || dot(&t, &normals[j]) - offsets[j] < -DEFAULT_TOL)
    });
    if !certified {
        return Ok(None);
    }
    let hs = normals
        .into_iter()
        .zip(offsets)
        .map(|(v, s)| Halfspace::new(s, v))
        .collect::<Result<Vec<_>>>()?;
    PolyhedronH::new(n, hs).map(Some)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub mode: BenchMode,
    pub n: usize,
    pub k: usize,
    pub rep: usize,
    pub exact_time_ns: u64,
    pub approx_time_ns: u64,
    pub error_norm: f64,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchSummary {
    pub n: usize,
    pub k: usize,
    pub reps: usize,
    pub mean_exact_ns: f64,
    pub mean_approx_ns: f64,
    pub mean_error: f64,
    pub std_error: f64,
    pub truncated: usize,
}

#[derive(Clone, Debug, Default)]
pub struct BenchTable {
    pub records: Vec<BenchRecord>,
}

impl BenchTable {
    /// One summary line per `k`, in increasing `k`. Truncated solves count in
    /// the timing means at their budget but are left out of the error stats.
    pub fn summaries(&self) -> Vec<BenchSummary> {
        let mut ks: Vec<usize> = self.records.iter().map(|r| r.k).collect();
        ks.dedup();
        ks.into_iter()
            .map(|k| {
                let rows: Vec<&BenchRecord> = self.records.iter().filter(|r| r.k == k).collect();
                let reps = rows.len();
                let mean = |f: &dyn Fn(&BenchRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / reps as f64;
                let errs: Vec<f64> = rows
                    .iter()
                    .filter(|r| !r.truncated && r.error_norm.is_finite())
                    .map(|r| r.error_norm)
                    .collect();
                let (mean_error, std_error) = mean_std(&errs);
                BenchSummary {
                    n: rows[0].n,
                    k,
                    reps,
                    mean_exact_ns: mean(&|r| r.exact_time_ns as f64),
                    mean_approx_ns: mean(&|r| r.approx_time_ns as f64),
                    mean_error,
                    std_error,
                    truncated: rows.iter().filter(|r| r.truncated).count(),
                }
            })
            .collect()
    }

    /// Mean and standard deviation of the error over every non-truncated record.
    pub fn error_stats(&self) -> (f64, f64) {
        let errs: Vec<f64> = self
            .records
            .iter()
            .filter(|r| !r.truncated && r.error_norm.is_finite())
            .map(|r| r.error_norm)
            .collect();
        mean_std(&errs)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let fmt_err = |e: csv::Error| PolyxError::Format {
            kind: "csv",
            message: e.to_string(),
        };
        out.write_record([
            "mode",
            "n",
            "k",
            "rep",
            "exact_time_ns",
            "approx_time_ns",
            "error_norm",
            "truncated",
        ])
        .map_err(fmt_err)?;
        for r in &self.records {
            out.write_record([
                r.mode.as_str().to_string(),
                r.n.to_string(),
                r.k.to_string(),
                r.rep.to_string(),
                r.exact_time_ns.to_string(),
                r.approx_time_ns.to_string(),
                format!("{:e}", r.error_norm),
                r.truncated.to_string(),
            ])
            .map_err(fmt_err)?;
        }
        out.flush().map_err(|e| PolyxError::Format {
            kind: "csv",
            message: e.to_string(),
        })
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

/// Seed of instance `rep` at `k` for a run seeded with `seed`.
pub fn instance_seed(seed: u64, mode: BenchMode, k: usize, rep: usize) -> u64 {
    derive_seed(seed, &format!("bench/{}/{k}/{rep}", mode.as_str()))
}

/// Runs every `(k, rep)` instance sequentially on the calling thread, timing
/// each solver separately with a monotonic clock (generation excluded).
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchTable> {
    run_benchmark_with(cfg, |_| {})
}

/// [`run_benchmark`] with a callback after each finished `k`.
pub fn run_benchmark_with(cfg: &BenchConfig, mut on_k: impl FnMut(&BenchSummary)) -> Result<BenchTable> {
    cfg.validate()?;
    let solver = MinNormSolver::new(SolverConfig {
        time_budget: Some(cfg.time_budget_per_solve),
        ..SolverConfig::default()
    });
    let mut table = BenchTable::default();
    for &k in &cfg.k_values {
        let n = cfg.mode.dim_for(cfg.n_fixed, k);
        let start = table.records.len();
        for rep in 0..cfg.reps {
            let (p, x) = random_polyhedron_with(cfg.model, n, k, instance_seed(cfg.seed, cfg.mode, k, rep))?;

            let t0 = Instant::now();
            let exact = solver.solve(&p, &x);
            let exact_time = t0.elapsed();

            let t1 = Instant::now();
            let approx = approx_min_norm(&p, &x, &cfg.admm)?;
            let approx_time = t1.elapsed();

            let (error_norm, truncated) = match exact {
                Ok(r) => (distance(&r.point, &approx.point), false),
                Err(PolyxError::Timeout { .. }) | Err(PolyxError::BudgetExceeded { .. }) => (f64::NAN, true),
                Err(e) => return Err(e),
            };
            table.records.push(BenchRecord {
                mode: cfg.mode,
                n,
                k,
                rep,
                exact_time_ns: exact_time.as_nanos() as u64,
                approx_time_ns: approx_time.as_nanos() as u64,
                error_norm,
                truncated,
            });
        }
        let slice = BenchTable {
            records: table.records[start..].to_vec(),
        };
        if let Some(s) = slice.summaries().first() {
            on_k(s);
        }
    }
    Ok(table)
}

/// Least-squares fit of `log t = a + b log k`; returns `(b, r_squared)`.
pub fn loglog_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(k, t)| (k.ln(), t.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - (my + slope * (p.0 - mx))).powi(2))
        .sum();
    (slope, 1.0 - ss_res / syy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_in_one_dimension() {
        let (p, x) = random_polyhedron(1, 2, 3).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.contains(&[0.0], 0.0).unwrap());
        assert!(!p.contains(&x, DEFAULT_TOL).unwrap());
    }

    #[test]
    fn too_many_halfspaces_in_one_dimension() {
        assert!(matches!(
            random_polyhedron(1, 3, 0),
            Err(PolyxError::GenerationFailed { .. })
        ));
    }

    #[test]
    fn planar_instance_has_three_support_hyperplanes() {
        for seed in 0..20 {
            let (p, x) = random_polyhedron(2, 3, seed).unwrap();
            assert_eq!(p.min_h_description().unwrap().len(), 3);
            assert!(p.contains(&[0.0, 0.0], 0.0).unwrap());
            assert!(!p.contains(&x, DEFAULT_TOL).unwrap());
        }
    }

    #[test]
    fn generator_contract_in_higher_dimensions() {
        for (n, k) in [(3, 10), (5, 5), (4, 12)] {
            let (p, x) = random_polyhedron(n, k, 11).unwrap();
            assert_eq!(p.min_h_indices().unwrap().len(), k);
            assert!(p.max_residual(&vec![0.0; n]) < 0.0);
            assert!(p.max_residual(&x) > DEFAULT_TOL);
        }
    }

    #[test]
    fn unit_sphere_offsets_stay_in_range() {
        for (n, k) in [(2, 3), (3, 40), (6, 6)] {
            let (p, _) = random_polyhedron_with(GeneratorModel::UnitSphere, n, k, 2).unwrap();
            assert_eq!(p.len(), k);
            assert!(p.halfspaces().iter().all(|h| (0.5..=1.5).contains(&h.offset())));
        }
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(random_polyhedron(3, 7, 5).unwrap(), random_polyhedron(3, 7, 5).unwrap());
        assert_ne!(random_polyhedron(3, 7, 5).unwrap().1, random_polyhedron(3, 7, 6).unwrap().1);
    }

    #[test]
    fn config_validation() {
        let mut cfg = BenchConfig::new(BenchMode::FixedN, vec![3, 2]);
        assert!(cfg.validate().is_err());
        cfg.k_values = vec![2, 3];
        cfg.reps = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn small_run_and_csv() {
        let mut cfg = BenchConfig::new(BenchMode::FixedN, vec![1, 4]);
        cfg.reps = 3;
        let table = run_benchmark(&cfg).unwrap();
        assert_eq!(table.records.len(), 6);
        let s = table.summaries();
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|s| s.truncated == 0 && s.mean_error.is_finite()));
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("mode,n,k,rep,exact_time_ns,approx_time_ns,error_norm,truncated\n"));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn loglog_fit_recovers_power_law() {
        let pts: Vec<(f64, f64)> = (1..20).map(|k| (k as f64, 3.0 * (k as f64).powf(1.5))).collect();
        let (b, r2) = loglog_fit(&pts);
        assert!((b - 1.5).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }
}
