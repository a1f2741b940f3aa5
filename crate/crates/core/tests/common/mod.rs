#![allow(dead_code)]

use polyx::bench::random_polyhedron;
use polyx::{Halfspace, PolyhedronH};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Nonempty polyhedron around a random anchor: `n` in 2..=6, `k` in 1..=8,
/// bounded or not depending on the draw. A quarter of the queries are the
/// anchor itself, which is always inside.
pub fn oracle_instance(seed: u64) -> (PolyhedronH, Vec<f64>) {
    let mut r = rng(seed);
    let n = r.random_range(2..=6);
    let k = r.random_range(1..=8);
    let anchor = gaussian(&mut r, n, 1.0);
    let hs = (0..k)
        .map(|_| {
            let a = gaussian(&mut r, n, 1.0);
            let len = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let slack: f64 = r.random_range(0.0..1.0);
            let b = a.iter().zip(&anchor).map(|(u, v)| u * v).sum::<f64>() + slack * len;
            Halfspace::new(b, a).unwrap()
        })
        .collect();
    let p = PolyhedronH::new(n, hs).unwrap();
    let x = if r.random_range(0..4) == 0 {
        anchor
    } else {
        let d = gaussian(&mut r, n, 2.0);
        anchor.iter().zip(d).map(|(a, b)| a + b).collect()
    };
    (p, x)
}

/// An irredundant polyhedron followed by redundant rows: outward shifted
/// copies, exact duplicates and positive combinations of two rows. Returns
/// the padded polyhedron and the size of the irredundant part.
pub fn redundancy_injected(seed: u64) -> (PolyhedronH, usize) {
    let mut r = rng(seed);
    let n = r.random_range(2..=4);
    let k = r.random_range(n + 1..=8);
    let (base, _) = random_polyhedron(n, k, seed).unwrap();
    let mut hs = base.halfspaces().to_vec();
    let extra = r.random_range(1..=k);
    for _ in 0..extra {
        let i = r.random_range(0..k);
        let h = &base.halfspaces()[i];
        let added = match r.random_range(0..3) {
            0 => Halfspace::new(h.offset() + r.random_range(0.1..1.0), h.normal().to_vec()).unwrap(),
            1 => h.clone(),
            _ => {
                let g = &base.halfspaces()[r.random_range(0..k)];
                let (s, t): (f64, f64) = (r.random_range(0.2..2.0), r.random_range(0.2..2.0));
                let a: Vec<f64> = h.normal().iter().zip(g.normal()).map(|(u, v)| s * u + t * v).collect();
                let len = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                if len < 1e-6 {
                    h.clone()
                } else {
                    Halfspace::new(s * h.offset() + t * g.offset() + r.random_range(0.0..0.5), a).unwrap()
                }
            }
        };
        let at = r.random_range(0..=hs.len());
        hs.insert(at, added);
    }
    (PolyhedronH::new(n, hs).unwrap(), k)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Linear mixing scene: `k` random endmember spectra in `[0.1, 1]`, Dirichlet
/// abundances with concentration 0.5, the first `k` pixels pure, Gaussian
/// noise of standard deviation `noise`. Returns the image and the true
/// abundances.
pub fn synthetic_scene(
    width: usize,
    height: usize,
    bands: usize,
    k: usize,
    noise: f64,
    seed: u64,
) -> (polyx::unmix::SpectralImage, polyx::matrix::RowMatrix) {
    use polyx::matrix::RowMatrix;
    let mut r = rng(seed);
    let spectra: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..bands).map(|_| r.random_range(0.1..1.0)).collect())
        .collect();
    let gamma = rand_distr::Gamma::new(0.5, 1.0).unwrap();
    let pixels = width * height;
    let mut abundance = RowMatrix::zeros(pixels, k);
    let mut data = RowMatrix::zeros(pixels, bands);
    for p in 0..pixels {
        let a: Vec<f64> = if p < k {
            (0..k).map(|c| if c == p { 1.0 } else { 0.0 }).collect()
        } else {
            let g: Vec<f64> = (0..k).map(|_| r.sample::<f64, _>(gamma) + 1e-12).collect();
            let s: f64 = g.iter().sum();
            g.into_iter().map(|v| v / s).collect()
        };
        for b in 0..bands {
            let v: f64 = (0..k).map(|c| a[c] * spectra[c][b]).sum();
            data.set(p, b, v + noise * r.sample::<f64, _>(StandardNormal));
        }
        abundance.row_mut(p).copy_from_slice(&a);
    }
    (polyx::unmix::SpectralImage::new(width, height, data).unwrap(), abundance)
}
