//! Seeded band-limited random fields, used as coercivity probes, weak-residual
//! test fields and sample inputs in tests.

use crate::error::Result;
use crate::manifold::{Grid, ManifoldKind};
use crate::sobolev::DiscreteFunction;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use std::sync::Arc;

/// Random truncated Fourier series (circle/torus) or a random combination of
/// spherical harmonics of degree <= 2 (sphere). Coefficients are standard
/// normal draws from the supplied generator.
pub fn band_limited(grid: &Arc<Grid>, max_mode: usize, rng: &mut ChaCha8Rng) -> DiscreteFunction {
    let desc = *grid.desc();
    match desc.kind {
        ManifoldKind::Circle => {
            let mut coefs = Vec::new();
            for _ in 0..=max_mode {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                coefs.push((a, b));
            }
            DiscreteFunction::from_fn(grid, |p| {
                let mut v = 0.0;
                for (k, (a, b)) in coefs.iter().enumerate() {
                    let t = k as f64 * p[0];
                    v += a * t.cos() + b * t.sin();
                }
                v
            })
            .expect("grid-sized values")
        }
        ManifoldKind::Torus => {
            let modes: Vec<(f64, f64, f64, f64)> = if desc.dim == 1 {
                (0..=max_mode)
                    .map(|k| {
                        (
                            k as f64,
                            0.0,
                            rng.sample(StandardNormal),
                            rng.sample(StandardNormal),
                        )
                    })
                    .collect()
            } else {
                let mut m = Vec::new();
                for kx in 0..=max_mode {
                    for ky in 0..=max_mode {
                        m.push((
                            kx as f64,
                            ky as f64,
                            rng.sample(StandardNormal),
                            rng.sample(StandardNormal),
                        ));
                    }
                }
                m
            };
            let omega = 2.0 * PI / desc.scale;
            DiscreteFunction::from_fn(grid, |p| {
                let y = if desc.dim > 1 { p[1] } else { 0.0 };
                let mut v = 0.0;
                for &(kx, ky, a, b) in &modes {
                    let t = omega * (kx * p[0] + ky * y);
                    v += a * t.cos() + b * t.sin();
                }
                v
            })
            .expect("grid-sized values")
        }
        ManifoldKind::Sphere => {
            let mut coefs = [0.0f64; 9];
            for c in coefs.iter_mut() {
                *c = rng.sample(StandardNormal);
            }
            DiscreteFunction::from_fn(grid, |p| {
                let (st, ct) = (p[0].sin(), p[0].cos());
                let (x, y, z) = (st * p[1].cos(), st * p[1].sin(), ct);
                coefs[0]
                    + coefs[1] * x
                    + coefs[2] * y
                    + coefs[3] * z
                    + coefs[4] * x * y
                    + coefs[5] * y * z
                    + coefs[6] * (3.0 * z * z - 1.0) / 2.0
                    + coefs[7] * (x * x - y * y)
                    + coefs[8] * x * z
            })
            .expect("grid-sized values")
        }
    }
}

/// A fixed family of `count` band-limited test fields.
pub fn test_family(
    grid: &Arc<Grid>,
    max_mode: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<DiscreteFunction>> {
    Ok((0..count).map(|_| band_limited(grid, max_mode, rng)).collect())
}
