//! Quadrature grids on the circle, flat tori and the round sphere, with
//! geodesic distances, exponential/logarithm maps and partitions of unity.
//!
//! Points are intrinsic coordinates: an angle for the circle, modular
//! coordinates in [0, L)^n for the torus, (colatitude, longitude) for the
//! sphere. All grids are immutable after construction and safe to share
//! across threads.

use crate::error::{Error, Result};
use crate::sobolev::DiscreteFunction;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Circle,
    Torus,
    Sphere,
}

/// A compact model manifold: S^1 (radius R), T^n = (R/LZ)^n for n in {1,2},
/// or the round sphere S^2 (radius R).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldDesc {
    pub kind: ManifoldKind,
    pub dim: usize,
    pub scale: f64,
}

impl ManifoldDesc {
    pub fn new(kind: ManifoldKind, dim: usize, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Config(format!("scale must be positive, got {scale}")));
        }
        let dim_ok = match kind {
            ManifoldKind::Circle => dim == 1,
            ManifoldKind::Torus => dim == 1 || dim == 2,
            ManifoldKind::Sphere => dim == 2,
        };
        if !dim_ok {
            return Err(Error::Config(format!(
                "unsupported manifold (kind, dim) combination: ({kind:?}, {dim})"
            )));
        }
        Ok(Self { kind, dim, scale })
    }

    pub fn circle(radius: f64) -> Result<Self> {
        Self::new(ManifoldKind::Circle, 1, radius)
    }

    pub fn torus(dim: usize, length: f64) -> Result<Self> {
        Self::new(ManifoldKind::Torus, dim, length)
    }

    pub fn sphere(radius: f64) -> Result<Self> {
        Self::new(ManifoldKind::Sphere, 2, radius)
    }

    pub fn volume(&self) -> f64 {
        match self.kind {
            ManifoldKind::Circle => 2.0 * PI * self.scale,
            ManifoldKind::Torus => self.scale.powi(self.dim as i32),
            ManifoldKind::Sphere => 4.0 * PI * self.scale * self.scale,
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        match self.kind {
            ManifoldKind::Circle | ManifoldKind::Sphere => PI * self.scale,
            ManifoldKind::Torus => self.scale / 2.0,
        }
    }

    /// The torus and the circle are flat; the blow-up of the metric at a
    /// point is exactly Euclidean there.
    pub fn is_flat(&self) -> bool {
        matches!(self.kind, ManifoldKind::Circle | ManifoldKind::Torus)
    }
}

pub fn injectivity_radius(desc: &ManifoldDesc) -> f64 {
    desc.injectivity_radius()
}

/// A tangent vector anchored at a base point, components in an orthonormal
/// frame (length units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub base: [f64; 2],
    pub components: [f64; 2],
}

impl TangentVector {
    pub fn new(base: [f64; 2], components: [f64; 2]) -> Self {
        Self { base, components }
    }

    pub fn norm(&self) -> f64 {
        (self.components[0] * self.components[0] + self.components[1] * self.components[1]).sqrt()
    }
}

#[inline]
fn wrap_mod(x: f64, period: f64) -> f64 {
    let r = x % period;
    if r < 0.0 {
        r + period
    } else {
        r
    }
}

#[inline]
fn wrap_dist(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).abs();
    let d = d % period;
    d.min(period - d)
}

/// Signed representative of a - b in (-period/2, period/2].
#[inline]
fn wrap_signed(diff: f64, period: f64) -> f64 {
    let mut r = diff % period;
    if r > period / 2.0 {
        r -= period;
    } else if r <= -period / 2.0 {
        r += period;
    }
    r
}

fn sphere_embed(p: &[f64]) -> [f64; 3] {
    let (theta, phi) = (p[0], p[1]);
    let st = theta.sin();
    [st * phi.cos(), st * phi.sin(), theta.cos()]
}

fn sphere_angles(e: [f64; 3]) -> [f64; 2] {
    let theta = e[2].clamp(-1.0, 1.0).acos();
    let phi = wrap_mod(e[1].atan2(e[0]), 2.0 * PI);
    [theta, phi]
}

/// Orthonormal tangent frame at a sphere point: (e_theta, e_phi).
/// At the poles the frame is still well defined through the stored phi.
fn sphere_frame(p: &[f64]) -> ([f64; 3], [f64; 3]) {
    let (theta, phi) = (p[0], p[1]);
    let (st, ct) = (theta.sin(), theta.cos());
    let (sp, cp) = (phi.sin(), phi.cos());
    ([ct * cp, ct * sp, -st], [-sp, cp, 0.0])
}

pub fn geodesic_distance(desc: &ManifoldDesc, x: &[f64], y: &[f64]) -> f64 {
    match desc.kind {
        ManifoldKind::Circle => desc.scale * wrap_dist(x[0], y[0], 2.0 * PI),
        ManifoldKind::Torus => {
            let mut s = 0.0;
            for a in 0..desc.dim {
                let d = wrap_dist(x[a], y[a], desc.scale);
                s += d * d;
            }
            s.sqrt()
        }
        ManifoldKind::Sphere => {
            let ex = sphere_embed(x);
            let ey = sphere_embed(y);
            let dot = (ex[0] * ey[0] + ex[1] * ey[1] + ex[2] * ey[2]).clamp(-1.0, 1.0);
            desc.scale * dot.acos()
        }
    }
}

pub fn exp_map(desc: &ManifoldDesc, x0: &[f64], v: &TangentVector) -> [f64; 2] {
    let c = v.components;
    match desc.kind {
        ManifoldKind::Circle => [wrap_mod(x0[0] + c[0] / desc.scale, 2.0 * PI), 0.0],
        ManifoldKind::Torus => {
            let mut out = [0.0, 0.0];
            for a in 0..desc.dim {
                out[a] = wrap_mod(x0[a] + c[a], desc.scale);
            }
            out
        }
        ManifoldKind::Sphere => {
            let t = v.norm() / desc.scale;
            if t == 0.0 {
                return [x0[0], x0[1]];
            }
            let (e1, e2) = sphere_frame(x0);
            let inv = 1.0 / (v.norm());
            let w = [
                (c[0] * e1[0] + c[1] * e2[0]) * inv,
                (c[0] * e1[1] + c[1] * e2[1]) * inv,
                (c[0] * e1[2] + c[1] * e2[2]) * inv,
            ];
            let x = sphere_embed(x0);
            let (ct, st) = (t.cos(), t.sin());
            sphere_angles([
                ct * x[0] + st * w[0],
                ct * x[1] + st * w[1],
                ct * x[2] + st * w[2],
            ])
        }
    }
}

/// Inverse of the exponential map. Fails at or beyond the cut locus.
pub fn log_map(desc: &ManifoldDesc, x0: &[f64], y: &[f64]) -> Result<TangentVector> {
    let inj = desc.injectivity_radius();
    let d = geodesic_distance(desc, x0, y);
    if d >= inj * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "log_map at or beyond the cut locus: d = {d}, injectivity radius = {inj}"
        )));
    }
    let base = [x0[0], if desc.dim > 1 { x0[1] } else { 0.0 }];
    let components = match desc.kind {
        ManifoldKind::Circle => [desc.scale * wrap_signed(y[0] - x0[0], 2.0 * PI), 0.0],
        ManifoldKind::Torus => {
            let mut c = [0.0, 0.0];
            for a in 0..desc.dim {
                c[a] = wrap_signed(y[a] - x0[a], desc.scale);
            }
            c
        }
        ManifoldKind::Sphere => {
            let ex = sphere_embed(x0);
            let ey = sphere_embed(y);
            let dot = (ex[0] * ey[0] + ex[1] * ey[1] + ex[2] * ey[2]).clamp(-1.0, 1.0);
            let alpha = dot.acos();
            if alpha == 0.0 {
                [0.0, 0.0]
            } else {
                let w = [
                    ey[0] - dot * ex[0],
                    ey[1] - dot * ex[1],
                    ey[2] - dot * ex[2],
                ];
                let wn = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
                let scale = desc.scale * alpha / wn;
                let (e1, e2) = sphere_frame(x0);
                [
                    scale * (w[0] * e1[0] + w[1] * e1[1] + w[2] * e1[2]),
                    scale * (w[0] * e2[0] + w[1] * e2[1] + w[2] * e2[2]),
                ]
            }
        }
    };
    Ok(TangentVector { base, components })
}

/// C^2 cutoff profile of the geodesic distance: identically 1 on [0, delta],
/// a quintic smoothstep descent on [delta, 2 delta], zero beyond.
pub fn cutoff_profile(d: f64, delta: f64) -> f64 {
    if d <= delta {
        1.0
    } else if d >= 2.0 * delta {
        0.0
    } else {
        let x = (d - delta) / delta;
        1.0 - x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
    }
}

/// Quadrature grid: points, positive volume weights, count.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "GridJson", try_from = "GridJson")]
pub struct Grid {
    desc: ManifoldDesc,
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    embed: Option<Vec<[f64; 3]>>,
    resolution: usize,
}

/// Wire format: {manifold, points, weights} with intrinsic coordinates.
#[derive(Serialize, Deserialize)]
struct GridJson {
    manifold: ManifoldDesc,
    resolution: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl From<Grid> for GridJson {
    fn from(g: Grid) -> Self {
        let dim = g.desc.intrinsic_coords();
        GridJson {
            manifold: g.desc,
            resolution: g.resolution,
            points: g.points.iter().map(|p| p[..dim].to_vec()).collect(),
            weights: g.weights,
        }
    }
}

impl TryFrom<GridJson> for Grid {
    type Error = Error;

    fn try_from(j: GridJson) -> Result<Grid> {
        let dim = j.manifold.intrinsic_coords();
        if j.points.len() != j.weights.len() {
            return Err(Error::Shape(
                "point count and weight count differ".to_string(),
            ));
        }
        let mut points = Vec::with_capacity(j.points.len());
        for p in &j.points {
            if p.len() != dim {
                return Err(Error::Shape(format!(
                    "point arity {} does not match manifold dimension {dim}",
                    p.len()
                )));
            }
            let mut q = [0.0, 0.0];
            q[..dim].copy_from_slice(p);
            points.push(q);
        }
        if j.weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Config("all weights must be positive".to_string()));
        }
        let embed = build_embed(&j.manifold, &points);
        Ok(Grid {
            desc: j.manifold,
            points,
            weights: j.weights,
            embed,
            resolution: j.resolution,
        })
    }
}

impl ManifoldDesc {
    /// Number of intrinsic coordinates per point (2 for sphere and T^2).
    pub fn intrinsic_coords(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle => 1,
            ManifoldKind::Torus => self.dim,
            ManifoldKind::Sphere => 2,
        }
    }
}

fn build_embed(desc: &ManifoldDesc, points: &[[f64; 2]]) -> Option<Vec<[f64; 3]>> {
    match desc.kind {
        ManifoldKind::Sphere => Some(points.iter().map(|p| sphere_embed(p)).collect()),
        _ => None,
    }
}

pub fn build_grid(desc: &ManifoldDesc, resolution: usize) -> Result<Grid> {
    if resolution < 4 {
        return Err(Error::Config(format!(
            "resolution must be at least 4, got {resolution}"
        )));
    }
    let (points, weights) = match desc.kind {
        ManifoldKind::Circle => {
            let h = 2.0 * PI / resolution as f64;
            let pts = (0..resolution)
                .map(|i| [(i as f64 + 0.5) * h, 0.0])
                .collect::<Vec<_>>();
            let w = vec![2.0 * PI * desc.scale / resolution as f64; resolution];
            (pts, w)
        }
        ManifoldKind::Torus => {
            let h = desc.scale / resolution as f64;
            let wcell = h.powi(desc.dim as i32);
            let mut pts = Vec::new();
            if desc.dim == 1 {
                for i in 0..resolution {
                    pts.push([(i as f64 + 0.5) * h, 0.0]);
                }
            } else {
                for i in 0..resolution {
                    for j in 0..resolution {
                        pts.push([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
                    }
                }
            }
            let n = pts.len();
            (pts, vec![wcell; n])
        }
        ManifoldKind::Sphere => {
            // Fibonacci lattice with equal-area weights.
            let n = resolution;
            let golden = PI * (3.0 - 5.0_f64.sqrt());
            let mut pts = Vec::with_capacity(n);
            for k in 0..n {
                let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
                let phi = wrap_mod(k as f64 * golden, 2.0 * PI);
                pts.push([z.clamp(-1.0, 1.0).acos(), phi]);
            }
            let w = vec![4.0 * PI * desc.scale * desc.scale / n as f64; n];
            (pts, w)
        }
    };
    let embed = build_embed(desc, &points);
    Ok(Grid {
        desc: *desc,
        points,
        weights,
        embed,
        resolution,
    })
}

impl Grid {
    pub fn desc(&self) -> &ManifoldDesc {
        &self.desc
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i][..self.desc.intrinsic_coords()]
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        crate::numerics::sum_indexed(self.weights.len(), |i| self.weights[i])
    }

    /// Nominal spacing between neighbouring points.
    pub fn spacing(&self) -> f64 {
        match self.desc.kind {
            ManifoldKind::Circle => 2.0 * PI * self.desc.scale / self.resolution as f64,
            ManifoldKind::Torus => self.desc.scale / self.resolution as f64,
            ManifoldKind::Sphere => {
                (4.0 * PI * self.desc.scale * self.desc.scale / self.len() as f64).sqrt()
            }
        }
    }

    /// Geodesic distance between grid points (embedding fast path on S^2).
    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        match self.desc.kind {
            ManifoldKind::Circle => {
                self.desc.scale * wrap_dist(self.points[i][0], self.points[j][0], 2.0 * PI)
            }
            ManifoldKind::Torus => {
                let (a, b) = (&self.points[i], &self.points[j]);
                if self.desc.dim == 1 {
                    wrap_dist(a[0], b[0], self.desc.scale)
                } else {
                    let d0 = wrap_dist(a[0], b[0], self.desc.scale);
                    let d1 = wrap_dist(a[1], b[1], self.desc.scale);
                    (d0 * d0 + d1 * d1).sqrt()
                }
            }
            ManifoldKind::Sphere => {
                let e = self.embed.as_ref().expect("sphere grid has embeddings");
                let (x, y) = (&e[i], &e[j]);
                let dot = (x[0] * y[0] + x[1] * y[1] + x[2] * y[2]).clamp(-1.0, 1.0);
                self.desc.scale * dot.acos()
            }
        }
    }

    /// Distance from an arbitrary point to grid point `i`.
    pub fn distance_to(&self, x: &[f64], i: usize) -> f64 {
        geodesic_distance(&self.desc, x, self.point(i))
    }
}

/// Measured distortion of the exponential chart at x0: the range of
/// d_g(exp(X), exp(Y)) / |X - Y| over random tangent pairs with |X|, |Y|
/// below delta. Flat manifolds give (1, 1) up to rounding; on the sphere the
/// band tightens as delta shrinks. No rate in delta is asserted anywhere,
/// the band is only measured.
pub fn chart_distortion(
    desc: &ManifoldDesc,
    x0: &[f64],
    delta: f64,
    samples: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<(f64, f64)> {
    use rand::Rng;
    if !(delta > 0.0) || delta >= desc.injectivity_radius() {
        return Err(Error::Config(format!(
            "delta must lie in (0, injectivity radius), got {delta}"
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut accepted = 0;
    while accepted < samples {
        let mut draw = || {
            let mut v = [0.0, 0.0];
            for c in v.iter_mut().take(desc.dim) {
                *c = (rng.gen::<f64>() * 2.0 - 1.0) * delta;
            }
            v
        };
        let a = draw();
        let b = draw();
        let na = (a[0] * a[0] + a[1] * a[1]).sqrt();
        let nb = (b[0] * b[0] + b[1] * b[1]).sqrt();
        let sep = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        if na > delta || nb > delta || sep < 1e-6 * delta {
            continue;
        }
        let base = [x0[0], if desc.dim > 1 { x0[1] } else { 0.0 }];
        let pa = exp_map(desc, x0, &TangentVector::new(base, a));
        let pb = exp_map(desc, x0, &TangentVector::new(base, b));
        let ratio = geodesic_distance(desc, &pa, &pb) / sep;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        accepted += 1;
    }
    Ok((lo, hi))
}

/// Partition of unity subordinate to geodesic balls B_{2 delta}(center_i):
/// raw C^2 bumps of d_g(center_i, .) normalized by their pointwise sum.
/// Every grid point must lie in some B_delta(center_i).
pub fn partition_of_unity(
    grid: &Arc<Grid>,
    centers: &[Vec<f64>],
    delta: f64,
) -> Result<Vec<DiscreteFunction>> {
    if centers.is_empty() {
        return Err(Error::Config("partition needs at least one center".into()));
    }
    if !(delta > 0.0) || delta >= grid.desc().injectivity_radius() {
        return Err(Error::Config(format!(
            "delta must lie in (0, injectivity radius); got {delta}"
        )));
    }
    let n = grid.len();
    let mut raw = vec![vec![0.0; n]; centers.len()];
    for i in 0..n {
        let mut covered = false;
        let mut total = 0.0;
        for (k, c) in centers.iter().enumerate() {
            let d = geodesic_distance(grid.desc(), c, grid.point(i));
            if d < delta {
                covered = true;
            }
            let b = cutoff_profile(d, delta);
            raw[k][i] = b;
            total += b;
        }
        if !covered {
            return Err(Error::Coverage {
                index: i,
                coords: grid.point(i).to_vec(),
            });
        }
        for bump in raw.iter_mut() {
            bump[i] /= total;
        }
    }
    raw.into_iter()
        .map(|v| DiscreteFunction::new(grid, v))
        .collect()
}
