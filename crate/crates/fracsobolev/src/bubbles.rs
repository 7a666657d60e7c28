//! The extremal profile U(x) = (1+|x|^2)^{-(n-2s)/2} of the Euclidean
//! fractional Sobolev inequality (p = 2), its concentration u_eps on a
//! manifold, scaling sweeps along an eps-ladder, the Euclidean best-constant
//! estimator, and the blow-up change-of-variables identity on flat tori.

use crate::error::{Error, Result};
use crate::kernel::{FracParams, KernelSpec};
use crate::manifold::{cutoff_profile, geodesic_distance, Grid, ManifoldDesc};
use crate::numerics::{abs_pow, ols_slope, par_row_sum, NegPow, Neumaier};
use crate::sobolev::{kernel_energy, lp_norm_p, DiscreteFunction};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Cutoff profile descriptor. The quintic C^2 smoothstep is the only profile
/// built in; it matches the partition bumps in `manifold`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    SmoothstepC2,
}

/// Concentration parameters: center x0, scale eps, cutoff inner radius delta.
/// The cutoff is identically 1 on [0, delta] and supported in [0, 2 delta].
#[derive(Debug, Clone, Copy)]
pub struct BubbleConfig {
    params: FracParams,
    center: [f64; 2],
    eps: f64,
    delta: f64,
    pub cutoff: CutoffKind,
}

impl BubbleConfig {
    pub fn new(params: FracParams, center: [f64; 2], eps: f64, delta: f64) -> Result<Self> {
        if params.p() != 2.0 {
            return Err(Error::Config(
                "bubble asymptotics are built for p = 2 only".into(),
            ));
        }
        if !(eps > 0.0) || !(delta > 0.0) {
            return Err(Error::Config(format!(
                "eps and delta must be positive, got eps = {eps}, delta = {delta}"
            )));
        }
        Ok(Self {
            params,
            center,
            eps,
            delta,
            cutoff: CutoffKind::SmoothstepC2,
        })
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }

    pub fn center(&self) -> &[f64; 2] {
        &self.center
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..*self }
    }

    fn validate_for(&self, desc: &ManifoldDesc) -> Result<()> {
        if 2.0 * self.delta >= desc.injectivity_radius() {
            return Err(Error::Config(format!(
                "2 delta = {} must stay below the injectivity radius {}",
                2.0 * self.delta,
                desc.injectivity_radius()
            )));
        }
        Ok(())
    }
}

/// The extremal profile U(x) = (1 + |x|^2)^{-(n-2s)/2}; radial, decreasing,
/// U(0) = 1.
pub fn bubble_u(x: &[f64], params: &FracParams) -> f64 {
    let r2: f64 = x.iter().map(|c| c * c).sum();
    bubble_u_radial2(r2, params)
}

#[inline]
fn bubble_u_radial2(r2: f64, params: &FracParams) -> f64 {
    let expo = (params.n() as f64 - 2.0 * params.s()) / 2.0;
    (1.0 + r2).powf(-expo)
}

/// u_eps(x) = eta(d_g(x0, x)) eps^{-(n-2s)/2} U(log_{x0}(x)/eps), realized
/// radially through d_g since U is radial. Supported in B_{2 delta}(x0) and
/// equal to the pure rescaled profile on B_delta(x0).
pub fn bubble_on_manifold(cfg: &BubbleConfig, grid: &Arc<Grid>) -> Result<DiscreteFunction> {
    cfg.validate_for(grid.desc())?;
    let amp = cfg.eps.powf(-(cfg.params.n() as f64 - 2.0 * cfg.params.s()) / 2.0);
    let center: Vec<f64> = cfg.center[..grid.desc().intrinsic_coords()].to_vec();
    DiscreteFunction::from_fn(grid, |p| {
        let r = geodesic_distance(grid.desc(), &center, p);
        let eta = cutoff_profile(r, cfg.delta);
        if eta == 0.0 {
            0.0
        } else {
            let t = r / cfg.eps;
            eta * amp * bubble_u_radial2(t * t, &cfg.params)
        }
    })
}

/// Uniform cell-centered grid on the box [-r_box, r_box]^dim.
#[derive(Debug, Clone)]
pub struct EuclideanGrid {
    dim: usize,
    r_box: f64,
    resolution: usize,
    points: Vec<[f64; 2]>,
    weight: f64,
}

impl EuclideanGrid {
    pub fn new(dim: usize, r_box: f64, resolution: usize) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::Config(format!(
                "euclidean grids support dim 1 or 2, got {dim}"
            )));
        }
        if !(r_box > 0.0) || resolution < 4 {
            return Err(Error::Config(format!(
                "need r_box > 0 and resolution >= 4, got {r_box}, {resolution}"
            )));
        }
        let h = 2.0 * r_box / resolution as f64;
        let ax = |i: usize| -r_box + (i as f64 + 0.5) * h;
        let mut points = Vec::new();
        if dim == 1 {
            for i in 0..resolution {
                points.push([ax(i), 0.0]);
            }
        } else {
            for i in 0..resolution {
                for j in 0..resolution {
                    points.push([ax(i), ax(j)]);
                }
            }
        }
        Ok(Self {
            dim,
            r_box,
            resolution,
            points,
            weight: h.powi(dim as i32),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r_box(&self) -> f64 {
        self.r_box
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.r_box / self.resolution as f64
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i][..self.dim]
    }

    /// Sample the extremal profile on every grid point.
    pub fn sample_bubble(&self, params: &FracParams) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| {
                let r2 = p[0] * p[0] + if self.dim > 1 { p[1] * p[1] } else { 0.0 };
                bubble_u_radial2(r2, params)
            })
            .collect()
    }

    #[inline]
    fn dist(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.points[i], &self.points[j]);
        if self.dim == 1 {
            (a[0] - b[0]).abs()
        } else {
            let dx = a[0] - b[0];
            let dy = a[1] - b[1];
            (dx * dx + dy * dy).sqrt()
        }
    }
}

fn euclid_pair_sum<T>(egrid: &EuclideanGrid, term: T) -> f64
where
    T: Fn(usize, usize, f64) -> f64 + Sync,
{
    let n = egrid.len();
    par_row_sum(n, |i| {
        let mut acc = Neumaier::new();
        for j in (i + 1)..n {
            acc.add(term(i, j, egrid.dist(i, j)));
        }
        acc.value()
    })
}

fn euclid_pair_sum_subset<T>(egrid: &EuclideanGrid, subset: &[usize], term: T) -> f64
where
    T: Fn(usize, usize, f64) -> f64 + Sync,
{
    let n = subset.len();
    par_row_sum(n, |a| {
        let i = subset[a];
        let mut acc = Neumaier::new();
        for &j in &subset[(a + 1)..] {
            acc.add(term(i, j, egrid.dist(i, j)));
        }
        acc.value()
    })
}

/// Gagliardo seminorm [u]_{s,2}^2 of values sampled on a Euclidean grid,
/// diagonal cells excluded.
pub fn euclidean_seminorm2(values: &[f64], egrid: &EuclideanGrid, s: f64) -> f64 {
    assert_eq!(values.len(), egrid.len());
    let npow = NegPow::new(egrid.dim as f64 + 2.0 * s);
    let w2 = egrid.weight * egrid.weight;
    2.0 * euclid_pair_sum(egrid, |i, j, d| {
        let t = values[i] - values[j];
        t * t * npow.eval(d) * w2
    })
}

/// Integral of |u|^q on a Euclidean grid.
pub fn euclidean_lq(values: &[f64], egrid: &EuclideanGrid, q: f64) -> f64 {
    assert_eq!(values.len(), egrid.len());
    let w = egrid.weight;
    crate::numerics::sum_indexed(values.len(), |i| abs_pow(values[i], q) * w)
}

/// Rayleigh-quotient estimate of the best Sobolev constant from the extremal:
/// k_inverse = [U]_{s,2}^2 / ||U||_{2*}^2 estimates K(n,s,2)^{-1}.
///
/// The box truncation loses a seminorm tail that decays like R^{-(n-2s)};
/// `seminorm_tail_estimate` is a first-order magnitude estimate obtained by
/// comparing against the half-box seminorm under the model tail(R) = c R^{-(n-2s)}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RayleighReport {
    pub seminorm2: f64,
    pub crit_norm_sq: f64,
    pub k_inverse: f64,
    pub k_estimate: f64,
    pub seminorm_tail_estimate: f64,
    pub r_box: f64,
    pub resolution: usize,
}

pub fn euclidean_rayleigh(params: &FracParams, egrid: &EuclideanGrid) -> Result<RayleighReport> {
    if params.p() != 2.0 {
        return Err(Error::Config("the Rayleigh estimator needs p = 2".into()));
    }
    if params.n() != egrid.dim {
        return Err(Error::Shape(format!(
            "params dimension {} does not match grid dimension {}",
            params.n(),
            egrid.dim
        )));
    }
    if egrid.r_box < 20.0 {
        return Err(Error::Config(
            "best-constant estimation needs r_box >= 20 (tail truncation)".into(),
        ));
    }
    let s = params.s();
    let values = egrid.sample_bubble(params);
    let seminorm2 = euclidean_seminorm2(&values, egrid, s);
    let lq = euclidean_lq(&values, egrid, params.pstar());
    let crit_norm_sq = lq.powf(2.0 / params.pstar());
    let k_inverse = seminorm2 / crit_norm_sq;

    // half-box comparison for the tail model tail(R) = c R^{-beta}
    let half: Vec<usize> = (0..egrid.len())
        .filter(|&i| {
            let p = &egrid.points[i];
            p[0].abs() <= egrid.r_box / 2.0 && (egrid.dim == 1 || p[1].abs() <= egrid.r_box / 2.0)
        })
        .collect();
    let npow = NegPow::new(egrid.dim as f64 + 2.0 * s);
    let w2 = egrid.weight * egrid.weight;
    let half_seminorm = 2.0
        * euclid_pair_sum_subset(egrid, &half, |i, j, d| {
            let t = values[i] - values[j];
            t * t * npow.eval(d) * w2
        });
    let beta = params.n() as f64 - 2.0 * s;
    let tail = (seminorm2 - half_seminorm) / (2f64.powf(beta) - 1.0);

    Ok(RayleighReport {
        seminorm2,
        crit_norm_sq,
        k_inverse,
        k_estimate: 1.0 / k_inverse,
        seminorm_tail_estimate: tail,
        r_box: egrid.r_box,
        resolution: egrid.resolution,
    })
}

fn validate_ladder(grid: &Grid, cfg: &BubbleConfig, ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::Config("empty eps ladder".into()));
    }
    for &e in ladder {
        if !(e > 0.0 && e < cfg.delta) {
            return Err(Error::Config(format!(
                "every ladder eps must lie in (0, delta = {}), got {e}",
                cfg.delta
            )));
        }
    }
    let min_eps = ladder.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eps < 4.0 * grid.spacing() {
        return Err(Error::Resolution(format!(
            "unresolved bubble: eps = {min_eps} below 4 x grid spacing = {}",
            4.0 * grid.spacing()
        )));
    }
    Ok(())
}

/// Log-log slope of the L^2 mass of u_eps along the ladder.
///
/// The concentration estimate predicts mass O(eps^{2s}) only while the
/// profile's L^2 integral converges (n > 4s); at n = 4s a logarithmic factor
/// appears and below it the tail dominates. The flags record the regime.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct L2ScalingReport {
    pub eps: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub target: f64,
    pub log_corrected: bool,
    pub divergent_profile: bool,
}

pub fn bubble_l2_scaling(
    cfg: &BubbleConfig,
    grid: &Arc<Grid>,
    ladder: &[f64],
) -> Result<L2ScalingReport> {
    cfg.validate_for(grid.desc())?;
    validate_ladder(grid, cfg, ladder)?;
    let mut values = Vec::with_capacity(ladder.len());
    for &e in ladder {
        let u = bubble_on_manifold(&cfg.with_eps(e), grid)?;
        values.push(lp_norm_p(&u, 2.0));
    }
    let lx: Vec<f64> = ladder.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = cfg.params.n() as f64;
    let s = cfg.params.s();
    Ok(L2ScalingReport {
        eps: ladder.to_vec(),
        values,
        slope: ols_slope(&lx, &ly),
        target: 2.0 * s,
        log_corrected: (n - 4.0 * s).abs() < 1e-12,
        divergent_profile: n < 4.0 * s - 1e-12,
    })
}

/// Critical-norm masses of u_eps along the ladder together with the
/// Euclidean reference integral of |U|^{2*}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalLimitReport {
    pub eps: Vec<f64>,
    pub values: Vec<f64>,
    pub reference: f64,
}

pub fn bubble_critical_limit(
    cfg: &BubbleConfig,
    grid: &Arc<Grid>,
    ladder: &[f64],
    egrid: &EuclideanGrid,
) -> Result<CriticalLimitReport> {
    cfg.validate_for(grid.desc())?;
    validate_ladder(grid, cfg, ladder)?;
    if egrid.dim != cfg.params.n() {
        return Err(Error::Shape(
            "euclidean reference grid dimension must match the manifold".into(),
        ));
    }
    let pstar = cfg.params.pstar();
    let mut values = Vec::with_capacity(ladder.len());
    for &e in ladder {
        let u = bubble_on_manifold(&cfg.with_eps(e), grid)?;
        values.push(lp_norm_p(&u, pstar));
    }
    let uvals = egrid.sample_bubble(&cfg.params);
    let reference = euclidean_lq(&uvals, egrid, pstar);
    Ok(CriticalLimitReport {
        eps: ladder.to_vec(),
        values,
        reference,
    })
}

/// Kernel energies of u_eps along the ladder together with the Euclidean
/// seminorm reference [U]_{s,2}^2 on the given grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyLimitReport {
    pub eps: Vec<f64>,
    pub energies: Vec<f64>,
    pub reference: f64,
}

pub fn bubble_energy_limit(
    cfg: &BubbleConfig,
    grid: &Arc<Grid>,
    ladder: &[f64],
    spec: &KernelSpec,
    egrid: &EuclideanGrid,
) -> Result<EnergyLimitReport> {
    cfg.validate_for(grid.desc())?;
    validate_ladder(grid, cfg, ladder)?;
    if egrid.dim != cfg.params.n() {
        return Err(Error::Shape(
            "euclidean reference grid dimension must match the manifold".into(),
        ));
    }
    let mut energies = Vec::with_capacity(ladder.len());
    for &e in ladder {
        let u = bubble_on_manifold(&cfg.with_eps(e), grid)?;
        energies.push(kernel_energy(&u, spec));
    }
    let uvals = egrid.sample_bubble(&cfg.params);
    let reference = euclidean_seminorm2(&uvals, egrid, cfg.params.s());
    Ok(EnergyLimitReport {
        eps: ladder.to_vec(),
        energies,
        reference,
    })
}

/// Both sides of the blow-up change-of-variables identity and their gap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlowupReport {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_gap: f64,
}

/// Compares the kernel energy of the rescaled profile U_eps over
/// B_delta(x0)^2 against eps^{n+sp} times the rescaled-kernel integral of U
/// over B_{delta/eps}^2, quadratured on an independent Euclidean grid.
///
/// Only flat manifolds (circle, torus) are supported: there the blown-up
/// metric is exactly Euclidean and the continuum identity is exact, so the
/// gap measures pure quadrature disagreement.
pub fn blowup_identity_check(
    cfg: &BubbleConfig,
    grid: &Arc<Grid>,
    spec: &KernelSpec,
    euclid_resolution: usize,
) -> Result<BlowupReport> {
    let profile = |r2: f64| bubble_u_radial2(r2, &cfg.params);
    blowup_sides(cfg, grid, spec, euclid_resolution, profile)
}

fn blowup_sides<P>(
    cfg: &BubbleConfig,
    grid: &Arc<Grid>,
    spec: &KernelSpec,
    euclid_resolution: usize,
    profile: P,
) -> Result<BlowupReport>
where
    P: Fn(f64) -> f64 + Sync,
{
    let desc = *grid.desc();
    if !desc.is_flat() {
        return Err(Error::Config(
            "unsupported manifold: the identity's right side needs curved-measure quadrature"
                .into(),
        ));
    }
    cfg.validate_for(&desc)?;
    let eps = cfg.eps;
    let delta = cfg.delta;
    let npow_val = spec.params().kernel_exponent();
    let ker = spec.evaluator();
    let amp = eps.powf(-(cfg.params.n() as f64 - 2.0 * cfg.params.s()) / 2.0);
    let center: Vec<f64> = cfg.center[..desc.intrinsic_coords()].to_vec();

    // left side: pairs inside the geodesic ball, pure rescaled profile
    let ball: Vec<usize> = (0..grid.len())
        .filter(|&i| geodesic_distance(&desc, &center, grid.point(i)) < delta)
        .collect();
    if ball.len() < 2 {
        return Err(Error::Resolution(
            "fewer than two grid points inside B_delta(x0)".into(),
        ));
    }
    let uvals: Vec<f64> = ball
        .iter()
        .map(|&i| {
            let r = geodesic_distance(&desc, &center, grid.point(i));
            let t = r / eps;
            amp * profile(t * t)
        })
        .collect();
    let lhs = 2.0
        * par_row_sum(ball.len(), |a| {
            let i = ball[a];
            let wi = grid.weight(i);
            let mut acc = Neumaier::new();
            for (bo, &j) in ball[(a + 1)..].iter().enumerate() {
                let b = a + 1 + bo;
                let d = grid.distance(i, j);
                let t = uvals[a] - uvals[b];
                acc.add(t * t * ker.eval(d) * wi * grid.weight(j));
            }
            acc.value()
        });

    // right side: independent Euclidean grid over the blown-up ball
    let egrid = EuclideanGrid::new(desc.dim, delta / eps, euclid_resolution)?;
    let rball: Vec<usize> = (0..egrid.len())
        .filter(|&i| {
            let p = &egrid.points[i];
            let r2 = p[0] * p[0] + if desc.dim > 1 { p[1] * p[1] } else { 0.0 };
            r2.sqrt() < delta / eps
        })
        .collect();
    let evals: Vec<f64> = rball
        .iter()
        .map(|&i| {
            let p = &egrid.points[i];
            let r2 = p[0] * p[0] + if desc.dim > 1 { p[1] * p[1] } else { 0.0 };
            profile(r2)
        })
        .collect();
    let pref = eps.powf(npow_val);
    let w2 = egrid.weight() * egrid.weight();
    let rhs = 2.0
        * par_row_sum(rball.len(), |a| {
            let i = rball[a];
            let mut acc = Neumaier::new();
            for (bo, &j) in rball[(a + 1)..].iter().enumerate() {
                let b = a + 1 + bo;
                let d = egrid.dist(i, j);
                let t = evals[a] - evals[b];
                // K~ evaluated at the exact blown-up flat distance eps|X-Y|
                acc.add(t * t * pref * ker.eval(eps * d) * w2);
            }
            acc.value()
        });

    let rel_gap = if rhs != 0.0 {
        ((lhs - rhs) / rhs).abs()
    } else {
        (lhs - rhs).abs()
    };
    Ok(BlowupReport { lhs, rhs, rel_gap })
}

/// One row of a bubble sweep: masses, energy and the energy ratio against
/// the Euclidean reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub l2: f64,
    pub lcrit: f64,
    pub energy: f64,
    pub reference: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BubbleSweepReport {
    pub rows: Vec<SweepRow>,
    pub l2_slope: f64,
    pub l2_target: f64,
    pub l2_log_corrected: bool,
    pub l2_divergent_profile: bool,
    pub lcrit_reference: f64,
    pub energy_reference: f64,
}

impl BubbleSweepReport {
    /// RFC-4180 CSV with one row per ladder eps.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,l2,lcrit,energy,reference,ratio\r\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\r\n",
                r.eps, r.l2, r.lcrit, r.energy, r.reference, r.ratio
            ));
        }
        out
    }
}

/// Full sweep: L^2 and critical masses, kernel energies, references, slope.
pub fn bubble_sweep(
    cfg: &BubbleConfig,
    grid: &Arc<Grid>,
    ladder: &[f64],
    spec: &KernelSpec,
    egrid: &EuclideanGrid,
) -> Result<BubbleSweepReport> {
    let l2 = bubble_l2_scaling(cfg, grid, ladder)?;
    let crit = bubble_critical_limit(cfg, grid, ladder, egrid)?;
    let energy = bubble_energy_limit(cfg, grid, ladder, spec, egrid)?;
    let rows = (0..ladder.len())
        .map(|k| SweepRow {
            eps: ladder[k],
            l2: l2.values[k],
            lcrit: crit.values[k],
            energy: energy.energies[k],
            reference: energy.reference,
            ratio: energy.energies[k] / energy.reference,
        })
        .collect();
    Ok(BubbleSweepReport {
        rows,
        l2_slope: l2.slope,
        l2_target: l2.target,
        l2_log_corrected: l2.log_corrected,
        l2_divergent_profile: l2.divergent_profile,
        lcrit_reference: crit.reference,
        energy_reference: energy.reference,
    })
}
