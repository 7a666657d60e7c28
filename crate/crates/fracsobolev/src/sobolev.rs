//! Quadrature of Gagliardo seminorms, kernel energies, L^q norms and the
//! partition-of-unity localized norm comparison.
//!
//! Every double integral is realized as a sum over unordered off-diagonal
//! grid pairs and doubled, which enforces exact symmetry and halves the
//! cost. Pair sums accumulate with compensated summation and reduce over a
//! fixed block tree, so results do not depend on thread count.
//!
//! Omitting the diagonal cells biases the seminorm by O(h^{2-2s}) per point;
//! oracles control this by Richardson extrapolation over grid refinements.

use crate::error::{Error, Result};
use crate::kernel::{FracParams, KernelSpec};
use crate::manifold::Grid;
use crate::numerics::{abs_pow, par_row_sum, signed_pow, sum_indexed, NegPow, Neumaier};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Real values aligned with the points of a grid.
#[derive(Debug, Clone)]
pub struct DiscreteFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl DiscreteFunction {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "value count {} does not match grid point count {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("function values must be finite".into()));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()])
    }

    /// Sample a function of the grid point coordinates.
    pub fn from_fn<F: FnMut(&[f64]) -> f64>(grid: &Arc<Grid>, mut f: F) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid)
            || (self.grid.desc() == other.grid.desc() && self.grid.len() == other.grid.len())
    }
}

/// Pair sum over unordered off-diagonal grid pairs; `term(i, j, d_ij)` is
/// evaluated once per pair and the result is NOT doubled here.
pub(crate) fn grid_pair_sum<T>(grid: &Grid, term: T) -> f64
where
    T: Fn(usize, usize, f64) -> f64 + Sync,
{
    let n = grid.len();
    par_row_sum(n, |i| {
        let mut acc = Neumaier::new();
        for j in (i + 1)..n {
            acc.add(term(i, j, grid.distance(i, j)));
        }
        acc.value()
    })
}

/// Gagliardo seminorm [u]_{s,p}^p with the singular weight d^{-(n+sp)}.
pub fn gagliardo_seminorm_p(u: &DiscreteFunction, params: &FracParams) -> f64 {
    let grid = u.grid();
    assert_eq!(
        params.n(),
        grid.desc().dim,
        "params dimension must match the manifold dimension"
    );
    let npow = NegPow::new(params.kernel_exponent());
    let p = params.p();
    let vals = u.values();
    let w = grid.weights();
    2.0 * grid_pair_sum(grid, |i, j, d| {
        abs_pow(vals[i] - vals[j], p) * npow.eval(d) * w[i] * w[j]
    })
}

/// Kernel energy (L_K u, u) = sum |u(x)-u(y)|^p K(d) over off-diagonal pairs.
pub fn kernel_energy(u: &DiscreteFunction, spec: &KernelSpec) -> f64 {
    let grid = u.grid();
    let ker = spec.evaluator();
    let p = spec.params().p();
    let vals = u.values();
    let w = grid.weights();
    2.0 * grid_pair_sum(grid, |i, j, d| {
        abs_pow(vals[i] - vals[j], p) * ker.eval(d) * w[i] * w[j]
    })
}

/// Semilinear pairing sum |u(x)-u(y)|^{p-2}(u(x)-u(y))(v(x)-v(y)) K(d).
/// Symmetric in (u, v) exactly when p = 2; form(u, u) = kernel_energy(u).
pub fn semilinear_form(
    u: &DiscreteFunction,
    v: &DiscreteFunction,
    spec: &KernelSpec,
) -> Result<f64> {
    if !u.same_grid(v) {
        return Err(Error::Shape(
            "semilinear form needs both functions on the same grid".into(),
        ));
    }
    let grid = u.grid();
    let ker = spec.evaluator();
    let p = spec.params().p();
    let (uv, vv) = (u.values(), v.values());
    let w = grid.weights();
    Ok(2.0
        * grid_pair_sum(grid, |i, j, d| {
            signed_pow(uv[i] - uv[j], p) * (vv[i] - vv[j]) * ker.eval(d) * w[i] * w[j]
        }))
}

/// Integral of |u|^q against the volume weights.
pub fn lp_norm_p(u: &DiscreteFunction, q: f64) -> f64 {
    assert!(q >= 1.0, "lp_norm_p needs q >= 1");
    let vals = u.values();
    let w = u.grid().weights();
    sum_indexed(vals.len(), |i| abs_pow(vals[i], q) * w[i])
}

/// Full norm to the p-th power: ||u||_p^p + [u]_{s,p}^p.
pub fn sobolev_norm_p(u: &DiscreteFunction, params: &FracParams) -> f64 {
    lp_norm_p(u, params.p()) + gagliardo_seminorm_p(u, params)
}

/// Localized-to-global norm ratio for a partition of unity:
/// sum_i ||eta_i u||_{s,p}^p / ||u||_{s,p}^p, together with the Jensen floor
/// N^{1-p} that the ratio can never undershoot.
pub fn localized_norm_ratio(
    u: &DiscreteFunction,
    partition: &[DiscreteFunction],
    params: &FracParams,
) -> Result<(f64, f64)> {
    if partition.is_empty() {
        return Err(Error::Config("empty partition".into()));
    }
    for eta in partition {
        if !eta.same_grid(u) {
            return Err(Error::Shape("partition lives on a different grid".into()));
        }
    }
    for i in 0..u.len() {
        let total: f64 = partition.iter().map(|eta| eta.values()[i]).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Config(format!(
                "partition does not sum to one at point {i}: {total}"
            )));
        }
    }
    let denom = sobolev_norm_p(u, params);
    if denom == 0.0 {
        return Err(Error::Degenerate(
            "localized norm ratio of the zero function".into(),
        ));
    }
    let mut total = Neumaier::new();
    for eta in partition {
        let prod = DiscreteFunction::new(
            u.grid(),
            eta.values()
                .iter()
                .zip(u.values())
                .map(|(e, v)| e * v)
                .collect(),
        )?;
        total.add(sobolev_norm_p(&prod, params));
    }
    let ratio = total.value() / denom;
    let floor = (partition.len() as f64).powf(1.0 - params.p());
    Ok((floor, ratio))
}

/// Scalar energies of one field, serialized for reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    pub seminorm_p: f64,
    pub kernel_energy: f64,
    pub lp_norm_p: f64,
    pub resolution: usize,
    pub excluded_pairs: usize,
}

pub fn energy_report(u: &DiscreteFunction, spec: &KernelSpec) -> EnergyReport {
    EnergyReport {
        seminorm_p: gagliardo_seminorm_p(u, spec.params()),
        kernel_energy: kernel_energy(u, spec),
        lp_norm_p: lp_norm_p(u, spec.params().p()),
        resolution: u.grid().resolution(),
        excluded_pairs: u.grid().len(),
    }
}

/// Histogram of per-pair seminorm contributions against distance, for
/// quadrature diagnostics. Bins are log-spaced over the off-diagonal
/// distance range. Sequential O(N^2); intended for report generation.
pub fn pair_histogram(u: &DiscreteFunction, params: &FracParams, bins: usize) -> Vec<(f64, f64)> {
    assert!(bins >= 2);
    let grid = u.grid();
    let n = grid.len();
    let mut dmin = f64::INFINITY;
    let mut dmax: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = grid.distance(i, j);
            if d > 0.0 {
                dmin = dmin.min(d);
                dmax = dmax.max(d);
            }
        }
    }
    if !dmin.is_finite() || dmax <= dmin {
        return Vec::new();
    }
    let npow = NegPow::new(params.kernel_exponent());
    let p = params.p();
    let vals = u.values();
    let w = grid.weights();
    let log_lo = dmin.ln();
    let width = (dmax.ln() - log_lo) / bins as f64;
    let mut acc = vec![Neumaier::new(); bins];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = grid.distance(i, j);
            if d <= 0.0 {
                continue;
            }
            let b = (((d.ln() - log_lo) / width) as usize).min(bins - 1);
            acc[b].add(2.0 * abs_pow(vals[i] - vals[j], p) * npow.eval(d) * w[i] * w[j]);
        }
    }
    (0..bins)
        .map(|b| {
            let center = (log_lo + (b as f64 + 0.5) * width).exp();
            (center, acc[b].value())
        })
        .collect()
}

/// RFC-4180 CSV of a pair-contribution histogram (columns: d, contribution).
pub fn pair_histogram_csv(hist: &[(f64, f64)]) -> String {
    let mut out = String::from("d,contribution\r\n");
    for (d, c) in hist {
        out.push_str(&format!("{d},{c}\r\n"));
    }
    out
}
