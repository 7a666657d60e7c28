//! Variational solution of L_K u + h|u|^{p-2}u = f|u|^{q-2}u by constrained
//! minimization of J_K over the normalization manifold H_q = {∫ f|u|^q = 1},
//! plus the q -> p* continuation.
//!
//! The descent renormalizes onto H_q after every step and moves along the
//! projected gradient (the gradient of J_K minus its component along the
//! constraint normal) with a Barzilai-Borwein step safeguarded by Armijo
//! backtracking. Accepted iterates have strictly decreasing energy; the
//! constraint defect is at rounding level after every projection.

use crate::bubbles::{bubble_on_manifold, BubbleConfig};
use crate::error::{Error, Result};
use crate::fields::band_limited;
use crate::kernel::{FracParams, KernelSpec};
use crate::manifold::Grid;
use crate::numerics::{abs_pow, signed_pow, sum_indexed, NegPow, Neumaier};
use crate::sobolev::{kernel_energy, sobolev_norm_p, DiscreteFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Data of one variational problem on a grid.
#[derive(Debug, Clone)]
pub struct ProblemData {
    grid: Arc<Grid>,
    spec: KernelSpec,
    h: DiscreteFunction,
    f: DiscreteFunction,
    q: f64,
}

impl ProblemData {
    pub fn new(
        grid: &Arc<Grid>,
        spec: KernelSpec,
        h: DiscreteFunction,
        f: DiscreteFunction,
        q: f64,
    ) -> Result<Self> {
        if h.len() != grid.len() || f.len() != grid.len() {
            return Err(Error::Shape("h and f must live on the problem grid".into()));
        }
        if f.values().iter().any(|v| *v < 0.0) {
            return Err(Error::Config("f must be nonnegative".into()));
        }
        let int_f = sum_indexed(grid.len(), |i| f.values()[i] * grid.weight(i));
        if !(int_f > 0.0) {
            return Err(Error::Config("f must have positive integral".into()));
        }
        let pstar = spec.params().pstar();
        if !(q > 1.0 && q <= pstar) {
            return Err(Error::Config(format!(
                "q must lie in (1, p* = {pstar}], got {q}"
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            spec,
            h,
            f,
            q,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn params(&self) -> &FracParams {
        self.spec.params()
    }

    pub fn h(&self) -> &DiscreteFunction {
        &self.h
    }

    pub fn f(&self) -> &DiscreteFunction {
        &self.f
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn with_q(&self, q: f64) -> Result<Self> {
        Self::new(&self.grid, self.spec, self.h.clone(), self.f.clone(), q)
    }

    /// The paper's default initial guess: the constant function (renormalized
    /// onto H_q inside the solver).
    pub fn constant_init(&self) -> DiscreteFunction {
        DiscreteFunction::constant(&self.grid, 1.0).expect("constant fits the grid")
    }

    /// Bubble-initialized variant for concentration studies.
    pub fn bubble_init(&self, cfg: &BubbleConfig) -> Result<DiscreteFunction> {
        bubble_on_manifold(cfg, &self.grid)
    }
}

/// J_K(u) = (1/p) (L_K u, u) + (1/p) ∫ h |u|^p.
pub fn functional_jk(data: &ProblemData, u: &DiscreteFunction) -> f64 {
    let p = data.params().p();
    let hterm = sum_indexed(u.len(), |i| {
        data.h.values()[i] * abs_pow(u.values()[i], p) * data.grid.weight(i)
    });
    (kernel_energy(u, &data.spec) + hterm) / p
}

/// I(u) = J_K(u) - (1/q) ∫ f |u|^q.
pub fn functional_i(data: &ProblemData, u: &DiscreteFunction) -> f64 {
    let fterm = sum_indexed(u.len(), |i| {
        data.f.values()[i] * abs_pow(u.values()[i], data.q) * data.grid.weight(i)
    });
    functional_jk(data, u) - fterm / data.q
}

/// Nodal gradient of I: the weak form of I'(u) paired against the j-th nodal
/// bump,
/// grad_j = 2 Σ_{i≠j} |u_j-u_i|^{p-2}(u_j-u_i) K(d_ij) w_i w_j
///          + h_j |u_j|^{p-2} u_j w_j - f_j |u_j|^{q-2} u_j w_j.
pub fn gradient_i(data: &ProblemData, u: &DiscreteFunction) -> DiscreteFunction {
    let mut g = nonlocal_gradient(data, u.values());
    let p = data.params().p();
    for j in 0..u.len() {
        let w = data.grid.weight(j);
        g[j] += data.h.values()[j] * signed_pow(u.values()[j], p) * w
            - data.f.values()[j] * signed_pow(u.values()[j], data.q) * w;
    }
    DiscreteFunction::new(&data.grid, g).expect("gradient fits the grid")
}

/// 2 Σ_{i≠j} |u_j-u_i|^{p-2}(u_j-u_i) K(d_ij) w_i w_j, sequential over the
/// unordered pairs so the accumulation order is fixed.
fn nonlocal_gradient(data: &ProblemData, u: &[f64]) -> Vec<f64> {
    let grid = &data.grid;
    let n = grid.len();
    let ker = data.spec.evaluator();
    let p = data.params().p();
    let mut g = vec![0.0; n];
    for i in 0..n {
        let (ui, wi) = (u[i], grid.weight(i));
        for j in (i + 1)..n {
            let a2 = 2.0 * ker.eval(grid.distance(i, j)) * wi * grid.weight(j);
            let t = signed_pow(ui - u[j], p);
            g[i] += t * a2;
            g[j] -= t * a2;
        }
    }
    g
}

/// Solver options. `tol_energy` and `tol_res` are relative; the iteration
/// stops when the energy decrease falls below tol_energy (1+|J|) and the
/// projected gradient norm below tol_res (1+||u||).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolveOpts {
    pub tol_energy: f64,
    pub tol_res: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub coercivity_probes: usize,
    pub probe_max_mode: usize,
}

impl Default for SolveOpts {
    fn default() -> Self {
        Self {
            tol_energy: 1e-12,
            tol_res: 1e-6,
            max_iter: 20_000,
            seed: 0,
            coercivity_probes: 200,
            probe_max_mode: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub energy: f64,
    pub constraint_defect: f64,
}

/// Minimizer, constrained level mu_q, weak residual and iteration trace.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: DiscreteFunction,
    pub mu: f64,
    pub residual: f64,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResultJson {
    pub mu: f64,
    pub residual: f64,
    pub iterations: usize,
    pub u: Vec<f64>,
    pub trace: Vec<TraceEntry>,
}

impl SolveResult {
    pub fn to_json(&self) -> SolveResultJson {
        SolveResultJson {
            mu: self.mu,
            residual: self.residual,
            iterations: self.iterations,
            u: self.u.values().to_vec(),
            trace: self.trace.clone(),
        }
    }

    /// RFC-4180 CSV of the iteration trace.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,energy,constraint_defect\r\n");
        for t in &self.trace {
            out.push_str(&format!(
                "{},{},{}\r\n",
                t.iteration, t.energy, t.constraint_defect
            ));
        }
        out
    }
}

/// Empirical coercivity constant: the minimum of J_K(u)/||u||_{s,p}^p over
/// the probe family (band-limited fields, the constant, one bubble).
/// Positive C_est is necessary evidence for coercivity, not a proof.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub c_est: f64,
    pub probes_used: usize,
}

pub fn check_coercivity(data: &ProblemData, opts: &SolveOpts) -> CoercivityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_c0e5);
    let mut probes: Vec<DiscreteFunction> = (0..opts.coercivity_probes)
        .map(|_| band_limited(&data.grid, opts.probe_max_mode, &mut rng))
        .collect();
    probes.push(data.constant_init());
    // one concentrated probe; skipped when the grid cannot resolve it
    let desc = data.grid.desc();
    let delta = desc.injectivity_radius() * 0.45;
    let eps = (4.0 * data.grid.spacing()).max(delta / 8.0);
    if eps < delta && data.params().p() == 2.0 {
        let center = {
            let p = data.grid.point(0);
            [p[0], if p.len() > 1 { p[1] } else { 0.0 }]
        };
        if let Ok(cfg) = BubbleConfig::new(*data.params(), center, eps, delta) {
            if let Ok(b) = bubble_on_manifold(&cfg, &data.grid) {
                probes.push(b);
            }
        }
    }
    let mut c_est = f64::INFINITY;
    let mut used = 0;
    for u in &probes {
        let norm = sobolev_norm_p(u, data.params());
        if norm == 0.0 {
            continue;
        }
        used += 1;
        c_est = c_est.min(functional_jk(data, u) / norm);
    }
    CoercivityReport {
        c_est,
        probes_used: used,
    }
}

/// Packed upper-triangular kernel matrix a_ij = K(d_ij) w_i w_j, cached when
/// the grid is small enough (the manifold module permits caching at
/// N <= 4096).
struct KernelTable {
    n: usize,
    packed: Option<Vec<f64>>,
}

const CACHE_LIMIT: usize = 4096;

impl KernelTable {
    fn build(data: &ProblemData) -> Self {
        let grid = &data.grid;
        let n = grid.len();
        if n > CACHE_LIMIT {
            return Self { n, packed: None };
        }
        let ker = data.spec.evaluator();
        let mut packed = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            let wi = grid.weight(i);
            for j in (i + 1)..n {
                packed.push(ker.eval(grid.distance(i, j)) * wi * grid.weight(j));
            }
        }
        Self {
            n,
            packed: Some(packed),
        }
    }

    fn kernel_part(&self, data: &ProblemData, u: &[f64], p: f64) -> f64 {
        match &self.packed {
            Some(a) => {
                let mut acc = Neumaier::new();
                let mut k = 0;
                for i in 0..self.n {
                    let ui = u[i];
                    for uj in &u[(i + 1)..self.n] {
                        acc.add(abs_pow(ui - uj, p) * a[k]);
                        k += 1;
                    }
                }
                2.0 * acc.value()
            }
            None => {
                let grid = &data.grid;
                let ker = data.spec.evaluator();
                let mut acc = Neumaier::new();
                for i in 0..self.n {
                    let (ui, wi) = (u[i], grid.weight(i));
                    for j in (i + 1)..self.n {
                        acc.add(
                            abs_pow(ui - u[j], p)
                                * ker.eval(grid.distance(i, j))
                                * wi
                                * grid.weight(j),
                        );
                    }
                }
                2.0 * acc.value()
            }
        }
    }

    fn jk(&self, data: &ProblemData, u: &[f64]) -> f64 {
        let p = data.params().p();
        let hterm = sum_indexed(self.n, |i| {
            data.h.values()[i] * abs_pow(u[i], p) * data.grid.weight(i)
        });
        (self.kernel_part(data, u, p) + hterm) / p
    }

    fn grad_jk(&self, data: &ProblemData, u: &[f64]) -> Vec<f64> {
        let p = data.params().p();
        let mut g = match &self.packed {
            Some(a) => {
                let mut g = vec![0.0; self.n];
                let mut k = 0;
                for i in 0..self.n {
                    let ui = u[i];
                    for j in (i + 1)..self.n {
                        let t = signed_pow(ui - u[j], p) * 2.0 * a[k];
                        g[i] += t;
                        g[j] -= t;
                        k += 1;
                    }
                }
                g
            }
            None => nonlocal_gradient(data, u),
        };
        for j in 0..self.n {
            g[j] += data.h.values()[j] * signed_pow(u[j], p) * data.grid.weight(j);
        }
        g
    }
}

fn constraint_mass(data: &ProblemData, u: &[f64]) -> f64 {
    sum_indexed(u.len(), |i| {
        data.f.values()[i] * abs_pow(u[i], data.q) * data.grid.weight(i)
    })
}

fn renormalize(data: &ProblemData, u: &[f64]) -> Option<Vec<f64>> {
    let m = constraint_mass(data, u);
    if !(m > 0.0) || !m.is_finite() {
        return None;
    }
    let scale = m.powf(-1.0 / data.q);
    if !scale.is_finite() {
        return None;
    }
    Some(u.iter().map(|v| v * scale).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weak residual of the Euler-Lagrange equation on H_q, tested against 50
/// band-limited fields (plus all nodal bumps on grids with N <= 1024), each
/// normalized in the Sobolev norm. The multiplier is lambda q = p mu_q.
fn weak_residual(data: &ProblemData, table: &KernelTable, u: &[f64], mu: f64, seed: u64) -> f64 {
    let p = data.params().p();
    let lam_q = p * mu;
    let mut rho = table.grad_jk(data, u);
    for j in 0..u.len() {
        rho[j] -= lam_q * data.f.values()[j] * signed_pow(u[j], data.q) * data.grid.weight(j);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e57_f1e1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let v = band_limited(&data.grid, 5, &mut rng);
        let norm = sobolev_norm_p(&v, data.params()).powf(1.0 / p);
        if norm == 0.0 {
            continue;
        }
        worst = worst.max(dot(&rho, v.values()).abs() / norm);
    }
    if u.len() <= 1024 {
        // ||e_j||^p = 2 w_j Σ_i d_ij^{-(n+sp)} w_i + w_j for the nodal bump
        let grid = &data.grid;
        let npow = NegPow::new(data.params().kernel_exponent());
        for j in 0..u.len() {
            let mut acc = Neumaier::new();
            for i in 0..u.len() {
                if i != j {
                    acc.add(npow.eval(grid.distance(i, j)) * grid.weight(i));
                }
            }
            let norm_p = 2.0 * grid.weight(j) * acc.value() + grid.weight(j);
            worst = worst.max(rho[j].abs() / norm_p.powf(1.0 / p));
        }
    }
    worst
}

/// Projected-gradient descent on H_q with Barzilai-Borwein steps and Armijo
/// backtracking, from the given initial guess.
pub fn solve_subcritical(
    data: &ProblemData,
    init: &DiscreteFunction,
    opts: &SolveOpts,
) -> Result<SolveResult> {
    if data.q >= data.params().pstar() {
        return Err(Error::Config(format!(
            "subcritical solve needs q < p* = {}, got q = {}",
            data.params().pstar(),
            data.q
        )));
    }
    let coercivity = check_coercivity(data, opts);
    if !(coercivity.c_est > 0.0) {
        return Err(Error::Numerical(format!(
            "non-coercive data: empirical coercivity constant {} <= 0",
            coercivity.c_est
        )));
    }
    if constraint_mass(data, init.values()) <= 0.0 {
        return Err(Error::Degenerate(
            "initial guess has zero constraint mass ∫ f |u|^q".into(),
        ));
    }
    let table = KernelTable::build(data);
    let mut u = renormalize(data, init.values())
        .ok_or_else(|| Error::Degenerate("initial guess cannot be normalized".into()))?;
    let mut j = table.jk(data, &u);
    let mut trace = vec![TraceEntry {
        iteration: 0,
        energy: j,
        constraint_defect: (constraint_mass(data, &u) - 1.0).abs(),
    }];
    let mut tau = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None; // (u, pg)
    let mut last_decrease = f64::INFINITY;
    let mut iterations = 0;

    for it in 1..=opts.max_iter {
        let g = table.grad_jk(data, &u);
        let mut normal = vec![0.0; u.len()];
        for k in 0..u.len() {
            normal[k] =
                data.q * data.f.values()[k] * signed_pow(u[k], data.q) * data.grid.weight(k);
        }
        let nn = dot(&normal, &normal);
        let proj = if nn > 0.0 { dot(&g, &normal) / nn } else { 0.0 };
        let pg: Vec<f64> = g
            .iter()
            .zip(&normal)
            .map(|(gi, ni)| gi - proj * ni)
            .collect();
        let pg_norm = dot(&pg, &pg).sqrt();
        let u_norm = dot(&u, &u).sqrt();

        let grad_ok = pg_norm <= opts.tol_res * (1.0 + u_norm);
        let energy_ok = last_decrease < opts.tol_energy * (1.0 + j.abs());
        if grad_ok && energy_ok {
            break;
        }

        // Barzilai-Borwein step from the previous (u, pg) pair
        if let Some((pu, ppg)) = &prev {
            let du: Vec<f64> = u.iter().zip(pu).map(|(a, b)| a - b).collect();
            let dg: Vec<f64> = pg.iter().zip(ppg).map(|(a, b)| a - b).collect();
            let denom = dot(&du, &dg);
            if denom > 0.0 {
                tau = (dot(&du, &du) / denom).clamp(1e-12, 1e10);
            } else {
                tau = (tau * 2.0).clamp(1e-12, 1e10);
            }
        }

        let pg_sq = pg_norm * pg_norm;
        let mut t = tau;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = u.iter().zip(&pg).map(|(ui, gi)| ui - t * gi).collect();
            if let Some(cand) = renormalize(data, &cand) {
                let jc = table.jk(data, &cand);
                if jc <= j - 1e-4 * t * pg_sq {
                    accepted = Some((cand, jc, t));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((unew, jnew, tacc)) = accepted else {
            if grad_ok {
                break; // cannot certify further decrease; gradient already small
            }
            return Err(Error::Stagnation {
                iterations,
                trace: trace
                    .iter()
                    .map(|e| (e.iteration, e.energy, e.constraint_defect))
                    .collect(),
            });
        };
        prev = Some((u.clone(), pg));
        last_decrease = j - jnew;
        u = unew;
        j = jnew;
        tau = tacc;
        iterations = it;
        trace.push(TraceEntry {
            iteration: it,
            energy: j,
            constraint_defect: (constraint_mass(data, &u) - 1.0).abs(),
        });
    }

    let u = renormalize(data, &u)
        .ok_or_else(|| Error::Degenerate("final iterate cannot be normalized".into()))?;
    let mu = table.jk(data, &u);
    let residual = weak_residual(data, &table, &u, mu, opts.seed);
    Ok(SolveResult {
        u: DiscreteFunction::new(&data.grid, u)?,
        mu,
        residual,
        iterations,
        trace,
    })
}

/// Continuation along a strictly increasing schedule of subcritical
/// exponents ending at p* - delta_q with delta_q >= 0.05, each stage
/// warm-started from the previous minimizer.
#[derive(Debug, Clone)]
pub struct ContinuationResult {
    pub stages: Vec<(f64, f64)>,
    pub final_result: SolveResult,
}

impl ContinuationResult {
    /// |mu_{q_k} - mu_{q_{k-1}}| along the schedule.
    pub fn gaps(&self) -> Vec<f64> {
        self.stages
            .windows(2)
            .map(|w| (w[1].1 - w[0].1).abs())
            .collect()
    }
}

pub fn solve_critical_continuation(
    data: &ProblemData,
    schedule: &[f64],
    opts: &SolveOpts,
) -> Result<ContinuationResult> {
    if data.params().p() != 2.0 {
        return Err(Error::Config("continuation is built for p = 2".into()));
    }
    if schedule.len() < 2 {
        return Err(Error::Config("schedule needs at least two stages".into()));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("schedule must be strictly increasing".into()));
    }
    let pstar = data.params().pstar();
    let last = *schedule.last().expect("nonempty");
    if last > pstar - 0.05 + 1e-12 {
        return Err(Error::Config(format!(
            "last stage must stay at least 0.05 below p* = {pstar}, got {last}"
        )));
    }
    let mut stages = Vec::new();
    let mut current = data.constant_init();
    let mut final_result = None;
    for &q in schedule {
        let stage_data = data.with_q(q)?;
        match solve_subcritical(&stage_data, &current, opts) {
            Ok(res) => {
                stages.push((q, res.mu));
                current = res.u.clone();
                final_result = Some(res);
            }
            Err(e) => {
                return Err(Error::Continuation {
                    failed_q: q,
                    message: e.to_string(),
                    completed: stages,
                });
            }
        }
    }
    Ok(ContinuationResult {
        stages,
        final_result: final_result.expect("at least one stage ran"),
    })
}

/// Existence-condition report for the critical problem (p = 2):
/// threshold (2 (max f)^{2/2*} K)^{-1}, the corollary's left-hand side
/// (max f)^{2/2*} ∫h / (∫f)^{2/2*}, and the best available bound on inf J_K.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub inf_jk_est: f64,
    pub threshold: f64,
    pub corollary_lhs: f64,
    pub k_inverse: f64,
    pub constant_test_mu: f64,
    pub condition_holds: bool,
    pub corollary_holds: bool,
}

pub fn check_existence_condition(
    data: &ProblemData,
    kconst: f64,
    continuation_mu: Option<f64>,
) -> Result<ConditionReport> {
    if data.params().p() != 2.0 {
        return Err(Error::Config("the existence condition needs p = 2".into()));
    }
    if !(kconst > 0.0) {
        return Err(Error::Config("kconst must be positive".into()));
    }
    let tstar = data.params().pstar();
    let grid = &data.grid;
    let max_f = data
        .f
        .values()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let int_f = sum_indexed(grid.len(), |i| data.f.values()[i] * grid.weight(i));
    let int_h = sum_indexed(grid.len(), |i| data.h.values()[i] * grid.weight(i));
    let c = int_f.powf(-1.0 / tstar);
    let constant_test_mu = functional_jk(
        data,
        &DiscreteFunction::constant(grid, c).expect("constant fits the grid"),
    );
    let inf_jk_est = match continuation_mu {
        Some(m) => m.min(constant_test_mu),
        None => constant_test_mu,
    };
    let threshold = 1.0 / (2.0 * max_f.powf(2.0 / tstar) * kconst);
    let corollary_lhs = max_f.powf(2.0 / tstar) * int_h / int_f.powf(2.0 / tstar);
    Ok(ConditionReport {
        inf_jk_est,
        threshold,
        corollary_lhs,
        k_inverse: 1.0 / kconst,
        constant_test_mu,
        condition_holds: inf_jk_est < threshold,
        corollary_holds: corollary_lhs < 1.0 / kconst,
    })
}
