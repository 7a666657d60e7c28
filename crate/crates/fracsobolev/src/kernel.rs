//! The model kernel family K(x,y;g) = d_g(x,y)^{-(n+ps)} [+ d_g(x,y)^{-alpha}]
//! together with numerical checkers for the kernel axioms: integrability of
//! min{d^p,1} K, symmetry, the two-sided pinch against d^{-(n+ps)}, and the
//! blow-up limit of the rescaled kernel.
//!
//! The checkers accept any kernel given as a function of the distance, so
//! user kernels can be validated against the same axioms.

use crate::error::{Error, Result};
use crate::manifold::{exp_map, geodesic_distance, Grid, ManifoldDesc, TangentVector};
use crate::numerics::{par_row_sum, NegPow, Neumaier};
use serde::{Deserialize, Serialize};

/// Fractional parameters (n, s, p) with s in (0,1), p > 1 and sp < n.
/// The critical exponent p* = np/(n-sp) is always recomputed on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracParams {
    n: usize,
    s: f64,
    p: f64,
}

impl FracParams {
    pub fn new(n: usize, s: f64, p: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("dimension n must be positive".into()));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Config(format!("s must lie in (0,1), got {s}")));
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Config(format!("p must exceed 1, got {p}")));
        }
        if s * p >= n as f64 {
            return Err(Error::Config(format!(
                "need sp < n for the critical exponent, got s*p = {} with n = {n}",
                s * p
            )));
        }
        Ok(Self { n, s, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Fractional critical Sobolev exponent np/(n - sp).
    pub fn pstar(&self) -> f64 {
        let n = self.n as f64;
        n * self.p / (n - self.s * self.p)
    }

    /// Kernel singularity exponent n + ps.
    pub fn kernel_exponent(&self) -> f64 {
        self.n as f64 + self.p * self.s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    PureFractional,
    FractionalPlusTail,
}

/// Parameters of a kernel in the model family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "KernelSpecJson", try_from = "KernelSpecJson")]
pub struct KernelSpec {
    params: FracParams,
    kind: KernelKind,
    alpha: Option<f64>,
    lambda_bound: f64,
}

#[derive(Serialize, Deserialize)]
struct KernelSpecJson {
    n: usize,
    s: f64,
    p: f64,
    kind: KernelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    lambda_bound: f64,
}

impl From<KernelSpec> for KernelSpecJson {
    fn from(k: KernelSpec) -> Self {
        KernelSpecJson {
            n: k.params.n,
            s: k.params.s,
            p: k.params.p,
            kind: k.kind,
            alpha: k.alpha,
            lambda_bound: k.lambda_bound,
        }
    }
}

impl TryFrom<KernelSpecJson> for KernelSpec {
    type Error = Error;

    fn try_from(j: KernelSpecJson) -> Result<Self> {
        let params = FracParams::new(j.n, j.s, j.p)?;
        match j.kind {
            KernelKind::PureFractional => KernelSpec::pure_fractional(params, j.lambda_bound),
            KernelKind::FractionalPlusTail => {
                let alpha = j.alpha.ok_or_else(|| {
                    Error::Config("fractional_plus_tail kernel needs alpha".into())
                })?;
                KernelSpec::fractional_plus_tail(params, alpha, j.lambda_bound)
            }
        }
    }
}

impl KernelSpec {
    pub fn pure_fractional(params: FracParams, lambda_bound: f64) -> Result<Self> {
        if !(lambda_bound > 1.0) {
            return Err(Error::Config(format!(
                "lambda_bound must exceed 1, got {lambda_bound}"
            )));
        }
        Ok(Self {
            params,
            kind: KernelKind::PureFractional,
            alpha: None,
            lambda_bound,
        })
    }

    pub fn fractional_plus_tail(params: FracParams, alpha: f64, lambda_bound: f64) -> Result<Self> {
        if !(lambda_bound > 1.0) {
            return Err(Error::Config(format!(
                "lambda_bound must exceed 1, got {lambda_bound}"
            )));
        }
        if !(alpha > 0.0 && alpha < params.kernel_exponent()) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, n + ps) = (0, {}), got {alpha}",
                params.kernel_exponent()
            )));
        }
        Ok(Self {
            params,
            kind: KernelKind::FractionalPlusTail,
            alpha: Some(alpha),
            lambda_bound,
        })
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn lambda_bound(&self) -> f64 {
        self.lambda_bound
    }

    /// Distance-profile evaluator with the power fast paths resolved once.
    pub fn evaluator(&self) -> KernelEval {
        KernelEval {
            main: NegPow::new(self.params.kernel_exponent()),
            tail: self.alpha.map(NegPow::new),
        }
    }
}

/// Prepared kernel profile K(d); the diagonal d = 0 is never evaluated.
#[derive(Debug, Clone, Copy)]
pub struct KernelEval {
    main: NegPow,
    tail: Option<NegPow>,
}

impl KernelEval {
    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        match self.tail {
            None => self.main.eval(d),
            Some(t) => self.main.eval(d) + t.eval(d),
        }
    }
}

/// K(d) for d > 0. The diagonal is excluded by construction everywhere, so
/// d <= 0 is a caller error.
pub fn eval_kernel(spec: &KernelSpec, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!(
            "kernel evaluated at non-positive distance {d}"
        )));
    }
    Ok(spec.evaluator().eval(d))
}

/// Empirical pinch interval (inf, sup) of K(x,y) d_g(x,y)^{n+ps} over all
/// off-diagonal grid pairs. The pinch is computed as the ratio of K to the
/// pure-fractional reference profile, which makes it exactly 1 for the pure
/// kernel. Axiom (K3) holds on the grid iff
/// lambda_bound^{-1} < inf <= sup < lambda_bound.
pub fn check_k3_bounds(spec: &KernelSpec, grid: &Grid) -> (f64, f64) {
    let n = grid.len();
    assert!(n >= 2, "pinch needs at least two grid points");
    let ker = spec.evaluator();
    let reference = NegPow::new(spec.params.kernel_exponent());
    let mut inf = f64::INFINITY;
    let mut sup = f64::NEG_INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = grid.distance(i, j);
            let pinch = ker.eval(d) / reference.eval(d);
            inf = inf.min(pinch);
            sup = sup.max(pinch);
        }
    }
    (inf, sup)
}

/// Quadrature of min{d^p, 1} K(d) over off-diagonal pairs for an arbitrary
/// distance-profile kernel.
pub fn check_k1_integrable_with<K>(kernel: K, p: f64, grid: &Grid) -> f64
where
    K: Fn(f64) -> f64 + Sync,
{
    let n = grid.len();
    par_row_sum(n, |i| {
        let wi = grid.weight(i);
        let mut acc = Neumaier::new();
        for j in (i + 1)..n {
            let d = grid.distance(i, j);
            let m = (d.powf(p)).min(1.0);
            acc.add(m * kernel(d) * wi * grid.weight(j));
        }
        acc.value()
    }) * 2.0
}

/// Axiom (K1) quadrature for a model kernel.
pub fn check_k1_integrable(spec: &KernelSpec, grid: &Grid) -> f64 {
    let ker = spec.evaluator();
    check_k1_integrable_with(move |d| ker.eval(d), spec.params.p(), grid)
}

/// Maximum relative deviation of eps^{n+sp} K(exp_{x0}(eps X), exp_{x0}(eps Y))
/// from |X - Y|^{-(n+ps)} over the given tangent-vector pairs.
///
/// On the flat torus with the pure kernel the rescaled kernel coincides with
/// the Euclidean one and the deviation sits at rounding level.
pub fn check_k4_blowup(
    spec: &KernelSpec,
    desc: &ManifoldDesc,
    x0: &[f64],
    pairs: &[(TangentVector, TangentVector)],
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let inj = desc.injectivity_radius();
    let npow = spec.params.kernel_exponent();
    let ker = spec.evaluator();
    let mut worst: f64 = 0.0;
    for (vx, vy) in pairs {
        let sep = {
            let dx = vx.components[0] - vy.components[0];
            let dy = vx.components[1] - vy.components[1];
            (dx * dx + dy * dy).sqrt()
        };
        if sep == 0.0 {
            return Err(Error::Domain("K4 check needs X != Y in every pair".into()));
        }
        if eps * vx.norm() >= inj || eps * vy.norm() >= inj {
            return Err(Error::Domain(format!(
                "rescaled tangent vectors must stay inside the injectivity radius {inj}"
            )));
        }
        let scale = |v: &TangentVector| TangentVector {
            base: v.base,
            components: [eps * v.components[0], eps * v.components[1]],
        };
        let px = exp_map(desc, x0, &scale(vx));
        let py = exp_map(desc, x0, &scale(vy));
        let d = geodesic_distance(desc, &px, &py);
        if !(d > 0.0) {
            return Err(Error::Domain(
                "rescaled pair collapsed to the diagonal".into(),
            ));
        }
        // deviation of the rescaled kernel from the Euclidean limit profile,
        // written as a ratio so the flat pure-fractional case cancels exactly
        let reference = NegPow::new(npow).eval(sep);
        let dev = (eps.powf(npow) * ker.eval(d) / reference - 1.0).abs();
        worst = worst.max(dev);
    }
    Ok(worst)
}
