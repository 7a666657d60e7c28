//! Compensated summation and the deterministic parallel reduction used by
//! every N^2 pair sum in the crate.
//!
//! Pair sums are split into fixed row blocks; each block accumulates its
//! partial with Neumaier compensation, block partials are collected in block
//! order and folded sequentially. The reduction tree therefore does not
//! depend on the number of worker threads and results are bit-reproducible.

use rayon::prelude::*;

/// Kahan–Babuška–Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of `term(i)` for `i in 0..n`.
pub fn sum_indexed<F: Fn(usize) -> f64>(n: usize, term: F) -> f64 {
    let mut acc = Neumaier::new();
    for i in 0..n {
        acc.add(term(i));
    }
    acc.value()
}

const ROW_BLOCK: usize = 128;

/// Deterministic parallel reduction over rows `0..n`.
///
/// `row` must return the (compensated) partial for one row. Rows are grouped
/// into fixed blocks of 128, block partials are computed in parallel and
/// folded in block order.
pub fn par_row_sum<F>(n: usize, row: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    if n == 0 {
        return 0.0;
    }
    let blocks = n.div_ceil(ROW_BLOCK);
    let partials: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * ROW_BLOCK;
            let hi = ((b + 1) * ROW_BLOCK).min(n);
            let mut acc = Neumaier::new();
            for i in lo..hi {
                acc.add(row(i));
            }
            acc.value()
        })
        .collect();
    let mut acc = Neumaier::new();
    for p in partials {
        acc.add(p);
    }
    acc.value()
}

/// Negative power d^{-a} with fast paths for the exponents that occur as
/// kernel exponents n + ps on the supported manifolds.
#[derive(Debug, Clone, Copy)]
pub struct NegPow {
    exponent: f64,
    kind: PowKind,
}

#[derive(Debug, Clone, Copy)]
enum PowKind {
    One,
    OneAndHalf,
    Two,
    TwoAndHalf,
    Three,
    General,
}

impl NegPow {
    pub fn new(exponent: f64) -> Self {
        let kind = if exponent == 1.0 {
            PowKind::One
        } else if exponent == 1.5 {
            PowKind::OneAndHalf
        } else if exponent == 2.0 {
            PowKind::Two
        } else if exponent == 2.5 {
            PowKind::TwoAndHalf
        } else if exponent == 3.0 {
            PowKind::Three
        } else {
            PowKind::General
        };
        Self { exponent, kind }
    }

    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        match self.kind {
            PowKind::One => 1.0 / d,
            PowKind::OneAndHalf => 1.0 / (d * d.sqrt()),
            PowKind::Two => 1.0 / (d * d),
            PowKind::TwoAndHalf => 1.0 / (d * d * d.sqrt()),
            PowKind::Three => 1.0 / (d * d * d),
            PowKind::General => d.powf(-self.exponent),
        }
    }
}

/// |t|^p with fast paths for p = 2 and p = 3.
#[inline]
pub fn abs_pow(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        t * t
    } else if p == 3.0 {
        let a = t.abs();
        a * a * a
    } else {
        t.abs().powf(p)
    }
}

/// |t|^{p-2} t, the odd power appearing in p-Laplacian pairings.
/// Zero at t = 0 for every p > 1, including p < 2 where the bare power
/// formula would produce inf * 0.
#[inline]
pub fn signed_pow(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        t
    } else if p == 3.0 {
        t.abs() * t
    } else if t == 0.0 {
        0.0
    } else {
        t.abs().powf(p - 2.0) * t
    }
}

/// Ordinary least-squares slope of y against x.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    num / den
}
