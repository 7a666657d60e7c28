//! Numerical toolkit for fractional Sobolev machinery on compact manifolds:
//! singular-kernel energies on quadrature grids, test-function (bubble)
//! asymptotics, estimation of the optimal Sobolev constant, and variational
//! solution of nonlocal equations
//!
//! ```text
//!     L_K u + h |u|^{p-2} u = f |u|^{q-2} u
//! ```
//!
//! by constrained minimization with subcritical continuation q -> p*.
//!
//! Modules
//! - [`manifold`]: grids on S^1, T^n (n = 1, 2) and S^2, geodesic distances,
//!   exp/log maps, partitions of unity.
//! - [`kernel`]: the model kernel family d^{-(n+ps)} [+ d^{-alpha}] and
//!   numerical axiom checkers.
//! - [`sobolev`]: Gagliardo seminorms, kernel energies, L^q norms, localized
//!   norm comparison.
//! - [`bubbles`]: the extremal profile U, its concentration on a manifold,
//!   scaling sweeps and the Euclidean best-constant estimator.
//! - [`solver`]: the constrained variational solver and q -> p* continuation.
//!
//! All pair sums are compensated and reduced over a fixed block tree, so
//! results are reproducible bit-for-bit regardless of thread count.

pub mod bubbles;
pub mod error;
pub mod fields;
pub mod kernel;
pub mod manifold;
pub mod numerics;
pub mod sobolev;
pub mod solver;

pub use error::{Error, Result};
