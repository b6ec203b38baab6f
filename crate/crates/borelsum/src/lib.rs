//! Resummation of divergent large-frequency series for `ψ'' + (λ² − V(x,ε))ψ = 0`
//! into actual solutions, and exact adiabatic invariants built from them.
//!
//! The pipeline:
//!
//! 1. [`potentials`] constructs strip-analytic coefficients `V(x, ε)` with
//!    verified decay bounds (catalog, pendulum and Mathieu reductions).
//! 2. [`goursat`] solves the characteristic-coordinate fixed point
//!    `Φ = J(Φ)` by Picard iteration on a discretized complex-x × t domain,
//!    producing the transform-plane function `Ψ(x, t)`.
//! 3. [`summation`] turns `Ψ` into solutions `φ±(x; λ)` by Laplace quadrature
//!    and provides the convolution algebra of summable series.
//! 4. [`invariants`] evaluates the determinant formula `C = C₁C₂` and checks
//!    that it is constant in `x`.
//! 5. [`formal`] computes the divergent series itself (recursion in `1/λ`)
//!    for cross-checks against the transform route.
//! 6. [`singularity`] handles branch-point coefficients `V = x^{−β}V₁(x)` and
//!    fits the nonanalytic exponent of `Φ` at `t = 0`.
//! 7. [`oracle`] is the independent ground truth: direct high-accuracy ODE
//!    integration in `x`.
//!
//! File formats (run configuration, checkpoints, reports) live in [`config`],
//! [`checkpoint`] and [`report`]; the end-to-end checks behind `borelsum verify`
//! are in [`acceptance`].

pub mod acceptance;
pub mod checkpoint;
pub mod config;
pub mod formal;
pub mod goursat;
pub mod interp;
pub mod invariants;
pub mod oracle;
pub mod potentials;
pub mod quad;
pub mod report;
pub mod series;
pub mod singularity;
pub mod summation;

pub use num_complex::Complex64;

/// Version string stamped into report headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
