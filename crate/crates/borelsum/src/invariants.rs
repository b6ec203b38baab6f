//! The exact invariant C = C₁C₂ from the determinant formula
//!
//!   C₁ e^{iλx} = |ψ φ₋; ψ′ B| / W,   C₂ e^{−iλx} = |φ₊ ψ; A ψ′| / W,
//!   W = |φ₊ φ₋; A B|,
//!
//! evaluated against the resummed basis, with constancy diagnostics along x.

use crate::summation::SolutionPair;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InvariantError {
    #[error("degenerate basis determinant |W| = {w:.3e} below threshold {threshold:.3e} at x = {x}")]
    DegenerateWronskian { x: f64, w: f64, threshold: f64 },
    #[error("state grid has {state} samples but the basis carries {basis}")]
    LengthMismatch { state: usize, basis: usize },
    #[error("the sample grid does not contain x = 0")]
    MissingOrigin,
}

/// Comparison of C against a leading-order prediction (pendulum runs).
#[derive(Debug, Clone, Serialize)]
pub struct LeadingComparison {
    pub c_leading: f64,
    pub difference: f64,
}

/// Pointwise invariant data and its constancy statistics.
#[derive(Debug, Clone, Serialize)]
pub struct InvariantReport {
    pub lambda: f64,
    pub x_samples: Vec<f64>,
    pub c1: Vec<Complex64>,
    pub c2: Vec<Complex64>,
    pub c: Vec<Complex64>,
    /// max |C(x) − median C| / |median C|
    pub drift: f64,
    /// max |C(x) − median C| (useful when |C| is near-degenerate)
    pub drift_abs: f64,
    /// median of max(|C₁|, |C₂|)²: the bilinear state scale C is conditioned
    /// against
    pub state_scale: f64,
    /// max relative drift of the basis determinant W along x
    pub wronskian_drift: f64,
    pub leading_comparison: Option<LeadingComparison>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn complex_median(vs: &[Complex64]) -> Complex64 {
    Complex64::new(
        median(vs.iter().map(|z| z.re).collect()),
        median(vs.iter().map(|z| z.im).collect()),
    )
}

/// Evaluates the three determinants per sample and assembles the report.
/// `psi`/`dpsi` are the state values on the pair's x-grid.
pub fn compute_c(
    pair: &SolutionPair,
    psi: &[Complex64],
    dpsi: &[Complex64],
) -> Result<InvariantReport, InvariantError> {
    let n = pair.x_samples.len();
    if psi.len() != n || dpsi.len() != n {
        return Err(InvariantError::LengthMismatch { state: psi.len(), basis: n });
    }
    let mut c1 = Vec::with_capacity(n);
    let mut c2 = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut scales = Vec::with_capacity(n);
    for i in 0..n {
        let x = pair.x_samples[i];
        let fp = pair.phi_plus[i];
        let fm = pair.phi_minus[i];
        let a = pair.a[i];
        let b = pair.b[i];
        let w = fp * b - fm * a;
        let threshold = 1e-8 * (fp * a).norm().max((fm * b).norm());
        if w.norm() < threshold {
            return Err(InvariantError::DegenerateWronskian { x, w: w.norm(), threshold });
        }
        let n1 = psi[i] * b - dpsi[i] * fm;
        let n2 = fp * dpsi[i] - a * psi[i];
        let ep = Complex64::new(0.0, pair.lambda * x).exp();
        let c1x = n1 / w / ep;
        let c2x = n2 / w * ep;
        scales.push(c1x.norm().max(c2x.norm()).powi(2));
        c.push(c1x * c2x);
        c1.push(c1x);
        c2.push(c2x);
    }
    let med = complex_median(&c);
    let drift_abs = c.iter().map(|z| (z - med).norm()).fold(0.0, f64::max);
    let drift = drift_abs / med.norm().max(1e-300);
    let w0 = pair.wronskian(0);
    let wronskian_drift = (0..n)
        .map(|i| (pair.wronskian(i) - w0).norm())
        .fold(0.0, f64::max)
        / w0.norm().max(1e-300);
    Ok(InvariantReport {
        lambda: pair.lambda,
        x_samples: pair.x_samples.clone(),
        c1,
        c2,
        c,
        drift,
        drift_abs,
        state_scale: median(scales),
        wronskian_drift,
        leading_comparison: None,
    })
}

/// Solves the 2×2 system [φ₊(0), φ₋(0); A(0), B(0)] (C₁,C₂)ᵀ = (ψ₀, ψ₀′)ᵀ.
pub fn decompose(
    pair: &SolutionPair,
    psi0: Complex64,
    dpsi0: Complex64,
) -> Result<(Complex64, Complex64), InvariantError> {
    let i0 = pair
        .x_samples
        .iter()
        .position(|&x| x.abs() < 1e-12)
        .ok_or(InvariantError::MissingOrigin)?;
    let fp = pair.phi_plus[i0];
    let fm = pair.phi_minus[i0];
    let a = pair.a[i0];
    let b = pair.b[i0];
    let w = fp * b - fm * a;
    let threshold = 1e-8 * (fp * a).norm().max((fm * b).norm());
    if w.norm() < threshold {
        return Err(InvariantError::DegenerateWronskian { x: 0.0, w: w.norm(), threshold });
    }
    let c1 = (psi0 * b - fm * dpsi0) / w;
    let c2 = (fp * dpsi0 - psi0 * a) / w;
    Ok((c1, c2))
}

/// Leading adiabatic form E/(2ω²) with E = ½(ẋ² + ω²x²).
pub fn pendulum_leading(x_dot: f64, x_val: f64, omega: f64) -> f64 {
    0.5 * (x_dot * x_dot + omega * omega * x_val * x_val) / (2.0 * omega * omega)
}
