//! Laplace resummation of transform-plane data into actual solutions φ±,
//! and the algebra of summable series in the t-plane: convolution and the
//! multiplicative inverse via the convolution fixed point G = 1 − F*G.

use crate::goursat::{GoursatError, PsiEvaluator};
use crate::interp::interp_uniform;
use crate::quad::{gauss_legendre, integrate_panels, laplace_panels};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SummationError {
    #[error("λ = {lambda} is not above the fitted exponential type ν = {nu:.3}")]
    AbscissaViolation { lambda: f64, nu: f64 },
    #[error("convolution fixed point not contracting (ratio {ratio:.3} after {iters} iterations)")]
    NoContraction { ratio: f64, iters: usize },
    #[error("t-grids incompatible: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Field(#[from] GoursatError),
}

/// Samples of an exponentially bounded function on a uniform grid [0, T],
/// with the fitted exponential type `nu_bound` (|f| ≤ M e^{ν t}).
#[derive(Debug, Clone)]
pub struct BorelFunction {
    pub t_max: f64,
    pub values: Vec<Complex64>,
    pub nu_bound: f64,
    pub m_bound: f64,
}

impl BorelFunction {
    pub fn from_fn<F: Fn(f64) -> Complex64>(f: F, t_max: f64, n: usize) -> Self {
        assert!(n >= 8 && t_max > 0.0);
        let values: Vec<Complex64> = (0..n)
            .map(|i| f(t_max * i as f64 / (n - 1) as f64))
            .collect();
        let mut b = BorelFunction { t_max, values, nu_bound: 0.0, m_bound: 0.0 };
        let (m, nu) = b.fit_exponential_type();
        b.nu_bound = nu;
        b.m_bound = m;
        b
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn t(&self, i: usize) -> f64 {
        self.t_max * i as f64 / (self.n() - 1) as f64
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let ft = (t / self.t_max).clamp(0.0, 1.0) * (self.n() - 1) as f64;
        interp_uniform(&self.values, ft, 6)
    }

    /// Least-squares fit of log|f| ≈ log M + ν t over the grid (envelope
    /// samples only, so oscillation does not bias ν low).
    pub fn fit_exponential_type(&self) -> (f64, f64) {
        let mut pts = Vec::new();
        for i in 0..self.n() {
            let a = self.values[i].norm();
            if a > 1e-290 {
                pts.push((self.t(i), a.ln()));
            }
        }
        if pts.len() < 2 {
            return (0.0, 0.0);
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let icept = (sy - slope * sx) / n;
        // envelope correction: shift M so the bound covers every sample
        let mut log_m = icept;
        for (t, y) in &pts {
            log_m = log_m.max(y - slope * t);
        }
        (log_m.exp(), slope)
    }

    /// ∫₀ᵀ e^{−λt} f(t) dt by composite Gauss–Legendre panels clustered
    /// near t = 0.
    pub fn laplace(&self, lambda: f64) -> Complex64 {
        let panels = laplace_panels(lambda, self.t_max);
        integrate_panels(|t| self.eval(t) * (-lambda * t).exp(), &panels, 16)
    }
}

/// Result of one Laplace quadrature with its truncation-tail budget.
#[derive(Debug, Clone, Copy)]
pub struct LaplaceResult {
    pub value: Complex64,
    /// M e^{(ν−λ)T}/(λ−ν), the bound on the discarded [T, ∞) tail
    pub tail_bound: f64,
}

/// φ₊(x; λ) = λ ∫₀ᵀ e^{−λt} Ψ(x, t) dt, with the tail bound from the
/// field's fitted exponential type.
pub fn laplace_quadrature(
    psi: &PsiEvaluator,
    x: f64,
    lambda: f64,
    t_max: f64,
) -> Result<LaplaceResult, SummationError> {
    // fit the exponential type along this x-line
    let probe = BorelFunction::from_fn(
        |t| psi.psi(x, t).unwrap_or(Complex64::new(0.0, 0.0)),
        t_max,
        96,
    );
    if lambda <= probe.nu_bound {
        return Err(SummationError::AbscissaViolation { lambda, nu: probe.nu_bound });
    }
    let panels = laplace_panels(lambda, t_max);
    let mut err: Option<GoursatError> = None;
    let value = integrate_panels(
        |t| match psi.psi(x, t) {
            Ok(v) => v * (-lambda * t).exp(),
            Err(e) => {
                err = Some(e);
                Complex64::new(0.0, 0.0)
            }
        },
        &panels,
        16,
    ) * lambda;
    if let Some(e) = err {
        return Err(e.into());
    }
    let tail = probe.m_bound * ((probe.nu_bound - lambda) * t_max).exp() / (lambda - probe.nu_bound);
    Ok(LaplaceResult { value, tail_bound: tail * lambda })
}

fn laplace_of_derivative(
    psi: &PsiEvaluator,
    x: f64,
    lambda: f64,
    t_max: f64,
) -> Result<Complex64, SummationError> {
    let panels = laplace_panels(lambda, t_max);
    let mut err: Option<GoursatError> = None;
    let value = integrate_panels(
        |t| match psi.psi_x(x, t) {
            Ok(v) => v * (-lambda * t).exp(),
            Err(e) => {
                err = Some(e);
                Complex64::new(0.0, 0.0)
            }
        },
        &panels,
        16,
    ) * lambda;
    match err {
        Some(e) => Err(e.into()),
        None => Ok(value),
    }
}

/// The resummed basis at one λ: φ±, and the derivative combinations
/// A = φ₊′ + iλφ₊, B = φ₋′ − iλφ₋, sampled on the x-grid.
#[derive(Debug, Clone)]
pub struct SolutionPair {
    pub lambda: f64,
    pub x_samples: Vec<f64>,
    pub phi_plus: Vec<Complex64>,
    pub phi_minus: Vec<Complex64>,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    /// max tail bound over the grid (reported error budget)
    pub tail_bound: f64,
    /// max |φ₋ − conj φ₊| when an independent minus field was supplied,
    /// else 0 (conjugation path)
    pub conjugacy_residual: f64,
}

impl SolutionPair {
    /// Wronskian-type determinant φ₊B − φ₋A at sample i; analytically
    /// constant in x.
    pub fn wronskian(&self, i: usize) -> Complex64 {
        self.phi_plus[i] * self.b[i] - self.phi_minus[i] * self.a[i]
    }

    /// ψ(x_i) = C₁ e^{iλx} φ₊ + C₂ e^{−iλx} φ₋ and its derivative.
    pub fn assemble(&self, i: usize, c1: Complex64, c2: Complex64) -> (Complex64, Complex64) {
        let x = self.x_samples[i];
        let ep = Complex64::new(0.0, self.lambda * x).exp();
        let em = Complex64::new(0.0, -self.lambda * x).exp();
        let psi = c1 * ep * self.phi_plus[i] + c2 * em * self.phi_minus[i];
        let dpsi = c1 * ep * self.a[i] + c2 * em * self.b[i];
        (psi, dpsi)
    }
}

/// Builds the pair from the plus field, by conjugation when the potential is
/// real on the axis (the default), or from an independently solved minus
/// field when supplied.
pub fn build_solution_pair(
    plus: &PsiEvaluator,
    minus: Option<&PsiEvaluator>,
    lambda: f64,
    t_max: f64,
    xs: &[f64],
) -> Result<SolutionPair, SummationError> {
    let i_lam = Complex64::new(0.0, lambda);
    let mut phi_plus = Vec::with_capacity(xs.len());
    let mut phi_minus = Vec::with_capacity(xs.len());
    let mut a = Vec::with_capacity(xs.len());
    let mut b = Vec::with_capacity(xs.len());
    let mut tail: f64 = 0.0;
    let mut conj_resid: f64 = 0.0;
    for &x in xs {
        let lp = laplace_quadrature(plus, x, lambda, t_max)?;
        let dp = laplace_of_derivative(plus, x, lambda, t_max)?;
        let fp = lp.value;
        let ap = dp + i_lam * fp;
        let (fm, bm) = match minus {
            None => (fp.conj(), ap.conj()),
            Some(mf) => {
                let lm = laplace_quadrature(mf, x, lambda, t_max)?;
                let dm = laplace_of_derivative(mf, x, lambda, t_max)?;
                let fm = lm.value;
                conj_resid = conj_resid.max((fm - fp.conj()).norm());
                (fm, dm - i_lam * fm)
            }
        };
        tail = tail.max(lp.tail_bound);
        phi_plus.push(fp);
        phi_minus.push(fm);
        a.push(ap);
        b.push(bm);
    }
    Ok(SolutionPair {
        lambda,
        x_samples: xs.to_vec(),
        phi_plus,
        phi_minus,
        a,
        b,
        tail_bound: tail,
        conjugacy_residual: conj_resid,
    })
}

/// (F*G)(t) = ∫₀ᵗ F(q) G(t−q) dq = t ∫₀¹ F(αt) G((1−α)t) dα on the common
/// grid; the exponential type of the product is bounded by the larger input
/// type.
pub fn convolve(f: &BorelFunction, g: &BorelFunction) -> Result<BorelFunction, SummationError> {
    if (f.t_max - g.t_max).abs() > 1e-12 || f.n() != g.n() {
        return Err(SummationError::GridMismatch(format!(
            "t_max {} vs {}, n {} vs {}",
            f.t_max,
            g.t_max,
            f.n(),
            g.n()
        )));
    }
    let (gn, gw) = gauss_legendre(20);
    let n = f.n();
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    for (i, slot) in values.iter_mut().enumerate() {
        let t = f.t(i);
        if t == 0.0 {
            continue;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, w) in gn.iter().zip(&gw) {
            let alpha = 0.5 * (x + 1.0);
            acc += f.eval(alpha * t) * g.eval((1.0 - alpha) * t) * (0.5 * w);
        }
        *slot = acc * t;
    }
    let mut out = BorelFunction { t_max: f.t_max, values, nu_bound: 0.0, m_bound: 0.0 };
    let (m, nu) = out.fit_exponential_type();
    out.m_bound = m;
    out.nu_bound = nu.max(f.nu_bound.max(g.nu_bound));
    Ok(out)
}

/// Weighted norm sup (A+t)² |f| e^{−νt} of the inverse iteration.
fn weighted_norm(f: &BorelFunction, a_weight: f64, nu: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..f.n() {
        let t = f.t(i);
        let w = (a_weight + t).powi(2) * f.values[i].norm() * (-nu * t).exp();
        worst = worst.max(w);
    }
    worst
}

/// Default weight A for the inverse iteration: max(10, 2·𝒞) with the
/// contraction constant 𝒞 measured from one convolution of F with itself
/// (‖F*F‖ ≤ (𝒞/A)‖F‖² in the A-weighted norm).
pub fn default_a_weight(f: &BorelFunction) -> Result<f64, SummationError> {
    let ff = convolve(f, f)?;
    let a_probe = 1.0;
    let nu = 1.0;
    let nf = weighted_norm(f, a_probe, nu);
    if nf == 0.0 {
        return Ok(10.0);
    }
    let c_est = a_probe * weighted_norm(&ff, a_probe, nu) / (nf * nf);
    Ok((2.0 * c_est).max(10.0))
}

/// Solves G = 1 − F*G by successive substitution, monitored in the
/// (A+t)²-weighted norm; A and ν are escalated when the ratio stalls.
/// G is the transform of the multiplicative inverse: 𝓛G·(1 + 𝓛F) = 1/λ.
pub fn borel_inverse(
    f: &BorelFunction,
    a_weight: f64,
    nu: f64,
    tol: f64,
) -> Result<BorelFunction, SummationError> {
    let mut a_weight = a_weight;
    let mut nu = nu;
    let one = BorelFunction {
        t_max: f.t_max,
        values: vec![Complex64::new(1.0, 0.0); f.n()],
        nu_bound: 0.0,
        m_bound: 1.0,
    };
    let mut g = one.clone();
    let mut prev_diff = f64::INFINITY;
    let mut stalls = 0usize;
    let mut escalations = 0usize;
    for iter in 0..200 {
        let fg = convolve(f, &g)?;
        let mut next = one.clone();
        for (v, c) in next.values.iter_mut().zip(&fg.values) {
            *v -= c;
        }
        let mut diff_fn = next.clone();
        for (d, old) in diff_fn.values.iter_mut().zip(&g.values) {
            *d -= old;
        }
        let diff = weighted_norm(&diff_fn, a_weight, nu);
        let base = weighted_norm(&one, a_weight, nu).max(1e-300);
        g = next;
        if diff <= tol * base {
            let (m, nb) = g.fit_exponential_type();
            g.m_bound = m;
            g.nu_bound = nb;
            return Ok(g);
        }
        if diff >= 0.98 * prev_diff {
            stalls += 1;
            if stalls >= 3 {
                if escalations < 4 {
                    a_weight *= 2.0;
                    nu *= 2.0;
                    escalations += 1;
                    stalls = 0;
                } else {
                    return Err(SummationError::NoContraction {
                        ratio: diff / prev_diff,
                        iters: iter + 1,
                    });
                }
            }
        } else {
            stalls = 0;
        }
        prev_diff = diff;
    }
    Err(SummationError::NoContraction { ratio: 1.0, iters: 200 })
}

/// |𝓛G (1 + 𝓛F) − 1/λ|: the self-certification residual of the inverse.
pub fn inverse_certificate(f: &BorelFunction, g: &BorelFunction, lambda: f64) -> f64 {
    let lf = f.laplace(lambda);
    let lg = g.laplace(lambda);
    (lg * (Complex64::new(1.0, 0.0) + lf) - Complex64::new(1.0 / lambda, 0.0)).norm()
}
