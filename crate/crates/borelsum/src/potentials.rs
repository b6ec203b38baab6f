//! Coefficients `V(x, ε) = Σ V_k(x) ε^k` analytic in the vertical strip
//! `{|Re x| < strip_halfwidth}`, evaluable at complex arguments, with decay
//! metadata, plus the pendulum and Mathieu reductions to standard form.

use num_complex::Complex64;
use std::fmt::Write as _;
use std::sync::Arc;
use thiserror::Error;

/// Shared analytic closure. Implementations must be genuinely analytic in
/// the region they are evaluated on; the solver samples complex arguments.
pub type AnalyticFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("evaluation point {x} outside the analyticity strip (halfwidth {halfwidth})")]
    StripViolation { x: Complex64, halfwidth: f64 },
    #[error("|V({x})| = {magnitude:.3e} exceeds the magnitude cap {cap:.3e}; pole nearby")]
    PoleProximity { x: Complex64, magnitude: f64, cap: f64 },
    #[error("phase map inversion failed: {0}")]
    InversionFailure(String),
    #[error("sigma interval [{lo}, {hi}] touches the singular points ±{alpha}")]
    SingularInterval { lo: f64, hi: f64, alpha: f64 },
    #[error("q(σ) is not positive at σ = {sigma}: q = {q}")]
    NonPositiveQ { sigma: f64, q: f64 },
    #[error("coefficient index {k} out of range (eps_order = {order})")]
    CoefficientIndex { k: usize, order: usize },
}

/// Polynomial with real coefficients, ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.0.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(
            self.0[1..]
                .iter()
                .enumerate()
                .map(|(i, &c)| (i as f64 + 1.0) * c)
                .collect(),
        )
    }
}

/// Ratio of two real-coefficient polynomials.
#[derive(Debug, Clone)]
pub struct Rational {
    pub num: Poly,
    pub den: Poly,
}

impl Rational {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Self {
        Rational { num: Poly(num), den: Poly(den) }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.num.eval(z) / self.den.eval(z)
    }

    /// Derivative by the quotient rule, evaluated pointwise.
    pub fn eval_derivative(&self, z: Complex64) -> Complex64 {
        let n = self.num.eval(z);
        let d = self.den.eval(z);
        let dn = self.num.derivative().eval(z);
        let dd = self.den.derivative().eval(z);
        (dn * d - n * dd) / (d * d)
    }
}

/// One coefficient function V_k.
#[derive(Clone)]
pub enum Coefficient {
    Zero,
    Constant(f64),
    Rational(Rational),
    Pendulum(PendulumPotential),
    Liouville(LiouvillePotential),
    Analytic { tag: String, f: AnalyticFn },
}

impl Coefficient {
    fn eval(&self, x: Complex64) -> Result<Complex64, PotentialError> {
        Ok(match self {
            Coefficient::Zero => Complex64::new(0.0, 0.0),
            Coefficient::Constant(c) => Complex64::new(*c, 0.0),
            Coefficient::Rational(r) => r.eval(x),
            Coefficient::Pendulum(p) => p.eval(x)?,
            Coefficient::Liouville(l) => l.eval(x)?,
            Coefficient::Analytic { f, .. } => f(x),
        })
    }

    fn describe(&self) -> String {
        match self {
            Coefficient::Zero => "zero".into(),
            Coefficient::Constant(c) => format!("constant({c:.17e})"),
            Coefficient::Rational(r) => format!("rational(num={:?},den={:?})", r.num.0, r.den.0),
            Coefficient::Pendulum(p) => format!("pendulum({})", p.tag),
            Coefficient::Liouville(_) => "liouville".into(),
            Coefficient::Analytic { tag, .. } => format!("analytic({tag})"),
        }
    }
}

/// A potential `V(x, ε) = Σ_{k ≤ eps_order} V_k(x) ε^k` with decay metadata.
#[derive(Clone)]
pub struct Potential {
    coeffs: Vec<Coefficient>,
    pub strip_halfwidth: f64,
    pub decay_k: f64,
    pub decay_delta: f64,
    pub eps_b: f64,
    pub reality: bool,
    /// |V| above this raises PoleProximity.
    pub magnitude_cap: f64,
    /// height |Im x| up to which evaluation is certified; audits clamp to
    /// it and solvers reject domains that need more
    pub im_height: f64,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Potential({})", self.descriptor())
    }
}

impl Potential {
    pub fn new(coeffs: Vec<Coefficient>) -> Self {
        assert!(!coeffs.is_empty());
        Potential {
            coeffs,
            strip_halfwidth: 1.0,
            decay_k: 1.0,
            decay_delta: 1.0,
            eps_b: 1.0,
            reality: true,
            magnitude_cap: 1e8,
            im_height: f64::INFINITY,
        }
    }

    /// V ≡ 0.
    pub fn zero() -> Self {
        Potential::new(vec![Coefficient::Zero])
    }

    /// V ≡ c. A constant has no decay at infinity, so the decay metadata
    /// certifies the bound on the working region only (|x| ≤ 10).
    pub fn constant(c: f64) -> Self {
        let mut p = Potential::new(vec![Coefficient::Constant(c)]);
        p.decay_k = c.abs() * (11.0f64).powf(1.0 + p.decay_delta);
        p
    }

    /// V(x) = num(x)/den(x) with real coefficients (ascending powers).
    pub fn rational(num: Vec<f64>, den: Vec<f64>) -> Self {
        Potential::new(vec![Coefficient::Rational(Rational::new(num, den))])
    }

    /// The catalog potential V(x) = 1/(x² − 4): poles at ±2, outside the
    /// strip, decay exponent δ = 1.
    pub fn catalog_rational() -> Self {
        let mut p = Potential::rational(vec![1.0], vec![-4.0, 0.0, 1.0]);
        p.decay_delta = 1.0;
        p.decay_k = 2.0;
        p
    }

    /// ε-dependent catalog potential V(x, ε) = (1 + ε)/(x² − 4).
    pub fn catalog_rational_eps() -> Self {
        let r = Rational::new(vec![1.0], vec![-4.0, 0.0, 1.0]);
        let mut p = Potential::new(vec![
            Coefficient::Rational(r.clone()),
            Coefficient::Rational(r),
        ]);
        p.decay_delta = 1.0;
        p.decay_k = 2.0;
        p.eps_b = 1.0;
        p
    }

    pub fn eps_order(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn check_strip(&self, x: Complex64) -> Result<(), PotentialError> {
        // tolerance-widened strip check
        if x.re.abs() > self.strip_halfwidth * (1.0 + 1e-9) + 1e-12 {
            return Err(PotentialError::StripViolation { x, halfwidth: self.strip_halfwidth });
        }
        Ok(())
    }

    /// V_k(x) for one coefficient index.
    pub fn eval_coeff(&self, k: usize, x: Complex64) -> Result<Complex64, PotentialError> {
        self.check_strip(x)?;
        let c = self
            .coeffs
            .get(k)
            .ok_or(PotentialError::CoefficientIndex { k, order: self.eps_order() })?;
        let v = c.eval(x)?;
        if v.norm() > self.magnitude_cap {
            return Err(PotentialError::PoleProximity { x, magnitude: v.norm(), cap: self.magnitude_cap });
        }
        Ok(v)
    }

    /// The summed potential V(x, ε).
    pub fn eval(&self, x: Complex64, eps: f64) -> Result<Complex64, PotentialError> {
        self.check_strip(x)?;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut ep = 1.0;
        for c in &self.coeffs {
            acc += c.eval(x)? * ep;
            ep *= eps;
        }
        if acc.norm() > self.magnitude_cap {
            return Err(PotentialError::PoleProximity { x, magnitude: acc.norm(), cap: self.magnitude_cap });
        }
        Ok(acc)
    }

    /// Worst value of |V_k(x)| (1+|x|)^{1+δ} B^{−k} over a logarithmic sweep
    /// of |Im x| up to `im_max` at several Re x inside the strip. A potential
    /// passes the decay audit when this does not exceed `decay_k`.
    pub fn decay_audit(&self, im_max: f64) -> Result<f64, PotentialError> {
        let im_max = im_max.min(self.im_height);
        let mut worst: f64 = 0.0;
        let res = [0.0, 0.35 * self.strip_halfwidth, 0.7 * self.strip_halfwidth];
        let n_im = 25;
        for k in 0..=self.eps_order() {
            let bk = if k == 0 { 1.0 } else { self.eps_b.powi(k as i32) };
            for &re in &res {
                for j in 0..=n_im {
                    let im = if j == 0 {
                        0.0
                    } else {
                        im_max * (10f64).powf(-3.0 + 3.0 * j as f64 / n_im as f64)
                    };
                    for sgn in [1.0, -1.0] {
                        let x = Complex64::new(re, sgn * im);
                        let v = self.eval_coeff(k, x)?;
                        let ratio = v.norm() * (1.0 + x.norm()).powf(1.0 + self.decay_delta) / bk;
                        worst = worst.max(ratio);
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Sets decay_k to the audited worst ratio over the given region.
    pub fn fit_decay(&mut self, im_max: f64) -> Result<(), PotentialError> {
        self.decay_k = self.decay_audit(im_max)?;
        Ok(())
    }

    /// Whether single evaluations are costly (phase-map or change-of-variable
    /// inversions); solvers tabulate such coefficients per grid.
    pub fn expensive_eval(&self) -> bool {
        self.coeffs
            .iter()
            .any(|c| matches!(c, Coefficient::Pendulum(_) | Coefficient::Liouville(_)))
    }

    /// Canonical text used for potential hashes in reports and checkpoints.
    pub fn descriptor(&self) -> String {
        let mut s = String::new();
        for (k, c) in self.coeffs.iter().enumerate() {
            let _ = write!(s, "V{k}={};", c.describe());
        }
        let _ = write!(
            s,
            "hw={};K={};delta={};B={};real={}",
            self.strip_halfwidth, self.decay_k, self.decay_delta, self.eps_b, self.reality
        );
        s
    }
}

// ---------------------------------------------------------------------------
// Pendulum reduction
// ---------------------------------------------------------------------------

/// Frequency profile of the parametrically driven oscillator
/// `d²x/dt² + ω(εt)² x = 0`, with its first two derivatives and, when
/// available in closed form, the phase antiderivative `Ω(u) = ∫₀ᵘ ω`.
#[derive(Clone)]
pub struct PendulumSpec {
    pub omega: AnalyticFn,
    pub d_omega: AnalyticFn,
    pub dd_omega: AnalyticFn,
    /// Closed-form Ω when known; enables Newton inversion of the phase map.
    pub phase: Option<AnalyticFn>,
    /// Working real u-interval; ω must be bounded away from 0 there.
    pub u_range: (f64, f64),
    pub tag: String,
}

impl PendulumSpec {
    /// ω(u) = a + b sin u (catalog). Requires a > |b|.
    pub fn sine_frequency(a: f64, b: f64) -> Self {
        PendulumSpec {
            omega: Arc::new(move |u| Complex64::new(a, 0.0) + u.sin() * b),
            d_omega: Arc::new(move |u| u.cos() * b),
            dd_omega: Arc::new(move |u| -u.sin() * b),
            phase: Some(Arc::new(move |u| u * a + (Complex64::new(1.0, 0.0) - u.cos()) * b)),
            u_range: (-3.0, 3.0),
            tag: format!("sine({a},{b})"),
        }
    }

    /// ω ≡ 1: the transformed potential vanishes identically.
    pub fn constant_frequency() -> Self {
        PendulumSpec {
            omega: Arc::new(|_| Complex64::new(1.0, 0.0)),
            d_omega: Arc::new(|_| Complex64::new(0.0, 0.0)),
            dd_omega: Arc::new(|_| Complex64::new(0.0, 0.0)),
            phase: Some(Arc::new(|u| u)),
            u_range: (-3.0, 3.0),
            tag: "constant".into(),
        }
    }

    /// ω(u) = e^u (catalog test case with closed-form phase e^u − 1).
    pub fn exp_frequency() -> Self {
        PendulumSpec {
            omega: Arc::new(|u| u.exp()),
            d_omega: Arc::new(|u| u.exp()),
            dd_omega: Arc::new(|u| u.exp()),
            phase: Some(Arc::new(|u| u.exp() - 1.0)),
            u_range: (-1.5, 1.5),
            tag: "exp".into(),
        }
    }
}

/// Transformed potential V(τ) = ω''/(2ω³) − (3/4) ω'²/ω⁴ evaluated at
/// u = u(τ), so the oscillator reads f'' + (λ² − V(τ)) f = 0 in the phase
/// variable τ = ∫₀ᵘ ω.
#[derive(Clone)]
pub struct PendulumPotential {
    spec: PendulumSpec,
    tag: String,
}

impl PendulumPotential {
    /// (u, ω(u), ω'(u)) at the phase point τ; the frame data needed to map
    /// oscillator states between the original and normalized variables.
    pub fn frame(&self, tau: Complex64) -> Result<(Complex64, Complex64, Complex64), PotentialError> {
        let u = self.invert_phase(tau)?;
        Ok((u, (self.spec.omega)(u), (self.spec.d_omega)(u)))
    }

    pub fn eval(&self, tau: Complex64) -> Result<Complex64, PotentialError> {
        let u = self.invert_phase(tau)?;
        let w = (self.spec.omega)(u);
        let dw = (self.spec.d_omega)(u);
        let ddw = (self.spec.dd_omega)(u);
        let w2 = w * w;
        let w3 = w2 * w;
        let w4 = w2 * w2;
        Ok(ddw / (w3 * 2.0) - dw * dw * 0.75 / w4)
    }

    /// Inverts τ = Ω(u). On the real axis this is a safeguarded Newton /
    /// bisection on the monotone phase map; complex τ is reached by marching
    /// du/dτ = 1/ω(u) in the imaginary direction from the real-axis anchor,
    /// with Newton polish against Ω when it is available in closed form.
    pub fn invert_phase(&self, tau: Complex64) -> Result<Complex64, PotentialError> {
        let u_real = self.invert_real(tau.re)?;
        if tau.im == 0.0 {
            return Ok(u_real);
        }
        // march upward/downward in Im τ
        let n_steps = (tau.im.abs() / 0.25).ceil().max(1.0) as usize;
        let dz = Complex64::new(0.0, tau.im / n_steps as f64);
        let mut u = u_real;
        for _ in 0..n_steps {
            // RK4 for du/dτ = 1/ω(u) along the segment dz
            let f = |u: Complex64| 1.0 / (self.spec.omega)(u);
            let k1 = f(u);
            let k2 = f(u + k1 * dz * 0.5);
            let k3 = f(u + k2 * dz * 0.5);
            let k4 = f(u + k3 * dz);
            u += (k1 + (k2 + k3) * 2.0 + k4) * dz / 6.0;
        }
        if let Some(phase) = &self.spec.phase {
            // Newton polish to machine precision
            for _ in 0..8 {
                let r = phase(u) - tau;
                let w = (self.spec.omega)(u);
                if w.norm() < 1e-12 {
                    return Err(PotentialError::InversionFailure(format!(
                        "ω vanishes near u = {u} while inverting τ = {tau}"
                    )));
                }
                let step = r / w;
                u -= step;
                if step.norm() < 1e-14 {
                    break;
                }
            }
            let resid = (phase(u) - tau).norm();
            if resid > 1e-9 * (1.0 + tau.norm()) {
                return Err(PotentialError::InversionFailure(format!(
                    "Newton residual {resid:.3e} at τ = {tau}"
                )));
            }
        }
        Ok(u)
    }

    fn phase_real(&self, u: f64) -> f64 {
        if let Some(phase) = &self.spec.phase {
            return phase(Complex64::new(u, 0.0)).re;
        }
        // quadrature of ω from 0 to u
        crate::quad::integrate_gl(
            |s| (self.spec.omega)(Complex64::new(s, 0.0)),
            0.0,
            u,
            24,
        )
        .re
    }

    fn invert_real(&self, tau: f64) -> Result<Complex64, PotentialError> {
        // bracket τ on the monotone phase map
        let mut lo = self.spec.u_range.0.min(0.0);
        let mut hi = self.spec.u_range.1.max(0.0);
        for _ in 0..60 {
            if self.phase_real(lo) <= tau {
                break;
            }
            lo = lo * 2.0 - 1.0;
        }
        for _ in 0..60 {
            if self.phase_real(hi) >= tau {
                break;
            }
            hi = hi * 2.0 + 1.0;
        }
        if self.phase_real(lo) > tau || self.phase_real(hi) < tau {
            return Err(PotentialError::InversionFailure(format!(
                "phase map not monotone or τ = {tau} out of reach on [{lo}, {hi}]"
            )));
        }
        // safeguarded Newton with bisection fallback
        let mut u = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.phase_real(u) - tau;
            if f.abs() < 1e-14 * (1.0 + tau.abs()) {
                break;
            }
            if f > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let w = (self.spec.omega)(Complex64::new(u, 0.0)).re;
            let newton = if w.abs() > 1e-12 { u - f / w } else { f64::NAN };
            u = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (hi - lo).abs() < 1e-15 * (1.0 + u.abs()) {
                break;
            }
        }
        let resid = (self.phase_real(u) - tau).abs();
        if resid > 1e-9 * (1.0 + tau.abs()) {
            return Err(PotentialError::InversionFailure(format!(
                "real inversion residual {resid:.3e} at τ = {tau}"
            )));
        }
        Ok(Complex64::new(u, 0.0))
    }
}

/// Builds the standard-form potential for the parametrically driven
/// oscillator: V(τ) = ω''/(2ω³) − (3/4)ω'²/ω⁴ composed with u(τ).
pub fn pendulum_to_standard(spec: PendulumSpec) -> Result<Potential, PotentialError> {
    // ω must be bounded away from zero on the working interval
    let (lo, hi) = spec.u_range;
    for i in 0..=64 {
        let u = lo + (hi - lo) * i as f64 / 64.0;
        let w = (spec.omega)(Complex64::new(u, 0.0));
        if w.norm() < 1e-8 {
            return Err(PotentialError::InversionFailure(format!(
                "ω vanishes at u = {u} inside the working interval"
            )));
        }
    }
    let tag = spec.tag.clone();
    let pot = PendulumPotential { spec, tag: tag.clone() };
    // The τ-strip reachable through the working u-interval.
    let reach = pot.phase_real(lo).abs().max(pot.phase_real(hi).abs());
    let mut p = Potential::new(vec![Coefficient::Pendulum(pot)]);
    p.reality = true;
    p.strip_halfwidth = reach;
    Ok(p)
}

// ---------------------------------------------------------------------------
// Mathieu reduction
// ---------------------------------------------------------------------------

/// Parameters of `ε² ḧ − (a cos 2x + b) h = 0` after the substitution
/// σ = α cos 2x.
#[derive(Debug, Clone, Copy)]
pub struct MathieuSpec {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    /// Working σ-interval; must stay inside (−α, α).
    pub sigma_range: (f64, f64),
}

/// Coefficient pair (q, r) with the transformed equation
/// `ε² f'' + (q(σ) + ε² r(σ)) f = 0`,
/// q = (2aσ + bα) / (4α(α² − σ²)), r = (2α² + σ²) / (4(α² − σ²)²).
pub fn mathieu_to_standard(spec: &MathieuSpec) -> Result<(Rational, Rational), PotentialError> {
    let al = spec.alpha;
    let (lo, hi) = spec.sigma_range;
    if lo <= -al || hi >= al || lo >= hi {
        return Err(PotentialError::SingularInterval { lo, hi, alpha: al });
    }
    let q = Rational::new(
        vec![spec.b * al, 2.0 * spec.a],
        vec![4.0 * al * al * al, 0.0, -4.0 * al],
    );
    let r = Rational::new(
        vec![2.0 * al * al, 0.0, 1.0],
        vec![4.0 * al.powi(4), 0.0, -8.0 * al * al, 0.0, 4.0],
    );
    Ok((q, r))
}

// ---------------------------------------------------------------------------
// Liouville normalization
// ---------------------------------------------------------------------------

/// Potential produced by the change of variable z = ∫√q dσ, f = q^{−1/4} g,
/// which maps ε²f'' + (q + ε²r)f = 0 to g'' + (λ² − V(z))g = 0 with
/// V = −r/q − S,   S = −q''/(4q²) + (5/16) q'²/q³.
#[derive(Clone)]
pub struct LiouvillePotential {
    q: Rational,
    r: Rational,
    sigma_range: (f64, f64),
    sigma_anchor: f64,
    /// dense table of (σ, z(σ)) on the working interval for inversion seeds
    table: Arc<Vec<(f64, f64)>>,
}

impl LiouvillePotential {
    fn z_of_sigma_real(&self, sigma: f64) -> f64 {
        crate::quad::integrate_gl(
            |s| self.q.eval(Complex64::new(s, 0.0)).sqrt(),
            self.sigma_anchor,
            sigma,
            32,
        )
        .re
    }

    /// σ(z) by Newton on the monotone map z(σ), seeded from the table;
    /// complex z is handled by analytic Newton continuation.
    fn sigma_of_z(&self, z: Complex64) -> Result<Complex64, PotentialError> {
        // seed: nearest table entry by Re z
        let mut best = self.table[0];
        for &(s, zz) in self.table.iter() {
            if (zz - z.re).abs() < (best.1 - z.re).abs() {
                best = (s, zz);
            }
        }
        let mut sigma = Complex64::new(best.0, 0.0);
        for _ in 0..60 {
            let zc = self.z_of_sigma(sigma);
            let dz = self.q.eval(sigma).sqrt();
            let step = (zc - z) / dz;
            sigma -= step;
            if step.norm() < 1e-14 * (1.0 + sigma.norm()) {
                break;
            }
        }
        let resid = (self.z_of_sigma(sigma) - z).norm();
        if resid > 1e-9 * (1.0 + z.norm()) {
            return Err(PotentialError::InversionFailure(format!(
                "Liouville inversion residual {resid:.3e} at z = {z}"
            )));
        }
        Ok(sigma)
    }

    fn z_of_sigma(&self, sigma: Complex64) -> Complex64 {
        // contour integral along real axis to Re σ, then vertically
        let re_part = self.z_of_sigma_real(sigma.re);
        let vertical = crate::quad::integrate_gl(
            |t| {
                let s = Complex64::new(sigma.re, t);
                self.q.eval(s).sqrt()
            },
            0.0,
            sigma.im,
            24,
        ) * Complex64::new(0.0, 1.0);
        Complex64::new(re_part, 0.0) + vertical
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64, PotentialError> {
        let sigma = self.sigma_of_z(z)?;
        let q = self.q.eval(sigma);
        let r = self.r.eval(sigma);
        let qp = self.q.eval_derivative(sigma);
        let qpp = derivative2(&self.q, sigma);
        let s_term = -qpp / (q * q * 4.0) + qp * qp * (5.0 / 16.0) / (q * q * q);
        Ok(-(r / q) - s_term)
    }

    /// Map σ ↦ z on the real working interval (for back-substitution tests).
    pub fn z_at(&self, sigma: f64) -> f64 {
        self.z_of_sigma_real(sigma)
    }

    pub fn q_at(&self, sigma: f64) -> f64 {
        self.q.eval(Complex64::new(sigma, 0.0)).re
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.z_of_sigma_real(self.sigma_range.0), self.z_of_sigma_real(self.sigma_range.1))
    }
}

fn derivative2(r: &Rational, z: Complex64) -> Complex64 {
    // second derivative of a rational function via derivatives of num/den
    let n = r.num.eval(z);
    let d = r.den.eval(z);
    let n1 = r.num.derivative().eval(z);
    let d1 = r.den.derivative().eval(z);
    let n2 = r.num.derivative().derivative().eval(z);
    let d2 = r.den.derivative().derivative().eval(z);
    // (n/d)'' = (n''d² - 2n'd'd - nd''d + 2nd'²)/d³
    (n2 * d * d - n1 * d1 * d * 2.0 - n * d2 * d + n * d1 * d1 * 2.0) / (d * d * d)
}

/// Liouville-normalizes ε²f'' + (q + ε²r)f = 0 into g'' + (λ² − V)g = 0.
/// The anchor z = 0 is placed at the center of the σ-interval.
pub fn liouville_normalize(
    q: Rational,
    r: Rational,
    sigma_range: (f64, f64),
) -> Result<Potential, PotentialError> {
    let (lo, hi) = sigma_range;
    assert!(hi > lo);
    for i in 0..=64 {
        let s = lo + (hi - lo) * i as f64 / 64.0;
        let qv = q.eval(Complex64::new(s, 0.0)).re;
        if qv <= 0.0 {
            return Err(PotentialError::NonPositiveQ { sigma: s, q: qv });
        }
    }
    let anchor = 0.5 * (lo + hi);
    let mut lp = LiouvillePotential {
        q,
        r,
        sigma_range,
        sigma_anchor: anchor,
        table: Arc::new(Vec::new()),
    };
    let mut table = Vec::with_capacity(129);
    for i in 0..=128 {
        let s = lo + (hi - lo) * i as f64 / 128.0;
        table.push((s, lp.z_of_sigma_real(s)));
    }
    lp.table = Arc::new(table);
    let (z_lo, z_hi) = lp.z_range();
    let mut p = Potential::new(vec![Coefficient::Liouville(lp)]);
    p.reality = true;
    // the change of variables is certified on the image of the real
    // σ-interval with a modest analytic margin above it
    p.strip_halfwidth = z_lo.abs().max(z_hi.abs()) * (1.0 + 1e-9);
    p.im_height = 0.2 * (z_hi - z_lo).abs();
    Ok(p)
}

/// Convenience accessor for tests: the Liouville coefficient of a potential
/// built by [`liouville_normalize`].
pub fn liouville_part(p: &Potential) -> Option<&LiouvillePotential> {
    match p.coeffs.first() {
        Some(Coefficient::Liouville(l)) => Some(l),
        _ => None,
    }
}

/// The pendulum coefficient of a potential built by [`pendulum_to_standard`].
pub fn pendulum_part(p: &Potential) -> Option<&PendulumPotential> {
    match p.coeffs.first() {
        Some(Coefficient::Pendulum(pp)) => Some(pp),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rational_catalog_values() {
        let p = Potential::catalog_rational();
        // V(0) = -1/4
        let v = p.eval(Complex64::new(0.0, 0.0), 0.0).unwrap();
        assert_relative_eq!(v.re, -0.25, max_relative = 1e-15);
        assert_eq!(v.im, 0.0);
        // V(i) = 1/(i² - 4) = -1/5
        let v = p.eval(Complex64::new(0.0, 1.0), 0.0).unwrap();
        assert_relative_eq!(v.re, -0.2, max_relative = 1e-15);
        assert!(v.im.abs() < 1e-16);
    }

    #[test]
    fn strip_violation_raised() {
        let p = Potential::catalog_rational();
        let err = p.eval(Complex64::new(1.5, 0.0), 0.0).unwrap_err();
        assert!(matches!(err, PotentialError::StripViolation { .. }));
    }

    #[test]
    fn pole_proximity_raised() {
        let mut p = Potential::rational(vec![1.0], vec![0.0, 1.0]); // 1/x, pole inside strip
        p.magnitude_cap = 1e6;
        let err = p.eval(Complex64::new(0.0, 1e-9), 0.0).unwrap_err();
        assert!(matches!(err, PotentialError::PoleProximity { .. }));
    }

    #[test]
    fn decay_audit_catalog() {
        // |V| ≤ K (1+|x|)^{-1-δ} with δ=1 along the imaginary sweep,
        // including |x| = 1000 as a far probe.
        let p = Potential::catalog_rational();
        let worst = p.decay_audit(1000.0).unwrap();
        assert!(worst <= p.decay_k, "worst ratio {worst} exceeds {}", p.decay_k);
        // spot value at x = 1000i
        let v = p.eval(Complex64::new(0.0, 1000.0), 0.0).unwrap();
        assert!(v.norm() <= p.decay_k * (1.0 + 1000.0f64).powf(-2.0));
    }

    #[test]
    fn reality_on_real_axis() {
        let p = Potential::catalog_rational();
        for i in 0..20 {
            let x = -0.9 + 0.09 * i as f64;
            let v = p.eval(Complex64::new(x, 0.0), 0.0).unwrap();
            assert!(v.im.abs() < 1e-14);
            // Schwarz reflection at complex points
            let z = Complex64::new(x, 0.4);
            let v1 = p.eval(z, 0.0).unwrap();
            let v2 = p.eval(z.conj(), 0.0).unwrap();
            assert_relative_eq!(v1.re, v2.re, max_relative = 1e-13);
            assert_relative_eq!(v1.im, -v2.im, max_relative = 1e-13);
        }
    }

    #[test]
    fn pendulum_constant_frequency_gives_zero() {
        let p = pendulum_to_standard(PendulumSpec::constant_frequency()).unwrap();
        for tau in [-0.5, 0.0, 0.8] {
            let v = p.eval(Complex64::new(tau, 0.0), 0.0).unwrap();
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn pendulum_exp_frequency_spot_values() {
        // ω = e^u: at τ = 0, u = 0 and V = 1/2 − 3/4 = −1/4.
        let p = pendulum_to_standard(PendulumSpec::exp_frequency()).unwrap();
        let v = p.eval(Complex64::new(0.0, 0.0), 0.0).unwrap();
        assert_relative_eq!(v.re, -0.25, epsilon = 1e-11);
        // At u = 1 (τ = e − 1): V = −(1/4) e^{−2}.
        let tau = 1f64.exp() - 1.0;
        let v = p.eval(Complex64::new(tau, 0.0), 0.0).unwrap();
        assert_relative_eq!(v.re, -0.25 * (-2.0f64).exp(), epsilon = 1e-11);
    }

    #[test]
    fn pendulum_sine_finite_on_axis() {
        // ω = 2 + sin u ≥ 1 everywhere: V(τ) finite on the whole axis.
        let p = pendulum_to_standard(PendulumSpec::sine_frequency(2.0, 1.0)).unwrap();
        for i in 0..=40 {
            let tau = -4.0 + 8.0 * i as f64 / 40.0;
            let v = p.eval(Complex64::new(tau, 0.0), 0.0).unwrap();
            assert!(v.norm() < 2.0, "unexpectedly large V({tau}) = {v}");
            assert!(v.im.abs() < 1e-10);
        }
    }

    #[test]
    fn pendulum_complex_inversion_consistent() {
        // Ω(u(τ)) = τ off the real axis, and the two inversion routes agree.
        let p = pendulum_to_standard(PendulumSpec::sine_frequency(2.0, 1.0)).unwrap();
        let pend = match &p.coeffs[0] {
            Coefficient::Pendulum(p) => p.clone(),
            _ => unreachable!(),
        };
        let phase = pend.spec.phase.clone().unwrap();
        for &(re, im) in &[(0.3, 0.5), (-0.6, 1.8), (0.0, 2.4), (0.8, 0.1)] {
            let tau = Complex64::new(re, im);
            let u = pend.invert_phase(tau).unwrap();
            assert!((phase(u) - tau).norm() < 1e-11);
        }
    }

    #[test]
    fn mathieu_coefficient_values() {
        // a=0, b=4α²: q(0) = 4α²·α/(4α·α²) = 1
        let spec = MathieuSpec { a: 0.0, b: 4.0, alpha: 1.0, sigma_range: (-0.5, 0.5) };
        let (q, _r) = mathieu_to_standard(&spec).unwrap();
        assert_relative_eq!(q.eval(Complex64::new(0.0, 0.0)).re, 1.0, max_relative = 1e-15);

        // a=1, b=0, α=1, σ=1/2: q = 1/3
        let spec = MathieuSpec { a: 1.0, b: 0.0, alpha: 1.0, sigma_range: (0.1, 0.6) };
        let (q, _r) = mathieu_to_standard(&spec).unwrap();
        assert_relative_eq!(
            q.eval(Complex64::new(0.5, 0.0)).re,
            1.0 / 3.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn mathieu_singular_interval_rejected() {
        let spec = MathieuSpec { a: 1.0, b: 0.5, alpha: 1.0, sigma_range: (0.0, 1.0) };
        assert!(matches!(
            mathieu_to_standard(&spec),
            Err(PotentialError::SingularInterval { .. })
        ));
        // q and r diverge approaching ±α
        let spec = MathieuSpec { a: 1.0, b: 0.5, alpha: 1.0, sigma_range: (0.0, 0.9) };
        let (q, r) = mathieu_to_standard(&spec).unwrap();
        let near = Complex64::new(0.999999, 0.0);
        assert!(q.eval(near).norm() > 1e4);
        assert!(r.eval(near).norm() > 1e8);
    }

    #[test]
    fn liouville_identity_and_constant_shift() {
        // q ≡ 1, r ≡ 0: V ≡ 0 and z = σ (anchored at the interval center).
        let p = liouville_normalize(
            Rational::new(vec![1.0], vec![1.0]),
            Rational::new(vec![0.0], vec![1.0]),
            (-1.0, 1.0),
        )
        .unwrap();
        let lp = liouville_part(&p).unwrap();
        assert_relative_eq!(lp.z_at(0.5), 0.5, epsilon = 1e-13);
        let v = p.eval(Complex64::new(0.3, 0.0), 0.0).unwrap();
        assert!(v.norm() < 1e-12);

        // q ≡ 1, r ≡ c: the normalized equation carries V = −c.
        let c = 0.7;
        let p = liouville_normalize(
            Rational::new(vec![1.0], vec![1.0]),
            Rational::new(vec![c], vec![1.0]),
            (-1.0, 1.0),
        )
        .unwrap();
        let v = p.eval(Complex64::new(0.2, 0.0), 0.0).unwrap();
        assert_relative_eq!(v.re, -c, epsilon = 1e-12);
    }

    #[test]
    fn liouville_quadratic_q_closed_form() {
        // q = (1+σ)², r ≡ 0: z = σ + σ²/2 − z₀ and V(z) = −(3/4)(1+σ)^{-4}.
        let p = liouville_normalize(
            Rational::new(vec![1.0, 2.0, 1.0], vec![1.0]),
            Rational::new(vec![0.0], vec![1.0]),
            (-0.5, 0.5),
        )
        .unwrap();
        let lp = liouville_part(&p).unwrap();
        let z = lp.z_at(0.3);
        assert_relative_eq!(z, 0.3 + 0.045, epsilon = 1e-12); // anchor at σ=0
        let v = p.eval(Complex64::new(z, 0.0), 0.0).unwrap();
        assert_relative_eq!(v.re, -0.75 / (1.3f64).powi(4), epsilon = 1e-10);
    }

    #[test]
    fn nonpositive_q_rejected() {
        let err = liouville_normalize(
            Rational::new(vec![0.0, 1.0], vec![1.0]), // q = σ, nonpositive at σ ≤ 0
            Rational::new(vec![0.0], vec![1.0]),
            (-0.5, 0.5),
        )
        .unwrap_err();
        assert!(matches!(err, PotentialError::NonPositiveQ { .. }));
    }

    #[test]
    fn eps_coefficient_access() {
        let p = Potential::catalog_rational_eps();
        assert_eq!(p.eps_order(), 1);
        let x = Complex64::new(0.3, 0.2);
        let v0 = p.eval_coeff(0, x).unwrap();
        let v1 = p.eval_coeff(1, x).unwrap();
        assert_relative_eq!((v0 - v1).norm(), 0.0, epsilon = 1e-16);
        let eps = 0.05;
        let v = p.eval(x, eps).unwrap();
        assert_relative_eq!((v - v0 * (1.0 + eps)).norm(), 0.0, epsilon = 1e-15);
        assert!(matches!(
            p.eval_coeff(2, x),
            Err(PotentialError::CoefficientIndex { .. })
        ));
    }
}
