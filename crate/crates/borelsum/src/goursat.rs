//! The numerical core: Picard iteration for the characteristic-coordinate
//! fixed point Φ = J(Φ) (and its ε-dependent extension) on a discretized
//! complex-x × t domain, yielding the transform-plane function Ψ(x, t).
//!
//! Geometry. With s = −2ix + t the problem data live on t = 0 and on the
//! diagonal s = t (x = 0), and
//!
//!   J(Φ)(s,t) = t + ¼ ∫₀ᵗ ∫ₜˢ V(i(s₁−t₁)/2) Φ(s₁,t₁) ds₁ dt₁
//!             = t + ¼ t(s−t) ∫₀¹∫₀¹ V[(1−α)x + i(1−β)t/2] Φ[s₁(α), βt] dα dβ.
//!
//! In x-coordinates the V-argument and the Φ-argument share the same point
//! x′ = (1−α)x + i(1−β)t/2, t′ = βt. Writing x = ξ + iη (η ≥ 0 into the
//! relevant half-plane), the quantity σ = η + t/2 never increases along the
//! recursion, so the simplex {σ ≤ T/2} is dependency-closed while the
//! (ξ, η, t) box is not. Samples are therefore stored on the box
//! (ξ, η, ρ) ∈ [−ξ̂, ξ̂] × [0, T/2] × [0, 1] with t = ρ²(T − 2η): the map is
//! bijective onto the simplex, every characteristic evaluation point stays
//! inside, and the ρ² grading clusters t-resolution where the Laplace
//! transform concentrates mass.

use crate::interp::{lagrange4, lagrange6, stencil_base};
use crate::potentials::{Potential, PotentialError};
use crate::quad::gauss_legendre;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GoursatError {
    #[error("interpolation point (ξ={xi:.4}, η={eta:.4}, t={t:.4}) escapes the sampled domain")]
    DomainEscape { xi: f64, eta: f64, t: f64 },
    #[error("no contraction: successive-difference ratio {ratio:.3} after {iters} iterations (ν escalated {escalations} times)")]
    NoContraction { ratio: f64, iters: usize, escalations: usize },
    #[error("fixed point not reached in {0} iterations")]
    MaxIterExceeded(usize),
    #[error("domain invalid: {0}")]
    BadDomain(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Which dressed exponential the field belongs to: the `Plus` field feeds
/// φ₊ (x continued into the upper half-plane), `Minus` feeds φ₋.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    #[inline]
    pub fn sigma(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }
}

/// Interpolation stencil width used for off-grid field values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpOrder {
    /// 2-point (trilinear) fallback
    Linear,
    /// 4-point (tricubic), the classical choice
    Cubic,
    /// 6-point; default, needed for the tightest field tolerances
    Order6,
}

impl InterpOrder {
    #[inline]
    pub fn width(self) -> usize {
        match self {
            InterpOrder::Linear => 2,
            InterpOrder::Cubic => 4,
            InterpOrder::Order6 => 6,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            InterpOrder::Linear => "trilinear",
            InterpOrder::Cubic => "tricubic",
            InterpOrder::Order6 => "order-6",
        }
    }
}

/// Discretization of the solver box (ξ, η, ρ) with t = ρ²(T − 2η).
#[derive(Debug, Clone, PartialEq)]
pub struct GoursatDomain {
    /// half-width of the real-x interval; must stay below 1 (and inside the
    /// potential strip)
    pub xi_halfspan: f64,
    /// number of ξ nodes (odd, so ξ = 0 is a node)
    pub n_xi: usize,
    /// t-axis truncation T
    pub t_max: f64,
    /// number of η nodes on [0, T/2]
    pub n_eta: usize,
    /// number of ρ nodes on [0, 1]
    pub n_rho: usize,
    /// tensor Gauss–Legendre order for the (α, β) unit-square integrals
    pub quad_order: usize,
    pub interp: InterpOrder,
}

impl GoursatDomain {
    /// Default discretization for a given T (from λ_min via T = 3 + 40/λ).
    pub fn standard(t_max: f64) -> Self {
        GoursatDomain {
            xi_halfspan: 0.85,
            n_xi: 35,
            t_max,
            n_eta: 41,
            n_rho: 69,
            quad_order: 12,
            interp: InterpOrder::Order6,
        }
    }

    /// T = 3 + 40/λ_min keeps the Laplace tail e^{−λT} below 1e−12 at the
    /// smallest queried λ, with margin.
    pub fn t_axis_for(lambda_min: f64) -> f64 {
        3.0 + 40.0 / lambda_min
    }

    /// Scales all three grid step counts by `factor` (> 1 refines).
    pub fn refined(&self, factor: f64) -> Self {
        let scale = |n: usize| -> usize {
            let m = (((n - 1) as f64) * factor).round() as usize + 1;
            if m % 2 == 0 {
                m + 1
            } else {
                m
            }
        };
        GoursatDomain {
            n_xi: scale(self.n_xi),
            n_eta: scale(self.n_eta),
            n_rho: scale(self.n_rho),
            ..self.clone()
        }
    }

    pub fn validate(&self, p: &Potential) -> Result<(), GoursatError> {
        if !(self.xi_halfspan > 0.0 && self.xi_halfspan < 1.0) {
            return Err(GoursatError::BadDomain(format!(
                "xi_halfspan {} must lie in (0, 1)",
                self.xi_halfspan
            )));
        }
        if self.xi_halfspan > p.strip_halfwidth {
            return Err(GoursatError::BadDomain(format!(
                "xi_halfspan {} exceeds the potential strip {}",
                self.xi_halfspan, p.strip_halfwidth
            )));
        }
        if 0.5 * self.t_max > p.im_height * (1.0 + 1e-12) {
            return Err(GoursatError::BadDomain(format!(
                "domain needs |Im x| up to {} but the potential is certified to {}",
                0.5 * self.t_max,
                p.im_height
            )));
        }
        if self.n_xi % 2 == 0 || self.n_xi < 7 || self.n_eta < 7 || self.n_rho < 7 {
            return Err(GoursatError::BadDomain(
                "need odd n_xi ≥ 7 and n_eta, n_rho ≥ 7".into(),
            ));
        }
        if !(self.t_max > 0.0) {
            return Err(GoursatError::BadDomain("t_max must be positive".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn xi(&self, i: usize) -> f64 {
        -self.xi_halfspan + 2.0 * self.xi_halfspan * i as f64 / (self.n_xi - 1) as f64
    }

    #[inline]
    pub fn eta(&self, j: usize) -> f64 {
        0.5 * self.t_max * j as f64 / (self.n_eta - 1) as f64
    }

    #[inline]
    pub fn rho(&self, m: usize) -> f64 {
        m as f64 / (self.n_rho - 1) as f64
    }

    /// t at a grid node.
    #[inline]
    pub fn t_node(&self, j: usize, m: usize) -> f64 {
        let rho = self.rho(m);
        rho * rho * (self.t_max - 2.0 * self.eta(j))
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.n_xi * self.n_eta * self.n_rho
    }

    #[inline]
    fn index(&self, i: usize, j: usize, m: usize) -> usize {
        (i * self.n_eta + j) * self.n_rho + m
    }

    pub fn descriptor(&self) -> String {
        format!(
            "xi={}x{};T={};eta={};rho={};gl={};interp={}",
            self.xi_halfspan,
            self.n_xi,
            self.t_max,
            self.n_eta,
            self.n_rho,
            self.quad_order,
            self.interp.label()
        )
    }
}

/// Complex samples of Φ on the solver box, stored in x-coordinates via the
/// bijection s = −2ix + t (σ-branch aware).
#[derive(Debug, Clone)]
pub struct GridField {
    pub domain: GoursatDomain,
    pub branch: Branch,
    pub values: Vec<Complex64>,
    /// weight of the norm used by the Picard monitor
    pub norm_nu: f64,
}

impl GridField {
    /// The seed iterate Φ₀ = t (satisfies both boundary rows exactly).
    pub fn seed(domain: GoursatDomain, branch: Branch) -> Self {
        let mut values = vec![Complex64::new(0.0, 0.0); domain.node_count()];
        for i in 0..domain.n_xi {
            for j in 0..domain.n_eta {
                for m in 0..domain.n_rho {
                    values[domain.index(i, j, m)] = Complex64::new(domain.t_node(j, m), 0.0);
                }
            }
        }
        GridField { domain, branch, values, norm_nu: 0.0 }
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize, m: usize) -> Complex64 {
        self.values[self.domain.index(i, j, m)]
    }

    /// sup over the grid of |Φ| e^{−νt}.
    pub fn weighted_norm(&self, nu: f64) -> f64 {
        let d = &self.domain;
        let mut worst: f64 = 0.0;
        for i in 0..d.n_xi {
            for j in 0..d.n_eta {
                for m in 0..d.n_rho {
                    let t = d.t_node(j, m);
                    let w = self.values[d.index(i, j, m)].norm() * (-nu * t).exp();
                    worst = worst.max(w);
                }
            }
        }
        worst
    }

    /// Interpolated Φ at (ξ, η, t). Points must lie in the sampled box up
    /// to roundoff slack.
    pub fn interp(&self, xi: f64, eta: f64, t: f64) -> Result<Complex64, GoursatError> {
        let d = &self.domain;
        let slack = 1e-9;
        let h_xi = 2.0 * d.xi_halfspan / (d.n_xi - 1) as f64;
        let h_eta = 0.5 * d.t_max / (d.n_eta - 1) as f64;
        let h_rho = 1.0 / (d.n_rho - 1) as f64;
        let fx = (xi + d.xi_halfspan) / h_xi;
        let t_span = d.t_max - 2.0 * eta;
        if !(0.0 - slack..=(d.n_xi - 1) as f64 + slack).contains(&fx)
            || eta < -slack
            || eta > 0.5 * d.t_max + slack
            || t < -slack
            || t > t_span * (1.0 + slack) + slack
        {
            return Err(GoursatError::DomainEscape { xi, eta, t });
        }
        let feta = (eta / h_eta).clamp(0.0, (d.n_eta - 1) as f64);
        let rho = if t_span <= 0.0 { 0.0 } else { (t / t_span).max(0.0).sqrt().min(1.0) };
        let frho = (rho / h_rho).clamp(0.0, (d.n_rho - 1) as f64);
        let fx = fx.clamp(0.0, (d.n_xi - 1) as f64);

        let m = d.interp.width();
        let (bx, ux) = stencil_base(fx, d.n_xi, m);
        let (be, ue) = stencil_base(feta, d.n_eta, m);
        let (br, ur) = stencil_base(frho, d.n_rho, m);
        macro_rules! gather {
            ($wf:expr, $w:expr) => {{
                let wx = $wf(ux);
                let we = $wf(ue);
                let wr = $wf(ur);
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..$w {
                    let mut acc_e = Complex64::new(0.0, 0.0);
                    for b in 0..$w {
                        let mut acc_r = Complex64::new(0.0, 0.0);
                        let row = ((bx + a) * d.n_eta + (be + b)) * d.n_rho + br;
                        for (c, wrc) in wr.iter().enumerate() {
                            acc_r += self.values[row + c] * *wrc;
                        }
                        acc_e += acc_r * we[b];
                    }
                    acc += acc_e * wx[a];
                }
                acc
            }};
        }
        Ok(match d.interp {
            InterpOrder::Linear => {
                let lin = |u: f64| [1.0 - u, u];
                gather!(lin, 2)
            }
            InterpOrder::Cubic => gather!(lagrange4, 4),
            InterpOrder::Order6 => gather!(lagrange6, 6),
        })
    }
}

/// Coefficient data for the ε-dependent extension: the correction adds, for
/// each k ≥ 1, the kernel V_k(x′)/(k−1)! acting on the running t-convolution
/// (t^{k−1} * Φ).
#[derive(Debug, Clone, Copy)]
pub struct EpsTerms {
    /// highest ε-order included (k ≤ k_max ≤ eps_order)
    pub k_max: usize,
}

struct QuadPlan {
    alpha: Vec<f64>,
    w_alpha: Vec<f64>,
    beta: Vec<f64>,
    w_beta: Vec<f64>,
}

impl QuadPlan {
    fn new(order: usize) -> Self {
        let (n, w) = gauss_legendre(order);
        // map [-1,1] → [0,1]
        let alpha: Vec<f64> = n.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let w_alpha: Vec<f64> = w.iter().map(|w| 0.5 * w).collect();
        QuadPlan { beta: alpha.clone(), w_beta: w_alpha.clone(), alpha, w_alpha }
    }
}

/// Coefficient samples at every (node, quadrature-point) argument. The
/// arguments do not move between Picard sweeps, so one table per solve
/// amortizes expensive evaluators (phase-map inversions in particular).
struct VCache {
    /// layout: (flat_node * quad² + (a*order+b)) * k_count + k
    values: Vec<Complex64>,
    k_count: usize,
    quad_sq: usize,
}

impl VCache {
    fn build(
        p: &Potential,
        d: &GoursatDomain,
        branch: Branch,
        k_max: usize,
        plan: &QuadPlan,
    ) -> Result<Self, GoursatError> {
        let sigma = branch.sigma();
        let order = plan.alpha.len();
        let quad_sq = order * order;
        let k_count = k_max + 1;
        let values: Result<Vec<Complex64>, GoursatError> = (0..d.node_count())
            .into_par_iter()
            .map(|flat| {
                let i = flat / (d.n_eta * d.n_rho);
                let j = (flat / d.n_rho) % d.n_eta;
                let m = flat % d.n_rho;
                let xi = d.xi(i);
                let eta = d.eta(j);
                let t = d.t_node(j, m);
                let mut chunk = vec![Complex64::new(0.0, 0.0); quad_sq * k_count];
                if t == 0.0 {
                    return Ok(chunk);
                }
                for (a, &alpha) in plan.alpha.iter().enumerate() {
                    for (b, &beta) in plan.beta.iter().enumerate() {
                        let xi_p = (1.0 - alpha) * xi;
                        let eta_p = (1.0 - alpha) * eta + 0.5 * (1.0 - beta) * t;
                        let x_arg = Complex64::new(xi_p, sigma * eta_p);
                        for k in 0..k_count {
                            chunk[(a * order + b) * k_count + k] = p.eval_coeff(k, x_arg)?;
                        }
                    }
                }
                Ok(chunk)
            })
            .collect::<Result<Vec<Vec<Complex64>>, GoursatError>>()
            .map(|chunks| chunks.concat());
        Ok(VCache { values: values?, k_count, quad_sq })
    }

    #[inline]
    fn get(&self, flat_node: usize, ab: usize, k: usize) -> Complex64 {
        self.values[(flat_node * self.quad_sq + ab) * self.k_count + k]
    }
}

/// One application of the integral operator: J(f), or its ε-extension when
/// `eps` is set (then `convolutions[k-1]` must hold t^{k−1} * f).
fn apply_operator(
    f: &GridField,
    p: &Potential,
    eps: Option<EpsTerms>,
    convolutions: &[GridField],
    cache: Option<&VCache>,
) -> Result<GridField, GoursatError> {
    let d = f.domain.clone();
    let plan = QuadPlan::new(d.quad_order);
    let order = plan.alpha.len();
    let sigma = f.branch.sigma();
    let k_max = eps.map(|e| e.k_max).unwrap_or(0);
    debug_assert_eq!(convolutions.len(), k_max);
    let inv_fact: Vec<f64> = {
        // 1/(k-1)! for k = 1..=k_max
        let mut v = Vec::with_capacity(k_max);
        let mut f = 1.0;
        for k in 1..=k_max {
            if k > 1 {
                f *= (k - 1) as f64;
            }
            v.push(1.0 / f);
        }
        v
    };

    let values: Result<Vec<Complex64>, GoursatError> = (0..d.node_count())
        .into_par_iter()
        .map(|flat| {
            let i = flat / (d.n_eta * d.n_rho);
            let j = (flat / d.n_rho) % d.n_eta;
            let m = flat % d.n_rho;
            let xi = d.xi(i);
            let eta = d.eta(j);
            let t = d.t_node(j, m);
            if t == 0.0 {
                return Ok(Complex64::new(0.0, 0.0));
            }
            let x = Complex64::new(xi, sigma * eta);
            // t(s−t)/4 with s−t = −2iσ̄x
            let pref = Complex64::new(0.0, -sigma * 0.5) * x * t;
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, &alpha) in plan.alpha.iter().enumerate() {
                let one_m_alpha = 1.0 - alpha;
                for (b, &beta) in plan.beta.iter().enumerate() {
                    let w = plan.w_alpha[a] * plan.w_beta[b];
                    let xi_p = one_m_alpha * xi;
                    let eta_p = one_m_alpha * eta + 0.5 * (1.0 - beta) * t;
                    let t_p = beta * t;
                    let v0 = match cache {
                        Some(c) => c.get(flat, a * order + b, 0),
                        None => p.eval_coeff(0, Complex64::new(xi_p, sigma * eta_p))?,
                    };
                    let mut integrand = v0 * f.interp(xi_p, eta_p, t_p)?;
                    for k in 1..=k_max {
                        let vk = match cache {
                            Some(c) => c.get(flat, a * order + b, k),
                            None => p.eval_coeff(k, Complex64::new(xi_p, sigma * eta_p))?,
                        };
                        integrand +=
                            vk * inv_fact[k - 1] * convolutions[k - 1].interp(xi_p, eta_p, t_p)?;
                    }
                    acc += integrand * w;
                }
            }
            Ok(Complex64::new(t, 0.0) + pref * acc)
        })
        .collect();
    let mut values = values?;
    // boundary data imposed exactly after the sweep
    enforce_boundary(&d, &mut values);
    Ok(GridField { domain: d, branch: f.branch, values, norm_nu: f.norm_nu })
}

fn enforce_boundary(d: &GoursatDomain, values: &mut [Complex64]) {
    // t = 0 plane: Φ = 0
    for i in 0..d.n_xi {
        for j in 0..d.n_eta {
            values[d.index(i, j, 0)] = Complex64::new(0.0, 0.0);
        }
    }
    // x = 0 column (ξ = 0, η = 0): Φ = t
    let i0 = (d.n_xi - 1) / 2;
    for m in 0..d.n_rho {
        values[d.index(i0, 0, m)] = Complex64::new(d.t_node(0, m), 0.0);
    }
}

/// J(f) for an ε-independent potential.
pub fn apply_j(f: &GridField, p: &Potential) -> Result<GridField, GoursatError> {
    apply_operator(f, p, None, &[], None)
}

/// The ε-dependent operator: J(f) plus the convolution corrections for
/// 1 ≤ k ≤ k_max.
pub fn apply_j_eps(f: &GridField, p: &Potential, k_max: usize) -> Result<GridField, GoursatError> {
    let k_max = k_max.min(p.eps_order());
    if k_max == 0 {
        return apply_j(f, p);
    }
    let convs = convolution_fields(f, k_max)?;
    apply_operator(f, p, Some(EpsTerms { k_max }), &convs, None)
}

/// The running t-convolutions W_k = t^{k−1} * Φ, sampled on the same box.
/// At fixed s the convolution slides along the characteristic, which in
/// x-coordinates is the diagonal (η + q/2, t − q): σ is preserved, so every
/// quadrature point stays inside the box.
pub fn convolution_fields(f: &GridField, k_max: usize) -> Result<Vec<GridField>, GoursatError> {
    let d = f.domain.clone();
    let (gn, gw) = gauss_legendre(16);
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let values: Result<Vec<Complex64>, GoursatError> = (0..d.node_count())
            .into_par_iter()
            .map(|flat| {
                let i = flat / (d.n_eta * d.n_rho);
                let j = (flat / d.n_rho) % d.n_eta;
                let m = flat % d.n_rho;
                let xi = d.xi(i);
                let eta = d.eta(j);
                let t = d.t_node(j, m);
                if t == 0.0 {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                // ∫₀ᵗ q^{k−1} Φ(ξ, η + q/2, t − q) dq, two GL panels
                let mut acc = Complex64::new(0.0, 0.0);
                for (lo, hi) in [(0.0, 0.5 * t), (0.5 * t, t)] {
                    let mid = 0.5 * (lo + hi);
                    let half = 0.5 * (hi - lo);
                    for (g, wgt) in gn.iter().zip(&gw) {
                        let q = mid + half * g;
                        let val = f.interp(xi, eta + 0.5 * q, t - q)?;
                        acc += val * (q.powi(k as i32 - 1) * wgt * half);
                    }
                }
                Ok(acc)
            })
            .collect();
        out.push(GridField { domain: d.clone(), branch: f.branch, values: values?, norm_nu: f.norm_nu });
    }
    Ok(out)
}

/// Options of the Picard iteration.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// relative tolerance on the ν-weighted successive difference
    pub tol: f64,
    pub max_iter: usize,
    /// starting ν; None picks 4 ln(1e6)/T
    pub nu: Option<f64>,
    /// ε-orders to include (0 = plain J)
    pub eps_k_max: usize,
    /// resume from this iterate instead of Φ₀ = t
    pub initial: Option<GridField>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-12, max_iter: 60, nu: None, eps_k_max: 0, initial: None }
    }
}

/// Convergence record of a fixed-point solve.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub nu: f64,
    pub nu_escalations: usize,
    /// ‖Φ_{n+1} − Φ_n‖_ν per iteration
    pub differences: Vec<f64>,
    /// successive-difference ratios
    pub ratios: Vec<f64>,
    /// final ‖Φ − J(Φ)‖_ν / ‖Φ₀‖_ν
    pub residual: f64,
    /// ε-truncation tail bound Σ_{k>k_max} k^{3/2}(B/ν)^k, when truncating
    pub truncation_bound: Option<f64>,
    pub interpolation: String,
}

/// Iterates Φ_{n+1} = J(Φ_n) from Φ₀ = t until the ν-weighted successive
/// difference drops below tol·‖Φ₀‖_ν. The iterates do not depend on ν; the
/// weight only drives the stopping monitor, so on a failing ratio ν is
/// escalated (doubled, up to 3 times) before giving up.
pub fn solve_fixed_point(
    p: &Potential,
    domain: &GoursatDomain,
    branch: Branch,
    opts: &SolveOptions,
) -> Result<(GridField, SolveReport), GoursatError> {
    solve_fixed_point_with(p, domain, branch, opts, |_, _| {})
}

/// [`solve_fixed_point`] with a per-iteration observer (checkpoint writers).
pub fn solve_fixed_point_with<F>(
    p: &Potential,
    domain: &GoursatDomain,
    branch: Branch,
    opts: &SolveOptions,
    mut on_iterate: F,
) -> Result<(GridField, SolveReport), GoursatError>
where
    F: FnMut(&GridField, usize),
{
    domain.validate(p)?;
    let mut nu = opts.nu.unwrap_or(4.0 * 1e6f64.ln() / domain.t_max);
    let mut escalations = 0usize;
    let eps_k_max = opts.eps_k_max.min(p.eps_order());

    let mut current = match &opts.initial {
        Some(f) => {
            if f.domain != *domain {
                return Err(GoursatError::BadDomain(
                    "resume field does not match the requested domain".into(),
                ));
            }
            f.clone()
        }
        None => GridField::seed(domain.clone(), branch),
    };
    let norm0 = GridField::seed(domain.clone(), branch).weighted_norm(nu);
    let mut differences = Vec::new();
    let mut ratios = Vec::new();

    // The quadrature arguments are iteration-independent: for expensive
    // evaluators (phase-map inversion) tabulate the coefficients once.
    let table = domain.node_count() * domain.quad_order * domain.quad_order * (eps_k_max + 1);
    let cache = if p.expensive_eval() && table <= 60_000_000 {
        Some(VCache::build(p, domain, branch, eps_k_max, &QuadPlan::new(domain.quad_order))?)
    } else {
        None
    };
    let apply = |f: &GridField| -> Result<GridField, GoursatError> {
        if eps_k_max == 0 {
            apply_operator(f, p, None, &[], cache.as_ref())
        } else {
            let convs = convolution_fields(f, eps_k_max)?;
            apply_operator(f, p, Some(EpsTerms { k_max: eps_k_max }), &convs, cache.as_ref())
        }
    };

    let mut converged = false;
    let mut iterations = 0usize;
    while iterations < opts.max_iter {
        let next = apply(&current)?;
        iterations += 1;
        let diff = diff_norm(&next, &current, nu);
        differences.push(diff);
        if differences.len() >= 2 {
            let prev = differences[differences.len() - 2];
            if prev > 0.0 {
                ratios.push(diff / prev);
            }
        }
        current = next;
        on_iterate(&current, iterations);
        if diff <= opts.tol * norm0.max(1e-300) {
            converged = true;
            break;
        }
        // contraction monitor: persistent ratio ≥ 1 means the weight is too
        // light for the growth in t; escalate ν (the iterates are unchanged)
        if ratios.len() >= 3 && ratios.iter().rev().take(3).all(|r| *r >= 0.98) {
            if escalations < 3 {
                nu *= 2.0;
                escalations += 1;
            } else {
                return Err(GoursatError::NoContraction {
                    ratio: *ratios.last().unwrap(),
                    iters: iterations,
                    escalations,
                });
            }
        }
    }
    if !converged {
        return Err(GoursatError::MaxIterExceeded(opts.max_iter));
    }
    // final fixed-point residual
    let reapplied = apply(&current)?;
    let residual = diff_norm(&reapplied, &current, nu) / norm0.max(1e-300);
    current.norm_nu = nu;

    let truncation_bound = if eps_k_max > 0 && eps_k_max < p.eps_order() {
        Some(eps_tail_bound(p.eps_b, nu, eps_k_max))
    } else {
        None
    };

    Ok((
        current,
        SolveReport {
            iterations,
            nu,
            nu_escalations: escalations,
            differences,
            ratios,
            residual,
            truncation_bound,
            interpolation: domain.interp.label().into(),
        },
    ))
}

/// Σ_{k > k_max} k^{3/2} (B/ν)^k, the tail of the ε-extension estimate.
pub fn eps_tail_bound(b: f64, nu: f64, k_max: usize) -> f64 {
    let q = b / nu;
    if q >= 1.0 {
        return f64::INFINITY;
    }
    let mut acc = 0.0;
    let mut term;
    for k in (k_max + 1)..(k_max + 200) {
        term = (k as f64).powf(1.5) * q.powi(k as i32);
        acc += term;
        if term < 1e-18 * acc.max(1e-300) {
            break;
        }
    }
    acc
}

fn diff_norm(a: &GridField, b: &GridField, nu: f64) -> f64 {
    let d = &a.domain;
    let mut worst: f64 = 0.0;
    for i in 0..d.n_xi {
        for j in 0..d.n_eta {
            for m in 0..d.n_rho {
                let t = d.t_node(j, m);
                let idx = d.index(i, j, m);
                let w = (a.values[idx] - b.values[idx]).norm() * (-nu * t).exp();
                worst = worst.max(w);
            }
        }
    }
    worst
}

/// Empirical Lipschitz ratio of J in the ν-weighted norm, measured on the
/// difference of two perturbed fields (J is affine, so any smooth
/// perturbation pair probes the linear part).
pub fn empirical_contraction_ratio(
    p: &Potential,
    base: &GridField,
    perturbation: &GridField,
    nu: f64,
) -> Result<f64, GoursatError> {
    let mut shifted = base.clone();
    for (v, dv) in shifted.values.iter_mut().zip(&perturbation.values) {
        *v += dv;
    }
    let j_base = apply_j(base, p)?;
    let j_shift = apply_j(&shifted, p)?;
    let num = diff_norm(&j_shift, &j_base, nu);
    let den = diff_norm(&shifted, base, nu);
    Ok(num / den.max(1e-300))
}

// ---------------------------------------------------------------------------
// Recovery of Ψ and its derivative fields on the real axis
// ---------------------------------------------------------------------------

/// Evaluator for Ψ(x, t) = Φ(−2ix + t, t) and Ψ_x on real x, built from the
/// η = 0 plane of a converged field. Ψ_x = −2iΦ_s reduces to the ξ-derivative
/// of the stored plane, taken by 6th-order differences per t-row.
pub struct PsiEvaluator {
    domain: GoursatDomain,
    /// η = 0 plane, [i_xi][m_rho]
    plane: Vec<Complex64>,
    /// ∂Ψ/∂x on the same plane
    plane_dx: Vec<Complex64>,
    pub branch: Branch,
}

impl PsiEvaluator {
    fn plane_index(&self, i: usize, m: usize) -> usize {
        i * self.domain.n_rho + m
    }

    /// Ψ(x, t) for real x.
    pub fn psi(&self, x: f64, t: f64) -> Result<Complex64, GoursatError> {
        self.eval_plane(&self.plane, x, t)
    }

    /// Ψ_x(x, t) for real x.
    pub fn psi_x(&self, x: f64, t: f64) -> Result<Complex64, GoursatError> {
        self.eval_plane(&self.plane_dx, x, t)
    }

    /// Ψ_t(x, t) via the ρ-chain rule (t > 0).
    pub fn psi_t(&self, x: f64, t: f64) -> Result<Complex64, GoursatError> {
        let d = &self.domain;
        let rho = (t / d.t_max).sqrt();
        let dro = 1e-4_f64.min(0.5 * rho).max(1e-6);
        let lo = (rho - dro).max(0.0);
        let hi = (rho + dro).min(1.0);
        let f_lo = self.psi(x, d.t_max * lo * lo)?;
        let f_hi = self.psi(x, d.t_max * hi * hi)?;
        let dpsi_drho = (f_hi - f_lo) / (hi - lo);
        Ok(dpsi_drho / (2.0 * rho * d.t_max))
    }

    fn eval_plane(&self, plane: &[Complex64], x: f64, t: f64) -> Result<Complex64, GoursatError> {
        let d = &self.domain;
        let slack = 1e-9;
        let h_xi = 2.0 * d.xi_halfspan / (d.n_xi - 1) as f64;
        let fx = (x + d.xi_halfspan) / h_xi;
        if !(0.0 - slack..=(d.n_xi - 1) as f64 + slack).contains(&fx)
            || t < -slack
            || t > d.t_max * (1.0 + slack)
        {
            return Err(GoursatError::DomainEscape { xi: x, eta: 0.0, t });
        }
        let rho = (t.max(0.0) / d.t_max).sqrt().min(1.0);
        let fr = rho * (d.n_rho - 1) as f64;
        let m = d.interp.width();
        let (bx, ux) = stencil_base(fx.clamp(0.0, (d.n_xi - 1) as f64), d.n_xi, m);
        let (br, ur) = stencil_base(fr, d.n_rho, m);
        let mut acc = Complex64::new(0.0, 0.0);
        match d.interp {
            InterpOrder::Linear => {
                let wx = [1.0 - ux, ux];
                let wr = [1.0 - ur, ur];
                for (a, wxa) in wx.iter().enumerate() {
                    for (c, wrc) in wr.iter().enumerate() {
                        acc += plane[self.plane_index(bx + a, br + c)] * (wxa * wrc);
                    }
                }
            }
            InterpOrder::Cubic => {
                let wx = lagrange4(ux);
                let wr = lagrange4(ur);
                for (a, wxa) in wx.iter().enumerate() {
                    for (c, wrc) in wr.iter().enumerate() {
                        acc += plane[self.plane_index(bx + a, br + c)] * (wxa * wrc);
                    }
                }
            }
            InterpOrder::Order6 => {
                let wx = lagrange6(ux);
                let wr = lagrange6(ur);
                for (a, wxa) in wx.iter().enumerate() {
                    for (c, wrc) in wr.iter().enumerate() {
                        acc += plane[self.plane_index(bx + a, br + c)] * (wxa * wrc);
                    }
                }
            }
        }
        Ok(acc)
    }
}

/// Extracts the Ψ evaluator (values and x-derivative on the real axis) from
/// a converged field.
pub fn to_psi(f: &GridField) -> PsiEvaluator {
    let d = f.domain.clone();
    let n_xi = d.n_xi;
    let n_rho = d.n_rho;
    let h_xi = 2.0 * d.xi_halfspan / (n_xi - 1) as f64;
    let mut plane = vec![Complex64::new(0.0, 0.0); n_xi * n_rho];
    for i in 0..n_xi {
        for m in 0..n_rho {
            plane[i * n_rho + m] = f.value(i, 0, m);
        }
    }
    let mut plane_dx = vec![Complex64::new(0.0, 0.0); n_xi * n_rho];
    let mut column = vec![Complex64::new(0.0, 0.0); n_xi];
    for m in 0..n_rho {
        for i in 0..n_xi {
            column[i] = plane[i * n_rho + m];
        }
        let deriv = crate::interp::derivative_uniform(&column, h_xi);
        for i in 0..n_xi {
            plane_dx[i * n_rho + m] = deriv[i];
        }
    }
    PsiEvaluator { domain: d, plane, plane_dx, branch: f.branch }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_domain(t_max: f64) -> GoursatDomain {
        GoursatDomain {
            xi_halfspan: 0.85,
            n_xi: 17,
            t_max,
            n_eta: 13,
            n_rho: 21,
            quad_order: 8,
            interp: InterpOrder::Order6,
        }
    }

    #[test]
    fn free_potential_operator_is_data_term() {
        // V ≡ 0: J(f) = t for any f.
        let d = small_domain(4.0);
        let p = Potential::zero();
        let mut f = GridField::seed(d.clone(), Branch::Plus);
        // scribble on the field; the image must not care
        for (k, v) in f.values.iter_mut().enumerate() {
            *v += Complex64::new((k % 7) as f64 * 0.1, -((k % 3) as f64) * 0.2);
        }
        let jf = apply_j(&f, &p).unwrap();
        for i in 0..d.n_xi {
            for j in 0..d.n_eta {
                for m in 0..d.n_rho {
                    let t = d.t_node(j, m);
                    assert!((jf.value(i, j, m) - Complex64::new(t, 0.0)).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn zero_field_maps_to_data_term() {
        let d = small_domain(4.0);
        let p = Potential::catalog_rational();
        let mut f = GridField::seed(d.clone(), Branch::Plus);
        for v in f.values.iter_mut() {
            *v = Complex64::new(0.0, 0.0);
        }
        let jf = apply_j(&f, &p).unwrap();
        for i in (0..d.n_xi).step_by(3) {
            for j in (0..d.n_eta).step_by(2) {
                for m in (0..d.n_rho).step_by(4) {
                    let t = d.t_node(j, m);
                    assert!((jf.value(i, j, m) - Complex64::new(t, 0.0)).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn constant_potential_first_step_closed_form() {
        // V ≡ c, f = t: J(f) = t + (c/8) t² (s − t) = t − (i c/4) x t².
        let c = 0.7;
        let d = small_domain(3.0);
        let p = Potential::constant(c);
        let f = GridField::seed(d.clone(), Branch::Plus);
        let jf = apply_j(&f, &p).unwrap();
        for i in (0..d.n_xi).step_by(2) {
            for j in (0..d.n_eta).step_by(3) {
                for m in (1..d.n_rho).step_by(5) {
                    let t = d.t_node(j, m);
                    let x = Complex64::new(d.xi(i), d.eta(j));
                    let exact =
                        Complex64::new(t, 0.0) + Complex64::new(0.0, -c / 4.0) * x * (t * t);
                    let got = jf.value(i, j, m);
                    // skip nodes pinned by the boundary enforcement
                    if (i == (d.n_xi - 1) / 2 && j == 0) || m == 0 {
                        continue;
                    }
                    assert!(
                        (got - exact).norm() < 1e-12 * (1.0 + exact.norm()),
                        "node ({i},{j},{m}): {got} vs {exact}"
                    );
                }
            }
        }
        // minus branch mirrors the sign through x = ξ − iη
        let fm = GridField::seed(d.clone(), Branch::Minus);
        let jfm = apply_j(&fm, &p).unwrap();
        let (i, j, m) = (3, 4, 7);
        let t = d.t_node(j, m);
        let x = Complex64::new(d.xi(i), -d.eta(j));
        let exact = Complex64::new(t, 0.0) + Complex64::new(0.0, c / 4.0) * x * (t * t);
        assert!((jfm.value(i, j, m) - exact).norm() < 1e-12);
    }

    #[test]
    fn eps_correction_monomial_closed_form() {
        // V₀ ≡ 0, V₁ ≡ 1, f = t: the k = 1 term contains 1 * Φ = t²/2 and
        // J̃(f) = t + (s − t) t³ / 24 = t − i x t³ / 12.
        let d = small_domain(3.0);
        let p = Potential::new(vec![
            crate::potentials::Coefficient::Zero,
            crate::potentials::Coefficient::Constant(1.0),
        ]);
        let f = GridField::seed(d.clone(), Branch::Plus);
        let jf = apply_j_eps(&f, &p, 1).unwrap();
        for (i, j, m) in [(2, 3, 9), (11, 6, 14), (8, 1, 19)] {
            let t = d.t_node(j, m);
            let x = Complex64::new(d.xi(i), d.eta(j));
            let exact = Complex64::new(t, 0.0) + Complex64::new(0.0, -1.0 / 12.0) * x * t.powi(3);
            let got = jf.value(i, j, m);
            assert!(
                (got - exact).norm() < 1e-11 * (1.0 + exact.norm()),
                "node ({i},{j},{m}): {got} vs {exact}"
            );
        }
    }

    #[test]
    fn eps_operator_reduces_to_plain_j() {
        let d = small_domain(3.0);
        let p = Potential::new(vec![
            crate::potentials::Coefficient::Rational(crate::potentials::Rational::new(
                vec![1.0],
                vec![-4.0, 0.0, 1.0],
            )),
            crate::potentials::Coefficient::Zero,
        ]);
        let f = GridField::seed(d.clone(), Branch::Plus);
        let a = apply_j(&f, &p).unwrap();
        let b = apply_j_eps(&f, &p, 1).unwrap();
        for (va, vb) in a.values.iter().zip(&b.values) {
            assert!((va - vb).norm() < 1e-13);
        }
    }

    #[test]
    fn weighted_norm_examples() {
        // f = t on [0, 10] with ν = 1: sup t e^{-t} = e^{-1} near t = 1.
        let mut d = small_domain(10.0);
        d.n_rho = 161; // enough t-resolution near the maximizer
        let f = GridField::seed(d.clone(), Branch::Plus);
        let norm = f.weighted_norm(1.0);
        assert_relative_eq!(norm, (-1.0f64).exp(), epsilon = 1e-3);
        // f ≡ 0 → 0
        let mut z = f.clone();
        for v in z.values.iter_mut() {
            *v = Complex64::new(0.0, 0.0);
        }
        assert_eq!(z.weighted_norm(1.0), 0.0);
        // f = e^{νt} → 1 (attained at every node)
        let nu = 0.7;
        let mut e = f.clone();
        for i in 0..d.n_xi {
            for j in 0..d.n_eta {
                for m in 0..d.n_rho {
                    let t = d.t_node(j, m);
                    e.values[d.index(i, j, m)] = Complex64::new((nu * t).exp(), 0.0);
                }
            }
        }
        assert_relative_eq!(e.weighted_norm(nu), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn free_potential_fixed_point_in_one_iteration() {
        let d = small_domain(4.0);
        let p = Potential::zero();
        let (field, report) = solve_fixed_point(&p, &d, Branch::Plus, &SolveOptions::default()).unwrap();
        assert_eq!(report.iterations, 1);
        for i in 0..d.n_xi {
            for m in 0..d.n_rho {
                let t = d.t_node(0, m);
                assert!((field.value(i, 0, m) - Complex64::new(t, 0.0)).norm() < 1e-15);
            }
        }
        // Ψ ≡ t, Ψ_x ≡ 0, Ψ_t ≡ 1
        let psi = to_psi(&field);
        assert!((psi.psi(0.3, 1.7).unwrap() - Complex64::new(1.7, 0.0)).norm() < 1e-12);
        assert!(psi.psi_x(-0.5, 2.0).unwrap().norm() < 1e-12);
        assert!((psi.psi_t(0.2, 1.0).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-7);
    }

    #[test]
    fn boundary_rows_exact_after_solve() {
        let d = small_domain(5.0);
        let p = Potential::catalog_rational();
        let (field, _) = solve_fixed_point(&p, &d, Branch::Plus, &SolveOptions::default()).unwrap();
        // Φ(s, 0) = 0
        for i in 0..d.n_xi {
            for j in 0..d.n_eta {
                assert_eq!(field.value(i, j, 0).norm(), 0.0);
            }
        }
        // Φ(t, t) = t on the x = 0 column
        let i0 = (d.n_xi - 1) / 2;
        for m in 0..d.n_rho {
            let t = d.t_node(0, m);
            assert_eq!(field.value(i0, 0, m), Complex64::new(t, 0.0));
        }
    }

    #[test]
    fn solve_converges_and_reports_contraction() {
        let d = small_domain(5.0);
        let p = Potential::catalog_rational();
        let (field, report) = solve_fixed_point(&p, &d, Branch::Plus, &SolveOptions::default()).unwrap();
        assert!(report.residual < 1e-10, "residual {}", report.residual);
        assert!(report.iterations < 40);
        assert!(report.ratios.iter().skip(1).all(|r| *r < 1.0));
        assert!(field.values.iter().all(|v| v.norm().is_finite()));
    }

    #[test]
    fn contraction_ratio_scales_with_nu() {
        let d = small_domain(5.0);
        let p = Potential::catalog_rational();
        let base = GridField::seed(d.clone(), Branch::Plus);
        // smooth perturbation vanishing at t = 0
        let mut pert = base.clone();
        for i in 0..d.n_xi {
            for j in 0..d.n_eta {
                for m in 0..d.n_rho {
                    let t = d.t_node(j, m);
                    let xi = d.xi(i);
                    pert.values[d.index(i, j, m)] =
                        Complex64::new(t * (1.3 * xi).cos(), 0.3 * t * (0.7 * xi).sin());
                }
            }
        }
        let nu = 4.0 * 1e6f64.ln() / d.t_max;
        let r1 = empirical_contraction_ratio(&p, &base, &pert, nu).unwrap();
        let r2 = empirical_contraction_ratio(&p, &base, &pert, 2.0 * nu).unwrap();
        assert!(r1 < 1.0, "not contractive at ν = {nu}: {r1}");
        assert!(r2 <= 0.75 * r1, "ratio at 2ν = {r2} vs {r1}");
    }

    #[test]
    fn refined_domain_scales_node_counts() {
        let d = small_domain(4.0);
        let r = d.refined(2.0);
        assert_eq!(r.n_xi, 33);
        assert!(r.n_eta >= 25 && r.n_rho >= 41);
        assert_eq!(r.t_max, d.t_max);
    }

    #[test]
    fn eps_tail_bound_behaves() {
        // finite, positive, decreasing in ν and in k_max
        let b1 = eps_tail_bound(1.0, 8.0, 1);
        assert!(b1.is_finite() && b1 > 0.0);
        // manual partial sum Σ_{k≥2} k^{3/2}(1/8)^k
        let mut manual = 0.0;
        for k in 2..40 {
            manual += (k as f64).powf(1.5) * 8.0f64.powi(-k);
        }
        assert!((b1 - manual).abs() < 1e-12);
        assert!(eps_tail_bound(1.0, 16.0, 1) < b1);
        assert!(eps_tail_bound(1.0, 8.0, 2) < b1);
        assert!(eps_tail_bound(2.0, 1.0, 1).is_infinite());
    }

    #[test]
    fn domain_escape_detected() {
        let d = small_domain(4.0);
        let f = GridField::seed(d.clone(), Branch::Plus);
        assert!(matches!(
            f.interp(0.9, 0.0, 1.0),
            Err(GoursatError::DomainEscape { .. })
        ));
        assert!(matches!(
            f.interp(0.0, 0.0, 4.5),
            Err(GoursatError::DomainEscape { .. })
        ));
    }
}
