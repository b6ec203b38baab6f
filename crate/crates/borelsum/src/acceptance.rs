//! End-to-end verification checks behind `borelsum verify` and the
//! `acceptance` test target: each check runs one slice of the pipeline
//! against an independent reference at a pinned tolerance and reports one
//! pass/fail line. Expensive solves are shared across checks.

use crate::formal::{self, FormalSeries};
use crate::goursat::{
    empirical_contraction_ratio, solve_fixed_point, to_psi, Branch, GoursatDomain, GridField,
    InterpOrder, PsiEvaluator, SolveOptions, SolveReport,
};
use crate::invariants::{compute_c, decompose, pendulum_leading};
use crate::oracle;
use crate::potentials::{pendulum_part, pendulum_to_standard, PendulumSpec, Potential};
use crate::singularity::{
    fit_singularity_exponent, leading_expansion, solve_branch_fixed_point, BranchField,
    BranchSpec, SingularityStatus, V1Kind,
};
use crate::summation::{borel_inverse, build_solution_pair, convolve, inverse_certificate, BorelFunction};
use num_complex::Complex64;

/// Outcome of one acceptance check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub id: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:<22} {}  ({})",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

pub const CHECK_IDS: [&str; 11] = [
    "01-exactness",
    "02-constant-closed-form",
    "03-exact-invariance",
    "04-series-pde-consistency",
    "05-asymptoticity",
    "06-conjugacy-independence",
    "07-convolution-field",
    "08-contraction-scaling",
    "09-eps-extension",
    "10-singularity-exponent",
    "11-pendulum-leading-order",
];

struct FieldRun {
    potential: Potential,
    field: GridField,
    report: SolveReport,
    psi: PsiEvaluator,
    t_max: f64,
}

fn run_field(
    potential: Potential,
    domain: &GoursatDomain,
    branch: Branch,
    eps_k_max: usize,
) -> Result<FieldRun, String> {
    let opts = SolveOptions { eps_k_max, ..SolveOptions::default() };
    let (field, report) =
        solve_fixed_point(&potential, domain, branch, &opts).map_err(|e| e.to_string())?;
    let psi = to_psi(&field);
    Ok(FieldRun { potential, field, report, psi, t_max: domain.t_max })
}

fn production_domain(t_max: f64) -> GoursatDomain {
    GoursatDomain::standard(t_max)
}

fn light_domain(t_max: f64) -> GoursatDomain {
    GoursatDomain {
        xi_halfspan: 0.85,
        n_xi: 25,
        t_max,
        n_eta: 29,
        n_rho: 49,
        quad_order: 12,
        interp: InterpOrder::Order6,
    }
}

fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn slope_fit(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Shared state across checks; build once, run any subset.
#[derive(Default)]
pub struct Suite {
    rational: Option<FieldRun>,
    rational_minus: Option<FieldRun>,
    rational_refined: Option<FieldRun>,
    constant: Option<FieldRun>,
    taylor: Option<FieldRun>,
    eps: Option<FieldRun>,
    pendulum: Option<FieldRun>,
    series12: Option<FormalSeries>,
}

impl Suite {
    pub fn new() -> Self {
        Suite::default()
    }

    /// Runs the named checks (all of them for an empty list) and returns
    /// the results in criterion order.
    pub fn run(&mut self, ids: &[String]) -> Vec<CheckResult> {
        CHECK_IDS
            .iter()
            .filter(|id| ids.is_empty() || ids.iter().any(|q| id.contains(q.as_str())))
            .map(|id| self.run_one(id))
            .collect()
    }

    pub fn run_one(&mut self, id: &str) -> CheckResult {
        match id {
            "01-exactness" => self.check_exactness(),
            "02-constant-closed-form" => self.check_constant_closed_form(),
            "03-exact-invariance" => self.check_exact_invariance(),
            "04-series-pde-consistency" => self.check_series_pde(),
            "05-asymptoticity" => self.check_asymptoticity(),
            "06-conjugacy-independence" => self.check_conjugacy(),
            "07-convolution-field" => self.check_convolution_field(),
            "08-contraction-scaling" => self.check_contraction_scaling(),
            "09-eps-extension" => self.check_eps_extension(),
            "10-singularity-exponent" => self.check_singularity(),
            "11-pendulum-leading-order" => self.check_pendulum_leading(),
            other => CheckResult {
                id: "unknown",
                passed: false,
                detail: format!("no such check '{other}'"),
            },
        }
    }

    fn rational(&mut self) -> Result<&FieldRun, String> {
        if self.rational.is_none() {
            let t = GoursatDomain::t_axis_for(10.0);
            self.rational = Some(run_field(
                Potential::catalog_rational(),
                &production_domain(t),
                Branch::Plus,
                0,
            )?);
        }
        Ok(self.rational.as_ref().unwrap())
    }

    fn rational_minus(&mut self) -> Result<&FieldRun, String> {
        if self.rational_minus.is_none() {
            let t = GoursatDomain::t_axis_for(10.0);
            self.rational_minus = Some(run_field(
                Potential::catalog_rational(),
                &production_domain(t),
                Branch::Minus,
                0,
            )?);
        }
        Ok(self.rational_minus.as_ref().unwrap())
    }

    fn rational_refined(&mut self) -> Result<&FieldRun, String> {
        if self.rational_refined.is_none() {
            let t = GoursatDomain::t_axis_for(10.0);
            self.rational_refined = Some(run_field(
                Potential::catalog_rational(),
                &production_domain(t).refined(1.5),
                Branch::Plus,
                0,
            )?);
        }
        Ok(self.rational_refined.as_ref().unwrap())
    }

    fn series12(&mut self) -> Result<&FormalSeries, String> {
        if self.series12.is_none() {
            self.series12 = Some(
                formal::wkb_coefficients(&Potential::catalog_rational(), 1, 12, -0.9, 0.9, 64)
                    .map_err(|e| e.to_string())?,
            );
        }
        Ok(self.series12.as_ref().unwrap())
    }

    /// Criterion 1: assembled resummed solutions match direct integration,
    /// and improve under grid refinement.
    fn check_exactness(&mut self) -> CheckResult {
        let id = "01-exactness";
        match self.exactness_inner() {
            Ok(detail) => CheckResult { id, passed: detail.0, detail: detail.1 },
            Err(e) => CheckResult { id, passed: false, detail: e },
        }
    }

    fn exactness_error(run: &FieldRun, lambda: f64, xs: &[f64]) -> Result<f64, String> {
        let pair = build_solution_pair(&run.psi, None, lambda, run.t_max, xs)
            .map_err(|e| e.to_string())?;
        let psi0 = Complex64::new(1.0 / lambda, 0.0);
        let dpsi0 = Complex64::new(0.0, 1.0);
        let (c1, c2) = decompose(&pair, psi0, dpsi0).map_err(|e| e.to_string())?;
        let tr = oracle::integrate(&run.potential, lambda, psi0, dpsi0, xs, 1e-12)
            .map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for i in 0..xs.len() {
            let (psi_hat, _) = pair.assemble(i, c1, c2);
            worst = worst.max((psi_hat - tr.psi[i]).norm() / tr.psi[i].norm());
        }
        Ok(worst)
    }

    fn exactness_inner(&mut self) -> Result<(bool, String), String> {
        let xs = grid(-0.8, 0.8, 33);
        let mut worst: f64 = 0.0;
        let residual = {
            let run = self.rational()?;
            for lambda in [10.0, 15.0, 20.0] {
                worst = worst.max(Self::exactness_error(run, lambda, &xs)?);
            }
            run.report.residual
        };
        let err_default = {
            let run = self.rational()?;
            Self::exactness_error(run, 10.0, &xs)?
        };
        let err_refined = {
            let run = self.rational_refined()?;
            Self::exactness_error(run, 10.0, &xs)?
        };
        let gain = err_default / err_refined.max(1e-300);
        let passed = worst <= 1e-5 && gain >= 4.0;
        Ok((
            passed,
            format!(
                "max rel err {worst:.2e} <= 1e-5 over λ∈{{10,15,20}}; refinement ×1.5 gain {gain:.1}x >= 4x; fixed-point residual {residual:.1e}"
            ),
        ))
    }

    /// Criterion 2: φ₊ from the PDE pipeline matches the constant-potential
    /// closed form.
    fn check_constant_closed_form(&mut self) -> CheckResult {
        let id = "02-constant-closed-form";
        let mut inner = || -> Result<(bool, String), String> {
            if self.constant.is_none() {
                let t = GoursatDomain::t_axis_for(10.0);
                self.constant = Some(run_field(
                    Potential::constant(1.0),
                    &light_domain(t),
                    Branch::Plus,
                    0,
                )?);
            }
            let run = self.constant.as_ref().unwrap();
            let lambda = 10.0;
            let mut worst: f64 = 0.0;
            for &x in grid(-0.5, 0.5, 21).iter() {
                let got = crate::summation::laplace_quadrature(&run.psi, x, lambda, run.t_max)
                    .map_err(|e| e.to_string())?
                    .value;
                let exact = oracle::constant_v_exact(1.0, lambda, x);
                worst = worst.max((got - exact).norm() / exact.norm());
            }
            Ok((worst <= 1e-6, format!("max rel err {worst:.2e} <= 1e-6 (c=1, λ=10, |x|<=0.5)")))
        };
        match inner() {
            Ok((passed, detail)) => CheckResult { id, passed, detail },
            Err(e) => CheckResult { id, passed: false, detail: e },
        }
    }

    /// Criterion 3: the invariant of the assembled general solution is
    /// constant along x, and the basis determinant drifts below 1e−8.
    fn check_exact_invariance(&mut self) -> CheckResult {
        let id = "03-exact-invariance";
        let inner = |suite: &mut Suite| -> Result<(bool, String), String> {
            let xs = grid(-0.8, 0.8, 33);
            let run = suite.rational()?;
            let mut worst_drift: f64 = 0.0;
            let mut worst_wronskian: f64 = 0.0;
            let mut oracle_drift_scaled: f64 = 0.0;
            for lambda in [10.0, 15.0, 20.0] {
                let pair = build_solution_pair(&run.psi, None, lambda, run.t_max, &xs)
                    .map_err(|e| e.to_string())?;
                let psi0 = Complex64::new(1.0 / lambda, 0.0);
                let dpsi0 = Complex64::new(0.0, 1.0);
                let (c1, c2) = decompose(&pair, psi0, dpsi0).map_err(|e| e.to_string())?;
                // invariant of the criterion-1 assembled state
                let mut psi_v = Vec::with_capacity(xs.len());
                let mut dpsi_v = Vec::with_capacity(xs.len());
                for i in 0..xs.len() {
                    let (p, dp) = pair.assemble(i, c1, c2);
                    psi_v.push(p);
                    dpsi_v.push(dp);
                }
                let rep = compute_c(&pair, &psi_v, &dpsi_v).map_err(|e| e.to_string())?;
                worst_drift = worst_drift.max(rep.drift);
                worst_wronskian = worst_wronskian.max(rep.wronskian_drift);
                // diagnostic: same statistic against the independent
                // trajectory, conditioned on the bilinear state scale
                let tr = oracle::integrate(&run.potential, lambda, psi0, dpsi0, &xs, 1e-12)
                    .map_err(|e| e.to_string())?;
                let rep_o = compute_c(&pair, &tr.psi, &tr.dpsi).map_err(|e| e.to_string())?;
                oracle_drift_scaled =
                    oracle_drift_scaled.max(rep_o.drift_abs / rep_o.state_scale.max(1e-300));
            }
            let passed = worst_drift <= 1e-6 && worst_wronskian <= 1e-8;
            Ok((
                passed,
                format!(
                    "drift {worst_drift:.2e} <= 1e-6; wronskian drift {worst_wronskian:.2e} <= 1e-8; oracle-state scaled drift {oracle_drift_scaled:.2e}"
                ),
            ))
        };
        match inner(self) {
            Ok((passed, detail)) => CheckResult { id, passed, detail },
            Err(e) => CheckResult { id, passed: false, detail: e },
        }
    }

    /// Criterion 4: small-t Taylor data of the transform field reproduces
    /// the recursion coefficients.
    fn check_series_pde(&mut self) -> CheckResult {
        let id = "04-series-pde-consistency";
        let inner = |suite: &mut Suite| -> Result<(bool, String), String> {
            if suite.taylor.is_none() {
                let d = GoursatDomain {
                    xi_halfspan: 0.85,
                    n_xi: 35,
                    t_max: 1.5,
                    n_eta: 41,
                    n_rho: 193,
                    quad_order: 12,
                    interp: InterpOrder::Order6,
                };
                suite.taylor = Some(run_field(
                    Potential::catalog_rational(),
                    &d,
                    Branch::Plus,
                    0,
                )?);
            }
            let series = suite.series12()?.clone();
            let run = suite.taylor.as_ref().unwrap();
            let mut worst_rel: f64 = 0.0;
            // ξ-node indices of x = ±0.5 on the taylor grid
            for &(i_x, x) in &[(27usize, 0.5f64), (7, -0.5)] {
                let cs = extract_taylor_at_node(&run.field, i_x, 14, 12)?;
                let mut fact = 1.0;
                for (m, c) in cs.iter().enumerate().take(6) {
                    let k = m + 1;
                    fact *= k as f64;
                    // Ψ-coefficient of t^k is a_k/k!
                    let expect = series.coeff_at(k, x) / fact;
                    let rel = (c - expect).norm() / expect.norm().max(1e-300);
                    worst_rel = worst_rel.max(rel);
                }
            }
            // a_2/a_1 = −(i/2) ∫₀ˣ V against independent quadrature
            let p = Potential::catalog_rational();
            let mut worst_ratio: f64 = 0.0;
            for &x in &[-0.7, 0.4, 0.8] {
                let int_v = crate::quad::integrate_gl(
                    |s| p.eval_coeff(0, Complex64::new(s, 0.0)).unwrap(),
                    0.0,
                    x,
                    24,
                );
                let expect = Complex64::new(0.0, -0.5) * int_v;
                let got = series.coeff_at(2, x) / series.coeff_at(1, x);
                worst_ratio = worst_ratio.max((got - expect).norm());
            }
            let passed = worst_rel <= 1e-4 && worst_ratio <= 1e-8;
            Ok((
                passed,
                format!(
                    "Taylor k<=6 worst rel {worst_rel:.2e} <= 1e-4; a2/a1 residual {worst_ratio:.2e} <= 1e-8"
                ),
            ))
        };
        match inner(self) {
            Ok((passed, detail)) => CheckResult { id, passed, detail },
            Err(e) => CheckResult { id, passed: false, detail: e },
        }
    }

    /// Criterion 5: Watson-type asymptoticity of the resummation machinery:
    /// the error after 4 series terms scales like λ^{−5}.
    fn check_asymptoticity(&mut self) -> CheckResult {
        let id = "05-asymptoticity";
        let inner = |suite: &mut Suite| -> Result<(bool, String), String> {
            let series = suite.series12()?;
            let x = 0.5;
            let lambdas = [20.0, 40.0, 80.0, 160.0];
            let mut lnl = Vec::new();
            let mut lne = Vec::new();
            let mut k_cap: f64 = 0.0;
            for &lambda in &lambdas {
                let full = formal::resum_series(series, x, lambda, 3.0).map_err(|e| e.to_string())?;
                let mut partial = Complex64::new(0.0, 0.0);
                for k in 1..=4usize {
                    partial += series.coeff_at(k, x) * lambda.powi(-(k as i32));
                }
                let err = (full - partial).norm();
                lnl.push(lambda.ln());
                lne.push(err.ln());
                k_cap = k_cap.max(err * lambda.powi(5));
            }
            let slope = slope_fit(&lnl, &lne);
            let passed = (slope + 5.0).abs() <= 0.15;
            Ok((
                passed,
                format!("log-log slope {slope:.3} within -5 ± 0.15; fitted K = {k_cap:.3e}"),
            ))
        };
        match inner(self) {
            Ok((passed, detail)) => CheckResult { id, passed, detail },
            Err(e) => CheckResult { id, passed: false, detail: e },
        }
    }

    /// Criterion 6: the independently solved minus field is the conjugate
    /// of the plus field, and the basis determinant is bounded below.
    fn check_conjugacy(&mut self) -> CheckResult {
        let id = "06-conjugacy-independence";
        let inner = |suite: &mut Suite| -> Result<(bool, String), String> {
            suite.rational()?;
            suite.rational_minus()?;
            let plus = suite.rational.as_ref().unwrap();
            let minus = suite.rational_minus.as_ref().unwrap();
            let xs = grid(-0.8, 0.8, 33);
            let mut worst_conj: f64 = 0.0;
            let mut w_floor_ok = true;
            let mut w_min: f64 = f64::INFINITY;
            for lambda in [10.0, 15.0, 20.0] {
                let pair =
                    build_solution_pair(&plus.psi, Some(&minus.psi), lambda, plus.t_max, &xs)
                        .map_err(|e| e.to_string())?;
                worst_conj = worst_conj.max(pair.conjugacy_residual);
                for i in 0..xs.len() {
                    let w = pair.wronskian(i).norm();
                    w_min = w_min.min(w * lambda); // report in units of 1/λ
                    if w < 1.0 / (2.0 * lambda) {
                        w_floor_ok = false;
                    }
                }
            }
            let passed = worst_conj <= 1e-10 && w_floor_ok;
            Ok((
                passed,
                format!(
                    "max |φ₋ − conj φ₊| = {worst_conj:.2e} <= 1e-10; min λ|W| = {w_min:.3} >= 0.5"
                ),
            ))
        };
        match inner(self) {
            Ok((passed, detail)) => CheckResult { id, passed, detail },
            Err(e) => CheckResult { id, passed: false, detail: e },
        }
    }

    /// Criterion 7: algebra laws of the convolution and the certified
    /// multiplicative inverse.
    fn check_convolution_field(&mut self) -> CheckResult {
        let id = "07-convolution-field";
        let inner = |suite: &mut Suite| -> Result<(bool, String), String> {
            let n = 257;
            let t_max = 2.0;
            let f = BorelFunction::from_fn(
                |t| Complex64::new(0.4 - 0.9 * t + 0.3 * t * t, 0.2 * t),
                t_max,
                n,
            );
            let g = BorelFunction::from_fn(
                |t| Complex64::new(1.1 * t, -0.5 + 0.25 * t * t),
                t_max,
                n,
            );
            let h = BorelFunction::from_fn(
                |t| Complex64::new(-0.3 + 0.8 * t, 0.15 - 0.4 * t),
                t_max,
                n,
            );
            let err = |a: &BorelFunction, b: &BorelFunction| -> f64 {
                a.values
                    .iter()
                    .zip(&b.values)
                    .map(|(x, y)| (x - y).norm())
                    .fold(0.0, f64::max)
            };
            // associativity
            let fg_h = convolve(&convolve(&f, &g).map_err(|e| e.to_string())?, &h)
                .map_err(|e| e.to_string())?;
            let f_gh = convolve(&f, &convolve(&g, &h).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            let assoc = err(&fg_h, &f_gh);
            // distributivity
            let mut g_plus_h = g.clone();
            for (v, w) in g_plus_h.values.iter_mut().zip(&h.values) {
                *v += w;
            }
            let lhs = convolve(&f, &g_plus_h).map_err(|e| e.to_string())?;
            let fg = convolve(&f, &g).map_err(|e| e.to_string())?;
            let fh = convolve(&f, &h).map_err(|e| e.to_string())?;
            let mut rhs = fg.clone();
            for (v, w) in rhs.values.iter_mut().zip(&fh.values) {
                *v += w;
            }
            let dist = err(&lhs, &rhs);

            // closed-form inverse for F ≡ c
            let c = 0.8;
            let fc = BorelFunction::from_fn(|_| Complex64::new(c, 0.0), 2.5, 385);
            let gc = borel_inverse(&fc, 10.0, 1.0, 1e-14).map_err(|e| e.to_string())?;
            let mut exp_err: f64 = 0.0;
            for i in 0..gc.n() {
                let t = gc.t(i);
                exp_err = exp_err.max((gc.values[i] - Complex64::new((-c * t).exp(), 0.0)).norm());
            }

            // inverse certificate with F from the catalog run's series at x = 0.5
            let series = suite.series12()?;
            let x = 0.5;
            let mut tilde = Vec::with_capacity(8);
            let mut fact = 1.0;
            for k in 1..=8usize {
                if k > 1 {
                    fact *= (k - 1) as f64;
                }
                // transform of f̃ = Σ a_{k+1} λ^{−k}
                tilde.push(series.coeff_at(k + 1, x) / fact);
            }
            let ff = BorelFunction::from_fn(
                |t| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for c in tilde.iter().rev() {
                        acc = acc * t + c;
                    }
                    acc
                },
                2.5,
                513,
            );
            let gg = borel_inverse(&ff, 10.0, 1.0, 1e-14).map_err(|e| e.to_string())?;
            let mut cert: f64 = 0.0;
            for lambda in [10.0, 30.0, 100.0] {
                cert = cert.max(inverse_certificate(&ff, &gg, lambda));
            }

            let passed = assoc <= 1e-10 && dist <= 1e-10 && exp_err <= 1e-10 && cert <= 1e-8;
            Ok((
                passed,
                format!(
                    "assoc {assoc:.2e}, distrib {dist:.2e} <= 1e-10; G=e^(-ct) err {exp_err:.2e} <= 1e-10; certificate {cert:.2e} <= 1e-8"
                ),
            ))
        };
        match inner(self) {
            Ok((passed, detail)) => CheckResult { id, passed, detail },
            Err(e) => CheckResult { id, passed: false, detail: e },
        }
    }

    /// Criterion 8: the empirical Lipschitz ratio of J halves (≤ 0.75×)
    /// when ν doubles, for both catalog potentials.
    fn check_contraction_scaling(&mut self) -> CheckResult {
        let id = "08-contraction-scaling";
        let inner = || -> Result<(bool, String), String> {
            let d = GoursatDomain {
                xi_halfspan: 0.85,
                n_xi: 21,
                t_max: 7.0,
                n_eta: 21,
                n_rho: 41,
                quad_order: 12,
                interp: InterpOrder::Order6,
            };
            let mut details = Vec::new();
            let mut all_ok = true;
            for (name, p) in [
                ("V=1", Potential::constant(1.0)),
                ("V=1/(x²−4)", Potential::catalog_rational()),
            ] {
                let base = GridField::seed(d.clone(), Branch::Plus);
                let mut pert = base.clone();
                for i in 0..d.n_xi {
                    for j in 0..d.n_eta {
                        for m in 0..d.n_rho {
                            let t = d.t_node(j, m);
                            let xi = d.xi(i);
                            let idx = (i * d.n_eta + j) * d.n_rho + m;
                            pert.values[idx] =
                                Complex64::new(t * (1.1 * xi).cos(), 0.4 * t * (0.6 * xi + 1.0).sin());
                        }
                    }
                }
                let nu = 4.0 * 1e6f64.ln() / d.t_max;
                let r1 = empirical_contraction_ratio(&p, &base, &pert, nu).map_err(|e| e.to_string())?;
                let r2 =
                    empirical_contraction_ratio(&p, &base, &pert, 2.0 * nu).map_err(|e| e.to_string())?;
                let ok = r2 <= 0.75 * r1;
                all_ok &= ok;
                details.push(format!("{name}: ratio(ν)={r1:.3e}, ratio(2ν)={r2:.3e}, factor {:.2}", r2 / r1));
            }
            Ok((all_ok, details.join("; ") + " (need <= 0.75)"))
        };
        match inner() {
            Ok((passed, detail)) => CheckResult { id, passed, detail },
            Err(e) => CheckResult { id, passed: false, detail: e },
        }
    }

    /// Criterion 9: the ε-dependent extension matches direct integration of
    /// the full ε-dependent potential.
    fn check_eps_extension(&mut self) -> CheckResult {
        let id = "09-eps-extension";
        let inner = |suite: &mut Suite| -> Result<(bool, String), String> {
            if suite.eps.is_none() {
                let t = GoursatDomain::t_axis_for(20.0);
                suite.eps = Some(run_field(
                    Potential::catalog_rational_eps(),
                    &production_domain(t),
                    Branch::Plus,
                    1,
                )?);
            }
            let run = suite.eps.as_ref().unwrap();
            let lambda = 20.0;
            let xs = grid(-0.8, 0.8, 33);
            let pair = build_solution_pair(&run.psi, None, lambda, run.t_max, &xs)
                .map_err(|e| e.to_string())?;
            let psi0 = Complex64::new(1.0 / lambda, 0.0);
            let dpsi0 = Complex64::new(0.0, 1.0);
            let (c1, c2) = decompose(&pair, psi0, dpsi0).map_err(|e| e.to_string())?;
            let tr = oracle::integrate(&run.potential, lambda, psi0, dpsi0, &xs, 1e-12)
                .map_err(|e| e.to_string())?;
            let mut worst: f64 = 0.0;
            for i in 0..xs.len() {
                let (psi_hat, _) = pair.assemble(i, c1, c2);
                worst = worst.max((psi_hat - tr.psi[i]).norm() / tr.psi[i].norm());
            }
            let passed = worst <= 1e-5;
            Ok((
                passed,
                format!("V=(1+ε)/(x²−4), k_max=1, λ=20: max rel err {worst:.2e} <= 1e-5"),
            ))
        };
        match inner(self) {
            Ok((passed, detail)) => CheckResult { id, passed, detail },
            Err(e) => CheckResult { id, passed: false, detail: e },
        }
    }

    /// Criterion 10: fitted nonanalytic exponent 3 − β; solver matches the
    /// leading closed form to O(t³); analytic control detects nothing.
    fn check_singularity(&mut self) -> CheckResult {
        let id = "10-singularity-exponent";
        let inner = || -> Result<(bool, String), String> {
            let mut details = Vec::new();
            let mut all_ok = true;
            let mut field_cache: Option<(f64, BranchField)> = None;
            for beta in [0.25, 0.5] {
                let spec = BranchSpec::new(Complex64::new(beta, 0.0), V1Kind::Constant(1.0))
                    .map_err(|e| e.to_string())?;
                let (field, _) = solve_branch_fixed_point(&spec, 25, 161, 1e-11, 40)
                    .map_err(|e| e.to_string())?;
                let fit = fit_singularity_exponent(&field, 1.0, (0.0012, 0.01))
                    .map_err(|e| e.to_string())?;
                let ok = (fit.exponent - (3.0 - beta)).abs() <= 1e-2
                    && fit.status == SingularityStatus::Detected;
                all_ok &= ok;
                details.push(format!("β={beta}: exponent {:.4} (target {})", fit.exponent, 3.0 - beta));
                if beta == 0.5 {
                    field_cache = Some((beta, field));
                }
            }
            // solver vs leading expansion: remainder is O(t³)
            let (_, field) = field_cache.unwrap();
            let spec = field.spec.clone();
            let mut lnl = Vec::new();
            let mut lne = Vec::new();
            for i in 0..16 {
                let t = 0.01 * (0.06f64 / 0.01).powf(i as f64 / 15.0);
                let phi = field.interp(1.0, t).map_err(|e| e.to_string())?;
                let lead = leading_expansion(&spec, 1.0, t);
                lnl.push(t.ln());
                lne.push((phi - lead).norm().max(1e-300).ln());
            }
            let rem_slope = slope_fit(&lnl, &lne);
            let rem_ok = rem_slope >= 2.9;
            all_ok &= rem_ok;
            details.push(format!("remainder slope {rem_slope:.2} >= 2.9"));
            // analytic control: β = 0
            let spec0 = BranchSpec::new(Complex64::new(0.0, 0.0), V1Kind::Constant(1.0))
                .map_err(|e| e.to_string())?;
            let (field0, _) =
                solve_branch_fixed_point(&spec0, 25, 161, 1e-11, 40).map_err(|e| e.to_string())?;
            let control = match fit_singularity_exponent(&field0, 1.0, (0.0012, 0.01)) {
                Ok(fit) => {
                    let ok = fit.status == SingularityStatus::NoSingularityDetected;
                    details.push(format!("control exponent {:.3} -> {:?}", fit.exponent, fit.status));
                    ok
                }
                Err(crate::singularity::SingularityError::FitUnstable { .. }) => {
                    details.push("control: fit degenerates (no singular term)".into());
                    true
                }
                Err(e) => return Err(e.to_string()),
            };
            all_ok &= control;
            Ok((all_ok, details.join("; ")))
        };
        match inner() {
            Ok((passed, detail)) => CheckResult { id, passed, detail },
            Err(e) => CheckResult { id, passed: false, detail: e },
        }
    }

    /// Criterion 11: the invariant of a slowly modulated oscillator reduces
    /// to the adiabatic form E/(2ω²), with an O(ε) error.
    fn check_pendulum_leading(&mut self) -> CheckResult {
        let id = "11-pendulum-leading-order";
        let inner = |suite: &mut Suite| -> Result<(bool, String), String> {
            if suite.pendulum.is_none() {
                let t = GoursatDomain::t_axis_for(20.0);
                let p = pendulum_to_standard(PendulumSpec::sine_frequency(2.0, 1.0))
                    .map_err(|e| e.to_string())?;
                let d = GoursatDomain {
                    xi_halfspan: 0.85,
                    n_xi: 29,
                    t_max: t,
                    n_eta: 33,
                    n_rho: 57,
                    quad_order: 12,
                    interp: InterpOrder::Order6,
                };
                suite.pendulum = Some(run_field(p, &d, Branch::Plus, 0)?);
            }
            let run = suite.pendulum.as_ref().unwrap();
            let pend = pendulum_part(&run.potential).ok_or("not a pendulum potential")?;
            // physical state x(0) = 1, ẋ(0) = 0 at u = 0 (ω = 2)
            let omega0: f64 = 2.0;
            let f0 = Complex64::new(omega0.sqrt(), 0.0);
            let df0 = Complex64::new(0.5 * omega0.powf(-1.5) * 1.0, 0.0); // (1/2)ω^{-3/2}ω'(0)x₀
            let taus = grid(-0.7, 0.7, 15);
            let mut lneps = Vec::new();
            let mut lnerr = Vec::new();
            let mut details = Vec::new();
            for lambda in [20.0, 40.0, 80.0] {
                let eps = 1.0 / lambda;
                let xs_with_zero = {
                    let mut v = taus.clone();
                    if !v.iter().any(|x| x.abs() < 1e-12) {
                        v.push(0.0);
                        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    }
                    v
                };
                let pair =
                    build_solution_pair(&run.psi, None, lambda, run.t_max, &xs_with_zero)
                        .map_err(|e| e.to_string())?;
                let (c1, c2) = decompose(&pair, f0, df0).map_err(|e| e.to_string())?;
                let c = c1 * c2;
                // independent trajectory of the normalized oscillator
                let tr = oracle::integrate(&run.potential, lambda, f0, df0, &xs_with_zero, 1e-12)
                    .map_err(|e| e.to_string())?;
                let mut err: f64 = 0.0;
                for (i, &tau) in xs_with_zero.iter().enumerate() {
                    let (_, w, dw) = pend
                        .frame(Complex64::new(tau, 0.0))
                        .map_err(|e| e.to_string())?;
                    let w = w.re;
                    let dw = dw.re;
                    let f = tr.psi[i].re;
                    let df = tr.dpsi[i].re;
                    // back-substitution to the oscillator frame
                    let x = f / w.sqrt();
                    let xdot = eps * (w.sqrt() * df - 0.5 * w.powf(-1.5) * dw * f);
                    let leading = pendulum_leading(xdot, x, w);
                    let predicted = c.re / (lambda * lambda * w);
                    err = err.max((predicted - leading).abs());
                }
                details.push(format!("ε=1/{lambda}: |C/(λ²ω) − E/(2ω²)| = {err:.3e}"));
                lneps.push(eps.ln());
                lnerr.push(err.ln());
            }
            let slope = slope_fit(&lneps, &lnerr);
            let passed = (slope - 1.0).abs() <= 0.2;
            Ok((
                passed,
                format!("{}; log-log slope {slope:.3} within 1 ± 0.2", details.join("; ")),
            ))
        };
        match inner(self) {
            Ok((passed, detail)) => CheckResult { id, passed, detail },
            Err(e) => CheckResult { id, passed: false, detail: e },
        }
    }
}

/// Taylor coefficients c_1.. of Ψ(x_i, ·) at t = 0, extracted from exact
/// grid nodes of the η = 0 plane (no interpolation, so the sample errors
/// are smooth in t): Ψ/t is interpolated on `m` node samples marching down
/// the ρ-grid in strides of `step`, and the Newton form is converted to
/// monomial coefficients.
fn extract_taylor_at_node(
    field: &GridField,
    i_x: usize,
    m: usize,
    step: usize,
) -> Result<Vec<Complex64>, String> {
    let d = &field.domain;
    let top = d.n_rho - 1;
    if step * (m - 1) >= top {
        return Err("taylor extraction: grid too small for the node ladder".into());
    }
    let mut ts = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    for j in 0..m {
        let node = top - step * j;
        let t = d.t_node(0, node);
        ts.push(t);
        ys.push(field.value(i_x, 0, node) / t);
    }
    // Newton divided differences, then synthetic division to monomials
    for k in 0..m - 1 {
        for j in (k + 1..m).rev() {
            ys[j] = (ys[j] - ys[j - 1]) / (ts[j] - ts[j - k - 1]);
        }
    }
    for k in (0..m - 1).rev() {
        for j in k..m - 1 {
            let corr = ys[j + 1] * ts[k];
            ys[j] -= corr;
        }
    }
    Ok(ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_extraction_on_constant_potential() {
        // validated against the closed-form coefficients a_k of V ≡ c:
        // Ψ-coefficient of t^k is a_k/k!. A light grid reaches ~1e-3;
        // the acceptance run uses the production grid for 1e-4.
        let c = 1.0;
        let d = GoursatDomain {
            xi_halfspan: 0.85,
            n_xi: 35,
            t_max: 1.5,
            n_eta: 21,
            n_rho: 97,
            quad_order: 12,
            interp: InterpOrder::Order6,
        };
        let run = run_field(Potential::constant(c), &d, Branch::Plus, 0).unwrap();
        let i_x = 27; // x = 0.5
        let x = d.xi(i_x);
        let cs = extract_taylor_at_node(&run.field, i_x, 12, 8).unwrap();
        let a = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, -c * x / 2.0),
            Complex64::new(-c * c * x * x / 8.0, 0.0),
            Complex64::new(0.0, -c * c * x / 8.0 + c.powi(3) * x.powi(3) / 48.0),
        ];
        let mut fact = 1.0;
        for (m, got) in cs.iter().take(4).enumerate() {
            let k = m + 1;
            fact *= k as f64;
            let expect = a[m] / fact;
            let rel = (got - expect).norm() / expect.norm().max(1e-16);
            assert!(rel < 1e-3, "k={k}: {got} vs {expect} (rel {rel:.2e})");
        }
    }

    #[test]
    fn slope_fit_recovers_power_law() {
        let xs: Vec<f64> = (1..6).map(|i| (i as f64).ln()).collect();
        let ys: Vec<f64> = (1..6).map(|i| (-5.0) * (i as f64).ln() + 0.3).collect();
        assert!((slope_fit(&xs, &ys) + 5.0).abs() < 1e-12);
    }
}
