//! Machine-readable outputs: CSV data series and JSON summaries, each
//! stamped with a reproducibility header (config hash, grid metadata, tool
//! version — no timestamps, so reruns are bitwise identical).

use crate::goursat::SolveReport;
use crate::invariants::InvariantReport;
use crate::oracle::Trajectory;
use crate::singularity::ExponentFit;
use crate::summation::SolutionPair;
use num_complex::Complex64;
use serde::Serialize;
use std::fmt::Write as _;

/// Header common to every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct ReportMeta {
    pub tool_version: String,
    pub config_hash: String,
    pub grid: String,
    pub potential: String,
}

impl ReportMeta {
    pub fn new(config_hash: u64, grid: String, potential: String) -> Self {
        ReportMeta {
            tool_version: crate::VERSION.to_string(),
            config_hash: format!("{config_hash:016x}"),
            grid,
            potential,
        }
    }

    fn csv_header(&self) -> String {
        format!(
            "# borelsum {}\n# config_hash: {}\n# grid: {}\n# potential: {}\n",
            self.tool_version, self.config_hash, self.grid, self.potential
        )
    }
}

/// x, Re/Im of φ₊, φ₋, A, B.
pub fn solution_pair_csv(meta: &ReportMeta, pair: &SolutionPair) -> String {
    let mut out = meta.csv_header();
    let _ = writeln!(out, "# lambda: {}", pair.lambda);
    out.push_str("x,re_phi_plus,im_phi_plus,re_phi_minus,im_phi_minus,re_a,im_a,re_b,im_b\n");
    for i in 0..pair.x_samples.len() {
        let _ = writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            pair.x_samples[i],
            pair.phi_plus[i].re,
            pair.phi_plus[i].im,
            pair.phi_minus[i].re,
            pair.phi_minus[i].im,
            pair.a[i].re,
            pair.a[i].im,
            pair.b[i].re,
            pair.b[i].im,
        );
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub meta: ReportMeta,
    pub lambda: f64,
    pub t_max: f64,
    pub tail_bound: f64,
    pub conjugacy_residual: f64,
    pub fixed_point: SolveReport,
}

pub fn solve_summary_json(summary: &SolveSummary) -> String {
    serde_json::to_string_pretty(summary).expect("serializable summary")
}

/// x, Re ψ, Im ψ, Re ψ′, Im ψ′.
pub fn trajectory_csv(meta: &ReportMeta, tr: &Trajectory) -> String {
    let mut out = meta.csv_header();
    let _ = writeln!(out, "# method: {} (tol {:.1e})", tr.method, tr.tol_used);
    out.push_str("x,re_psi,im_psi,re_dpsi,im_dpsi\n");
    for i in 0..tr.x_samples.len() {
        let _ = writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            tr.x_samples[i], tr.psi[i].re, tr.psi[i].im, tr.dpsi[i].re, tr.dpsi[i].im
        );
    }
    out
}

#[derive(Debug, Clone, Serialize)]
struct InvariantJson<'a> {
    meta: &'a ReportMeta,
    lambda: f64,
    drift: f64,
    drift_abs: f64,
    state_scale: f64,
    wronskian_drift: f64,
    c_median_re: f64,
    c_median_im: f64,
    leading_comparison: &'a Option<crate::invariants::LeadingComparison>,
    per_x: Vec<PerX>,
}

#[derive(Debug, Clone, Serialize)]
struct PerX {
    x: f64,
    re_c: f64,
    im_c: f64,
    re_c1: f64,
    im_c1: f64,
    re_c2: f64,
    im_c2: f64,
}

pub fn invariant_json(meta: &ReportMeta, rep: &InvariantReport) -> String {
    let med = median_complex(&rep.c);
    let per_x = (0..rep.x_samples.len())
        .map(|i| PerX {
            x: rep.x_samples[i],
            re_c: rep.c[i].re,
            im_c: rep.c[i].im,
            re_c1: rep.c1[i].re,
            im_c1: rep.c1[i].im,
            re_c2: rep.c2[i].re,
            im_c2: rep.c2[i].im,
        })
        .collect();
    serde_json::to_string_pretty(&InvariantJson {
        meta,
        lambda: rep.lambda,
        drift: rep.drift,
        drift_abs: rep.drift_abs,
        state_scale: rep.state_scale,
        wronskian_drift: rep.wronskian_drift,
        c_median_re: med.re,
        c_median_im: med.im,
        leading_comparison: &rep.leading_comparison,
        per_x,
    })
    .expect("serializable invariant report")
}

fn median_complex(vs: &[Complex64]) -> Complex64 {
    let med = |mut v: Vec<f64>| -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len();
        if n == 0 {
            0.0
        } else if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    };
    Complex64::new(
        med(vs.iter().map(|z| z.re).collect()),
        med(vs.iter().map(|z| z.im).collect()),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularityJson {
    pub meta: ReportMeta,
    pub beta_re: f64,
    pub beta_im: f64,
    pub fitted_exponent: f64,
    pub fit_residual: f64,
    pub status: String,
}

pub fn singularity_json(meta: &ReportMeta, beta: Complex64, fit: &ExponentFit) -> String {
    serde_json::to_string_pretty(&SingularityJson {
        meta: meta.clone(),
        beta_re: beta.re,
        beta_im: beta.im,
        fitted_exponent: fit.exponent,
        fit_residual: fit.fit_residual,
        status: format!("{:?}", fit.status),
    })
    .expect("serializable singularity report")
}

/// (t, |remainder|) pairs for plotting the exponent fit.
pub fn singularity_csv(meta: &ReportMeta, fit: &ExponentFit) -> String {
    let mut out = meta.csv_header();
    out.push_str("t,abs_remainder\n");
    for (t, r) in &fit.samples {
        let _ = writeln!(out, "{t:.17e},{r:.17e}");
    }
    out
}

/// k, x, Re a_k, Im a_k for a formal series.
pub fn series_csv(meta: &ReportMeta, series: &crate::formal::FormalSeries) -> String {
    let mut out = meta.csv_header();
    out.push_str(&series.to_csv());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> ReportMeta {
        ReportMeta::new(0xabcd, "test-grid".into(), "test-potential".into())
    }

    #[test]
    fn csv_headers_carry_reproducibility_info() {
        let pair = SolutionPair {
            lambda: 10.0,
            x_samples: vec![0.0, 0.5],
            phi_plus: vec![Complex64::new(0.1, 0.0); 2],
            phi_minus: vec![Complex64::new(0.1, 0.0); 2],
            a: vec![Complex64::new(0.0, 1.0); 2],
            b: vec![Complex64::new(0.0, -1.0); 2],
            tail_bound: 1e-15,
            conjugacy_residual: 0.0,
        };
        let csv = solution_pair_csv(&meta(), &pair);
        assert!(csv.contains("config_hash: 000000000000abcd"));
        assert!(csv.contains("x,re_phi_plus"));
        assert_eq!(csv.lines().count(), 8);
    }

    #[test]
    fn invariant_json_fields() {
        let rep = InvariantReport {
            lambda: 15.0,
            x_samples: vec![0.0],
            c1: vec![Complex64::new(1.0, 0.0)],
            c2: vec![Complex64::new(0.5, 0.0)],
            c: vec![Complex64::new(0.5, 0.0)],
            drift: 1e-9,
            drift_abs: 5e-10,
            state_scale: 1.0,
            wronskian_drift: 1e-10,
            leading_comparison: None,
        };
        let json = invariant_json(&meta(), &rep);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["lambda"], 15.0);
        assert_eq!(v["c_median_re"], 0.5);
        assert!(v["per_x"].as_array().unwrap().len() == 1);
    }
}
