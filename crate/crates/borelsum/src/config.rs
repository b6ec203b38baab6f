//! Run configuration: a small sectioned key = value text format, strict
//! about unknown keys, with every default printable via `defaults_text`.
//! Parsing is total (no panics on arbitrary input); errors carry line
//! numbers.

use crate::goursat::{GoursatDomain, InterpOrder};
use crate::potentials::{pendulum_to_standard, PendulumSpec, Potential};
use crate::singularity::{BranchSpec, KernelConvention, V1Kind};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("[{section}] {key}: {message}")]
    Value { section: String, key: String, message: String },
    #[error("unknown key '{key}' in section [{section}] (line {line})")]
    UnknownKey { section: String, key: String, line: usize },
    #[error("unknown section [{section}] (line {line})")]
    UnknownSection { section: String, line: usize },
}

/// Parsed but untyped configuration text.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    /// section → key → (line, value)
    sections: BTreeMap<String, BTreeMap<String, (usize, String)>>,
}

/// Splits `text` into sections of `key = value` lines. `#` starts a comment,
/// blank lines are skipped, keys may not repeat within a section.
pub fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    let mut cfg = RawConfig::default();
    let mut section = String::from("global");
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(p) => &raw_line[..p],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or(ConfigError::Parse {
                line: line_no,
                message: "unterminated section header".into(),
            })?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("bad section name '{name}'"),
                });
            }
            section = name.to_string();
            cfg.sections.entry(section.clone()).or_default();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Parse {
            line: line_no,
            message: "expected 'key = value'".into(),
        })?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("bad key '{key}'"),
            });
        }
        let entry = cfg.sections.entry(section.clone()).or_default();
        if entry
            .insert(key.to_string(), (line_no, value.trim().to_string()))
            .is_some()
        {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("duplicate key '{key}' in [{section}]"),
            });
        }
    }
    Ok(cfg)
}

impl RawConfig {
    fn get(&self, section: &str, key: &str) -> Option<&(usize, String)> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    fn f64(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(section, key) {
            None => Ok(default),
            Some((_, v)) => v.parse::<f64>().map_err(|_| ConfigError::Value {
                section: section.into(),
                key: key.into(),
                message: format!("'{v}' is not a number"),
            }),
        }
    }

    fn f64_opt(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some((_, v)) if v == "auto" => Ok(None),
            Some((_, v)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| ConfigError::Value {
                    section: section.into(),
                    key: key.into(),
                    message: format!("'{v}' is not a number or 'auto'"),
                }),
        }
    }

    fn usize(&self, section: &str, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(section, key) {
            None => Ok(default),
            Some((_, v)) => v.parse::<usize>().map_err(|_| ConfigError::Value {
                section: section.into(),
                key: key.into(),
                message: format!("'{v}' is not a nonnegative integer"),
            }),
        }
    }

    fn string(&self, section: &str, key: &str, default: &str) -> String {
        self.get(section, key)
            .map(|(_, v)| v.clone())
            .unwrap_or_else(|| default.to_string())
    }

    fn f64_list(&self, section: &str, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.get(section, key) {
            None => Ok(default.to_vec()),
            Some((_, v)) => v
                .split(',')
                .map(|p| {
                    p.trim().parse::<f64>().map_err(|_| ConfigError::Value {
                        section: section.into(),
                        key: key.into(),
                        message: format!("'{p}' is not a number"),
                    })
                })
                .collect(),
        }
    }
}

const KNOWN: &[(&str, &[&str])] = &[
    (
        "potential",
        &[
            "kind", "c", "numerator", "denominator", "strip_halfwidth", "decay_K", "decay_delta",
            "eps_B", "eps_order", "omega_base", "omega_amplitude", "mathieu_a", "mathieu_b",
            "mathieu_alpha", "sigma_min", "sigma_max",
        ],
    ),
    (
        "grid",
        &["xi_halfspan", "n_xi", "n_eta", "n_rho", "quad_order", "t_max", "interp"],
    ),
    (
        "run",
        &[
            "lambdas", "x_min", "x_max", "n_x", "psi0_re", "psi0_im", "dpsi0_re", "dpsi0_im",
            "refine",
        ],
    ),
    (
        "tolerances",
        &["picard_tol", "max_iter", "oracle_tol", "nu", "invariance_drift"],
    ),
    (
        "singularity",
        &[
            "beta_re", "beta_im", "v1", "s_fixed", "t_window_lo", "t_window_hi", "n_s", "n_theta",
            "convention", "s_max",
        ],
    ),
    ("verify", &["checks"]),
];

fn check_known(raw: &RawConfig) -> Result<(), ConfigError> {
    for (section, keys) in &raw.sections {
        let known = KNOWN.iter().find(|(s, _)| s == section);
        let Some((_, allowed)) = known else {
            let line = keys.values().map(|(l, _)| *l).min().unwrap_or(0);
            return Err(ConfigError::UnknownSection { section: section.clone(), line });
        };
        for (key, (line, _)) in keys {
            if !allowed.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey {
                    section: section.clone(),
                    key: key.clone(),
                    line: *line,
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub enum PotentialKind {
    Zero,
    Constant { c: f64 },
    Rational { numerator: Vec<f64>, denominator: Vec<f64> },
    /// (1 + ε + … + ε^order) × rational
    RationalEps { numerator: Vec<f64>, denominator: Vec<f64>, order: usize },
    PendulumSine { base: f64, amplitude: f64 },
    /// ε²ḧ − (a cos 2x + b)h = 0 via σ = α cos 2x, then normalized to
    /// standard form on the σ-interval
    Mathieu { a: f64, b: f64, alpha: f64, sigma_range: (f64, f64) },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub potential: PotentialKind,
    pub strip_halfwidth: Option<f64>,
    pub decay_k: Option<f64>,
    pub decay_delta: f64,
    pub eps_b: f64,
    pub grid: GridSettings,
    pub lambdas: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    /// None means 1/λ
    pub psi0: Option<(f64, f64)>,
    pub dpsi0: (f64, f64),
    pub refine: f64,
    pub picard_tol: f64,
    pub max_iter: usize,
    pub oracle_tol: f64,
    pub nu: Option<f64>,
    pub invariance_drift: f64,
    pub singularity: SingularitySettings,
    pub verify_checks: Option<Vec<String>>,
    /// canonical text the hash is computed from
    canonical: String,
}

#[derive(Debug, Clone)]
pub struct GridSettings {
    pub xi_halfspan: f64,
    pub n_xi: usize,
    pub n_eta: usize,
    pub n_rho: usize,
    pub quad_order: usize,
    pub t_max: Option<f64>,
    pub interp: InterpOrder,
}

#[derive(Debug, Clone)]
pub struct SingularitySettings {
    pub beta: (f64, f64),
    pub v1: String,
    pub s_fixed: f64,
    pub t_window: (f64, f64),
    pub n_s: usize,
    pub n_theta: usize,
    pub s_max: f64,
    pub convention: String,
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let raw = parse_raw(text)?;
        check_known(&raw)?;
        let err = |section: &str, key: &str, message: String| ConfigError::Value {
            section: section.into(),
            key: key.into(),
            message,
        };

        let kind_name = raw.string("potential", "kind", "rational");
        let potential = match kind_name.as_str() {
            "zero" => PotentialKind::Zero,
            "constant" => PotentialKind::Constant { c: raw.f64("potential", "c", 1.0)? },
            "rational" => PotentialKind::Rational {
                numerator: raw.f64_list("potential", "numerator", &[1.0])?,
                denominator: raw.f64_list("potential", "denominator", &[-4.0, 0.0, 1.0])?,
            },
            "rational_eps" => PotentialKind::RationalEps {
                numerator: raw.f64_list("potential", "numerator", &[1.0])?,
                denominator: raw.f64_list("potential", "denominator", &[-4.0, 0.0, 1.0])?,
                order: raw.usize("potential", "eps_order", 1)?,
            },
            "pendulum_sine" => PotentialKind::PendulumSine {
                base: raw.f64("potential", "omega_base", 2.0)?,
                amplitude: raw.f64("potential", "omega_amplitude", 1.0)?,
            },
            "mathieu" => PotentialKind::Mathieu {
                a: raw.f64("potential", "mathieu_a", 0.0)?,
                b: raw.f64("potential", "mathieu_b", 4.0)?,
                alpha: raw.f64("potential", "mathieu_alpha", 1.0)?,
                sigma_range: (
                    raw.f64("potential", "sigma_min", -0.5)?,
                    raw.f64("potential", "sigma_max", 0.5)?,
                ),
            },
            other => {
                return Err(err("potential", "kind", format!("unknown kind '{other}'")));
            }
        };

        let interp_name = raw.string("grid", "interp", "order6");
        let interp = match interp_name.as_str() {
            "trilinear" => InterpOrder::Linear,
            "tricubic" => InterpOrder::Cubic,
            "order6" => InterpOrder::Order6,
            other => return Err(err("grid", "interp", format!("unknown interpolation '{other}'"))),
        };

        let lambdas = raw.f64_list("run", "lambdas", &[10.0, 15.0, 20.0])?;
        if lambdas.is_empty() || lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(err("run", "lambdas", "need at least one positive λ".into()));
        }

        let psi0 = match (raw.f64_opt("run", "psi0_re")?, raw.f64_opt("run", "psi0_im")?) {
            (None, None) => None,
            (re, im) => Some((re.unwrap_or(0.0), im.unwrap_or(0.0))),
        };

        let n_x = raw.usize("run", "n_x", 33)?;
        if n_x < 2 {
            return Err(err("run", "n_x", "need at least two sample points".into()));
        }
        let x_min = raw.f64("run", "x_min", -0.8)?;
        let x_max = raw.f64("run", "x_max", 0.8)?;
        if !(x_min < 0.0 && x_max > 0.0 && x_min.is_finite() && x_max.is_finite()) {
            return Err(err("run", "x_min", "x range must straddle 0".into()));
        }

        let cfg = RunConfig {
            potential,
            strip_halfwidth: raw.f64_opt("potential", "strip_halfwidth")?,
            decay_k: raw.f64_opt("potential", "decay_K")?,
            decay_delta: raw.f64("potential", "decay_delta", 1.0)?,
            eps_b: raw.f64("potential", "eps_B", 1.0)?,
            grid: GridSettings {
                xi_halfspan: raw.f64("grid", "xi_halfspan", 0.85)?,
                n_xi: raw.usize("grid", "n_xi", 35)?,
                n_eta: raw.usize("grid", "n_eta", 41)?,
                n_rho: raw.usize("grid", "n_rho", 69)?,
                quad_order: raw.usize("grid", "quad_order", 12)?,
                t_max: raw.f64_opt("grid", "t_max")?,
                interp,
            },
            lambdas,
            x_min,
            x_max,
            n_x,
            psi0,
            dpsi0: (raw.f64("run", "dpsi0_re", 0.0)?, raw.f64("run", "dpsi0_im", 1.0)?),
            refine: raw.f64("run", "refine", 1.5)?,
            picard_tol: raw.f64("tolerances", "picard_tol", 1e-12)?,
            max_iter: raw.usize("tolerances", "max_iter", 60)?,
            oracle_tol: raw.f64("tolerances", "oracle_tol", 1e-12)?,
            nu: raw.f64_opt("tolerances", "nu")?,
            invariance_drift: raw.f64("tolerances", "invariance_drift", 1e-6)?,
            singularity: SingularitySettings {
                beta: (
                    raw.f64("singularity", "beta_re", 0.5)?,
                    raw.f64("singularity", "beta_im", 0.0)?,
                ),
                v1: raw.string("singularity", "v1", "constant:1"),
                s_fixed: raw.f64("singularity", "s_fixed", 1.0)?,
                t_window: (
                    raw.f64("singularity", "t_window_lo", 0.002)?,
                    raw.f64("singularity", "t_window_hi", 0.02)?,
                ),
                n_s: raw.usize("singularity", "n_s", 33)?,
                n_theta: raw.usize("singularity", "n_theta", 201)?,
                s_max: raw.f64("singularity", "s_max", 1.05)?,
                convention: raw.string("singularity", "convention", "half_argument"),
            },
            verify_checks: raw.get("verify", "checks").map(|(_, v)| {
                v.split(',').map(|s| s.trim().to_string()).collect()
            }),
            canonical: canonicalize(&raw),
        };
        Ok(cfg)
    }

    /// T for the smallest λ unless pinned in the config.
    pub fn t_axis(&self) -> f64 {
        self.grid.t_max.unwrap_or_else(|| {
            let lmin = self.lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
            GoursatDomain::t_axis_for(lmin)
        })
    }

    pub fn domain(&self) -> GoursatDomain {
        GoursatDomain {
            xi_halfspan: self.grid.xi_halfspan,
            n_xi: self.grid.n_xi,
            t_max: self.t_axis(),
            n_eta: self.grid.n_eta,
            n_rho: self.grid.n_rho,
            quad_order: self.grid.quad_order,
            interp: self.grid.interp,
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = (0..self.n_x)
            .map(|i| self.x_min + (self.x_max - self.x_min) * i as f64 / (self.n_x - 1) as f64)
            .collect();
        // the decomposition anchors at x = 0; make sure it is a sample
        if !xs.iter().any(|x| x.abs() < 1e-12) {
            xs.push(0.0);
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
        xs
    }

    pub fn build_potential(&self) -> Result<Potential, crate::potentials::PotentialError> {
        let mut p = match &self.potential {
            PotentialKind::Zero => Potential::zero(),
            PotentialKind::Constant { c } => Potential::constant(*c),
            PotentialKind::Rational { numerator, denominator } => {
                Potential::rational(numerator.clone(), denominator.clone())
            }
            PotentialKind::RationalEps { numerator, denominator, order } => {
                let r = crate::potentials::Rational::new(numerator.clone(), denominator.clone());
                let coeffs = (0..=*order)
                    .map(|_| crate::potentials::Coefficient::Rational(r.clone()))
                    .collect();
                Potential::new(coeffs)
            }
            PotentialKind::PendulumSine { base, amplitude } => {
                pendulum_to_standard(PendulumSpec::sine_frequency(*base, *amplitude))?
            }
            PotentialKind::Mathieu { a, b, alpha, sigma_range } => {
                let spec = crate::potentials::MathieuSpec {
                    a: *a,
                    b: *b,
                    alpha: *alpha,
                    sigma_range: *sigma_range,
                };
                let (q, r) = crate::potentials::mathieu_to_standard(&spec)?;
                crate::potentials::liouville_normalize(q, r, *sigma_range)?
            }
        };
        if let Some(hw) = self.strip_halfwidth {
            p.strip_halfwidth = hw;
        }
        p.decay_delta = self.decay_delta;
        p.eps_b = self.eps_b;
        match self.decay_k {
            Some(k) => p.decay_k = k,
            None => {
                // fit on the region the solver will touch
                let im_max = 0.5 * self.t_axis() + 0.5;
                p.fit_decay(im_max)?;
            }
        }
        Ok(p)
    }

    pub fn branch_spec(&self) -> Result<BranchSpec, String> {
        let s = &self.singularity;
        let beta = num_complex::Complex64::new(s.beta.0, s.beta.1);
        let v1 = parse_v1(&s.v1)?;
        let mut spec = BranchSpec::new(beta, v1).map_err(|e| e.to_string())?;
        spec.s_max = s.s_max;
        spec.convention = match s.convention.as_str() {
            "half_argument" => KernelConvention::HalfArgument,
            "plain_argument" => KernelConvention::PlainArgument,
            other => return Err(format!("unknown kernel convention '{other}'")),
        };
        Ok(spec)
    }

    /// FNV-1a over the canonicalized key/value text.
    pub fn hash(&self) -> u64 {
        fnv1a(self.canonical.as_bytes())
    }
}

fn parse_v1(s: &str) -> Result<V1Kind, String> {
    if let Some(rest) = s.strip_prefix("constant:") {
        let c: f64 = rest.trim().parse().map_err(|_| format!("bad constant '{rest}'"))?;
        return Ok(V1Kind::Constant(c));
    }
    if let Some(rest) = s.strip_prefix("rational:") {
        let mut halves = rest.split('/');
        let num = halves.next().ok_or("missing numerator")?;
        let den = halves.next().ok_or("missing denominator")?;
        let parse_list = |t: &str| -> Result<Vec<f64>, String> {
            t.split(';')
                .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad coefficient '{p}'")))
                .collect()
        };
        return Ok(V1Kind::Rational(crate::potentials::Rational::new(
            parse_list(num)?,
            parse_list(den)?,
        )));
    }
    Err(format!("unknown v1 spec '{s}' (use constant:<c> or rational:<a;b>/<c;d>)"))
}

fn canonicalize(raw: &RawConfig) -> String {
    let mut out = String::new();
    for (section, keys) in &raw.sections {
        for (key, (_, value)) in keys {
            out.push_str(section);
            out.push('.');
            out.push_str(key);
            out.push('=');
            out.push_str(value);
            out.push('\n');
        }
    }
    out
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// The full default configuration as commented text (`--print-defaults`).
pub fn defaults_text() -> String {
    let text = "\
[potential]
kind = rational            # zero | constant | rational | rational_eps | pendulum_sine | mathieu
numerator = 1              # rational kinds: ascending coefficients
denominator = -4, 0, 1
# c = 1.0                  # constant kind
# omega_base = 2.0         # pendulum_sine: ω(u) = base + amplitude·sin u
# omega_amplitude = 1.0
strip_halfwidth = auto     # analyticity strip half-width (auto: per kind)
decay_K = auto             # decay bound; auto fits it on the working region
decay_delta = 1.0
eps_B = 1.0
eps_order = 1              # rational_eps only

[grid]
xi_halfspan = 0.85
n_xi = 35
n_eta = 41
n_rho = 69
quad_order = 12
t_max = auto               # auto: 3 + 40/min(lambdas)
interp = order6            # trilinear | tricubic | order6

[run]
lambdas = 10, 15, 20
x_min = -0.8
x_max = 0.8
n_x = 33
psi0_re = auto             # auto: 1/λ
psi0_im = auto
dpsi0_re = 0
dpsi0_im = 1
refine = 1.5               # grid refinement factor for convergence checks

[tolerances]
picard_tol = 1e-12
max_iter = 60
oracle_tol = 1e-12
nu = auto                  # auto: 4 ln(1e6)/T
invariance_drift = 1e-6

[singularity]
beta_re = 0.5
beta_im = 0
v1 = constant:1
s_fixed = 1.0
t_window_lo = 0.002
t_window_hi = 0.02
n_s = 33
n_theta = 201
s_max = 1.05
convention = half_argument # half_argument | plain_argument
";
    text.to_string()
}
