//! Checkpoint format for resumable fixed-point iteration: a text header
//! (grid metadata, ν, potential hash, iteration count) followed by the
//! row-major samples as hex-encoded f64 bit patterns, so a resumed run is
//! bitwise identical to an uninterrupted one.

use crate::goursat::{Branch, GoursatDomain, GridField, InterpOrder};
use num_complex::Complex64;
use std::fmt::Write as _;
use thiserror::Error;

pub const MAGIC: &str = "borelsum-checkpoint v1";

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("checkpoint does not match the run: {0}")]
    Mismatch(String),
}

/// A parsed checkpoint: the iterate plus enough metadata to validate a
/// resume against the configured run.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub field: GridField,
    pub iteration: usize,
    pub potential_hash: u64,
}

pub fn write_checkpoint(field: &GridField, iteration: usize, potential_hash: u64) -> String {
    let d = &field.domain;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "branch = {}", field.branch.label());
    let _ = writeln!(out, "xi_halfspan = {}", hex_f64(d.xi_halfspan));
    let _ = writeln!(out, "n_xi = {}", d.n_xi);
    let _ = writeln!(out, "t_max = {}", hex_f64(d.t_max));
    let _ = writeln!(out, "n_eta = {}", d.n_eta);
    let _ = writeln!(out, "n_rho = {}", d.n_rho);
    let _ = writeln!(out, "quad_order = {}", d.quad_order);
    let _ = writeln!(out, "interp = {}", d.interp.label());
    let _ = writeln!(out, "nu = {}", hex_f64(field.norm_nu));
    let _ = writeln!(out, "iteration = {iteration}");
    let _ = writeln!(out, "potential_hash = {potential_hash:016x}");
    let _ = writeln!(out, "samples = {}", field.values.len());
    for v in &field.values {
        let _ = writeln!(out, "{},{}", hex_f64(v.re), hex_f64(v.im));
    }
    out
}

pub fn parse_checkpoint(text: &str) -> Result<Checkpoint, CheckpointError> {
    let mut lines = text.lines().enumerate();
    let perr = |line: usize, message: String| CheckpointError::Parse { line: line + 1, message };
    let (i0, magic) = lines.next().ok_or(perr(0, "empty checkpoint".into()))?;
    if magic.trim() != MAGIC {
        return Err(perr(i0, format!("bad magic '{magic}'")));
    }
    let mut branch = None;
    let mut xi_halfspan = None;
    let mut n_xi = None;
    let mut t_max = None;
    let mut n_eta = None;
    let mut n_rho = None;
    let mut quad_order = None;
    let mut interp = None;
    let mut nu = None;
    let mut iteration = None;
    let mut potential_hash = None;
    let mut samples = None;

    let mut header_done_at = None;
    for (i, line) in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(perr(i, "expected 'key = value' in header".into()))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "branch" => {
                branch = Some(match value {
                    "plus" => Branch::Plus,
                    "minus" => Branch::Minus,
                    other => return Err(perr(i, format!("unknown branch '{other}'"))),
                })
            }
            "xi_halfspan" => xi_halfspan = Some(parse_hex_f64(value, i)?),
            "n_xi" => n_xi = Some(parse_usize(value, i)?),
            "t_max" => t_max = Some(parse_hex_f64(value, i)?),
            "n_eta" => n_eta = Some(parse_usize(value, i)?),
            "n_rho" => n_rho = Some(parse_usize(value, i)?),
            "quad_order" => quad_order = Some(parse_usize(value, i)?),
            "interp" => {
                interp = Some(match value {
                    "trilinear" => InterpOrder::Linear,
                    "tricubic" => InterpOrder::Cubic,
                    "order-6" => InterpOrder::Order6,
                    other => return Err(perr(i, format!("unknown interpolation '{other}'"))),
                })
            }
            "nu" => nu = Some(parse_hex_f64(value, i)?),
            "iteration" => iteration = Some(parse_usize(value, i)?),
            "potential_hash" => {
                potential_hash = Some(
                    u64::from_str_radix(value, 16)
                        .map_err(|_| perr(i, format!("bad hash '{value}'")))?,
                )
            }
            "samples" => {
                samples = Some(parse_usize(value, i)?);
                header_done_at = Some(i);
                break;
            }
            other => return Err(perr(i, format!("unknown header key '{other}'"))),
        }
    }
    let header_end = header_done_at.ok_or(perr(0, "truncated header".into()))?;
    let missing = |what: &str| perr(header_end, format!("missing header key '{what}'"));
    let domain = GoursatDomain {
        xi_halfspan: xi_halfspan.ok_or_else(|| missing("xi_halfspan"))?,
        n_xi: n_xi.ok_or_else(|| missing("n_xi"))?,
        t_max: t_max.ok_or_else(|| missing("t_max"))?,
        n_eta: n_eta.ok_or_else(|| missing("n_eta"))?,
        n_rho: n_rho.ok_or_else(|| missing("n_rho"))?,
        quad_order: quad_order.ok_or_else(|| missing("quad_order"))?,
        interp: interp.ok_or_else(|| missing("interp"))?,
    };
    let n_samples = samples.ok_or_else(|| missing("samples"))?;
    if !(domain.xi_halfspan.is_finite() && domain.t_max.is_finite()) {
        return Err(perr(header_end, "non-finite domain metadata".into()));
    }
    let expected = domain
        .n_xi
        .checked_mul(domain.n_eta)
        .and_then(|p| p.checked_mul(domain.n_rho))
        .ok_or(perr(header_end, "grid size overflow".into()))?;
    if n_samples != expected || n_samples == 0 || n_samples > 200_000_000 {
        return Err(perr(
            header_end,
            format!("sample count {n_samples} does not match grid ({expected})"),
        ));
    }
    let mut values = Vec::with_capacity(n_samples);
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (re, im) = line
            .split_once(',')
            .ok_or(perr(i, "expected 're,im' sample".into()))?;
        values.push(Complex64::new(parse_hex_f64(re.trim(), i)?, parse_hex_f64(im.trim(), i)?));
        if values.len() > n_samples {
            return Err(perr(i, "more samples than declared".into()));
        }
    }
    if values.len() != n_samples {
        return Err(CheckpointError::Parse {
            line: 0,
            message: format!("expected {n_samples} samples, found {}", values.len()),
        });
    }
    Ok(Checkpoint {
        field: GridField {
            domain,
            branch: branch.ok_or_else(|| missing("branch"))?,
            values,
            norm_nu: nu.ok_or_else(|| missing("nu"))?,
        },
        iteration: iteration.ok_or_else(|| missing("iteration"))?,
        potential_hash: potential_hash.ok_or_else(|| missing("potential_hash"))?,
    })
}

impl Checkpoint {
    /// A resume is only valid against the identical discretization and
    /// potential.
    pub fn validate(&self, domain: &GoursatDomain, potential_hash: u64) -> Result<(), CheckpointError> {
        if self.field.domain != *domain {
            return Err(CheckpointError::Mismatch(format!(
                "domain {} vs {}",
                self.field.domain.descriptor(),
                domain.descriptor()
            )));
        }
        if self.potential_hash != potential_hash {
            return Err(CheckpointError::Mismatch(format!(
                "potential hash {:016x} vs {potential_hash:016x}",
                self.potential_hash
            )));
        }
        Ok(())
    }
}

fn hex_f64(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

fn parse_hex_f64(s: &str, line: usize) -> Result<f64, CheckpointError> {
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| CheckpointError::Parse {
            line: line + 1,
            message: format!("bad f64 bits '{s}'"),
        })
}

fn parse_usize(s: &str, line: usize) -> Result<usize, CheckpointError> {
    s.parse::<usize>().map_err(|_| CheckpointError::Parse {
        line: line + 1,
        message: format!("bad integer '{s}'"),
    })
}
