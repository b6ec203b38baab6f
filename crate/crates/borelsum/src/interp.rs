//! Local polynomial interpolation on uniform and graded grids, plus the
//! centered finite-difference stencils used for derivative fields.

use num_complex::Complex64;

/// Barycentric weights of a 4-point Lagrange stencil at offsets 0,1,2,3:
/// returns the coefficients for data values at those offsets, evaluated at
/// fractional position `u` measured from offset 0.
#[inline]
pub fn lagrange4(u: f64) -> [f64; 4] {
    let u1 = u - 1.0;
    let u2 = u - 2.0;
    let u3 = u - 3.0;
    [
        -u1 * u2 * u3 / 6.0,
        u * u2 * u3 / 2.0,
        -u * u1 * u3 / 2.0,
        u * u1 * u2 / 6.0,
    ]
}

/// 6-point Lagrange stencil at offsets 0..5 evaluated at `u`.
#[inline]
pub fn lagrange6(u: f64) -> [f64; 6] {
    let mut out = [0.0; 6];
    for (j, slot) in out.iter_mut().enumerate() {
        let mut w = 1.0;
        for k in 0..6 {
            if k != j {
                w *= (u - k as f64) / (j as f64 - k as f64);
            }
        }
        *slot = w;
    }
    out
}

/// Stencil placement on a uniform grid of `n` points: returns the base index
/// and the fractional offset for an `m`-point stencil around coordinate `x`
/// (in units of the grid spacing, origin at index 0). Clamps at the ends.
#[inline]
pub fn stencil_base(x: f64, n: usize, m: usize) -> (usize, f64) {
    debug_assert!(n >= m);
    let center = m / 2; // queries sit between offsets center-1 and center
    let i = x.floor() as isize;
    let base = (i - center as isize + 1).clamp(0, (n - m) as isize) as usize;
    (base, x - base as f64)
}

/// Interpolation on a uniform 1-D grid with an m-point stencil (m = 4 or 6).
pub fn interp_uniform(values: &[Complex64], x: f64, m: usize) -> Complex64 {
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let m = m.min(n);
    let (base, u) = stencil_base(x, n, m);
    let mut acc = Complex64::new(0.0, 0.0);
    match m {
        4 => {
            let w = lagrange4(u);
            for (j, wj) in w.iter().enumerate() {
                acc += values[base + j] * *wj;
            }
        }
        6 => {
            let w = lagrange6(u);
            for (j, wj) in w.iter().enumerate() {
                acc += values[base + j] * *wj;
            }
        }
        _ => {
            // generic Lagrange for small m
            for j in 0..m {
                let mut w = 1.0;
                for k in 0..m {
                    if k != j {
                        w *= (u - k as f64) / (j as f64 - k as f64);
                    }
                }
                acc += values[base + j] * w;
            }
        }
    }
    acc
}

/// Cubic Lagrange interpolation on a strictly increasing nonuniform grid.
pub fn interp_nonuniform(xs: &[f64], values: &[Complex64], x: f64) -> Complex64 {
    let n = xs.len();
    assert!(n >= 2 && n == values.len());
    let m = 4.min(n);
    // locate the cell by binary search
    let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i,
        Err(i) => i.saturating_sub(1),
    };
    let base = (i as isize - 1).clamp(0, (n - m) as isize) as usize;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..m {
        let mut w = 1.0;
        for k in 0..m {
            if k != j {
                w *= (x - xs[base + k]) / (xs[base + j] - xs[base + k]);
            }
        }
        acc += values[base + j] * w;
    }
    acc
}

/// Order of the centered first-derivative stencil used for field derivatives.
pub const FD_ORDER: usize = 6;

/// First derivative on a uniform grid by 6th-order differences
/// (one-sided stencils of the same order at the ends).
pub fn derivative_uniform(values: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = values.len();
    assert!(n >= 7, "need at least 7 points for 6th-order differences");
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    // centered: (-1/60, 3/20, -3/4, 0, 3/4, -3/20, 1/60)
    let c = [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
    for i in 3..n - 3 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &ck) in c.iter().enumerate() {
            acc += values[i + k - 3] * ck;
        }
        out[i] = acc / h;
    }
    // one-sided 6th order at the boundary: differentiate the degree-6
    // interpolating polynomial through the first/last 7 nodes.
    for i in 0..3 {
        out[i] = poly_derivative_at(values, 0, 7, i as f64) / h;
        out[n - 1 - i] = poly_derivative_at(values, n - 7, 7, (6 - i) as f64) / h;
    }
    out
}

/// Derivative of the Lagrange polynomial through `values[base..base+m]`
/// (unit spacing) at local coordinate `u`.
fn poly_derivative_at(values: &[Complex64], base: usize, m: usize, u: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..m {
        // d/du of the j-th Lagrange basis at u
        let mut dsum = 0.0;
        for p in 0..m {
            if p == j {
                continue;
            }
            let mut prod = 1.0;
            for k in 0..m {
                if k != j && k != p {
                    prod *= (u - k as f64) / (j as f64 - k as f64);
                }
            }
            dsum += prod / (j as f64 - p as f64);
        }
        acc += values[base + j] * dsum;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn cubic_reproduces_cubics() {
        let vals: Vec<Complex64> = (0..8).map(|i| c((i as f64).powi(3) - 2.0 * i as f64)).collect();
        for &x in &[0.3, 1.7, 3.5, 6.9] {
            let got = interp_uniform(&vals, x, 4);
            assert_relative_eq!(got.re, x.powi(3) - 2.0 * x, max_relative = 1e-12);
        }
    }

    #[test]
    fn quintic_reproduces_quintics() {
        let f = |x: f64| x.powi(5) - x.powi(4) + 0.5 * x;
        let vals: Vec<Complex64> = (0..10).map(|i| c(f(i as f64))).collect();
        for &x in &[0.2, 4.5, 8.9] {
            let got = interp_uniform(&vals, x, 6);
            assert_relative_eq!(got.re, f(x), max_relative = 1e-11, epsilon = 1e-11);
        }
    }

    #[test]
    fn nonuniform_cubic_matches_on_graded_grid() {
        let xs: Vec<f64> = (0..30).map(|i| (i as f64 / 29.0).powi(2)).collect();
        let vals: Vec<Complex64> = xs.iter().map(|&x| c(x.powi(3) + x)).collect();
        for &x in &[0.01, 0.3, 0.77] {
            let got = interp_nonuniform(&xs, &vals, x);
            assert_relative_eq!(got.re, x.powi(3) + x, max_relative = 1e-12);
        }
    }

    #[test]
    fn derivative_smooth_function() {
        let n = 41;
        let h = 0.05;
        let vals: Vec<Complex64> = (0..n).map(|i| c((i as f64 * h).sin())).collect();
        let d = derivative_uniform(&vals, h);
        for i in 0..n {
            let x = i as f64 * h;
            // one-sided end stencils carry a larger error constant
            let tol = if (3..n - 3).contains(&i) { 2e-9 } else { 5e-8 };
            assert_relative_eq!(d[i].re, x.cos(), epsilon = tol);
        }
    }
}
