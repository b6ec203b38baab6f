//! Truncated Laurent series in μ = 1/λ, used to expand the invariant
//! determinant formula in powers of λ⁻¹.

use num_complex::Complex64;

/// Σ_j coeffs[j] λ^{−(start+j)}, truncated after `coeffs.len()` terms.
/// `start` may be negative (terms growing with λ).
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentSeries {
    pub start: i32,
    pub coeffs: Vec<Complex64>,
}

impl LaurentSeries {
    pub fn constant(c: Complex64, len: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); len];
        coeffs[0] = c;
        LaurentSeries { start: 0, coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of λ^{−k}, zero outside the carried window.
    pub fn coeff(&self, k: i32) -> Complex64 {
        let j = k - self.start;
        if j < 0 || j as usize >= self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[j as usize]
        }
    }

    /// Drops leading (near-)zero coefficients so the series starts at its
    /// true order; keeps the truncation window end fixed.
    pub fn normalized(mut self) -> Self {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        while self.coeffs.len() > 1 && self.coeffs[0].norm() <= 1e-13 * scale {
            self.coeffs.remove(0);
            self.start += 1;
        }
        self
    }

    pub fn add(&self, other: &Self) -> Self {
        let start = self.start.min(other.start);
        let end = (self.start + self.coeffs.len() as i32).min(other.start + other.coeffs.len() as i32);
        let len = (end - start).max(1) as usize;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); len];
        for (j, c) in coeffs.iter_mut().enumerate() {
            let k = start + j as i32;
            *c = self.coeff(k) + other.coeff(k);
        }
        LaurentSeries { start, coeffs }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        LaurentSeries {
            start: self.start,
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// Product, truncated to the window both operands can support.
    pub fn mul(&self, other: &Self) -> Self {
        let start = self.start + other.start;
        let len = self.coeffs.len().min(other.coeffs.len());
        let mut coeffs = vec![Complex64::new(0.0, 0.0); len];
        for (i, a) in self.coeffs.iter().enumerate().take(len) {
            for (j, b) in other.coeffs.iter().enumerate() {
                if i + j < len {
                    coeffs[i + j] += a * b;
                }
            }
        }
        LaurentSeries { start, coeffs }
    }

    /// Multiplicative inverse of a series with nonzero leading coefficient.
    pub fn inverse(&self) -> Self {
        let s = self.clone().normalized();
        let lead = s.coeffs[0];
        assert!(lead.norm() > 0.0, "cannot invert a zero series");
        let len = s.coeffs.len();
        let mut inv = vec![Complex64::new(0.0, 0.0); len];
        inv[0] = Complex64::new(1.0, 0.0) / lead;
        for j in 1..len {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 1..=j {
                acc += s.coeffs[m] * inv[j - m];
            }
            inv[j] = -acc / lead;
        }
        LaurentSeries { start: -s.start, coeffs: inv }
    }

    pub fn div(&self, other: &Self) -> Self {
        self.mul(&other.inverse())
    }

    /// Numeric value Σ coeffs[j] λ^{−(start+j)} at a concrete λ.
    pub fn eval(&self, lambda: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, c) in self.coeffs.iter().enumerate() {
            acc += c * lambda.powi(-(self.start + j as i32));
        }
        acc
    }

    /// Truncates to terms with exponent ≤ `max_k` (λ^{−max_k} kept).
    pub fn truncate_at(&self, max_k: i32) -> Self {
        let keep = (max_k - self.start + 1).max(1) as usize;
        LaurentSeries {
            start: self.start,
            coeffs: self.coeffs.iter().take(keep).copied().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn product_and_inverse_roundtrip() {
        // s = λ^{-1}(1 + 2μ + 3μ²…)
        let s = LaurentSeries { start: 1, coeffs: vec![c(1.0, 0.0), c(2.0, 0.5), c(3.0, -1.0), c(-0.5, 0.0)] };
        let prod = s.mul(&s.inverse());
        assert_eq!(prod.start + 0, 0);
        assert!((prod.coeff(0) - c(1.0, 0.0)).norm() < 1e-14);
        for k in 1..3 {
            assert!(prod.coeff(k).norm() < 1e-13);
        }
    }

    #[test]
    fn geometric_series_inverse() {
        // (1 - μ)^{-1} = 1 + μ + μ² + …
        let s = LaurentSeries { start: 0, coeffs: vec![c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)] };
        let inv = s.inverse();
        for k in 0..4 {
            assert!((inv.coeff(k) - c(1.0, 0.0)).norm() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn eval_matches_horner() {
        let s = LaurentSeries { start: -1, coeffs: vec![c(2.0, 0.0), c(1.0, 0.0), c(0.5, 0.0)] };
        // 2λ + 1 + 0.5/λ at λ = 4: 8 + 1 + 0.125
        assert!((s.eval(4.0) - c(9.125, 0.0)).norm() < 1e-14);
    }
}
