//! Dense bivariate polynomials in the graded monomial basis x^a y^b.

use std::ops::{Add, Mul};

/// Position of x^a y^b in the graded ordering 1, x, y, x^2, xy, y^2, ...
pub fn monomial_index(a: usize, b: usize) -> usize {
    let n = a + b;
    n * (n + 1) / 2 + b
}

pub fn num_monomials(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Exponent pairs (a, b) with a + b <= degree in graded order.
pub fn exponents(degree: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(num_monomials(degree));
    for n in 0..=degree {
        for b in 0..=n {
            out.push((n - b, b));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Poly2 {
    degree: usize,
    coef: Vec<f64>,
}

impl Poly2 {
    pub fn zero(degree: usize) -> Self {
        Self { degree, coef: vec![0.0; num_monomials(degree)] }
    }

    pub fn monomial(a: usize, b: usize) -> Self {
        let mut p = Self::zero(a + b);
        p.coef[monomial_index(a, b)] = 1.0;
        p
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    /// Degree of the highest nonzero coefficient (0 for the zero polynomial).
    pub fn effective_degree(&self, tol: f64) -> usize {
        exponents(self.degree).iter().zip(&self.coef).filter(|(_, c)| c.abs() > tol).map(|(&(a, b), _)| a + b).max().unwrap_or(0)
    }

    pub fn with_degree(&self, degree: usize) -> Self {
        assert!(degree >= self.effective_degree(0.0));
        let mut p = Self::zero(degree);
        let n = self.coef.len().min(p.coef.len());
        p.coef[..n].copy_from_slice(&self.coef[..n]);
        p
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { degree: self.degree, coef: self.coef.iter().map(|c| c * s).collect() }
    }

    /// Adds `s * other` in place.
    pub fn axpy(&mut self, s: f64, other: &Poly2) {
        if other.degree > self.degree {
            *self = self.with_degree(other.degree);
        }
        for (c, o) in self.coef.iter_mut().zip(&other.coef) {
            *c += s * o;
        }
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        let powers = Powers::new(p, self.degree);
        exponents(self.degree).iter().zip(&self.coef).map(|(&(a, b), c)| c * powers.x[a] * powers.y[b]).sum()
    }

    pub fn dx(&self) -> Poly2 {
        let mut out = Poly2::zero(self.degree.saturating_sub(1));
        for (&(a, b), c) in exponents(self.degree).iter().zip(&self.coef) {
            if a > 0 {
                out.coef[monomial_index(a - 1, b)] += c * a as f64;
            }
        }
        out
    }

    pub fn dy(&self) -> Poly2 {
        let mut out = Poly2::zero(self.degree.saturating_sub(1));
        for (&(a, b), c) in exponents(self.degree).iter().zip(&self.coef) {
            if b > 0 {
                out.coef[monomial_index(a, b - 1)] += c * b as f64;
            }
        }
        out
    }
}

impl Add for &Poly2 {
    type Output = Poly2;

    fn add(self, rhs: &Poly2) -> Poly2 {
        let mut out = self.with_degree(self.degree.max(rhs.degree));
        out.axpy(1.0, rhs);
        out
    }
}

impl Mul for &Poly2 {
    type Output = Poly2;

    fn mul(self, rhs: &Poly2) -> Poly2 {
        let mut out = Poly2::zero(self.degree + rhs.degree);
        let ea = exponents(self.degree);
        let eb = exponents(rhs.degree);
        for (&(a0, b0), c0) in ea.iter().zip(&self.coef) {
            if *c0 == 0.0 {
                continue;
            }
            for (&(a1, b1), c1) in eb.iter().zip(&rhs.coef) {
                out.coef[monomial_index(a0 + a1, b0 + b1)] += c0 * c1;
            }
        }
        out
    }
}

struct Powers {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Powers {
    fn new(p: [f64; 2], degree: usize) -> Self {
        let mut x = vec![1.0; degree + 1];
        let mut y = vec![1.0; degree + 1];
        for i in 1..=degree {
            x[i] = x[i - 1] * p[0];
            y[i] = y[i - 1] * p[1];
        }
        Self { x, y }
    }
}

/// Orthonormal Legendre polynomials on [0, 1]: sqrt(2j+1) P_j(2s - 1), j = 0..=n.
pub fn legendre01(n: usize, s: f64) -> Vec<f64> {
    let z = 2.0 * s - 1.0;
    let mut p = vec![1.0; n + 1];
    if n >= 1 {
        p[1] = z;
    }
    for j in 2..=n {
        p[j] = ((2 * j - 1) as f64 * z * p[j - 1] - (j - 1) as f64 * p[j - 2]) / j as f64;
    }
    p.iter().enumerate().map(|(j, v)| v * ((2 * j + 1) as f64).sqrt()).collect()
}

/// Derivatives with respect to s of the orthonormal Legendre polynomials on [0, 1].
pub fn legendre01_derivative(n: usize, s: f64) -> Vec<f64> {
    let z = 2.0 * s - 1.0;
    let mut p = vec![1.0; n + 1];
    let mut dp = vec![0.0; n + 1];
    if n >= 1 {
        p[1] = z;
        dp[1] = 1.0;
    }
    for j in 2..=n {
        p[j] = ((2 * j - 1) as f64 * z * p[j - 1] - (j - 1) as f64 * p[j - 2]) / j as f64;
        dp[j] = dp[j - 2] + (2 * j - 1) as f64 * p[j - 1];
    }
    dp.iter().enumerate().map(|(j, v)| 2.0 * v * ((2 * j + 1) as f64).sqrt()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::edge_quadrature;

    #[test]
    fn ordering() {
        assert_eq!(exponents(2), vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        for (i, &(a, b)) in exponents(5).iter().enumerate() {
            assert_eq!(monomial_index(a, b), i);
        }
    }

    #[test]
    fn derivative_and_product() {
        // p = 1 + 2x y + 3 y^2
        let mut p = Poly2::zero(2);
        p.axpy(1.0, &Poly2::monomial(0, 0));
        p.axpy(2.0, &Poly2::monomial(1, 1));
        p.axpy(3.0, &Poly2::monomial(0, 2));
        let pt = [0.3, -0.7];
        assert!((p.eval(pt) - (1.0 + 2.0 * 0.3 * -0.7 + 3.0 * 0.49)).abs() < 1e-15);
        assert!((p.dx().eval(pt) - 2.0 * -0.7).abs() < 1e-15);
        assert!((p.dy().eval(pt) - (2.0 * 0.3 + 6.0 * -0.7)).abs() < 1e-15);
        let sq = &p * &p;
        assert!((sq.eval(pt) - p.eval(pt).powi(2)).abs() < 1e-14);
        let sum = &p + &Poly2::monomial(3, 0);
        assert!((sum.eval(pt) - p.eval(pt) - 0.027).abs() < 1e-15);
    }

    #[test]
    fn legendre_orthonormal() {
        let rule = edge_quadrature(20);
        let n = 6;
        for i in 0..=n {
            for j in 0..=n {
                let v: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&s, &w)| {
                        let q = legendre01(n, s);
                        w * q[i] * q[j]
                    })
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn legendre_derivative_matches_difference() {
        let s = 0.37;
        let h = 1e-6;
        let plus = legendre01(5, s + h);
        let minus = legendre01(5, s - h);
        let d = legendre01_derivative(5, s);
        for j in 0..=5 {
            assert!(((plus[j] - minus[j]) / (2.0 * h) - d[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn legendre_reflection() {
        let a = legendre01(4, 0.2);
        let b = legendre01(4, 0.8);
        for j in 0..=4 {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            assert!((a[j] - sign * b[j]).abs() < 1e-14);
        }
    }
}
