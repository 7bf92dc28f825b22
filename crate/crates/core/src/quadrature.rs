//! Quadrature on the unit interval and on the reference triangle
//! {x, y >= 0, x + y <= 1}.

use crate::error::ElementError;

pub const MAX_DEGREE: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRule {
    /// Parameters in [0, 1].
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl EdgeRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss rule on [0, 1] exact for polynomials of the given degree.
pub fn edge_quadrature(degree: usize) -> EdgeRule {
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    EdgeRule { points: x.iter().map(|&t| 0.5 * (t + 1.0)).collect(), weights: w.iter().map(|&t| 0.5 * t).collect() }
}

/// Triangle rule exact for polynomials of total degree `degree`.
pub fn triangle_quadrature(degree: usize) -> Result<QuadratureRule, ElementError> {
    if degree > MAX_DEGREE {
        return Err(ElementError::QuadratureDegree(degree));
    }
    let (points, weights) = match degree {
        0 | 1 => (vec![[1.0 / 3.0, 1.0 / 3.0]], vec![0.5]),
        2 => (vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]], vec![1.0 / 6.0; 3]),
        _ => collapsed_gauss(degree),
    };
    Ok(QuadratureRule { points, weights, degree })
}

/// Duffy-collapsed tensor Gauss rule: x = s, y = t (1 - s) with Jacobian (1 - s).
fn collapsed_gauss(degree: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let m = (degree + 2).div_ceil(2);
    let (x, w) = gauss_legendre(m);
    let mut points = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for i in 0..m {
        let s = 0.5 * (x[i] + 1.0);
        let ws = 0.5 * w[i];
        for j in 0..m {
            let t = 0.5 * (x[j] + 1.0);
            let wt = 0.5 * w[j];
            points.push([s, t * (1.0 - s)]);
            weights.push(ws * wt * (1.0 - s));
        }
    }
    (points, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Exact integral of x^a y^b over the reference triangle: a! b! / (a + b + 2)!.
    fn monomial_integral(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn exact_on_monomials() {
        for d in 0..=MAX_DEGREE {
            let q = triangle_quadrature(d).unwrap();
            let total: f64 = q.weights.iter().sum();
            assert!((total - 0.5).abs() < 1e-14, "degree {d}");
            assert!(q.weights.iter().all(|&w| w > 0.0));
            for a in 0..=d as u32 {
                for b in 0..=(d as u32 - a) {
                    let approx: f64 =
                        q.points.iter().zip(&q.weights).map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                    let exact = monomial_integral(a, b);
                    assert!(((approx - exact) / exact).abs() < 1e-13, "degree {d}: x^{a} y^{b}");
                }
            }
        }
    }

    #[test]
    fn second_moment() {
        let q = triangle_quadrature(2).unwrap();
        let v: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| w * p[0] * p[0]).sum();
        assert!((v - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn low_degree_is_centroid() {
        let q = triangle_quadrature(1).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q.weights[0], 0.5);
    }

    #[test]
    fn out_of_range_degree() {
        assert_eq!(triangle_quadrature(21), Err(ElementError::QuadratureDegree(21)));
    }

    #[test]
    fn edge_rule_exact() {
        for d in 0..=25 {
            let e = edge_quadrature(d);
            for p in 0..=d as i32 {
                let v: f64 = e.points.iter().zip(&e.weights).map(|(s, w)| w * s.powi(p)).sum();
                assert!((v - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "degree {d} power {p}");
            }
        }
    }
}
