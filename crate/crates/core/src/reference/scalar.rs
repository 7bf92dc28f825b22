//! L2-orthonormal basis of P_l on the reference triangle.

use super::polynomial::{exponents, Poly2};
use crate::quadrature::triangle_quadrature;

#[derive(Debug, Clone)]
pub struct ScalarBasis {
    degree: usize,
    polys: Vec<Poly2>,
    grads: Vec<[Poly2; 2]>,
}

impl ScalarBasis {
    /// Gram-Schmidt over the graded monomials, orthonormal in L2 of the
    /// reference triangle. The first function is the constant sqrt(2).
    pub fn new(degree: usize) -> Self {
        let rule = triangle_quadrature(2 * degree).expect("degree within quadrature range");
        let table = |p: &Poly2| -> Vec<f64> { rule.points.iter().map(|&x| p.eval(x)).collect() };
        let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(&rule.weights).map(|((x, y), w)| x * y * w).sum() };

        let mut polys: Vec<Poly2> = Vec::new();
        let mut tables: Vec<Vec<f64>> = Vec::new();
        for &(a, b) in &exponents(degree) {
            let mut p = Poly2::monomial(a, b).with_degree(degree);
            // Two passes of modified Gram-Schmidt for robustness.
            for _ in 0..2 {
                for (q, tq) in polys.iter().zip(&tables) {
                    let c = dot(&table(&p), tq);
                    p.axpy(-c, q);
                }
            }
            let tp = table(&p);
            let norm = dot(&tp, &tp).sqrt();
            let p = p.scale(1.0 / norm);
            tables.push(table(&p));
            polys.push(p);
        }
        let grads = polys.iter().map(|p| [p.dx(), p.dy()]).collect();
        Self { degree, polys, grads }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn polys(&self) -> &[Poly2] {
        &self.polys
    }

    pub fn eval(&self, p: [f64; 2]) -> Vec<f64> {
        self.polys.iter().map(|q| q.eval(p)).collect()
    }

    pub fn eval_grad(&self, p: [f64; 2]) -> Vec<[f64; 2]> {
        self.grads.iter().map(|g| [g[0].eval(p), g[1].eval(p)]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(ScalarBasis::new(2).len(), 6);
        assert_eq!(ScalarBasis::new(3).len(), 10);
        // Pressure dofs of the two reference meshes: 8414 and 1680 triangles.
        assert_eq!(8414 * ScalarBasis::new(2).len(), 50484);
        assert_eq!(1680 * ScalarBasis::new(3).len(), 16800);
    }

    #[test]
    fn mass_matrix_is_identity() {
        for l in 0..=5 {
            let basis = ScalarBasis::new(l);
            let rule = triangle_quadrature(2 * l + 2).unwrap();
            let n = basis.len();
            let mut mass = vec![0.0; n * n];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let v = basis.eval(*p);
                for i in 0..n {
                    for j in 0..n {
                        mass[i * n + j] += w * v[i] * v[j];
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((mass[i * n + j] - expect).abs() < 1e-12, "degree {l} entry ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn constant_function_first() {
        let b = ScalarBasis::new(3);
        let v = b.eval([0.2, 0.3]);
        assert!((v[0] - 2f64.sqrt()).abs() < 1e-14);
    }
}
