//! Raviart-Thomas shape functions on the reference triangle.
//!
//! The local space is P_k^2 + x P~_k with (k+1)(k+3) degrees of freedom:
//! `k + 1` normal moments per edge against orthonormal Legendre polynomials on
//! the edge parameter, then `k (k + 1)` interior moments against an orthonormal
//! basis of P_{k-1}^2. Local edge `i` runs counter-clockwise from vertex `i + 1`
//! to vertex `i + 2`, and its moments use the outward normal.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;

use super::polynomial::{legendre01, legendre01_derivative, Poly2};
use super::scalar::ScalarBasis;
use crate::error::ElementError;
use crate::quadrature::{edge_quadrature, triangle_quadrature, EdgeRule, QuadratureRule};

pub const REFERENCE_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Start point and (unnormalised) tangent of local reference edge `i`.
pub fn reference_edge(i: usize) -> ([f64; 2], [f64; 2]) {
    let a = REFERENCE_VERTICES[(i + 1) % 3];
    let b = REFERENCE_VERTICES[(i + 2) % 3];
    (a, [b[0] - a[0], b[1] - a[1]])
}

/// Point on local reference edge `i` at parameter `s`.
pub fn reference_edge_point(i: usize, s: f64) -> [f64; 2] {
    let (a, t) = reference_edge(i);
    [a[0] + s * t[0], a[1] + s * t[1]]
}

/// Outward normal of local reference edge `i`, scaled by the edge length.
pub fn reference_scaled_normal(i: usize) -> [f64; 2] {
    let (_, t) = reference_edge(i);
    [t[1], -t[0]]
}

/// Values, gradients and divergences of all shape functions at a point set.
#[derive(Debug, Clone)]
pub struct RtTable {
    pub num_points: usize,
    pub num_dofs: usize,
    /// `values[q * num_dofs + i]`
    pub values: Vec<[f64; 2]>,
    /// `grads[q * num_dofs + i][c][d]` = d(component c)/d(x_d)
    pub grads: Vec<[[f64; 2]; 2]>,
    pub divs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RtBasis {
    degree: usize,
    shapes: Vec<[Poly2; 2]>,
    grads: Vec<[[Poly2; 2]; 2]>,
    divs: Vec<Poly2>,
    interior: ScalarBasis,
}

type Field<'a> = &'a dyn Fn([f64; 2]) -> [f64; 2];

impl RtBasis {
    pub fn new(degree: usize) -> Result<Self, ElementError> {
        if !(1..=4).contains(&degree) {
            return Err(ElementError::UnsupportedDegree(degree));
        }
        let k = degree;
        let interior = ScalarBasis::new(k - 1);
        let full = ScalarBasis::new(k);

        let mut span: Vec<[Poly2; 2]> = Vec::new();
        for p in full.polys() {
            span.push([p.with_degree(k + 1), Poly2::zero(k + 1)]);
            span.push([Poly2::zero(k + 1), p.with_degree(k + 1)]);
        }
        for a in 0..=k {
            span.push([Poly2::monomial(a + 1, k - a), Poly2::monomial(a, k - a + 1)]);
        }
        let n = span.len();
        debug_assert_eq!(n, (k + 1) * (k + 3));

        let mut me = Self { degree, shapes: Vec::new(), grads: Vec::new(), divs: Vec::new(), interior };
        let edge = edge_quadrature(2 * k + 2);
        let vol = triangle_quadrature(2 * k + 2)?;
        let mut dofs = Mat::<f64>::zeros(n, n);
        for (j, s) in span.iter().enumerate() {
            let f = |x: [f64; 2]| [s[0].eval(x), s[1].eval(x)];
            for (i, v) in me.dofs_from_field(&f, &edge, &vol).into_iter().enumerate() {
                dofs[(i, j)] = v;
            }
        }
        let inv = dofs.partial_piv_lu().inverse();
        if !(0..n).all(|i| (0..n).all(|j| inv[(i, j)].is_finite())) {
            return Err(ElementError::SingularBasis);
        }
        for j in 0..n {
            let mut u = Poly2::zero(k + 1);
            let mut v = Poly2::zero(k + 1);
            for (m, s) in span.iter().enumerate() {
                u.axpy(inv[(m, j)], &s[0]);
                v.axpy(inv[(m, j)], &s[1]);
            }
            me.divs.push(&u.dx() + &v.dy());
            me.grads.push([[u.dx(), u.dy()], [v.dx(), v.dy()]]);
            me.shapes.push([u, v]);
        }

        // Duality check on the constructed basis.
        for j in 0..n {
            let s = &me.shapes[j];
            let f = |x: [f64; 2]| [s[0].eval(x), s[1].eval(x)];
            for (i, v) in me.dofs_from_field(&f, &edge, &vol).into_iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (v - expect).abs() > 1e-10 {
                    return Err(ElementError::SingularBasis);
                }
            }
        }
        Ok(me)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_dofs(&self) -> usize {
        (self.degree + 1) * (self.degree + 3)
    }

    pub fn dofs_per_edge(&self) -> usize {
        self.degree + 1
    }

    pub fn num_interior_dofs(&self) -> usize {
        self.degree * (self.degree + 1)
    }

    pub fn edge_dof(&self, edge: usize, j: usize) -> usize {
        edge * (self.degree + 1) + j
    }

    pub fn interior_dof(&self, m: usize) -> usize {
        3 * (self.degree + 1) + m
    }

    pub fn shape(&self, i: usize) -> &[Poly2; 2] {
        &self.shapes[i]
    }

    pub fn divergence(&self, i: usize) -> &Poly2 {
        &self.divs[i]
    }

    pub fn eval(&self, x: [f64; 2]) -> Vec<[f64; 2]> {
        self.shapes.iter().map(|s| [s[0].eval(x), s[1].eval(x)]).collect()
    }

    pub fn eval_grad(&self, x: [f64; 2]) -> Vec<[[f64; 2]; 2]> {
        self.grads.iter().map(|g| [[g[0][0].eval(x), g[0][1].eval(x)], [g[1][0].eval(x), g[1][1].eval(x)]]).collect()
    }

    pub fn eval_div(&self, x: [f64; 2]) -> Vec<f64> {
        self.divs.iter().map(|d| d.eval(x)).collect()
    }

    pub fn tabulate(&self, points: &[[f64; 2]]) -> RtTable {
        let n = self.num_dofs();
        let mut values = Vec::with_capacity(points.len() * n);
        let mut grads = Vec::with_capacity(points.len() * n);
        let mut divs = Vec::with_capacity(points.len() * n);
        for &p in points {
            values.extend(self.eval(p));
            grads.extend(self.eval_grad(p));
            divs.extend(self.eval_div(p));
        }
        RtTable { num_points: points.len(), num_dofs: n, values, grads, divs }
    }

    /// Applies the degree-of-freedom functionals to a reference vector field.
    pub fn dofs_from_field(&self, f: Field<'_>, edge: &EdgeRule, vol: &QuadratureRule) -> Vec<f64> {
        let k = self.degree;
        let mut out = vec![0.0; self.num_dofs()];
        for e in 0..3 {
            let normal = reference_scaled_normal(e);
            for (&s, &w) in edge.points.iter().zip(&edge.weights) {
                let v = f(reference_edge_point(e, s));
                let flux = v[0] * normal[0] + v[1] * normal[1];
                for (j, q) in legendre01(k, s).into_iter().enumerate() {
                    out[self.edge_dof(e, j)] += w * flux * q;
                }
            }
        }
        let m = self.interior.len();
        for (&x, &w) in vol.points.iter().zip(&vol.weights) {
            let v = f(x);
            for (a, p) in self.interior.eval(x).into_iter().enumerate() {
                out[self.interior_dof(a)] += w * v[0] * p;
                out[self.interior_dof(m + a)] += w * v[1] * p;
            }
        }
        out
    }

    /// Degrees of freedom of curl(psi) = (d psi/dy, -d psi/dx) computed from
    /// values of the stream function only, by integrating by parts on each edge
    /// and over the triangle. Exact divergence-freedom of the result does not
    /// depend on quadrature accuracy.
    pub fn dofs_from_stream(&self, psi: &dyn Fn([f64; 2]) -> f64, edge: &EdgeRule, vol: &QuadratureRule) -> Vec<f64> {
        let k = self.degree;
        let mut out = vec![0.0; self.num_dofs()];
        let m = self.interior.len();
        let q0 = legendre01(k, 0.0);
        let q1 = legendre01(k, 1.0);
        for e in 0..3 {
            let (_, t) = reference_edge(e);
            let start = psi(reference_edge_point(e, 0.0));
            let end = psi(reference_edge_point(e, 1.0));
            for j in 0..=k {
                out[self.edge_dof(e, j)] += end * q1[j] - start * q0[j];
            }
            for (&s, &w) in edge.points.iter().zip(&edge.weights) {
                let x = reference_edge_point(e, s);
                let ps = psi(x);
                for (j, dq) in legendre01_derivative(k, s).into_iter().enumerate() {
                    out[self.edge_dof(e, j)] -= w * ps * dq;
                }
                // Boundary part of the interior moments: - int psi r.t ds.
                for (a, p) in self.interior.eval(x).into_iter().enumerate() {
                    out[self.interior_dof(a)] -= w * ps * p * t[0];
                    out[self.interior_dof(m + a)] -= w * ps * p * t[1];
                }
            }
        }
        // Volume part: int psi rot r with rot(p, 0) = -dp/dy and rot(0, p) = dp/dx.
        for (&x, &w) in vol.points.iter().zip(&vol.weights) {
            let ps = psi(x);
            for (a, g) in self.interior.eval_grad(x).into_iter().enumerate() {
                out[self.interior_dof(a)] -= w * ps * g[1];
                out[self.interior_dof(m + a)] += w * ps * g[0];
            }
        }
        out
    }

    /// Reference value of the field with local coefficients `c`.
    pub fn combine(&self, c: &[f64], x: [f64; 2]) -> [f64; 2] {
        let mut v = [0.0; 2];
        for (ci, s) in c.iter().zip(self.eval(x)) {
            v[0] += ci * s[0];
            v[1] += ci * s[1];
        }
        v
    }
}
