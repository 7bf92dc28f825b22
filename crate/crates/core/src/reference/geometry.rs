//! Affine element maps and the contravariant Piola transform.

use crate::error::ElementError;

pub type Mat2 = [[f64; 2]; 2];

fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn matvec(a: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

/// x = origin + J x_ref for a triangle with vertices (p0, p1, p2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub origin: [f64; 2],
    pub jac: Mat2,
    pub det: f64,
    pub inv: Mat2,
}

impl ElementGeometry {
    pub fn new(p: [[f64; 2]; 3]) -> Result<Self, ElementError> {
        let jac = [[p[1][0] - p[0][0], p[2][0] - p[0][0]], [p[1][1] - p[0][1], p[2][1] - p[0][1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !(det > 0.0) {
            return Err(ElementError::Degenerate(det));
        }
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        Ok(Self { origin: p[0], jac, det, inv })
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }

    pub fn map(&self, x: [f64; 2]) -> [f64; 2] {
        let v = matvec(&self.jac, x);
        [self.origin[0] + v[0], self.origin[1] + v[1]]
    }

    pub fn inverse_map(&self, x: [f64; 2]) -> [f64; 2] {
        matvec(&self.inv, [x[0] - self.origin[0], x[1] - self.origin[1]])
    }

    /// v = J v_ref / det J
    pub fn piola_value(&self, v: [f64; 2]) -> [f64; 2] {
        let w = matvec(&self.jac, v);
        [w[0] / self.det, w[1] / self.det]
    }

    /// grad v = J grad_ref v_ref J^-1 / det J
    pub fn piola_grad(&self, g: &Mat2) -> Mat2 {
        let m = matmul(&matmul(&self.jac, g), &self.inv);
        [[m[0][0] / self.det, m[0][1] / self.det], [m[1][0] / self.det, m[1][1] / self.det]]
    }

    pub fn piola_div(&self, d: f64) -> f64 {
        d / self.det
    }

    /// Inverse Piola transform: v_ref = det J J^-1 v.
    pub fn pull_back(&self, v: [f64; 2]) -> [f64; 2] {
        let w = matvec(&self.inv, v);
        [w[0] * self.det, w[1] * self.det]
    }

    /// Physical gradient of a scalar from its reference gradient: J^-T g.
    pub fn scalar_grad(&self, g: [f64; 2]) -> [f64; 2] {
        [self.inv[0][0] * g[0] + self.inv[1][0] * g[1], self.inv[0][1] * g[0] + self.inv[1][1] * g[1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::rt::RtBasis;

    #[test]
    fn identity_map() {
        let g = ElementGeometry::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(g.piola_value([0.3, -2.0]), [0.3, -2.0]);
        assert_eq!(g.piola_div(1.5), 1.5);
    }

    #[test]
    fn uniform_scaling() {
        let s = 0.25;
        let g = ElementGeometry::new([[0.0, 0.0], [s, 0.0], [0.0, s]]).unwrap();
        let v = g.piola_value([1.0, 2.0]);
        assert!((v[0] - 1.0 / s).abs() < 1e-14 && (v[1] - 2.0 / s).abs() < 1e-14);
        assert!((g.piola_div(1.0) - 1.0 / (s * s)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_rejected() {
        assert!(ElementGeometry::new([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_err());
        assert!(ElementGeometry::new([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn mapped_constant_divergence_stays_constant() {
        use crate::quadrature::{edge_quadrature, triangle_quadrature};
        // The reference field x has divergence 2 and lies in every RT_k.
        let b = RtBasis::new(2).unwrap();
        let g = ElementGeometry::new([[0.2, 0.1], [0.9, 0.3], [0.4, 0.8]]).unwrap();
        let coef = b.dofs_from_field(&|x| x, &edge_quadrature(8), &triangle_quadrature(8).unwrap());
        let div = |x: [f64; 2]| -> f64 {
            let d: f64 = coef.iter().zip(b.eval_div(x)).map(|(a, d)| a * d).sum();
            g.piola_div(d)
        };
        for p in [[0.1, 0.1], [0.5, 0.2], [0.2, 0.7], [0.33, 0.33]] {
            assert!((div(p) - 2.0 / g.det).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_transform_matches_difference() {
        let b = RtBasis::new(3).unwrap();
        let g = ElementGeometry::new([[0.2, 0.1], [0.9, 0.3], [0.4, 0.8]]).unwrap();
        let i = 7;
        let phys = |x: [f64; 2]| g.piola_value(b.eval(g.inverse_map(x))[i]);
        let x = g.map([0.3, 0.3]);
        let grad = g.piola_grad(&b.eval_grad([0.3, 0.3])[i]);
        let h = 1e-6;
        for d in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += h;
            xm[d] -= h;
            let (vp, vm) = (phys(xp), phys(xm));
            for c in 0..2 {
                assert!(((vp[c] - vm[c]) / (2.0 * h) - grad[c][d]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn pull_back_inverts_piola() {
        let g = ElementGeometry::new([[0.2, 0.1], [0.9, 0.3], [0.4, 0.8]]).unwrap();
        let v = g.pull_back(g.piola_value([0.7, -1.1]));
        assert!((v[0] - 0.7).abs() < 1e-14 && (v[1] + 1.1).abs() < 1e-14);
    }
}
