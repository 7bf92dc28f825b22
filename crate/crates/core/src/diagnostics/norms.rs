//! Discrete error norms against a smooth reference velocity.

use crate::assembly::FormParams;
use crate::quadrature::edge_quadrature;
use crate::reference::geometry::Mat2;
use crate::reference::rt::reference_edge_point;
use crate::space::{VelocityField, WallCondition};

use super::fields::VolumeSampler;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    /// (||grad_h e||^2 + sum_F sigma / h_F ||[e]||_F^2)^(1/2)
    pub energy: f64,
    /// (sum_F gamma / 2 int_F |beta . n| |[e]|^2)^(1/2) over interior and periodic facets.
    pub upwind: f64,
}

fn quadrature_degree(k: usize) -> usize {
    (2 * k + 6).min(crate::quadrature::MAX_DEGREE)
}

/// Errors of `u_h` against `exact` with gradient `grad`. The upwind part uses
/// the convective field `beta` and vanishes without one.
pub fn error_norms(
    u_h: &VelocityField,
    exact: &dyn Fn([f64; 2]) -> [f64; 2],
    grad: &dyn Fn([f64; 2]) -> Mat2,
    beta: Option<&dyn Fn([f64; 2]) -> [f64; 2]>,
    params: &FormParams,
) -> ErrorNorms {
    let space = u_h.space();
    let degree = quadrature_degree(space.degree());
    let mut l2 = 0.0;
    let mut grad_sq = 0.0;
    VolumeSampler::new(space, degree).for_each(space, u_h.coeffs(), |_, x, w, p| {
        let u = exact(x);
        let g = grad(x);
        let e = [u[0] - p.value[0], u[1] - p.value[1]];
        l2 += w * (e[0] * e[0] + e[1] * e[1]);
        for a in 0..2 {
            for b in 0..2 {
                let d = g[a][b] - p.gradient[a][b];
                grad_sq += w * d * d;
            }
        }
    });

    let rule = edge_quadrature(degree);
    let mesh = space.mesh();
    let mut penalty = 0.0;
    let mut upwind = 0.0;
    for (f, facet) in mesh.facets.iter().enumerate() {
        let cond = space.facet_condition(f);
        if cond == Some(WallCondition::FreeSlip) {
            continue;
        }
        let interior = facet.is_interior_like();
        let mut jump_sq = 0.0;
        let mut upwind_sq = 0.0;
        for (s, w) in rule.points.iter().zip(&rule.weights) {
            let trace = |side: crate::mesh::FacetSide| {
                let r = reference_edge_point(side.local_edge, if side.reversed { 1.0 - s } else { *s });
                let v = space.evaluate(u_h.coeffs(), side.element, r).expect("valid trace point").value;
                let x = space.geometry(side.element).map(r);
                let u = exact(x);
                ([u[0] - v[0], u[1] - v[1]], x)
            };
            let (ep, x) = trace(facet.plus);
            let jump = match facet.minus {
                Some(m) => {
                    let (em, _) = trace(m);
                    [ep[0] - em[0], ep[1] - em[1]]
                }
                None => ep,
            };
            let j2 = jump[0] * jump[0] + jump[1] * jump[1];
            jump_sq += w * facet.length * j2;
            if interior {
                if let Some(b) = beta {
                    let bv = b(x);
                    let bn = (bv[0] * facet.normal[0] + bv[1] * facet.normal[1]).abs();
                    upwind_sq += w * facet.length * bn * j2;
                }
            }
        }
        penalty += params.sigma / facet.length * jump_sq;
        upwind += 0.5 * params.gamma * upwind_sq;
    }
    ErrorNorms { l2: l2.sqrt(), energy: (grad_sq + penalty).sqrt(), upwind: upwind.sqrt() }
}

/// Observed convergence order between two (h, error) pairs; `None` when the
/// mesh sizes coincide or an error is not positive.
pub fn observed_order(h: (f64, f64), e: (f64, f64)) -> Option<f64> {
    if !(h.0 > 0.0 && h.1 > 0.0 && e.0 > 0.0 && e.1 > 0.0) || (h.0 / h.1 - 1.0).abs() < 1e-12 {
        return None;
    }
    Some((e.0 / e.1).ln() / (h.0 / h.1).ln())
}
