//! Integral and pointwise observables of a discrete velocity field.

use crate::error::DiagnosticsError;
use crate::mesh::PointLocator;
use crate::quadrature::{triangle_quadrature, QuadratureRule};
use crate::reference::rt::RtTable;
use crate::space::{PointValue, VelocityField, VelocitySpace};

/// Tabulated basis on a volume rule, reused across elements.
pub struct VolumeSampler {
    rule: QuadratureRule,
    table: RtTable,
}

impl VolumeSampler {
    pub fn new(space: &VelocitySpace, degree: usize) -> Self {
        let rule = triangle_quadrature(degree.min(crate::quadrature::MAX_DEGREE)).expect("supported degree");
        let table = space.element().rt.tabulate(&rule.points);
        Self { rule, table }
    }

    /// Rule exact for products of two discrete velocities or their gradients.
    pub fn standard(space: &VelocitySpace) -> Self {
        Self::new(space, 2 * space.degree() + 2)
    }

    pub fn num_points(&self) -> usize {
        self.rule.points.len()
    }

    /// Calls `f(element, physical point, physical weight, value)` at every
    /// quadrature point of every element.
    pub fn for_each(&self, space: &VelocitySpace, coeffs: &[f64], mut f: impl FnMut(usize, [f64; 2], f64, &PointValue)) {
        let nl = self.table.num_dofs;
        for e in 0..space.num_elements() {
            let c = space.local_coefficients(e, coeffs);
            let g = space.geometry(e);
            for (q, (x, w)) in self.rule.points.iter().zip(&self.rule.weights).enumerate() {
                let mut v = [0.0; 2];
                let mut gr = [[0.0; 2]; 2];
                let mut d = 0.0;
                for (i, ci) in c.iter().enumerate() {
                    if *ci == 0.0 {
                        continue;
                    }
                    let s = self.table.values[q * nl + i];
                    let gs = &self.table.grads[q * nl + i];
                    v[0] += ci * s[0];
                    v[1] += ci * s[1];
                    for a in 0..2 {
                        for b in 0..2 {
                            gr[a][b] += ci * gs[a][b];
                        }
                    }
                    d += ci * self.table.divs[q * nl + i];
                }
                let gradient = g.piola_grad(&gr);
                let pv = PointValue {
                    value: g.piola_value(v),
                    gradient,
                    divergence: g.piola_div(d),
                    curl: gradient[1][0] - gradient[0][1],
                };
                f(e, g.map(*x), w * g.det, &pv);
            }
        }
    }
}

/// K = 1/2 ||u||^2
pub fn kinetic_energy(u: &VelocityField) -> f64 {
    let s = u.space();
    let mut k = 0.0;
    VolumeSampler::standard(s).for_each(s, u.coeffs(), |_, _, w, p| {
        k += w * (p.value[0] * p.value[0] + p.value[1] * p.value[1]);
    });
    0.5 * k
}

/// E = 1/2 ||curl_h u||^2 with the elementwise curl d1 u2 - d2 u1.
pub fn enstrophy(u: &VelocityField) -> f64 {
    let s = u.space();
    let mut e = 0.0;
    VolumeSampler::standard(s).for_each(s, u.coeffs(), |_, _, w, p| e += w * p.curl * p.curl);
    0.5 * e
}

/// max |div u| and max |u| over the volume quadrature points.
pub fn divergence_and_magnitude(space: &VelocitySpace, coeffs: &[f64]) -> (f64, f64) {
    let mut d = 0.0f64;
    let mut m = 0.0f64;
    VolumeSampler::standard(space).for_each(space, coeffs, |_, _, _, p| {
        d = d.max(p.divergence.abs());
        m = m.max(p.value[0].hypot(p.value[1]));
    });
    (d, m)
}

pub fn divergence_sup(u: &VelocityField) -> f64 {
    divergence_and_magnitude(u.space(), u.coeffs()).0
}

/// Point values of `u` at physical points of the unit square. Points on
/// element boundaries take the value of the first element found.
pub fn sample_points(u: &VelocityField, points: &[[f64; 2]]) -> Result<Vec<PointValue>, DiagnosticsError> {
    let locator = PointLocator::new(u.space().mesh());
    points
        .iter()
        .map(|&x| {
            let (t, r) = locator
                .locate([x[0].clamp(0.0, 1.0), x[1].clamp(0.0, 1.0)])
                .ok_or(DiagnosticsError::PointNotFound(x[0], x[1]))?;
            Ok(u.evaluate(t, r).expect("located point lies in its element"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{structured_triangulation, Axis};
    use crate::space::BoundarySpec;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn periodic_space(n: usize, k: usize) -> Arc<VelocitySpace> {
        let m = structured_triangulation(n).apply_periodic_identification(&[Axis::X1, Axis::X2]).unwrap();
        Arc::new(VelocitySpace::new(Arc::new(m), k, BoundarySpec::periodic()).unwrap())
    }

    fn lattice(s: &Arc<VelocitySpace>) -> VelocityField {
        VelocityField::interpolate_curl(s.clone(), &|x| -(2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos() / (2.0 * PI))
    }

    #[test]
    fn lattice_energy_and_enstrophy() {
        let mut errors = Vec::new();
        for n in [8, 16] {
            let s = periodic_space(n, 3);
            let u = lattice(&s);
            assert!((kinetic_energy(&u) - 0.25).abs() < 1e-4, "{}", kinetic_energy(&u));
            assert!(divergence_sup(&u) < 1e-10);
            errors.push((enstrophy(&u) - 2.0 * PI * PI).abs());
        }
        // The curl converges at order k, its square at least as fast.
        assert!(errors[0] < 6e-2 && errors[1] < errors[0] / 7.0, "{errors:?}");
    }

    #[test]
    fn homogeneity_and_zero() {
        let s = periodic_space(4, 2);
        let u = lattice(&s);
        let u2 = VelocityField::new(s.clone(), u.coeffs().iter().map(|c| 2.0 * c).collect()).unwrap();
        assert!((kinetic_energy(&u2) - 4.0 * kinetic_energy(&u)).abs() < 1e-13);
        let z = VelocityField::zero(s.clone());
        assert_eq!(kinetic_energy(&z), 0.0);
        assert_eq!(enstrophy(&z), 0.0);
        let c = VelocityField::interpolate(s, &|_| [0.3, -1.0]);
        assert!(enstrophy(&c) < 1e-24);
        assert!((kinetic_energy(&c) - 0.5 * 1.09).abs() < 1e-13);
    }

    #[test]
    fn x1_interpolant_has_unit_divergence() {
        // Wall fluxes are constrained, so only elements off the x1 = 0, 1 walls
        // reproduce the field; the middle column of a 3 x 3 mesh does.
        let m = Arc::new(structured_triangulation(3));
        let s = VelocitySpace::new(m.clone(), 2, BoundarySpec::no_slip()).unwrap();
        let c = s.interpolate(&|x| [x[0], 0.0]);
        let mut checked = 0;
        VolumeSampler::standard(&s).for_each(&s, &c, |e, _, _, p| {
            let mid = m.triangle_points(e).iter().all(|q| q[0] > 0.3 && q[0] < 0.7);
            if mid {
                assert!((p.divergence - 1.0).abs() < 1e-12, "{}", p.divergence);
                checked += 1;
            }
        });
        assert!(checked > 0);
        let z = VelocityField::zero(Arc::new(s));
        assert_eq!(divergence_sup(&z), 0.0);
    }

    #[test]
    fn sampling_matches_element_evaluation() {
        let s = periodic_space(4, 2);
        let u = lattice(&s);
        let v = sample_points(&u, &[[0.3, 0.7], [0.0, 0.0], [1.0, 0.5]]).unwrap();
        let tp = 2.0 * PI;
        assert!((v[0].value[0] - (tp * 0.3).sin() * (tp * 0.7).sin()).abs() < 2e-2);
        assert!((v[1].value[1] - 1.0).abs() < 2e-2);
        assert_eq!(v.len(), 3);
    }
}
