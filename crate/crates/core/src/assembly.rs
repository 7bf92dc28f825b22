//! Assembly of the discrete forms on a velocity space.
//!
//! All velocity operators share one sparsity pattern that contains every
//! element block and every facet coupling block, explicit zeros included,
//! so matrices can be combined value-wise and a symbolic factorisation can be
//! reused across Newton iterations and time steps. Every local contribution
//! is written to a precomputed storage position in a fixed order, which makes
//! assembly bit-reproducible.

use std::sync::Arc;

use crate::error::AssemblyError;
use crate::mesh::FacetSide;
use crate::quadrature::{edge_quadrature, triangle_quadrature, EdgeRule, QuadratureRule};
use crate::reference::geometry::Mat2;
use crate::reference::rt::reference_edge_point;
use crate::reference::RtTable;
use crate::space::{PressureSpace, VelocitySpace, WallCondition, DATA_QUADRATURE_DEGREE};
use crate::sparse::{CsrMatrix, SparsityPattern};

const NONE: usize = usize::MAX;

/// Default interior penalty 6 (k+1)(k+d)/d with d = 2.
pub fn default_sigma(k: usize) -> f64 {
    3.0 * ((k + 1) * (k + 2)) as f64
}

pub const DEFAULT_GAMMA: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormParams {
    pub nu: f64,
    pub sigma: f64,
    pub gamma: f64,
}

impl FormParams {
    pub fn new(nu: f64, k: usize) -> Self {
        Self { nu, sigma: default_sigma(k), gamma: DEFAULT_GAMMA }
    }

    pub fn validate(&self) -> Result<(), AssemblyError> {
        if !(self.sigma > 0.0) {
            return Err(AssemblyError::Penalty(self.sigma));
        }
        if !(self.nu >= 0.0) {
            return Err(AssemblyError::Viscosity(self.nu));
        }
        if !(self.gamma >= 0.0) {
            return Err(AssemblyError::Upwind(self.gamma));
        }
        Ok(())
    }
}

pub type VectorFn<'a> = &'a (dyn Fn([f64; 2]) -> [f64; 2] + Sync);

/// Convective field of the transport term.
#[derive(Clone, Copy)]
pub enum Convector<'a> {
    Zero,
    Analytic(VectorFn<'a>),
    /// Coefficients of a field in the same velocity space.
    Discrete(&'a [f64]),
}

struct RuleTables {
    vol: QuadratureRule,
    vol_table: RtTable,
    edge: EdgeRule,
    /// Indexed by `2 * local_edge + reversed`.
    edge_tables: Vec<RtTable>,
}

impl RuleTables {
    fn new(space: &VelocitySpace, degree: usize) -> Self {
        let rt = &space.element().rt;
        let vol = triangle_quadrature(degree).expect("supported quadrature degree");
        let vol_table = rt.tabulate(&vol.points);
        let edge = edge_quadrature(degree);
        let mut edge_tables = Vec::with_capacity(6);
        for e in 0..3 {
            for reversed in [false, true] {
                let pts: Vec<[f64; 2]> =
                    edge.points.iter().map(|&s| reference_edge_point(e, if reversed { 1.0 - s } else { s })).collect();
                edge_tables.push(rt.tabulate(&pts));
            }
        }
        Self { vol, vol_table, edge, edge_tables }
    }
}

/// Physical shape values and gradients at a set of points (no global signs).
struct Physical {
    nl: usize,
    values: Vec<[f64; 2]>,
    grads: Vec<Mat2>,
}

impl Physical {
    fn value(&self, q: usize, i: usize) -> [f64; 2] {
        self.values[q * self.nl + i]
    }

    fn grad(&self, q: usize, i: usize) -> &Mat2 {
        &self.grads[q * self.nl + i]
    }

    /// Field with local coefficients `c` at point `q`.
    fn field(&self, c: &[f64], q: usize) -> ([f64; 2], Mat2) {
        let mut v = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for (i, ci) in c.iter().enumerate() {
            let a = self.value(q, i);
            let b = self.grad(q, i);
            v[0] += ci * a[0];
            v[1] += ci * a[1];
            for r in 0..2 {
                for s in 0..2 {
                    g[r][s] += ci * b[r][s];
                }
            }
        }
        (v, g)
    }
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn grad_dot_n(g: &Mat2, n: [f64; 2]) -> [f64; 2] {
    [g[0][0] * n[0] + g[0][1] * n[1], g[1][0] * n[0] + g[1][1] * n[1]]
}

fn frobenius(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

pub struct Assembler {
    space: Arc<VelocitySpace>,
    pattern: Arc<SparsityPattern>,
    element_pos: Vec<Vec<usize>>,
    facet_pos: Vec<Vec<usize>>,
    standard: RuleTables,
    transport: RuleTables,
}

impl Assembler {
    pub fn new(space: Arc<VelocitySpace>) -> Self {
        let k = space.degree();
        let nl = space.num_local();
        let mesh = space.mesh().clone();

        let block = |dofs: &[Option<usize>]| -> Vec<(usize, usize)> {
            let mut out = Vec::new();
            for r in dofs.iter().flatten() {
                for c in dofs.iter().flatten() {
                    out.push((*r, *c));
                }
            }
            out
        };
        let element_dofs = |e: usize| -> Vec<Option<usize>> { space.local_dofs(e).iter().map(|d| d.global).collect() };
        let facet_dofs =
            |f: usize| -> Vec<Option<usize>> { mesh.facets[f].sides().flat_map(|s| element_dofs(s.element)).collect() };

        let mut entries = Vec::new();
        for e in 0..space.num_elements() {
            entries.extend(block(&element_dofs(e)));
        }
        for f in 0..mesh.facets.len() {
            if mesh.facets[f].minus.is_some() {
                entries.extend(block(&facet_dofs(f)));
            }
        }
        let n = space.num_dofs();
        let pattern = Arc::new(SparsityPattern::from_entries(n, n, &entries));
        let positions = |dofs: &[Option<usize>]| -> Vec<usize> {
            let mut out = Vec::with_capacity(dofs.len() * dofs.len());
            for r in dofs {
                for c in dofs {
                    out.push(match (r, c) {
                        (Some(r), Some(c)) => pattern.position(*r, *c).expect("entry in pattern"),
                        _ => NONE,
                    });
                }
            }
            out
        };
        let element_pos = (0..space.num_elements()).map(|e| positions(&element_dofs(e))).collect();
        let facet_pos = (0..mesh.facets.len()).map(|f| positions(&facet_dofs(f))).collect();
        debug_assert!(nl > 0);

        Self {
            standard: RuleTables::new(&space, 2 * k + 2),
            // Exact for transport by a discrete, exactly solenoidal field.
            transport: RuleTables::new(&space, 3 * k + 2),
            space,
            pattern,
            element_pos,
            facet_pos,
        }
    }

    pub fn space(&self) -> &Arc<VelocitySpace> {
        &self.space
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    fn physical_volume(&self, e: usize, table: &RtTable) -> Physical {
        let g = self.space.geometry(e);
        Physical {
            nl: table.num_dofs,
            values: table.values.iter().map(|v| g.piola_value(*v)).collect(),
            grads: table.grads.iter().map(|m| g.piola_grad(m)).collect(),
        }
    }

    fn physical_side(&self, side: FacetSide, tables: &RuleTables) -> Physical {
        let table = &tables.edge_tables[2 * side.local_edge + side.reversed as usize];
        self.physical_volume(side.element, table)
    }

    fn signs(&self, e: usize) -> Vec<f64> {
        self.space.local_dofs(e).iter().map(|d| d.sign).collect()
    }

    fn add_block(&self, values: &mut [f64], pos: &[usize], signs: &[f64], local: &[f64]) {
        let m = signs.len();
        for a in 0..m {
            for b in 0..m {
                let p = pos[a * m + b];
                if p != NONE {
                    values[p] += signs[a] * signs[b] * local[a * m + b];
                }
            }
        }
    }

    fn facet_signs(&self, f: usize) -> Vec<f64> {
        self.space.mesh().facets[f].sides().flat_map(|s| self.signs(s.element)).collect()
    }

    /// Velocity mass matrix: u^T M u = ||u_h||^2.
    pub fn mass(&self) -> CsrMatrix {
        let t = &self.standard;
        let nl = self.space.num_local();
        let mut values = vec![0.0; self.pattern.nnz()];
        for e in 0..self.space.num_elements() {
            let det = self.space.geometry(e).det;
            let ph = self.physical_volume(e, &t.vol_table);
            let mut local = vec![0.0; nl * nl];
            for (q, w) in t.vol.weights.iter().enumerate() {
                for a in 0..nl {
                    for b in 0..nl {
                        local[a * nl + b] += w * det * dot2(ph.value(q, a), ph.value(q, b));
                    }
                }
            }
            self.add_block(&mut values, &self.element_pos[e], &self.signs(e), &local);
        }
        CsrMatrix::from_values(self.pattern.clone(), values)
    }

    /// Symmetric interior penalty form a_h with unit viscosity.
    pub fn sip(&self, sigma: f64) -> Result<CsrMatrix, AssemblyError> {
        if !(sigma > 0.0) {
            return Err(AssemblyError::Penalty(sigma));
        }
        let t = &self.standard;
        let nl = self.space.num_local();
        let mesh = self.space.mesh();
        let mut values = vec![0.0; self.pattern.nnz()];
        for e in 0..self.space.num_elements() {
            let det = self.space.geometry(e).det;
            let ph = self.physical_volume(e, &t.vol_table);
            let mut local = vec![0.0; nl * nl];
            for (q, w) in t.vol.weights.iter().enumerate() {
                for a in 0..nl {
                    for b in 0..nl {
                        local[a * nl + b] += w * det * frobenius(ph.grad(q, a), ph.grad(q, b));
                    }
                }
            }
            self.add_block(&mut values, &self.element_pos[e], &self.signs(e), &local);
        }
        for (f, facet) in mesh.facets.iter().enumerate() {
            if self.space.facet_condition(f) == Some(WallCondition::FreeSlip) {
                continue;
            }
            let sides: Vec<FacetSide> = facet.sides().collect();
            let two = sides.len() == 2;
            let traces: Vec<Physical> = sides.iter().map(|&s| self.physical_side(s, t)).collect();
            let m = sides.len() * nl;
            let avg = if two { 0.5 } else { 1.0 };
            let n = facet.normal;
            let len = facet.length;
            let mut local = vec![0.0; m * m];
            let mut jump = vec![[0.0; 2]; m];
            let mut dn = vec![[0.0; 2]; m];
            for (q, w) in t.edge.weights.iter().enumerate() {
                for (s, tr) in traces.iter().enumerate() {
                    let eps = if s == 0 { 1.0 } else { -1.0 };
                    for i in 0..nl {
                        let v = tr.value(q, i);
                        jump[s * nl + i] = [eps * v[0], eps * v[1]];
                        let g = grad_dot_n(tr.grad(q, i), n);
                        dn[s * nl + i] = [avg * g[0], avg * g[1]];
                    }
                }
                let wl = w * len;
                for a in 0..m {
                    for b in 0..m {
                        local[a * m + b] +=
                            wl * (-dot2(dn[b], jump[a]) - dot2(jump[b], dn[a]) + sigma / len * dot2(jump[b], jump[a]));
                    }
                }
            }
            self.add_block(&mut values, &self.facet_pos[f], &self.facet_signs(f), &local);
        }
        Ok(CsrMatrix::from_values(self.pattern.clone(), values))
    }

    /// nu a_h
    pub fn viscous(&self, nu: f64, sigma: f64) -> Result<CsrMatrix, AssemblyError> {
        if !(nu >= 0.0) {
            return Err(AssemblyError::Viscosity(nu));
        }
        let mut a = self.sip(sigma)?;
        a.values_mut().iter_mut().for_each(|v| *v *= nu);
        Ok(a)
    }

    /// Upwinded transport form c_h(beta; w, v), entry (i, j) = c_h(beta; phi_j, phi_i).
    pub fn convection(&self, beta: Convector<'_>, gamma: f64) -> Result<CsrMatrix, AssemblyError> {
        if !(gamma >= 0.0) {
            return Err(AssemblyError::Upwind(gamma));
        }
        let t = &self.transport;
        let nl = self.space.num_local();
        let mesh = self.space.mesh();
        let mut values = vec![0.0; self.pattern.nnz()];
        for e in 0..self.space.num_elements() {
            let g = self.space.geometry(e);
            let ph = self.physical_volume(e, &t.vol_table);
            let lc = match beta {
                Convector::Discrete(c) => Some(self.space.local_coefficients(e, c)),
                _ => None,
            };
            let mut local = vec![0.0; nl * nl];
            for (q, w) in t.vol.weights.iter().enumerate() {
                let b = match (beta, &lc) {
                    (Convector::Zero, _) => [0.0; 2],
                    (Convector::Analytic(f), _) => f(g.map(t.vol.points[q])),
                    (_, Some(lc)) => ph.field(lc, q).0,
                    _ => unreachable!(),
                };
                for j in 0..nl {
                    let adv = grad_dot_n(ph.grad(q, j), b);
                    for i in 0..nl {
                        local[i * nl + j] += w * g.det * dot2(adv, ph.value(q, i));
                    }
                }
            }
            self.add_block(&mut values, &self.element_pos[e], &self.signs(e), &local);
        }
        for (f, facet) in mesh.facets.iter().enumerate() {
            let Some(minus) = facet.minus else { continue };
            let sides = [facet.plus, minus];
            let traces = [self.physical_side(facet.plus, t), self.physical_side(minus, t)];
            let plus_coeffs = match beta {
                Convector::Discrete(c) => Some(self.space.local_coefficients(facet.plus.element, c)),
                _ => None,
            };
            let gp = self.space.geometry(facet.plus.element);
            let m = 2 * nl;
            let n = facet.normal;
            let mut local = vec![0.0; m * m];
            let mut jump = vec![[0.0; 2]; m];
            let mut avg = vec![[0.0; 2]; m];
            for (q, w) in t.edge.weights.iter().enumerate() {
                let b = match (beta, &plus_coeffs) {
                    (Convector::Zero, _) => [0.0; 2],
                    (Convector::Analytic(func), _) => {
                        let s = t.edge.points[q];
                        let r = reference_edge_point(sides[0].local_edge, if sides[0].reversed { 1.0 - s } else { s });
                        func(gp.map(r))
                    }
                    (_, Some(c)) => traces[0].field(c, q).0,
                    _ => unreachable!(),
                };
                let bn = dot2(b, n);
                for (s, tr) in traces.iter().enumerate() {
                    let eps = if s == 0 { 1.0 } else { -1.0 };
                    for i in 0..nl {
                        let v = tr.value(q, i);
                        jump[s * nl + i] = [eps * v[0], eps * v[1]];
                        avg[s * nl + i] = [0.5 * v[0], 0.5 * v[1]];
                    }
                }
                let wl = w * facet.length;
                for a in 0..m {
                    for bb in 0..m {
                        local[a * m + bb] +=
                            wl * (-bn * dot2(jump[bb], avg[a]) + 0.5 * gamma * bn.abs() * dot2(jump[bb], jump[a]));
                    }
                }
            }
            self.add_block(&mut values, &self.facet_pos[f], &self.facet_signs(f), &local);
        }
        Ok(CsrMatrix::from_values(self.pattern.clone(), values))
    }

    /// Derivative of c_h(beta; u, .) with respect to the convective slot at beta = u:
    /// entry (i, j) = c_h'(u)[phi_j](u, phi_i). The normal trace of the
    /// direction is taken from the plus side.
    pub fn convection_derivative(&self, u: &[f64], gamma: f64) -> Result<CsrMatrix, AssemblyError> {
        if !(gamma >= 0.0) {
            return Err(AssemblyError::Upwind(gamma));
        }
        let t = &self.transport;
        let nl = self.space.num_local();
        let mesh = self.space.mesh();
        let mut values = vec![0.0; self.pattern.nnz()];
        for e in 0..self.space.num_elements() {
            let g = self.space.geometry(e);
            let ph = self.physical_volume(e, &t.vol_table);
            let lc = self.space.local_coefficients(e, u);
            let mut local = vec![0.0; nl * nl];
            for (q, w) in t.vol.weights.iter().enumerate() {
                let (_, gu) = ph.field(&lc, q);
                for j in 0..nl {
                    let d = grad_dot_n(&gu, ph.value(q, j));
                    for i in 0..nl {
                        local[i * nl + j] += w * g.det * dot2(d, ph.value(q, i));
                    }
                }
            }
            self.add_block(&mut values, &self.element_pos[e], &self.signs(e), &local);
        }
        for (f, facet) in mesh.facets.iter().enumerate() {
            let Some(minus) = facet.minus else { continue };
            let traces = [self.physical_side(facet.plus, t), self.physical_side(minus, t)];
            let cp = self.space.local_coefficients(facet.plus.element, u);
            let cm = self.space.local_coefficients(minus.element, u);
            let m = 2 * nl;
            let n = facet.normal;
            let mut local = vec![0.0; m * m];
            for (q, w) in t.edge.weights.iter().enumerate() {
                let up = traces[0].field(&cp, q).0;
                let um = traces[1].field(&cm, q).0;
                let ju = [up[0] - um[0], up[1] - um[1]];
                let un = dot2(up, n);
                let sgn = if un > 0.0 {
                    1.0
                } else if un < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                let wl = w * facet.length;
                for a in 0..m {
                    let (s, i) = (a / nl, a % nl);
                    let v = traces[s].value(q, i);
                    let eps = if s == 0 { 1.0 } else { -1.0 };
                    let ja = [eps * v[0], eps * v[1]];
                    let aa = [0.5 * v[0], 0.5 * v[1]];
                    let test = -dot2(ju, aa) + 0.5 * gamma * sgn * dot2(ju, ja);
                    for b in 0..nl {
                        let dn = dot2(traces[0].value(q, b), n);
                        local[a * m + b] += wl * dn * test;
                    }
                }
            }
            self.add_block(&mut values, &self.facet_pos[f], &self.facet_signs(f), &local);
        }
        Ok(CsrMatrix::from_values(self.pattern.clone(), values))
    }

    /// Pressure-velocity coupling, entry (i, j) = -int psi_i div phi_j.
    pub fn div_coupling(&self, pressure: &PressureSpace) -> CsrMatrix {
        let k = self.space.degree();
        let rule = triangle_quadrature(2 * k).expect("supported degree");
        let rt = &self.space.element().rt;
        let scalar = &self.space.element().scalar;
        let divs: Vec<Vec<f64>> = rule.points.iter().map(|&x| rt.eval_div(x)).collect();
        let basis: Vec<Vec<f64>> = rule.points.iter().map(|&x| scalar.eval(x)).collect();
        let np = pressure.num_local();
        let nl = self.space.num_local();
        // The Jacobian determinants of det J dx and div = div_ref / det J cancel.
        let mut block = vec![0.0; np * nl];
        for (q, w) in rule.weights.iter().enumerate() {
            for i in 0..np {
                for j in 0..nl {
                    block[i * nl + j] -= w * basis[q][i] * divs[q][j];
                }
            }
        }
        let mut triplets = Vec::with_capacity(self.space.num_elements() * np * nl);
        for e in 0..self.space.num_elements() {
            for i in 0..np {
                for (j, d) in self.space.local_dofs(e).iter().enumerate() {
                    if let Some(gj) = d.global {
                        triplets.push((pressure.global(e, i), gj, d.sign * block[i * nl + j]));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(pressure.num_dofs(), self.space.num_dofs(), &triplets)
    }

    /// Load vector int f . phi_i.
    pub fn load(&self, f: &dyn Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let rule = triangle_quadrature(DATA_QUADRATURE_DEGREE).expect("supported degree");
        let table = self.space.element().rt.tabulate(&rule.points);
        let nl = self.space.num_local();
        let mut out = vec![0.0; self.space.num_dofs()];
        for e in 0..self.space.num_elements() {
            let g = self.space.geometry(e);
            let mut local = vec![0.0; nl];
            for (q, (x, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let fv = f(g.map(*x));
                for (i, l) in local.iter_mut().enumerate() {
                    *l += w * g.det * dot2(fv, g.piola_value(table.values[q * nl + i]));
                }
            }
            self.space.scatter_add(e, &local, &mut out);
        }
        out
    }

    /// a_h(w, phi_i) for a smooth field `w` given by value and gradient. Jumps of
    /// `w` across interior and periodic facets vanish; on no-slip walls the
    /// boundary value of `w` enters the consistency and penalty terms.
    pub fn sip_rhs(
        &self,
        w: &dyn Fn([f64; 2]) -> [f64; 2],
        grad_w: &dyn Fn([f64; 2]) -> Mat2,
        sigma: f64,
    ) -> Result<Vec<f64>, AssemblyError> {
        if !(sigma > 0.0) {
            return Err(AssemblyError::Penalty(sigma));
        }
        let t = RuleTables::new(&self.space, DATA_QUADRATURE_DEGREE);
        let nl = self.space.num_local();
        let mesh = self.space.mesh();
        let mut out = vec![0.0; self.space.num_dofs()];
        for e in 0..self.space.num_elements() {
            let g = self.space.geometry(e);
            let ph = self.physical_volume(e, &t.vol_table);
            let mut local = vec![0.0; nl];
            for (q, (x, wq)) in t.vol.points.iter().zip(&t.vol.weights).enumerate() {
                let gw = grad_w(g.map(*x));
                for (i, l) in local.iter_mut().enumerate() {
                    *l += wq * g.det * frobenius(&gw, ph.grad(q, i));
                }
            }
            self.space.scatter_add(e, &local, &mut out);
        }
        for (f, facet) in mesh.facets.iter().enumerate() {
            let cond = self.space.facet_condition(f);
            if cond == Some(WallCondition::FreeSlip) {
                continue;
            }
            let boundary = cond.is_some();
            let n = facet.normal;
            for (s, side) in facet.sides().enumerate() {
                let eps = if s == 0 { 1.0 } else { -1.0 };
                let avg = if boundary { 1.0 } else { 0.5 };
                let tr = self.physical_side(side, &t);
                let gs = self.space.geometry(side.element);
                let mut local = vec![0.0; nl];
                for (q, wq) in t.edge.weights.iter().enumerate() {
                    let sp = t.edge.points[q];
                    let r = reference_edge_point(side.local_edge, if side.reversed { 1.0 - sp } else { sp });
                    // Gradient of the smooth field is single-valued; use this side's copy.
                    let x = gs.map(r);
                    let dwn = grad_dot_n(&grad_w(x), n);
                    let wl = wq * facet.length;
                    for (i, l) in local.iter_mut().enumerate() {
                        let v = tr.value(q, i);
                        let jv = [eps * v[0], eps * v[1]];
                        *l -= wl * dot2(dwn, jv);
                        if boundary {
                            let wv = w(x);
                            let dvn = grad_dot_n(tr.grad(q, i), n);
                            *l += wl * (-dot2(wv, [avg * dvn[0], avg * dvn[1]]) + sigma / facet.length * dot2(wv, jv));
                        }
                    }
                }
                self.space.scatter_add(side.element, &local, &mut out);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{structured_triangulation, Axis};
    use crate::space::{BoundarySpec, PressureSpace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn periodic(n: usize, k: usize) -> Arc<VelocitySpace> {
        let m = structured_triangulation(n).apply_periodic_identification(&[Axis::X1, Axis::X2]).unwrap();
        Arc::new(VelocitySpace::new(Arc::new(m), k, BoundarySpec::periodic()).unwrap())
    }

    fn lattice(x: [f64; 2]) -> [f64; 2] {
        let (s1, c1) = (2.0 * PI * x[0]).sin_cos();
        let (s2, c2) = (2.0 * PI * x[1]).sin_cos();
        [s1 * s2, c1 * c2]
    }

    #[test]
    fn mass_gives_l2_norm() {
        let s = periodic(8, 2);
        let a = Assembler::new(s.clone());
        let m = a.mass();
        assert!(m.asymmetry() < 1e-13);
        let u = s.interpolate(&lattice);
        // Analytic: int sin^2 sin^2 + cos^2 cos^2 = 1/2.
        assert!((m.quadratic_form(&u) - 0.5).abs() < 1e-4);
        assert_eq!(m.quadratic_form(&vec![0.0; s.num_dofs()]), 0.0);
    }

    #[test]
    fn sip_on_smooth_periodic_fields() {
        // Interpolation jumps enter through the penalty and fade like h^4.
        let s = periodic(16, 2);
        let a = Assembler::new(s.clone());
        let sip = a.sip(default_sigma(2)).unwrap();
        assert!(sip.asymmetry() < 1e-10);
        let c = s.interpolate(&|_| [1.0, 0.0]);
        assert!(sip.quadratic_form(&c).abs() < 1e-10);
        // Lattice: int |grad u|^2 = 4 pi^2.
        let u = s.interpolate(&lattice);
        let v = sip.quadratic_form(&u);
        assert!((v - 4.0 * PI * PI).abs() / (4.0 * PI * PI) < 1e-2, "{v}");
    }

    #[test]
    fn rotation_dirichlet_integral() {
        // The rotation (x2, -x1) is reproduced on every element, so its broken
        // Dirichlet integral over the unit square is |grad w|^2 = 2.
        let m = Arc::new(structured_triangulation(2));
        let s = Arc::new(VelocitySpace::new(m.clone(), 1, BoundarySpec::no_slip()).unwrap());
        let rt = &s.element().rt;
        let rule = triangle_quadrature(4).unwrap();
        let mut total = 0.0;
        for e in 0..s.num_elements() {
            let g = s.geometry(e);
            let rot = |x: [f64; 2]| {
                let p = g.map(x);
                g.pull_back([p[1], -p[0]])
            };
            let c = rt.dofs_from_field(&rot, &edge_quadrature(6), &rule);
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let mut gr = [[0.0; 2]; 2];
                for (ci, gi) in c.iter().zip(rt.eval_grad(*x)) {
                    for r in 0..2 {
                        for q in 0..2 {
                            gr[r][q] += ci * gi[r][q];
                        }
                    }
                }
                let gp = g.piola_grad(&gr);
                total += w * g.det * frobenius(&gp, &gp);
            }
        }
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sip_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..=3 {
            for bc in [BoundarySpec::no_slip(), BoundarySpec::channel()] {
                let mut m = structured_triangulation(4);
                m = m.apply_periodic_identification(&bc.periodic_axes()).unwrap();
                let s = Arc::new(VelocitySpace::new(Arc::new(m), k, bc).unwrap());
                let a = Assembler::new(s.clone()).sip(default_sigma(k)).unwrap();
                for _ in 0..20 {
                    let v: Vec<f64> = (0..s.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
                    assert!(a.quadratic_form(&v) > 0.0);
                }
            }
        }
    }

    #[test]
    fn invalid_parameters() {
        let a = Assembler::new(periodic(2, 1));
        assert_eq!(a.sip(0.0).unwrap_err(), AssemblyError::Penalty(0.0));
        assert!(a.convection(Convector::Zero, -1.0).is_err());
        assert!(a.viscous(-1.0, 10.0).is_err());
    }

    #[test]
    fn convection_energy_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = periodic(4, 2);
        let a = Assembler::new(s.clone());
        let beta = s.interpolate(&lattice);
        let n = a.convection(Convector::Discrete(&beta), 0.0).unwrap();
        for _ in 0..5 {
            let v: Vec<f64> = (0..s.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(n.quadratic_form(&v).abs() < 1e-11 * n.max_abs() * s.num_dofs() as f64);
        }
        let z = a.convection(Convector::Zero, 1.5).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = periodic(3, 2);
        let a = Assembler::new(s.clone());
        let u: Vec<f64> = (0..s.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d: Vec<f64> = (0..s.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let residual = |x: &[f64]| a.convection(Convector::Discrete(x), 1.5).unwrap().mul_vec(x);
        let jac = CsrMatrix::combine(&[
            (1.0, &a.convection(Convector::Discrete(&u), 1.5).unwrap()),
            (1.0, &a.convection_derivative(&u, 1.5).unwrap()),
        ]);
        let h = 1e-6;
        let up: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + h * b).collect();
        let um: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - h * b).collect();
        let (rp, rm) = (residual(&up), residual(&um));
        let jd = jac.mul_vec(&d);
        let scale = jd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..s.num_dofs() {
            let fd = (rp[i] - rm[i]) / (2.0 * h);
            assert!((fd - jd[i]).abs() < 1e-5 * scale, "row {i}: {fd} vs {}", jd[i]);
        }
    }

    #[test]
    fn coupling_shape_and_values() {
        let m = Arc::new(structured_triangulation(4));
        let s = Arc::new(VelocitySpace::new(m.clone(), 1, BoundarySpec::no_slip()).unwrap());
        let p = PressureSpace::new(&s);
        let b = Assembler::new(s.clone()).div_coupling(&p);
        assert_eq!((b.nrows(), b.ncols()), (p.num_dofs(), s.num_dofs()));
        // (x1, 0) has unit divergence. Away from the walls it is reproduced, and
        // the constant-pressure row gives -int_K sqrt(2) div u = -sqrt(2) |K|.
        let u = s.interpolate(&|x| [x[0], 0.0]);
        let bu = b.mul_vec(&u);
        let mut checked = 0;
        for e in 0..s.num_elements() {
            if m.element_facets[e].iter().all(|&f| m.facets[f].is_interior_like()) {
                let expect = -std::f64::consts::SQRT_2 * s.geometry(e).area();
                assert!((bu[p.global(e, 0)] - expect).abs() < 1e-13);
                checked += 1;
            }
        }
        assert!(checked > 0);
        // Summed over all elements the divergence integrates to the (zero) wall flux.
        let total: f64 = (0..s.num_elements()).map(|e| bu[p.global(e, 0)]).sum();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn coupling_annihilates_solenoidal_interpolants() {
        let s = periodic(4, 3);
        let p = PressureSpace::new(&s);
        let b = Assembler::new(s.clone()).div_coupling(&p);
        let u = s.interpolate(&lattice);
        assert!(b.mul_vec(&u).iter().all(|v| v.abs() < 1e-11));
    }

    #[test]
    fn assembly_is_deterministic() {
        let s = periodic(3, 2);
        let a = Assembler::new(s.clone());
        let beta = s.interpolate(&lattice);
        let n1 = a.convection(Convector::Discrete(&beta), 1.5).unwrap();
        let n2 = Assembler::new(s.clone()).convection(Convector::Discrete(&beta), 1.5).unwrap();
        assert_eq!(n1.values(), n2.values());
    }

    #[test]
    fn constant_load_gives_momentum() {
        let s = periodic(4, 2);
        let a = Assembler::new(s.clone());
        let f = a.load(&|_| [1.0, 0.0]);
        let u = s.interpolate(&|x| [1.0 + (2.0 * PI * x[1]).sin(), 0.0]);
        let momentum: f64 = f.iter().zip(&u).map(|(a, b)| a * b).sum();
        assert!((momentum - 1.0).abs() < 1e-12);
        assert!(a.load(&|_| [0.0, 0.0]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sip_rhs_matches_matrix_on_reproduced_fields() {
        // Away from the walls the interpolant of a linear field is exact, so the
        // rows of A I_h w and a_h(w, .) agree there.
        let m = Arc::new(structured_triangulation(8));
        let s = Arc::new(VelocitySpace::new(m.clone(), 2, BoundarySpec::no_slip()).unwrap());
        let a = Assembler::new(s.clone());
        let sigma = default_sigma(2);
        let w = |x: [f64; 2]| [x[1] + 2.0 * x[0], 3.0 * x[1] - x[0]];
        let gw = |_: [f64; 2]| [[2.0, 1.0], [-1.0, 3.0]];
        let rhs = a.sip_rhs(&w, &gw, sigma).unwrap();
        let au = a.sip(sigma).unwrap().mul_vec(&s.interpolate(&w));
        let mut checked = 0;
        for e in 0..s.num_elements() {
            let c = s.geometry(e).map([1.0 / 3.0, 1.0 / 3.0]);
            if c.iter().all(|&x| (0.25..0.75).contains(&x)) {
                for d in s.local_dofs(e) {
                    let i = d.global.unwrap();
                    assert!((au[i] - rhs[i]).abs() < 1e-11, "{} vs {}", au[i], rhs[i]);
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
    }
}
