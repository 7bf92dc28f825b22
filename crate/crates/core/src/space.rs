//! Global velocity and pressure spaces and discrete fields.
//!
//! Velocity facet unknowns are the normal-flux moments
//! `int_F u.n_F q_j(s) ds` with `s` running along the facet's canonical
//! direction. An element sees each of them through a sign: `-1` on the minus
//! side (its outward normal is `-n_F`) times `(-1)^j` when its local edge runs
//! against the canonical direction.

use std::sync::Arc;

use crate::error::{ElementError, SpaceError};
use crate::mesh::{FacetKind, Mesh, Wall};
use crate::quadrature::{edge_quadrature, triangle_quadrature, EdgeRule, QuadratureRule};
use crate::reference::{ElementGeometry, ReferenceElement};

/// Quadrature degree used when sampling smooth data for interpolation and projection.
pub const DATA_QUADRATURE_DEGREE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallCondition {
    NoSlip,
    FreeSlip,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundarySpec {
    pub left: WallCondition,
    pub right: WallCondition,
    pub bottom: WallCondition,
    pub top: WallCondition,
}

impl BoundarySpec {
    pub fn uniform(c: WallCondition) -> Self {
        Self { left: c, right: c, bottom: c, top: c }
    }

    pub fn no_slip() -> Self {
        Self::uniform(WallCondition::NoSlip)
    }

    pub fn periodic() -> Self {
        Self::uniform(WallCondition::Periodic)
    }

    /// Periodic in x1, free-slip on the horizontal walls.
    pub fn channel() -> Self {
        Self {
            left: WallCondition::Periodic,
            right: WallCondition::Periodic,
            bottom: WallCondition::FreeSlip,
            top: WallCondition::FreeSlip,
        }
    }

    pub fn wall(&self, w: Wall) -> WallCondition {
        match w {
            Wall::Left => self.left,
            Wall::Right => self.right,
            Wall::Bottom => self.bottom,
            Wall::Top => self.top,
        }
    }

    pub fn is_fully_periodic(&self) -> bool {
        *self == Self::periodic()
    }

    /// Coordinate directions d for which the constant field e_d lies in the
    /// velocity space and carries no viscous energy: walls normal to d are
    /// periodic and walls parallel to it are periodic or free-slip.
    pub fn free_translations(&self) -> Vec<usize> {
        use WallCondition::*;
        let glides = |a: WallCondition, b: WallCondition| matches!((a, b), (Periodic | FreeSlip, Periodic | FreeSlip));
        let mut d = Vec::new();
        if self.left == Periodic && self.right == Periodic && glides(self.bottom, self.top) {
            d.push(0);
        }
        if self.bottom == Periodic && self.top == Periodic && glides(self.left, self.right) {
            d.push(1);
        }
        d
    }

    /// Axes along which the mesh has to be identified.
    pub fn periodic_axes(&self) -> Vec<crate::mesh::Axis> {
        let mut axes = Vec::new();
        if self.left == WallCondition::Periodic && self.right == WallCondition::Periodic {
            axes.push(crate::mesh::Axis::X1);
        }
        if self.bottom == WallCondition::Periodic && self.top == WallCondition::Periodic {
            axes.push(crate::mesh::Axis::X2);
        }
        axes
    }
}

/// Local-to-global entry: global index (None when constrained to zero) and sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalDof {
    pub global: Option<usize>,
    pub sign: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    Interior,
    Facet,
    Periodic,
}

#[derive(Debug)]
pub struct VelocitySpace {
    mesh: Arc<Mesh>,
    element: Arc<ReferenceElement>,
    bc: BoundarySpec,
    geometry: Vec<ElementGeometry>,
    local: Vec<Vec<LocalDof>>,
    /// Whether the element is the plus side of each of its local edges.
    plus_side: Vec<[bool; 3]>,
    kinds: Vec<DofKind>,
    num_dofs: usize,
}

impl VelocitySpace {
    pub fn new(mesh: Arc<Mesh>, k: usize, bc: BoundarySpec) -> Result<Self, SpaceError> {
        let element = Arc::new(ReferenceElement::new(k)?);
        Self::with_element(mesh, element, bc)
    }

    pub fn with_element(mesh: Arc<Mesh>, element: Arc<ReferenceElement>, bc: BoundarySpec) -> Result<Self, SpaceError> {
        let rt = &element.rt;
        let per_edge = rt.dofs_per_edge();
        let n_local = rt.num_dofs();
        let geometry = (0..mesh.num_triangles())
            .map(|t| ElementGeometry::new(mesh.triangle_points(t)))
            .collect::<Result<Vec<_>, ElementError>>()?;

        let mut local = vec![vec![LocalDof { global: None, sign: 1.0 }; n_local]; mesh.num_triangles()];
        let mut plus_side = vec![[false; 3]; mesh.num_triangles()];
        let mut kinds = Vec::new();
        let mut next = 0usize;
        for (f, facet) in mesh.facets.iter().enumerate() {
            let constrained = match facet.kind {
                FacetKind::Boundary(w) => match bc.wall(w) {
                    WallCondition::Periodic => return Err(SpaceError::UnidentifiedPeriodicWall { facet: f, wall: w }),
                    _ => true,
                },
                _ => false,
            };
            let start = if constrained {
                None
            } else {
                let s = next;
                next += per_edge;
                let kind = if let FacetKind::Periodic(_) = facet.kind { DofKind::Periodic } else { DofKind::Facet };
                kinds.extend(std::iter::repeat_n(kind, per_edge));
                Some(s)
            };
            for (side, eps) in facet.sides().zip([1.0, -1.0]) {
                if eps > 0.0 {
                    plus_side[side.element][side.local_edge] = true;
                }
                for j in 0..per_edge {
                    let parity = if side.reversed && j % 2 == 1 { -1.0 } else { 1.0 };
                    local[side.element][rt.edge_dof(side.local_edge, j)] =
                        LocalDof { global: start.map(|s| s + j), sign: eps * parity };
                }
            }
        }
        for dofs in local.iter_mut() {
            for m in 0..rt.num_interior_dofs() {
                dofs[rt.interior_dof(m)] = LocalDof { global: Some(next), sign: 1.0 };
                next += 1;
                kinds.push(DofKind::Interior);
            }
        }
        Ok(Self { mesh, element, bc, geometry, local, plus_side, kinds, num_dofs: next })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn element(&self) -> &Arc<ReferenceElement> {
        &self.element
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn boundary(&self) -> BoundarySpec {
        self.bc
    }

    pub fn num_dofs(&self) -> usize {
        self.num_dofs
    }

    pub fn num_local(&self) -> usize {
        self.element.rt.num_dofs()
    }

    pub fn num_elements(&self) -> usize {
        self.geometry.len()
    }

    pub fn dof_kind(&self, i: usize) -> DofKind {
        self.kinds[i]
    }

    pub fn geometry(&self, e: usize) -> &ElementGeometry {
        &self.geometry[e]
    }

    pub fn local_dofs(&self, e: usize) -> &[LocalDof] {
        &self.local[e]
    }

    pub fn is_fully_periodic(&self) -> bool {
        self.mesh.is_fully_periodic()
    }

    /// Wall condition of a facet, `None` for interior and periodic facets.
    pub fn facet_condition(&self, f: usize) -> Option<WallCondition> {
        self.mesh.facets[f].wall().map(|w| self.bc.wall(w))
    }

    pub fn check_len(&self, coeffs: &[f64]) -> Result<(), SpaceError> {
        if coeffs.len() != self.num_dofs {
            return Err(SpaceError::Length { got: coeffs.len(), expected: self.num_dofs });
        }
        Ok(())
    }

    /// Element-local coefficients of a global coefficient vector.
    pub fn local_coefficients(&self, e: usize, coeffs: &[f64]) -> Vec<f64> {
        self.local[e].iter().map(|d| d.global.map_or(0.0, |g| d.sign * coeffs[g])).collect()
    }

    /// Scatters element-local values into a global vector, skipping constrained dofs.
    pub fn scatter_add(&self, e: usize, local: &[f64], global: &mut [f64]) {
        for (d, v) in self.local[e].iter().zip(local) {
            if let Some(g) = d.global {
                global[g] += d.sign * v;
            }
        }
    }

    fn gather_local(&self, coeffs: &mut [f64], e: usize, local: &[f64]) {
        let rt = &self.element.rt;
        let per_edge = rt.dofs_per_edge();
        for (l, (d, v)) in self.local[e].iter().zip(local).enumerate() {
            let Some(g) = d.global else { continue };
            if l < 3 * per_edge && !self.plus_side[e][l / per_edge] {
                continue;
            }
            coeffs[g] = d.sign * v;
        }
    }

    fn data_rules() -> (EdgeRule, QuadratureRule) {
        (edge_quadrature(DATA_QUADRATURE_DEGREE), triangle_quadrature(DATA_QUADRATURE_DEGREE).expect("supported degree"))
    }

    /// Canonical Raviart-Thomas interpolant of a smooth vector field.
    pub fn interpolate(&self, f: &dyn Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let (edge, vol) = Self::data_rules();
        let mut coeffs = vec![0.0; self.num_dofs];
        for (e, g) in self.geometry.iter().enumerate() {
            let pulled = |x: [f64; 2]| g.pull_back(f(g.map(x)));
            let local = self.element.rt.dofs_from_field(&pulled, &edge, &vol);
            self.gather_local(&mut coeffs, e, &local);
        }
        coeffs
    }

    /// Interpolant of curl(psi) = (d psi/dx2, -d psi/dx1) from stream-function values.
    /// The result is divergence-free up to roundoff for any continuous `psi` that is
    /// periodic across identified walls.
    pub fn interpolate_curl(&self, psi: &dyn Fn([f64; 2]) -> f64) -> Vec<f64> {
        let (edge, vol) = Self::data_rules();
        let mut coeffs = vec![0.0; self.num_dofs];
        for (e, g) in self.geometry.iter().enumerate() {
            let pulled = |x: [f64; 2]| psi(g.map(x));
            let local = self.element.rt.dofs_from_stream(&pulled, &edge, &vol);
            self.gather_local(&mut coeffs, e, &local);
        }
        coeffs
    }

    /// Value, gradient, divergence and curl of a field at a reference point of element `e`.
    pub fn evaluate(&self, coeffs: &[f64], e: usize, x: [f64; 2]) -> Result<PointValue, SpaceError> {
        if e >= self.num_elements() {
            return Err(SpaceError::ElementIndex(e));
        }
        let tol = 1e-12;
        if x[0] < -tol || x[1] < -tol || x[0] + x[1] > 1.0 + tol {
            return Err(ElementError::OutsideElement(x[0], x[1]).into());
        }
        self.check_len(coeffs)?;
        let c = self.local_coefficients(e, coeffs);
        let rt = &self.element.rt;
        let mut v = [0.0; 2];
        let mut gr = [[0.0; 2]; 2];
        let mut d = 0.0;
        for ((ci, s), (gs, ds)) in c.iter().zip(rt.eval(x)).zip(rt.eval_grad(x).into_iter().zip(rt.eval_div(x))) {
            v[0] += ci * s[0];
            v[1] += ci * s[1];
            for a in 0..2 {
                for b in 0..2 {
                    gr[a][b] += ci * gs[a][b];
                }
            }
            d += ci * ds;
        }
        let g = &self.geometry[e];
        let gradient = g.piola_grad(&gr);
        Ok(PointValue { value: g.piola_value(v), gradient, divergence: g.piola_div(d), curl: gradient[1][0] - gradient[0][1] })
    }
}

/// Pointwise evaluation of a velocity field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub value: [f64; 2],
    /// `gradient[c][d]` = d u_c / d x_d
    pub gradient: [[f64; 2]; 2],
    pub divergence: f64,
    pub curl: f64,
}

/// Discontinuous P_k pressures with an orthonormal basis per element.
#[derive(Debug)]
pub struct PressureSpace {
    mesh: Arc<Mesh>,
    element: Arc<ReferenceElement>,
    geometry: Vec<ElementGeometry>,
}

impl PressureSpace {
    pub fn new(velocity: &VelocitySpace) -> Self {
        Self { mesh: velocity.mesh.clone(), element: velocity.element.clone(), geometry: velocity.geometry.clone() }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.element.scalar.degree()
    }

    pub fn num_local(&self) -> usize {
        self.element.scalar.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.num_local() * self.geometry.len()
    }

    pub fn geometry(&self, e: usize) -> &ElementGeometry {
        &self.geometry[e]
    }

    pub fn global(&self, e: usize, i: usize) -> usize {
        e * self.num_local() + i
    }

    /// Zero-mean functional: entry i is the integral of basis function i.
    /// Only the constant function sqrt(2) of each element contributes.
    pub fn mean_functional(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.num_dofs()];
        for (e, g) in self.geometry.iter().enumerate() {
            m[self.global(e, 0)] = g.det / std::f64::consts::SQRT_2;
        }
        m
    }

    /// Integral of the pressure field over the domain.
    pub fn integral(&self, coeffs: &[f64]) -> f64 {
        self.mean_functional().iter().zip(coeffs).map(|(a, b)| a * b).sum()
    }

    /// Elementwise L2 projection onto P_k, without mean removal.
    pub fn project_local(&self, q: &dyn Fn([f64; 2]) -> f64) -> Vec<f64> {
        let rule = triangle_quadrature(DATA_QUADRATURE_DEGREE).expect("supported degree");
        let basis: Vec<Vec<f64>> = rule.points.iter().map(|&x| self.element.scalar.eval(x)).collect();
        let nl = self.num_local();
        let mut out = vec![0.0; self.num_dofs()];
        for (e, g) in self.geometry.iter().enumerate() {
            for ((x, w), b) in rule.points.iter().zip(&rule.weights).zip(&basis) {
                let v = q(g.map(*x));
                for i in 0..nl {
                    // The basis is orthonormal on the reference, so the physical
                    // mass matrix is det J times the identity.
                    out[e * nl + i] += w * v * b[i];
                }
            }
        }
        out
    }

    /// L2 projection onto the zero-mean discrete pressures.
    pub fn project_pressure(&self, q: &dyn Fn([f64; 2]) -> f64) -> Vec<f64> {
        let mut c = self.project_local(q);
        self.remove_mean(&mut c);
        c
    }

    pub fn remove_mean(&self, coeffs: &mut [f64]) {
        let area: f64 = self.geometry.iter().map(|g| g.area()).sum();
        let mean = self.integral(coeffs) / area;
        for e in 0..self.geometry.len() {
            coeffs[self.global(e, 0)] -= mean / std::f64::consts::SQRT_2;
        }
    }

    pub fn evaluate(&self, coeffs: &[f64], e: usize, x: [f64; 2]) -> Result<f64, SpaceError> {
        if e >= self.geometry.len() {
            return Err(SpaceError::ElementIndex(e));
        }
        if coeffs.len() != self.num_dofs() {
            return Err(SpaceError::Length { got: coeffs.len(), expected: self.num_dofs() });
        }
        let nl = self.num_local();
        Ok(self.element.scalar.eval(x).iter().zip(&coeffs[e * nl..(e + 1) * nl]).map(|(b, c)| b * c).sum())
    }
}

/// Anything with a global degree-of-freedom count.
pub trait Space {
    fn dimension(&self) -> usize;
}

impl Space for VelocitySpace {
    fn dimension(&self) -> usize {
        self.num_dofs
    }
}

impl Space for PressureSpace {
    fn dimension(&self) -> usize {
        self.num_dofs()
    }
}

/// Coefficient vector over a shared space.
#[derive(Debug)]
pub struct DiscreteField<S> {
    space: Arc<S>,
    coeffs: Vec<f64>,
}

impl<S> Clone for DiscreteField<S> {
    fn clone(&self) -> Self {
        Self { space: self.space.clone(), coeffs: self.coeffs.clone() }
    }
}

pub type VelocityField = DiscreteField<VelocitySpace>;
pub type PressureField = DiscreteField<PressureSpace>;

impl<S: Space> DiscreteField<S> {
    pub fn new(space: Arc<S>, coeffs: Vec<f64>) -> Result<Self, SpaceError> {
        if coeffs.len() != space.dimension() {
            return Err(SpaceError::Length { got: coeffs.len(), expected: space.dimension() });
        }
        Ok(Self { space, coeffs })
    }

    pub fn zero(space: Arc<S>) -> Self {
        let n = space.dimension();
        Self { space, coeffs: vec![0.0; n] }
    }

    pub fn space(&self) -> &Arc<S> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }
}

impl VelocityField {
    pub fn interpolate(space: Arc<VelocitySpace>, f: &dyn Fn([f64; 2]) -> [f64; 2]) -> Self {
        let coeffs = space.interpolate(f);
        Self { space, coeffs }
    }

    pub fn interpolate_curl(space: Arc<VelocitySpace>, psi: &dyn Fn([f64; 2]) -> f64) -> Self {
        let coeffs = space.interpolate_curl(psi);
        Self { space, coeffs }
    }

    pub fn evaluate(&self, e: usize, x: [f64; 2]) -> Result<PointValue, SpaceError> {
        self.space.evaluate(&self.coeffs, e, x)
    }
}

impl PressureField {
    pub fn project(space: Arc<PressureSpace>, q: &dyn Fn([f64; 2]) -> f64) -> Self {
        let coeffs = space.project_pressure(q);
        Self { space, coeffs }
    }

    pub fn evaluate(&self, e: usize, x: [f64; 2]) -> Result<f64, SpaceError> {
        self.space.evaluate(&self.coeffs, e, x)
    }
}
