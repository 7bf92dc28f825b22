//! Direct solution of the velocity-pressure saddle point system
//!
//! ```text
//! [ A   B^T  0   C ] [u]   [f]
//! [ B   0    m   0 ] [p] = [g]
//! [ 0   m^T  0   0 ] [l]   [0]
//! [ C^T 0    0   0 ] [c]   [t]
//! ```
//!
//! where `m` fixes the pressure mean and the optional dense columns `C` pin
//! linear functionals of the velocity (used for mean velocity on fully
//! periodic meshes). The symbolic factorisation is cached across solves that
//! share a sparsity structure.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::Mat;

use crate::error::SolverError;
use crate::sparse::{norm, CsrMatrix, SparsityPattern};

pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
const MAX_REFINEMENTS: usize = 6;
const RUIZ_PASSES: usize = 8;

#[derive(Debug, Clone, Copy)]
pub struct SaddleSystem<'a> {
    pub velocity_block: &'a CsrMatrix,
    pub coupling: &'a CsrMatrix,
    pub pressure_mean: &'a [f64],
    pub velocity_constraints: &'a [Vec<f64>],
    pub constraint_targets: &'a [f64],
    pub rhs_velocity: &'a [f64],
    pub rhs_pressure: &'a [f64],
}

impl<'a> SaddleSystem<'a> {
    pub fn new(
        velocity_block: &'a CsrMatrix,
        coupling: &'a CsrMatrix,
        pressure_mean: &'a [f64],
        rhs_velocity: &'a [f64],
        rhs_pressure: &'a [f64],
    ) -> Self {
        Self {
            velocity_block,
            coupling,
            pressure_mean,
            velocity_constraints: &[],
            constraint_targets: &[],
            rhs_velocity,
            rhs_pressure,
        }
    }

    pub fn with_constraints(mut self, functionals: &'a [Vec<f64>], targets: &'a [f64]) -> Self {
        self.velocity_constraints = functionals;
        self.constraint_targets = targets;
        self
    }

    fn check(&self) -> Result<(), SolverError> {
        let nv = self.velocity_block.nrows();
        let np = self.coupling.nrows();
        let bad = |what: &str| Err(SolverError::Config(format!("saddle system: {what}")));
        if self.velocity_block.ncols() != nv {
            return bad("velocity block not square");
        }
        if self.coupling.ncols() != nv {
            return bad("coupling columns differ from velocity size");
        }
        if self.pressure_mean.len() != np || self.rhs_pressure.len() != np {
            return bad("pressure vector length mismatch");
        }
        if self.rhs_velocity.len() != nv {
            return bad("velocity right-hand side length mismatch");
        }
        if self.velocity_constraints.len() != self.constraint_targets.len()
            || self.velocity_constraints.iter().any(|c| c.len() != nv)
        {
            return bad("velocity constraint shape mismatch");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSolution {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    /// Pressure-mean multiplier first, then one per velocity constraint.
    pub multipliers: Vec<f64>,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub symbolic_factorisations: usize,
    pub numeric_factorisations: usize,
    pub solves: usize,
    pub refinement_steps: usize,
}

/// Column-compressed structure of the full system plus scatter maps from the
/// block storage into it.
struct Structure {
    a_pattern: Arc<SparsityPattern>,
    b_pattern: Arc<SparsityPattern>,
    mean_support: Vec<usize>,
    constraint_support: Vec<Vec<usize>>,
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    map_a: Vec<usize>,
    map_b: Vec<usize>,
    map_bt: Vec<usize>,
    map_mean: Vec<[usize; 2]>,
    map_constraints: Vec<Vec<[usize; 2]>>,
    symbolic: SymbolicLu<usize>,
}

fn support(v: &[f64]) -> Vec<usize> {
    v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, _)| i).collect()
}

fn same_pattern(a: &Arc<SparsityPattern>, b: &Arc<SparsityPattern>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl Structure {
    fn matches(&self, sys: &SaddleSystem) -> bool {
        same_pattern(&self.a_pattern, sys.velocity_block.pattern())
            && same_pattern(&self.b_pattern, sys.coupling.pattern())
            && self.mean_support == support(sys.pressure_mean)
            && self.constraint_support.len() == sys.velocity_constraints.len()
            && self.constraint_support.iter().zip(sys.velocity_constraints).all(|(s, c)| *s == support(c))
    }

    fn build(sys: &SaddleSystem) -> Result<Self, SolverError> {
        let a = sys.velocity_block;
        let b = sys.coupling;
        let nv = a.nrows();
        let np = b.nrows();
        let nc = sys.velocity_constraints.len();
        let lm = nv + np;
        let n = nv + np + 1 + nc;
        let mean_support = support(sys.pressure_mean);
        let constraint_support: Vec<Vec<usize>> = sys.velocity_constraints.iter().map(|c| support(c)).collect();

        // Entries of the transpose; its CSR layout is the CSC layout of the system.
        let mut entries = Vec::new();
        for (r, c, _) in a.triplets() {
            entries.push((c, r));
        }
        for (i, j, _) in b.triplets() {
            entries.push((j, nv + i));
            entries.push((nv + i, j));
        }
        for &i in &mean_support {
            entries.push((nv + i, lm));
            entries.push((lm, nv + i));
        }
        for (k, s) in constraint_support.iter().enumerate() {
            for &j in s {
                entries.push((j, lm + 1 + k));
                entries.push((lm + 1 + k, j));
            }
        }
        let t = SparsityPattern::from_entries(n, n, &entries);
        let pos = |row: usize, col: usize| t.position(col, row).expect("entry in system pattern");
        let map_a = a.triplets().map(|(r, c, _)| pos(r, c)).collect();
        let map_b = b.triplets().map(|(i, j, _)| pos(nv + i, j)).collect();
        let map_bt = b.triplets().map(|(i, j, _)| pos(j, nv + i)).collect();
        let map_mean = mean_support.iter().map(|&i| [pos(nv + i, lm), pos(lm, nv + i)]).collect();
        let map_constraints = constraint_support
            .iter()
            .enumerate()
            .map(|(k, s)| s.iter().map(|&j| [pos(j, lm + 1 + k), pos(lm + 1 + k, j)]).collect())
            .collect();
        let col_ptr = t.row_ptr().to_vec();
        let row_idx = t.col_idx().to_vec();
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
        let symbolic = SymbolicLu::try_new(sym)
            .map_err(|e| SolverError::Factorisation { rows: n, message: format!("symbolic analysis: {e:?}") })?;
        Ok(Self {
            a_pattern: a.pattern().clone(),
            b_pattern: b.pattern().clone(),
            mean_support,
            constraint_support,
            n,
            col_ptr,
            row_idx,
            map_a,
            map_b,
            map_bt,
            map_mean,
            map_constraints,
            symbolic,
        })
    }

    fn values(&self, sys: &SaddleSystem) -> Vec<f64> {
        let mut v = vec![0.0; self.row_idx.len()];
        for (&p, x) in self.map_a.iter().zip(sys.velocity_block.values()) {
            v[p] += x;
        }
        for ((&p, &q), x) in self.map_b.iter().zip(&self.map_bt).zip(sys.coupling.values()) {
            v[p] += x;
            v[q] += x;
        }
        for (&[p, q], &i) in self.map_mean.iter().zip(&self.mean_support) {
            v[p] += sys.pressure_mean[i];
            v[q] += sys.pressure_mean[i];
        }
        for (k, maps) in self.map_constraints.iter().enumerate() {
            for (&[p, q], &j) in maps.iter().zip(&self.constraint_support[k]) {
                v[p] += sys.velocity_constraints[k][j];
                v[q] += sys.velocity_constraints[k][j];
            }
        }
        v
    }

    fn residual(&self, values: &[f64], x: &[f64], b: &[f64]) -> Vec<f64> {
        let mut r = b.to_vec();
        for c in 0..self.n {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                r[self.row_idx[p]] -= values[p] * xc;
            }
        }
        r
    }

    /// Ruiz equilibration: row and column scalings that bring every row and
    /// column of the scaled matrix to unit max-norm.
    fn equilibrate(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut dr = vec![1.0; self.n];
        let mut dc = vec![1.0; self.n];
        for _ in 0..RUIZ_PASSES {
            let mut rmax = vec![0.0f64; self.n];
            let mut cmax = vec![0.0f64; self.n];
            for c in 0..self.n {
                for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                    let r = self.row_idx[p];
                    let v = (values[p] * dr[r] * dc[c]).abs();
                    rmax[r] = rmax[r].max(v);
                    cmax[c] = cmax[c].max(v);
                }
            }
            for (d, m) in dr.iter_mut().zip(&rmax).chain(dc.iter_mut().zip(&cmax)) {
                if *m > 0.0 {
                    *d /= m.sqrt();
                }
            }
        }
        (dr, dc)
    }

    /// max_i |r_i| / (|A| |x| + |b|)_i, the componentwise backward error.
    fn backward_error(&self, values: &[f64], x: &[f64], b: &[f64], r: &[f64]) -> f64 {
        let mut scale: Vec<f64> = b.iter().map(|v| v.abs()).collect();
        for c in 0..self.n {
            let xc = x[c].abs();
            if xc == 0.0 {
                continue;
            }
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                scale[self.row_idx[p]] += values[p].abs() * xc;
            }
        }
        r.iter().zip(&scale).fold(0.0, |m, (ri, si)| {
            let q = if *si > 0.0 {
                ri.abs() / si
            } else if *ri == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            m.max(q)
        })
    }
}

/// LU factors of the equilibrated matrix together with the unscaled values
/// they were computed from.
struct Factor {
    values: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    lu: Lu<usize, f64>,
}

/// Sparse LU solver for saddle systems. Reuses the symbolic analysis while
/// the block patterns stay fixed and the numeric factors while the values do.
#[derive(Default)]
pub struct SaddleSolver {
    structure: Option<Structure>,
    factor: Option<Factor>,
    stats: SolverStats,
}

impl SaddleSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    pub fn solve(&mut self, sys: &SaddleSystem) -> Result<SaddleSolution, SolverError> {
        sys.check()?;
        if !self.structure.as_ref().is_some_and(|s| s.matches(sys)) {
            self.factor = None;
            self.structure = Some(Structure::build(sys)?);
            self.stats.symbolic_factorisations += 1;
        }
        let st = self.structure.as_ref().expect("structure built");
        let values = st.values(sys);
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::Factorisation { rows: st.n, message: "non-finite matrix entry".into() });
        }
        if !self.factor.as_ref().is_some_and(|f| f.values == values) {
            self.factor = None;
            let (row_scale, col_scale) = st.equilibrate(&values);
            let mut scaled = values.clone();
            for c in 0..st.n {
                for p in st.col_ptr[c]..st.col_ptr[c + 1] {
                    scaled[p] *= row_scale[st.row_idx[p]] * col_scale[c];
                }
            }
            let sym = SymbolicSparseColMatRef::new_checked(st.n, st.n, &st.col_ptr, None, &st.row_idx);
            let mat = SparseColMatRef::new(sym, &scaled);
            let lu = Lu::try_new_with_symbolic(st.symbolic.clone(), mat)
                .map_err(|e| SolverError::Factorisation { rows: st.n, message: format!("numeric factorisation: {e:?}") })?;
            self.stats.numeric_factorisations += 1;
            self.factor = Some(Factor { values, row_scale, col_scale, lu });
        }
        let f = self.factor.as_ref().expect("factor computed");
        let values = &f.values;

        let nv = sys.velocity_block.nrows();
        let np = sys.coupling.nrows();
        let mut rhs = Vec::with_capacity(st.n);
        rhs.extend_from_slice(sys.rhs_velocity);
        rhs.extend_from_slice(sys.rhs_pressure);
        rhs.push(0.0);
        rhs.extend_from_slice(sys.constraint_targets);
        let rhs_norm = norm(&rhs);

        let apply = |b: &[f64]| -> Vec<f64> {
            let m = Mat::<f64>::from_fn(st.n, 1, |i, _| b[i] * f.row_scale[i]);
            let x = f.lu.solve(&m);
            (0..st.n).map(|i| x[(i, 0)] * f.col_scale[i]).collect()
        };
        self.stats.solves += 1;
        let mut x = apply(&rhs);
        let mut r = st.residual(values, &x, &rhs);
        let mut omega = st.backward_error(values, &x, &rhs, &r);
        // Refine until every row, the divergence rows included, is solved to
        // roundoff relative to its own scale. A global norm would be dominated
        // by the stiffest velocity rows.
        for _ in 0..MAX_REFINEMENTS {
            if omega <= 4.0 * f64::EPSILON || !omega.is_finite() {
                break;
            }
            let d = apply(&r);
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            let rt = st.residual(values, &trial, &rhs);
            let wt = st.backward_error(values, &trial, &rhs, &rt);
            self.stats.refinement_steps += 1;
            if !(wt < omega) {
                break;
            }
            let stalled = wt > 0.5 * omega;
            x = trial;
            r = rt;
            omega = wt;
            if stalled {
                break;
            }
        }
        let res = norm(&r);
        let tolerance = RESIDUAL_TOLERANCE * rhs_norm;
        if !(res <= tolerance) {
            return Err(SolverError::Residual { residual: res, tolerance, rows: st.n, rhs_norm });
        }
        let multipliers = x[nv + np..].to_vec();
        x.truncate(nv + np);
        let pressure = x.split_off(nv);
        Ok(SaddleSolution {
            velocity: x,
            pressure,
            multipliers,
            relative_residual: if rhs_norm > 0.0 { res / rhs_norm } else { 0.0 },
        })
    }
}

/// One-shot saddle solve without caching.
pub fn solve_sparse(sys: &SaddleSystem) -> Result<SaddleSolution, SolverError> {
    SaddleSolver::new().solve(sys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (CsrMatrix, CsrMatrix) {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 2.0), (1, 2, 0.0), (2, 1, 0.0)],
        );
        let b = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 1, -1.0), (1, 2, 1.0)]);
        (a, b)
    }

    #[test]
    fn identity_block_returns_rhs() {
        let a = CsrMatrix::identity(4);
        let b = CsrMatrix::from_triplets(1, 4, &[(0, 0, 0.0)]);
        let f = [1.0, -2.0, 3.5, 0.25];
        // Pressure row is [0 | 0 m; m 0]: choose m = 1 so p is pinned to 0.
        let s = solve_sparse(&SaddleSystem::new(&a, &b, &[1.0], &f, &[0.0])).unwrap();
        for (x, y) in s.velocity.iter().zip(f) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!(s.pressure[0].abs() < 1e-14);
    }

    #[test]
    fn dense_oracle() {
        // Every block row of the system holds with the returned multiplier.
        let (a, b) = small();
        let f = [1.0, 2.0, 3.0];
        let g = [0.0, 0.5];
        let s = solve_sparse(&SaddleSystem::new(&a, &b, &[1.0, 1.0], &f, &g)).unwrap();
        let (u, p) = (&s.velocity, &s.pressure);
        assert!((p[0] + p[1]).abs() < 1e-13);
        let au = a.mul_vec(u);
        let bt = b.mul_transpose_vec(p);
        let l = s.multipliers[0];
        for i in 0..3 {
            assert!((au[i] + bt[i] - f[i]).abs() < 1e-12);
        }
        // Mean column also feeds the pressure rows.
        let bu = b.mul_vec(u);
        for i in 0..2 {
            assert!((bu[i] + l - g[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn constraints_pin_functionals() {
        // A singular in direction (1, 1, 0): pin u0 + u1 = 2.
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0), (2, 2, 1.0)]);
        let b = CsrMatrix::from_triplets(1, 3, &[(0, 2, 1.0)]);
        let c = vec![vec![1.0, 1.0, 0.0]];
        let sys = SaddleSystem::new(&a, &b, &[1.0], &[0.0; 3], &[0.0]).with_constraints(&c, &[2.0]);
        let s = solve_sparse(&sys).unwrap();
        assert!((s.velocity[0] - 1.0).abs() < 1e-13 && (s.velocity[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn singular_system_reported() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        let b = CsrMatrix::from_triplets(1, 2, &[(0, 0, 0.0)]);
        let r = solve_sparse(&SaddleSystem::new(&a, &b, &[1.0], &[1.0, 0.0], &[0.0]));
        assert!(r.is_err(), "{r:?}");
    }

    #[test]
    fn caches_factorisations() {
        let (a, b) = small();
        let mut solver = SaddleSolver::new();
        let m = [1.0, 1.0];
        solver.solve(&SaddleSystem::new(&a, &b, &m, &[1.0, 0.0, 0.0], &[0.0, 0.0])).unwrap();
        solver.solve(&SaddleSystem::new(&a, &b, &m, &[0.0, 1.0, 0.0], &[0.0, 1.0])).unwrap();
        let a2 = CsrMatrix::combine(&[(2.0, &a)]);
        solver.solve(&SaddleSystem::new(&a2, &b, &m, &[0.0, 1.0, 0.0], &[0.0, 1.0])).unwrap();
        let st = solver.stats();
        assert_eq!(st.symbolic_factorisations, 1);
        assert_eq!(st.numeric_factorisations, 2);
        assert_eq!(st.solves, 3);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let (a, b) = small();
        assert!(solve_sparse(&SaddleSystem::new(&a, &b, &[1.0], &[0.0; 3], &[0.0; 2])).is_err());
    }
}
