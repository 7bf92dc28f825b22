//! Mesh-refinement studies against the manufactured solutions.

use std::fmt::Write as _;

use crate::diagnostics::{error_norms, observed_order, ErrorNorms};
use crate::error::{ConfigError, Error};
use crate::solver::{solve_stationary_stokes, FlowModel};

use super::config::{CaseConfig, CaseKind, MeshSpec, OrderNorm};
use super::run::{boundary_for, discretise, CaseSetup};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    /// Errors at the final time.
    pub l2: f64,
    pub energy: f64,
    pub upwind: f64,
    /// Transient runs: (max_t ||e||^2 + sum_n dt (nu |||e|||_e^2 + |e|_upw^2))^(1/2).
    /// Stationary runs: (||e||^2 + nu |||e|||_e^2)^(1/2).
    pub combined: f64,
    /// (t, L2 error) after every step, starting at t = 0.
    pub history: Vec<(f64, f64)>,
}

impl ConvergenceRow {
    pub fn get(&self, norm: OrderNorm) -> f64 {
        match norm {
            OrderNorm::L2 => self.l2,
            OrderNorm::Energy => self.energy,
            OrderNorm::Combined => self.combined,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub case: CaseKind,
    pub rows: Vec<ConvergenceRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderCheck {
    /// Order between the two finest meshes; `None` if undefined.
    pub observed: Option<f64>,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl ConvergenceTable {
    /// Observed orders between consecutive rows.
    pub fn orders(&self, norm: OrderNorm) -> Vec<Option<f64>> {
        self.rows.windows(2).map(|w| observed_order((w[0].h, w[1].h), (w[0].get(norm), w[1].get(norm)))).collect()
    }

    pub fn check(&self, norm: OrderNorm, expected: f64, tolerance: f64) -> OrderCheck {
        let observed = self.orders(norm).last().copied().flatten();
        OrderCheck { observed, expected, tolerance, passed: observed.is_some_and(|o| (o - expected).abs() <= tolerance) }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,h,dt,steps,l2,energy,upwind,combined,order_l2,order_energy,order_combined\n");
        let o = [OrderNorm::L2, OrderNorm::Energy, OrderNorm::Combined].map(|m| self.orders(m));
        let cell = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for (i, r) in self.rows.iter().enumerate() {
            let _ = write!(s, "{},{},{},{},{},{},{},{}", r.n, r.h, r.dt, r.steps, r.l2, r.energy, r.upwind, r.combined);
            for col in &o {
                let v = if i == 0 { None } else { col[i - 1] };
                let _ = write!(s, ",{}", cell(v));
            }
            s.push('\n');
        }
        s
    }
}

/// Time step on the mesh with `n` cells per side: dt ~ h^((k+1)/2), equal to
/// the configured step on the first mesh.
pub fn scaled_step(config: &CaseConfig, n: usize) -> f64 {
    let n0 = config.meshes.first().copied().unwrap_or(n) as f64;
    config.dt * (n0 / n as f64).powf((config.k + 1) as f64 / 2.0)
}

pub fn convergence_study(config: &CaseConfig) -> Result<ConvergenceTable, Error> {
    config.validate()?;
    if config.meshes.len() < 2 {
        return Err(
            ConfigError::Invalid(format!("a convergence study needs at least 2 meshes, got {}", config.meshes.len())).into()
        );
    }
    let rows = match config.case {
        CaseKind::ManufacturedStokes => config.meshes.iter().map(|&n| stokes_row(config, n)).collect::<Result<Vec<_>, _>>()?,
        CaseKind::ManufacturedOseen | CaseKind::Lattice => {
            config.meshes.iter().map(|&n| transient_row(config, n)).collect::<Result<Vec<_>, _>>()?
        }
        other => {
            return Err(ConfigError::Invalid(format!("case {} has no exact solution for a convergence study", other.id())).into());
        }
    };
    Ok(ConvergenceTable { case: config.case, rows })
}

fn stokes_row(config: &CaseConfig, n: usize) -> Result<ConvergenceRow, Error> {
    let mut c = config.clone();
    c.mesh = MeshSpec::Structured(n);
    let disc = discretise(&c.mesh, c.k, boundary_for(c.case))?;
    let setup = CaseSetup::on(&c, disc)?;
    let exact = setup.exact.clone().expect("manufactured data");
    let state = solve_stationary_stokes(&setup.disc, &setup.params, &|x| (exact.forcing)(0.0, x))?;
    let e = error_norms(&state.velocity, &|x| (exact.velocity)(0.0, x), &|x| (exact.gradient)(0.0, x), None, &setup.params);
    Ok(ConvergenceRow {
        n,
        h: 1.0 / n as f64,
        dt: 0.0,
        steps: 0,
        l2: e.l2,
        energy: e.energy,
        upwind: 0.0,
        combined: (e.l2 * e.l2 + c.nu * e.energy * e.energy).sqrt(),
        history: vec![(0.0, e.l2)],
    })
}

fn transient_row(config: &CaseConfig, n: usize) -> Result<ConvergenceRow, Error> {
    let mut c = config.clone();
    c.mesh = MeshSpec::Structured(n);
    c.dt = scaled_step(config, n);
    let disc = discretise(&c.mesh, c.k, boundary_for(c.case))?;
    let setup = CaseSetup::on(&c, disc)?;
    let exact = setup.exact.clone().expect("lattice data");
    let params = setup.params;
    let nu = params.nu;
    let beta_at = |t: f64| {
        let v = exact.velocity.clone();
        move |x: [f64; 2]| v(t, x)
    };
    let has_convection = !matches!(setup.model, FlowModel::Stokes);
    let norms_at = |u: &crate::space::VelocityField, t: f64| -> ErrorNorms {
        let beta = beta_at(t);
        let beta_ref: Option<&dyn Fn([f64; 2]) -> [f64; 2]> = if has_convection { Some(&beta) } else { None };
        error_norms(u, &|x| (exact.velocity)(t, x), &|x| (exact.gradient)(t, x), beta_ref, &params)
    };

    let mut solver = setup.solver(setup.initial_state()?)?;
    let dt = solver.dt();
    let e0 = norms_at(&solver.state().velocity, 0.0);
    let mut max_l2_sq = e0.l2 * e0.l2;
    let mut dissipation = 0.0;
    let mut history = vec![(0.0, e0.l2)];
    let mut last = e0;
    let mut steps = 0;
    while solver.state().t < c.t_end - 1e-9 * dt {
        solver.step()?;
        steps += 1;
        let t = solver.state().t;
        let e = norms_at(&solver.state().velocity, t);
        max_l2_sq = max_l2_sq.max(e.l2 * e.l2);
        dissipation += dt * (nu * e.energy * e.energy + e.upwind * e.upwind);
        history.push((t, e.l2));
        last = e;
    }
    Ok(ConvergenceRow {
        n,
        h: 1.0 / n as f64,
        dt,
        steps,
        l2: last.l2,
        energy: last.energy,
        upwind: last.upwind,
        combined: (max_l2_sq + dissipation).sqrt(),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, e: f64) -> ConvergenceRow {
        ConvergenceRow {
            n,
            h: 1.0 / n as f64,
            dt: 0.0,
            steps: 0,
            l2: e,
            energy: e,
            upwind: 0.0,
            combined: e,
            history: Vec::new(),
        }
    }

    #[test]
    fn orders_and_check() {
        let t =
            ConvergenceTable { case: CaseKind::ManufacturedStokes, rows: vec![row(4, 1.0), row(8, 0.125), row(16, 0.125 / 8.0)] };
        let o = t.orders(OrderNorm::L2);
        assert!((o[0].unwrap() - 3.0).abs() < 1e-12 && (o[1].unwrap() - 3.0).abs() < 1e-12);
        assert!(t.check(OrderNorm::L2, 3.0, 0.2).passed);
        assert!(!t.check(OrderNorm::L2, 2.0, 0.2).passed);
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(1).unwrap().ends_with(",,,"));
    }

    #[test]
    fn repeated_mesh_has_undefined_order() {
        let t = ConvergenceTable { case: CaseKind::ManufacturedStokes, rows: vec![row(8, 1.0), row(8, 1.0)] };
        assert_eq!(t.orders(OrderNorm::L2), vec![None]);
        assert!(!t.check(OrderNorm::L2, 3.0, 0.2).passed);
    }

    #[test]
    fn single_mesh_is_rejected() {
        let mut c = CaseConfig::defaults(CaseKind::ManufacturedStokes);
        c.meshes = vec![4];
        assert!(matches!(convergence_study(&c), Err(Error::Config(_))));
    }

    #[test]
    fn stokes_errors_decrease() {
        let mut c = CaseConfig::defaults(CaseKind::ManufacturedStokes);
        c.meshes = vec![2, 4];
        let t = convergence_study(&c).unwrap();
        assert!(t.rows[1].l2 < t.rows[0].l2 / 4.0, "{:?}", t.rows);
    }

    #[test]
    fn step_scaling() {
        let mut c = CaseConfig::defaults(CaseKind::ManufacturedOseen);
        c.dt = 0.08;
        c.meshes = vec![8, 32];
        // k = 2: dt ~ h^1.5, so a factor 4 in h gives a factor 8 in dt.
        assert!((scaled_step(&c, 32) - 0.01).abs() < 1e-15);
    }
}
