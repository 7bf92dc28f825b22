//! Building and running a configured case.

use std::sync::Arc;

use crate::assembly::FormParams;
use crate::diagnostics::thickness::DEFAULT_SAMPLES;
use crate::diagnostics::{divergence_sup, energy_spectrum, enstrophy, kinetic_energy, vorticity_thickness, RunRecord, SeriesRow};
use crate::error::{CheckpointError, Error};
use crate::mesh::{load_mesh, structured_triangulation, Mesh};
use crate::solver::checkpoint::{CheckpointHeader, Snapshot};
use crate::solver::{
    solve_stationary_stokes, stokes_projection, Discretisation, FlowModel, FlowState, StepReport, TimeSteppingConfig,
    TimeVectorFn, TransientSolver,
};
use crate::space::{BoundarySpec, PressureField, VelocityField, VelocitySpace};

use super::cases::{
    lattice_solution, manufactured_stokes_solution, ExactSolution, KelvinHelmholtzStream, LatticeStream, StreamFunction,
    VortexArrayStream,
};
use super::config::{CaseConfig, CaseKind, InitialMode, MeshSpec, ModelKind, KH_DELTA0};

pub fn boundary_for(case: CaseKind) -> BoundarySpec {
    match case {
        CaseKind::Lattice | CaseKind::DecayingTurbulence | CaseKind::ManufacturedOseen => BoundarySpec::periodic(),
        CaseKind::KelvinHelmholtz => BoundarySpec::channel(),
        CaseKind::ManufacturedStokes => BoundarySpec::no_slip(),
    }
}

/// Reads or generates the mesh and applies the periodic identifications of `bc`.
pub fn build_mesh(spec: &MeshSpec, bc: BoundarySpec) -> Result<Mesh, Error> {
    let mesh = match spec {
        MeshSpec::Structured(n) => structured_triangulation(*n),
        MeshSpec::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
            load_mesh(&text)?
        }
    };
    let axes = bc.periodic_axes();
    Ok(if axes.is_empty() { mesh } else { mesh.apply_periodic_identification(&axes)? })
}

pub fn discretise(spec: &MeshSpec, k: usize, bc: BoundarySpec) -> Result<Arc<Discretisation>, Error> {
    let mesh = build_mesh(spec, bc)?;
    let space = VelocitySpace::new(Arc::new(mesh), k, bc)?;
    Ok(Arc::new(Discretisation::new(Arc::new(space))))
}

/// Everything needed to advance a case in time.
pub struct CaseSetup {
    pub config: CaseConfig,
    pub disc: Arc<Discretisation>,
    pub params: FormParams,
    pub model: FlowModel,
    pub forcing: Option<TimeVectorFn>,
    pub exact: Option<ExactSolution>,
    /// Stream function of the initial velocity, where the case has one.
    pub stream: Option<Arc<dyn StreamFunction>>,
}

impl CaseSetup {
    pub fn new(config: &CaseConfig) -> Result<Self, Error> {
        config.validate()?;
        let disc = discretise(&config.mesh, config.k, boundary_for(config.case))?;
        Self::on(config, disc)
    }

    /// Case data on an existing discretisation.
    pub fn on(config: &CaseConfig, disc: Arc<Discretisation>) -> Result<Self, Error> {
        let params = FormParams { nu: config.nu, sigma: config.sigma(), gamma: config.gamma };
        let (exact, stream): (Option<ExactSolution>, Option<Arc<dyn StreamFunction>>) = match config.case {
            CaseKind::Lattice | CaseKind::ManufacturedOseen => (Some(lattice_solution(config.nu)), Some(Arc::new(LatticeStream))),
            CaseKind::ManufacturedStokes => (Some(manufactured_stokes_solution(config.nu)), None),
            CaseKind::KelvinHelmholtz => (None, Some(Arc::new(KelvinHelmholtzStream::default()))),
            CaseKind::DecayingTurbulence => (None, Some(Arc::new(VortexArrayStream::new(config.n_vortices)))),
        };
        let model = match config.model {
            ModelKind::Stokes => FlowModel::Stokes,
            ModelKind::NavierStokes => FlowModel::NavierStokes,
            ModelKind::Oseen => FlowModel::Oseen(match (&exact, &stream) {
                (Some(e), _) => e.velocity.clone(),
                (None, Some(s)) => {
                    let s = s.clone();
                    Arc::new(move |_, x| s.velocity(x))
                }
                (None, None) => unreachable!("every case has velocity data"),
            }),
        };
        let forcing: Option<TimeVectorFn> = match config.case {
            CaseKind::ManufacturedStokes => exact.as_ref().map(|e| e.forcing.clone()),
            _ => None,
        };
        Ok(Self { config: config.clone(), disc, params, model, forcing, exact, stream })
    }

    /// Initial velocity by interpolation or Stokes projection; the pressure
    /// is the projected exact pressure where known, zero otherwise.
    pub fn initial_state(&self) -> Result<FlowState, Error> {
        let space = self.disc.velocity.clone();
        let velocity = match (self.config.initial, &self.stream, &self.exact) {
            (InitialMode::Interpolate, Some(s), _) => VelocityField::interpolate_curl(space, &|x| s.value(x)),
            (InitialMode::Interpolate, None, Some(e)) => VelocityField::interpolate(space, &|x| (e.velocity)(0.0, x)),
            (InitialMode::StokesProjection, Some(s), _) => {
                stokes_projection(&self.disc, &|x| s.velocity(x), &|x| s.velocity_gradient(x), self.params.sigma)?
            }
            (InitialMode::StokesProjection, None, Some(e)) => {
                stokes_projection(&self.disc, &|x| (e.velocity)(0.0, x), &|x| (e.gradient)(0.0, x), self.params.sigma)?
            }
            (_, None, None) => unreachable!("every case has velocity data"),
        };
        let pressure = match &self.exact {
            Some(e) => {
                PressureField::new(self.disc.pressure.clone(), self.disc.pressure.project_pressure(&|x| (e.pressure)(0.0, x)))?
            }
            None => PressureField::zero(self.disc.pressure.clone()),
        };
        Ok(FlowState { t: 0.0, velocity, pressure })
    }

    pub fn stepping(&self) -> TimeSteppingConfig {
        TimeSteppingConfig {
            newton_tolerance: self.config.newton_tolerance,
            ..TimeSteppingConfig::new(self.config.dt, self.config.t_end)
        }
    }

    pub fn solver(&self, initial: FlowState) -> Result<TransientSolver, Error> {
        Ok(TransientSolver::new(
            self.disc.clone(),
            self.params,
            self.model.clone(),
            self.forcing.clone(),
            &self.stepping(),
            initial,
        )?)
    }

    /// Vorticity thickness over the nominal initial thickness, for mixing layers.
    pub fn delta_ratio(&self, u: &VelocityField) -> Result<Option<f64>, Error> {
        if self.config.case != CaseKind::KelvinHelmholtz {
            return Ok(None);
        }
        Ok(Some(vorticity_thickness(u, 1.0, self.config.thickness_lines, DEFAULT_SAMPLES)? / KH_DELTA0))
    }

    pub fn row(&self, state: &FlowState) -> Result<SeriesRow, Error> {
        Ok(SeriesRow {
            t: state.t,
            kinetic_energy: kinetic_energy(&state.velocity),
            enstrophy: enstrophy(&state.velocity),
            div_max: divergence_sup(&state.velocity),
            delta_ratio: self.delta_ratio(&state.velocity)?,
        })
    }
}

impl CaseSetup {
    pub fn checkpoint_header(&self) -> CheckpointHeader {
        CheckpointHeader {
            case: self.config.case.id().to_string(),
            mesh: self.config.mesh.label(),
            degree: self.config.k,
            sigma: self.params.sigma,
            gamma: self.params.gamma,
            nu: self.params.nu,
        }
    }
}

pub fn snapshot(state: &FlowState) -> Snapshot {
    Snapshot { t: state.t, velocity: state.velocity.coeffs().to_vec(), pressure: state.pressure.coeffs().to_vec() }
}

/// Rebuilds the discretisation named by a checkpoint header and the state
/// stored in one of its snapshots.
pub fn restore(header: &CheckpointHeader, snap: &Snapshot) -> Result<(Arc<Discretisation>, FlowState), Error> {
    let bad = |message: String| -> Error { CheckpointError::Parse { line: 0, message }.into() };
    let case = CaseKind::parse(&header.case).ok_or_else(|| bad(format!("unknown case {:?}", header.case)))?;
    let mesh = MeshSpec::parse(&header.mesh).ok_or_else(|| bad(format!("invalid mesh {:?}", header.mesh)))?;
    let disc = discretise(&mesh, header.degree, boundary_for(case))?;
    let (nv, np) = (disc.velocity.num_dofs(), disc.pressure.num_dofs());
    if snap.velocity.len() != nv || snap.pressure.len() != np {
        return Err(bad(format!(
            "snapshot at t = {} has {}+{} coefficients, the discretisation has {nv}+{np}",
            snap.t,
            snap.velocity.len(),
            snap.pressure.len()
        )));
    }
    let state = FlowState {
        t: snap.t,
        velocity: VelocityField::new(disc.velocity.clone(), snap.velocity.clone())?,
        pressure: PressureField::new(disc.pressure.clone(), snap.pressure.clone())?,
    };
    Ok((disc, state))
}

pub struct RunOutput {
    pub record: RunRecord,
    pub final_state: FlowState,
    /// States at the configured snapshot times.
    pub snapshots: Vec<FlowState>,
    pub reports: Vec<StepReport>,
    /// Largest relative step-to-step growth of K over every step taken, or
    /// `None` before the first step. BDF2 bounds a two-level energy, so small
    /// positive values are possible even for unforced flows.
    pub max_energy_growth: Option<f64>,
    /// The failure that cut the run short, if any.
    pub error: Option<Error>,
}

/// Pending output times, consumed in order once the simulated time reaches them.
struct Schedule {
    times: Vec<f64>,
    next: usize,
}

impl Schedule {
    fn new(mut times: Vec<f64>) -> Self {
        times.sort_by(f64::total_cmp);
        times.dedup();
        Self { times, next: 0 }
    }

    /// True once for each scheduled time at or before `t`.
    fn due(&mut self, t: f64, tol: f64) -> bool {
        let mut hit = false;
        while self.next < self.times.len() && self.times[self.next] <= t + tol {
            self.next += 1;
            hit = true;
        }
        hit
    }
}

/// Runs a configured case with fresh initial data.
pub fn run_transient(config: &CaseConfig) -> Result<RunOutput, Error> {
    let setup = CaseSetup::new(config)?;
    let initial = setup.initial_state()?;
    run_from(&setup, initial, &mut |_| {})
}

/// Runs `setup` from `initial`, calling `on_row` for every recorded row.
/// Setup errors are returned; step failures end the run and are kept in
/// the output together with the partial record.
pub fn run_from(setup: &CaseSetup, initial: FlowState, on_row: &mut dyn FnMut(&SeriesRow)) -> Result<RunOutput, Error> {
    let cfg = &setup.config;
    let mut record = RunRecord::new(cfg.case.id());
    if cfg.case == CaseKind::ManufacturedStokes {
        let f = setup.exact.as_ref().expect("manufactured data").forcing.clone();
        let state = solve_stationary_stokes(&setup.disc, &setup.params, &|x| f(0.0, x))?;
        let row = setup.row(&state)?;
        record.push(row)?;
        on_row(&row);
        return Ok(RunOutput {
            record,
            snapshots: vec![state.clone()],
            final_state: state,
            reports: Vec::new(),
            max_energy_growth: None,
            error: None,
        });
    }

    let mut solver = setup.solver(initial)?;
    let tol = 1e-9 * solver.dt();
    let mut spectra = Schedule::new(cfg.spectrum_times.clone());
    let mut snaps = Schedule::new(cfg.snapshot_times.clone());
    let mut snapshots = Vec::new();
    let mut reports = Vec::new();

    let mut observe = |state: &FlowState, record: &mut RunRecord, force_row: bool| -> Result<f64, Error> {
        let k = kinetic_energy(&state.velocity);
        let final_time = state.t >= cfg.t_end - tol;
        if force_row || final_time {
            let row = setup.row(state)?;
            record.push(row)?;
            on_row(&row);
        }
        if spectra.due(state.t, tol) {
            record.spectra.push((state.t, energy_spectrum(&state.velocity, cfg.spectrum_grid)?));
        }
        if snaps.due(state.t, tol) {
            snapshots.push(state.clone());
        }
        Ok(k)
    };

    let mut k_prev = observe(solver.state(), &mut record, true)?;
    let mut error = None;
    let mut max_energy_growth: Option<f64> = None;
    while solver.state().t < cfg.t_end - tol {
        let report = match solver.step() {
            Ok(r) => r,
            Err(e) => {
                record.mark_failed(e.to_string());
                error = Some(e.into());
                break;
            }
        };
        let on_cadence = report.step % cfg.output_every == 0;
        reports.push(report);
        let k = match observe(solver.state(), &mut record, on_cadence) {
            Ok(k) => k,
            Err(e) => {
                record.mark_failed(e.to_string());
                error = Some(e);
                break;
            }
        };
        if k_prev > 0.0 {
            let growth = (k - k_prev) / k_prev;
            max_energy_growth = Some(max_energy_growth.map_or(growth, |g| g.max(growth)));
        }
        k_prev = k;
    }
    Ok(RunOutput { record, final_state: solver.state().clone(), snapshots, reports, max_energy_growth, error })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(n: usize, t_end: f64) -> CaseConfig {
        let mut c = CaseConfig::defaults(CaseKind::Lattice);
        c.mesh = MeshSpec::Structured(n);
        c.t_end = t_end;
        c.dt = 0.025;
        c
    }

    #[test]
    fn zero_run_record_is_zero() {
        let c = lattice(3, 0.05);
        let setup = CaseSetup::new(&c).unwrap();
        let zero = FlowState::zero(&setup.disc, 0.0);
        let out = run_from(&setup, zero, &mut |_| {}).unwrap();
        assert!(out.error.is_none() && out.record.complete);
        assert_eq!(out.record.rows.len(), 3);
        for r in &out.record.rows {
            assert_eq!((r.kinetic_energy, r.enstrophy, r.div_max), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn lattice_record_is_monotone() {
        let mut c = lattice(6, 0.1);
        c.nu = 1e-2;
        c.spectrum_times = vec![0.05];
        c.spectrum_grid = 16;
        c.snapshot_times = vec![0.0, 0.1];
        let out = run_transient(&c).unwrap();
        assert!(out.record.complete, "{:?}", out.record.failure);
        let rows = &out.record.rows;
        assert_eq!(rows.len(), 5);
        assert!((rows[0].kinetic_energy - 0.25).abs() < 5e-3);
        assert!(out.record.max_energy_growth() <= 0.0);
        assert!(out.max_energy_growth.is_some_and(|g| g < 0.0));
        assert!((rows.last().unwrap().t - 0.1).abs() < 1e-12);
        assert_eq!(out.record.spectra.len(), 1);
        assert!((out.record.spectra[0].0 - 0.05).abs() < 1e-12);
        assert_eq!(out.snapshots.len(), 2);
        assert!(rows.iter().all(|r| r.delta_ratio.is_none()));
    }

    #[test]
    fn zero_length_run_has_one_row() {
        let out = run_transient(&lattice(4, 0.0)).unwrap();
        assert_eq!(out.record.rows.len(), 1);
        assert!(out.reports.is_empty());
    }

    #[test]
    fn invalid_step_is_config_error() {
        let mut c = lattice(4, 0.1);
        c.dt = -1.0;
        assert!(matches!(run_transient(&c), Err(Error::Config(_))));
    }

    #[test]
    fn missing_mesh_file_is_io_error() {
        let mut c = lattice(4, 0.1);
        c.mesh = MeshSpec::File("/nonexistent/mesh.txt".into());
        assert!(matches!(run_transient(&c), Err(Error::Io { .. })));
    }

    #[test]
    fn initial_fields_are_solenoidal() {
        for case in [CaseKind::Lattice, CaseKind::KelvinHelmholtz, CaseKind::DecayingTurbulence, CaseKind::ManufacturedStokes] {
            let mut c = CaseConfig::defaults(case);
            c.mesh = MeshSpec::Structured(8);
            let s = CaseSetup::new(&c).unwrap();
            let u = s.initial_state().unwrap().velocity;
            let d = divergence_sup(&u);
            assert!(d <= 1e-10, "{case:?}: {d}");
        }
    }
}
