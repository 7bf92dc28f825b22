use thiserror::Error;

/// Errors produced by mesh construction and parsing.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: triangle {triangle}: {message}")]
    Validation { line: usize, triangle: usize, message: String },
    #[error("unmatched periodic boundary facet with midpoint ({x:.6}, {y:.6})")]
    Periodic { x: f64, y: f64 },
    #[error("boundary facet with midpoint ({x:.6}, {y:.6}) does not lie on a wall of the unit square")]
    OffWall { x: f64, y: f64 },
    #[error("mesh has no triangles")]
    Empty,
    #[error("facet shared by more than two triangles: vertices {0} and {1}")]
    NonManifold(usize, usize),
}

/// Errors from the reference element and quadrature tables.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElementError {
    #[error("quadrature degree {0} outside supported range 0..=20")]
    QuadratureDegree(usize),
    #[error("Raviart-Thomas degree {0} outside supported range 1..=4")]
    UnsupportedDegree(usize),
    #[error("degenerate or inverted element: det J = {0:e}")]
    Degenerate(f64),
    #[error("point ({0}, {1}) lies outside the reference triangle")]
    OutsideElement(f64, f64),
    #[error("singular moment matrix while building the basis")]
    SingularBasis,
}

/// Errors from building function spaces and fields.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error("boundary facet {facet} lies on wall {wall:?} which is declared periodic but the mesh was not identified")]
    UnidentifiedPeriodicWall { facet: usize, wall: crate::mesh::Wall },
    #[error("element index {0} out of range")]
    ElementIndex(usize),
    #[error("coefficient vector has length {got}, space has {expected} dofs")]
    Length { got: usize, expected: usize },
}

/// Errors from assembly of discrete forms.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("interior penalty parameter must be positive, got {0}")]
    Penalty(f64),
    #[error("negative viscosity {0}")]
    Viscosity(f64),
    #[error("negative upwind parameter {0}")]
    Upwind(f64),
}

/// Errors from linear and nonlinear solves.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("factorisation of {rows}x{rows} system failed: {message}")]
    Factorisation { rows: usize, message: String },
    #[error("linear residual {residual:e} exceeds tolerance {tolerance:e} (system size {rows}, rhs norm {rhs_norm:e})")]
    Residual { residual: f64, tolerance: f64, rows: usize, rhs_norm: f64 },
    #[error("Newton iteration did not converge in {iterations} iterations (residual history {history:?})")]
    Newton { iterations: usize, history: Vec<f64> },
    #[error("field is not divergence-free: |pi_0 div w| = {0:e}")]
    NotSolenoidal(f64),
    #[error("divergence invariant violated after step: div_max = {div_max:e}, velocity scale {scale:e}")]
    Divergence { div_max: f64, scale: f64 },
    #[error("invalid time stepping configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// Errors from reading or writing solver checkpoints.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors from diagnostics and exports.
#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("energy spectrum requires a fully periodic space")]
    NotPeriodic,
    #[error("all line-averaged vorticities vanish; vorticity thickness undefined")]
    ZeroVorticity,
    #[error("point ({0}, {1}) is not covered by the mesh")]
    PointNotFound(f64, f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid record row: {0}")]
    Record(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors from case configuration.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for key {key:?}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("missing required key {0:?}")]
    Missing(String),
    #[error("{0}")]
    Invalid(String),
}

/// Top-level error for drivers that touch every layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
