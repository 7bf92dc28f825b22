//! The benchmark flows, their configuration, and the drivers that run them.

pub mod cases;
pub mod config;
pub mod convergence;
pub mod run;

pub use cases::{ExactSolution, StreamFunction};
pub use config::{parse_pairs, CaseConfig, CaseKind, InitialMode, MeshSpec, ModelKind, OrderNorm};
pub use convergence::{convergence_study, ConvergenceRow, ConvergenceTable, OrderCheck};
pub use run::{restore, run_from, run_transient, snapshot, CaseSetup, RunOutput};
