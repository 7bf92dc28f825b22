//! Observables of discrete flow states.

pub mod export;
pub mod fields;
pub mod norms;
pub mod record;
pub mod spectrum;
pub mod thickness;

pub use export::{read_point_csv, read_vtk, write_point_csv, write_vtk, PointSample};
pub use fields::{divergence_sup, enstrophy, kinetic_energy, sample_points, VolumeSampler};
pub use norms::{error_norms, observed_order, ErrorNorms};
pub use record::{RunRecord, SeriesRow};
pub use spectrum::{energy_spectrum, Spectrum};
pub use thickness::{line_averaged_vorticity, vorticity_thickness};
