//! Vorticity thickness of a horizontal mixing layer.

use crate::error::DiagnosticsError;
use crate::space::VelocityField;

use super::fields::sample_points;

pub const DEFAULT_LINES: usize = 64;
pub const DEFAULT_SAMPLES: usize = 1024;

/// Heights x2 = l / n_lines, l = 0..n_lines, and the x1-average of the
/// broken vorticity along each, by the periodic trapezoidal rule.
pub fn line_averaged_vorticity(u: &VelocityField, n_lines: usize, n_samples: usize) -> Result<Vec<(f64, f64)>, DiagnosticsError> {
    let mut out = Vec::with_capacity(n_lines);
    for l in 0..n_lines {
        let y = l as f64 / n_lines as f64;
        let pts: Vec<[f64; 2]> = (0..n_samples).map(|i| [i as f64 / n_samples as f64, y]).collect();
        let avg = sample_points(u, &pts)?.iter().map(|p| p.curl).sum::<f64>() / n_samples as f64;
        out.push((y, avg));
    }
    Ok(out)
}

/// delta = 2 u_inf / max over lines of |<omega>|.
pub fn vorticity_thickness(u: &VelocityField, u_inf: f64, n_lines: usize, n_samples: usize) -> Result<f64, DiagnosticsError> {
    let peak = line_averaged_vorticity(u, n_lines, n_samples)?.iter().fold(0.0f64, |m, (_, w)| m.max(w.abs()));
    if peak == 0.0 {
        return Err(DiagnosticsError::ZeroVorticity);
    }
    Ok(2.0 * u_inf / peak)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{structured_triangulation, Axis};
    use crate::space::{BoundarySpec, VelocitySpace};
    use std::sync::Arc;

    fn channel(n: usize, k: usize) -> Arc<VelocitySpace> {
        let m = structured_triangulation(n).apply_periodic_identification(&[Axis::X1]).unwrap();
        Arc::new(VelocitySpace::new(Arc::new(m), k, BoundarySpec::channel()).unwrap())
    }

    #[test]
    fn linear_shear_has_exact_thickness() {
        // u = (2 x2 - 1, 0) has vorticity -2 everywhere and is reproduced exactly.
        let s = channel(4, 1);
        let u = VelocityField::interpolate_curl(s, &|x| (x[1] - 0.5) * (x[1] - 0.5));
        let d = vorticity_thickness(&u, 1.0, 8, 64).unwrap();
        assert!((d - 1.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn constant_shift_of_normal_velocity_is_invisible() {
        // Fully periodic, so the shift is reproduced on every element.
        let m = structured_triangulation(4).apply_periodic_identification(&[Axis::X1, Axis::X2]).unwrap();
        let s = Arc::new(VelocitySpace::new(Arc::new(m), 2, BoundarySpec::periodic()).unwrap());
        let tp = 2.0 * std::f64::consts::PI;
        let u = VelocityField::interpolate_curl(s.clone(), &|x| (tp * x[1]).sin() + 0.1 * (tp * x[0]).cos());
        let shift = VelocityField::interpolate(s.clone(), &|_| [0.0, 0.3]);
        let sum: Vec<f64> = u.coeffs().iter().zip(shift.coeffs()).map(|(a, b)| a + b).collect();
        let v = VelocityField::new(s, sum).unwrap();
        let a = line_averaged_vorticity(&u, 16, 128).unwrap();
        let b = line_averaged_vorticity(&v, 16, 128).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p.1 - q.1).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_field_flagged() {
        let s = channel(2, 1);
        let z = VelocityField::zero(s);
        assert!(matches!(vorticity_thickness(&z, 1.0, 4, 8), Err(DiagnosticsError::ZeroVorticity)));
    }
}
