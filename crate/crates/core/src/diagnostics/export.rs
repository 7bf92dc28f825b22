//! Field exports: legacy VTK with per-cell samples, and CSV point samples.

use std::io::{BufRead, Write};

use crate::error::DiagnosticsError;
use crate::space::VelocityField;

use super::fields::sample_points;

const CENTROID: [f64; 2] = [1.0 / 3.0, 1.0 / 3.0];

/// Velocity and vorticity at the centroid of every element.
pub fn cell_samples(u: &VelocityField) -> Vec<([f64; 2], f64)> {
    let s = u.space();
    (0..s.num_elements())
        .map(|e| {
            let p = s.evaluate(u.coeffs(), e, CENTROID).expect("centroid is inside");
            (p.value, p.curl)
        })
        .collect()
}

fn extremes(cells: &[([f64; 2], f64)]) -> (f64, f64) {
    if cells.is_empty() {
        return (0.0, 0.0);
    }
    cells.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c.1), hi.max(c.1)))
}

/// Writes an unstructured-grid legacy VTK file. Every triangle gets its own
/// three points, so periodic identifications never fold the geometry. The
/// title line records the vorticity range and the time.
pub fn write_vtk<W: Write>(w: &mut W, u: &VelocityField, t: f64) -> std::io::Result<()> {
    let mesh = u.space().mesh();
    let cells = cell_samples(u);
    let (lo, hi) = extremes(&cells);
    let nt = mesh.num_triangles();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "hdivflow t={t} vorticity_min={lo} vorticity_max={hi}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", 3 * nt)?;
    for e in 0..nt {
        for p in mesh.triangle_points(e) {
            writeln!(w, "{} {} 0", p[0], p[1])?;
        }
    }
    writeln!(w, "CELLS {} {}", nt, 4 * nt)?;
    for e in 0..nt {
        writeln!(w, "3 {} {} {}", 3 * e, 3 * e + 1, 3 * e + 2)?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    writeln!(w, "CELL_DATA {nt}")?;
    writeln!(w, "VECTORS velocity double")?;
    for (v, _) in &cells {
        writeln!(w, "{} {} 0", v[0], v[1])?;
    }
    writeln!(w, "SCALARS vorticity double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for (_, c) in &cells {
        writeln!(w, "{c}")?;
    }
    Ok(())
}

/// Contents of a file written by [`write_vtk`].
#[derive(Debug, Clone, PartialEq)]
pub struct VtkSummary {
    pub t: f64,
    pub vorticity_min: f64,
    pub vorticity_max: f64,
    pub velocity: Vec<[f64; 2]>,
    pub vorticity: Vec<f64>,
}

pub fn read_vtk<R: BufRead>(r: R) -> Result<VtkSummary, DiagnosticsError> {
    let lines: Vec<String> = r.lines().collect::<Result<_, _>>()?;
    let err = |line: usize, message: &str| DiagnosticsError::Parse { line: line + 1, message: message.to_string() };
    let title = lines.get(1).ok_or_else(|| err(1, "missing title"))?;
    let mut meta = [None; 3];
    for tok in title.split_whitespace() {
        if let Some((k, v)) = tok.split_once('=') {
            let slot = match k {
                "t" => 0,
                "vorticity_min" => 1,
                "vorticity_max" => 2,
                _ => continue,
            };
            meta[slot] = Some(v.parse::<f64>().map_err(|_| err(1, "bad title value"))?);
        }
    }
    let [Some(t), Some(vorticity_min), Some(vorticity_max)] = meta else {
        return Err(err(1, "title lacks t / vorticity range"));
    };
    let find = |prefix: &str| lines.iter().position(|l| l.starts_with(prefix)).ok_or_else(|| err(lines.len(), prefix));
    let nt: usize = lines[find("CELL_DATA")?]
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| err(0, "bad CELL_DATA"))?;
    let nums = |start: usize, i: usize| -> Result<Vec<f64>, DiagnosticsError> {
        let l = lines.get(start + i).ok_or_else(|| err(start + i, "truncated"))?;
        l.split_whitespace().map(|s| s.parse().map_err(|_| err(start + i, "bad number"))).collect()
    };
    let vstart = find("VECTORS")? + 1;
    let mut velocity = Vec::with_capacity(nt);
    for i in 0..nt {
        let v = nums(vstart, i)?;
        velocity.push([v[0], v[1]]);
    }
    let sstart = find("LOOKUP_TABLE")? + 1;
    let mut vorticity = Vec::with_capacity(nt);
    for i in 0..nt {
        vorticity.push(*nums(sstart, i)?.first().ok_or_else(|| err(sstart + i, "empty row"))?);
    }
    Ok(VtkSummary { t, vorticity_min, vorticity_max, velocity, vorticity })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSample {
    pub x: [f64; 2],
    pub velocity: [f64; 2],
    pub vorticity: f64,
}

pub fn point_samples(u: &VelocityField, points: &[[f64; 2]]) -> Result<Vec<PointSample>, DiagnosticsError> {
    Ok(sample_points(u, points)?
        .into_iter()
        .zip(points)
        .map(|(p, x)| PointSample { x: *x, velocity: p.value, vorticity: p.curl })
        .collect())
}

/// CSV `x,y,u1,u2,vorticity` in shortest round-trip form.
pub fn write_point_csv<W: Write>(w: &mut W, samples: &[PointSample]) -> std::io::Result<()> {
    writeln!(w, "x,y,u1,u2,vorticity")?;
    for s in samples {
        writeln!(w, "{},{},{},{},{}", s.x[0], s.x[1], s.velocity[0], s.velocity[1], s.vorticity)?;
    }
    Ok(())
}

pub fn read_point_csv<R: BufRead>(r: R) -> Result<Vec<PointSample>, DiagnosticsError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "x,y,u1,u2,vorticity" {
                return Err(DiagnosticsError::Parse { line: 1, message: "expected header `x,y,u1,u2,vorticity`".into() });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| DiagnosticsError::Parse { line: i + 1, message: format!("malformed row {line:?}") })?;
        if v.len() != 5 {
            return Err(DiagnosticsError::Parse { line: i + 1, message: format!("expected 5 columns, got {}", v.len()) });
        }
        out.push(PointSample { x: [v[0], v[1]], velocity: [v[2], v[3]], vorticity: v[4] });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{structured_triangulation, Axis};
    use crate::space::{BoundarySpec, VelocitySpace};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn space() -> Arc<VelocitySpace> {
        let m = structured_triangulation(3).apply_periodic_identification(&[Axis::X1, Axis::X2]).unwrap();
        Arc::new(VelocitySpace::new(Arc::new(m), 2, BoundarySpec::periodic()).unwrap())
    }

    #[test]
    fn zero_state_writes_zero_arrays() {
        let z = VelocityField::zero(space());
        let mut buf = Vec::new();
        write_vtk(&mut buf, &z, 0.0).unwrap();
        let back = read_vtk(buf.as_slice()).unwrap();
        assert_eq!(back.velocity.len(), 18);
        assert!(back.velocity.iter().all(|v| *v == [0.0, 0.0]));
        assert!(back.vorticity.iter().all(|v| *v == 0.0));
        assert_eq!((back.vorticity_min, back.vorticity_max), (0.0, 0.0));
    }

    #[test]
    fn header_holds_vorticity_range() {
        let tp = 2.0 * PI;
        let u = VelocityField::interpolate_curl(space(), &|x| (tp * x[0]).sin() * (tp * x[1]).cos());
        let mut buf = Vec::new();
        write_vtk(&mut buf, &u, 0.5).unwrap();
        let back = read_vtk(buf.as_slice()).unwrap();
        let lo = back.vorticity.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = back.vorticity.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((back.vorticity_min, back.vorticity_max), (lo, hi));
        assert!(lo < 0.0 && hi > 0.0);
        assert_eq!(back.t, 0.5);
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let tp = 2.0 * PI;
        let u = VelocityField::interpolate_curl(space(), &|x| (tp * x[0]).sin() * (tp * x[1]).cos() / 7.0);
        let pts: Vec<[f64; 2]> = (0..40).map(|i| [(i as f64 * 0.137) % 1.0, (i as f64 * 0.291) % 1.0]).collect();
        let s = point_samples(&u, &pts).unwrap();
        let mut buf = Vec::new();
        write_point_csv(&mut buf, &s).unwrap();
        assert_eq!(read_point_csv(buf.as_slice()).unwrap(), s);
        assert!(read_point_csv("x,y\n".as_bytes()).is_err());
        assert!(read_point_csv("x,y,u1,u2,vorticity\n1,2,3\n".as_bytes()).is_err());
    }
}
