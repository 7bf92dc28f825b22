//! ASCII checkpoints of flow states.
//!
//! ```text
//! hdivflow-checkpoint 1
//! case decaying_turbulence
//! mesh structured:16
//! degree 2
//! sigma 36
//! gamma 1.5
//! nu 0.000004
//! snapshot <t> <velocity dofs> <pressure dofs>
//! <one coefficient per line, velocity then pressure>
//! ```
//!
//! Values are written in shortest round-trip form, so reading a checkpoint
//! back reproduces every coefficient bitwise.

use std::io::{BufRead, Write};

use crate::error::CheckpointError;

const MAGIC: &str = "hdivflow-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointHeader {
    /// Case id; it fixes the boundary conditions.
    pub case: String,
    pub mesh: String,
    pub degree: usize,
    pub sigma: f64,
    pub gamma: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
}

pub fn write_header<W: Write>(w: &mut W, h: &CheckpointHeader) -> std::io::Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "case {}", h.case)?;
    writeln!(w, "mesh {}", h.mesh)?;
    writeln!(w, "degree {}", h.degree)?;
    writeln!(w, "sigma {}", h.sigma)?;
    writeln!(w, "gamma {}", h.gamma)?;
    writeln!(w, "nu {}", h.nu)
}

pub fn write_snapshot<W: Write>(w: &mut W, s: &Snapshot) -> std::io::Result<()> {
    writeln!(w, "snapshot {} {} {}", s.t, s.velocity.len(), s.pressure.len())?;
    for v in s.velocity.iter().chain(&s.pressure) {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn write_checkpoint<W: Write>(w: &mut W, h: &CheckpointHeader, snapshots: &[Snapshot]) -> std::io::Result<()> {
    write_header(w, h)?;
    for s in snapshots {
        write_snapshot(w, s)?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<Option<String>, CheckpointError> {
        self.line += 1;
        Ok(self.inner.next().transpose()?)
    }

    fn err(&self, message: impl Into<String>) -> CheckpointError {
        CheckpointError::Parse { line: self.line, message: message.into() }
    }

    fn field(&mut self, key: &str) -> Result<String, CheckpointError> {
        let l = self.next()?.ok_or_else(|| self.err(format!("missing `{key}`")))?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim().to_string()),
            _ => Err(self.err(format!("expected `{key} <value>`, got {l:?}"))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T, CheckpointError> {
        s.parse().map_err(|_| self.err(format!("invalid {what} {s:?}")))
    }
}

pub fn read_checkpoint<R: BufRead>(r: R) -> Result<(CheckpointHeader, Vec<Snapshot>), CheckpointError> {
    let mut lines = Lines { inner: r.lines(), line: 0 };
    match lines.next()? {
        Some(l) if l.trim() == MAGIC => {}
        other => return Err(lines.err(format!("expected `{MAGIC}`, got {other:?}"))),
    }
    let case = lines.field("case")?;
    let mesh = lines.field("mesh")?;
    let degree = lines.field("degree")?;
    let degree = lines.parse(&degree, "degree")?;
    let mut num = |key: &str| -> Result<f64, CheckpointError> {
        let v = lines.field(key)?;
        lines.parse(&v, key)
    };
    let (sigma, gamma, nu) = (num("sigma")?, num("gamma")?, num("nu")?);
    let header = CheckpointHeader { case, mesh, degree, sigma, gamma, nu };
    let mut snapshots = Vec::new();
    while let Some(l) = lines.next()? {
        if l.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "snapshot" {
            return Err(lines.err(format!("expected `snapshot <t> <nu> <np>`, got {l:?}")));
        }
        let t: f64 = lines.parse(parts[1], "time")?;
        let nv: usize = lines.parse(parts[2], "velocity count")?;
        let np: usize = lines.parse(parts[3], "pressure count")?;
        let mut values = Vec::with_capacity(nv + np);
        for _ in 0..nv + np {
            let l = lines.next()?.ok_or_else(|| lines.err("truncated snapshot"))?;
            values.push(lines.parse(l.trim(), "coefficient")?);
        }
        let pressure = values.split_off(nv);
        snapshots.push(Snapshot { t, velocity: values, pressure });
    }
    Ok((header, snapshots))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> CheckpointHeader {
        CheckpointHeader { case: "lattice".into(), mesh: "structured:4".into(), degree: 2, sigma: 36.0, gamma: 1.5, nu: 4e-6 }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let snaps = vec![
            Snapshot { t: 0.1, velocity: vec![1.0 / 3.0, -2e-300, 0.0], pressure: vec![std::f64::consts::PI] },
            Snapshot { t: 0.2, velocity: vec![], pressure: vec![1e300] },
        ];
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &header(), &snaps).unwrap();
        let (h, s) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(h, header());
        assert_eq!(s, snaps);
    }

    #[test]
    fn truncated_input_reports_line() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &header(), &[Snapshot { t: 0.0, velocity: vec![1.0, 2.0], pressure: vec![] }]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(9).map(|l| format!("{l}\n")).collect();
        match read_checkpoint(cut.as_bytes()) {
            Err(CheckpointError::Parse { line, .. }) => assert_eq!(line, 10),
            other => panic!("{other:?}"),
        }
        assert!(read_checkpoint("garbage\n".as_bytes()).is_err());
    }
}
