//! Time series of run observables.

use std::io::{BufRead, Write};

use crate::error::DiagnosticsError;

use super::spectrum::Spectrum;

pub const SERIES_HEADER: &str = "t,K,E,div_max,delta_ratio";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub kinetic_energy: f64,
    pub enstrophy: f64,
    pub div_max: f64,
    /// Vorticity thickness over its initial value, for mixing layers.
    pub delta_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRecord {
    pub case: String,
    pub rows: Vec<SeriesRow>,
    pub spectra: Vec<(f64, Spectrum)>,
    /// False when a step failed and the run was cut short.
    pub complete: bool,
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn new(case: impl Into<String>) -> Self {
        Self { case: case.into(), complete: true, ..Default::default() }
    }

    /// Appends a row; times must increase strictly and K, E must be non-negative.
    pub fn push(&mut self, row: SeriesRow) -> Result<(), DiagnosticsError> {
        if let Some(last) = self.rows.last() {
            if !(row.t > last.t) {
                return Err(DiagnosticsError::Record(format!("time {} does not follow {}", row.t, last.t)));
            }
        }
        if !(row.kinetic_energy >= 0.0 && row.enstrophy >= 0.0) {
            return Err(DiagnosticsError::Record(format!(
                "negative or NaN energy at t = {}: K = {}, E = {}",
                row.t, row.kinetic_energy, row.enstrophy
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn mark_failed(&mut self, reason: impl Into<String>) {
        self.complete = false;
        self.failure = Some(reason.into());
    }

    pub fn last(&self) -> Option<&SeriesRow> {
        self.rows.last()
    }

    /// Largest relative step-to-step increase of K; zero for a decaying series.
    pub fn max_energy_growth(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].kinetic_energy, w[1].kinetic_energy);
                if a > 0.0 {
                    (b - a) / a
                } else if b > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn max_divergence(&self) -> f64 {
        self.rows.iter().map(|r| r.div_max).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{SERIES_HEADER}")?;
        for r in &self.rows {
            write!(w, "{},{},{},{},", r.t, r.kinetic_energy, r.enstrophy, r.div_max)?;
            match r.delta_ratio {
                Some(d) => writeln!(w, "{d}")?,
                None => writeln!(w)?,
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }

    /// Reads rows written by [`RunRecord::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<SeriesRow>, DiagnosticsError> {
        let mut rows = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let bad = |message: String| DiagnosticsError::Parse { line: i + 1, message };
            if i == 0 {
                if line.trim() != SERIES_HEADER {
                    return Err(bad(format!("expected header `{SERIES_HEADER}`")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 5 {
                return Err(bad(format!("expected 5 columns, got {}", cols.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("invalid number {s:?}")));
            rows.push(SeriesRow {
                t: num(cols[0])?,
                kinetic_energy: num(cols[1])?,
                enstrophy: num(cols[2])?,
                div_max: num(cols[3])?,
                delta_ratio: if cols[4].is_empty() { None } else { Some(num(cols[4])?) },
            });
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, k: f64, d: Option<f64>) -> SeriesRow {
        SeriesRow { t, kinetic_energy: k, enstrophy: 2.0 * k, div_max: 1e-14, delta_ratio: d }
    }

    #[test]
    fn times_must_increase() {
        let mut r = RunRecord::new("lattice");
        r.push(row(0.0, 0.25, None)).unwrap();
        r.push(row(0.1, 0.24, None)).unwrap();
        assert!(r.push(row(0.1, 0.23, None)).is_err());
        assert!(r.push(row(0.2, -1.0, None)).is_err());
        assert!(r.push(row(0.2, f64::NAN, None)).is_err());
        assert_eq!(r.rows.len(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let mut r = RunRecord::new("kelvin_helmholtz");
        r.push(row(0.0, 1.0 / 3.0, Some(1.0))).unwrap();
        r.push(row(0.035, 0.3333, None)).unwrap();
        let text = r.to_csv();
        assert!(text.starts_with("t,K,E,div_max,delta_ratio\n"));
        assert_eq!(RunRecord::read_csv(text.as_bytes()).unwrap(), r.rows);
        assert!(RunRecord::read_csv("t,K\n".as_bytes()).is_err());
    }

    #[test]
    fn growth() {
        let mut r = RunRecord::new("x");
        for (i, k) in [1.0, 0.9, 0.95, 0.5].iter().enumerate() {
            r.push(row(i as f64, *k, None)).unwrap();
        }
        assert!((r.max_energy_growth() - 0.05 / 0.9).abs() < 1e-15);
        r.mark_failed("boom");
        assert!(!r.complete);
    }
}
