//! Radially binned kinetic energy spectra on a uniform sampling grid.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::DiagnosticsError;
use crate::space::VelocityField;

use super::fields::sample_points;

pub const DEFAULT_GRID: usize = 256;
/// Bins below this fraction of the total energy are treated as empty.
const SLOPE_ENERGY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: usize,
    /// `bins[i]` is the energy of the annulus kappa = i + 1.
    pub bins: Vec<f64>,
    /// Energy of the mean flow (kappa = 0).
    pub mean_flow: f64,
    /// 1/2 mean |u|^2 over the sampling grid.
    pub grid_energy: f64,
}

impl Spectrum {
    pub fn kappa_max(&self) -> usize {
        self.bins.len()
    }

    pub fn energy(&self, kappa: usize) -> f64 {
        if kappa == 0 {
            self.mean_flow
        } else {
            self.bins.get(kappa - 1).copied().unwrap_or(0.0)
        }
    }

    /// |sum of all bins - grid energy| / grid energy.
    pub fn parseval_defect(&self) -> f64 {
        let total: f64 = self.mean_flow + self.bins.iter().sum::<f64>();
        if self.grid_energy == 0.0 {
            total.abs()
        } else {
            (total - self.grid_energy).abs() / self.grid_energy
        }
    }

    /// Least-squares slope of log E against log kappa over the bins in
    /// [lo, hi] holding more than a roundoff share of the total energy.
    /// Needs at least two such bins.
    pub fn fit_slope(&self, lo: usize, hi: usize) -> Option<f64> {
        let floor = SLOPE_ENERGY_FLOOR * (self.mean_flow + self.bins.iter().sum::<f64>());
        let pts: Vec<(f64, f64)> = (lo.max(1)..=hi.min(self.kappa_max()))
            .filter(|&k| self.energy(k) > floor)
            .map(|k| ((k as f64).ln(), self.energy(k).ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Some(sxy / sxx)
    }

    /// CSV with header `kappa,E`, starting at kappa = 1.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kappa,E\n");
        for (i, e) in self.bins.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i + 1, e));
        }
        s
    }

    /// Reads bins written by [`Spectrum::to_csv`]; grid metadata is not stored.
    pub fn bins_from_csv(text: &str) -> Result<Vec<(usize, f64)>, DiagnosticsError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "kappa,E")) => {}
            _ => return Err(DiagnosticsError::Parse { line: 1, message: "expected header `kappa,E`".into() }),
        }
        lines
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                let err = || DiagnosticsError::Parse { line: i + 1, message: format!("malformed row {l:?}") };
                let (k, e) = l.split_once(',').ok_or_else(err)?;
                Ok((k.trim().parse().map_err(|_| err())?, e.trim().parse().map_err(|_| err())?))
            })
            .collect()
    }
}

fn fft2(data: &mut [Complex<f64>], n: usize) {
    let fft = FftPlanner::new().plan_fft_forward(n);
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = data[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
}

/// Spectrum of velocity samples `u1`, `u2` given row-major on an n x n grid
/// (row index along x2).
pub fn spectrum_from_samples(u1: &[f64], u2: &[f64], n: usize) -> Spectrum {
    assert!(n > 0 && u1.len() == n * n && u2.len() == n * n);
    let scale = 1.0 / (n * n) as f64;
    let mut hats = Vec::with_capacity(2);
    for u in [u1, u2] {
        let mut d: Vec<Complex<f64>> = u.iter().map(|&v| Complex::new(v * scale, 0.0)).collect();
        fft2(&mut d, n);
        hats.push(d);
    }
    let wave = |i: usize| -> f64 {
        let i = i as i64;
        let n = n as i64;
        (if i <= n / 2 { i } else { i - n }) as f64
    };
    let kmax = ((n as f64 / 2.0) * std::f64::consts::SQRT_2 + 0.5).floor() as usize;
    let mut bins = vec![0.0; kmax + 1];
    for i in 0..n {
        for j in 0..n {
            let kappa = (wave(i).hypot(wave(j)) + 0.5).floor() as usize;
            let p = i * n + j;
            bins[kappa] += 0.5 * (hats[0][p].norm_sqr() + hats[1][p].norm_sqr());
        }
    }
    let grid_energy = 0.5 * scale * u1.iter().zip(u2).map(|(a, b)| a * a + b * b).sum::<f64>();
    let mean_flow = bins.remove(0);
    Spectrum { grid: n, bins, mean_flow, grid_energy }
}

/// Samples `u` at the n x n cell centres and bins its spectrum.
pub fn energy_spectrum(u: &VelocityField, grid: usize) -> Result<Spectrum, DiagnosticsError> {
    if !u.space().is_fully_periodic() {
        return Err(DiagnosticsError::NotPeriodic);
    }
    let h = 1.0 / grid as f64;
    let points: Vec<[f64; 2]> =
        (0..grid).flat_map(|i| (0..grid).map(move |j| [(j as f64 + 0.5) * h, (i as f64 + 0.5) * h])).collect();
    let values = sample_points(u, &points)?;
    let u1: Vec<f64> = values.iter().map(|v| v.value[0]).collect();
    let u2: Vec<f64> = values.iter().map(|v| v.value[1]).collect();
    Ok(spectrum_from_samples(&u1, &u2, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid_samples(n: usize, f: impl Fn(f64, f64) -> [f64; 2]) -> (Vec<f64>, Vec<f64>) {
        let h = 1.0 / n as f64;
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = f((j as f64 + 0.5) * h, (i as f64 + 0.5) * h);
                a.push(v[0]);
                b.push(v[1]);
            }
        }
        (a, b)
    }

    #[test]
    fn single_mode_lands_in_first_bin() {
        let (a, b) = grid_samples(32, |_, y| [(2.0 * PI * y).sin(), 0.0]);
        let s = spectrum_from_samples(&a, &b, 32);
        assert!((s.energy(1) - 0.25).abs() < 1e-14);
        assert!(s.bins[1..].iter().all(|e| e.abs() < 1e-28));
        assert!(s.fit_slope(1, 1).is_none());
        assert!(s.fit_slope(1, 16).is_none());
    }

    #[test]
    fn lattice_modes_round_to_first_bin() {
        let tp = 2.0 * PI;
        let (a, b) = grid_samples(64, |x, y| [(tp * x).sin() * (tp * y).sin(), (tp * x).cos() * (tp * y).cos()]);
        let s = spectrum_from_samples(&a, &b, 64);
        assert!((s.energy(1) - 0.25).abs() < 1e-13);
        assert!(s.parseval_defect() < 1e-12);
    }

    #[test]
    fn power_law_slope_recovered() {
        let s =
            Spectrum { grid: 8, bins: (1..=10).map(|k| 3.0 * (k as f64).powf(-3.0)).collect(), mean_flow: 0.0, grid_energy: 1.0 };
        assert!((s.fit_slope(2, 8).unwrap() + 3.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let (a, b) = grid_samples(8, |x, y| [x.sin(), y * y]);
        let s = spectrum_from_samples(&a, &b, 8);
        let back = Spectrum::bins_from_csv(&s.to_csv()).unwrap();
        assert_eq!(back.len(), s.bins.len());
        for (k, e) in back {
            assert_eq!(e, s.energy(k));
        }
        assert!(Spectrum::bins_from_csv("k,E\n").is_err());
    }

    proptest! {
        #[test]
        fn parseval_holds(vals in prop::collection::vec(-1.0f64..1.0, 2 * 16 * 16)) {
            let (a, b) = vals.split_at(256);
            let s = spectrum_from_samples(a, b, 16);
            prop_assert!(s.parseval_defect() < 1e-10);
            prop_assert!(s.bins.iter().all(|e| *e >= 0.0));
        }
    }
}
