//! Flat `key = value` case configuration.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::assembly::{default_sigma, DEFAULT_GAMMA};
use crate::error::ConfigError;

/// Largest supported polynomial degree of the velocity space.
pub const MAX_DEGREE: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    Lattice,
    KelvinHelmholtz,
    DecayingTurbulence,
    ManufacturedStokes,
    ManufacturedOseen,
}

impl CaseKind {
    pub const ALL: [CaseKind; 5] = [
        CaseKind::Lattice,
        CaseKind::KelvinHelmholtz,
        CaseKind::DecayingTurbulence,
        CaseKind::ManufacturedStokes,
        CaseKind::ManufacturedOseen,
    ];

    pub fn id(self) -> &'static str {
        match self {
            CaseKind::Lattice => "lattice",
            CaseKind::KelvinHelmholtz => "kelvin_helmholtz",
            CaseKind::DecayingTurbulence => "decaying_turbulence",
            CaseKind::ManufacturedStokes => "manufactured_stokes",
            CaseKind::ManufacturedOseen => "manufactured_oseen",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.id() == s)
    }

    /// Cases whose natural driver is a convergence study rather than one run.
    pub fn is_manufactured(self) -> bool {
        matches!(self, CaseKind::ManufacturedStokes | CaseKind::ManufacturedOseen)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeshSpec {
    /// n x n squares of (0,1)^2, each cut into two triangles.
    Structured(usize),
    /// An `hdivmesh 1` file.
    File(PathBuf),
}

impl MeshSpec {
    pub fn parse(s: &str) -> Option<Self> {
        let n = s.strip_prefix("structured:").unwrap_or(s);
        match n.parse::<usize>() {
            Ok(n) if n > 0 => Some(MeshSpec::Structured(n)),
            Ok(_) => None,
            Err(_) if s.starts_with("structured:") || s.is_empty() => None,
            Err(_) => Some(MeshSpec::File(PathBuf::from(s))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            MeshSpec::Structured(n) => format!("structured:{n}"),
            MeshSpec::File(p) => p.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Stokes,
    Oseen,
    NavierStokes,
}

impl ModelKind {
    fn id(self) -> &'static str {
        match self {
            ModelKind::Stokes => "stokes",
            ModelKind::Oseen => "oseen",
            ModelKind::NavierStokes => "navier_stokes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialMode {
    Interpolate,
    StokesProjection,
}

/// Error measure gated by a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderNorm {
    L2,
    Energy,
    Combined,
}

impl OrderNorm {
    fn id(self) -> &'static str {
        match self {
            OrderNorm::L2 => "l2",
            OrderNorm::Energy => "energy",
            OrderNorm::Combined => "combined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseConfig {
    pub case: CaseKind,
    pub nu: f64,
    pub k: usize,
    pub mesh: MeshSpec,
    pub dt: f64,
    pub t_end: f64,
    pub gamma: f64,
    /// `None` selects the default penalty for the degree.
    pub sigma: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub spectrum_times: Vec<f64>,
    pub model: ModelKind,
    pub initial: InitialMode,
    /// Steps between recorded rows; the initial and final states are always recorded.
    pub output_every: usize,
    pub n_vortices: usize,
    /// Mesh resolutions of a convergence study; `dt` applies to the first.
    pub meshes: Vec<usize>,
    pub expected_order: f64,
    pub order_tolerance: f64,
    pub order_norm: OrderNorm,
    pub spectrum_grid: usize,
    pub kappa_range: (usize, usize),
    /// Times at which VTK and checkpoint snapshots are written.
    pub snapshot_times: Vec<f64>,
    pub thickness_lines: usize,
    pub newton_tolerance: f64,
}

pub const KEYS: [&str; 25] = [
    "case",
    "nu",
    "k",
    "mesh",
    "dt",
    "T",
    "gamma",
    "sigma",
    "out_dir",
    "spectrum_times",
    "model",
    "initial",
    "output_every",
    "n_vortices",
    "meshes",
    "expected_order",
    "order_tolerance",
    "order_norm",
    "spectrum_grid",
    "kappa_range",
    "snapshot_times",
    "thickness_lines",
    "newton_tolerance",
    "t_end",
    "degree",
];

/// Mixing-layer thickness and time unit.
pub const KH_DELTA0: f64 = 1.0 / 28.0;

impl CaseConfig {
    /// Desk-scale defaults for a case.
    pub fn defaults(case: CaseKind) -> Self {
        let base = CaseConfig {
            case,
            nu: 4e-6,
            k: 2,
            mesh: MeshSpec::Structured(16),
            dt: 0.01,
            t_end: 0.2,
            gamma: DEFAULT_GAMMA,
            sigma: None,
            out_dir: None,
            spectrum_times: Vec::new(),
            model: ModelKind::NavierStokes,
            initial: InitialMode::Interpolate,
            output_every: 1,
            n_vortices: 8,
            meshes: Vec::new(),
            expected_order: 2.0,
            order_tolerance: 0.3,
            order_norm: OrderNorm::Combined,
            spectrum_grid: crate::diagnostics::spectrum::DEFAULT_GRID,
            kappa_range: (4, 16),
            snapshot_times: Vec::new(),
            thickness_lines: crate::diagnostics::thickness::DEFAULT_LINES,
            newton_tolerance: crate::solver::DEFAULT_NEWTON_TOLERANCE,
        };
        match case {
            CaseKind::Lattice => base,
            CaseKind::KelvinHelmholtz => CaseConfig {
                nu: 1.0 / 280_000.0,
                k: 3,
                // Odd n puts no mesh line on the shear layer's centre line;
                // the sampled initial thickness is within 1% of nominal here.
                mesh: MeshSpec::Structured(35),
                dt: KH_DELTA0 / 2.0,
                t_end: 200.0 * KH_DELTA0,
                output_every: 2,
                ..base
            },
            CaseKind::DecayingTurbulence => CaseConfig {
                nu: 5e-5,
                mesh: MeshSpec::Structured(32),
                dt: 0.02,
                t_end: 2.0,
                spectrum_times: vec![2.0],
                output_every: 5,
                // From the injection wavenumber (n_vortices) to two cells per wavelength.
                kappa_range: (8, 16),
                ..base
            },
            CaseKind::ManufacturedStokes => CaseConfig {
                nu: 1.0,
                model: ModelKind::Stokes,
                t_end: 0.0,
                meshes: vec![4, 8, 16],
                expected_order: 3.0,
                order_tolerance: 0.2,
                order_norm: OrderNorm::L2,
                ..base
            },
            CaseKind::ManufacturedOseen => CaseConfig { model: ModelKind::Oseen, dt: 0.05, meshes: vec![8, 16, 32], ..base },
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or_else(|| default_sigma(self.k))
    }

    /// Parses a config file. `case` may appear on any line; the remaining
    /// keys are applied in order on top of that case's defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    /// Builds a config from ordered key/value pairs, e.g. `--set` overrides.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, ConfigError> {
        let case = pairs.iter().rev().find(|(k, _)| k == "case").ok_or_else(|| ConfigError::Missing("case".into()))?;
        let kind = CaseKind::parse(&case.1).ok_or_else(|| ConfigError::Value {
            key: "case".into(),
            value: case.1.clone(),
            reason: format!("expected one of {}", CaseKind::ALL.iter().map(|c| c.id()).collect::<Vec<_>>().join(", ")),
        })?;
        let mut cfg = Self::defaults(kind);
        for (k, v) in pairs {
            if k != "case" {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` assignment. `case` cannot be changed here
    /// because it selects the defaults.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad =
            |reason: &str| ConfigError::Value { key: key.to_string(), value: value.to_string(), reason: reason.to_string() };
        let real = || value.parse::<f64>().map_err(|_| bad("expected a number"));
        let count = || value.parse::<usize>().map_err(|_| bad("expected a non-negative integer"));
        let reals = || -> Result<Vec<f64>, ConfigError> {
            split_list(value).map(|s| s.parse::<f64>().map_err(|_| bad("expected a comma-separated list of numbers"))).collect()
        };
        match key {
            "case" => {
                if CaseKind::parse(value) != Some(self.case) {
                    return Err(bad("the case is fixed once the config is created"));
                }
            }
            "nu" => self.nu = real()?,
            "k" | "degree" => self.k = count()?,
            "mesh" => self.mesh = MeshSpec::parse(value).ok_or_else(|| bad("expected `structured:N`, N, or a mesh file path"))?,
            "dt" => self.dt = real()?,
            "T" | "t_end" => self.t_end = real()?,
            "gamma" => self.gamma = real()?,
            "sigma" => {
                self.sigma = match value {
                    "default" | "" => None,
                    _ => Some(real()?),
                }
            }
            "out_dir" => self.out_dir = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            "spectrum_times" => self.spectrum_times = reals()?,
            "snapshot_times" => self.snapshot_times = reals()?,
            "model" => {
                self.model = match value {
                    "stokes" => ModelKind::Stokes,
                    "oseen" => ModelKind::Oseen,
                    "navier_stokes" => ModelKind::NavierStokes,
                    _ => return Err(bad("expected stokes, oseen or navier_stokes")),
                }
            }
            "initial" => {
                self.initial = match value {
                    "interpolate" => InitialMode::Interpolate,
                    "stokes_projection" => InitialMode::StokesProjection,
                    _ => return Err(bad("expected interpolate or stokes_projection")),
                }
            }
            "output_every" => self.output_every = count()?,
            "n_vortices" => self.n_vortices = count()?,
            "meshes" => {
                self.meshes = split_list(value)
                    .map(|s| s.parse::<usize>().map_err(|_| bad("expected a comma-separated list of resolutions")))
                    .collect::<Result<_, _>>()?
            }
            "expected_order" => self.expected_order = real()?,
            "order_tolerance" => self.order_tolerance = real()?,
            "order_norm" => {
                self.order_norm = match value {
                    "l2" => OrderNorm::L2,
                    "energy" => OrderNorm::Energy,
                    "combined" => OrderNorm::Combined,
                    _ => return Err(bad("expected l2, energy or combined")),
                }
            }
            "spectrum_grid" => self.spectrum_grid = count()?,
            "kappa_range" => {
                let v: Vec<usize> = split_list(value)
                    .map(|s| s.parse::<usize>().map_err(|_| bad("expected `lo,hi`")))
                    .collect::<Result<_, _>>()?;
                match v[..] {
                    [lo, hi] => self.kappa_range = (lo, hi),
                    _ => return Err(bad("expected `lo,hi`")),
                }
            }
            "thickness_lines" => self.thickness_lines = count()?,
            "newton_tolerance" => self.newton_tolerance = real()?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return invalid(format!("nu must be finite and non-negative, got {}", self.nu));
        }
        if self.k == 0 || self.k > MAX_DEGREE {
            return invalid(format!("k must lie in 1..={MAX_DEGREE}, got {}", self.k));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return invalid(format!("T must be non-negative, got {}", self.t_end));
        }
        if !(self.gamma >= 0.0) {
            return invalid(format!("gamma must be non-negative, got {}", self.gamma));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return invalid(format!("sigma must be positive, got {s}"));
            }
        }
        if self.output_every == 0 {
            return invalid("output_every must be at least 1".into());
        }
        if self.case == CaseKind::DecayingTurbulence && self.n_vortices < 2 {
            return invalid(format!("n_vortices must be at least 2, got {}", self.n_vortices));
        }
        if self.meshes.contains(&0) {
            return invalid("mesh resolutions must be positive".into());
        }
        if self.spectrum_grid < 2 {
            return invalid("spectrum_grid must be at least 2".into());
        }
        if self.kappa_range.0 == 0 || self.kappa_range.0 > self.kappa_range.1 {
            return invalid(format!("kappa_range must satisfy 1 <= lo <= hi, got {:?}", self.kappa_range));
        }
        if self.thickness_lines == 0 {
            return invalid("thickness_lines must be positive".into());
        }
        if !(self.newton_tolerance > 0.0) {
            return invalid("newton_tolerance must be positive".into());
        }
        for &t in self.spectrum_times.iter().chain(&self.snapshot_times) {
            if !(t >= 0.0) {
                return invalid(format!("output times must be non-negative, got {t}"));
            }
        }
        if self.case == CaseKind::ManufacturedStokes && self.model != ModelKind::Stokes {
            return invalid("manufactured_stokes only supports model = stokes".into());
        }
        Ok(())
    }

    /// Serialises every key; parsing the result gives back an equal config.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("case", self.case.id().into());
        kv("nu", self.nu.to_string());
        kv("k", self.k.to_string());
        kv("mesh", self.mesh.label());
        kv("dt", self.dt.to_string());
        kv("T", self.t_end.to_string());
        kv("gamma", self.gamma.to_string());
        kv("sigma", self.sigma.map_or("default".into(), |x| x.to_string()));
        kv("out_dir", self.out_dir.as_ref().map_or(String::new(), |p| p.display().to_string()));
        kv("spectrum_times", list(&self.spectrum_times));
        kv("model", self.model.id().into());
        kv(
            "initial",
            match self.initial {
                InitialMode::Interpolate => "interpolate",
                InitialMode::StokesProjection => "stokes_projection",
            }
            .into(),
        );
        kv("output_every", self.output_every.to_string());
        kv("n_vortices", self.n_vortices.to_string());
        kv("meshes", self.meshes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","));
        kv("expected_order", self.expected_order.to_string());
        kv("order_tolerance", self.order_tolerance.to_string());
        kv("order_norm", self.order_norm.id().into());
        kv("spectrum_grid", self.spectrum_grid.to_string());
        kv("kappa_range", format!("{},{}", self.kappa_range.0, self.kappa_range.1));
        kv("snapshot_times", list(&self.snapshot_times));
        kv("thickness_lines", self.thickness_lines.to_string());
        kv("newton_tolerance", self.newton_tolerance.to_string());
        s
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Splits config text into ordered `key = value` pairs; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}
