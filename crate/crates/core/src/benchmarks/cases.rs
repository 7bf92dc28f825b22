//! Analytic data of the benchmark flows.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::reference::geometry::Mat2;

use super::config::KH_DELTA0;

pub type SpaceTimeVector = Arc<dyn Fn(f64, [f64; 2]) -> [f64; 2] + Send + Sync>;
pub type SpaceTimeScalar = Arc<dyn Fn(f64, [f64; 2]) -> f64 + Send + Sync>;
pub type SpaceTimeTensor = Arc<dyn Fn(f64, [f64; 2]) -> Mat2 + Send + Sync>;

/// A solution of the momentum and continuity equations with its forcing.
/// `gradient[a][b]` is d u_a / d x_b.
#[derive(Clone)]
pub struct ExactSolution {
    pub velocity: SpaceTimeVector,
    pub pressure: SpaceTimeScalar,
    pub gradient: SpaceTimeTensor,
    pub forcing: SpaceTimeVector,
}

/// Stream function with the derivatives needed for velocities and their
/// gradients.
pub trait StreamFunction: Send + Sync {
    fn value(&self, x: [f64; 2]) -> f64;
    /// (d1 psi, d2 psi)
    fn gradient(&self, x: [f64; 2]) -> [f64; 2];
    /// (d11, d12, d22)
    fn hessian(&self, x: [f64; 2]) -> [f64; 3];

    /// u = (d2 psi, -d1 psi)
    fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        let g = self.gradient(x);
        [g[1], -g[0]]
    }

    fn velocity_gradient(&self, x: [f64; 2]) -> Mat2 {
        let [h11, h12, h22] = self.hessian(x);
        [[h12, h22], [-h11, -h12]]
    }

    /// d1 u2 - d2 u1 = -laplace psi
    fn vorticity(&self, x: [f64; 2]) -> f64 {
        let [h11, _, h22] = self.hessian(x);
        -(h11 + h22)
    }
}

/// psi = -sin(2 pi x1) cos(2 pi x2) / (2 pi), whose velocity is the lattice
/// field (sin sin, cos cos).
pub struct LatticeStream;

impl StreamFunction for LatticeStream {
    fn value(&self, x: [f64; 2]) -> f64 {
        let tp = 2.0 * PI;
        -(tp * x[0]).sin() * (tp * x[1]).cos() / tp
    }

    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let tp = 2.0 * PI;
        let (s1, c1) = (tp * x[0]).sin_cos();
        let (s2, c2) = (tp * x[1]).sin_cos();
        [-c1 * c2, s1 * s2]
    }

    fn hessian(&self, x: [f64; 2]) -> [f64; 3] {
        let tp = 2.0 * PI;
        let (s1, c1) = (tp * x[0]).sin_cos();
        let (s2, c2) = (tp * x[1]).sin_cos();
        [tp * s1 * c2, tp * c1 * s2, tp * s1 * c2]
    }
}

/// Lattice flow u = u0 exp(-8 pi^2 nu t), p = (cos 4 pi x1 - cos 4 pi x2) / 4 exp(-16 pi^2 nu t).
/// It solves the unforced Navier-Stokes equations and, with beta = u, the
/// Oseen equations.
pub fn lattice_solution(nu: f64) -> ExactSolution {
    let decay = move |t: f64| (-8.0 * PI * PI * nu * t).exp();
    ExactSolution {
        velocity: Arc::new(move |t, x| {
            let u = LatticeStream.velocity(x);
            let d = decay(t);
            [u[0] * d, u[1] * d]
        }),
        pressure: Arc::new(move |t, x| {
            let fp = 4.0 * PI;
            0.25 * ((fp * x[0]).cos() - (fp * x[1]).cos()) * decay(t) * decay(t)
        }),
        gradient: Arc::new(move |t, x| {
            let g = LatticeStream.velocity_gradient(x);
            let d = decay(t);
            [[g[0][0] * d, g[0][1] * d], [g[1][0] * d, g[1][1] * d]]
        }),
        forcing: Arc::new(|_, _| [0.0, 0.0]),
    }
}

/// Bubble s^2 (1-s)^2 and its first three derivatives.
fn bubble(s: f64) -> [f64; 4] {
    [s * s * (1.0 - s) * (1.0 - s), 2.0 * s - 6.0 * s * s + 4.0 * s * s * s, 2.0 - 12.0 * s + 12.0 * s * s, -12.0 + 24.0 * s]
}

/// Stationary Stokes flow on the unit square with no-slip walls:
/// psi = g(x1) g(x2) with g the bubble above, p = sin(pi x1) cos(pi x2), and
/// f = -nu laplace u + grad p.
pub fn manufactured_stokes_solution(nu: f64) -> ExactSolution {
    ExactSolution {
        velocity: Arc::new(|_, x| {
            let (a, b) = (bubble(x[0]), bubble(x[1]));
            [a[0] * b[1], -a[1] * b[0]]
        }),
        pressure: Arc::new(|_, x| (PI * x[0]).sin() * (PI * x[1]).cos()),
        gradient: Arc::new(|_, x| {
            let (a, b) = (bubble(x[0]), bubble(x[1]));
            [[a[1] * b[1], a[0] * b[2]], [-a[2] * b[0], -a[1] * b[1]]]
        }),
        forcing: Arc::new(move |_, x| {
            let (a, b) = (bubble(x[0]), bubble(x[1]));
            let lap1 = a[2] * b[1] + a[0] * b[3];
            let lap2 = -(a[3] * b[0] + a[1] * b[2]);
            let (s1, c1) = (PI * x[0]).sin_cos();
            let (s2, c2) = (PI * x[1]).sin_cos();
            [-nu * lap1 + PI * c1 * c2, -nu * lap2 - PI * s1 * s2]
        }),
    }
}

/// ln cosh z without overflow.
fn ln_cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Mixing layer: background shear u_inf tanh((2 x2 - 1) / delta0) plus a
/// small perturbation with x1-wavenumbers 4 and 10 concentrated at x2 = 1/2.
pub struct KelvinHelmholtzStream {
    pub delta0: f64,
    pub u_inf: f64,
    pub amplitude: f64,
}

impl Default for KelvinHelmholtzStream {
    fn default() -> Self {
        Self { delta0: KH_DELTA0, u_inf: 1.0, amplitude: 1e-3 }
    }
}

impl KelvinHelmholtzStream {
    fn envelope(&self, y: f64) -> [f64; 3] {
        let d2 = self.delta0 * self.delta0;
        let s = y - 0.5;
        let g = (-s * s / d2).exp();
        [g, -2.0 * s / d2 * g, (4.0 * s * s / (d2 * d2) - 2.0 / d2) * g]
    }

    fn modes(x: f64) -> [f64; 3] {
        let (a, b) = (8.0 * PI, 20.0 * PI);
        [(a * x).cos() + (b * x).cos(), -a * (a * x).sin() - b * (b * x).sin(), -a * a * (a * x).cos() - b * b * (b * x).cos()]
    }

    fn z(&self, y: f64) -> f64 {
        (2.0 * y - 1.0) / self.delta0
    }

    /// Line average over x1 of the vorticity: the perturbation integrates to zero.
    pub fn mean_vorticity(&self, y: f64) -> f64 {
        let c = 1.0 / self.z(y).cosh();
        -2.0 * self.u_inf / self.delta0 * c * c
    }
}

impl StreamFunction for KelvinHelmholtzStream {
    fn value(&self, x: [f64; 2]) -> f64 {
        let c = self.amplitude * self.u_inf;
        0.5 * self.u_inf * self.delta0 * ln_cosh(self.z(x[1])) + c * self.envelope(x[1])[0] * Self::modes(x[0])[0]
    }

    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let c = self.amplitude * self.u_inf;
        let (e, m) = (self.envelope(x[1]), Self::modes(x[0]));
        [c * e[0] * m[1], self.u_inf * self.z(x[1]).tanh() + c * e[1] * m[0]]
    }

    fn hessian(&self, x: [f64; 2]) -> [f64; 3] {
        let c = self.amplitude * self.u_inf;
        let (e, m) = (self.envelope(x[1]), Self::modes(x[0]));
        let sech = 1.0 / self.z(x[1]).cosh();
        [c * e[0] * m[2], c * e[1] * m[1], 2.0 * self.u_inf / self.delta0 * sech * sech + c * e[2] * m[0]]
    }
}

/// n_v x n_v Gaussian vortices of alternating sign on the lattice
/// k / (n_v + 1).
pub struct VortexArrayStream {
    pub n: usize,
    pub amplitude: f64,
    pub sharpness: f64,
}

impl VortexArrayStream {
    pub fn new(n_vortices: usize) -> Self {
        Self { n: n_vortices, amplitude: 1e-2, sharpness: 1e4 }
    }

    /// Centre of vortex (k, j), 1-based.
    pub fn centre(&self, k: usize, j: usize) -> [f64; 2] {
        let s = 1.0 / (self.n + 1) as f64;
        [k as f64 * s, j as f64 * s]
    }

    /// Sums f(sign, dx, dy, gaussian) over vortices whose contribution is
    /// above 1e-17 of the peak.
    fn fold<const N: usize>(&self, x: [f64; 2], f: impl Fn(f64, f64, f64, f64) -> [f64; N]) -> [f64; N] {
        let reach = (40.0 / self.sharpness).sqrt();
        let m = (self.n + 1) as f64;
        let range = |c: f64| {
            let lo = ((c - reach) * m).ceil().max(1.0) as usize;
            let hi = (((c + reach) * m).floor() as usize).min(self.n);
            lo..=hi
        };
        let mut acc = [0.0; N];
        for k in range(x[0]) {
            for j in range(x[1]) {
                let c = self.centre(k, j);
                let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
                let g = self.amplitude * (-self.sharpness * (dx * dx + dy * dy)).exp();
                let sign = if (k + j) % 2 == 0 { 1.0 } else { -1.0 };
                for (a, v) in acc.iter_mut().zip(f(sign, dx, dy, g)) {
                    *a += v;
                }
            }
        }
        acc
    }
}

impl StreamFunction for VortexArrayStream {
    fn value(&self, x: [f64; 2]) -> f64 {
        self.fold(x, |s, _, _, g| [s * g])[0]
    }

    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let a = self.sharpness;
        self.fold(x, |s, dx, dy, g| [-2.0 * a * dx * s * g, -2.0 * a * dy * s * g])
    }

    fn hessian(&self, x: [f64; 2]) -> [f64; 3] {
        let a = self.sharpness;
        self.fold(x, |s, dx, dy, g| {
            [(4.0 * a * a * dx * dx - 2.0 * a) * s * g, 4.0 * a * a * dx * dy * s * g, (4.0 * a * a * dy * dy - 2.0 * a) * s * g]
        })
    }
}
