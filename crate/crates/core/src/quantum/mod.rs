//! Particle in the expanding box with the auxiliary harmonic potential.
//!
//! Units: `hbar = m = a0 = 1` and `k0 = 1`, so times are in units of `T0`
//! and the stiffness equals the normalized control. Wavefunctions are stored
//! in the co-moving frame `y = x/a` on the fixed box `[0, 1]`:
//!
//! `psi(x, t) = a^{-1/2} exp(i a' x^2 / (2a)) phi(x/a, t)`.
//!
//! Only the `N` interior grid points are stored; `phi(0) = phi(1) = 0`.

mod pde;
mod protocol;

pub use pde::{check_resolution, evolve_pde, PdeOptions, PdeRun, RESOLUTION_LIMIT};
pub use protocol::{
    phase_integral, RampedSchedule, SlavedPlan, StiffnessOffset, TabulatedWall, WallProtocol,
    WallSample,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of interior grid points.
pub const DEFAULT_GRID: usize = 512;
/// Default mode cutoff for expansions and energy sums.
pub const DEFAULT_MODES: usize = 32;

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("grid needs at least 2 interior points, got {0}")]
    InvalidGrid(usize),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("wall position must be positive, got a = {a} at t = {t}")]
    NonPositiveWall { t: f64, a: f64 },
    #[error("invalid time step {0}")]
    InvalidStep(f64),
    #[error("mode expansion is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("mode index must be >= 1")]
    InvalidMode,
    #[error("need one phase integral per mode: {modes} modes, {phases} phases")]
    PhaseCount { modes: usize, phases: usize },
}

/// Grid spacing of the scaled box for `n` interior points.
pub fn grid_step(n: usize) -> f64 {
    1.0 / (n + 1) as f64
}

/// Interior nodes `y_j = j h`, `j = 1..=n`.
pub fn grid_points(n: usize) -> impl Iterator<Item = f64> {
    let h = grid_step(n);
    (1..=n).map(move |j| j as f64 * h)
}

/// Energy of mode `n` in a box of width `a`: `n^2 pi^2 / (2 a^2)`.
pub fn mode_energy(n: usize, a: f64) -> f64 {
    let k = n as f64 * PI;
    0.5 * k * k / (a * a)
}

/// Box eigenfunction `sqrt(2/a) sin(n pi x/a)` sampled at `x_j = a y_j`.
pub fn eigenstate(n: usize, a: f64, grid: usize) -> Vec<f64> {
    let norm = (2.0 / a).sqrt();
    grid_points(grid)
        .map(|y| norm * (n as f64 * PI * y).sin())
        .collect()
}

/// Trapezoidal inner product of real samples with Dirichlet end points.
pub fn inner_product(f: &[f64], g: &[f64], dx: f64) -> f64 {
    dx * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
}

/// Fidelity `|<f|g>|^2` of two real sampled functions on a common grid.
pub fn sampled_fidelity(f: &[f64], g: &[f64], dx: f64) -> f64 {
    let s = inner_product(f, g, dx);
    s * s
}

/// Complex amplitudes `c_n`, `n = 1..=len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeExpansion {
    coefficients: Vec<Complex64>,
}

impl ModeExpansion {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(coefficients: Vec<Complex64>) -> Result<Self, QuantumError> {
        let n2: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if (n2 - 1.0).abs() > Self::NORM_TOL {
            return Err(QuantumError::NotNormalized(n2));
        }
        Ok(ModeExpansion { coefficients })
    }

    /// Rescales arbitrary non-zero amplitudes to unit norm.
    pub fn normalized(coefficients: Vec<Complex64>) -> Result<Self, QuantumError> {
        let n2: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(QuantumError::NotNormalized(n2));
        }
        let s = n2.sqrt();
        Ok(ModeExpansion {
            coefficients: coefficients.into_iter().map(|c| c / s).collect(),
        })
    }

    pub fn ground() -> Self {
        ModeExpansion {
            coefficients: vec![Complex64::new(1.0, 0.0)],
        }
    }

    /// Equal-weight real superposition of modes `1..=modes`.
    pub fn equal_superposition(modes: usize) -> Result<Self, QuantumError> {
        Self::normalized(vec![Complex64::new(1.0, 0.0); modes])
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.norm_sqr()).collect()
    }

    /// `sum |c_n|^2 E_n(a)`.
    pub fn mean_energy(&self, a: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c.norm_sqr() * mode_energy(i + 1, a))
            .sum()
    }
}

/// Scaled-frame wavefunction `phi` with the wall data needed to map back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveFunction {
    pub values: Vec<Complex64>,
    pub time: f64,
    /// `a(t)/a0`.
    pub wall: f64,
    /// `a'(t)` in units of `a0/T0`.
    pub wall_rate: f64,
}

impl WaveFunction {
    pub fn new(values: Vec<Complex64>, time: f64, wall: f64, wall_rate: f64) -> Result<Self, QuantumError> {
        if values.len() < 2 {
            return Err(QuantumError::InvalidGrid(values.len()));
        }
        if !(wall > 0.0) {
            return Err(QuantumError::NonPositiveWall { t: time, a: wall });
        }
        Ok(WaveFunction {
            values,
            time,
            wall,
            wall_rate,
        })
    }

    /// Eigenstate `n` of the box of width `wall`, at rest.
    pub fn eigen(n: usize, wall: f64, grid: usize) -> Result<Self, QuantumError> {
        if n == 0 {
            return Err(QuantumError::InvalidMode);
        }
        let values = grid_points(grid)
            .map(|y| Complex64::new(std::f64::consts::SQRT_2 * (n as f64 * PI * y).sin(), 0.0))
            .collect();
        WaveFunction::new(values, 0.0, wall, 0.0)
    }

    pub fn grid_len(&self) -> usize {
        self.values.len()
    }

    pub fn step(&self) -> f64 {
        grid_step(self.values.len())
    }

    /// `int |phi|^2 dy`, equal to `int |psi|^2 dx`.
    pub fn norm(&self) -> f64 {
        self.step() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// Chirp exponent `a a' y^2 / 2` of the co-moving gauge at node `y`.
    fn chirp(&self, y: f64) -> f64 {
        0.5 * self.wall * self.wall_rate * y * y
    }

    /// Physical-frame samples `(x_j, psi(x_j))`.
    pub fn physical(&self) -> Vec<(f64, Complex64)> {
        let s = self.wall.sqrt().recip();
        grid_points(self.grid_len())
            .zip(&self.values)
            .map(|(y, v)| (self.wall * y, Complex64::from_polar(s, self.chirp(y)) * v))
            .collect()
    }

    /// `<Psi_n(.; a_target) | psi>`, evaluated on this state's nodes.
    pub fn eigen_overlap(&self, n: usize, a_target: f64) -> Complex64 {
        let dx = self.wall * self.step();
        let norm = (2.0 / a_target).sqrt();
        let k = n as f64 * PI / a_target;
        self.physical()
            .into_iter()
            .filter(|(x, _)| *x < a_target)
            .map(|(x, psi)| psi * (norm * (k * x).sin()))
            .sum::<Complex64>()
            * dx
    }

    /// `|<Psi_n(.; a_target) | psi>|^2`.
    pub fn eigen_fidelity(&self, n: usize, a_target: f64) -> f64 {
        self.eigen_overlap(n, a_target).norm_sqr()
    }

    /// Populations of the instantaneous box modes `1..=modes`.
    pub fn populations(&self, modes: usize) -> Vec<f64> {
        (1..=modes).map(|n| self.eigen_fidelity(n, self.wall)).collect()
    }

    /// Mean box energy from the populations of modes `1..=modes`.
    pub fn mean_energy(&self, modes: usize) -> f64 {
        self.populations(modes)
            .iter()
            .enumerate()
            .map(|(i, p)| p * mode_energy(i + 1, self.wall))
            .sum()
    }

    /// `psi` at physical position `x` by linear interpolation of `phi`.
    fn psi_at(&self, x: f64) -> Complex64 {
        let y = x / self.wall;
        if !(0.0..=1.0).contains(&y) {
            return Complex64::new(0.0, 0.0);
        }
        let n = self.grid_len();
        let pos = y * (n + 1) as f64;
        let j = pos.floor() as usize;
        let w = pos - j as f64;
        let node = |i: usize| {
            if i == 0 || i > n {
                Complex64::new(0.0, 0.0)
            } else {
                self.values[i - 1]
            }
        };
        let phi = node(j) * (1.0 - w) + node(j + 1) * w;
        Complex64::from_polar(self.wall.sqrt().recip(), self.chirp(y)) * phi
    }
}

/// `|<a|b>|^2` for states on the same grid and the same wall.
pub fn fidelity(a: &WaveFunction, b: &WaveFunction) -> Result<f64, QuantumError> {
    if a.grid_len() != b.grid_len() {
        return Err(QuantumError::GridMismatch(format!(
            "{} vs {} points",
            a.grid_len(),
            b.grid_len()
        )));
    }
    let close = |p: f64, q: f64| (p - q).abs() <= 1e-12 * p.abs().max(q.abs()).max(1.0);
    if !close(a.wall, b.wall) || !close(a.wall_rate, b.wall_rate) {
        return Err(QuantumError::GridMismatch(format!(
            "walls (a = {}, a' = {}) vs (a = {}, a' = {})",
            a.wall, a.wall_rate, b.wall, b.wall_rate
        )));
    }
    let s: Complex64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(p, q)| p.conj() * q)
        .sum();
    Ok((s * a.step()).norm_sqr())
}

/// `|<a|b>|^2` in the physical frame for states on different walls; `b` is
/// interpolated onto the nodes of `a`.
pub fn physical_fidelity(a: &WaveFunction, b: &WaveFunction) -> f64 {
    let dx = a.wall * a.step();
    let s: Complex64 = a
        .physical()
        .into_iter()
        .map(|(x, pa)| pa.conj() * b.psi_at(x))
        .sum();
    (s * dx).norm_sqr()
}

/// Exact co-moving solution: `phi = sum c_n exp(-i theta_n) sqrt(2) sin(n pi y)`
/// with `theta_n = int_0^t E_n dt'` supplied per mode.
pub fn exact_state(
    modes: &ModeExpansion,
    grid: usize,
    time: f64,
    wall: f64,
    wall_rate: f64,
    phase_integrals: &[f64],
) -> Result<WaveFunction, QuantumError> {
    if phase_integrals.len() != modes.len() {
        return Err(QuantumError::PhaseCount {
            modes: modes.len(),
            phases: phase_integrals.len(),
        });
    }
    let weights: Vec<Complex64> = modes
        .coefficients()
        .iter()
        .zip(phase_integrals)
        .map(|(c, th)| c * Complex64::from_polar(std::f64::consts::SQRT_2, -th))
        .collect();
    let values = grid_points(grid)
        .map(|y| {
            weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * ((i + 1) as f64 * PI * y).sin())
                .sum()
        })
        .collect();
    WaveFunction::new(values, time, wall, wall_rate)
}

/// Phase integrals `theta_n = n^2 pi^2 / 2 * int_0^t a^{-2} dt'` for modes
/// `1..=modes`, given the base integral `int_0^t a^{-2} dt'`.
pub fn mode_phases(base_integral: f64, modes: usize) -> Vec<f64> {
    (1..=modes)
        .map(|n| 0.5 * (n as f64 * PI).powi(2) * base_integral)
        .collect()
}
