//! Crank-Nicolson stepping of the co-moving Schrödinger equation
//!
//! `i phi_t = -(1 / (2 a^2)) phi_yy + W(y, t) phi`, `W = a (a k + a'') y^2 / 2`,
//!
//! on `N` interior nodes of `[0, 1]` with Dirichlet walls and a second-order
//! Laplacian. Coefficients are frozen at the step midpoint, so each step is
//! the Cayley transform of a real symmetric matrix and is exactly unitary.

use num_complex::Complex64;

use super::protocol::WallProtocol;
use super::{grid_points, grid_step, mode_energy, QuantumError, WaveFunction, DEFAULT_MODES};

/// Warn when `dt * omega_max` exceeds this.
pub const RESOLUTION_LIMIT: f64 = 0.1;

/// Modes with initial population above this count toward the resolution guard.
const GUARD_POPULATION: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeOptions {
    pub dt: f64,
    pub steps: usize,
    /// Keep a snapshot every `record_every` steps (0 keeps none).
    pub record_every: usize,
}

impl PdeOptions {
    /// Covers `duration` with steps no longer than `max_dt`.
    pub fn covering(duration: f64, max_dt: f64) -> Self {
        let steps = ((duration / max_dt).ceil() as usize).max(1);
        PdeOptions {
            dt: duration / steps as f64,
            steps,
            record_every: 0,
        }
    }

    pub fn recording(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }
}

#[derive(Debug, Clone)]
pub struct PdeRun {
    pub state: WaveFunction,
    /// Snapshots including the initial and final states when recording.
    pub snapshots: Vec<WaveFunction>,
    /// Largest `dt * omega` met along the run.
    pub max_phase_step: f64,
    /// `dt` that would satisfy the resolution guard.
    pub suggested_dt: f64,
    pub warnings: Vec<String>,
}

impl PdeRun {
    pub fn resolved(&self) -> bool {
        self.max_phase_step <= RESOLUTION_LIMIT
    }
}

/// Highest mode index carrying population above the guard threshold.
fn guard_mode(initial: &WaveFunction) -> usize {
    let modes = DEFAULT_MODES.min(initial.grid_len());
    let pops = initial.populations(modes);
    let covered: f64 = pops.iter().sum();
    if covered < 1.0 - 1e-6 {
        // weight beyond the cutoff: guard against the cutoff itself
        return modes;
    }
    pops.iter()
        .rposition(|&p| p > GUARD_POPULATION)
        .map_or(1, |i| i + 1)
}

/// Largest `dt * omega` over the step midpoints of a planned run and the
/// `dt` that would bring it down to the limit, without stepping the state.
pub fn check_resolution<P: WallProtocol + ?Sized>(
    initial: &WaveFunction,
    protocol: &P,
    opts: &PdeOptions,
) -> (f64, f64) {
    let guard = guard_mode(initial);
    let omega = (0..opts.steps)
        .map(|k| {
            let mid = protocol.sample(initial.time + (k as f64 + 0.5) * opts.dt);
            mode_energy(guard, mid.a) + mid.residual().abs()
        })
        .fold(0.0, f64::max);
    let suggested = if omega > 0.0 { RESOLUTION_LIMIT / omega } else { opts.dt };
    (opts.dt * omega, suggested)
}

/// Solves `(1 + i s H) x = rhs` for the tridiagonal `H` with constant
/// off-diagonal `off` and diagonal `diag`, by the Thomas algorithm.
fn cayley_solve(
    diag: &[f64],
    off: f64,
    s: f64,
    rhs: &mut [Complex64],
    scratch: &mut [Complex64],
) {
    let n = diag.len();
    let i = Complex64::new(0.0, 1.0);
    let lower = i * (s * off);
    let mut denom = Complex64::new(1.0, 0.0) + i * (s * diag[0]);
    scratch[0] = lower / denom;
    rhs[0] /= denom;
    for j in 1..n {
        denom = Complex64::new(1.0, 0.0) + i * (s * diag[j]) - lower * scratch[j - 1];
        scratch[j] = lower / denom;
        rhs[j] = (rhs[j] - lower * rhs[j - 1]) / denom;
    }
    for j in (0..n - 1).rev() {
        let next = rhs[j + 1];
        rhs[j] -= scratch[j] * next;
    }
}

/// Integrates from `initial.time` over `opts.steps` steps of `opts.dt`.
pub fn evolve_pde<P: WallProtocol + ?Sized>(
    initial: &WaveFunction,
    protocol: &P,
    opts: &PdeOptions,
) -> Result<PdeRun, QuantumError> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(QuantumError::InvalidStep(opts.dt));
    }
    let n = initial.grid_len();
    if n < 2 {
        return Err(QuantumError::InvalidGrid(n));
    }
    let h = grid_step(n);
    let y2: Vec<f64> = grid_points(n).map(|y| y * y).collect();
    let guard = guard_mode(initial);

    let mut phi = initial.values.clone();
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); n];
    let mut diag = vec![0.0; n];
    let i = Complex64::new(0.0, 1.0);
    let half = 0.5 * opts.dt;

    let mut snapshots = Vec::new();
    if opts.record_every > 0 {
        snapshots.push(initial.clone());
    }
    let mut max_phase_step: f64 = 0.0;
    let mut t = initial.time;

    for step in 0..opts.steps {
        let mid = protocol.sample(t + half);
        if !(mid.a > 0.0) {
            return Err(QuantumError::NonPositiveWall { t: t + half, a: mid.a });
        }
        let kin = 0.5 / (mid.a * mid.a * h * h);
        let w = mid.residual();
        for (d, yy) in diag.iter_mut().zip(&y2) {
            *d = 2.0 * kin + w * yy;
        }
        let off = -kin;
        let omega = mode_energy(guard, mid.a) + w.abs();
        max_phase_step = max_phase_step.max(opts.dt * omega);

        // rhs = (1 - i dt/2 H) phi
        for j in 0..n {
            let mut hphi = diag[j] * phi[j];
            if j > 0 {
                hphi += off * phi[j - 1];
            }
            if j + 1 < n {
                hphi += off * phi[j + 1];
            }
            rhs[j] = phi[j] - i * (half * hphi);
        }
        cayley_solve(&diag, off, half, &mut rhs, &mut scratch);
        std::mem::swap(&mut phi, &mut rhs);

        t = initial.time + (step + 1) as f64 * opts.dt;
        if opts.record_every > 0 && ((step + 1) % opts.record_every == 0 || step + 1 == opts.steps) {
            let end = protocol.sample(t);
            snapshots.push(WaveFunction {
                values: phi.clone(),
                time: t,
                wall: end.a,
                wall_rate: end.a_dot,
            });
        }
    }

    let end = protocol.sample(t);
    if !(end.a > 0.0) {
        return Err(QuantumError::NonPositiveWall { t, a: end.a });
    }
    let omega_scale = if max_phase_step > 0.0 { max_phase_step / opts.dt } else { 0.0 };
    let suggested_dt = if omega_scale > 0.0 {
        RESOLUTION_LIMIT / omega_scale
    } else {
        opts.dt
    };
    let mut warnings = Vec::new();
    if max_phase_step > RESOLUTION_LIMIT {
        warnings.push(format!(
            "time step {} under-resolves mode {guard}: dt*omega = {max_phase_step:.3e} > {RESOLUTION_LIMIT}; suggested dt <= {suggested_dt:.3e}",
            opts.dt
        ));
    }
    Ok(PdeRun {
        state: WaveFunction {
            values: phi,
            time: t,
            wall: end.a,
            wall_rate: end.a_dot,
        },
        snapshots,
        max_phase_step,
        suggested_dt,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::protocol::{SlavedPlan, StiffnessOffset, TabulatedWall};
    use crate::quantum::{fidelity, ModeExpansion};
    use crate::plan::ExpansionPlan;
    use approx::assert_abs_diff_eq;

    fn static_box() -> TabulatedWall {
        TabulatedWall::integrate(|_| 0.0, 10.0, 0.1).unwrap()
    }

    #[test]
    fn thomas_solver_inverts_cayley_operator() {
        let diag = [2.0, 3.0, -1.0, 0.5];
        let off = -0.7;
        let s = 0.3;
        let x: Vec<Complex64> = (0..4).map(|k| Complex64::new(k as f64, 1.0 - k as f64)).collect();
        let i = Complex64::new(0.0, 1.0);
        let mut b: Vec<Complex64> = (0..4)
            .map(|j| {
                let mut hx = diag[j] * x[j];
                if j > 0 {
                    hx += off * x[j - 1];
                }
                if j < 3 {
                    hx += off * x[j + 1];
                }
                x[j] + i * s * hx
            })
            .collect();
        let mut scratch = vec![Complex64::new(0.0, 0.0); 4];
        cayley_solve(&diag, off, s, &mut b, &mut scratch);
        for (a, e) in b.iter().zip(&x) {
            assert_abs_diff_eq!((a - e).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn stationary_state_stays_put() {
        let wf = WaveFunction::eigen(1, 1.0, 256).unwrap();
        let run = evolve_pde(&wf, &static_box(), &PdeOptions::covering(2.0, 1e-3)).unwrap();
        assert_abs_diff_eq!(fidelity(&wf, &run.state).unwrap(), 1.0, epsilon = 1e-12);
        assert!(run.resolved());
    }

    #[test]
    fn unitary_under_perturbation() {
        let wf = WaveFunction::eigen(1, 1.0, 128).unwrap();
        let protocol = StiffnessOffset {
            inner: SlavedPlan::new(ExpansionPlan::optimal(3.0).unwrap()),
            offset: |t: f64| 0.5 * (3.0 * t).sin(),
        };
        let run = evolve_pde(&wf, &protocol, &PdeOptions { dt: 1e-4, steps: 10_000, record_every: 0 }).unwrap();
        assert_abs_diff_eq!(run.state.norm(), 1.0, epsilon = 1e-10);
        // the residual potential mixes in other modes
        assert!(run.state.eigen_fidelity(1, run.state.wall) < 1.0 - 1e-8);
    }

    #[test]
    fn guard_flags_coarse_steps() {
        let wf = WaveFunction::eigen(1, 1.0, 64).unwrap();
        let run = evolve_pde(&wf, &static_box(), &PdeOptions { dt: 0.05, steps: 4, record_every: 0 }).unwrap();
        assert!(!run.resolved());
        assert_eq!(run.warnings.len(), 1);
        assert!(run.suggested_dt < 0.05);
        assert_abs_diff_eq!(run.suggested_dt * mode_energy(1, 1.0), RESOLUTION_LIMIT, epsilon = 1e-12);
        let (phase, dt) = check_resolution(&wf, &static_box(), &PdeOptions { dt: 0.05, steps: 4, record_every: 0 });
        assert_eq!(phase, run.max_phase_step);
        assert_eq!(dt, run.suggested_dt);
    }

    #[test]
    fn snapshots_are_recorded() {
        let wf = WaveFunction::eigen(1, 1.0, 32).unwrap();
        let opts = PdeOptions { dt: 0.01, steps: 10, record_every: 3 };
        let run = evolve_pde(&wf, &static_box(), &opts).unwrap();
        let times: Vec<f64> = run.snapshots.iter().map(|s| s.time).collect();
        assert_eq!(times.len(), 5);
        assert_abs_diff_eq!(times[4], 0.1, epsilon = 1e-15);
        let _ = ModeExpansion::ground();
    }

    #[test]
    fn rejects_bad_steps() {
        let wf = WaveFunction::eigen(1, 1.0, 32).unwrap();
        assert!(evolve_pde(&wf, &static_box(), &PdeOptions { dt: 0.0, steps: 1, record_every: 0 }).is_err());
    }
}
