//! Minimum-time expansion: closed-form bang-bang synthesis, a maximum
//! principle certificate built from the adjoint system, and a brute-force
//! search over multi-switch schedules used as an independent check.

mod certificate;
mod oracle;

pub use certificate::{
    build_certificate, certify_schedule, AdjointSample, CertificateOptions, CertificateViolation,
    PmpCertificate,
};
pub use oracle::{brute_force_min_time, BangSet, OracleConfig, OracleResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ControlSchedule, DynamicsError, NormalizedState, Segment};

#[derive(Debug, Error)]
pub enum OptimalError {
    #[error("expansion factor must be finite and > 1, got {0}")]
    InvalidGamma(f64),
    #[error("invalid search parameter: {0}")]
    InvalidConfig(String),
    #[error("no feasible schedule found ({0})")]
    NoFeasibleSchedule(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

pub(crate) fn check_gamma(gamma: f64) -> Result<(), OptimalError> {
    if gamma.is_finite() && gamma > 1.0 {
        Ok(())
    } else {
        Err(OptimalError::InvalidGamma(gamma))
    }
}

/// The one-switch XY solution: `u = -1` for `t_x`, then `u = +1` for `t_y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalSolution {
    pub gamma: f64,
    pub t_x: f64,
    pub t_y: f64,
    pub total: f64,
    pub switch_state: NormalizedState,
}

impl OptimalSolution {
    /// Piecewise-constant control with zero-duration jumps from and to `u = 0`.
    pub fn schedule(&self) -> ControlSchedule {
        ControlSchedule::new(vec![Segment::new(self.t_x, -1.0), Segment::new(self.t_y, 1.0)])
            .expect("closed-form arcs are valid")
            .with_boundary_jumps(true)
    }

    /// The same arcs in reverse order (a compression-type YX sequence).
    pub fn reversed_schedule(&self) -> ControlSchedule {
        ControlSchedule::new(vec![Segment::new(self.t_y, 1.0), Segment::new(self.t_x, -1.0)])
            .expect("closed-form arcs are valid")
            .with_boundary_jumps(true)
    }
}

/// Closed-form minimum-time expansion from `(1, 0)` to `(gamma, 0)`.
///
/// The switch lies where the hyperbola `x1^2 - x2^2 = 1` through the start
/// meets the circle `x1^2 + x2^2 = gamma^2` through the target.
pub fn solve_optimal(gamma: f64) -> Result<OptimalSolution, OptimalError> {
    check_gamma(gamma)?;
    let g2 = gamma * gamma;
    let v = ((g2 - 1.0) / 2.0).sqrt();
    let t_x = v.asinh();
    let t_y = (v / gamma).min(1.0).asin();
    Ok(OptimalSolution {
        gamma,
        t_x,
        t_y,
        total: t_x + t_y,
        switch_state: NormalizedState::new(((g2 + 1.0) / 2.0).sqrt(), v),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::propagate_schedule;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    #[test]
    fn gamma_ten_reference_times() {
        let s = solve_optimal(10.0).unwrap();
        assert_abs_diff_eq!(s.total, 3.4295, epsilon = 1e-4);
        assert_abs_diff_eq!(s.t_x, 2.6492, epsilon = 1e-4);
        assert_abs_diff_eq!(s.t_y, 0.7803, epsilon = 1e-4);
    }

    #[test]
    fn near_unit_gamma_degenerates() {
        let s = solve_optimal(1.0 + 1e-10).unwrap();
        assert!(s.total < 1e-4);
        assert_abs_diff_eq!(s.switch_state.x1, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.switch_state.x2, 0.0, epsilon = 1e-4);
    }

    #[test]
    fn large_gamma_asymptote() {
        let s = solve_optimal(1e4).unwrap();
        let offset = SQRT_2.ln() + FRAC_PI_4;
        assert_abs_diff_eq!(s.total - 1e4f64.ln(), offset, epsilon = 1e-3);
    }

    #[test]
    fn rejects_compression() {
        for g in [1.0, 0.5, -2.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(solve_optimal(g), Err(OptimalError::InvalidGamma(_))));
        }
    }

    #[test]
    fn schedule_reaches_target() {
        let s = solve_optimal(10.0).unwrap();
        let sched = s.schedule();
        assert!(sched.boundary_jumps());
        let end = propagate_schedule(NormalizedState::REST, &sched)
            .unwrap()
            .final_state()
            .unwrap();
        assert!(end.distance(&NormalizedState::target(10.0)) < 1e-9);
    }
}
