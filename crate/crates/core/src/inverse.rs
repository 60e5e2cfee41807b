//! Inverse-engineered expansion along the quintic wall trajectory
//! `a/a0 = 1 + (gamma - 1) s^3 (6 s^2 - 15 s + 10)`, `s = t/T`, which meets
//! `a' = a'' = 0` at both ends, and the shortest duration compatible with
//! `|u| <= 1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::NormalizedState;
use crate::search::grid_then_golden_max;

/// Grid nodes for the peak-control search.
pub const PEAK_GRID_POINTS: usize = 10_001;
/// Golden-section refinement tolerance in `s`.
pub const PEAK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum InverseError {
    #[error("expansion factor must be finite and > 1, got {0}")]
    InvalidGamma(f64),
    #[error("duration must be finite and > 0, got {0}")]
    InvalidDuration(f64),
}

fn check_gamma(gamma: f64) -> Result<(), InverseError> {
    if gamma.is_finite() && gamma > 1.0 {
        Ok(())
    } else {
        Err(InverseError::InvalidGamma(gamma))
    }
}

fn shape(s: f64) -> f64 {
    s * s * s * (6.0 * s * s - 15.0 * s + 10.0)
}

/// `u(s) * T^2`: the control with the duration scaled out.
fn scaled_control(gamma: f64, s: f64) -> f64 {
    -60.0 * (gamma - 1.0) * s * (2.0 * s * s - 3.0 * s + 1.0) / (1.0 + (gamma - 1.0) * shape(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolynomialPlan {
    pub gamma: f64,
    /// Duration in units of `T0`.
    pub duration: f64,
}

impl PolynomialPlan {
    pub fn new(gamma: f64, duration: f64) -> Result<Self, InverseError> {
        check_gamma(gamma)?;
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(InverseError::InvalidDuration(duration));
        }
        Ok(PolynomialPlan { gamma, duration })
    }

    /// Plan at the shortest duration with `|u| <= 1`.
    pub fn fastest(gamma: f64) -> Result<Self, InverseError> {
        let duration = min_feasible_duration(gamma)?;
        PolynomialPlan::new(gamma, duration)
    }

    /// Coefficients of `a/a0` in powers of `s`, constant term first.
    pub fn coefficients(&self) -> [f64; 6] {
        let g = self.gamma - 1.0;
        [1.0, 0.0, 0.0, 10.0 * g, -15.0 * g, 6.0 * g]
    }

    fn s(&self, t: f64) -> f64 {
        (t / self.duration).clamp(0.0, 1.0)
    }

    /// `a(t)/a0`.
    pub fn position(&self, t: f64) -> f64 {
        1.0 + (self.gamma - 1.0) * shape(self.s(t))
    }

    /// `da/dt / a0`.
    pub fn velocity(&self, t: f64) -> f64 {
        let s = self.s(t);
        (self.gamma - 1.0) * 30.0 * s * s * (s - 1.0) * (s - 1.0) / self.duration
    }

    /// `d2a/dt2 / a0`.
    pub fn acceleration(&self, t: f64) -> f64 {
        let s = self.s(t);
        (self.gamma - 1.0) * 60.0 * s * (2.0 * s * s - 3.0 * s + 1.0)
            / (self.duration * self.duration)
    }

    pub fn control(&self, t: f64) -> f64 {
        poly_control(self.gamma, self.duration, self.s(t))
    }

    pub fn state_at(&self, t: f64) -> NormalizedState {
        NormalizedState::new(self.position(t), self.velocity(t))
    }
}

/// Normalized stiffness `k/k0` of the inverse-engineered plan at `s = t/T`.
pub fn poly_control(gamma: f64, duration: f64, s: f64) -> f64 {
    scaled_control(gamma, s) / (duration * duration)
}

/// Location and signed value of the peak of `|u(s) T^2|` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPeak {
    pub s: f64,
    /// Signed `u T^2` at the peak.
    pub value: f64,
}

pub fn peak_control(gamma: f64) -> Result<ControlPeak, InverseError> {
    check_gamma(gamma)?;
    let (s, _) = grid_then_golden_max(
        |s| scaled_control(gamma, s).abs(),
        0.0,
        1.0,
        PEAK_GRID_POINTS,
        PEAK_TOL,
    );
    Ok(ControlPeak {
        s,
        value: scaled_control(gamma, s),
    })
}

/// Smallest duration (units of `T0`) for which `max |u| <= 1`.
///
/// `u` scales as `1/T^2`, so this is the square root of the peak of `|u T^2|`.
pub fn min_feasible_duration(gamma: f64) -> Result<f64, InverseError> {
    Ok(peak_control(gamma)?.value.abs().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn control_vanishes_at_ends_and_midpoint() {
        for &(g, t) in &[(2.0, 1.0), (10.0, 6.2511), (50.0, 0.3)] {
            assert_eq!(poly_control(g, t, 0.0), 0.0);
            assert_eq!(poly_control(g, t, 1.0).abs(), 0.0);
        }
        assert_eq!(poly_control(10.0, 6.2511, 0.5), 0.0);
    }

    #[test]
    fn gamma_ten_duration() {
        let t = min_feasible_duration(10.0).unwrap();
        assert_abs_diff_eq!(t, 6.2511, epsilon = 1e-3);
        let min_u = (0..=100_000)
            .map(|i| poly_control(10.0, 6.2511, i as f64 / 100_000.0))
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(min_u, -1.0, epsilon = 1e-3);
    }

    #[test]
    fn peak_is_on_the_negative_side() {
        for g in [1.5, 2.0, 10.0, 100.0, 1e4] {
            let p = peak_control(g).unwrap();
            assert!(p.value < 0.0 && p.s < 0.5, "gamma {g}: {p:?}");
            let t = min_feasible_duration(g).unwrap();
            assert_abs_diff_eq!(poly_control(g, t, p.s), -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_expansion_needs_no_time() {
        assert!(min_feasible_duration(1.0 + 1e-10).unwrap() < 1e-3);
        assert!(min_feasible_duration(1.0).is_err());
        assert!(PolynomialPlan::new(2.0, 0.0).is_err());
    }

    #[test]
    fn wall_boundary_conditions() {
        let p = PolynomialPlan::new(7.0, 3.0).unwrap();
        assert_eq!(p.position(0.0), 1.0);
        assert_abs_diff_eq!(p.position(3.0), 7.0, epsilon = 1e-14);
        for t in [0.0, 3.0] {
            assert_abs_diff_eq!(p.velocity(t), 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(p.acceleration(t), 0.0, epsilon = 1e-14);
        }
        let c = p.coefficients();
        assert_abs_diff_eq!(c.iter().sum::<f64>(), 7.0, epsilon = 1e-14);
    }

    #[test]
    fn control_is_slaved_to_wall() {
        let p = PolynomialPlan::new(4.0, 2.5).unwrap();
        for i in 0..=50 {
            let t = 2.5 * i as f64 / 50.0;
            assert_abs_diff_eq!(
                p.control(t),
                -p.acceleration(t) / p.position(t),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = PolynomialPlan::new(3.0, 2.0).unwrap();
        let h = 1e-5;
        for t in [0.3, 0.9, 1.4] {
            let fd_v = (p.position(t + h) - p.position(t - h)) / (2.0 * h);
            let fd_a = (p.velocity(t + h) - p.velocity(t - h)) / (2.0 * h);
            assert_abs_diff_eq!(p.velocity(t), fd_v, epsilon = 1e-8);
            assert_abs_diff_eq!(p.acceleration(t), fd_a, epsilon = 1e-8);
        }
    }
}
