//! Conversion between the normalized units used internally and SI.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("physical parameter {name} must be finite and > 0, got {value}")]
pub struct UnitError {
    pub name: &'static str,
    pub value: f64,
}

/// Mass (kg), maximum trap stiffness `k0` (N/m) and initial width `a0` (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalUnits {
    pub mass: f64,
    pub k0: f64,
    pub a0: f64,
}

impl PhysicalUnits {
    pub fn new(mass: f64, k0: f64, a0: f64) -> Result<Self, UnitError> {
        for (name, value) in [("mass", mass), ("k0", k0), ("a0", a0)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(UnitError { name, value });
            }
        }
        Ok(PhysicalUnits { mass, k0, a0 })
    }

    /// `T0 = sqrt(m/k0)` in seconds.
    pub fn time_unit(&self) -> f64 {
        (self.mass / self.k0).sqrt()
    }

    pub fn time_to_si(&self, t: f64) -> f64 {
        t * self.time_unit()
    }

    pub fn time_from_si(&self, t: f64) -> f64 {
        t / self.time_unit()
    }

    pub fn length_to_si(&self, x: f64) -> f64 {
        x * self.a0
    }

    pub fn length_from_si(&self, x: f64) -> f64 {
        x / self.a0
    }

    /// `x2` (units of `a0/T0`) to m/s.
    pub fn velocity_to_si(&self, v: f64) -> f64 {
        v * self.a0 / self.time_unit()
    }

    pub fn velocity_from_si(&self, v: f64) -> f64 {
        v * self.time_unit() / self.a0
    }

    /// Normalized control `u` to stiffness in N/m.
    pub fn stiffness_to_si(&self, u: f64) -> f64 {
        u * self.k0
    }

    pub fn stiffness_from_si(&self, k: f64) -> f64 {
        k / self.k0
    }
}

/// How numbers leave the program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnitMode {
    Normalized,
    Physical(PhysicalUnits),
}

impl UnitMode {
    pub fn time(&self, t: f64) -> f64 {
        match self {
            UnitMode::Normalized => t,
            UnitMode::Physical(p) => p.time_to_si(t),
        }
    }

    pub fn length(&self, x: f64) -> f64 {
        match self {
            UnitMode::Normalized => x,
            UnitMode::Physical(p) => p.length_to_si(x),
        }
    }

    pub fn velocity(&self, v: f64) -> f64 {
        match self {
            UnitMode::Normalized => v,
            UnitMode::Physical(p) => p.velocity_to_si(v),
        }
    }

    pub fn stiffness(&self, u: f64) -> f64 {
        match self {
            UnitMode::Normalized => u,
            UnitMode::Physical(p) => p.stiffness_to_si(u),
        }
    }

    pub fn time_label(&self) -> &'static str {
        match self {
            UnitMode::Normalized => "T0",
            UnitMode::Physical(_) => "s",
        }
    }

    pub fn length_label(&self) -> &'static str {
        match self {
            UnitMode::Normalized => "a0",
            UnitMode::Physical(_) => "m",
        }
    }

    pub fn velocity_label(&self) -> &'static str {
        match self {
            UnitMode::Normalized => "a0/T0",
            UnitMode::Physical(_) => "m/s",
        }
    }

    pub fn stiffness_label(&self) -> &'static str {
        match self {
            UnitMode::Normalized => "k0",
            UnitMode::Physical(_) => "N/m",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn time_unit() {
        let p = PhysicalUnits::new(4.0, 1.0, 2.0).unwrap();
        assert_eq!(p.time_unit(), 2.0);
        assert_eq!(p.time_to_si(3.0), 6.0);
        assert_eq!(p.velocity_to_si(1.0), 1.0);
    }

    #[test]
    fn round_trip() {
        // a rubidium atom in a micron box
        let p = PhysicalUnits::new(1.443e-25, 3.2e-17, 1.5e-6).unwrap();
        for x in [1e-3, 0.7, 3.4295, 1e4] {
            assert_relative_eq!(p.time_from_si(p.time_to_si(x)), x, max_relative = 4.0 * f64::EPSILON);
            assert_relative_eq!(p.length_from_si(p.length_to_si(x)), x, max_relative = 4.0 * f64::EPSILON);
            assert_relative_eq!(p.velocity_from_si(p.velocity_to_si(x)), x, max_relative = 4.0 * f64::EPSILON);
            assert_relative_eq!(p.stiffness_from_si(p.stiffness_to_si(x)), x, max_relative = 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(PhysicalUnits::new(0.0, 1.0, 1.0).is_err());
        assert!(PhysicalUnits::new(1.0, f64::NAN, 1.0).is_err());
        assert!(PhysicalUnits::new(1.0, 1.0, -1.0).is_err());
    }
}
