//! Quantum Otto refrigerator driven by the piston.
//!
//! Temperatures are energies (`k_B = 1`) and the working medium holds `tau/2`
//! after thermalizing at temperature `tau`. The expansion keeps populations
//! and scales energies by `1/gamma^2`, so the heat drawn from the cold bath
//! per cycle is `Q = tau_c/2 - tau_h/(2 gamma^2)`. The cycle time is taken to
//! be the expansion time alone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inverse::{min_feasible_duration, InverseError};
use crate::optimal::{solve_optimal, OptimalError};
use crate::search::grid_then_golden_max;

/// Upper end of the expansion-factor search.
pub const GAMMA_MAX: f64 = 1e6;

#[derive(Debug, Error)]
pub enum ThermoError {
    #[error("temperatures must satisfy 0 < tau_c < tau_h, got tau_c = {tau_c}, tau_h = {tau_h}")]
    InvalidTemperatures { tau_c: f64, tau_h: f64 },
    #[error("expansion factor must be finite and > 1, got {0}")]
    InvalidGamma(f64),
    #[error("refrigeration infeasible: Q = {q} < 0 (need gamma > {gamma_min})")]
    Infeasible { q: f64, gamma_min: f64 },
    #[error(transparent)]
    Optimal(#[from] OptimalError),
    #[error(transparent)]
    Inverse(#[from] InverseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionTimeModel {
    Optimal,
    Inverse,
}

impl ExpansionTimeModel {
    /// Expansion duration in units of `T0`.
    pub fn duration(self, gamma: f64) -> Result<f64, ThermoError> {
        Ok(match self {
            ExpansionTimeModel::Optimal => solve_optimal(gamma)?.total,
            ExpansionTimeModel::Inverse => min_feasible_duration(gamma)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OttoCycleSpec {
    pub tau_c: f64,
    pub tau_h: f64,
    pub gamma: f64,
}

fn check_temperatures(tau_c: f64, tau_h: f64) -> Result<(), ThermoError> {
    if tau_c > 0.0 && tau_c < tau_h && tau_h.is_finite() {
        Ok(())
    } else {
        Err(ThermoError::InvalidTemperatures { tau_c, tau_h })
    }
}

impl OttoCycleSpec {
    pub fn new(tau_c: f64, tau_h: f64, gamma: f64) -> Result<Self, ThermoError> {
        check_temperatures(tau_c, tau_h)?;
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(ThermoError::InvalidGamma(gamma));
        }
        Ok(OttoCycleSpec { tau_c, tau_h, gamma })
    }

    /// Smallest expansion factor that extracts heat, `sqrt(tau_h/tau_c)`.
    pub fn gamma_threshold(&self) -> f64 {
        feasibility_threshold(self.tau_c, self.tau_h)
    }

    pub fn is_feasible(&self) -> bool {
        heat_extracted(self) > 0.0
    }
}

pub fn feasibility_threshold(tau_c: f64, tau_h: f64) -> f64 {
    (tau_h / tau_c).sqrt()
}

/// `Q = tau_c/2 - tau_h/(2 gamma^2)`; non-positive values mean no cooling.
pub fn heat_extracted(spec: &OttoCycleSpec) -> f64 {
    0.5 * spec.tau_c - 0.5 * spec.tau_h / (spec.gamma * spec.gamma)
}

/// `R = Q/T(gamma)`. Zero on the feasibility boundary, an error below it.
pub fn cooling_rate(spec: &OttoCycleSpec, model: ExpansionTimeModel) -> Result<f64, ThermoError> {
    let q = heat_extracted(spec);
    if q < 0.0 {
        return Err(ThermoError::Infeasible {
            q,
            gamma_min: spec.gamma_threshold(),
        });
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    Ok(q / model.duration(spec.gamma)?)
}

/// Asymptotic upper bound `-tau_c / ln(tau_c)`, defined for `tau_c < 1`.
pub fn third_law_bound(tau_c: f64) -> Option<f64> {
    (tau_c > 0.0 && tau_c < 1.0).then(|| -tau_c / tau_c.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSearch {
    pub gamma_max: f64,
    pub grid_points: usize,
    /// Golden-section tolerance in `ln gamma`.
    pub tol: f64,
}

impl Default for RateSearch {
    fn default() -> Self {
        RateSearch {
            gamma_max: GAMMA_MAX,
            grid_points: 2000,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingOptimum {
    pub tau_c: f64,
    pub tau_h: f64,
    pub model: ExpansionTimeModel,
    pub gamma_star: f64,
    pub r_star: f64,
    pub q_star: f64,
    pub bound: Option<f64>,
}

impl CoolingOptimum {
    pub fn below_bound(&self) -> Option<bool> {
        self.bound.map(|b| self.r_star < b)
    }
}

pub fn max_cooling_rate(
    tau_c: f64,
    tau_h: f64,
    model: ExpansionTimeModel,
) -> Result<CoolingOptimum, ThermoError> {
    max_cooling_rate_with(tau_c, tau_h, model, &RateSearch::default())
}

/// Maximizes `R(gamma)` over `(sqrt(tau_h/tau_c), gamma_max]` on a grid in
/// `ln gamma` followed by golden-section refinement.
pub fn max_cooling_rate_with(
    tau_c: f64,
    tau_h: f64,
    model: ExpansionTimeModel,
    search: &RateSearch,
) -> Result<CoolingOptimum, ThermoError> {
    check_temperatures(tau_c, tau_h)?;
    let lo = feasibility_threshold(tau_c, tau_h).ln().max(f64::EPSILON);
    let hi = search.gamma_max.ln();
    if !(hi > lo) {
        return Err(ThermoError::InvalidGamma(search.gamma_max));
    }
    let rate = |lg: f64| {
        let gamma = lg.exp();
        let spec = OttoCycleSpec { tau_c, tau_h, gamma };
        cooling_rate(&spec, model).unwrap_or(0.0)
    };
    let (lg, r_star) = grid_then_golden_max(rate, lo, hi, search.grid_points.max(3), search.tol);
    let gamma_star = lg.exp();
    Ok(CoolingOptimum {
        tau_c,
        tau_h,
        model,
        gamma_star,
        r_star,
        q_star: heat_extracted(&OttoCycleSpec { tau_c, tau_h, gamma: gamma_star }),
        bound: third_law_bound(tau_c),
    })
}
