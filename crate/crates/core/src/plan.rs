use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    propagate_schedule, propagate_schedule_sampled, state_at, ControlSchedule, DynamicsError,
    NormalizedState, Trajectory, TrajectorySample,
};
use crate::inverse::{InverseError, PolynomialPlan};
use crate::optimal::{solve_optimal, OptimalError};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Optimal(#[from] OptimalError),
    #[error(transparent)]
    Inverse(#[from] InverseError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("invalid sampling step {0}")]
    InvalidStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMethod {
    Optimal,
    Inverse,
    Custom,
}

impl std::fmt::Display for PlanMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PlanMethod::Optimal => "optimal",
            PlanMethod::Inverse => "inverse",
            PlanMethod::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlanControl {
    Piecewise(ControlSchedule),
    Polynomial(PolynomialPlan),
}

/// A complete expansion protocol from `(1, 0)` to `(gamma, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionPlan {
    pub gamma: f64,
    pub duration: f64,
    pub method: PlanMethod,
    pub control: PlanControl,
    /// States at the control switches (empty for continuous controls).
    pub switch_states: Vec<NormalizedState>,
}

impl ExpansionPlan {
    pub fn optimal(gamma: f64) -> Result<Self, PlanError> {
        let sol = solve_optimal(gamma)?;
        Ok(ExpansionPlan {
            gamma,
            duration: sol.total,
            method: PlanMethod::Optimal,
            control: PlanControl::Piecewise(sol.schedule()),
            switch_states: vec![sol.switch_state],
        })
    }

    pub fn inverse(gamma: f64) -> Result<Self, PlanError> {
        let poly = PolynomialPlan::fastest(gamma)?;
        Ok(ExpansionPlan {
            gamma,
            duration: poly.duration,
            method: PlanMethod::Inverse,
            control: PlanControl::Polynomial(poly),
            switch_states: Vec::new(),
        })
    }

    pub fn from_method(gamma: f64, method: PlanMethod) -> Result<Self, PlanError> {
        match method {
            PlanMethod::Inverse => Self::inverse(gamma),
            _ => Self::optimal(gamma),
        }
    }

    /// Wraps an arbitrary piecewise-constant schedule.
    pub fn custom(gamma: f64, schedule: ControlSchedule) -> Result<Self, PlanError> {
        let traj = propagate_schedule(NormalizedState::REST, &schedule)?;
        let n = traj.len();
        let switch_states = traj
            .samples
            .iter()
            .skip(1)
            .take(n.saturating_sub(2))
            .map(|s| s.state)
            .collect();
        Ok(ExpansionPlan {
            gamma,
            duration: schedule.total_duration(),
            method: PlanMethod::Custom,
            control: PlanControl::Piecewise(schedule),
            switch_states,
        })
    }

    pub fn schedule(&self) -> Option<&ControlSchedule> {
        match &self.control {
            PlanControl::Piecewise(s) => Some(s),
            PlanControl::Polynomial(_) => None,
        }
    }

    pub fn control_at(&self, t: f64) -> f64 {
        match &self.control {
            PlanControl::Piecewise(s) => s.control_at(t),
            PlanControl::Polynomial(p) => {
                if (0.0..=self.duration).contains(&t) {
                    p.control(t)
                } else {
                    0.0
                }
            }
        }
    }

    /// Closed-form state at time `t`, clamped to `[0, T]`.
    pub fn state_at(&self, t: f64) -> NormalizedState {
        let t = t.clamp(0.0, self.duration);
        match &self.control {
            PlanControl::Piecewise(s) => state_at(NormalizedState::REST, s, t),
            PlanControl::Polynomial(p) => p.state_at(t),
        }
    }

    pub fn endpoint_error(&self) -> f64 {
        self.state_at(self.duration)
            .distance(&NormalizedState::target(self.gamma))
    }

    /// Trajectory sampled every `step`, always including the end point.
    pub fn sample(&self, step: f64) -> Result<Trajectory, PlanError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(PlanError::InvalidStep(step));
        }
        match &self.control {
            PlanControl::Piecewise(s) => {
                Ok(propagate_schedule_sampled(NormalizedState::REST, s, Some(step))?)
            }
            PlanControl::Polynomial(p) => {
                let n = (self.duration / step).ceil() as usize;
                let samples = (0..=n)
                    .map(|k| {
                        let t = (k as f64 * step).min(self.duration);
                        TrajectorySample {
                            t,
                            state: p.state_at(t),
                            u: self.control_at(t),
                        }
                    })
                    .collect();
                Ok(Trajectory { samples })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Segment;

    #[test]
    fn both_methods_land_on_target() {
        for g in [1.5, 4.0, 10.0] {
            assert!(ExpansionPlan::optimal(g).unwrap().endpoint_error() < 1e-9);
            assert!(ExpansionPlan::inverse(g).unwrap().endpoint_error() < 1e-12);
        }
    }

    #[test]
    fn custom_plan_records_switches() {
        let sched = ControlSchedule::new(vec![
            Segment::new(0.5, -1.0),
            Segment::new(0.2, 1.0),
            Segment::new(0.1, -1.0),
        ])
        .unwrap();
        let plan = ExpansionPlan::custom(2.0, sched).unwrap();
        assert_eq!(plan.switch_states.len(), 2);
        assert_eq!(plan.method, PlanMethod::Custom);
    }

    #[test]
    fn sampling_covers_horizon() {
        for plan in [ExpansionPlan::optimal(3.0).unwrap(), ExpansionPlan::inverse(3.0).unwrap()] {
            let traj = plan.sample(0.01).unwrap();
            assert_eq!(traj.samples[0].t, 0.0);
            assert!((traj.final_time() - plan.duration).abs() < 1e-12);
            assert!(plan.sample(0.0).is_err());
        }
    }
}
