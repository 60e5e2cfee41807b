//! Normalized piston dynamics.
//!
//! The wall obeys `x1' = x2`, `x2' = -u x1` where `x1 = a/a0` and
//! `x2 = T0 * a'/a0`, with time measured in units of `T0 = sqrt(m/k0)` and
//! `u = k/k0` the normalized stiffness of the auxiliary harmonic potential.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this magnitude the control is treated with the drift series.
pub const SMALL_CONTROL: f64 = 1e-12;

/// Default fixed step of [`integrate_arbitrary`], in units of `T0`.
pub const DEFAULT_STEP: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid segment {index}: duration {duration}, control {control}")]
    InvalidSegment {
        index: usize,
        duration: f64,
        control: f64,
    },
    #[error("invalid integration step {0}")]
    InvalidStep(f64),
    #[error("invalid horizon {0}")]
    InvalidHorizon(f64),
    #[error("inadmissible state ({x1}, {x2})")]
    InadmissibleState { x1: f64, x2: f64 },
    #[error("state constraint x1 > 0 violated at t = {time}")]
    StateConstraint {
        time: f64,
        /// Trajectory up to and including the breach point.
        partial: Box<Trajectory>,
    },
}

impl DynamicsError {
    /// The partial trajectory carried by a state-constraint breach.
    pub fn partial_trajectory(&self) -> Option<&Trajectory> {
        match self {
            DynamicsError::StateConstraint { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

/// Scaled wall position `x1` and scaled wall velocity `x2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedState {
    pub x1: f64,
    pub x2: f64,
}

impl NormalizedState {
    /// The initial condition of every expansion: wall at `a0`, at rest.
    pub const REST: NormalizedState = NormalizedState { x1: 1.0, x2: 0.0 };

    pub const fn new(x1: f64, x2: f64) -> Self {
        NormalizedState { x1, x2 }
    }

    /// Target state of an expansion by `gamma`.
    pub const fn target(gamma: f64) -> Self {
        NormalizedState { x1: gamma, x2: 0.0 }
    }

    pub fn is_admissible(&self) -> bool {
        self.x1 > 0.0 && self.x1.is_finite() && self.x2.is_finite()
    }

    pub fn distance(&self, other: &NormalizedState) -> f64 {
        (self.x1 - other.x1).hypot(self.x2 - other.x2)
    }

    /// `x1^2 - x2^2`, conserved along `u = -1` arcs.
    pub fn hyperbolic_invariant(&self) -> f64 {
        self.x1 * self.x1 - self.x2 * self.x2
    }

    /// `x1^2 + x2^2`, conserved along `u = +1` arcs.
    pub fn circular_invariant(&self) -> f64 {
        self.x1 * self.x1 + self.x2 * self.x2
    }

    /// Vector field of the normalized system under control `u`.
    pub fn derivative(&self, u: f64) -> NormalizedState {
        NormalizedState::new(self.x2, -u * self.x1)
    }

    fn axpy(&self, h: f64, d: &NormalizedState) -> NormalizedState {
        NormalizedState::new(self.x1 + h * d.x1, self.x2 + h * d.x2)
    }
}

/// A constant-control arc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Duration in units of `T0`.
    pub duration: f64,
    /// Normalized control in `[-1, 1]`.
    pub control: f64,
}

impl Segment {
    pub const fn new(duration: f64, control: f64) -> Self {
        Segment { duration, control }
    }
}

/// Piecewise-constant control `u(t)`.
///
/// `boundary_jumps` records that `u(0) = u(T) = 0` is imposed by
/// instantaneous jumps at both ends; they carry no duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    segments: Vec<Segment>,
    boundary_jumps: bool,
}

impl ControlSchedule {
    pub fn new(segments: Vec<Segment>) -> Result<Self, DynamicsError> {
        for (index, s) in segments.iter().enumerate() {
            let ok = s.duration.is_finite()
                && s.duration >= 0.0
                && s.control.is_finite()
                && s.control.abs() <= 1.0;
            if !ok {
                return Err(DynamicsError::InvalidSegment {
                    index,
                    duration: s.duration,
                    control: s.control,
                });
            }
        }
        Ok(ControlSchedule {
            segments,
            boundary_jumps: false,
        })
    }

    pub fn empty() -> Self {
        ControlSchedule {
            segments: Vec::new(),
            boundary_jumps: false,
        }
    }

    pub fn with_boundary_jumps(mut self, jumps: bool) -> Self {
        self.boundary_jumps = jumps;
        self
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn boundary_jumps(&self) -> bool {
        self.boundary_jumps
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Start times of every segment after the first.
    pub fn switch_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = Vec::with_capacity(self.segments.len().saturating_sub(1));
        for s in self.segments.iter().take(self.segments.len().saturating_sub(1)) {
            t += s.duration;
            out.push(t);
        }
        out
    }

    /// Right-continuous control value. Outside `[0, T)` this is the jump
    /// value 0 when boundary jumps are set, the nearest arc value otherwise.
    pub fn control_at(&self, t: f64) -> f64 {
        let total = self.total_duration();
        if t < 0.0 || t >= total {
            if self.boundary_jumps || self.segments.is_empty() {
                return 0.0;
            }
            return if t < 0.0 {
                self.segments[0].control
            } else {
                self.segments[self.segments.len() - 1].control
            };
        }
        let mut start = 0.0;
        for s in &self.segments {
            if t < start + s.duration {
                return s.control;
            }
            start += s.duration;
        }
        self.segments.last().map_or(0.0, |s| s.control)
    }

    /// Drops zero-duration arcs and merges neighbours with equal control.
    pub fn simplified(&self, min_duration: f64) -> ControlSchedule {
        let mut out: Vec<Segment> = Vec::new();
        for s in self.segments.iter().filter(|s| s.duration > min_duration) {
            match out.last_mut() {
                Some(last) if last.control == s.control => last.duration += s.duration,
                _ => out.push(*s),
            }
        }
        ControlSchedule {
            segments: out,
            boundary_jumps: self.boundary_jumps,
        }
    }
}

/// Exact flow of the normalized system for a constant control.
pub fn propagate_constant(state: NormalizedState, u: f64, dt: f64) -> NormalizedState {
    let NormalizedState { x1, x2 } = state;
    if u < -SMALL_CONTROL {
        let w = (-u).sqrt();
        let (s, c) = ((w * dt).sinh(), (w * dt).cosh());
        NormalizedState::new(x1 * c + x2 * s / w, x1 * w * s + x2 * c)
    } else if u > SMALL_CONTROL {
        let w = u.sqrt();
        let (s, c) = (w * dt).sin_cos();
        NormalizedState::new(x1 * c + x2 * s / w, -x1 * w * s + x2 * c)
    } else {
        // first order in u around the free drift
        let t2 = dt * dt;
        NormalizedState::new(
            x1 + x2 * dt - u * (x1 * t2 / 2.0 + x2 * t2 * dt / 6.0),
            x2 - u * (x1 * dt + x2 * t2 / 2.0),
        )
    }
}

/// Earliest time in `[0, dt]` at which the constant-control arc starting at
/// `state` reaches `x1 <= 0`, if any.
pub fn first_nonpositive_time(state: NormalizedState, u: f64, dt: f64) -> Option<f64> {
    let NormalizedState { x1, x2 } = state;
    if x1 <= 0.0 {
        return Some(0.0);
    }
    let hit = if u < -SMALL_CONTROL {
        let w = (-u).sqrt();
        if x2 >= 0.0 {
            None
        } else {
            let r = x1 * w / -x2;
            (r < 1.0).then(|| r.atanh() / w)
        }
    } else if u > SMALL_CONTROL {
        let w = u.sqrt();
        let theta = (x2 / w).atan2(x1);
        Some((std::f64::consts::FRAC_PI_2 + theta) / w)
    } else if x2 < 0.0 {
        Some(x1 / -x2)
    } else {
        None
    };
    hit.filter(|&t| t <= dt)
}

/// One time-stamped point of a trajectory; `u` is the control applied from `t` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: NormalizedState,
    pub u: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<NormalizedState> {
        self.samples.last().map(|s| s.state)
    }

    pub fn final_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn push(&mut self, t: f64, state: NormalizedState, u: f64) {
        self.samples.push(TrajectorySample { t, state, u });
    }
}

fn check_initial(state: NormalizedState) -> Result<(), DynamicsError> {
    if state.x1.is_finite() && state.x2.is_finite() {
        Ok(())
    } else {
        Err(DynamicsError::InadmissibleState {
            x1: state.x1,
            x2: state.x2,
        })
    }
}

fn breach(time: f64, mut partial: Trajectory, state: NormalizedState, u: f64) -> DynamicsError {
    partial.push(time, state, u);
    DynamicsError::StateConstraint {
        time,
        partial: Box::new(partial),
    }
}

/// Composes exact segment flows, recording segment boundaries only.
pub fn propagate_schedule(
    state: NormalizedState,
    schedule: &ControlSchedule,
) -> Result<Trajectory, DynamicsError> {
    propagate_schedule_sampled(state, schedule, None)
}

/// Composes exact segment flows. With `output_step`, also records
/// intermediate points at that spacing inside every segment.
pub fn propagate_schedule_sampled(
    state: NormalizedState,
    schedule: &ControlSchedule,
    output_step: Option<f64>,
) -> Result<Trajectory, DynamicsError> {
    check_initial(state)?;
    if let Some(step) = output_step {
        if !(step > 0.0 && step.is_finite()) {
            return Err(DynamicsError::InvalidStep(step));
        }
    }
    let mut traj = Trajectory::default();
    let first_u = schedule.segments().first().map_or(0.0, |s| s.control);
    if state.x1 <= 0.0 {
        return Err(breach(0.0, traj, state, first_u));
    }
    traj.push(
        0.0,
        state,
        if schedule.boundary_jumps() { 0.0 } else { first_u },
    );

    let mut t0 = 0.0;
    let mut current = state;
    for seg in schedule.segments() {
        if let Some(tb) = first_nonpositive_time(current, seg.control, seg.duration) {
            if let Some(step) = output_step {
                let n = (tb / step).floor() as usize;
                for k in 1..=n {
                    let dt = k as f64 * step;
                    if dt < tb {
                        traj.push(t0 + dt, propagate_constant(current, seg.control, dt), seg.control);
                    }
                }
            }
            let at = propagate_constant(current, seg.control, tb);
            return Err(breach(t0 + tb, traj, at, seg.control));
        }
        if let Some(step) = output_step {
            let n = (seg.duration / step).ceil() as usize;
            for k in 1..n {
                let dt = k as f64 * step;
                traj.push(t0 + dt, propagate_constant(current, seg.control, dt), seg.control);
            }
        }
        // the sample at a segment start carries the new control
        if let Some(last) = traj.samples.last_mut() {
            if last.t == t0 {
                last.u = seg.control;
            }
        }
        current = propagate_constant(current, seg.control, seg.duration);
        t0 += seg.duration;
        traj.push(t0, current, seg.control);
    }
    if schedule.boundary_jumps() {
        if let Some(last) = traj.samples.last_mut() {
            last.u = 0.0;
        }
    }
    Ok(traj)
}

/// State reached after time `t` along the schedule (no constraint check).
pub fn state_at(initial: NormalizedState, schedule: &ControlSchedule, t: f64) -> NormalizedState {
    let mut current = initial;
    let mut remaining = t.max(0.0);
    for seg in schedule.segments() {
        if remaining <= seg.duration {
            return propagate_constant(current, seg.control, remaining);
        }
        current = propagate_constant(current, seg.control, seg.duration);
        remaining -= seg.duration;
    }
    // past the end the control is off: free drift
    propagate_constant(current, 0.0, remaining)
}

/// Fixed-step classical Runge-Kutta integration for an arbitrary control
/// `u(t)` over `[0, horizon]`. The step is shrunk so that an integer number
/// of steps covers the horizon exactly.
pub fn integrate_arbitrary<F>(
    state: NormalizedState,
    control: F,
    horizon: f64,
    step: f64,
) -> Result<Trajectory, DynamicsError>
where
    F: Fn(f64) -> f64,
{
    check_initial(state)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(DynamicsError::InvalidStep(step));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(DynamicsError::InvalidHorizon(horizon));
    }
    let n = (horizon / step).ceil().max(if horizon > 0.0 { 1.0 } else { 0.0 }) as usize;
    let h = if n > 0 { horizon / n as f64 } else { 0.0 };

    let mut traj = Trajectory {
        samples: Vec::with_capacity(n + 1),
    };
    if state.x1 <= 0.0 {
        return Err(breach(0.0, traj, state, control(0.0)));
    }
    let mut x = state;
    traj.push(0.0, x, control(0.0));
    for k in 0..n {
        let t = k as f64 * h;
        let um = control(t + 0.5 * h);
        let k1 = x.derivative(control(t));
        let k2 = x.axpy(0.5 * h, &k1).derivative(um);
        let k3 = x.axpy(0.5 * h, &k2).derivative(um);
        let k4 = x.axpy(h, &k3).derivative(control(t + h));
        x = NormalizedState::new(
            x.x1 + h / 6.0 * (k1.x1 + 2.0 * k2.x1 + 2.0 * k3.x1 + k4.x1),
            x.x2 + h / 6.0 * (k1.x2 + 2.0 * k2.x2 + 2.0 * k3.x2 + k4.x2),
        );
        let tn = (k + 1) as f64 * h;
        if x.x1 <= 0.0 {
            return Err(breach(tn, traj, x, control(tn)));
        }
        traj.push(tn, x, control(tn));
    }
    Ok(traj)
}
