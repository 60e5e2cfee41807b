//! Wall motions and stiffness schedules that drive the Schrödinger solver.

use std::sync::Arc;

use crate::dynamics::{integrate_arbitrary, ControlSchedule, DynamicsError, NormalizedState};
use crate::plan::ExpansionPlan;

/// Wall kinematics and trap stiffness at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallSample {
    pub a: f64,
    pub a_dot: f64,
    pub a_ddot: f64,
    pub stiffness: f64,
}

impl WallSample {
    /// Coefficient of `y^2` in the co-moving residual potential,
    /// `a (a k + a'') / 2`. Zero when the stiffness is slaved to the wall.
    pub fn residual(&self) -> f64 {
        0.5 * self.a * (self.a * self.stiffness + self.a_ddot)
    }
}

pub trait WallProtocol: Sync {
    fn sample(&self, t: f64) -> WallSample;
    fn duration(&self) -> f64;
}

/// An expansion plan with the stiffness slaved to the wall, `k = -a''/a`.
#[derive(Debug, Clone)]
pub struct SlavedPlan {
    pub plan: ExpansionPlan,
}

impl SlavedPlan {
    pub fn new(plan: ExpansionPlan) -> Self {
        SlavedPlan { plan }
    }
}

impl WallProtocol for SlavedPlan {
    fn sample(&self, t: f64) -> WallSample {
        let x = self.plan.state_at(t);
        let u = self.plan.control_at(t);
        WallSample {
            a: x.x1,
            a_dot: x.x2,
            a_ddot: -u * x.x1,
            stiffness: u,
        }
    }

    fn duration(&self) -> f64 {
        self.plan.duration
    }
}

/// Wall obtained by integrating `a'' = -k a` for a prescribed stiffness,
/// tabulated at a fixed step and evaluated between nodes by one RK4 sub-step.
#[derive(Clone)]
pub struct TabulatedWall {
    step: f64,
    duration: f64,
    states: Vec<NormalizedState>,
    control: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for TabulatedWall {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TabulatedWall")
            .field("step", &self.step)
            .field("duration", &self.duration)
            .field("nodes", &self.states.len())
            .finish()
    }
}

impl TabulatedWall {
    pub fn integrate<F>(control: F, duration: f64, step: f64) -> Result<Self, DynamicsError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let traj = integrate_arbitrary(NormalizedState::REST, &control, duration, step)?;
        let n = traj.len().saturating_sub(1).max(1);
        Ok(TabulatedWall {
            step: duration / n as f64,
            duration,
            states: traj.samples.iter().map(|s| s.state).collect(),
            control: Arc::new(control),
        })
    }

    pub fn final_state(&self) -> NormalizedState {
        *self.states.last().expect("table has at least one node")
    }

    pub fn control(&self, t: f64) -> f64 {
        (self.control)(t)
    }

    pub fn state_at(&self, t: f64) -> NormalizedState {
        if t >= self.duration {
            // control is off past the end: free drift
            let end = self.final_state();
            return NormalizedState::new(end.x1 + end.x2 * (t - self.duration), end.x2);
        }
        let t = t.max(0.0);
        let i = ((t / self.step).floor() as usize).min(self.states.len() - 1);
        let t0 = i as f64 * self.step;
        let h = t - t0;
        let x = self.states[i];
        if h <= 0.0 {
            return x;
        }
        let u = |s: f64| self.control(s);
        let f = |x: NormalizedState, s: f64| x.derivative(u(s));
        let k1 = f(x, t0);
        let k2 = f(NormalizedState::new(x.x1 + 0.5 * h * k1.x1, x.x2 + 0.5 * h * k1.x2), t0 + 0.5 * h);
        let k3 = f(NormalizedState::new(x.x1 + 0.5 * h * k2.x1, x.x2 + 0.5 * h * k2.x2), t0 + 0.5 * h);
        let k4 = f(NormalizedState::new(x.x1 + h * k3.x1, x.x2 + h * k3.x2), t);
        NormalizedState::new(
            x.x1 + h / 6.0 * (k1.x1 + 2.0 * k2.x1 + 2.0 * k3.x1 + k4.x1),
            x.x2 + h / 6.0 * (k1.x2 + 2.0 * k2.x2 + 2.0 * k3.x2 + k4.x2),
        )
    }
}

impl WallProtocol for TabulatedWall {
    fn sample(&self, t: f64) -> WallSample {
        let x = self.state_at(t);
        let k = if t >= 0.0 && t <= self.duration { self.control(t) } else { 0.0 };
        WallSample {
            a: x.x1,
            a_dot: x.x2,
            a_ddot: -k * x.x1,
            stiffness: k,
        }
    }

    fn duration(&self) -> f64 {
        self.duration
    }
}

/// A bang schedule whose jumps (including the boundary jumps from and to
/// zero) are replaced by linear ramps of duration `delta`, total time fixed.
/// Boundary ramps sit inside `[0, T]`; interior ramps are centred on the
/// switch.
#[derive(Debug, Clone, PartialEq)]
pub struct RampedSchedule {
    knots: Vec<(f64, f64)>,
    duration: f64,
    pub delta: f64,
}

impl RampedSchedule {
    pub fn new(schedule: &ControlSchedule, delta: f64) -> Result<Self, DynamicsError> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(DynamicsError::InvalidStep(delta));
        }
        let segs = schedule.segments();
        let duration = schedule.total_duration();
        let mut knots = vec![(0.0, 0.0)];
        let mut t = 0.0;
        for (i, s) in segs.iter().enumerate() {
            let lead = if i == 0 { delta } else { 0.5 * delta };
            let trail = if i + 1 == segs.len() { delta } else { 0.5 * delta };
            if lead + trail > s.duration + 1e-15 {
                return Err(DynamicsError::InvalidSegment {
                    index: i,
                    duration: s.duration,
                    control: s.control,
                });
            }
            knots.push((t + lead, s.control));
            knots.push((t + s.duration - trail, s.control));
            t += s.duration;
        }
        knots.push((duration, 0.0));
        Ok(RampedSchedule {
            knots,
            duration,
            delta,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.duration {
            return 0.0;
        }
        // last knot at or before t
        let i = self.knots.partition_point(|k| k.0 <= t);
        if i == 0 {
            return self.knots[0].1;
        }
        if i >= self.knots.len() {
            return self.knots[self.knots.len() - 1].1;
        }
        let (t0, v0) = self.knots[i - 1];
        let (t1, v1) = self.knots[i];
        if t1 <= t0 {
            return v1;
        }
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Wall driven by this stiffness, tabulated at `step`.
    pub fn wall(&self, step: f64) -> Result<TabulatedWall, DynamicsError> {
        let me = self.clone();
        TabulatedWall::integrate(move |t| me.value(t), self.duration, step)
    }
}

/// Adds `offset(t)` to the stiffness of `inner` without touching the wall,
/// so the co-moving residual potential no longer vanishes.
pub struct StiffnessOffset<P, F> {
    pub inner: P,
    pub offset: F,
}

impl<P, F> WallProtocol for StiffnessOffset<P, F>
where
    P: WallProtocol,
    F: Fn(f64) -> f64 + Sync,
{
    fn sample(&self, t: f64) -> WallSample {
        let mut s = self.inner.sample(t);
        s.stiffness += (self.offset)(t);
        s
    }

    fn duration(&self) -> f64 {
        self.inner.duration()
    }
}

/// `int_0^t a(t')^{-2} dt'` by composite Simpson with `intervals` panels
/// (rounded up to even).
pub fn phase_integral<P: WallProtocol + ?Sized>(protocol: &P, t: f64, intervals: usize) -> f64 {
    let n = (intervals.max(2) + 1) & !1;
    let h = t / n as f64;
    let f = |s: f64| protocol.sample(s).a.powi(-2);
    let mut acc = f(0.0) + f(t);
    for i in 1..n {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Segment;
    use approx::assert_abs_diff_eq;

    #[test]
    fn slaved_plan_has_no_residual() {
        let p = SlavedPlan::new(ExpansionPlan::optimal(4.0).unwrap());
        for i in 0..=20 {
            let t = p.duration() * i as f64 / 20.0;
            assert_eq!(p.sample(t).residual(), 0.0);
        }
        let inv = SlavedPlan::new(ExpansionPlan::inverse(4.0).unwrap());
        let s = inv.sample(0.3 * inv.duration());
        assert_abs_diff_eq!(s.residual(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ramp_knots() {
        let sched = ControlSchedule::new(vec![Segment::new(1.0, -1.0), Segment::new(0.5, 1.0)])
            .unwrap()
            .with_boundary_jumps(true);
        let r = RampedSchedule::new(&sched, 0.1).unwrap();
        assert_eq!(r.value(0.0), 0.0);
        assert_abs_diff_eq!(r.value(0.05), -0.5, epsilon = 1e-12);
        assert_eq!(r.value(0.5), -1.0);
        assert_abs_diff_eq!(r.value(1.0), 0.0, epsilon = 1e-12);
        assert_eq!(r.value(1.2), 1.0);
        assert_abs_diff_eq!(r.value(1.45), 0.5, epsilon = 1e-12);
        assert_eq!(r.value(1.5), 0.0);
        assert!(RampedSchedule::new(&sched, 0.6).is_err());

        // zero ramp reproduces the bangs
        let r0 = RampedSchedule::new(&sched, 0.0).unwrap();
        for t in [0.0, 0.3, 0.999, 1.0, 1.2, 1.49] {
            assert_eq!(r0.value(t), sched.control_at(t), "t = {t}");
        }
    }

    #[test]
    fn tabulated_wall_tracks_closed_form() {
        let wall = TabulatedWall::integrate(|_| -1.0, 2.0, 1e-3).unwrap();
        for t in [0.0, 0.4567, 1.0, 1.9999, 2.0] {
            let x = wall.state_at(t);
            assert_abs_diff_eq!(x.x1, t.cosh(), epsilon = 1e-10);
            assert_abs_diff_eq!(x.x2, t.sinh(), epsilon = 1e-10);
        }
    }

    #[test]
    fn phase_integral_of_static_box() {
        let p = SlavedPlan::new(ExpansionPlan::optimal(2.0).unwrap());
        // a >= 1 throughout, so the integral is below the elapsed time
        let i = phase_integral(&p, p.duration(), 1000);
        assert!(i > 0.0 && i < p.duration());
        let still = TabulatedWall::integrate(|_| 0.0, 3.0, 0.01).unwrap();
        assert_abs_diff_eq!(phase_integral(&still, 3.0, 10), 3.0, epsilon = 1e-12);
    }
}
