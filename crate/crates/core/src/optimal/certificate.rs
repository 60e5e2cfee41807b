use serde::{Deserialize, Serialize};

use super::{check_gamma, OptimalError, OptimalSolution};
use crate::dynamics::{propagate_constant, ControlSchedule, NormalizedState};

/// Multiplier of the running cost; any negative value is equivalent.
pub const LAMBDA0: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateOptions {
    /// Maximum adjoint integration step.
    pub step: f64,
    /// Pass threshold on `max |H|`.
    pub hamiltonian_tol: f64,
    /// `|Phi|` below this is treated as zero for sign checks.
    pub zero_tol: f64,
    /// Keep every n-th adjoint sample in the returned certificate.
    pub store_every: usize,
    /// Allowed endpoint miss, relative to `gamma`.
    pub endpoint_tol: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions {
            step: 1e-5,
            hamiltonian_tol: 1e-6,
            zero_tol: 1e-9,
            store_every: 100,
            endpoint_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjointSample {
    pub t: f64,
    pub state: NormalizedState,
    pub u: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Switching function `-lambda2`.
    pub phi: f64,
    pub hamiltonian: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CertificateViolation {
    /// `max |H|` above the tolerance.
    HamiltonianNonzero { max_abs_h: f64 },
    /// The switching function has more zeros than the schedule has switches.
    ExtraSwitchingZeros { count: usize, expected: usize },
    /// `u != sign(Phi)` on arc `arc` at time `t`.
    SignMismatch { arc: usize, t: f64, u: f64, phi: f64 },
    /// `lambda(t) = 0`.
    VanishingAdjoint { t: f64 },
    /// A zero of the switching function does not sit on a switch.
    ZeroOffSwitch { t: f64, nearest_switch: f64 },
    /// The schedule does not reach `(gamma, 0)`.
    EndpointMiss { error: f64 },
    /// Terminal control is zero, so `H(T) = 0` cannot fix `lambda2(T)`.
    SingularTerminal,
}

/// Maximum principle certificate for a bang-bang schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmpCertificate {
    pub gamma: f64,
    pub lambda0: f64,
    /// Stored adjoint samples in increasing time (thinned by `store_every`).
    pub samples: Vec<AdjointSample>,
    pub max_abs_h: f64,
    pub min_lambda_norm: f64,
    pub phi_zero_times: Vec<f64>,
    pub switch_times: Vec<f64>,
    /// Distance of the propagated endpoint from `(gamma, 0)`.
    pub endpoint_error: f64,
    pub violations: Vec<CertificateViolation>,
    pub pass: bool,
}

/// Certificate for the closed-form solution.
pub fn build_certificate(solution: &OptimalSolution) -> Result<PmpCertificate, OptimalError> {
    certify_schedule(&solution.schedule(), solution.gamma, &CertificateOptions::default())
}

fn adjoint_rhs(u: f64, l: (f64, f64)) -> (f64, f64) {
    (u * l.1, -l.0)
}

/// One backward RK4 step of the adjoint system over `h > 0`.
fn adjoint_step_back(u: f64, l: (f64, f64), h: f64) -> (f64, f64) {
    let step = |a: (f64, f64), k: (f64, f64), s: f64| (a.0 - s * k.0, a.1 - s * k.1);
    let k1 = adjoint_rhs(u, l);
    let k2 = adjoint_rhs(u, step(l, k1, 0.5 * h));
    let k3 = adjoint_rhs(u, step(l, k2, 0.5 * h));
    let k4 = adjoint_rhs(u, step(l, k3, h));
    (
        l.0 - h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        l.1 - h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

fn steps_for(duration: f64, max_step: f64) -> usize {
    ((duration / max_step).ceil() as usize).max(1)
}

/// Backward integration of the adjoint across one arc.
fn back_across(u: f64, l: (f64, f64), duration: f64, max_step: f64) -> (f64, f64) {
    let n = steps_for(duration, max_step);
    let h = duration / n as f64;
    (0..n).fold(l, |acc, _| adjoint_step_back(u, acc, h))
}

/// Builds and checks a maximum principle certificate for `schedule` as a
/// candidate solution of the expansion to `(gamma, 0)`.
///
/// `lambda0 = -1`. `H(T) = 0` at the target `(gamma, 0)` fixes
/// `lambda2(T) = -1 / (gamma u(T))`; `lambda1(T)` is chosen so the switching
/// function vanishes at the last switch. The adjoint is then integrated
/// backward along the schedule's own trajectory and every sample is checked.
pub fn certify_schedule(
    schedule: &ControlSchedule,
    gamma: f64,
    opts: &CertificateOptions,
) -> Result<PmpCertificate, OptimalError> {
    check_gamma(gamma)?;
    if !(opts.step > 0.0) || opts.store_every == 0 {
        return Err(OptimalError::InvalidConfig("certificate step and stride must be positive".into()));
    }
    let segs: Vec<_> = schedule.segments().iter().copied().filter(|s| s.duration > 0.0).collect();
    if segs.is_empty() {
        return Err(OptimalError::InvalidConfig("empty schedule".into()));
    }

    // segment start states along the actual trajectory
    let mut starts = Vec::with_capacity(segs.len() + 1);
    let mut x = NormalizedState::REST;
    starts.push(x);
    for s in &segs {
        x = propagate_constant(x, s.control, s.duration);
        starts.push(x);
    }
    let endpoint_error = x.distance(&NormalizedState::target(gamma));

    let mut violations = Vec::new();
    if endpoint_error > opts.endpoint_tol * gamma {
        violations.push(CertificateViolation::EndpointMiss { error: endpoint_error });
    }
    let u_t = segs[segs.len() - 1].control;
    // lambda0 + lambda1 * 0 - lambda2 * gamma * u = 0 at the target
    let lambda2_t = if u_t != 0.0 {
        LAMBDA0 / (gamma * u_t)
    } else {
        violations.push(CertificateViolation::SingularTerminal);
        0.0
    };

    let lambda1_t = if segs.len() >= 2 {
        // lambda2 at the last switch is linear in lambda(T)
        let last = segs[segs.len() - 1];
        let e1 = back_across(last.control, (1.0, 0.0), last.duration, opts.step);
        let e2 = back_across(last.control, (0.0, 1.0), last.duration, opts.step);
        if e1.1.abs() > f64::EPSILON {
            -e2.1 * lambda2_t / e1.1
        } else {
            0.0
        }
    } else {
        0.0
    };

    let switch_times = {
        let mut t = 0.0;
        segs[..segs.len() - 1]
            .iter()
            .map(|s| {
                t += s.duration;
                t
            })
            .collect::<Vec<_>>()
    };

    // backward sweep; samples collected per arc then reversed into time order
    let total: f64 = segs.iter().map(|s| s.duration).sum();
    let mut all: Vec<AdjointSample> = Vec::new();
    let mut l = (lambda1_t, lambda2_t);
    let mut t_end = total;
    for (i, seg) in segs.iter().enumerate().rev() {
        let n = steps_for(seg.duration, opts.step);
        let h = seg.duration / n as f64;
        let x0 = starts[i];
        let mut arc: Vec<AdjointSample> = Vec::with_capacity(n + 1);
        let sample = |k: usize, l: (f64, f64)| {
            let tau = k as f64 * h;
            let x = propagate_constant(x0, seg.control, tau);
            AdjointSample {
                t: t_end - seg.duration + tau,
                state: x,
                u: seg.control,
                lambda1: l.0,
                lambda2: l.1,
                phi: -l.1,
                hamiltonian: LAMBDA0 + l.0 * x.x2 - l.1 * x.x1 * seg.control,
            }
        };
        arc.push(sample(n, l));
        for k in (0..n).rev() {
            l = adjoint_step_back(seg.control, l, h);
            arc.push(sample(k, l));
        }
        arc.reverse();
        // tag each sample with the arc index for sign checks
        for s in &arc {
            check_sample(i, s, opts, &mut violations);
        }
        all.splice(0..0, arc);
        t_end -= seg.duration;
    }

    let max_abs_h = all.iter().map(|s| s.hamiltonian.abs()).fold(0.0, f64::max);
    let min_lambda_norm = all
        .iter()
        .map(|s| s.lambda1.hypot(s.lambda2))
        .fold(f64::INFINITY, f64::min);
    if max_abs_h > opts.hamiltonian_tol {
        violations.push(CertificateViolation::HamiltonianNonzero { max_abs_h });
    }

    let phi_zero_times = switching_zeros(&all, opts.zero_tol);
    if phi_zero_times.len() > switch_times.len() {
        violations.push(CertificateViolation::ExtraSwitchingZeros {
            count: phi_zero_times.len(),
            expected: switch_times.len(),
        });
    }
    for &z in &phi_zero_times {
        let nearest = switch_times
            .iter()
            .copied()
            .min_by(|a, b| (a - z).abs().total_cmp(&(b - z).abs()));
        match nearest {
            Some(s) if (s - z).abs() <= 10.0 * opts.step => {}
            other => violations.push(CertificateViolation::ZeroOffSwitch {
                t: z,
                nearest_switch: other.unwrap_or(f64::NAN),
            }),
        }
    }

    let samples = all
        .iter()
        .enumerate()
        .filter(|(k, _)| k % opts.store_every == 0 || *k + 1 == all.len())
        .map(|(_, s)| *s)
        .collect();

    Ok(PmpCertificate {
        gamma,
        lambda0: LAMBDA0,
        samples,
        max_abs_h,
        min_lambda_norm,
        phi_zero_times,
        switch_times,
        endpoint_error,
        pass: violations.is_empty(),
        violations,
    })
}

fn check_sample(
    arc: usize,
    s: &AdjointSample,
    opts: &CertificateOptions,
    violations: &mut Vec<CertificateViolation>,
) {
    if s.lambda1 == 0.0 && s.lambda2 == 0.0 {
        violations.push(CertificateViolation::VanishingAdjoint { t: s.t });
    }
    if s.phi.abs() > opts.zero_tol && s.u != 0.0 && s.phi.signum() != s.u.signum() {
        // one report per arc is enough
        let seen = violations
            .iter()
            .any(|v| matches!(v, CertificateViolation::SignMismatch { arc: a, .. } if *a == arc));
        if !seen {
            violations.push(CertificateViolation::SignMismatch {
                arc,
                t: s.t,
                u: s.u,
                phi: s.phi,
            });
        }
    }
}

/// Sign changes of the switching function, located by linear interpolation.
fn switching_zeros(samples: &[AdjointSample], zero_tol: f64) -> Vec<f64> {
    let mut zeros = Vec::new();
    let mut prev: Option<&AdjointSample> = None;
    for s in samples.iter().filter(|s| s.phi.abs() > zero_tol) {
        if let Some(p) = prev {
            if p.phi.signum() != s.phi.signum() {
                let w = p.phi / (p.phi - s.phi);
                zeros.push(p.t + w * (s.t - p.t));
            }
        }
        prev = Some(s);
    }
    zeros
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Segment;
    use crate::optimal::solve_optimal;
    use approx::assert_abs_diff_eq;

    #[test]
    fn optimal_gamma_ten_passes() {
        let sol = solve_optimal(10.0).unwrap();
        let cert = build_certificate(&sol).unwrap();
        assert!(cert.pass, "{:?}", cert.violations);
        assert_eq!(cert.phi_zero_times.len(), 1);
        assert_abs_diff_eq!(cert.phi_zero_times[0], sol.t_x, epsilon = 1e-6);
        assert!(cert.max_abs_h <= 1e-6);
        assert!(cert.min_lambda_norm > 0.0);
        assert_eq!(cert.lambda0, -1.0);
    }

    #[test]
    fn optimal_gamma_two_passes_tightly() {
        let cert = build_certificate(&solve_optimal(2.0).unwrap()).unwrap();
        assert!(cert.pass);
        assert!(cert.max_abs_h < 1e-8, "max|H| = {}", cert.max_abs_h);
    }

    #[test]
    fn control_follows_switching_sign() {
        let cert = build_certificate(&solve_optimal(5.0).unwrap()).unwrap();
        for s in cert.samples.iter().filter(|s| s.phi.abs() > 1e-9) {
            assert_eq!(s.u.signum(), s.phi.signum(), "t = {}", s.t);
        }
    }

    #[test]
    fn reversed_arcs_fail() {
        let sol = solve_optimal(10.0).unwrap();
        let cert =
            certify_schedule(&sol.reversed_schedule(), 10.0, &CertificateOptions::default()).unwrap();
        assert!(!cert.pass);
        // Y then X never reaches the target, so H(T) = 0 cannot hold on the real path
        assert!(cert
            .violations
            .iter()
            .any(|v| matches!(v, CertificateViolation::EndpointMiss { .. })));
        assert!(cert
            .violations
            .iter()
            .any(|v| matches!(v, CertificateViolation::HamiltonianNonzero { .. })));
    }

    #[test]
    fn extra_arc_is_not_extremal() {
        // XYX with a short trailing X arc cannot satisfy the sign condition
        let sol = solve_optimal(3.0).unwrap();
        let sched = ControlSchedule::new(vec![
            Segment::new(sol.t_x, -1.0),
            Segment::new(sol.t_y, 1.0),
            Segment::new(0.1, -1.0),
        ])
        .unwrap();
        let cert = certify_schedule(&sched, 3.0, &CertificateOptions::default()).unwrap();
        assert!(!cert.pass);
    }

    #[test]
    fn rejects_bad_inputs() {
        let sched = solve_optimal(2.0).unwrap().schedule();
        assert!(certify_schedule(&sched, 0.5, &CertificateOptions::default()).is_err());
        assert!(certify_schedule(&ControlSchedule::empty(), 2.0, &CertificateOptions::default()).is_err());
    }
}
