//! Acceptance criteria, one line each. Exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use quantum_piston::cli::{sweep_points, Spacing};
use quantum_piston::dynamics::{propagate_schedule, NormalizedState};
use quantum_piston::inverse::{min_feasible_duration, poly_control};
use quantum_piston::optimal::{brute_force_min_time, build_certificate, solve_optimal, OracleConfig};
use quantum_piston::plan::ExpansionPlan;
use quantum_piston::quantum::{
    evolve_pde, exact_state, ModeExpansion, PdeOptions, SlavedPlan, DEFAULT_GRID,
};
use quantum_piston::thermo::{max_cooling_rate, ExpansionTimeModel};

// Pinned tolerances.
const OPT_TIME_TOL: f64 = 1e-4;
const INV_TIME_TOL: f64 = 1e-3;
const INV_MIN_U_BELOW: f64 = 1e-6;
const INV_MIN_U_ABOVE: f64 = 1e-3;
const ENDPOINT_TOL: f64 = 1e-9;
const ORACLE_GRID: f64 = 1e-3;
const ORACLE_ENDPOINT_TOL: f64 = 1e-6;
const H_TOL: f64 = 1e-6;
const SWITCH_TOL: f64 = 1e-6;
const ASYMPTOTE_TOL: f64 = 1e-3;
const FIDELITY_MIN: f64 = 0.9999;
const POPULATION_TOL: f64 = 1e-4;
const ENERGY_TOL: f64 = 1e-4;
const PDE_DT: f64 = 1e-4;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: u32, ok: bool, what: &str, detail: String, started: Instant) {
        if !ok {
            self.failed += 1;
        }
        println!(
            "{} [{id}] {what}: {detail} ({:.2}s)",
            if ok { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
}

fn optimal_time(r: &mut Report) {
    let t0 = Instant::now();
    let total = solve_optimal(10.0).unwrap().total;
    r.line(
        1,
        (total - 3.4295).abs() <= OPT_TIME_TOL,
        "optimal time at gamma=10",
        format!("T = {total:.6} vs 3.4295 +- {OPT_TIME_TOL:e}"),
        t0,
    );
}

fn inverse_time(r: &mut Report) {
    let t0 = Instant::now();
    let t = min_feasible_duration(10.0).unwrap();
    let n = 100_000;
    let min_u = (0..=n)
        .map(|i| poly_control(10.0, t, i as f64 / n as f64))
        .fold(f64::INFINITY, f64::min);
    let ok = (t - 6.2511).abs() <= INV_TIME_TOL
        && (-1.0 - INV_MIN_U_BELOW..=-1.0 + INV_MIN_U_ABOVE).contains(&min_u);
    r.line(
        2,
        ok,
        "inverse-engineering minimum duration at gamma=10",
        format!("T = {t:.6} vs 6.2511 +- {INV_TIME_TOL:e}, min u = {min_u:.9}"),
        t0,
    );
}

fn endpoint_accuracy(r: &mut Report) {
    let t0 = Instant::now();
    let mut worst = (0.0, 1.0);
    for i in 1..=50 {
        let gamma = 10f64.powf(4.0 * i as f64 / 50.0);
        let sched = solve_optimal(gamma).unwrap().schedule();
        let end = propagate_schedule(NormalizedState::REST, &sched)
            .unwrap()
            .final_state()
            .unwrap();
        let err = end.distance(&NormalizedState::target(gamma));
        if err > worst.0 {
            worst = (err, gamma);
        }
    }
    r.line(
        3,
        worst.0 <= ENDPOINT_TOL,
        "endpoint accuracy over 50 log-spaced gamma in (1, 1e4]",
        format!("max |x(T) - (gamma, 0)| = {:.3e} at gamma = {:.4}", worst.0, worst.1),
        t0,
    );
}

fn oracle(r: &mut Report) {
    for gamma in [1.5, 2.0, 5.0, 10.0] {
        let t0 = Instant::now();
        let closed = solve_optimal(gamma).unwrap().total;
        let cfg = OracleConfig::new(gamma, 3, ORACLE_GRID, ORACLE_ENDPOINT_TOL);
        let (ok, detail) = match brute_force_min_time(&cfg) {
            Ok(res) => {
                let floor = closed - (ORACLE_GRID + ORACLE_ENDPOINT_TOL);
                (
                    res.duration >= floor && res.effective_switches == 1 && t0.elapsed().as_secs() < 60,
                    format!(
                        "best {:.9} vs closed form {closed:.9} (floor {floor:.6}), {} effective switch(es), {} coarse candidates",
                        res.duration, res.effective_switches, res.evaluated
                    ),
                )
            }
            Err(e) => (false, e.to_string()),
        };
        r.line(4, ok, &format!("oracle optimality at gamma={gamma}"), detail, t0);
    }
}

fn certificate(r: &mut Report) {
    for gamma in [2.0, 10.0] {
        let t0 = Instant::now();
        let sol = solve_optimal(gamma).unwrap();
        let cert = build_certificate(&sol).unwrap();
        let zeros = &cert.phi_zero_times;
        let ok = cert.pass
            && cert.max_abs_h <= H_TOL
            && zeros.len() == 1
            && (zeros[0] - sol.t_x).abs() <= SWITCH_TOL;
        r.line(
            5,
            ok,
            &format!("PMP certificate at gamma={gamma}"),
            format!(
                "max|H| = {:.3e}, zeros {:?} vs t_x = {:.9}, violations {:?}",
                cert.max_abs_h, zeros, sol.t_x, cert.violations
            ),
            t0,
        );
    }
}

fn asymptotics(r: &mut Report) {
    let t0 = Instant::now();
    let gamma: f64 = 1e4;
    let offset = solve_optimal(gamma).unwrap().total - gamma.ln();
    let expected = std::f64::consts::SQRT_2.ln() + std::f64::consts::FRAC_PI_4;
    r.line(
        6,
        (offset - expected).abs() <= ASYMPTOTE_TOL,
        "large-gamma asymptote at gamma=1e4",
        format!("T - ln gamma = {offset:.7} vs ln sqrt2 + pi/4 = {expected:.7}"),
        t0,
    );
}

fn quantum_exactness(r: &mut Report) {
    let t0 = Instant::now();
    let gamma = 4.0;
    let plan = ExpansionPlan::optimal(gamma).unwrap();
    let protocol = SlavedPlan::new(plan.clone());
    let opts = PdeOptions::covering(plan.duration, PDE_DT);

    let ground = exact_state(&ModeExpansion::ground(), DEFAULT_GRID, 0.0, 1.0, 0.0, &[0.0]).unwrap();
    let run = evolve_pde(&ground, &protocol, &opts).unwrap();
    let fid = run.state.eigen_fidelity(1, gamma);

    let pair = ModeExpansion::equal_superposition(2).unwrap();
    let start = exact_state(&pair, DEFAULT_GRID, 0.0, 1.0, 0.0, &[0.0, 0.0]).unwrap();
    let end = evolve_pde(&start, &protocol, &opts).unwrap().state;
    let p0 = start.populations(2);
    let p1 = end.populations(2);
    let pop_err = p0.iter().zip(&p1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let modes = quantum_piston::quantum::DEFAULT_MODES;
    let ratio = end.mean_energy(modes) / start.mean_energy(modes);
    let energy_err = (ratio * gamma * gamma - 1.0).abs();

    let ok = fid >= FIDELITY_MIN
        && pop_err <= POPULATION_TOL
        && energy_err <= ENERGY_TOL
        && t0.elapsed().as_secs() < 120;
    r.line(
        7,
        ok,
        "quantum exactness at gamma=4, N=512",
        format!(
            "F = {fid:.12}, population drift {pop_err:.3e}, E(T)/E(0) * gamma^2 - 1 = {energy_err:.3e}"
        ),
        t0,
    );
}

fn third_law(r: &mut Report) {
    let t0 = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    let mut prev = f64::INFINITY;
    for tau_c in [1e-2, 1e-3, 1e-4] {
        let opt = max_cooling_rate(tau_c, 1.0, ExpansionTimeModel::Optimal).unwrap();
        let bound = opt.bound.unwrap();
        let scaled = opt.r_star / tau_c;
        ok &= opt.r_star < bound && scaled < prev;
        prev = scaled;
        parts.push(format!(
            "tau_c={tau_c:e}: R*={:.4e} < {bound:.4e}, R*/tau_c={scaled:.4}",
            opt.r_star
        ));
    }
    ok &= t0.elapsed().as_secs() < 10;
    r.line(8, ok, "third-law bound", parts.join("; "), t0);
}

fn dominance(r: &mut Report) {
    let t0 = Instant::now();
    let gammas = sweep_points(1.1, 10.0, 50, Spacing::Linear).unwrap();
    let worst = gammas
        .iter()
        .map(|&g| min_feasible_duration(g).unwrap() - solve_optimal(g).unwrap().total)
        .fold(f64::INFINITY, f64::min);
    r.line(
        9,
        worst > 0.0 && gammas.len() == 50,
        "optimal faster than inverse engineering at 50 sweep points",
        format!("min T_inverse - T_optimal = {worst:.6}"),
        t0,
    );
}

fn main() -> ExitCode {
    let mut r = Report { failed: 0 };
    optimal_time(&mut r);
    inverse_time(&mut r);
    endpoint_accuracy(&mut r);
    oracle(&mut r);
    certificate(&mut r);
    asymptotics(&mut r);
    quantum_exactness(&mut r);
    third_law(&mut r);
    dominance(&mut r);
    if r.failed == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} check(s) failed", r.failed);
        ExitCode::FAILURE
    }
}
