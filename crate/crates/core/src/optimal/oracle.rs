//! Exhaustive search over bang-bang schedules with a bounded number of
//! switches. It uses nothing from the closed-form synthesis and serves as an
//! independent check of it.
//!
//! The search runs in two stages. A coarse lattice enumerates every
//! alternating `u = +-1` sequence with up to `max_switches + 1` arcs whose
//! total stays within the horizon, and keeps the closest endpoints in each
//! duration band as seeds. Each seed is then refined: the last two arcs are
//! solved by Newton iteration so the endpoint is hit, and the remaining arcs
//! move by pattern search on the `duration_grid` lattice, halving the mesh
//! from the coarse step down to the grid step, accepting only moves that
//! shorten the schedule and keep it feasible.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_gamma, OptimalError};
use crate::dynamics::{
    first_nonpositive_time, propagate_constant, propagate_schedule, ControlSchedule,
    NormalizedState, Segment,
};

/// Which bang values the search may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BangSet {
    Both,
    PlusOnly,
    MinusOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub gamma: f64,
    /// At most 3.
    pub max_switches: usize,
    /// Lattice step for the freely searched arcs.
    pub duration_grid: f64,
    /// Accepted distance of the endpoint from `(gamma, 0)`.
    pub endpoint_tol: f64,
    /// Upper bound on the total duration explored by the coarse stage.
    pub horizon: f64,
    /// Number of coarse cells across the horizon.
    pub coarse_cells: usize,
    /// Seeds kept per duration band and arc structure.
    pub seeds_per_band: usize,
    pub allowed: BangSet,
}

impl OracleConfig {
    pub fn new(gamma: f64, max_switches: usize, duration_grid: f64, endpoint_tol: f64) -> Self {
        OracleConfig {
            gamma,
            max_switches,
            duration_grid,
            endpoint_tol,
            horizon: 5.0,
            coarse_cells: 100,
            seeds_per_band: 4,
            allowed: BangSet::Both,
        }
    }

    fn validate(&self) -> Result<(), OptimalError> {
        check_gamma(self.gamma)?;
        let bad = |m: &str| Err(OptimalError::InvalidConfig(m.to_string()));
        if self.max_switches > 3 {
            return bad("max_switches must be at most 3");
        }
        if !(self.duration_grid > 0.0 && self.duration_grid.is_finite()) {
            return bad("duration grid step must be positive");
        }
        if !(self.endpoint_tol > 0.0) {
            return bad("endpoint tolerance must be positive");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be positive");
        }
        if self.coarse_cells == 0 || self.seeds_per_band == 0 {
            return bad("coarse cells and seeds per band must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Total duration of the fastest feasible schedule found.
    pub duration: f64,
    /// The schedule as searched, including zero-length arcs.
    pub raw_schedule: ControlSchedule,
    /// Arcs shorter than one grid step removed and equal neighbours merged.
    pub schedule: ControlSchedule,
    pub effective_switches: usize,
    pub endpoint_error: f64,
    /// Coarse lattice points evaluated.
    pub evaluated: u64,
}

/// Alternating sign patterns admitted by the configuration.
fn structures(cfg: &OracleConfig) -> Vec<Vec<f64>> {
    let starts: &[f64] = match cfg.allowed {
        BangSet::Both => &[-1.0, 1.0],
        BangSet::PlusOnly => &[1.0],
        BangSet::MinusOnly => &[-1.0],
    };
    let max_arcs = match cfg.allowed {
        BangSet::Both => cfg.max_switches + 1,
        _ => 1,
    };
    let mut out = Vec::new();
    for n in 1..=max_arcs {
        for &s in starts {
            out.push((0..n).map(|i| if i % 2 == 0 { s } else { -s }).collect());
        }
    }
    out
}

#[derive(Clone)]
struct Seed {
    error: f64,
    durations: Vec<f64>,
}

/// Coarse enumeration for one sign pattern; seeds bucketed by total duration.
fn coarse_seeds(
    signs: &[f64],
    target: NormalizedState,
    step: f64,
    cfg: &OracleConfig,
) -> (Vec<Seed>, u64) {
    let cells = (cfg.horizon / step).floor() as usize;
    let band_width = 0.25;
    let keep = cfg.seeds_per_band;

    // parallel over the first arc; each worker owns its own band table
    let partial: Vec<(BTreeMap<usize, Vec<Seed>>, u64)> = (0..=cells)
        .into_par_iter()
        .map(|k0| {
            let mut bands: BTreeMap<usize, Vec<Seed>> = BTreeMap::new();
            let mut count = 0u64;
            let mut durations = vec![0.0; signs.len()];
            let d0 = k0 as f64 * step;
            if first_nonpositive_time(NormalizedState::REST, signs[0], d0).is_none() {
                durations[0] = d0;
                let x = propagate_constant(NormalizedState::REST, signs[0], d0);
                descend(
                    signs, 1, x, d0, cells - k0, step, target, &mut durations, &mut bands,
                    &mut count, band_width, keep,
                );
            }
            (bands, count)
        })
        .collect();

    let mut merged: BTreeMap<usize, Vec<Seed>> = BTreeMap::new();
    let mut total = 0u64;
    for (bands, count) in partial {
        total += count;
        for (b, seeds) in bands {
            for s in seeds {
                insert_seed(merged.entry(b).or_default(), s, keep);
            }
        }
    }
    (merged.into_values().flatten().collect(), total)
}

#[allow(clippy::too_many_arguments)]
fn descend(
    signs: &[f64],
    arc: usize,
    x: NormalizedState,
    elapsed: f64,
    cells_left: usize,
    step: f64,
    target: NormalizedState,
    durations: &mut Vec<f64>,
    bands: &mut BTreeMap<usize, Vec<Seed>>,
    count: &mut u64,
    band_width: f64,
    keep: usize,
) {
    if arc == signs.len() {
        *count += 1;
        let seed = Seed {
            error: x.distance(&target),
            durations: durations.clone(),
        };
        let band = (elapsed / band_width) as usize;
        insert_seed(bands.entry(band).or_default(), seed, keep);
        return;
    }
    for k in 0..=cells_left {
        let d = k as f64 * step;
        if first_nonpositive_time(x, signs[arc], d).is_some() {
            // every longer arc crosses as well
            break;
        }
        durations[arc] = d;
        let next = propagate_constant(x, signs[arc], d);
        descend(
            signs, arc + 1, next, elapsed + d, cells_left - k, step, target, durations, bands,
            count, band_width, keep,
        );
    }
    durations[arc] = 0.0;
}

fn insert_seed(list: &mut Vec<Seed>, seed: Seed, keep: usize) {
    if list.len() < keep {
        list.push(seed);
    } else if let Some((worst, _)) = list
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
    {
        if seed.error < list[worst].error {
            list[worst] = seed;
        }
    }
}

fn endpoint(signs: &[f64], durations: &[f64]) -> NormalizedState {
    signs
        .iter()
        .zip(durations)
        .fold(NormalizedState::REST, |x, (&u, &d)| propagate_constant(x, u, d))
}

fn feasible_path(signs: &[f64], durations: &[f64]) -> bool {
    let mut x = NormalizedState::REST;
    for (&u, &d) in signs.iter().zip(durations) {
        if d < 0.0 || first_nonpositive_time(x, u, d).is_some() {
            return false;
        }
        x = propagate_constant(x, u, d);
    }
    true
}

/// Solves the last two arc durations so the endpoint hits `target`.
fn close_endpoint(
    signs: &[f64],
    durations: &mut [f64],
    target: NormalizedState,
) -> bool {
    let n = signs.len();
    debug_assert!(n >= 2);
    let prefix = endpoint(&signs[..n - 2], &durations[..n - 2]);
    let (ua, ub) = (signs[n - 2], signs[n - 1]);
    let (mut da, mut db) = (durations[n - 2], durations[n - 1]);
    let scale = target.x1.abs().max(1.0);
    for _ in 0..60 {
        let xs = propagate_constant(prefix, ua, da);
        let end = propagate_constant(xs, ub, db);
        let r = (end.x1 - target.x1, end.x2 - target.x2);
        if r.0.hypot(r.1) <= 1e-13 * scale {
            durations[n - 2] = da;
            durations[n - 1] = db;
            return true;
        }
        // d end / d db is the field at the end; d end / d da is the field at
        // the switch carried through the linear flow of the last arc
        let jb = end.derivative(ub);
        let ja = propagate_constant(xs.derivative(ua), ub, db);
        let det = ja.x1 * jb.x2 - ja.x2 * jb.x1;
        if det.abs() < 1e-300 {
            return false;
        }
        let sa = (r.0 * jb.x2 - r.1 * jb.x1) / det;
        let sb = (ja.x1 * r.1 - ja.x2 * r.0) / det;
        // damp steps that would leave the admissible region
        let mut lambda = 1.0;
        while lambda > 1e-6 && (da - lambda * sa < 0.0 || db - lambda * sb < 0.0) {
            lambda *= 0.5;
        }
        da = (da - lambda * sa).max(0.0);
        db = (db - lambda * sb).max(0.0);
    }
    false
}

/// Durations of the free arcs on the lattice; last two solved. Returns the
/// total duration if the result is feasible.
fn evaluate(signs: &[f64], durations: &mut [f64], target: NormalizedState) -> Option<f64> {
    if signs.len() >= 2 && !close_endpoint(signs, durations, target) {
        return None;
    }
    if !feasible_path(signs, durations) {
        return None;
    }
    Some(durations.iter().sum())
}

fn refine(
    signs: &[f64],
    seed: &Seed,
    target: NormalizedState,
    coarse: f64,
    cfg: &OracleConfig,
) -> Option<Vec<f64>> {
    let grid = cfg.duration_grid;
    if signs.len() == 1 {
        // single arc: nothing to solve, the seed must already be close
        let d = seed.durations[0];
        let best = (-10..=10)
            .map(|k| (d + k as f64 * grid).max(0.0))
            .map(|d| (endpoint(signs, &[d]).distance(&target), d))
            .min_by(|a, b| a.0.total_cmp(&b.0))?;
        return (best.0 <= cfg.endpoint_tol && feasible_path(signs, &[best.1])).then(|| vec![best.1]);
    }

    let free = signs.len() - 2;
    let mut current = seed.durations.clone();
    for d in current.iter_mut().take(free) {
        *d = (*d / grid).round() * grid;
    }
    let mut best_total = evaluate(signs, &mut current, target)?;

    let mut mesh = ((coarse / grid).round() as i64).max(1);
    loop {
        let h = mesh as f64 * grid;
        let mut improved = false;
        let mut moves: Vec<Vec<f64>> = Vec::new();
        for i in 0..free {
            for s in [-1.0, 1.0] {
                let mut m = vec![0.0; free];
                m[i] = s * h;
                moves.push(m);
            }
            for j in (i + 1)..free {
                for s in [-1.0, 1.0] {
                    let mut m = vec![0.0; free];
                    m[i] = s * h;
                    m[j] = -s * h;
                    moves.push(m);
                }
            }
        }
        for m in &moves {
            let mut trial = current.clone();
            let mut ok = true;
            for (d, dm) in trial.iter_mut().zip(m) {
                *d += dm;
                if *d < -0.5 * grid {
                    ok = false;
                }
                *d = d.max(0.0);
            }
            if !ok {
                continue;
            }
            if let Some(total) = evaluate(signs, &mut trial, target) {
                if total < best_total - 1e-12 {
                    best_total = total;
                    current = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            if mesh == 1 {
                break;
            }
            mesh = (mesh / 2).max(1);
        }
    }
    Some(current)
}

/// Fastest bang-bang expansion found by exhaustive coarse enumeration and
/// local refinement. Errors when nothing feasible is found.
pub fn brute_force_min_time(cfg: &OracleConfig) -> Result<OracleResult, OptimalError> {
    cfg.validate()?;
    let target = NormalizedState::target(cfg.gamma);
    let grid = cfg.duration_grid;
    let coarse = ((cfg.horizon / cfg.coarse_cells as f64) / grid).round().max(1.0) * grid;

    let mut evaluated = 0u64;
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for signs in structures(cfg) {
        let (seeds, count) = coarse_seeds(&signs, target, coarse, cfg);
        evaluated += count;
        let found = seeds
            .par_iter()
            .filter_map(|seed| refine(&signs, seed, target, coarse, cfg))
            .filter_map(|d| {
                let err = endpoint(&signs, &d).distance(&target);
                (err <= cfg.endpoint_tol).then(|| (d.iter().sum::<f64>(), d))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((total, d)) = found {
            if best.as_ref().is_none_or(|b| total < b.0) {
                best = Some((total, d, signs.clone()));
            }
        }
    }

    let (duration, durations, signs) = best.ok_or_else(|| {
        OptimalError::NoFeasibleSchedule(format!(
            "gamma {}, horizon {}, coarse step {coarse}",
            cfg.gamma, cfg.horizon
        ))
    })?;
    let raw = ControlSchedule::new(
        signs
            .iter()
            .zip(&durations)
            .map(|(&u, &d)| Segment::new(d, u))
            .collect(),
    )?
    .with_boundary_jumps(true);
    let end = propagate_schedule(NormalizedState::REST, &raw)?
        .final_state()
        .unwrap_or(NormalizedState::REST);
    let simplified = raw.simplified(grid);
    Ok(OracleResult {
        duration,
        effective_switches: simplified.segments().len().saturating_sub(1),
        schedule: simplified,
        raw_schedule: raw,
        endpoint_error: end.distance(&target),
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plus_only_cannot_expand() {
        let mut cfg = OracleConfig::new(10.0, 3, 1e-2, 1e-2);
        cfg.allowed = BangSet::PlusOnly;
        assert!(matches!(
            brute_force_min_time(&cfg),
            Err(OptimalError::NoFeasibleSchedule(_))
        ));
    }

    #[test]
    fn structures_alternate() {
        let cfg = OracleConfig::new(2.0, 2, 1e-2, 1e-2);
        let s = structures(&cfg);
        assert_eq!(s.len(), 6);
        assert!(s.contains(&vec![1.0, -1.0, 1.0]));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(brute_force_min_time(&OracleConfig::new(2.0, 4, 1e-2, 1e-2)).is_err());
        assert!(brute_force_min_time(&OracleConfig::new(2.0, 1, 0.0, 1e-2)).is_err());
        assert!(brute_force_min_time(&OracleConfig::new(0.9, 1, 1e-2, 1e-2)).is_err());
    }

    #[test]
    fn newton_closes_two_arcs() {
        let signs = [-1.0, 1.0];
        let mut d = [1.0, 0.5];
        assert!(close_endpoint(&signs, &mut d, NormalizedState::target(2.0)));
        let end = endpoint(&signs, &d);
        assert!(end.distance(&NormalizedState::target(2.0)) < 1e-12);
    }
}
