//! Rare-event side of the small-noise analysis: Monte Carlo capacity curves
//! for deviation events of the forward path, a finite-family upper bound on
//! the corresponding rate infimum, and the log-log slope fit shared by the
//! convergence experiment.
//!
//! A deviation event is always phrased through the gap between the noisy
//! forward path and its zero-noise limit. Capacities are estimated as the
//! worst hit frequency across the scenario family, matching the worst-case
//! semantics of the sublinear expectation.

use rayon::prelude::*;
use serde::Serialize;

use crate::coeffs::CoefficientSet;
use crate::error::{Error, Result};
use crate::forward::{self, fwd_step};
use crate::gcore::VolBounds;
use crate::paths::{Scenario, TimeGrid};
use crate::ratefn;
use crate::rng;

/// Least-squares line through a point cloud, with the goodness of fit kept
/// alongside so callers can reject sloppy regressions.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `y = slope * x + intercept` by least squares. Non-finite points are
/// dropped first; at least three finite points must remain.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let finite: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if finite.len() < 3 {
        return Err(Error::NotEnoughPoints {
            need: 3,
            got: finite.len(),
        });
    }
    let n = finite.len() as f64;
    let mx = finite.iter().map(|p| p.0).sum::<f64>() / n;
    let my = finite.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in &finite {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 {
        return Err(Error::InvalidInput(
            "slope fit needs at least two distinct abscissae".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(x, y) in &finite {
        let d = y - (slope * x + intercept);
        ss_res += d * d;
        ss_tot += (y - my) * (y - my);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Shape of the deviation event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EventKind {
    /// The gap leaves the closed ball of radius `delta` at some grid node.
    ExitBall { delta: f64 },
    /// The gap at the final node is at least `level`.
    TerminalAbove { level: f64 },
}

/// Which process the event observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventTarget {
    /// Noisy forward path minus its zero-noise limit.
    ForwardMinusLimit,
    /// Backward value process. Kept in the vocabulary for callers that
    /// invert through the decoupling field themselves; the routines below
    /// reject it.
    BackwardY,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EventSpec {
    pub kind: EventKind,
    pub target: EventTarget,
}

/// One rung of the empirical capacity curve.
#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub eps: f64,
    /// `eps * ln(capacity)`; minus infinity when no path hit the event.
    pub eps_log_capacity: f64,
    /// Hit count of the scenario that realizes the capacity.
    pub n_hits: u64,
    pub n_paths: u64,
    pub argmax_scenario_id: u64,
}

fn validate_event(spec: &EventSpec) -> Result<()> {
    match spec.target {
        EventTarget::ForwardMinusLimit => {}
        EventTarget::BackwardY => {
            return Err(Error::InvalidInput(
                "deviation events are evaluated on the forward gap; \
                 map backward events through the decoupling field first"
                    .into(),
            ));
        }
    }
    if let EventKind::ExitBall { delta } = spec.kind {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidInput(
                "exit radius must be positive and finite".into(),
            ));
        }
    }
    if let EventKind::TerminalAbove { level } = spec.kind {
        if !level.is_finite() {
            return Err(Error::InvalidInput("terminal level must be finite".into()));
        }
    }
    Ok(())
}

/// Estimates the capacity of the deviation event for every rung of the
/// epsilon ladder.
///
/// Drivers are keyed by `(seed, path_index)` alone, so every scenario and
/// every rung sees the same Gaussian material. This makes hit sets nested
/// along the ladder for events that are monotone in the noise amplitude and
/// keeps the whole curve reproducible path by path.
#[allow(clippy::too_many_arguments)]
pub fn empirical_ldp_curve(
    spec: &EventSpec,
    c: &CoefficientSet,
    bounds: &VolBounds,
    x0: f64,
    eps_ladder: &[f64],
    family: &[Scenario],
    n_paths: usize,
    grid: &TimeGrid,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    validate_event(spec)?;
    if eps_ladder.is_empty() || eps_ladder.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::InvalidInput(
            "epsilon ladder must be non-empty with entries in (0, 1]".into(),
        ));
    }
    if family.is_empty() {
        return Err(Error::NoScenarios);
    }
    if family.len() > 64 {
        return Err(Error::InvalidInput(
            "at most 64 scenarios per capacity estimate".into(),
        ));
    }
    if n_paths == 0 {
        return Err(Error::InvalidInput("need at least one path".into()));
    }
    let n = grid.n_steps;
    let slack = 1e-12 * (1.0 + bounds.sigma_hi_sq);
    for scen in family {
        if scen.var_path.len() != n {
            return Err(Error::LengthMismatch {
                what: "scenario variance path",
                expected: n,
                got: scen.var_path.len(),
            });
        }
        if scen
            .var_path
            .iter()
            .any(|&v| v < bounds.sigma_lo_sq - slack || v > bounds.sigma_hi_sq + slack)
        {
            return Err(Error::InvalidInput(
                "scenario variance path leaves the uncertainty interval".into(),
            ));
        }
    }
    let phi = forward::solve_limit_ode(c, x0, grid)?.phi;
    let sqrt_v: Vec<Vec<f64>> = family
        .iter()
        .map(|s| s.var_path.iter().map(|v| v.sqrt()).collect())
        .collect();
    let dt = grid.dt;
    let mut curve = Vec::with_capacity(eps_ladder.len());
    for &eps in eps_ladder {
        // Bit `si` of a path's mask records whether scenario `si` hit the
        // event on that path.
        let masks: Result<Vec<u64>> = (0..n_paths)
            .into_par_iter()
            .map(|pi| {
                let dw = rng::driver_increments(seed, pi as u64, n, dt);
                let mut mask = 0u64;
                for (si, scen) in family.iter().enumerate() {
                    let mut x = x0;
                    let mut hit = false;
                    for k in 0..n {
                        let db = sqrt_v[si][k] * dw[k];
                        let dqv = scen.var_path[k] * dt;
                        x = fwd_step(c, eps, x, dt, db, dqv);
                        if !x.is_finite() {
                            return Err(Error::BlowUp { step: k, value: x });
                        }
                        let gap = x - phi[k + 1];
                        match spec.kind {
                            EventKind::ExitBall { delta } => {
                                if gap.abs() >= delta {
                                    hit = true;
                                    break;
                                }
                            }
                            EventKind::TerminalAbove { level } => {
                                if k + 1 == n && gap >= level {
                                    hit = true;
                                }
                            }
                        }
                    }
                    if hit {
                        mask |= 1u64 << si;
                    }
                }
                Ok(mask)
            })
            .collect();
        let masks = masks?;
        let mut counts = vec![0u64; family.len()];
        for mask in masks {
            for (si, count) in counts.iter_mut().enumerate() {
                *count += (mask >> si) & 1;
            }
        }
        let mut best = 0usize;
        for si in 1..counts.len() {
            if counts[si] > counts[best] {
                best = si;
            }
        }
        let freq = counts[best] as f64 / n_paths as f64;
        curve.push(CurvePoint {
            eps,
            eps_log_capacity: eps * freq.ln(),
            n_hits: counts[best],
            n_paths: n_paths as u64,
            argmax_scenario_id: family[best].id,
        });
    }
    Ok(curve)
}

// One RK4 cell of dX = b(X) + h(X) * eta with frozen eta.
fn drift_cell(c: &CoefficientSet, x: f64, eta: f64, dt: f64) -> f64 {
    let f = |x: f64| (c.b)(x) + (c.h)(x) * eta;
    let k1 = f(x);
    let k2 = f(x + 0.5 * dt * k1);
    let k3 = f(x + 0.5 * dt * k2);
    let k4 = f(x + dt * k3);
    x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Upper bound on the rate infimum over the event, taken over a finite
/// family of candidate paths.
///
/// Candidates are built on the grid from the zero-noise limit: for an exit
/// event, straight runs to either side of the ball at a ladder of exit
/// times followed by a zero-cost continuation; for a terminal event, the
/// limit path followed by a straight dash to the level started at the same
/// ladder of times. `candidate_family_size` sets the ladder resolution;
/// when it divides the step count, coarser ladders are subsets of finer
/// ones, so the bound can only improve under refinement. Candidates whose
/// control reconstruction fails verification are skipped; if none survive
/// the result is infinite.
pub fn theoretical_rate_inf(
    spec: &EventSpec,
    c: &CoefficientSet,
    bounds: &VolBounds,
    x0: f64,
    grid: &TimeGrid,
    candidate_family_size: usize,
) -> Result<f64> {
    validate_event(spec)?;
    if candidate_family_size == 0 {
        return Err(Error::InvalidInput(
            "candidate family must have at least one member".into(),
        ));
    }
    let n = grid.n_steps;
    let m = candidate_family_size;
    let phi = forward::solve_limit_ode(c, x0, grid)?.phi;
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    match spec.kind {
        EventKind::ExitBall { delta } => {
            let mut last = 0usize;
            for i in 1..=m {
                let j = n * i / m;
                if j == 0 || j == last {
                    continue;
                }
                last = j;
                for sign in [delta, -delta] {
                    let mut path = Vec::with_capacity(n + 1);
                    for k in 0..=j {
                        path.push(phi[k] + sign * k as f64 / j as f64);
                    }
                    for _ in j..n {
                        let prev = *path.last().unwrap();
                        path.push(drift_cell(c, prev, bounds.sigma_hi_sq, grid.dt));
                    }
                    candidates.push(path);
                }
            }
        }
        EventKind::TerminalAbove { level } => {
            let mut last = usize::MAX;
            for i in 0..m {
                let j = n * i / m;
                if j == last {
                    continue;
                }
                last = j;
                let mut path = phi[..=j].to_vec();
                let span = (n - j) as f64;
                for k in j + 1..=n {
                    path.push(phi[k] + level * (k - j) as f64 / span);
                }
                candidates.push(path);
            }
            if level <= 0.0 {
                candidates.push(phi.clone());
            }
        }
    }
    let mut inf = f64::INFINITY;
    for cand in &candidates {
        match ratefn::lambda_rate(c, bounds, x0, cand, grid) {
            Ok(r) => {
                if !r.infinite && r.value < inf {
                    inf = r.value;
                }
            }
            Err(Error::InversionFailed { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(inf)
}
