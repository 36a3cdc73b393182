//! Forward dynamics: the small-noise Euler path per scenario, its noiseless
//! limit, and the worst-case gap between them.
//!
//! The scheme is plain Euler-Maruyama,
//! `X_{k+1} = X_k + b(X_k) dt + eps h(X_k) dqv_k + eps sigma(X_k) dB_k`,
//! driven by a [`GPath`]. With `b = h = 0` and `sigma = 1` the recursion
//! telescopes to `x0 + eps * B_k`, and for dyadic `eps` it does so bit for
//! bit; several scaling tests lean on that.

use std::collections::BTreeMap;

use crate::coeffs::CoefficientSet;
use crate::error::{Error, Result};
use crate::gcore::{sublinear_expectation, ScenarioSamples};
use crate::paths::{GPath, Scenario, TimeGrid};

/// One noisy path on grid nodes, tagged with where it came from.
#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub x0: f64,
    pub eps: f64,
    pub scenario_id: u64,
    pub path_index: u64,
    pub x: Vec<f64>,
}

/// The zero-noise trajectory `phi' = b(phi)` on the same nodes.
#[derive(Debug, Clone)]
pub struct LimitForward {
    pub x0: f64,
    pub phi: Vec<f64>,
}

// Single Euler update, shared with the streaming convergence loop.
#[inline(always)]
pub(crate) fn fwd_step(c: &CoefficientSet, eps: f64, x: f64, dt: f64, db: f64, dqv: f64) -> f64 {
    x + (c.b)(x) * dt + eps * (c.h)(x) * dqv + eps * (c.sigma)(x) * db
}

/// Runs the Euler recursion along one path. Paths are aborted as blown up
/// once `|X|` exceeds 1e6; bounded coefficients cannot reach that except
/// under inconsistent inputs.
pub fn solve_forward(
    c: &CoefficientSet,
    eps: f64,
    x0: f64,
    path: &GPath,
    scenario: &Scenario,
    grid: &TimeGrid,
) -> Result<ForwardSolution> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidInput(format!(
            "eps must lie in [0, 1], got {eps}"
        )));
    }
    if path.scenario_id != scenario.id {
        return Err(Error::InvalidInput(format!(
            "path was built for scenario {}, not {}",
            path.scenario_id, scenario.id
        )));
    }
    if path.b_incr.len() != grid.n_steps {
        return Err(Error::LengthMismatch {
            what: "path increments",
            expected: grid.n_steps,
            got: path.b_incr.len(),
        });
    }
    let mut x = Vec::with_capacity(grid.n_steps + 1);
    x.push(x0);
    for k in 0..grid.n_steps {
        let next = fwd_step(c, eps, x[k], grid.dt, path.b_incr[k], path.qv_incr[k]);
        if !next.is_finite() || next.abs() > 1e6 {
            return Err(Error::BlowUp {
                step: k,
                value: next,
            });
        }
        x.push(next);
    }
    Ok(ForwardSolution {
        x0,
        eps,
        scenario_id: scenario.id,
        path_index: path.path_index,
        x,
    })
}

/// Classical RK4 for `phi' = b(phi)`, one step per grid cell.
pub fn solve_limit_ode(c: &CoefficientSet, x0: f64, grid: &TimeGrid) -> Result<LimitForward> {
    let b = &c.b;
    let dt = grid.dt;
    let mut phi = Vec::with_capacity(grid.n_steps + 1);
    phi.push(x0);
    for k in 0..grid.n_steps {
        let p = phi[k];
        let k1 = b(p);
        let k2 = b(p + 0.5 * dt * k1);
        let k3 = b(p + 0.5 * dt * k2);
        let k4 = b(p + dt * k3);
        let next = p + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::BlowUp {
                step: k,
                value: next,
            });
        }
        phi.push(next);
    }
    Ok(LimitForward { x0, phi })
}

/// Worst-case (over scenarios) mean of `sup_k |X_k - phi_k|^p` over the
/// batch. The batch is grouped by scenario id; each group must be non-empty
/// by construction.
pub fn forward_error(batch: &[ForwardSolution], phi: &LimitForward, p: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidInput(
            "forward_error needs a non-empty batch".to_string(),
        ));
    }
    if !(p >= 2.0) {
        return Err(Error::InvalidInput(format!(
            "forward_error needs p >= 2, got {p}"
        )));
    }
    let mut by_scenario: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for sol in batch {
        if sol.x.len() != phi.phi.len() {
            return Err(Error::LengthMismatch {
                what: "forward path vs limit path",
                expected: phi.phi.len(),
                got: sol.x.len(),
            });
        }
        let mut sup = 0.0f64;
        for (xs, ps) in sol.x.iter().zip(phi.phi.iter()) {
            let gap = (xs - ps).abs();
            if gap > sup {
                sup = gap;
            }
        }
        // p = 2 avoids powf so that dyadic eps rescalings stay bit-exact.
        let raised = if p == 2.0 { sup * sup } else { sup.powf(p) };
        by_scenario.entry(sol.scenario_id).or_default().push(raised);
    }
    let samples = ScenarioSamples::new(by_scenario.into_iter().collect())?;
    sublinear_expectation(&samples)
}
