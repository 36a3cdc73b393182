//! Scenario controls and coupled noise paths.
//!
//! A scenario fixes the squared volatility on each grid cell. The noise path
//! it generates has increments `sqrt(v_k) * dW_k` against a shared Gaussian
//! driver, and its quadratic-variation increments are `v_k * dt` exactly, so
//! the interval bounds hold with zero tolerance by construction.
//!
//! The Gaussian driver is keyed by `(seed, path_index)` alone: evaluating the
//! same path index under different scenarios reuses the same draws, which is
//! what makes cross-scenario and cross-epsilon comparisons variance-free.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcore::VolBounds;
use crate::rng;

/// Uniform grid on `[s, t_end]` with `n_steps` cells of width `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub s: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(s: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(s.is_finite() && t_end.is_finite() && s < t_end) || n_steps == 0 {
            return Err(Error::InvalidGrid {
                start: s,
                end: t_end,
                n_steps,
            });
        }
        Ok(Self {
            s,
            t_end,
            n_steps,
            dt: (t_end - s) / n_steps as f64,
        })
    }

    /// Node `t_k = s + k * dt`, `k = 0..=n_steps`.
    pub fn node(&self, k: usize) -> f64 {
        self.s + k as f64 * self.dt
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.node(k)).collect()
    }
}

/// Shorthand for [`TimeGrid::new`].
pub fn make_time_grid(s: f64, t_end: f64, n_steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(s, t_end, n_steps)
}

/// One piecewise-constant squared-volatility control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: u64,
    /// Squared volatility per grid cell, values inside the bounds interval.
    pub var_path: Vec<f64>,
}

/// Deterministic scenario family: both constant extremes, one cell-alternating
/// bang-bang control, then `n_random` i.i.d. uniform controls from the seeded
/// stream. Ids are the positions `0..family_len`.
pub fn scenario_family(
    bounds: &VolBounds,
    grid: &TimeGrid,
    n_random: usize,
    seed: u64,
) -> Vec<Scenario> {
    let n = grid.n_steps;
    let lo = bounds.sigma_lo_sq;
    let hi = bounds.sigma_hi_sq;
    let mut family = Vec::with_capacity(3 + n_random);
    family.push(Scenario {
        id: 0,
        var_path: vec![lo; n],
    });
    family.push(Scenario {
        id: 1,
        var_path: vec![hi; n],
    });
    family.push(Scenario {
        id: 2,
        var_path: (0..n).map(|k| if k % 2 == 0 { hi } else { lo }).collect(),
    });
    for j in 0..n_random {
        let id = 3 + j as u64;
        let mut r = rng::scenario_rng(seed, id);
        family.push(Scenario {
            id,
            var_path: (0..n).map(|_| r.gen_range(lo..=hi)).collect(),
        });
    }
    family
}

/// A realized noise path under one scenario.
///
/// `b_incr[k] = sqrt(var_path[k]) * dW_k` and `qv_incr[k] = var_path[k] * dt`;
/// `b` and `qv` are the running sums with `b[0] = qv[0] = 0`.
#[derive(Debug, Clone)]
pub struct GPath {
    pub scenario_id: u64,
    pub path_index: u64,
    pub b_incr: Vec<f64>,
    pub qv_incr: Vec<f64>,
    pub b: Vec<f64>,
    pub qv: Vec<f64>,
}

/// Builds the path a scenario induces on the shared `(seed, path_index)`
/// Gaussian driver. Identical arguments reproduce bit-identical paths.
pub fn build_g_path(
    scenario: &Scenario,
    grid: &TimeGrid,
    seed: u64,
    path_index: u64,
) -> Result<GPath> {
    if scenario.var_path.len() != grid.n_steps {
        return Err(Error::LengthMismatch {
            what: "scenario var_path",
            expected: grid.n_steps,
            got: scenario.var_path.len(),
        });
    }
    let dw = rng::driver_increments(seed, path_index, grid.n_steps, grid.dt);
    let mut b_incr = Vec::with_capacity(grid.n_steps);
    let mut qv_incr = Vec::with_capacity(grid.n_steps);
    for (k, &v) in scenario.var_path.iter().enumerate() {
        b_incr.push(v.sqrt() * dw[k]);
        qv_incr.push(v * grid.dt);
    }
    let mut b = Vec::with_capacity(grid.n_steps + 1);
    let mut qv = Vec::with_capacity(grid.n_steps + 1);
    b.push(0.0);
    qv.push(0.0);
    for k in 0..grid.n_steps {
        b.push(b[k] + b_incr[k]);
        qv.push(qv[k] + qv_incr[k]);
    }
    Ok(GPath {
        scenario_id: scenario.id,
        path_index,
        b_incr,
        qv_incr,
        b,
        qv,
    })
}

/// Checks `qv_incr[k]` against `[dt * sigma_lo_sq, dt * sigma_hi_sq]` cell by
/// cell. Holds with zero tolerance: products of ordered factors stay ordered.
pub fn qv_increments_within(path: &GPath, grid: &TimeGrid, bounds: &VolBounds) -> bool {
    let lo = bounds.sigma_lo_sq * grid.dt;
    let hi = bounds.sigma_hi_sq * grid.dt;
    path.qv_incr.iter().all(|&q| lo <= q && q <= hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds() -> VolBounds {
        VolBounds::new(1.0, 4.0).unwrap()
    }

    #[test]
    fn grid_rejects_degenerate_inputs() {
        assert!(make_time_grid(0.0, 0.0, 10).is_err());
        assert!(make_time_grid(1.0, 0.0, 10).is_err());
        assert!(make_time_grid(0.0, 1.0, 0).is_err());
        let g = make_time_grid(0.5, 1.5, 4).unwrap();
        assert_eq!(g.dt, 0.25);
        assert_eq!(g.nodes().len(), 5);
    }

    #[test]
    fn family_contains_extremes_and_bang_bang() {
        let g = make_time_grid(0.0, 1.0, 6).unwrap();
        let fam = scenario_family(&bounds(), &g, 2, 9);
        assert_eq!(fam.len(), 5);
        assert!(fam[0].var_path.iter().all(|&v| v == 1.0));
        assert!(fam[1].var_path.iter().all(|&v| v == 4.0));
        assert_eq!(fam[2].var_path, vec![4.0, 1.0, 4.0, 1.0, 4.0, 1.0]);
        for s in &fam[3..] {
            assert!(s.var_path.iter().all(|&v| (1.0..=4.0).contains(&v)));
        }
        let again = scenario_family(&bounds(), &g, 2, 9);
        assert_eq!(fam, again);
        let other_seed = scenario_family(&bounds(), &g, 2, 10);
        assert_ne!(fam[3].var_path, other_seed[3].var_path);
    }

    #[test]
    fn path_replays_and_respects_qv_bounds_exactly() {
        let g = make_time_grid(0.0, 1.0, 512).unwrap();
        let b = bounds();
        for scen in scenario_family(&b, &g, 3, 7) {
            let p1 = build_g_path(&scen, &g, 123, 5).unwrap();
            let p2 = build_g_path(&scen, &g, 123, 5).unwrap();
            assert_eq!(p1.b, p2.b);
            assert!(qv_increments_within(&p1, &g, &b));
            assert_eq!(p1.b[0], 0.0);
            assert_eq!(p1.qv[0], 0.0);
        }
    }

    #[test]
    fn pairwise_qv_differences_stay_inside_the_cone() {
        // Re-summing increments over [j, k) with the same left-to-right order
        // for the path and for both bounds keeps the comparison exact: ordered
        // addends give ordered floating-point sums.
        let g = make_time_grid(0.0, 1.0, 96).unwrap();
        let b = bounds();
        let fam = scenario_family(&b, &g, 2, 11);
        let path = build_g_path(&fam[4], &g, 3, 0).unwrap();
        let lo_inc = b.sigma_lo_sq * g.dt;
        let hi_inc = b.sigma_hi_sq * g.dt;
        for j in 0..g.n_steps {
            let (mut s, mut slo, mut shi) = (0.0f64, 0.0f64, 0.0f64);
            for k in j..g.n_steps {
                s += path.qv_incr[k];
                slo += lo_inc;
                shi += hi_inc;
                assert!(slo <= s && s <= shi, "window [{j}, {}]", k + 1);
            }
        }
    }

    #[test]
    fn driver_is_shared_across_scenarios() {
        let g = make_time_grid(0.0, 1.0, 64).unwrap();
        let b = bounds();
        let fam = scenario_family(&b, &g, 0, 1);
        let plo = build_g_path(&fam[0], &g, 99, 4).unwrap();
        let phi = build_g_path(&fam[1], &g, 99, 4).unwrap();
        // Same driver, volatilities 1 and 2: increments scale exactly by 2.
        for k in 0..g.n_steps {
            assert_eq!(phi.b_incr[k], 2.0 * plo.b_incr[k]);
        }
    }

    #[test]
    fn time_rescaling_keeps_qv_increments_inside_the_box() {
        // Speed time up by lambda = 4 and scale the path by sqrt(lambda): the
        // rescaled quadratic-variation increments are lambda * v * (dt/lambda)
        // = v * dt, still inside [dt*lo, dt*hi] exactly (lambda is a power of
        // two, so the products commute without rounding).
        let lam = 4.0;
        let g_fast = make_time_grid(0.0, 1.0 / lam, 128).unwrap();
        let g_slow = make_time_grid(0.0, 1.0, 128).unwrap();
        let b = bounds();
        let fam = scenario_family(&b, &g_fast, 1, 5);
        let p = build_g_path(&fam[3], &g_fast, 21, 2).unwrap();
        let lo = b.sigma_lo_sq * g_slow.dt;
        let hi = b.sigma_hi_sq * g_slow.dt;
        for &q in &p.qv_incr {
            let rescaled = lam * q;
            assert!(lo <= rescaled && rescaled <= hi);
        }
    }
}
