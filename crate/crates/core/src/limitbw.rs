//! The deterministic limit backward system and its decreasing martingale.
//!
//! `solve_limit_backward` runs a proximal implicit Euler recursion down the
//! limit trajectory: the driver terms are frozen at the already-known node
//! `k+1` value, so each step costs a single prox. The selection `u_sel` is
//! the canonical subgradient reported by `prox_pair`, which keeps the
//! membership certificates exact.
//!
//! `build_limit_martingale` accumulates `(g v - 2 G(g)) dt` per cell. That
//! grouping is deliberate: `2 G(g)` equals the rounded product of `g` with
//! the extreme variance of matching sign, so each increment is the scaled
//! difference of two same-direction roundings and is `<= 0` without
//! tolerance, with equality exactly on the variance that tracks `sign(g)`.

use crate::coeffs::CoefficientSet;
use crate::convex::ConvexPenalty;
use crate::error::{Error, Result};
use crate::forward::LimitForward;
use crate::gcore::{g_function, VolBounds};
use crate::paths::{Scenario, TimeGrid};

/// Backward pair on the limit trajectory: `psi` on nodes, `u_sel` on cells.
#[derive(Debug, Clone)]
pub struct LimitBackward {
    pub psi: Vec<f64>,
    pub u_sel: Vec<f64>,
}

/// Per-scenario martingale part, zero at the start node and non-increasing.
#[derive(Debug, Clone)]
pub struct LimitMartingale {
    pub scenario_id: u64,
    pub m: Vec<f64>,
}

/// Proximal backward Euler for the limit pair. The terminal node carries the
/// raw `Phi(phi_T)`; the penalty acts from the first backward step on.
pub fn solve_limit_backward(
    c: &CoefficientSet,
    p: &ConvexPenalty,
    bounds: &VolBounds,
    phi: &LimitForward,
    grid: &TimeGrid,
) -> Result<LimitBackward> {
    let n = grid.n_steps;
    if phi.phi.len() != n + 1 {
        return Err(Error::LengthMismatch {
            what: "limit trajectory",
            expected: n + 1,
            got: phi.phi.len(),
        });
    }
    let dt = grid.dt;
    let mut psi = vec![0.0; n + 1];
    let mut u_sel = vec![0.0; n];
    psi[n] = (c.terminal)(phi.phi[n]);
    for k in (0..n).rev() {
        let t = grid.node(k);
        let (x, y_next) = (phi.phi[k], psi[k + 1]);
        let drive = (c.f)(t, x, y_next, 0.0) + 2.0 * g_function((c.g)(t, x, y_next, 0.0), bounds);
        let pred = y_next + dt * drive;
        let (yk, u) = p.prox_pair(dt, pred)?;
        psi[k] = yk;
        u_sel[k] = u;
    }
    Ok(LimitBackward { psi, u_sel })
}

/// Accumulates the martingale part `M` of the limit pair under one scenario.
/// `M` is deterministic given the scenario: it only sees the
/// quadratic-variation speed, never the Gaussian draws.
pub fn build_limit_martingale(
    c: &CoefficientSet,
    bounds: &VolBounds,
    phi: &LimitForward,
    bw: &LimitBackward,
    scenario: &Scenario,
    grid: &TimeGrid,
) -> Result<LimitMartingale> {
    let n = grid.n_steps;
    if scenario.var_path.len() != n {
        return Err(Error::LengthMismatch {
            what: "scenario var_path",
            expected: n,
            got: scenario.var_path.len(),
        });
    }
    if phi.phi.len() != n + 1 || bw.psi.len() != n + 1 {
        return Err(Error::LengthMismatch {
            what: "limit pair",
            expected: n + 1,
            got: phi.phi.len().min(bw.psi.len()),
        });
    }
    let dt = grid.dt;
    let mut m = Vec::with_capacity(n + 1);
    m.push(0.0);
    for k in 0..n {
        let t = grid.node(k);
        let gval = (c.g)(t, phi.phi[k], bw.psi[k], 0.0);
        let two_g = 2.0 * g_function(gval, bounds);
        let incr = (gval * scenario.var_path[k] - two_g) * dt;
        m.push(m[k] + incr);
    }
    Ok(LimitMartingale {
        scenario_id: scenario.id,
        m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs;
    use crate::forward::solve_limit_ode;
    use crate::paths::{make_time_grid, scenario_family};
    use std::sync::Arc;

    fn bounds() -> VolBounds {
        VolBounds::new(1.0, 4.0).unwrap()
    }

    #[test]
    fn flat_preset_zero_penalty_is_constant() {
        let c = coeffs::flat();
        let grid = make_time_grid(0.0, 1.0, 200).unwrap();
        let phi = solve_limit_ode(&c, 1.5, &grid).unwrap();
        let bw = solve_limit_backward(&c, &ConvexPenalty::zero(), &bounds(), &phi, &grid).unwrap();
        assert!(bw.psi.iter().all(|&v| v == 1.5));
        assert!(bw.u_sel.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn linear_driver_matches_exponential_decay() {
        let mut c = coeffs::flat();
        c.f = Arc::new(|_t, _x, y, _z| -y);
        let n = 1000;
        let grid = make_time_grid(0.0, 1.0, n).unwrap();
        let phi = solve_limit_ode(&c, 1.0, &grid).unwrap();
        let bw = solve_limit_backward(&c, &ConvexPenalty::zero(), &bounds(), &phi, &grid).unwrap();
        let mut worst = 0.0f64;
        for k in 0..=n {
            let exact = (-(1.0 - grid.node(k))).exp();
            worst = worst.max((bw.psi[k] - exact).abs());
        }
        assert!(worst <= grid.dt, "gap {worst} vs dt {}", grid.dt);
    }

    // The terminal node keeps the raw Phi value; the constraint bites from
    // the first backward step on.
    #[test]
    fn interval_constraint_clips_from_first_step() {
        let c = coeffs::flat();
        let p = ConvexPenalty::indicator(-1.0, 0.5).unwrap();
        let n = 50;
        let grid = make_time_grid(0.0, 1.0, n).unwrap();
        let phi = solve_limit_ode(&c, 1.0, &grid).unwrap();
        let bw = solve_limit_backward(&c, &p, &bounds(), &phi, &grid).unwrap();
        assert_eq!(bw.psi[n], 1.0);
        for k in 0..n {
            assert_eq!(bw.psi[k], 0.5);
        }
        assert!(bw.u_sel[n - 1] > 0.0);
        for k in 0..n {
            let r = p.subgradient_residual(bw.psi[k], bw.u_sel[k], &p.standard_probes(bw.psi[k]));
            assert!(r <= 1e-8, "k {k}: residual {r}");
        }
    }

    #[test]
    fn selection_pairs_certify_across_penalties() {
        let c = coeffs::tanh_drift();
        let grid = make_time_grid(0.0, 1.0, 400).unwrap();
        let phi = solve_limit_ode(&c, 1.0, &grid).unwrap();
        let penalties = [
            ConvexPenalty::zero(),
            ConvexPenalty::indicator(-1.0, 1.0).unwrap(),
            ConvexPenalty::abs_scaled(0.8).unwrap(),
            ConvexPenalty::quadratic(1.2).unwrap(),
        ];
        for p in &penalties {
            let bw = solve_limit_backward(&c, p, &bounds(), &phi, &grid).unwrap();
            let mut running_cost = 0.0;
            for k in 0..grid.n_steps {
                let r =
                    p.subgradient_residual(bw.psi[k], bw.u_sel[k], &p.standard_probes(bw.psi[k]));
                assert!(r <= 1e-8, "{p:?} k {k}: residual {r}");
                running_cost += p.eval(bw.psi[k]) * grid.dt;
            }
            assert!(running_cost.is_finite());
        }
    }

    #[test]
    fn zero_penalty_equals_plain_backward_euler() {
        let c = coeffs::tanh_drift();
        let grid = make_time_grid(0.0, 1.0, 300).unwrap();
        let phi = solve_limit_ode(&c, 1.0, &grid).unwrap();
        let bw = solve_limit_backward(&c, &ConvexPenalty::zero(), &bounds(), &phi, &grid).unwrap();
        let n = grid.n_steps;
        let mut psi = vec![0.0; n + 1];
        psi[n] = (c.terminal)(phi.phi[n]);
        for k in (0..n).rev() {
            let t = grid.node(k);
            let drive = (c.f)(t, phi.phi[k], psi[k + 1], 0.0)
                + 2.0 * g_function((c.g)(t, phi.phi[k], psi[k + 1], 0.0), &bounds());
            psi[k] = psi[k + 1] + grid.dt * drive;
        }
        assert_eq!(bw.psi, psi);
        assert!(bw.u_sel.iter().all(|&u| u == 0.0));
    }

    fn constant_g_set(gval: f64) -> coeffs::CoefficientSet {
        let mut c = coeffs::flat();
        c.g = Arc::new(move |_t, _x, _y, _z| gval);
        c
    }

    #[test]
    fn martingale_vanishes_in_the_classical_case() {
        let c = coeffs::classical();
        let classical = VolBounds::new(2.5, 2.5).unwrap();
        let grid = make_time_grid(0.0, 1.0, 250).unwrap();
        let phi = solve_limit_ode(&c, 1.0, &grid).unwrap();
        let bw = solve_limit_backward(&c, &ConvexPenalty::zero(), &classical, &phi, &grid).unwrap();
        let fam = scenario_family(&classical, &grid, 2, 9);
        for scen in &fam {
            let lm = build_limit_martingale(&c, &classical, &phi, &bw, scen, &grid).unwrap();
            assert!(lm.m.iter().all(|&v| v == 0.0), "scenario {}", scen.id);
        }
    }

    #[test]
    fn constant_positive_g_extreme_scenarios() {
        let c = constant_g_set(1.0);
        let grid = make_time_grid(0.0, 1.0, 128).unwrap();
        let phi = solve_limit_ode(&c, 0.0, &grid).unwrap();
        let bounds = bounds();
        let bw = solve_limit_backward(&c, &ConvexPenalty::zero(), &bounds, &phi, &grid).unwrap();
        let fam = scenario_family(&bounds, &grid, 0, 3);

        let hi = build_limit_martingale(&c, &bounds, &phi, &bw, &fam[1], &grid).unwrap();
        assert!(hi.m.iter().all(|&v| v == 0.0));

        let lo = build_limit_martingale(&c, &bounds, &phi, &bw, &fam[0], &grid).unwrap();
        for k in 0..=grid.n_steps {
            let expect = (1.0 - 4.0) * (grid.node(k) - grid.s);
            assert!((lo.m[k] - expect).abs() <= 1e-12, "k {k}");
        }
    }

    #[test]
    fn decrease_holds_without_tolerance_on_every_scenario() {
        let c = coeffs::tanh_drift();
        let grid = make_time_grid(0.0, 1.0, 500).unwrap();
        let bounds = bounds();
        let phi = solve_limit_ode(&c, 1.0, &grid).unwrap();
        let bw = solve_limit_backward(&c, &ConvexPenalty::zero(), &bounds, &phi, &grid).unwrap();
        let fam = scenario_family(&bounds, &grid, 5, 42);
        let mut worst_terminal = f64::NEG_INFINITY;
        for scen in &fam {
            let lm = build_limit_martingale(&c, &bounds, &phi, &bw, scen, &grid).unwrap();
            assert_eq!(lm.m[0], 0.0);
            for k in 0..grid.n_steps {
                assert!(lm.m[k + 1] <= lm.m[k], "scenario {} step {k}", scen.id);
            }
            worst_terminal = worst_terminal.max(*lm.m.last().unwrap());
        }
        // The driver g = 0.5 cos(psi) stays positive here, so the constant
        // high-variance scenario attains the martingale property exactly.
        assert_eq!(worst_terminal, 0.0);
    }
}
