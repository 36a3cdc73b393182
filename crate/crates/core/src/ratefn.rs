//! Action functionals for the zero-noise limit: cost of steering the limit
//! system along a prescribed path with a square-integrable drift control and
//! a volatility control confined to the uncertainty interval, plus the
//! lifted version for backward targets that inverts the decoupling field
//! slice by slice.
//!
//! Rates are recovered by inversion rather than optimization: a target path
//! on the time grid pins down one control pair per cell through the midpoint
//! of the cell, the volatility control is chosen by the pointwise minimizer,
//! and the resulting pair is certified by re-integrating the controlled
//! system and comparing against the target. A certification failure is an
//! error, never a silently wrong number.

use serde::Serialize;

use crate::coeffs::CoefficientSet;
use crate::error::{Error, Result};
use crate::forward;
use crate::gcore::VolBounds;
use crate::paths::TimeGrid;
use crate::vi::ViGrid;

/// Piecewise-constant control pair, one value per grid cell. `phi_dot`
/// multiplies the diffusion coefficient, `eta_dot` is the running variance
/// of the driver and must live in the uncertainty interval to be admissible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlPair {
    pub phi_dot: Vec<f64>,
    pub eta_dot: Vec<f64>,
}

/// Rate of one target path together with the certificate controls. A target
/// that cannot be reached with admissible controls carries `infinite: true`,
/// an infinite `value` and empty controls.
#[derive(Debug, Clone, Serialize)]
pub struct RateResult {
    pub value: f64,
    pub infinite: bool,
    pub phi_dot: Vec<f64>,
    pub eta_dot: Vec<f64>,
    pub target: Vec<f64>,
}

impl RateResult {
    fn unreachable(target: &[f64]) -> Self {
        RateResult {
            value: f64::INFINITY,
            infinite: true,
            phi_dot: Vec::new(),
            eta_dot: Vec::new(),
            target: target.to_vec(),
        }
    }
}

/// Quadrature of the control energy, `0.5 * sum phi_dot^2 / eta_dot * dt`.
///
/// A non-positive variance control is an error; a variance control outside
/// the interval is legal input but reported through the second return so
/// callers can flag the pair as inadmissible.
pub fn action_j(ctrl: &ControlPair, bounds: &VolBounds, grid: &TimeGrid) -> Result<(f64, bool)> {
    let n = grid.n_steps;
    if ctrl.phi_dot.len() != n || ctrl.eta_dot.len() != n {
        return Err(Error::LengthMismatch {
            what: "control pair",
            expected: n,
            got: ctrl.phi_dot.len().max(ctrl.eta_dot.len()),
        });
    }
    let slack = 1e-12 * (1.0 + bounds.sigma_hi_sq);
    let mut outside = false;
    let mut total = 0.0;
    for (&p, &e) in ctrl.phi_dot.iter().zip(&ctrl.eta_dot) {
        if !(e > 0.0) {
            return Err(Error::InvalidInput(
                "variance control must be strictly positive".into(),
            ));
        }
        if e < bounds.sigma_lo_sq - slack || e > bounds.sigma_hi_sq + slack {
            outside = true;
        }
        total += 0.5 * p * p / e * grid.dt;
    }
    Ok((total, outside))
}

/// Integrates the controlled limit system, one classical Runge-Kutta step
/// per cell with the controls frozen on that cell.
pub fn controlled_ode(
    c: &CoefficientSet,
    x0: f64,
    ctrl: &ControlPair,
    grid: &TimeGrid,
) -> Result<Vec<f64>> {
    let n = grid.n_steps;
    if ctrl.phi_dot.len() != n || ctrl.eta_dot.len() != n {
        return Err(Error::LengthMismatch {
            what: "control pair",
            expected: n,
            got: ctrl.phi_dot.len().max(ctrl.eta_dot.len()),
        });
    }
    let dt = grid.dt;
    let mut path = Vec::with_capacity(n + 1);
    path.push(x0);
    for k in 0..n {
        let (pd, ed) = (ctrl.phi_dot[k], ctrl.eta_dot[k]);
        let rhs = |x: f64| (c.b)(x) + (c.sigma)(x) * pd + (c.h)(x) * ed;
        let x = path[k];
        let k1 = rhs(x);
        let k2 = rhs(x + 0.5 * dt * k1);
        let k3 = rhs(x + 0.5 * dt * k2);
        let k4 = rhs(x + dt * k3);
        let next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::BlowUp {
                step: k,
                value: next,
            });
        }
        path.push(next);
    }
    Ok(path)
}

/// Cheapest admissible variance control for one cell.
///
/// With target slope `a` left after removing the drift, the cell cost as a
/// function of the variance `v` is `(a - h v)^2 / (sigma^2 v)`, which is
/// unimodal with stationary point `|a / h|`. Without the mixed drift the
/// cost decays in `v`, so the upper endpoint wins; that endpoint is also the
/// tie-break when the cost does not depend on `v` at all.
pub fn pointwise_eta_min(a: f64, h: f64, sigma: f64, bounds: &VolBounds) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidInput(
            "diffusion coefficient must be positive".into(),
        ));
    }
    if h == 0.0 {
        return Ok(bounds.sigma_hi_sq);
    }
    Ok((a / h).abs().clamp(bounds.sigma_lo_sq, bounds.sigma_hi_sq))
}

fn check_target(target: &[f64], grid: &TimeGrid) -> Result<()> {
    if target.len() != grid.n_steps + 1 {
        return Err(Error::LengthMismatch {
            what: "target path",
            expected: grid.n_steps + 1,
            got: target.len(),
        });
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("target path must be finite".into()));
    }
    Ok(())
}

/// Rate of a forward target path.
///
/// Each cell is inverted through its midpoint: the drift at the midpoint
/// state is subtracted from the difference quotient, the variance control
/// minimizes the cell cost, and the diffusion control absorbs the exact
/// remainder. The recovered pair is certified by re-integrating the
/// controlled system; a certification gap beyond `1e-6` scaled by the
/// target's size fails with the gap attached. A target that does not start
/// at `x0` is unreachable, not an error.
pub fn lambda_rate(
    c: &CoefficientSet,
    bounds: &VolBounds,
    x0: f64,
    target: &[f64],
    grid: &TimeGrid,
) -> Result<RateResult> {
    check_target(target, grid)?;
    if (target[0] - x0).abs() > 1e-9 * (1.0 + x0.abs()) {
        return Ok(RateResult::unreachable(target));
    }
    let n = grid.n_steps;
    let dt = grid.dt;
    let mut phi_dot = Vec::with_capacity(n);
    let mut eta_dot = Vec::with_capacity(n);
    for k in 0..n {
        let mid = 0.5 * (target[k] + target[k + 1]);
        let sig = (c.sigma)(mid);
        if !(sig > 0.0) {
            return Err(Error::InvalidInput(
                "diffusion coefficient must be positive along the target".into(),
            ));
        }
        let h = (c.h)(mid);
        let a = (target[k + 1] - target[k]) / dt - (c.b)(mid);
        let eta = pointwise_eta_min(a, h, sig, bounds)?;
        phi_dot.push((a - h * eta) / sig);
        eta_dot.push(eta);
    }
    let ctrl = ControlPair { phi_dot, eta_dot };
    let replay = controlled_ode(c, x0, &ctrl, grid)?;
    let mut gap = 0.0f64;
    let mut scale = 0.0f64;
    for (r, t) in replay.iter().zip(target) {
        gap = gap.max((r - t).abs());
        scale = scale.max(t.abs());
    }
    if gap > 1e-6 * (1.0 + scale) {
        return Err(Error::InversionFailed { gap });
    }
    let (value, outside) = action_j(&ctrl, bounds, grid)?;
    if outside {
        return Ok(RateResult::unreachable(target));
    }
    Ok(RateResult {
        value,
        infinite: false,
        phi_dot: ctrl.phi_dot,
        eta_dot: ctrl.eta_dot,
        target: target.to_vec(),
    })
}

/// Degenerate rate for the drift-only system, which has no controls at all:
/// zero on the one reachable path, infinite elsewhere.
pub fn psi_hat_b_only(
    c: &CoefficientSet,
    x0: f64,
    target: &[f64],
    grid: &TimeGrid,
) -> Result<RateResult> {
    check_target(target, grid)?;
    let lln = forward::solve_limit_ode(c, x0, grid)?.phi;
    let gap = lln
        .iter()
        .zip(target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    if gap <= 1e-8 {
        Ok(RateResult {
            value: 0.0,
            infinite: false,
            phi_dot: Vec::new(),
            eta_dot: Vec::new(),
            target: target.to_vec(),
        })
    } else {
        Ok(RateResult::unreachable(target))
    }
}

// Inverts one strictly monotone field row at value `y`. `None` when `y`
// falls outside the row's range.
fn invert_row(row: &[f64], x_lo: f64, dx: f64, y: f64) -> Option<f64> {
    let nx = row.len();
    let increasing = row[nx - 1] > row[0];
    let (lo, hi) = if increasing {
        (row[0], row[nx - 1])
    } else {
        (row[nx - 1], row[0])
    };
    if y < lo || y > hi {
        return None;
    }
    // Binary search for the bracketing cell, then a linear cut inside it.
    let mut a = 0usize;
    let mut b = nx - 1;
    while b - a > 1 {
        let m = (a + b) / 2;
        let below = if increasing { row[m] <= y } else { row[m] >= y };
        if below {
            a = m;
        } else {
            b = m;
        }
    }
    let denom = row[b] - row[a];
    let frac = if denom == 0.0 { 0.0 } else { (y - row[a]) / denom };
    Some(x_lo + (a as f64 + frac) * dx)
}

/// Rate of a backward target path, lifted through the zero-noise decoupling
/// field.
///
/// Every time slice of the field must be strictly monotone in space so the
/// backward value pins down a unique forward state; the rate of the backward
/// target is then the rate of that inverted forward path. Targets leaving
/// the field's range, or whose inverted path does not start at `x0`, are
/// unreachable as far as this window can tell.
pub fn lambda_prime(
    c: &CoefficientSet,
    bounds: &VolBounds,
    x0: f64,
    target_psi: &[f64],
    field: &ViGrid,
    grid: &TimeGrid,
) -> Result<RateResult> {
    check_target(target_psi, grid)?;
    if field.t_nodes.len() != grid.n_steps + 1 || field.nx < 2 {
        return Err(Error::InvalidInput(
            "decoupling field does not match the time grid".into(),
        ));
    }
    let ends_match = (field.t_nodes[0] - grid.s).abs() <= 1e-9 * (1.0 + grid.s.abs())
        && (field.t_nodes[grid.n_steps] - grid.t_end).abs() <= 1e-9 * (1.0 + grid.t_end.abs());
    if !ends_match {
        return Err(Error::InvalidInput(
            "decoupling field covers a different time interval".into(),
        ));
    }
    let mut inverted = Vec::with_capacity(grid.n_steps + 1);
    for (k, &y) in target_psi.iter().enumerate() {
        let row = field.row(k);
        let increasing = row[field.nx - 1] > row[0];
        for i in 0..field.nx - 1 {
            let d = row[i + 1] - row[i];
            let strict = if increasing { d > 0.0 } else { d < 0.0 };
            if !strict {
                return Err(Error::NonMonotoneSlice { t_index: k });
            }
        }
        match invert_row(row, field.x_lo, field.dx, y) {
            Some(x) => inverted.push(x),
            None => return Ok(RateResult::unreachable(target_psi)),
        }
    }
    if (inverted[0] - x0).abs() > 1e-9 * (1.0 + x0.abs()) {
        return Ok(RateResult::unreachable(target_psi));
    }
    inverted[0] = x0;
    let fwd = lambda_rate(c, bounds, x0, &inverted, grid)?;
    Ok(RateResult {
        value: fwd.value,
        infinite: fwd.infinite,
        phi_dot: fwd.phi_dot,
        eta_dot: fwd.eta_dot,
        target: target_psi.to_vec(),
    })
}
