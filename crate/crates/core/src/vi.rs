//! Finite-difference solution of the penalized backward PDE, the zero-noise
//! field, path-wise reconstruction of the backward quadruple, and the
//! epsilon-ladder convergence experiment.
//!
//! The scheme marches backward in time, explicit in space with central
//! differences and a CFL guard, implicit only through one prox per node.
//! Boundary rows use one-sided first differences and borrow the curvature of
//! the nearest interior node.
//!
//! The convergence experiment streams paths instead of materializing
//! per-path arrays: each (path, scenario) pass advances the forward state
//! and all per-penalty reconstructions in one loop, keeping running suprema
//! only. Per-path statistics are collected in path order and reduced with
//! the same fixed-shape pairwise sums everywhere, so results do not depend
//! on the worker count.

use rayon::prelude::*;

use crate::coeffs::CoefficientSet;
use crate::convex::ConvexPenalty;
use crate::error::{Error, Result};
use crate::forward::{fwd_step, ForwardSolution, LimitForward};
use crate::gcore::{g_function, sublinear_expectation, ScenarioSamples, VolBounds};
use crate::ldp::{fit_slope, SlopeFit};
use crate::limitbw::{build_limit_martingale, solve_limit_backward};
use crate::paths::{GPath, Scenario, TimeGrid};
use crate::rng;
use crate::{forward, paths};

/// Space-time field on a uniform rectangle. Row `k` of `u` is the spatial
/// slice at `t_nodes[k]`; `pred` keeps the pre-prox predictors (one row per
/// time cell) so that selections can be reconstructed along paths.
#[derive(Debug, Clone)]
pub struct ViGrid {
    pub eps: f64,
    pub t_nodes: Vec<f64>,
    pub x_lo: f64,
    pub dx: f64,
    pub nx: usize,
    pub u: Vec<f64>,
    pub pred: Option<Vec<f64>>,
}

impl ViGrid {
    pub fn x_node(&self, i: usize) -> f64 {
        self.x_lo + i as f64 * self.dx
    }

    pub fn x_hi(&self) -> f64 {
        self.x_node(self.nx - 1)
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x_node(i)).collect()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.u[k * self.nx..(k + 1) * self.nx]
    }

    pub fn at(&self, k: usize, i: usize) -> f64 {
        self.u[k * self.nx + i]
    }

    pub fn pred_row(&self, k: usize) -> Option<&[f64]> {
        self.pred
            .as_ref()
            .map(|p| &p[k * self.nx..(k + 1) * self.nx])
    }
}

/// Backward quadruple along one forward path. `y`, `z`, `k` live on nodes,
/// `u_sel` on cells; `k` starts at zero.
#[derive(Debug, Clone)]
pub struct BackwardSolution {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub k: Vec<f64>,
    pub u_sel: Vec<f64>,
}

// Locate the interpolation cell for x; callers have already window-checked.
#[inline(always)]
fn locate(x_lo: f64, dx: f64, nx: usize, x: f64) -> (usize, f64) {
    let raw = (x - x_lo) / dx;
    let j = (raw as usize).min(nx - 2);
    (j, raw - j as f64)
}

#[inline(always)]
fn lerp(row: &[f64], j: usize, frac: f64) -> f64 {
    row[j] + frac * (row[j + 1] - row[j])
}

// Spatial slope at the query point: linear blend of the node-centered
// slopes, one-sided at the boundary columns to match the stepping stencil.
#[inline(always)]
fn slope_at(row: &[f64], j: usize, frac: f64, dx: f64, nx: usize) -> f64 {
    let s_left = if j == 0 {
        (row[1] - row[0]) / dx
    } else {
        (row[j + 1] - row[j - 1]) / (2.0 * dx)
    };
    let s_right = if j + 1 == nx - 1 {
        (row[nx - 1] - row[nx - 2]) / dx
    } else {
        (row[j + 2] - row[j]) / (2.0 * dx)
    };
    s_left + frac * (s_right - s_left)
}

/// Default spatial window around `x0`: drift reach plus five standard
/// deviations of the worst-case noise, rounded up to an integer radius. The
/// declared coefficient bound stands in for the suprema of `b`, `sigma`, `h`.
pub fn spatial_window(
    c: &CoefficientSet,
    bounds: &VolBounds,
    eps: f64,
    x0: f64,
    grid: &TimeGrid,
) -> (f64, f64) {
    let span = grid.t_end - grid.s;
    let sig_hi = bounds.sigma_hi_sq.sqrt();
    let radius = (c.bound_l * span
        + 5.0 * eps * sig_hi * c.bound_l * span.sqrt()
        + eps * bounds.sigma_hi_sq * c.bound_l * span)
        .ceil();
    (x0 - radius, x0 + radius)
}

#[allow(clippy::too_many_arguments)]
fn solve_vi_impl(
    c: &CoefficientSet,
    p: Option<&ConvexPenalty>,
    bounds: &VolBounds,
    eps: f64,
    x_lo: f64,
    x_hi: f64,
    nx: usize,
    grid: &TimeGrid,
) -> Result<ViGrid> {
    if nx < 8 {
        return Err(Error::InvalidInput(format!("nx must be >= 8, got {nx}")));
    }
    if !(x_lo < x_hi) || !x_lo.is_finite() || !x_hi.is_finite() {
        return Err(Error::InvalidInput(format!(
            "bad spatial window [{x_lo}, {x_hi}]"
        )));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidInput(format!(
            "eps must lie in [0, 1], got {eps}"
        )));
    }
    let n = grid.n_steps;
    let dt = grid.dt;
    let dx = (x_hi - x_lo) / (nx - 1) as f64;
    let x: Vec<f64> = (0..nx).map(|i| x_lo + i as f64 * dx).collect();
    let bs: Vec<f64> = x.iter().map(|&v| (c.b)(v)).collect();
    let hs: Vec<f64> = x.iter().map(|&v| (c.h)(v)).collect();
    let sig: Vec<f64> = x.iter().map(|&v| (c.sigma)(v)).collect();
    let sig_sq_max = sig.iter().fold(0.0f64, |m, &s| m.max(s * s));
    let denom = eps * eps * bounds.sigma_hi_sq * sig_sq_max;
    let dt_max = dx * dx / (denom + 1e-300);
    if dt > dt_max {
        return Err(Error::CflViolation { dt, dt_max });
    }

    let mut u = vec![0.0; (n + 1) * nx];
    let mut pred = vec![0.0; n * nx];
    for i in 0..nx {
        u[n * nx + i] = (c.terminal)(x[i]);
    }
    let mut dx1 = vec![0.0; nx];
    let mut dx2 = vec![0.0; nx];
    for k in (0..n).rev() {
        let (head, tail) = u.split_at_mut((k + 1) * nx);
        let next = &tail[..nx];
        let row = &mut head[k * nx..];
        for i in 1..nx - 1 {
            dx1[i] = (next[i + 1] - next[i - 1]) / (2.0 * dx);
            dx2[i] = (next[i + 1] - 2.0 * next[i] + next[i - 1]) / (dx * dx);
        }
        dx1[0] = (next[1] - next[0]) / dx;
        dx1[nx - 1] = (next[nx - 1] - next[nx - 2]) / dx;
        dx2[0] = dx2[1];
        dx2[nx - 1] = dx2[nx - 2];
        let t = grid.node(k);
        let pred_row = &mut pred[k * nx..(k + 1) * nx];
        for i in 0..nx {
            let u_n = next[i];
            let z = eps * sig[i] * dx1[i];
            let h_i = dx2[i] * eps * eps * sig[i] * sig[i]
                + 2.0 * dx1[i] * eps * hs[i]
                + 2.0 * (c.g)(t, x[i], u_n, z);
            let pv =
                u_n + dt * (g_function(h_i, bounds) + bs[i] * dx1[i] + (c.f)(t, x[i], u_n, z));
            pred_row[i] = pv;
            let val = match p {
                Some(pen) => pen.prox(dt, pv)?,
                None => pv,
            };
            if !val.is_finite() {
                return Err(Error::BlowUp {
                    step: k,
                    value: val,
                });
            }
            row[i] = val;
        }
    }
    Ok(ViGrid {
        eps,
        t_nodes: grid.nodes(),
        x_lo,
        dx,
        nx,
        u,
        pred: Some(pred),
    })
}

/// Backward proximal finite-difference solve on `[x_lo, x_hi]` with `nx`
/// nodes. Errors if the time step violates the diffusion CFL bound.
#[allow(clippy::too_many_arguments)]
pub fn solve_vi(
    c: &CoefficientSet,
    p: &ConvexPenalty,
    bounds: &VolBounds,
    eps: f64,
    x_lo: f64,
    x_hi: f64,
    nx: usize,
    grid: &TimeGrid,
) -> Result<ViGrid> {
    solve_vi_impl(c, Some(p), bounds, eps, x_lo, x_hi, nx, grid)
}

/// Same scheme with the prox stage removed entirely. Exists so the
/// zero-penalty collapse can be checked bit for bit.
pub fn solve_vi_explicit(
    c: &CoefficientSet,
    bounds: &VolBounds,
    eps: f64,
    x_lo: f64,
    x_hi: f64,
    nx: usize,
    grid: &TimeGrid,
) -> Result<ViGrid> {
    solve_vi_impl(c, None, bounds, eps, x_lo, x_hi, nx, grid)
}

/// Zero-noise field by characteristics: each node value is the start of the
/// limit backward pair launched from that node. Columns are independent and
/// solved in parallel.
pub fn limit_field_u0(
    c: &CoefficientSet,
    p: &ConvexPenalty,
    bounds: &VolBounds,
    x_nodes: &[f64],
    grid: &TimeGrid,
) -> Result<ViGrid> {
    let nx = x_nodes.len();
    if nx < 2 {
        return Err(Error::InvalidInput(
            "limit field needs at least two x nodes".to_string(),
        ));
    }
    let dx = (x_nodes[nx - 1] - x_nodes[0]) / (nx - 1) as f64;
    for (i, pair) in x_nodes.windows(2).enumerate() {
        let step = pair[1] - pair[0];
        if !(step > 0.0) || (step - dx).abs() > 1e-9 * (1.0 + dx.abs()) {
            return Err(Error::InvalidInput(format!(
                "x nodes must be uniformly increasing, offending cell {i}"
            )));
        }
    }
    let n = grid.n_steps;
    let columns: Result<Vec<Vec<f64>>> = x_nodes
        .par_iter()
        .map(|&xi| {
            let mut col = vec![0.0; n + 1];
            col[n] = (c.terminal)(xi);
            for k in 0..n {
                let sub = paths::make_time_grid(grid.node(k), grid.t_end, n - k)?;
                let phi = forward::solve_limit_ode(c, xi, &sub)?;
                let bw = solve_limit_backward(c, p, bounds, &phi, &sub)?;
                col[k] = bw.psi[0];
            }
            Ok(col)
        })
        .collect();
    let columns = columns?;
    let mut u = vec![0.0; (n + 1) * nx];
    for (i, col) in columns.iter().enumerate() {
        for k in 0..=n {
            u[k * nx + i] = col[k];
        }
    }
    Ok(ViGrid {
        eps: 0.0,
        t_nodes: grid.nodes(),
        x_lo: x_nodes[0],
        dx,
        nx,
        u,
        pred: None,
    })
}

/// Evaluates the field along a shifted path: element `k` is
/// `u(t_k, x0 + phi_tilde[k])` by linear interpolation. Queries outside the
/// window are refused rather than extrapolated.
pub fn eval_f(field: &ViGrid, x0: f64, phi_tilde: &[f64]) -> Result<Vec<f64>> {
    if phi_tilde.len() != field.t_nodes.len() {
        return Err(Error::LengthMismatch {
            what: "shift path",
            expected: field.t_nodes.len(),
            got: phi_tilde.len(),
        });
    }
    let x_hi = field.x_hi();
    let mut out = Vec::with_capacity(phi_tilde.len());
    for (k, &sh) in phi_tilde.iter().enumerate() {
        let q = x0 + sh;
        if q < field.x_lo || q > x_hi || !q.is_finite() {
            return Err(Error::WindowEscape { step: k, x: q });
        }
        let (j, frac) = locate(field.x_lo, field.dx, field.nx, q);
        out.push(lerp(field.row(k), j, frac));
    }
    Ok(out)
}

/// Reads the backward quadruple off the field along one forward path. The
/// terminal node takes the terminal map directly; interior nodes
/// interpolate the field, the gradient (for `z`), and the predictors (for
/// the selection); `k` is the residual that closes the discrete dynamics.
pub fn reconstruct_backward(
    field: &ViGrid,
    fx: &ForwardSolution,
    c: &CoefficientSet,
    p: &ConvexPenalty,
    path: &GPath,
) -> Result<BackwardSolution> {
    let n = field.t_nodes.len() - 1;
    if fx.x.len() != n + 1 {
        return Err(Error::LengthMismatch {
            what: "forward path",
            expected: n + 1,
            got: fx.x.len(),
        });
    }
    if path.b_incr.len() != n {
        return Err(Error::LengthMismatch {
            what: "driver increments",
            expected: n,
            got: path.b_incr.len(),
        });
    }
    let pred_all = field.pred.as_ref().ok_or_else(|| {
        Error::InvalidInput("field carries no predictors; reconstruct needs a noisy solve".into())
    })?;
    let dt = field.t_nodes[1] - field.t_nodes[0];
    let x_hi = field.x_hi();
    let eps = field.eps;
    let nx = field.nx;

    let mut y = vec![0.0; n + 1];
    let mut z = vec![0.0; n + 1];
    let mut kk = vec![0.0; n + 1];
    let mut u_sel = vec![0.0; n];

    for k in 0..=n {
        let xk = fx.x[k];
        if xk < field.x_lo || xk > x_hi {
            return Err(Error::WindowEscape { step: k, x: xk });
        }
        let (j, frac) = locate(field.x_lo, field.dx, nx, xk);
        let row = field.row(k);
        y[k] = if k == n {
            (c.terminal)(xk)
        } else {
            lerp(row, j, frac)
        };
        z[k] = eps * (c.sigma)(xk) * slope_at(row, j, frac, field.dx, nx);
        if k < n {
            let pr = lerp(&pred_all[k * nx..(k + 1) * nx], j, frac);
            u_sel[k] = p.yosida(dt, pr)?;
        }
    }
    for k in 0..n {
        let t = field.t_nodes[k];
        let fv = (c.f)(t, fx.x[k], y[k], z[k]);
        let gv = (c.g)(t, fx.x[k], y[k], z[k]);
        let dk = (y[k + 1] - y[k]) + fv * dt - u_sel[k] * dt + gv * path.qv_incr[k]
            - z[k] * path.b_incr[k];
        kk[k + 1] = kk[k] + dk;
    }
    Ok(BackwardSolution { y, z, k: kk, u_sel })
}

/// Error curves and fitted orders for one penalty.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub penalty: String,
    pub eps: Vec<f64>,
    pub e_y: Vec<f64>,
    pub e_z: Vec<f64>,
    pub e_k: Vec<f64>,
    pub e_x: Vec<f64>,
    pub slope_y: SlopeFit,
    pub slope_z: SlopeFit,
    pub slope_k: SlopeFit,
    pub slope_x: SlopeFit,
}

// Per (path, scenario, penalty) streaming statistics.
const M_SUP_Y: usize = 0;
const M_INT_Z: usize = 1;
const M_SUP_K: usize = 2;
const METRICS: usize = 3;

/// Runs the ladder experiment: for each epsilon, solve the field per
/// penalty, stream every (path, scenario) pair once, and reduce worst-case
/// means of the three backward gaps plus the forward gap. Returns one report
/// per penalty, each with fitted log-log slopes.
#[allow(clippy::too_many_arguments)]
pub fn convergence_experiment(
    c: &CoefficientSet,
    penalties: &[ConvexPenalty],
    bounds: &VolBounds,
    x0: f64,
    eps_ladder: &[f64],
    family: &[Scenario],
    n_paths: usize,
    grid: &TimeGrid,
    seed: u64,
) -> Result<Vec<ConvergenceReport>> {
    if eps_ladder.len() < 3 {
        return Err(Error::InvalidInput(
            "epsilon ladder needs at least 3 entries".to_string(),
        ));
    }
    if !eps_ladder.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput(
            "epsilon ladder must be strictly decreasing".to_string(),
        ));
    }
    if penalties.is_empty() {
        return Err(Error::InvalidInput("no penalties given".to_string()));
    }
    if family.is_empty() {
        return Err(Error::NoScenarios);
    }
    if n_paths == 0 {
        return Err(Error::InvalidInput("n_paths must be positive".to_string()));
    }
    let n = grid.n_steps;
    let dt = grid.dt;
    let n_pen = penalties.len();
    let n_scen = family.len();

    let phi = forward::solve_limit_ode(c, x0, grid)?;
    let mut psis = Vec::with_capacity(n_pen);
    for p in penalties {
        psis.push(solve_limit_backward(c, p, bounds, &phi, grid)?);
    }
    // m_all[pen][scen] is the per-scenario martingale of that penalty's pair.
    let mut m_all = Vec::with_capacity(n_pen);
    for bw in &psis {
        let mut per_scen = Vec::with_capacity(n_scen);
        for scen in family {
            per_scen.push(build_limit_martingale(c, bounds, &phi, bw, scen, grid)?.m);
        }
        m_all.push(per_scen);
    }
    let sqrt_v: Vec<Vec<f64>> = family
        .iter()
        .map(|s| s.var_path.iter().map(|v| v.sqrt()).collect())
        .collect();
    let qv_incr: Vec<Vec<f64>> = family
        .iter()
        .map(|s| s.var_path.iter().map(|v| v * dt).collect())
        .collect();

    let stride = n_scen * (n_pen * METRICS + 1);
    let mut curves = vec![vec![0.0f64; eps_ladder.len()]; n_pen * METRICS + 1];

    for (ei, &eps) in eps_ladder.iter().enumerate() {
        let (w_lo, w_hi) = spatial_window(c, bounds, eps, x0, grid);
        let dx_floor = eps * c.bound_l * (dt * bounds.sigma_hi_sq / 0.8).sqrt();
        let width = w_hi - w_lo;
        let mut nx = if dx_floor > 0.0 {
            ((width / dx_floor).floor() as usize + 1).min(1025)
        } else {
            1025
        };
        nx = nx.max(9);
        let fields: Vec<ViGrid> = penalties
            .iter()
            .map(|p| solve_vi(c, p, bounds, eps, w_lo, w_hi, nx, grid))
            .collect::<Result<_>>()?;

        let per_path: Result<Vec<Vec<f64>>> = (0..n_paths as u64)
            .into_par_iter()
            .map(|pi| {
                let mut out = vec![0.0f64; stride];
                let dw = rng::driver_increments(seed, pi, n, dt);
                for (si, _scen) in family.iter().enumerate() {
                    let sv = &sqrt_v[si];
                    let qv = &qv_incr[si];
                    let base = si * (n_pen * METRICS + 1);
                    stream_one(
                        c, penalties, &fields, &psis, &m_all, x0, eps, dt, n, sv, qv, &dw, &phi,
                        si, &mut out[base..base + n_pen * METRICS + 1],
                    )?;
                }
                Ok(out)
            })
            .collect();
        let per_path = per_path?;

        // Reduce: worst scenario of the per-scenario path means.
        let mut scratch = vec![0.0f64; n_paths];
        for slot in 0..n_pen * METRICS + 1 {
            let mut samples = Vec::with_capacity(n_scen);
            for si in 0..n_scen {
                let off = si * (n_pen * METRICS + 1) + slot;
                for (pi, row) in per_path.iter().enumerate() {
                    scratch[pi] = row[off];
                }
                samples.push((family[si].id, scratch.clone()));
            }
            let e = sublinear_expectation(&ScenarioSamples::new(samples)?)?;
            curves[slot][ei] = e;
        }
    }

    let loglog = |vals: &[f64]| -> Result<SlopeFit> {
        let pts: Vec<(f64, f64)> = eps_ladder
            .iter()
            .zip(vals.iter())
            .map(|(&e, &v)| (e.ln(), v.ln()))
            .collect();
        fit_slope(&pts)
    };
    let e_x = curves[n_pen * METRICS].clone();
    let slope_x = loglog(&e_x)?;
    let mut reports = Vec::with_capacity(n_pen);
    for (pi, p) in penalties.iter().enumerate() {
        let e_y = curves[pi * METRICS + M_SUP_Y].clone();
        let e_z = curves[pi * METRICS + M_INT_Z].clone();
        let e_k = curves[pi * METRICS + M_SUP_K].clone();
        reports.push(ConvergenceReport {
            penalty: format!("{p:?}"),
            eps: eps_ladder.to_vec(),
            slope_y: loglog(&e_y)?,
            slope_z: loglog(&e_z)?,
            slope_k: loglog(&e_k)?,
            slope_x,
            e_y,
            e_z,
            e_k,
            e_x: e_x.clone(),
        });
    }
    Ok(reports)
}

// Advances one (path, scenario) pair through the grid, updating the running
// gaps for every penalty in lock step with the forward state. Writes
// [pen-major metrics..., sup|X - phi|^2] into `out`.
#[allow(clippy::too_many_arguments)]
fn stream_one(
    c: &CoefficientSet,
    penalties: &[ConvexPenalty],
    fields: &[ViGrid],
    psis: &[crate::limitbw::LimitBackward],
    m_all: &[Vec<Vec<f64>>],
    x0: f64,
    eps: f64,
    dt: f64,
    n: usize,
    sqrt_v: &[f64],
    qv_incr: &[f64],
    dw: &[f64],
    phi: &LimitForward,
    si: usize,
    out: &mut [f64],
) -> Result<()> {
    let n_pen = penalties.len();
    let f0 = &fields[0];
    let (x_lo, dx, nx, x_hi) = (f0.x_lo, f0.dx, f0.nx, f0.x_hi());
    let t0 = f0.t_nodes[0];

    let mut x = x0;
    let mut sup_x = 0.0f64;
    let mut ys = [0.0f64; 8];
    let mut k_run = [0.0f64; 8];
    let mut sup_y = [0.0f64; 8];
    let mut sup_k = [0.0f64; 8];
    let mut int_z = [0.0f64; 8];
    assert!(n_pen <= 8, "at most 8 penalties per streamed run");

    if x < x_lo || x > x_hi {
        return Err(Error::WindowEscape { step: 0, x });
    }
    {
        let (j, frac) = locate(x_lo, dx, nx, x);
        for (pi, field) in fields.iter().enumerate() {
            ys[pi] = lerp(field.row(0), j, frac);
            let gap = (ys[pi] - psis[pi].psi[0]).abs();
            sup_y[pi] = gap * gap;
        }
    }

    for k in 0..n {
        let t = t0 + k as f64 * dt;
        let (j, frac) = locate(x_lo, dx, nx, x);
        let sig_x = (c.sigma)(x);
        let db = sqrt_v[k] * dw[k];
        let dqv = qv_incr[k];

        let x_next = fwd_step(c, eps, x, dt, db, dqv);
        if !(x_lo..=x_hi).contains(&x_next) {
            return Err(Error::WindowEscape { step: k + 1, x: x_next });
        }
        let gap_x = (x_next - phi.phi[k + 1]).abs();
        if gap_x * gap_x > sup_x {
            sup_x = gap_x * gap_x;
        }
        let (j2, frac2) = locate(x_lo, dx, nx, x_next);

        for pi in 0..n_pen {
            let field = &fields[pi];
            let row = field.row(k);
            let zk = eps * sig_x * slope_at(row, j, frac, dx, nx);
            let pred_row = field.pred.as_ref().expect("noisy fields carry predictors");
            let pr = lerp(&pred_row[k * nx..(k + 1) * nx], j, frac);
            let us = penalties[pi].yosida(dt, pr)?;
            let y_next = if k + 1 == n {
                (c.terminal)(x_next)
            } else {
                lerp(field.row(k + 1), j2, frac2)
            };
            let fv = (c.f)(t, x, ys[pi], zk);
            let gv = (c.g)(t, x, ys[pi], zk);
            let dk = (y_next - ys[pi]) + fv * dt - us * dt + gv * dqv - zk * db;
            k_run[pi] += dk;
            let km_gap = k_run[pi] - m_all[pi][si][k + 1];
            if km_gap * km_gap > sup_k[pi] {
                sup_k[pi] = km_gap * km_gap;
            }
            int_z[pi] += zk * zk * dt;
            let y_gap = (y_next - psis[pi].psi[k + 1]).abs();
            if y_gap * y_gap > sup_y[pi] {
                sup_y[pi] = y_gap * y_gap;
            }
            ys[pi] = y_next;
        }
        x = x_next;
    }
    for pi in 0..n_pen {
        out[pi * METRICS + M_SUP_Y] = sup_y[pi];
        out[pi * METRICS + M_INT_Z] = int_z[pi];
        out[pi * METRICS + M_SUP_K] = sup_k[pi];
    }
    out[n_pen * METRICS] = sup_x;
    Ok(())
}
