//! Coefficient sets for the forward and backward equations.
//!
//! All six functions are kept behind shared callables so tests can supply
//! custom shapes. Presets cover the three standard configurations: a flat set
//! where everything factorizes in closed form, a bounded smooth set exercising
//! every term, and the classical alias meant to be paired with a degenerate
//! volatility interval.

use std::sync::Arc;

use rand::Rng;

use crate::rng;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Driver signature `(t, x, y, z) -> value`.
pub type DriverFn = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;

/// Drift `b`, mixed drift `h`, diffusion `sigma`, terminal map, and the two
/// backward drivers `f`, `g`, together with the declared Lipschitz and bound
/// constants the validation probes check against.
#[derive(Clone)]
pub struct CoefficientSet {
    pub name: String,
    pub b: ScalarFn,
    pub h: ScalarFn,
    pub sigma: ScalarFn,
    pub terminal: ScalarFn,
    pub f: DriverFn,
    pub g: DriverFn,
    pub lipschitz_l: f64,
    pub bound_l: f64,
}

impl std::fmt::Debug for CoefficientSet {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("CoefficientSet")
            .field("name", &self.name)
            .field("lipschitz_l", &self.lipschitz_l)
            .field("bound_l", &self.bound_l)
            .finish_non_exhaustive()
    }
}

/// Everything off: zero drifts and drivers, unit diffusion, identity
/// terminal map. The forward solution is an exactly scaled noise path.
pub fn flat() -> CoefficientSet {
    CoefficientSet {
        name: "flat".to_string(),
        b: Arc::new(|_| 0.0),
        h: Arc::new(|_| 0.0),
        sigma: Arc::new(|_| 1.0),
        terminal: Arc::new(|x| x),
        f: Arc::new(|_, _, _, _| 0.0),
        g: Arc::new(|_, _, _, _| 0.0),
        lipschitz_l: 1.0,
        bound_l: 1.0,
    }
}

/// Smooth bounded set with every term active: saturating drift, small
/// oscillatory mixed drift, non-constant diffusion, damped driver with a
/// spatial source, and a bounded terminal map.
pub fn tanh_drift() -> CoefficientSet {
    CoefficientSet {
        name: "tanh-drift".to_string(),
        b: Arc::new(f64::tanh),
        h: Arc::new(|x| 0.1 * x.cos()),
        sigma: Arc::new(|x| 1.0 + 0.5 * x.cos() * x.cos()),
        terminal: Arc::new(f64::atan),
        f: Arc::new(|_, x, y, _| -y + x.sin()),
        g: Arc::new(|_, _, y, _| 0.5 * y.cos()),
        lipschitz_l: 2.0,
        bound_l: 2.0,
    }
}

/// Same functions as [`tanh_drift`]; intended for runs with a degenerate
/// volatility interval where the worst-case machinery collapses to a single
/// classical scenario.
pub fn classical() -> CoefficientSet {
    CoefficientSet {
        name: "classical".to_string(),
        ..tanh_drift()
    }
}

/// Looks a preset up by its config name.
pub fn preset(name: &str) -> Option<CoefficientSet> {
    match name {
        "flat" => Some(flat()),
        "tanh-drift" => Some(tanh_drift()),
        "classical" => Some(classical()),
        _ => None,
    }
}

/// Probed sups and difference quotients for one coefficient set.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub max_abs_b: f64,
    pub max_abs_h: f64,
    pub max_abs_sigma: f64,
    pub min_sigma: f64,
    pub quot_b: f64,
    pub quot_h: f64,
    pub quot_sigma: f64,
    pub quot_terminal: f64,
    pub quot_f: f64,
    pub quot_g: f64,
    pub bounds_ok: bool,
    pub lipschitz_ok: bool,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.bounds_ok && self.lipschitz_ok
    }
}

/// Estimates sups and Lipschitz quotients on `[probe_lo, probe_hi]` with
/// `n_probes` deterministic random points and checks them against the set's
/// declared constants. The margin only absorbs floating-point noise; a genuine
/// violation of the declared constants fails the report.
pub fn validate_coefficients(
    c: &CoefficientSet,
    probe_lo: f64,
    probe_hi: f64,
    n_probes: usize,
    seed: u64,
) -> ValidationReport {
    let mut r = rng::probe_rng(seed);
    let margin = 1e-9;

    let mut xs: Vec<f64> = Vec::with_capacity(n_probes);
    for _ in 0..n_probes {
        xs.push(r.gen_range(probe_lo..=probe_hi));
    }

    let sup = |f: &ScalarFn| xs.iter().fold(0.0f64, |m, &x| m.max(f(x).abs()));
    let max_abs_b = sup(&c.b);
    let max_abs_h = sup(&c.h);
    let max_abs_sigma = sup(&c.sigma);
    let min_sigma = xs
        .iter()
        .fold(f64::INFINITY, |m, &x| m.min((c.sigma)(x)));

    let quot_scalar = |f: &ScalarFn| {
        let mut q = 0.0f64;
        for pair in xs.chunks_exact(2) {
            let (x, x2) = (pair[0], pair[1]);
            if x != x2 {
                q = q.max((f(x) - f(x2)).abs() / (x - x2).abs());
            }
        }
        q
    };
    let quot_b = quot_scalar(&c.b);
    let quot_h = quot_scalar(&c.h);
    let quot_sigma = quot_scalar(&c.sigma);
    let quot_terminal = quot_scalar(&c.terminal);

    let mut quot_driver = |f: &DriverFn| {
        let mut q = 0.0f64;
        for _ in 0..n_probes {
            let t = r.gen_range(0.0..=1.0);
            let (x, x2) = (r.gen_range(probe_lo..=probe_hi), r.gen_range(probe_lo..=probe_hi));
            let (y, y2) = (r.gen_range(probe_lo..=probe_hi), r.gen_range(probe_lo..=probe_hi));
            let (z, z2) = (r.gen_range(probe_lo..=probe_hi), r.gen_range(probe_lo..=probe_hi));
            let denom = (x - x2).abs() + (y - y2).abs() + (z - z2).abs();
            if denom > 0.0 {
                q = q.max((f(t, x, y, z) - f(t, x2, y2, z2)).abs() / denom);
            }
        }
        q
    };
    let quot_f = quot_driver(&c.f);
    let quot_g = quot_driver(&c.g);

    let tol = 1.0 + margin;
    let bounds_ok = max_abs_b <= c.bound_l * tol
        && max_abs_h <= c.bound_l * tol
        && max_abs_sigma <= c.bound_l * tol;
    let lipschitz_ok = [quot_b, quot_h, quot_sigma, quot_terminal, quot_f, quot_g]
        .iter()
        .all(|&q| q <= c.lipschitz_l * tol);

    ValidationReport {
        max_abs_b,
        max_abs_h,
        max_abs_sigma,
        min_sigma,
        quot_b,
        quot_h,
        quot_sigma,
        quot_terminal,
        quot_f,
        quot_g,
        bounds_ok,
        lipschitz_ok,
    }
}
