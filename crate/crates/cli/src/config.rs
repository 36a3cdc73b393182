//! Experiment configuration: one JSON document per run.
//!
//! Parsing is strict (unknown keys are errors) and validation happens in one
//! pass that turns the raw document into a `RunPlan` holding ready-to-use
//! solver inputs. Every rejection names the offending field.

use std::path::{Path, PathBuf};

use gldp_core::coeffs::{self, CoefficientSet};
use gldp_core::convex::ConvexPenalty;
use gldp_core::gcore::VolBounds;
use gldp_core::ldp::{EventKind, EventSpec, EventTarget};
use gldp_core::paths::{make_time_grid, TimeGrid};
use serde::Deserialize;

use crate::errors::CliError;
use crate::expr::{driver_fn, scalar_fn, Expr};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional echo of the subcommand; rejected if it names a different one.
    pub command: Option<String>,
    pub preset: Option<String>,
    pub coefficients: Option<InlineCoefficients>,
    pub penalty: Option<PenaltySpec>,
    pub bounds: BoundsSpec,
    pub x0: f64,
    #[serde(default)]
    pub s: f64,
    pub t_end: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub eps_ladder: Vec<f64>,
    #[serde(default = "default_n_random")]
    pub n_random_scenarios: usize,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub psi_hat_b_only: bool,
    pub forward: Option<ForwardBlock>,
    pub vi: Option<ViBlock>,
    pub rate: Option<RateBlock>,
    pub ldp: Option<LdpBlock>,
}

fn default_n_random() -> usize {
    3
}

fn default_n_paths() -> usize {
    1000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineCoefficients {
    #[serde(default = "default_inline_name")]
    pub name: String,
    pub b: Expr,
    pub h: Expr,
    pub sigma: Expr,
    pub terminal: Expr,
    pub f: Expr,
    pub g: Expr,
    pub lipschitz_l: f64,
    pub bound_l: f64,
}

fn default_inline_name() -> String {
    "inline".to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySpec {
    /// One of `zero`, `indicator`, `abs`, `quadratic`.
    pub kind: String,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub kappa: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub sigma_lo_sq: f64,
    pub sigma_hi_sq: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardBlock {
    /// Noise level when no ladder is given; with a ladder every rung runs.
    pub eps: Option<f64>,
    #[serde(default = "default_error_power")]
    pub error_power: f64,
    /// How many path indices of each scenario land in the sample-path CSV.
    #[serde(default = "default_sample_paths")]
    pub sample_paths: usize,
}

fn default_error_power() -> f64 {
    2.0
}

fn default_sample_paths() -> usize {
    4
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViBlock {
    pub eps: f64,
    pub nx: usize,
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateBlock {
    /// `forward` inverts the state path; `backward` first maps the target
    /// through the zero-noise decoupling field.
    #[serde(default = "default_rate_kind")]
    pub kind: String,
    pub target: Option<Vec<f64>>,
    pub target_file: Option<PathBuf>,
    #[serde(default = "default_rate_nx")]
    pub nx: usize,
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
}

fn default_rate_kind() -> String {
    "forward".to_string()
}

fn default_rate_nx() -> usize {
    201
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdpBlock {
    pub event: EventBlock,
    #[serde(default = "default_candidates")]
    pub candidate_family_size: usize,
}

fn default_candidates() -> usize {
    8
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventBlock {
    /// One of `exit_ball` (needs `delta`) or `terminal_above` (needs `level`).
    pub kind: String,
    pub delta: Option<f64>,
    pub level: Option<f64>,
    #[serde(default = "default_event_target")]
    pub target: String,
}

fn default_event_target() -> String {
    "forward_minus_limit".to_string()
}

/// Validated, solver-ready view of a config.
#[derive(Debug)]
pub struct RunPlan {
    pub coefficients: CoefficientSet,
    pub penalty: ConvexPenalty,
    pub penalty_label: String,
    pub bounds: VolBounds,
    pub x0: f64,
    pub grid: TimeGrid,
    pub eps_ladder: Vec<f64>,
    pub n_random_scenarios: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub psi_hat_b_only: bool,
    pub forward: ForwardPlan,
    pub vi: Option<ViPlan>,
    pub rate: Option<RatePlan>,
    pub ldp: Option<LdpPlan>,
    /// Raw parsed document, echoed into the manifest untouched.
    pub raw: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct ForwardPlan {
    pub eps_list: Vec<f64>,
    pub error_power: f64,
    pub sample_paths: usize,
}

#[derive(Debug, Clone)]
pub struct ViPlan {
    pub eps: f64,
    pub nx: usize,
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum RateTarget {
    Inline(Vec<f64>),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RatePlan {
    pub backward: bool,
    pub target: RateTarget,
    pub nx: usize,
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LdpPlan {
    pub event: EventSpec,
    pub candidate_family_size: usize,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn finite(value: f64, field: &str) -> Result<f64, CliError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad(format!("{field} must be finite, got {value}")))
    }
}

impl ExperimentConfig {
    /// Parses and validates the document at `path` for `command`.
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn load(path: &Path, command: &str) -> Result<RunPlan, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
        Self::load_str(&text, command)
    }

    /// Same as [`load`](Self::load) from an already-read document, so callers
    /// that digest the raw bytes read the file exactly once.
    pub fn load_str(text: &str, command: &str) -> Result<RunPlan, CliError> {
        let raw: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| bad(format!("config is not valid JSON: {e}")))?;
        let cfg: ExperimentConfig = serde_json::from_value(raw.clone())
            .map_err(|e| bad(format!("config rejected: {e}")))?;
        cfg.resolve(command, raw)
    }

    fn resolve(self, command: &str, raw: serde_json::Value) -> Result<RunPlan, CliError> {
        if let Some(named) = &self.command {
            if named != command {
                return Err(bad(format!(
                    "command field says {named:?} but the invoked subcommand is {command:?}"
                )));
            }
        }

        let coefficients = match (&self.preset, &self.coefficients) {
            (Some(_), Some(_)) => {
                return Err(bad("give either preset or coefficients, not both"))
            }
            (None, None) => return Err(bad("one of preset or coefficients is required")),
            (Some(name), None) => coeffs::preset(name).ok_or_else(|| {
                bad(format!(
                    "preset {name:?} is not one of flat, tanh-drift, classical"
                ))
            })?,
            (None, Some(inline)) => inline.build()?,
        };

        finite(self.bounds.sigma_lo_sq, "bounds.sigma_lo_sq")?;
        finite(self.bounds.sigma_hi_sq, "bounds.sigma_hi_sq")?;
        if !(self.bounds.sigma_lo_sq > 0.0) {
            return Err(bad(format!(
                "bounds.sigma_lo_sq must be positive, got {}",
                self.bounds.sigma_lo_sq
            )));
        }
        if self.bounds.sigma_lo_sq > self.bounds.sigma_hi_sq {
            return Err(bad(format!(
                "bounds.sigma_lo_sq ({}) exceeds bounds.sigma_hi_sq ({})",
                self.bounds.sigma_lo_sq, self.bounds.sigma_hi_sq
            )));
        }
        let bounds = VolBounds::new(self.bounds.sigma_lo_sq, self.bounds.sigma_hi_sq)
            .map_err(|e| bad(format!("bounds: {e}")))?;

        finite(self.x0, "x0")?;
        finite(self.s, "s")?;
        finite(self.t_end, "t_end")?;
        let grid = make_time_grid(self.s, self.t_end, self.n_steps)
            .map_err(|e| bad(format!("time grid: {e}")))?;

        for (i, &eps) in self.eps_ladder.iter().enumerate() {
            if !(eps.is_finite() && eps > 0.0 && eps <= 1.0) {
                return Err(bad(format!(
                    "eps_ladder[{i}] must lie in (0, 1], got {eps}"
                )));
            }
        }
        if !self.eps_ladder.windows(2).all(|w| w[0] > w[1]) {
            return Err(bad("eps_ladder must be strictly decreasing"));
        }

        let (penalty, penalty_label) = match &self.penalty {
            None => (ConvexPenalty::zero(), "zero".to_string()),
            Some(spec) => spec.build()?,
        };

        let forward = {
            let block = self.forward.as_ref();
            let eps_list = if !self.eps_ladder.is_empty() {
                self.eps_ladder.clone()
            } else if let Some(eps) = block.and_then(|b| b.eps) {
                if !(eps.is_finite() && eps > 0.0 && eps <= 1.0) {
                    return Err(bad(format!("forward.eps must lie in (0, 1], got {eps}")));
                }
                vec![eps]
            } else {
                Vec::new()
            };
            let error_power = block.map_or(2.0, |b| b.error_power);
            if !(error_power >= 1.0 && error_power.is_finite()) {
                return Err(bad(format!(
                    "forward.error_power must be at least 1, got {error_power}"
                )));
            }
            ForwardPlan {
                eps_list,
                error_power,
                sample_paths: block.map_or(4, |b| b.sample_paths),
            }
        };

        let vi = match &self.vi {
            None => None,
            Some(b) => {
                if !(b.eps.is_finite() && b.eps >= 0.0) {
                    return Err(bad(format!("vi.eps must be non-negative, got {}", b.eps)));
                }
                if b.nx < 3 {
                    return Err(bad(format!("vi.nx must be at least 3, got {}", b.nx)));
                }
                if let (Some(lo), Some(hi)) = (b.x_lo, b.x_hi) {
                    if !(lo < hi) {
                        return Err(bad(format!("vi.x_lo ({lo}) must be below vi.x_hi ({hi})")));
                    }
                }
                Some(ViPlan {
                    eps: b.eps,
                    nx: b.nx,
                    x_lo: b.x_lo,
                    x_hi: b.x_hi,
                })
            }
        };

        let rate = match &self.rate {
            None => None,
            Some(b) => {
                let backward = match b.kind.as_str() {
                    "forward" => false,
                    "backward" => true,
                    other => {
                        return Err(bad(format!(
                            "rate.kind must be forward or backward, got {other:?}"
                        )))
                    }
                };
                let target = match (&b.target, &b.target_file) {
                    (Some(_), Some(_)) => {
                        return Err(bad("give either rate.target or rate.target_file, not both"))
                    }
                    (None, None) => {
                        return Err(bad("rate needs a target or a target_file"))
                    }
                    (Some(vals), None) => RateTarget::Inline(vals.clone()),
                    (None, Some(p)) => RateTarget::File(p.clone()),
                };
                if b.nx < 3 {
                    return Err(bad(format!("rate.nx must be at least 3, got {}", b.nx)));
                }
                Some(RatePlan {
                    backward,
                    target,
                    nx: b.nx,
                    x_lo: b.x_lo,
                    x_hi: b.x_hi,
                })
            }
        };

        let ldp = match &self.ldp {
            None => None,
            Some(b) => {
                let kind = match b.event.kind.as_str() {
                    "exit_ball" => {
                        let delta = b
                            .event
                            .delta
                            .ok_or_else(|| bad("ldp.event.delta is required for exit_ball"))?;
                        EventKind::ExitBall { delta }
                    }
                    "terminal_above" => {
                        let level = b.event.level.ok_or_else(|| {
                            bad("ldp.event.level is required for terminal_above")
                        })?;
                        EventKind::TerminalAbove { level }
                    }
                    other => {
                        return Err(bad(format!(
                            "ldp.event.kind must be exit_ball or terminal_above, got {other:?}"
                        )))
                    }
                };
                let target = match b.event.target.as_str() {
                    "forward_minus_limit" => EventTarget::ForwardMinusLimit,
                    "backward_y" => EventTarget::BackwardY,
                    other => {
                        return Err(bad(format!(
                            "ldp.event.target must be forward_minus_limit or backward_y, got {other:?}"
                        )))
                    }
                };
                if b.candidate_family_size == 0 {
                    return Err(bad("ldp.candidate_family_size must be positive"));
                }
                Some(LdpPlan {
                    event: EventSpec { kind, target },
                    candidate_family_size: b.candidate_family_size,
                })
            }
        };

        let plan = RunPlan {
            coefficients,
            penalty,
            penalty_label,
            bounds,
            x0: self.x0,
            grid,
            eps_ladder: self.eps_ladder,
            n_random_scenarios: self.n_random_scenarios,
            n_paths: self.n_paths,
            seed: self.seed,
            out_dir: self.out_dir,
            psi_hat_b_only: self.psi_hat_b_only,
            forward,
            vi,
            rate,
            ldp,
            raw,
        };
        plan.check_command_inputs(command)?;
        Ok(plan)
    }
}

impl RunPlan {
    /// Per-command presence checks done after general validation so a config
    /// can carry blocks for several commands at once.
    fn check_command_inputs(&self, command: &str) -> Result<(), CliError> {
        match command {
            "simulate-forward" => {
                if self.forward.eps_list.is_empty() {
                    return Err(bad(
                        "simulate-forward needs eps_ladder entries or forward.eps",
                    ));
                }
            }
            "solve-limit" => {}
            "solve-vi" => {
                if self.vi.is_none() {
                    return Err(bad("solve-vi needs a vi block with eps and nx"));
                }
            }
            "verify-convergence" => {
                if self.eps_ladder.len() < 3 {
                    return Err(bad("verify-convergence needs at least 3 eps_ladder entries"));
                }
            }
            "rate-function" => {
                if self.rate.is_none() {
                    return Err(bad("rate-function needs a rate block with a target"));
                }
            }
            "ldp-check" => {
                if self.ldp.is_none() {
                    return Err(bad("ldp-check needs an ldp block with an event"));
                }
                if self.eps_ladder.is_empty() {
                    return Err(bad("ldp-check needs eps_ladder entries"));
                }
            }
            other => return Err(bad(format!("unknown command {other:?}"))),
        }
        Ok(())
    }
}

impl InlineCoefficients {
    fn build(&self) -> Result<CoefficientSet, CliError> {
        let scalar = |e: &Expr, field: &str| {
            scalar_fn(e).map_err(|m| bad(format!("coefficients.{field}: {m}")))
        };
        let driver = |e: &Expr, field: &str| {
            driver_fn(e).map_err(|m| bad(format!("coefficients.{field}: {m}")))
        };
        for (v, field) in [
            (self.lipschitz_l, "coefficients.lipschitz_l"),
            (self.bound_l, "coefficients.bound_l"),
        ] {
            finite(v, field)?;
            if !(v > 0.0) {
                return Err(bad(format!("{field} must be positive, got {v}")));
            }
        }
        Ok(CoefficientSet {
            name: self.name.clone(),
            b: scalar(&self.b, "b")?,
            h: scalar(&self.h, "h")?,
            sigma: scalar(&self.sigma, "sigma")?,
            terminal: scalar(&self.terminal, "terminal")?,
            f: driver(&self.f, "f")?,
            g: driver(&self.g, "g")?,
            lipschitz_l: self.lipschitz_l,
            bound_l: self.bound_l,
        })
    }
}

impl PenaltySpec {
    fn build(&self) -> Result<(ConvexPenalty, String), CliError> {
        let need = |v: Option<f64>, field: &str| {
            v.ok_or_else(|| bad(format!("penalty.{field} is required for kind {:?}", self.kind)))
        };
        match self.kind.as_str() {
            "zero" => Ok((ConvexPenalty::zero(), "zero".to_string())),
            "indicator" => {
                let lo = need(self.lo, "lo")?;
                let hi = need(self.hi, "hi")?;
                let p = ConvexPenalty::indicator(lo, hi)
                    .map_err(|e| bad(format!("penalty: {e}")))?;
                Ok((p, format!("indicator[{lo},{hi}]")))
            }
            "abs" => {
                let kappa = need(self.kappa, "kappa")?;
                let p = ConvexPenalty::abs_scaled(kappa)
                    .map_err(|e| bad(format!("penalty: {e}")))?;
                Ok((p, format!("abs({kappa})")))
            }
            "quadratic" => {
                let kappa = need(self.kappa, "kappa")?;
                let p = ConvexPenalty::quadratic(kappa)
                    .map_err(|e| bad(format!("penalty: {e}")))?;
                Ok((p, format!("quadratic({kappa})")))
            }
            other => Err(bad(format!(
                "penalty.kind must be zero, indicator, abs or quadratic, got {other:?}"
            ))),
        }
    }
}

/// Parses target path text: one value per line, `#` comments and blank
/// lines skipped. `label` names the source in errors.
pub fn parse_target_text(text: &str, label: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let v: f64 = trimmed.parse().map_err(|_| {
            bad(format!(
                "target file {label} line {}: not a number: {trimmed:?}",
                ln + 1
            ))
        })?;
        out.push(v);
    }
    Ok(out)
}


#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn base() -> serde_json::Value {
        serde_json::json!({
            "preset": "flat",
            "bounds": {"sigma_lo_sq": 1.0, "sigma_hi_sq": 4.0},
            "x0": 0.0,
            "t_end": 1.0,
            "n_steps": 100
        })
    }

    #[test]
    fn minimal_config_loads() {
        let f = write_tmp(&base().to_string());
        let plan = ExperimentConfig::load(f.path(), "solve-limit").unwrap();
        assert_eq!(plan.coefficients.name, "flat");
        assert_eq!(plan.penalty_label, "zero");
        assert_eq!(plan.grid.n_steps, 100);
        assert_eq!(plan.n_paths, 1000);
    }

    #[test]
    fn swapped_bounds_name_the_field() {
        let mut v = base();
        v["bounds"] = serde_json::json!({"sigma_lo_sq": 4.0, "sigma_hi_sq": 1.0});
        let f = write_tmp(&v.to_string());
        let err = ExperimentConfig::load(f.path(), "solve-limit").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("sigma_lo_sq"), "{msg}");
        assert!(msg.contains("exceeds"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = base();
        v["surprise"] = serde_json::json!(1);
        let f = write_tmp(&v.to_string());
        let err = ExperimentConfig::load(f.path(), "solve-limit").unwrap_err();
        assert!(format!("{err}").contains("surprise"));
    }

    #[test]
    fn command_echo_must_match() {
        let mut v = base();
        v["command"] = serde_json::json!("solve-vi");
        let f = write_tmp(&v.to_string());
        assert!(ExperimentConfig::load(f.path(), "solve-limit").is_err());
        v["vi"] = serde_json::json!({"eps": 0.1, "nx": 21});
        let f = write_tmp(&v.to_string());
        assert!(ExperimentConfig::load(f.path(), "solve-vi").is_ok());
    }

    #[test]
    fn inline_coefficients_compile_and_run() {
        let mut v = base();
        v.as_object_mut().unwrap().remove("preset");
        v["coefficients"] = serde_json::json!({
            "b": {"tanh": "x"},
            "h": 0.0,
            "sigma": 1.0,
            "terminal": "x",
            "f": {"neg": "y"},
            "g": 0.0,
            "lipschitz_l": 1.0,
            "bound_l": 1.0
        });
        let f = write_tmp(&v.to_string());
        let plan = ExperimentConfig::load(f.path(), "solve-limit").unwrap();
        assert!(((plan.coefficients.b)(0.5) - 0.5f64.tanh()).abs() < 1e-15);
        assert_eq!((plan.coefficients.f)(0.0, 0.0, 2.0, 0.0), -2.0);
    }

    #[test]
    fn penalty_kinds_build_with_their_parameters() {
        let mut v = base();
        v["penalty"] = serde_json::json!({"kind": "indicator", "lo": -1.0, "hi": 1.0});
        let f = write_tmp(&v.to_string());
        let plan = ExperimentConfig::load(f.path(), "solve-limit").unwrap();
        assert_eq!(plan.penalty_label, "indicator[-1,1]");

        v["penalty"] = serde_json::json!({"kind": "abs"});
        let f = write_tmp(&v.to_string());
        let err = ExperimentConfig::load(f.path(), "solve-limit").unwrap_err();
        assert!(format!("{err}").contains("penalty.kappa"));
    }

    #[test]
    fn ladder_must_decrease() {
        let mut v = base();
        v["eps_ladder"] = serde_json::json!([0.1, 0.2]);
        let f = write_tmp(&v.to_string());
        let err = ExperimentConfig::load(f.path(), "solve-limit").unwrap_err();
        assert!(format!("{err}").contains("decreasing"));
    }

    #[test]
    fn per_command_blocks_are_enforced() {
        let f = write_tmp(&base().to_string());
        assert!(ExperimentConfig::load(f.path(), "solve-vi").is_err());
        assert!(ExperimentConfig::load(f.path(), "rate-function").is_err());
        assert!(ExperimentConfig::load(f.path(), "ldp-check").is_err());
        assert!(ExperimentConfig::load(f.path(), "verify-convergence").is_err());
        assert!(ExperimentConfig::load(f.path(), "simulate-forward").is_err());
    }

    #[test]
    fn target_text_parses_with_comments() {
        let vals = parse_target_text("# header\n0.0\n0.5\n\n1.0\n", "inline").unwrap();
        assert_eq!(vals, vec![0.0, 0.5, 1.0]);
        let err = parse_target_text("0.0\nnope\n", "inline").unwrap_err();
        assert!(format!("{err}").contains("line 2"));
    }

    #[test]
    fn ldp_event_blocks_map_to_core_types() {
        let mut v = base();
        v["eps_ladder"] = serde_json::json!([0.5, 0.4]);
        v["ldp"] = serde_json::json!({"event": {"kind": "exit_ball", "delta": 2.0}});
        let f = write_tmp(&v.to_string());
        let plan = ExperimentConfig::load(f.path(), "ldp-check").unwrap();
        let ldp = plan.ldp.unwrap();
        assert_eq!(ldp.candidate_family_size, 8);
        match ldp.event.kind {
            EventKind::ExitBall { delta } => assert_eq!(delta, 2.0),
            other => panic!("wrong kind {other:?}"),
        }
        assert_eq!(ldp.event.target, EventTarget::ForwardMinusLimit);
    }
}
