//! Command execution: each subcommand turns a validated plan into artifacts
//! under the output directory and finishes with a manifest tying them to the
//! input digests.

use std::path::{Path, PathBuf};

use gldp_core::forward::{self, ForwardSolution};
use gldp_core::ldp::{empirical_ldp_curve, fit_slope, theoretical_rate_inf};
use gldp_core::limitbw::solve_limit_backward;
use gldp_core::paths::{build_g_path, scenario_family, Scenario, TimeGrid};
use gldp_core::ratefn::{lambda_prime, lambda_rate, psi_hat_b_only, RateResult};
use gldp_core::vi::{convergence_experiment, limit_field_u0, solve_vi, spatial_window};
use gldp_core::limitbw::build_limit_martingale;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{parse_target_text, ExperimentConfig, RateTarget, RunPlan};
use crate::csvio::{fnum, write_csv};
use crate::errors::{io_err, CliError};
use crate::manifest::{self, sha256_hex, ArtifactRecord, InputRecord};
use crate::svg::{self, Series};

struct RunContext {
    out_dir: PathBuf,
    artifacts: Vec<ArtifactRecord>,
}

impl RunContext {
    fn record(&mut self, name: &str) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        let bytes = std::fs::read(&path)
            .map_err(|e| CliError::Io(format!("reread artifact {}: {e}", path.display())))?;
        self.artifacts.push(ArtifactRecord {
            name: name.to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn add_csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        write_csv(&self.out_dir.join(name), header, rows)?;
        self.record(name)
    }

    fn add_svg(&mut self, name: &str, doc: String) -> Result<(), CliError> {
        std::fs::write(self.out_dir.join(name), doc).map_err(|e| io_err("write svg", e))?;
        self.record(name)
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Io(format!("serialize {name}: {e}")))?;
        std::fs::write(self.out_dir.join(name), text + "\n")
            .map_err(|e| io_err("write json", e))?;
        self.record(name)
    }
}

/// Runs `command` against the config at `config_path`. Artifacts land in
/// `--out` when given, else in the config's `out_dir`.
pub fn run(
    command: &str,
    config_path: &Path,
    out_override: Option<PathBuf>,
    workers: Option<usize>,
) -> Result<(), CliError> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".to_string()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    }

    let config_text = std::fs::read_to_string(config_path).map_err(|e| {
        CliError::Config(format!("cannot read config {}: {e}", config_path.display()))
    })?;
    let plan = ExperimentConfig::load_str(&config_text, command)?;
    let mut inputs = vec![InputRecord {
        name: config_path.display().to_string(),
        sha256: sha256_hex(config_text.as_bytes()),
    }];

    let out_dir = out_override
        .or_else(|| plan.out_dir.clone())
        .ok_or_else(|| {
            CliError::Config("no output directory: set out_dir in the config or pass --out".into())
        })?;
    std::fs::create_dir_all(&out_dir).map_err(|e| io_err("create output directory", e))?;

    let mut ctx = RunContext {
        out_dir: out_dir.clone(),
        artifacts: Vec::new(),
    };
    match command {
        "simulate-forward" => cmd_simulate_forward(&plan, &mut ctx)?,
        "solve-limit" => cmd_solve_limit(&plan, &mut ctx)?,
        "solve-vi" => cmd_solve_vi(&plan, &mut ctx)?,
        "verify-convergence" => cmd_verify_convergence(&plan, &mut ctx)?,
        "rate-function" => cmd_rate_function(&plan, &mut ctx, &mut inputs)?,
        "ldp-check" => cmd_ldp_check(&plan, &mut ctx)?,
        other => return Err(CliError::Config(format!("unknown command {other:?}"))),
    }

    manifest::write_manifest(
        &out_dir,
        command,
        &plan.raw,
        plan.seed,
        &inputs,
        rayon::current_num_threads(),
        &ctx.artifacts,
    )
}

fn family_for(plan: &RunPlan) -> Vec<Scenario> {
    scenario_family(
        &plan.bounds,
        &plan.grid,
        plan.n_random_scenarios,
        plan.seed,
    )
}

fn node_points(grid: &TimeGrid, values: &[f64]) -> Vec<(f64, f64)> {
    (0..values.len()).map(|k| (grid.node(k), values[k])).collect()
}

/// Solves every (path, scenario) pair at one noise level. Paths are farmed
/// out in parallel and re-assembled in index order, so the batch layout does
/// not depend on the worker count.
fn forward_batch(
    plan: &RunPlan,
    family: &[Scenario],
    eps: f64,
) -> Result<Vec<ForwardSolution>, CliError> {
    let per_path: Vec<Vec<ForwardSolution>> = (0..plan.n_paths as u64)
        .into_par_iter()
        .map(|pi| -> gldp_core::Result<Vec<ForwardSolution>> {
            let mut sols = Vec::with_capacity(family.len());
            for scen in family {
                let path = build_g_path(scen, &plan.grid, plan.seed, pi)?;
                sols.push(forward::solve_forward(
                    &plan.coefficients,
                    eps,
                    plan.x0,
                    &path,
                    scen,
                    &plan.grid,
                )?);
            }
            Ok(sols)
        })
        .collect::<gldp_core::Result<Vec<_>>>()?;
    Ok(per_path.into_iter().flatten().collect())
}

fn cmd_simulate_forward(plan: &RunPlan, ctx: &mut RunContext) -> Result<(), CliError> {
    let grid = &plan.grid;
    let family = family_for(plan);
    let limit = forward::solve_limit_ode(&plan.coefficients, plan.x0, grid)?;

    let mut errors: Vec<(f64, f64)> = Vec::new();
    for &eps in &plan.forward.eps_list {
        let batch = forward_batch(plan, &family, eps)?;
        let e = forward::forward_error(&batch, &limit, plan.forward.error_power)?;
        errors.push((eps, e));
    }
    ctx.add_csv(
        "forward_error.csv",
        &["eps", "e_x"],
        errors.iter().map(|&(eps, e)| vec![fnum(eps), fnum(e)]),
    )?;

    if errors.len() >= 3 {
        let pts: Vec<(f64, f64)> = errors.iter().map(|&(e, v)| (e.ln(), v.ln())).collect();
        let fit = fit_slope(&pts)?;
        ctx.add_json("forward_summary.json", &fit)?;
    }
    if errors.len() >= 2 {
        let doc = svg::line_plot(
            "worst-case forward error vs noise level",
            "log10 eps",
            "log10 error",
            &[Series {
                label: "e_x".to_string(),
                points: &errors,
            }],
            true,
        );
        ctx.add_svg("forward_error.svg", doc)?;
    }

    // Sample paths at the smallest requested noise level.
    let eps_view = *plan.forward.eps_list.last().expect("validated non-empty");
    let n_sample = plan.forward.sample_paths.min(plan.n_paths) as u64;
    let mut rows = Vec::new();
    let mut stored: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for scen in &family {
        for pi in 0..n_sample {
            let path = build_g_path(scen, grid, plan.seed, pi)?;
            let sol = forward::solve_forward(&plan.coefficients, eps_view, plan.x0, &path, scen, grid)?;
            let mut pts = Vec::with_capacity(grid.n_steps + 1);
            for k in 0..=grid.n_steps {
                rows.push(vec![
                    fnum(grid.node(k)),
                    scen.id.to_string(),
                    pi.to_string(),
                    fnum(sol.x[k]),
                    fnum(limit.phi[k]),
                ]);
                pts.push((grid.node(k), sol.x[k]));
            }
            if stored.len() < 8 {
                stored.push((format!("scenario {} path {}", scen.id, pi), pts));
            }
        }
    }
    ctx.add_csv(
        "sample_paths.csv",
        &["t", "scenario_id", "path_index", "x", "phi"],
        rows,
    )?;
    let limit_pts = node_points(grid, &limit.phi);
    let mut series: Vec<Series> = stored
        .iter()
        .map(|(label, pts)| Series {
            label: label.clone(),
            points: pts,
        })
        .collect();
    series.push(Series {
        label: "limit".to_string(),
        points: &limit_pts,
    });
    ctx.add_svg(
        "forward_paths.svg",
        svg::line_plot(
            &format!("forward paths at eps = {eps_view}"),
            "t",
            "x",
            &series,
            false,
        ),
    )
}

fn cmd_solve_limit(plan: &RunPlan, ctx: &mut RunContext) -> Result<(), CliError> {
    let grid = &plan.grid;
    let phi = forward::solve_limit_ode(&plan.coefficients, plan.x0, grid)?;
    let bw = solve_limit_backward(&plan.coefficients, &plan.penalty, &plan.bounds, &phi, grid)?;

    let rows = (0..=grid.n_steps).map(|k| {
        vec![
            fnum(grid.node(k)),
            fnum(phi.phi[k]),
            fnum(bw.psi[k]),
            if k < grid.n_steps {
                fnum(bw.u_sel[k])
            } else {
                String::new()
            },
        ]
    });
    ctx.add_csv("limit_path.csv", &["t", "phi", "psi", "u_sel"], rows)?;

    let family = family_for(plan);
    let mut mart_rows = Vec::new();
    let mut mart_series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for scen in &family {
        let m = build_limit_martingale(&plan.coefficients, &plan.bounds, &phi, &bw, scen, grid)?;
        for k in 0..=grid.n_steps {
            mart_rows.push(vec![
                scen.id.to_string(),
                fnum(grid.node(k)),
                fnum(m.m[k]),
            ]);
        }
        if mart_series.len() < 8 {
            mart_series.push((format!("scenario {}", scen.id), node_points(grid, &m.m)));
        }
    }
    ctx.add_csv("limit_martingale.csv", &["scenario_id", "t", "m"], mart_rows)?;

    let phi_pts = node_points(grid, &phi.phi);
    let psi_pts = node_points(grid, &bw.psi);
    ctx.add_svg(
        "limit_paths.svg",
        svg::line_plot(
            "zero-noise pair",
            "t",
            "value",
            &[
                Series {
                    label: "phi".to_string(),
                    points: &phi_pts,
                },
                Series {
                    label: "psi".to_string(),
                    points: &psi_pts,
                },
            ],
            false,
        ),
    )?;
    let series: Vec<Series> = mart_series
        .iter()
        .map(|(label, pts)| Series {
            label: label.clone(),
            points: pts,
        })
        .collect();
    ctx.add_svg(
        "limit_martingale.svg",
        svg::line_plot("compensator per scenario", "t", "m", &series, false),
    )
}

fn cmd_solve_vi(plan: &RunPlan, ctx: &mut RunContext) -> Result<(), CliError> {
    let grid = &plan.grid;
    let vp = plan.vi.as_ref().expect("validated");
    let (dlo, dhi) = spatial_window(&plan.coefficients, &plan.bounds, vp.eps, plan.x0, grid);
    let x_lo = vp.x_lo.unwrap_or(dlo);
    let x_hi = vp.x_hi.unwrap_or(dhi);
    if !(x_lo < x_hi) {
        return Err(CliError::Config(format!(
            "vi window is empty: [{x_lo}, {x_hi}]"
        )));
    }
    let field = solve_vi(
        &plan.coefficients,
        &plan.penalty,
        &plan.bounds,
        vp.eps,
        x_lo,
        x_hi,
        vp.nx,
        grid,
    )?;

    let mut rows = Vec::with_capacity((grid.n_steps + 1) * field.nx);
    for k in 0..=grid.n_steps {
        let row = field.row(k);
        for (i, &u) in row.iter().enumerate() {
            rows.push(vec![
                fnum(field.t_nodes[k]),
                fnum(field.x_node(i)),
                fnum(u),
            ]);
        }
    }
    ctx.add_csv("field.csv", &["t", "x", "u"], rows)?;

    ctx.add_svg(
        "field_heatmap.svg",
        svg::heatmap(
            &format!("value field at eps = {}", vp.eps),
            "x",
            "t",
            (x_lo, field.x_hi()),
            (grid.s, grid.t_end),
            grid.n_steps + 1,
            field.nx,
            &field.u,
        ),
    )
}

fn cmd_verify_convergence(plan: &RunPlan, ctx: &mut RunContext) -> Result<(), CliError> {
    let family = family_for(plan);
    let reports = convergence_experiment(
        &plan.coefficients,
        std::slice::from_ref(&plan.penalty),
        &plan.bounds,
        plan.x0,
        &plan.eps_ladder,
        &family,
        plan.n_paths,
        &plan.grid,
        plan.seed,
    )?;
    let report = &reports[0];
    let label = &plan.penalty_label;

    let err_rows = report.eps.iter().enumerate().map(|(i, &eps)| {
        vec![
            label.clone(),
            fnum(eps),
            fnum(report.e_y[i]),
            fnum(report.e_z[i]),
            fnum(report.e_k[i]),
            fnum(report.e_x[i]),
        ]
    });
    ctx.add_csv(
        "errors.csv",
        &["penalty", "eps", "e_y", "e_z", "e_k", "e_x"],
        err_rows,
    )?;

    let slope_rows = [
        ("y", &report.slope_y),
        ("z", &report.slope_z),
        ("k", &report.slope_k),
        ("x", &report.slope_x),
    ]
    .into_iter()
    .map(|(q, s)| {
        vec![
            label.clone(),
            q.to_string(),
            fnum(s.slope),
            fnum(s.intercept),
            fnum(s.r_squared),
        ]
    });
    ctx.add_csv(
        "slopes.csv",
        &["penalty", "quantity", "slope", "intercept", "r_squared"],
        slope_rows,
    )?;

    let curves: Vec<(&str, &Vec<f64>)> = vec![
        ("e_y", &report.e_y),
        ("e_z", &report.e_z),
        ("e_k", &report.e_k),
        ("e_x", &report.e_x),
    ];
    let pts: Vec<(String, Vec<(f64, f64)>)> = curves
        .into_iter()
        .map(|(name, vals)| {
            (
                name.to_string(),
                report.eps.iter().copied().zip(vals.iter().copied()).collect(),
            )
        })
        .collect();
    let series: Vec<Series> = pts
        .iter()
        .map(|(label, p)| Series {
            label: label.clone(),
            points: p,
        })
        .collect();
    ctx.add_svg(
        "error_curves.svg",
        svg::line_plot(
            "convergence of the four gaps",
            "log10 eps",
            "log10 error",
            &series,
            true,
        ),
    )
}

fn cmd_rate_function(
    plan: &RunPlan,
    ctx: &mut RunContext,
    inputs: &mut Vec<InputRecord>,
) -> Result<(), CliError> {
    let grid = &plan.grid;
    let rp = plan.rate.as_ref().expect("validated");
    let target: Vec<f64> = match &rp.target {
        RateTarget::Inline(v) => v.clone(),
        RateTarget::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read target file {}: {e}", path.display()))
            })?;
            inputs.push(InputRecord {
                name: path.display().to_string(),
                sha256: sha256_hex(text.as_bytes()),
            });
            parse_target_text(&text, &path.display().to_string())?
        }
    };

    let (kind, result): (&str, RateResult) = if rp.backward {
        let (dlo, dhi) = spatial_window(&plan.coefficients, &plan.bounds, 0.0, plan.x0, grid);
        let x_lo = rp.x_lo.unwrap_or(dlo);
        let x_hi = rp.x_hi.unwrap_or(dhi);
        if !(x_lo < x_hi) {
            return Err(CliError::Config(format!(
                "rate window is empty: [{x_lo}, {x_hi}]"
            )));
        }
        let xs: Vec<f64> = (0..rp.nx)
            .map(|i| x_lo + (x_hi - x_lo) * i as f64 / (rp.nx - 1) as f64)
            .collect();
        let field = limit_field_u0(&plan.coefficients, &plan.penalty, &plan.bounds, &xs, grid)?;
        (
            "backward",
            lambda_prime(&plan.coefficients, &plan.bounds, plan.x0, &target, &field, grid)?,
        )
    } else if plan.psi_hat_b_only {
        (
            "drift_only",
            psi_hat_b_only(&plan.coefficients, plan.x0, &target, grid)?,
        )
    } else {
        (
            "forward",
            lambda_rate(&plan.coefficients, &plan.bounds, plan.x0, &target, grid)?,
        )
    };

    #[derive(Serialize)]
    struct RateDoc<'a> {
        kind: &'a str,
        value: f64,
        infinite: bool,
        result: &'a RateResult,
    }
    ctx.add_json(
        "rate.json",
        &RateDoc {
            kind,
            value: result.value,
            infinite: result.infinite,
            result: &result,
        },
    )?;

    let control_rows = (0..result.phi_dot.len()).map(|k| {
        vec![
            fnum(grid.node(k)),
            fnum(result.phi_dot[k]),
            fnum(result.eta_dot[k]),
        ]
    });
    ctx.add_csv("controls.csv", &["t_left", "phi_dot", "eta_dot"], control_rows)?;

    let lln = forward::solve_limit_ode(&plan.coefficients, plan.x0, grid)?;
    let target_pts: Vec<(f64, f64)> = target
        .iter()
        .enumerate()
        .map(|(k, &v)| (grid.node(k.min(grid.n_steps)), v))
        .collect();
    let lln_pts = node_points(grid, &lln.phi);
    ctx.add_svg(
        "rate_targets.svg",
        svg::line_plot(
            "target path against the zero-noise limit",
            "t",
            "value",
            &[
                Series {
                    label: "target".to_string(),
                    points: &target_pts,
                },
                Series {
                    label: "limit".to_string(),
                    points: &lln_pts,
                },
            ],
            false,
        ),
    )
}

fn cmd_ldp_check(plan: &RunPlan, ctx: &mut RunContext) -> Result<(), CliError> {
    let grid = &plan.grid;
    let lp = plan.ldp.as_ref().expect("validated");
    let family = family_for(plan);
    let curve = empirical_ldp_curve(
        &lp.event,
        &plan.coefficients,
        &plan.bounds,
        plan.x0,
        &plan.eps_ladder,
        &family,
        plan.n_paths,
        grid,
        plan.seed,
    )?;
    let rate = theoretical_rate_inf(
        &lp.event,
        &plan.coefficients,
        &plan.bounds,
        plan.x0,
        grid,
        lp.candidate_family_size,
    )?;

    let rows = curve.iter().map(|p| {
        vec![
            fnum(p.eps),
            fnum(p.eps_log_capacity),
            p.n_hits.to_string(),
            p.n_paths.to_string(),
            p.argmax_scenario_id.to_string(),
        ]
    });
    ctx.add_csv(
        "ldp_curve.csv",
        &["eps", "eps_log_capacity", "n_hits", "n_paths", "argmax_scenario_id"],
        rows,
    )?;

    // Band check at the smallest noise level with at least one hit.
    let band = curve
        .iter()
        .rev()
        .find(|p| p.n_hits > 0)
        .filter(|_| rate.is_finite() && rate > 0.0)
        .map(|p| -p.eps_log_capacity / rate);
    #[derive(Serialize)]
    struct LdpSummary<'a> {
        theoretical_rate_inf: f64,
        band_ratio_smallest_eps: Option<f64>,
        points: &'a [gldp_core::ldp::CurvePoint],
    }
    ctx.add_json(
        "ldp_summary.json",
        &LdpSummary {
            theoretical_rate_inf: rate,
            band_ratio_smallest_eps: band,
            points: &curve,
        },
    )?;

    let emp_pts: Vec<(f64, f64)> = curve
        .iter()
        .map(|p| (p.eps, p.eps_log_capacity))
        .collect();
    let mut series = vec![Series {
        label: "eps log capacity".to_string(),
        points: &emp_pts,
    }];
    let bound_pts;
    if rate.is_finite() {
        let lo = plan.eps_ladder.last().copied().unwrap_or(0.0);
        let hi = plan.eps_ladder.first().copied().unwrap_or(1.0);
        bound_pts = vec![(lo, -rate), (hi, -rate)];
        series.push(Series {
            label: "-candidate rate".to_string(),
            points: &bound_pts,
        });
    }
    ctx.add_svg(
        "capacity_curve.svg",
        svg::line_plot(
            "capacity decay against the candidate bound",
            "eps",
            "eps log capacity",
            &series,
            false,
        ),
    )
}
