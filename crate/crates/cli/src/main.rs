//! Command-line front end: train, evaluate, audit, and export oracle data.
//!
//! Exit codes: 0 success (training converged), 2 training finished without
//! convergence, 1 configuration or I/O error.

mod config;

use clap::{Parser, Subcommand};
use config::{resolve_problem, validate_strip, RunConfig};
use hjb_pinn::hjb::HJBProblem;
use hjb_pinn::networks::{
    convexity_audit, init_params, minor_positivity_audit, Smoothness, ValueNet,
};
use hjb_pinn::oracle::{analytic, stable_nt, vanishing_viscosity_fd, verify_oracle};
use hjb_pinn::rng::RngStreams;
use hjb_pinn::surface::{
    evaluate_surface, write_analytic_csv, write_grid_csv, write_surface_csv,
};
use hjb_pinn::training::{strip_train, train, write_history_csv, TrainStatus};
use hjb_pinn::{Error, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hjb-pinn",
    version,
    about = "Viscosity solutions of HJB equations via convexity-constrained neural value functions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a value network from a run configuration file
    Train {
        /// Path to the run configuration (JSON)
        config: PathBuf,
    },
    /// Evaluate a checkpoint on a grid; writes surface.csv and metrics.json
    Eval {
        checkpoint: PathBuf,
        /// Builtin problem id or problem definition file
        problem: String,
        /// Grid sizes per input axis, e.g. `51x51` (time axis first on
        /// finite horizons)
        #[arg(long)]
        grid: Option<String>,
        /// Sub-box to evaluate on, e.g. `8:10,-1:1`; must lie inside the
        /// problem box
        #[arg(long = "box")]
        sub_box: Option<String>,
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Seed for the convexity-audit stream
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Audit a checkpoint: midpoint convexity for convex families,
    /// Hessian-minor positivity sampling for smooth networks
    Audit {
        checkpoint: PathBuf,
        problem: String,
        /// Number of sampled pairs (or points for minor sampling)
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report file
        #[arg(long, default_value = "audit.json")]
        out: PathBuf,
    },
    /// Verify and export oracle data for a problem; optionally run the
    /// vanishing-viscosity finite-difference reference
    Oracle {
        problem: String,
        /// Viscosity coefficient for the FD reference (1D finite horizon)
        #[arg(long = "fd-eps")]
        fd_eps: Option<f64>,
        /// FD spatial resolution
        #[arg(long, default_value_t = 201)]
        nx: usize,
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let result = match cli.cmd {
        Cmd::Train { config } => cmd_train(&config),
        Cmd::Eval {
            checkpoint,
            problem,
            grid,
            sub_box,
            out,
            seed,
        } => cmd_eval(&checkpoint, &problem, grid.as_deref(), sub_box.as_deref(), &out, seed),
        Cmd::Audit {
            checkpoint,
            problem,
            pairs,
            seed,
            out,
        } => cmd_audit(&checkpoint, &problem, pairs, seed, &out),
        Cmd::Oracle {
            problem,
            fd_eps,
            nx,
            out,
        } => cmd_oracle(&problem, fd_eps, nx, &out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a RunConfig,
    seed: u64,
    status: &'a str,
    detail: String,
    final_loss: f64,
    epochs_logged: usize,
    elapsed_seconds: f64,
}

fn cmd_train(config_path: &Path) -> Result<u8> {
    let run_cfg = RunConfig::load(config_path)?;
    let problem = resolve_problem(&run_cfg.problem)?;
    let net = run_cfg.network.build(&problem)?;
    let tcfg = run_cfg.train_config()?;
    tcfg.check_pairing(&net)?;
    validate_strip(&run_cfg.strip, &problem, &net)?;

    std::fs::create_dir_all(&run_cfg.out_dir)?;
    let streams = RngStreams::new(run_cfg.seed);
    let params = init_params(&net, &mut streams.stream("init"));

    let start = std::time::Instant::now();
    let outcome = match &run_cfg.strip {
        Some(schedule) => strip_train(&problem, &net, params, &tcfg, schedule)?,
        None => train(&problem, &net, params, &tcfg)?,
    };
    let elapsed = start.elapsed().as_secs_f64();

    hjb_pinn::checkpoint::save(&run_cfg.out_dir.join("checkpoint.json"), &net, &outcome.params)?;
    write_history_csv(&run_cfg.out_dir.join("history.csv"), &outcome.history)?;

    let (status, detail) = match &outcome.status {
        TrainStatus::Converged => ("converged", String::new()),
        TrainStatus::NonConverged { detail, .. } => ("non_converged", detail.clone()),
    };
    let manifest = Manifest {
        config: &run_cfg,
        seed: run_cfg.seed,
        status,
        detail: detail.clone(),
        final_loss: outcome.final_loss,
        epochs_logged: outcome.history.len(),
        elapsed_seconds: elapsed,
    };
    std::fs::write(
        run_cfg.out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;

    println!(
        "{status}: final loss {:.3e}, {} epochs logged, {:.1} s",
        outcome.final_loss,
        outcome.history.len(),
        elapsed
    );
    if !detail.is_empty() {
        println!("  {detail}");
    }
    Ok(if outcome.status.is_converged() { 0 } else { 2 })
}

fn parse_grid(s: &str, dims: usize) -> Result<Vec<usize>> {
    let counts: Vec<usize> = s
        .split('x')
        .map(|p| {
            p.parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("bad grid spec `{s}`")))
        })
        .collect::<Result<_>>()?;
    if counts.len() != dims {
        return Err(Error::InvalidConfig(format!(
            "grid spec `{s}` has {} axes, problem input has {dims}",
            counts.len()
        )));
    }
    if counts.iter().any(|&c| c < 2) {
        return Err(Error::InvalidConfig("grid needs at least 2 points per axis".into()));
    }
    Ok(counts)
}

fn parse_box(s: &str, problem: &HJBProblem) -> Result<Vec<(f64, f64)>> {
    let full = problem.input_box();
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != full.len() {
        return Err(Error::InvalidConfig(format!(
            "box spec `{s}` has {} axes, problem input has {}",
            parts.len(),
            full.len()
        )));
    }
    let mut out = Vec::with_capacity(parts.len());
    for (part, &(lo_full, hi_full)) in parts.iter().zip(&full) {
        let (lo_s, hi_s) = part
            .split_once(':')
            .ok_or_else(|| Error::InvalidConfig(format!("bad box interval `{part}`")))?;
        let lo: f64 = lo_s
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad box bound `{lo_s}`")))?;
        let hi: f64 = hi_s
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad box bound `{hi_s}`")))?;
        if !(lo < hi) {
            return Err(Error::InvalidConfig(format!("empty box interval `{part}`")));
        }
        if lo < lo_full - 1e-12 || hi > hi_full + 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "box interval `{part}` lies outside the problem box \
                 [{lo_full}, {hi_full}]"
            )));
        }
        out.push((lo, hi));
    }
    Ok(out)
}

fn default_grid(problem: &HJBProblem) -> Vec<usize> {
    if problem.horizon().is_finite() {
        std::iter::once(21)
            .chain(std::iter::repeat(41).take(problem.state_dim()))
            .collect()
    } else {
        vec![51; problem.state_dim()]
    }
}

fn cmd_eval(
    ckpt: &Path,
    problem_arg: &str,
    grid: Option<&str>,
    sub_box: Option<&str>,
    out: &Path,
    seed: u64,
) -> Result<u8> {
    let (net, params) = hjb_pinn::checkpoint::load(ckpt)?;
    let problem = resolve_problem(problem_arg)?;
    if net.input_dim() != problem.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.input_dim(),
            got: net.input_dim(),
        });
    }
    let counts = match grid {
        Some(s) => parse_grid(s, problem.input_dim())?,
        None => default_grid(&problem),
    };
    let eval_box = match sub_box {
        Some(s) => parse_box(s, &problem)?,
        None => problem.input_box(),
    };

    // Only a verified oracle provides truth values; otherwise the metrics
    // stay residual-only.
    let truth = match problem.id() {
        Some(id) => match analytic(id) {
            Ok(sol) => {
                let status = verify_oracle(id)?;
                if status.verified {
                    Some(sol)
                } else {
                    eprintln!(
                        "oracle `{id}` unverified (max residual {:.3e}); \
                         reporting residual-only metrics",
                        status.report.max_abs_residual
                    );
                    None
                }
            }
            Err(_) => None,
        },
        None => None,
    };

    let (records, mut metrics) =
        evaluate_surface(&net, &params, &problem, &eval_box, &counts, truth.as_ref())?;
    if net.positive_block().is_some() {
        let mut rng = RngStreams::new(seed).stream("audit");
        let report = convexity_audit(&net, &params, &problem.input_box(), 10_000, &mut rng)?;
        metrics.convexity_violations = Some(report.violations);
    }

    std::fs::create_dir_all(out)?;
    write_surface_csv(&out.join("surface.csv"), &problem, &records)?;
    std::fs::write(
        out.join("metrics.json"),
        serde_json::to_string_pretty(&metrics)?,
    )?;
    println!(
        "max_abs_err: {}  rel_linf_err: {}  max_abs_residual: {:.3e}  convexity_violations: {}",
        metrics
            .max_abs_err
            .map_or("n/a".into(), |v| format!("{v:.3e}")),
        metrics
            .rel_linf_err
            .map_or("n/a".into(), |v| format!("{v:.3e}")),
        metrics.max_abs_residual,
        metrics
            .convexity_violations
            .map_or("n/a".into(), |v| v.to_string()),
    );
    Ok(0)
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum AuditOutput {
    MidpointConvexity(hjb_pinn::networks::AuditReport),
    HessianMinors(hjb_pinn::networks::MinorAuditReport),
}

fn cmd_audit(ckpt: &Path, problem_arg: &str, pairs: usize, seed: u64, out: &Path) -> Result<u8> {
    let (net, params) = hjb_pinn::checkpoint::load(ckpt)?;
    let problem = resolve_problem(problem_arg)?;
    if net.input_dim() != problem.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.input_dim(),
            got: net.input_dim(),
        });
    }
    let mut rng = RngStreams::new(seed).stream("audit");
    let report = if net.positive_block().is_some() {
        AuditOutput::MidpointConvexity(convexity_audit(
            &net,
            &params,
            &problem.input_box(),
            pairs,
            &mut rng,
        )?)
    } else if net.smoothness() == Smoothness::CInf {
        AuditOutput::HessianMinors(minor_positivity_audit(
            &net, &params, &problem, pairs, &mut rng,
        )?)
    } else {
        return Err(Error::InvalidConfig(
            "network is neither convex-constrained nor twice differentiable; \
             nothing to audit"
                .into(),
        ));
    };
    std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
    match &report {
        AuditOutput::MidpointConvexity(r) => println!(
            "midpoint convexity: {} violations in {} pairs (max excess {:.3e})",
            r.violations, r.pairs, r.max_violation
        ),
        AuditOutput::HessianMinors(r) => println!(
            "hessian minors: fraction nonnegative {:.4} (worst minor {:.3e})",
            r.frac_minors_nonneg, r.worst_minor
        ),
    }
    Ok(0)
}

#[derive(Serialize)]
struct FdReport {
    eps: f64,
    nx: usize,
    nt: usize,
    max_abs_err: Option<f64>,
    rel_err_vs_max: Option<f64>,
}

#[derive(Serialize)]
struct OracleOutput {
    verification: Option<hjb_pinn::oracle::OracleStatus>,
    fd: Option<FdReport>,
}

fn cmd_oracle(problem_arg: &str, fd_eps: Option<f64>, nx: usize, out: &Path) -> Result<u8> {
    let problem = resolve_problem(problem_arg)?;
    std::fs::create_dir_all(out)?;
    let mut output = OracleOutput {
        verification: None,
        fd: None,
    };

    if let Some(id) = problem.id() {
        if let Ok(solution) = analytic(id) {
            let status = verify_oracle(id)?;
            println!(
                "oracle `{id}`: {} (max residual {:.3e} over {} points)",
                if status.verified { "verified" } else { "UNVERIFIED" },
                status.report.max_abs_residual,
                status.report.points
            );
            write_analytic_csv(
                &out.join("oracle_surface.csv"),
                &problem,
                &solution,
                &default_grid(&problem),
            )?;
            output.verification = Some(status);
        }
    }

    if let Some(eps) = fd_eps {
        let nt = stable_nt(&problem, eps, nx)?;
        let grid = vanishing_viscosity_fd(&problem, eps, nx, nt)?;
        write_grid_csv(&out.join("fd_solution.csv"), &grid)?;
        let mut fd_report = FdReport {
            eps,
            nx,
            nt,
            max_abs_err: None,
            rel_err_vs_max: None,
        };
        if let Some(id) = problem.id() {
            if let Ok(sol) = analytic(id) {
                let mut max_err = 0.0f64;
                let mut max_true = 0.0f64;
                for (ti, &t) in grid.t.iter().enumerate() {
                    for (xi, &x) in grid.x.iter().enumerate() {
                        let vt = sol.eval(&[t, x]);
                        max_err = max_err.max((grid.values[ti][xi] - vt).abs());
                        max_true = max_true.max(vt.abs());
                    }
                }
                fd_report.max_abs_err = Some(max_err);
                fd_report.rel_err_vs_max = Some(max_err / max_true);
                println!(
                    "fd reference: eps {eps:.1e}, nt {nt}, max error {max_err:.3e} \
                     ({:.2}% of max |V*|)",
                    100.0 * max_err / max_true
                );
            }
        }
        output.fd = Some(fd_report);
    }

    std::fs::write(
        out.join("oracle_report.json"),
        serde_json::to_string_pretty(&output)?,
    )?;
    Ok(0)
}
