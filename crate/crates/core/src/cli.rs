//! The `mcpinn` command line: `train`, `estimate`, `abc` and `oracle`.
//!
//! Each run reads an optional config file, writes its artifacts into one
//! output directory and finishes with `manifest.json`. Exit status is 0 on
//! success, 1 on a numerical failure and 2 on a config or usage error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::abc::{abc_rejection, kde_1d, kde_grid, scott_bandwidth, OracleModel, Posterior, SurrogateModel};
use crate::config::{self, AbcModel, EstimateConfig, Ini, Operator, OracleRun, TestField};
use crate::error::{Error, Result};
use crate::estimator::{mc_caputo, mc_frac_laplacian, EstimatorConfig, SampleGroup};
use crate::fmt::{csv_string, fmt_f64, write_atomic};
use crate::net::{load_checkpoint, save_checkpoint, ParamVector};
use crate::oracle::{caputo_exp_decay, exact_solution_laplacian, forcing_laplacian, quad_caputo, quad_frac_laplacian, Profile, QuadSpec};
use crate::problems::{Ansatz, Family, ProblemSpec};
use crate::rng::{domain as tags, RngKey};
use crate::special::gamma;
use crate::train::{coefficient_names, train, TrainConfig, TrainReport, TrainState};

#[derive(Debug, Parser)]
#[command(name = "mcpinn", version, about = "Monte Carlo PINNs for fractional PDEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Train a surrogate and write traces, checkpoint and reports.
    Train(Flags),
    /// Sweep Monte Carlo estimator settings against reference values.
    Estimate(Flags),
    /// Rejection ABC for (alpha, mu) with density estimates.
    Abc(Flags),
    /// Deterministic reference values at listed points.
    Oracle(Flags),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Warm start for `train`, surrogate parameters for `abc`.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Estimate(_) => "estimate",
            Command::Abc(_) => "abc",
            Command::Oracle(_) => "oracle",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Train(f) | Command::Estimate(f) | Command::Abc(f) | Command::Oracle(f) => f,
        }
    }
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        _ => 1,
    }
}

/// Settings shared by all subcommands after merging flags over `[run]`.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub command: &'static str,
    pub ini: Ini,
    pub seed: Option<u64>,
    pub workers: usize,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
    started: f64,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

impl RunContext {
    pub fn resolve(command: &Command) -> Result<Self> {
        let flags = command.flags();
        let ini = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                Ini::parse(&text)?
            }
            None => Ini::default(),
        };
        let run = config::run_section(&ini)?;
        let seed = flags.seed.or(run.seed);
        if seed.is_none() && !matches!(command, Command::Oracle(_)) {
            return Err(Error::Config("a seed is required: pass --seed or set [run] seed".into()));
        }
        let workers = flags.workers.or(run.workers).unwrap_or(1);
        if workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let out = flags
            .out
            .clone()
            .or(run.out)
            .ok_or_else(|| Error::Config("an output directory is required: pass --out or set [run] out".into()))?;
        Ok(Self {
            command: command.name(),
            ini,
            seed,
            workers,
            out,
            checkpoint: flags.checkpoint.clone(),
            started: now(),
        })
    }

    fn seed(&self) -> u64 {
        self.seed.expect("seed checked in resolve")
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        write_atomic(&self.path(name), text.as_bytes())
    }

    /// Hex SHA-256 of `blob <len>\0<echo>`, the git object framing.
    pub fn config_hash(&self) -> String {
        let echo = self.ini.echo();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", echo.len()));
        h.update(echo.as_bytes());
        h.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn write_manifest(&self, status: &str, counters: Value, metrics: Value, artifacts: &[&str]) -> Result<()> {
        let m = json!({
            "tool": "mcpinn",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "status": status,
            "seed": self.seed,
            "workers": self.workers,
            "config": self.ini.echo(),
            "config_hash": self.config_hash(),
            "started_unix": self.started,
            "finished_unix": now(),
            "counters": counters,
            "metrics": metrics,
            "artifacts": artifacts,
        });
        let text = serde_json::to_string_pretty(&m).map_err(|e| Error::Io(e.to_string()))?;
        self.write("manifest.json", &(text + "\n"))
    }
}

/// Parses nothing; runs an already parsed command line. Returns a short
/// human-readable summary.
pub fn run(cli: &Cli) -> Result<String> {
    let ctx = RunContext::resolve(&cli.command)?;
    std::fs::create_dir_all(&ctx.out)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", ctx.out.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", ctx.workers)))?;
    pool.install(|| match &cli.command {
        Command::Train(_) => cmd_train(&ctx),
        Command::Estimate(_) => cmd_estimate(&ctx),
        Command::Abc(_) => cmd_abc(&ctx),
        Command::Oracle(_) => cmd_oracle(&ctx),
    })
}

fn check_layout(params: &ParamVector, spec: &ProblemSpec) -> Result<()> {
    if params.spec() != &spec.network || params.layout.pde != spec.trainable() {
        return Err(Error::Config(
            "checkpoint layout does not match the configured problem".into(),
        ));
    }
    Ok(())
}

pub fn cmd_train(ctx: &RunContext) -> Result<String> {
    let spec = config::problem(&ctx.ini)?;
    let cfg = config::train(&ctx.ini, &spec, ctx.seed())?;
    let mut state = match &ctx.checkpoint {
        Some(path) => {
            let params = load_checkpoint(path)?;
            check_layout(&params, &spec)?;
            TrainState::from_params(&spec, params, RngKey::new(cfg.seed))
        }
        None => TrainState::new(&spec, &cfg),
    };
    let outcome = train(&spec, &cfg, &mut state);

    let names = coefficient_names(&spec);
    let mut artifacts = vec!["loss_trace.csv", "checkpoint.txt"];
    write_loss_trace(ctx, &state, &names)?;
    save_checkpoint(&state.params, &ctx.path("checkpoint.txt"))?;
    if !spec.trainable().is_empty() {
        let mut header = vec!["epoch"];
        header.extend(names.iter().map(String::as_str));
        let rows: Vec<Vec<f64>> = state
            .param_trace
            .iter()
            .map(|(e, c)| std::iter::once(*e as f64).chain(c.iter().copied()).collect())
            .collect();
        ctx.write("param_trace.csv", &csv_string(&header, &rows))?;
        artifacts.push("param_trace.csv");
    }
    let c = state.counts;
    let counters = json!({
        "steps": state.epoch,
        "equation_queries": c.equation_queries,
        "data_queries": c.data_queries,
        "network_rows": c.network_rows,
        "residual_points": c.residual_points,
        "queries_per_point": c.queries_per_point(),
    });

    let report = match outcome {
        Ok(r) => r,
        Err(e) => {
            let metrics = json!({ "error": e.to_string(), "epochs_completed": state.epoch });
            ctx.write_manifest("numerical failure", counters, metrics, &artifacts)?;
            return Err(e);
        }
    };
    write_report(ctx, &names, &report, &cfg)?;
    artifacts.push("report.csv");
    if spec.dim() <= 3 {
        ctx.write("solution_grid.csv", &solution_grid(&spec, &state.params))?;
        artifacts.push("solution_grid.csv");
    }
    let coeffs: serde_json::Map<String, Value> = names
        .iter()
        .zip(&report.coefficients)
        .map(|(n, v)| (n.clone(), json!(v)))
        .collect();
    let metrics = json!({
        "epochs": report.epochs,
        "final_loss": report.final_loss.map(|p| p.total),
        "relative_l2": report.relative_l2,
        "coefficients": coeffs,
    });
    artifacts.push("manifest.json");
    ctx.write_manifest("ok", counters, metrics, &artifacts)?;
    Ok(match report.relative_l2 {
        Some(e) => format!("trained {} epochs, relative L2 {}", report.epochs, fmt_f64(e)),
        None => format!("trained {} epochs", report.epochs),
    })
}

fn write_loss_trace(ctx: &RunContext, state: &TrainState, names: &[String]) -> Result<()> {
    let mut header = vec!["epoch", "total", "equ", "g", "u", "lr"];
    header.extend(names.iter().map(String::as_str));
    let rows: Vec<Vec<f64>> = state
        .loss_trace
        .iter()
        .map(|r| {
            let mut row = vec![r.epoch as f64, r.parts.total, r.parts.equ, r.parts.g, r.parts.u, r.lr];
            row.extend_from_slice(&r.coeffs);
            row
        })
        .collect();
    ctx.write("loss_trace.csv", &csv_string(&header, &rows))
}

fn write_report(ctx: &RunContext, names: &[String], r: &TrainReport, cfg: &TrainConfig) -> Result<()> {
    let mut s = String::from("metric,value\n");
    let mut row = |k: &str, v: String| {
        let _ = writeln!(s, "{k},{v}");
    };
    row("epochs", r.epochs.to_string());
    row("m", cfg.estimator.m.to_string());
    row("r0", fmt_f64(cfg.estimator.r0));
    if let Some(p) = r.final_loss {
        row("final_total", fmt_f64(p.total));
    }
    if let Some(e) = r.relative_l2 {
        row("relative_l2", fmt_f64(e));
    }
    for (n, v) in names.iter().zip(&r.coefficients) {
        row(n, fmt_f64(*v));
    }
    row("queries_per_point", fmt_f64(r.counts.queries_per_point()));
    ctx.write("report.csv", &s)
}

/// Surrogate and reference on the first one or two coordinates, the rest
/// fixed at 0, at `t = T` for time-dependent problems and at `(α₀, 0)` for
/// parametric ones.
pub fn solution_grid(spec: &ProblemSpec, params: &ParamVector) -> String {
    let d = spec.dim();
    let axis: Vec<f64> = (0..101).map(|k| -1.0 + 0.02 * k as f64).collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let tail: Vec<f64> = match &spec.family {
        Family::ParametricDiffusion { alpha0, .. } => vec![*alpha0, 0.0],
        _ => spec.horizon().into_iter().collect(),
    };
    let mut inputs = Vec::new();
    let mut add = |xs: &[f64]| {
        let mut x = vec![0.0; d];
        x[..xs.len()].copy_from_slice(xs);
        x.extend_from_slice(&tail);
        inputs.push(x);
    };
    if d == 1 {
        axis.iter().for_each(|&a| add(&[a]));
    } else {
        for &a in &axis {
            for &b in &axis {
                add(&[a, b]);
            }
        }
    }
    let u = Ansatz::new(params, d).eval_rows(&inputs);
    for (x, v) in inputs.iter().zip(u) {
        let exact = match &spec.family {
            Family::ParametricDiffusion { alpha0, .. } => exact_solution_laplacian(&x[..d], *alpha0),
            _ => spec.exact(x).expect("non-parametric families have exact solutions"),
        };
        let mut row = x[..d.min(2)].to_vec();
        row.extend([v, exact]);
        rows.push(row);
    }
    let header: &[&str] = if d == 1 { &["x1", "u", "exact"] } else { &["x1", "x2", "u", "exact"] };
    csv_string(header, &rows)
}

fn bump(x: &[f64]) -> f64 {
    let m = 1.0 - x.iter().map(|v| v * v).sum::<f64>();
    if m <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / m).exp()
    }
}

fn space_field(field: TestField, alpha: f64) -> impl Fn(&[f64]) -> f64 + Sync {
    move |x: &[f64]| match field {
        TestField::Manufactured => exact_solution_laplacian(x, alpha),
        TestField::Quadratic => Profile::Quadratic.value(x, alpha),
        TestField::Constant => 1.0,
        TestField::Bump => bump(x),
    }
}

fn time_field(field: TestField) -> impl Fn(f64) -> f64 + Sync {
    move |t: f64| match field {
        TestField::Manufactured => (-t).exp(),
        TestField::Quadratic => t * t,
        TestField::Constant => 1.0,
        TestField::Bump => t.sin(),
    }
}

/// Closed-form operator value when the field has one.
fn analytic(op: Operator, field: TestField, point: &[f64], alpha: f64, gamma_order: f64) -> Result<Option<f64>> {
    Ok(match (op, field) {
        (_, TestField::Constant) => Some(0.0),
        (_, TestField::Bump) => None,
        (Operator::Laplacian, TestField::Manufactured) => Some(forcing_laplacian(point, alpha)),
        (Operator::Laplacian, TestField::Quadratic) => Some(Profile::Quadratic.frac_laplacian(point, alpha)?),
        (Operator::Caputo, TestField::Manufactured) => Some(caputo_exp_decay(point[0], gamma_order)?),
        (Operator::Caputo, TestField::Quadratic) => {
            Some(2.0 * point[0].powf(2.0 - gamma_order) / gamma(3.0 - gamma_order)?)
        }
    })
}

/// Reference for the estimate sweep: analytic when available, otherwise
/// quadrature when the dimension allows it.
fn estimate_reference(cfg: &EstimateConfig) -> Result<Option<f64>> {
    let point = match cfg.operator {
        Operator::Laplacian => cfg.point.clone(),
        Operator::Caputo => vec![cfg.t],
    };
    if let Some(v) = analytic(cfg.operator, cfg.field, &point, cfg.alpha, cfg.gamma)? {
        return Ok(Some(v));
    }
    let q = QuadSpec::default();
    match cfg.operator {
        Operator::Laplacian if point.len() <= 3 => {
            Ok(Some(quad_frac_laplacian(space_field(cfg.field, cfg.alpha), &point, cfg.alpha, &q)?.value))
        }
        Operator::Laplacian => Ok(None),
        Operator::Caputo => Ok(Some(quad_caputo(time_field(cfg.field), cfg.t, cfg.gamma, &q)?.value)),
    }
}

/// One row of the estimate sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateCell {
    pub m: usize,
    pub r0: f64,
    pub mean: f64,
    pub se: f64,
    pub z: Option<f64>,
    pub evals: usize,
}

/// Mean and standard error of `draws` independent m-sample estimates for
/// every `(m, r0)` pair; cell `k`, draw `i` uses key `(ESTIMATE, k, i)`.
pub fn estimate_sweep(cfg: &EstimateConfig, root: &RngKey, reference: Option<f64>) -> Result<Vec<EstimateCell>> {
    let key = root.child(tags::ESTIMATE);
    let mut cells = Vec::new();
    let pairs: Vec<(usize, f64)> = cfg
        .m_values
        .iter()
        .flat_map(|&m| cfg.r0_values.iter().map(move |&r0| (m, r0)))
        .collect();
    for (k, &(m, r0)) in pairs.iter().enumerate() {
        let est = EstimatorConfig {
            m,
            r0,
            eps: cfg.eps,
            eps_t: cfg.eps_t,
        };
        let one = |i: u64| -> Result<(f64, usize)> {
            let g = SampleGroup::draw(cfg.point.len(), m, &mut key.at(&[k as u64, i]).stream());
            let calls = std::cell::Cell::new(0usize);
            let v = match cfg.operator {
                Operator::Laplacian => {
                    let u = space_field(cfg.field, cfg.alpha);
                    mc_frac_laplacian(
                        |x: &[f64]| {
                            calls.set(calls.get() + 1);
                            u(x)
                        },
                        &cfg.point,
                        cfg.alpha,
                        &est,
                        &g,
                    )?
                }
                Operator::Caputo => {
                    let u = time_field(cfg.field);
                    mc_caputo(
                        |t| {
                            calls.set(calls.get() + 1);
                            u(t)
                        },
                        cfg.t,
                        cfg.gamma,
                        &est,
                        &g,
                    )?
                }
            };
            Ok((v, calls.get()))
        };
        let draws: Vec<(f64, usize)> = (0..cfg.draws as u64).into_par_iter().map(one).collect::<Result<_>>()?;
        let n = draws.len() as f64;
        let mean = draws.iter().map(|d| d.0).sum::<f64>() / n;
        let var = draws.iter().map(|d| (d.0 - mean) * (d.0 - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let z = reference.map(|r| if se > 0.0 { (mean - r) / se } else if mean == r { 0.0 } else { f64::INFINITY });
        cells.push(EstimateCell {
            m,
            r0,
            mean,
            se,
            z,
            evals: draws[0].1,
        });
    }
    Ok(cells)
}

pub fn cmd_estimate(ctx: &RunContext) -> Result<String> {
    let cfg = config::estimate(&ctx.ini)?;
    let reference = estimate_reference(&cfg)?;
    let cells = estimate_sweep(&cfg, &RngKey::new(ctx.seed()), reference)?;
    let mut s = String::from("m,r0,draws,mean,se,oracle,z,evals_per_estimate,oracle_available\n");
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for c in &cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            c.m,
            fmt_f64(c.r0),
            cfg.draws,
            fmt_f64(c.mean),
            fmt_f64(c.se),
            opt(reference),
            opt(c.z),
            c.evals,
            u8::from(reference.is_some())
        );
    }
    ctx.write("estimate.csv", &s)?;
    let max_z = cells.iter().filter_map(|c| c.z).map(f64::abs).fold(None, |a: Option<f64>, z| Some(a.map_or(z, |a| a.max(z))));
    let metrics = json!({
        "cells": cells.len(),
        "oracle": reference,
        "oracle_available": reference.is_some(),
        "max_abs_z": max_z,
    });
    let counters = json!({ "field_evaluations": cells.iter().map(|c| c.evals * cfg.draws).sum::<usize>() });
    ctx.write_manifest("ok", counters, metrics, &["estimate.csv", "manifest.json"])?;
    Ok(match max_z {
        Some(z) => format!("{} cells, max |z| {}", cells.len(), fmt_f64(z)),
        None => format!("{} cells, no reference for this dimension (MC statistics only)", cells.len()),
    })
}

fn write_density(ctx: &RunContext, name: &str, column: &str, samples: &[f64], points: usize) -> Result<()> {
    let grid = kde_grid(samples, points)?;
    let dens = kde_1d(samples, &grid)?;
    let rows: Vec<Vec<f64>> = grid.iter().zip(&dens).map(|(g, d)| vec![*g, *d]).collect();
    ctx.write(name, &csv_string(&[column, "density"], &rows))
}

pub fn cmd_abc(ctx: &RunContext) -> Result<String> {
    let run = config::abc(&ctx.ini)?;
    let root = RngKey::new(ctx.seed());
    let d = run.config.sensors[0].len();
    let posterior: Posterior = match run.model {
        AbcModel::Oracle => abc_rejection(
            &OracleModel {
                d,
                alpha0: 1.0,
                modes: run.modes,
            },
            &run.config,
            &root,
        )?,
        AbcModel::Surrogate => {
            let path = ctx
                .checkpoint
                .as_ref()
                .ok_or_else(|| Error::Config("model = surrogate needs --checkpoint".into()))?;
            let params = load_checkpoint(path)?;
            if params.spec().input_dim != d + 2 {
                return Err(Error::Config(format!(
                    "surrogate expects inputs (x, alpha, mu) with d = {d}, checkpoint has input_dim {}",
                    params.spec().input_dim
                )));
            }
            abc_rejection(&SurrogateModel { params: &params, d }, &run.config, &root)?
        }
    };
    let rows: Vec<Vec<f64>> = posterior.accepted.iter().map(|a| vec![a.alpha, a.mu]).collect();
    ctx.write("posterior.csv", &csv_string(&["alpha", "mu"], &rows))?;
    let counters = json!({ "draws": posterior.n_draws, "accepted": posterior.accepted.len() });
    if let Some(msg) = posterior.diagnostic() {
        ctx.write_manifest(
            "numerical failure",
            counters,
            json!({ "error": msg.clone() }),
            &["posterior.csv", "manifest.json"],
        )?;
        return Err(Error::Numerical { epoch: 0, message: msg });
    }
    let (alphas, mus) = (posterior.alphas(), posterior.mus());
    let densities = write_density(ctx, "density_alpha.csv", "alpha", &alphas, run.grid_points)
        .and_then(|_| write_density(ctx, "density_mu.csv", "mu", &mus, run.grid_points));
    if let Err(e) = densities {
        let msg = format!("density estimate failed: {e}");
        ctx.write_manifest("numerical failure", counters, json!({ "error": msg.clone() }), &["posterior.csv", "manifest.json"])?;
        return Err(Error::Numerical { epoch: 0, message: msg });
    }
    let (ma, mm) = posterior.means().expect("non-empty posterior");
    let metrics = json!({
        "acceptance_rate": posterior.acceptance_rate(),
        "mean_alpha": ma,
        "mean_mu": mm,
        "bandwidth_alpha": scott_bandwidth(&alphas)?,
        "bandwidth_mu": scott_bandwidth(&mus)?,
    });
    ctx.write_manifest(
        "ok",
        counters,
        metrics,
        &["posterior.csv", "density_alpha.csv", "density_mu.csv", "manifest.json"],
    )?;
    Ok(format!(
        "accepted {} of {} draws, posterior mean alpha {} mu {}",
        posterior.accepted.len(),
        posterior.n_draws,
        fmt_f64(ma),
        fmt_f64(mm)
    ))
}

/// Rows `(point..., value, error[, analytic])` for the oracle subcommand.
pub fn oracle_table(run: &OracleRun) -> Result<String> {
    let q = QuadSpec::default();
    let has_analytic = !matches!(run.field, TestField::Bump);
    let rows: Vec<Vec<f64>> = run
        .points
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let est = match (run.operator, run.field) {
                (_, TestField::Constant) => Ok(crate::quadrature::QuadEstimate { value: 0.0, error: 0.0 }),
                (Operator::Laplacian, f) => quad_frac_laplacian(space_field(f, run.alpha), p, run.alpha, &q),
                (Operator::Caputo, f) => quad_caputo(time_field(f), p[0], run.gamma, &q),
            }
            .map_err(|e| match e {
                Error::Domain(m) => Error::Config(format!("[oracle] row {}: {m}", k + 1)),
                other => other,
            })?;
            let mut row = p.clone();
            row.extend([est.value, est.error]);
            if has_analytic {
                row.push(analytic(run.operator, run.field, p, run.alpha, run.gamma)?.expect("analytic field"));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut header: Vec<String> = match run.operator {
        Operator::Laplacian => (1..=run.d).map(|k| format!("x{k}")).collect(),
        Operator::Caputo => vec!["t".into()],
    };
    header.extend(["value".into(), "error".into()]);
    if has_analytic {
        header.push("analytic".into());
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    Ok(csv_string(&header, &rows))
}

pub fn cmd_oracle(ctx: &RunContext) -> Result<String> {
    let run = config::oracle(&ctx.ini)?;
    ctx.write("oracle.csv", &oracle_table(&run)?)?;
    ctx.write_manifest(
        "ok",
        json!({ "points": run.points.len() }),
        json!({}),
        &["oracle.csv", "manifest.json"],
    )?;
    Ok(format!("{} reference values", run.points.len()))
}

/// Reads a CSV written by this tool into a header and numeric rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Io(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| c.parse::<f64>().map_err(|_| Error::Io(format!("{}: bad cell '{c}'", path.display()))))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}
