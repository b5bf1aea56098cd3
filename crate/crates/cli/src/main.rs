//! Batch front door: parse a run configuration, dispatch solves and scans,
//! write profiles and JSON summaries, and run the built-in verification
//! suite. Exit codes: 0 success, 1 solver non-convergence, 2 config error.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use hylo_core::acceptance::{self, AcceptanceConfig, Suite};
use hylo_core::analysis::{
    angular_momentum, boost_residual_max, lorentz_boost, nonexistence_sequence, BoostSpec,
};
use hylo_core::functionals::FunctionalContext;
use hylo_core::grid::RadialGrid;
use hylo_core::maxwell::coupled_minimize;
use hylo_core::minimizer::{
    estimate_c_hat, minimize, minimize_traced, Init, MinimizeConfig, ScanEntry,
};
use hylo_core::potential::{builtin, check_assumptions, parse_potential_file, PotentialSpec};
use hylo_core::shooting::shoot;

use config::{resolve, resolve_opt, FileConfig};
use output::{grid_hash, write_profile, write_summary, Provenance, Summary};

#[derive(Parser)]
#[command(
    name = "hylo",
    version,
    about = "Solitary-wave workbench: Q-balls, planar vortices, and electrostatic Klein-Gordon-Maxwell bound states"
)]
struct Cli {
    /// Flat key-value config file; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct GridOpts {
    /// Spatial dimension (2 or 3).
    #[arg(long)]
    dim: Option<usize>,
    /// Vorticity; nonzero values require dim 2.
    #[arg(long)]
    ell: Option<i32>,
    /// Domain truncation radius.
    #[arg(long)]
    r_max: Option<f64>,
    /// Number of uniform radial cells.
    #[arg(long)]
    n_nodes: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// Potential: `builtin:wref|wbad|wfree` or a definition file path.
    #[arg(long)]
    potential: Option<String>,
    /// Output directory (the HYLO_OUT env var overrides this).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct SolverOpts {
    /// Residual tolerance of the descent.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Start from a plateau (annulus for vortices) of this radius.
    #[arg(long, conflicts_with_all = ["init_gaussian", "init_file"])]
    init_radius: Option<f64>,
    /// Start from a Gaussian of this width.
    #[arg(long, conflicts_with = "init_file")]
    init_gaussian: Option<f64>,
    /// Start from a profile CSV.
    #[arg(long)]
    init_file: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a potential against the admissibility conditions.
    CheckPotential {
        #[command(flatten)]
        common: CommonOpts,
        /// Upper end of the sampling window (default 10 s0).
        #[arg(long)]
        s_max: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Minimize the energy at fixed charge (spherical standing wave).
    Solve {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        grid: GridOpts,
        #[command(flatten)]
        solver: SolverOpts,
        /// Target charge.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Minimize at fixed charge with nonzero vorticity (planar vortex).
    Vortex {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        grid: GridOpts,
        #[command(flatten)]
        solver: SolverOpts,
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Coupled electrostatic solve at fixed charge and coupling q.
    Maxwell {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        grid: GridOpts,
        #[command(flatten)]
        solver: SolverOpts,
        #[arg(long)]
        sigma: Option<f64>,
        /// Electrostatic coupling.
        #[arg(long)]
        q: Option<f64>,
    },
    /// Sweep charges (optionally a (sigma, q) grid) and classify binding.
    ScanSigma {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        grid: GridOpts,
        #[command(flatten)]
        solver: SolverOpts,
        #[arg(long)]
        sigma_min: Option<f64>,
        #[arg(long)]
        sigma_max: Option<f64>,
        #[arg(long)]
        sigma_steps: Option<usize>,
        #[arg(long)]
        q_min: Option<f64>,
        #[arg(long)]
        q_max: Option<f64>,
        #[arg(long)]
        q_steps: Option<usize>,
        /// Worker threads for the parameter sweep.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Integrate the profile equation by shooting at a fixed frequency.
    Shoot {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        grid: GridOpts,
        #[arg(long)]
        omega: Option<f64>,
    },
    /// Shoot a standing wave, boost it, and report the kinematics and the
    /// field-equation residual convergence of the travelling wave.
    Boost {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        grid: GridOpts,
        #[arg(long)]
        omega: Option<f64>,
        /// Boost velocity, |v| < 1.
        #[arg(long)]
        v: Option<f64>,
    },
    /// Fixed-charge trial sequence with unbounded-below energy.
    DemoNonexistence {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        grid: GridOpts,
        #[arg(long)]
        sigma: Option<f64>,
        /// Comma-separated trial radii.
        #[arg(long)]
        radii: Option<String>,
    },
    /// Run the verification suite (fast | all).
    Verify {
        #[arg(default_value = "fast")]
        suite: String,
        /// Restrict to a comma-separated list of criterion ids.
        #[arg(long)]
        only: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}

/// 1 for solver-side failures, 2 for configuration problems.
fn classify(err: &anyhow::Error) -> u8 {
    use hylo_core::Error as E;
    if let Some(core) = err.downcast_ref::<E>() {
        match core {
            E::NonConvergence { .. }
            | E::VanishingCharge(_)
            | E::DegenerateCharge(_)
            | E::EigenNonConvergence { .. }
            | E::NoDecayingSolution { .. }
            | E::BracketNotFound { .. } => 1,
            _ => 2,
        }
    } else {
        2
    }
}

fn load_potential(
    file: &FileConfig,
    flag: &Option<String>,
    default: &str,
) -> Result<(PotentialSpec, String)> {
    let spec = flag
        .clone()
        .or_else(|| file.get_str("potential").map(str::to_string))
        .unwrap_or_else(|| default.to_string());
    let pot = if let Some(name) = spec.strip_prefix("builtin:") {
        builtin(name)?
    } else {
        let text = std::fs::read_to_string(&spec)
            .with_context(|| format!("reading potential file '{spec}'"))?;
        parse_potential_file(&text)?
    };
    Ok((pot, spec))
}

fn out_dir(file: &FileConfig, flag: &Option<PathBuf>, task: &str) -> PathBuf {
    if let Ok(env) = std::env::var("HYLO_OUT") {
        return PathBuf::from(env);
    }
    flag.clone()
        .or_else(|| file.get_str("out").map(PathBuf::from))
        .unwrap_or_else(|| Path::new("runs").join(task))
}

struct Resolved {
    pot: PotentialSpec,
    pot_name: String,
    grid: Arc<RadialGrid>,
    out: PathBuf,
    tol: f64,
    max_iters: usize,
    init: Init,
}

fn resolve_run(
    file: &FileConfig,
    common: &CommonOpts,
    grid: &GridOpts,
    solver: &SolverOpts,
    task: &str,
    default_dim: usize,
    default_ell: i32,
) -> Result<Resolved> {
    let (pot, pot_name) = load_potential(file, &common.potential, "builtin:wref")?;
    let dim = resolve(grid.dim, file, "dim", default_dim)?;
    let ell = resolve(grid.ell, file, "ell", default_ell)?;
    let r_max = resolve(grid.r_max, file, "r_max", 40.0)?;
    let n_nodes = resolve(grid.n_nodes, file, "n_nodes", 4000)?;
    let mesh = RadialGrid::new(dim, ell, r_max, n_nodes)?;
    let tol = resolve(solver.tol, file, "tol", 1e-8)?;
    let max_iters = resolve(solver.max_iters, file, "max_iters", 200_000)?;
    let init = if let Some(path) = &solver.init_file {
        Init::File(path.clone())
    } else if let Some(w) = resolve_opt(solver.init_gaussian, file, "init_gaussian")? {
        Init::Gaussian { width: w }
    } else if let Some(r) = resolve_opt(solver.init_radius, file, "init_radius")? {
        Init::TestFunction { radius: r }
    } else {
        Init::Auto
    };
    Ok(Resolved {
        pot,
        pot_name,
        grid: mesh,
        out: out_dir(file, &common.out, task),
        tol,
        max_iters,
        init,
    })
}

fn minimize_config(r: &Resolved, sigma: f64) -> MinimizeConfig {
    let mut cfg = MinimizeConfig::new(sigma);
    cfg.tol_residual = r.tol;
    cfg.max_iters = r.max_iters;
    cfg.init = r.init.clone();
    cfg
}

#[derive(Serialize)]
struct SolveResult {
    status: &'static str,
    record: hylo_core::minimizer::SolutionRecord,
    energy_breakdown: hylo_core::functionals::EnergyBreakdown,
    #[serde(skip_serializing_if = "Option::is_none")]
    angular_momentum_z: Option<f64>,
    profile_csv: String,
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::CheckPotential { common, s_max, samples } => {
            let (pot, pot_name) = load_potential(&file, &common.potential, "builtin:wref")?;
            let s_max = resolve(*s_max, &file, "s_max", 10.0 * pot.s0())?;
            let samples = resolve(*samples, &file, "samples", 1024)?;
            let report = check_assumptions(&pot, s_max, samples)?;
            let out = out_dir(&file, &common.out, "check-potential");
            let summary = Summary {
                task: "check-potential",
                provenance: Provenance {
                    version: env!("CARGO_PKG_VERSION"),
                    config: json!({"potential": pot_name, "s_max": s_max, "samples": samples}),
                    grid_hash: None,
                },
                result: &report,
            };
            let path = write_summary(&out, &summary)?;
            println!(
                "check-potential {pot_name}: positivity {} nondegeneracy {} binding {} growth {} omega0 = {:.6} -> {}",
                pf(report.w_positive),
                pf(report.nondegenerate),
                pf(report.hylomorphy),
                pf(report.growth_a || report.growth_b),
                report.omega0,
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Solve { common, grid, solver, sigma } => {
            let r = resolve_run(&file, common, grid, solver, "solve", 3, 0)?;
            let sigma = resolve_opt(*sigma, &file, "sigma")?
                .ok_or_else(|| anyhow!("missing --sigma (or sigma= in the config file)"))?;
            run_minimize("solve", r, sigma)
        }

        Command::Vortex { common, grid, solver, sigma } => {
            let r = resolve_run(&file, common, grid, solver, "vortex", 2, 1)?;
            if r.grid.ell() == 0 {
                bail!(hylo_core::Error::Config("vortex requires a nonzero --ell".into()));
            }
            let sigma = resolve_opt(*sigma, &file, "sigma")?
                .ok_or_else(|| anyhow!("missing --sigma (or sigma= in the config file)"))?;
            run_minimize("vortex", r, sigma)
        }

        Command::Maxwell { common, grid, solver, sigma, q } => {
            let r = resolve_run(&file, common, grid, solver, "maxwell", 3, 0)?;
            let sigma = resolve_opt(*sigma, &file, "sigma")?
                .ok_or_else(|| anyhow!("missing --sigma (or sigma= in the config file)"))?;
            let q = resolve_opt(*q, &file, "q")?
                .ok_or_else(|| anyhow!("missing --q (or q= in the config file)"))?;
            let ctx = FunctionalContext::new(r.grid.clone(), r.pot.clone(), q)?;
            let sol = coupled_minimize(&ctx, &minimize_config(&r, sigma))?;
            let breakdown = ctx.energy_breakdown(&sol.record.u, sol.record.omega)?;
            write_profile(&r.out, "profile.csv", &sol.record.u)?;
            write_profile(&r.out, "gauge.csv", &sol.gauge.phi(sol.record.omega))?;
            #[derive(Serialize)]
            struct MaxwellResult {
                status: &'static str,
                q: f64,
                record: hylo_core::minimizer::SolutionRecord,
                max_q_phi: f64,
                residual_u: f64,
                residual_phi: f64,
                energy_breakdown: hylo_core::functionals::EnergyBreakdown,
                profile_csv: String,
                gauge_csv: String,
            }
            let summary = Summary {
                task: "maxwell",
                provenance: Provenance {
                    version: env!("CARGO_PKG_VERSION"),
                    config: json!({
                        "potential": r.pot_name, "sigma": sigma, "q": q,
                        "dim": r.grid.dim(), "ell": r.grid.ell(),
                        "r_max": r.grid.r_max(), "n_nodes": r.grid.n_cells(),
                        "tol": r.tol, "max_iters": r.max_iters,
                    }),
                    grid_hash: Some(grid_hash(&r.grid)),
                },
                result: MaxwellResult {
                    status: "converged",
                    q,
                    max_q_phi: sol.max_q_phi,
                    residual_u: sol.residual_u,
                    residual_phi: sol.residual_phi,
                    energy_breakdown: breakdown,
                    profile_csv: "profile.csv".into(),
                    gauge_csv: "gauge.csv".into(),
                    record: sol.record,
                },
            };
            let path = write_summary(&r.out, &summary)?;
            println!(
                "maxwell: converged sigma = {sigma}, q = {q}: omega = {:.6}, max qphi = {:.3e}, residuals = ({:.2e}, {:.2e}) -> {}",
                summary.result.record.omega,
                summary.result.max_q_phi,
                summary.result.residual_u,
                summary.result.residual_phi,
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::ScanSigma {
            common,
            grid,
            solver,
            sigma_min,
            sigma_max,
            sigma_steps,
            q_min,
            q_max,
            q_steps,
            jobs,
        } => {
            let r = resolve_run(&file, common, grid, solver, "scan-sigma", 3, 0)?;
            let smin = resolve_opt(*sigma_min, &file, "sigma_min")?
                .ok_or_else(|| anyhow!("missing --sigma-min"))?;
            let smax = resolve(*sigma_max, &file, "sigma_max", smin)?;
            let steps = resolve(*sigma_steps, &file, "sigma_steps", 5)?;
            let jobs = resolve(*jobs, &file, "jobs", 1)?;
            if !(smin > 0.0 && smax >= smin && steps >= 1) {
                bail!(hylo_core::Error::Config(
                    "need 0 < sigma_min <= sigma_max and sigma_steps >= 1".into()
                ));
            }
            let sigmas: Vec<f64> = if steps == 1 {
                vec![smin]
            } else {
                (0..steps)
                    .map(|i| smin + (smax - smin) * i as f64 / (steps - 1) as f64)
                    .collect()
            };
            let qs: Vec<f64> = match resolve_opt(*q_min, &file, "q_min")? {
                None => vec![0.0],
                Some(qmin) => {
                    let qmax = resolve(*q_max, &file, "q_max", qmin)?;
                    let qsteps = resolve(*q_steps, &file, "q_steps", 1)?;
                    if qsteps == 1 {
                        vec![qmin]
                    } else {
                        (0..qsteps)
                            .map(|i| qmin + (qmax - qmin) * i as f64 / (qsteps - 1) as f64)
                            .collect()
                    }
                }
            };
            run_scan(r, sigmas, qs, jobs)
        }

        Command::Shoot { common, grid, omega } => {
            let (pot, pot_name) = load_potential(&file, &common.potential, "builtin:wref")?;
            let omega = resolve_opt(*omega, &file, "omega")?
                .ok_or_else(|| anyhow!("missing --omega"))?;
            let (mesh, r_max, n_nodes) = shoot_grid(&file, grid, &pot, omega)?;
            let res = shoot(&pot, &mesh, omega)?;
            let out = out_dir(&file, &common.out, "shoot");
            write_profile(&out, "profile.csv", &res.profile)?;
            #[derive(Serialize)]
            struct ShootResultOut {
                status: &'static str,
                omega: f64,
                shoot_param: f64,
                decay_rate: f64,
                expected_decay_rate: f64,
                residual: f64,
                bisection_steps: usize,
                profile_csv: String,
            }
            let expected = (pot.m2() - omega * omega).max(0.0).sqrt();
            let summary = Summary {
                task: "shoot",
                provenance: Provenance {
                    version: env!("CARGO_PKG_VERSION"),
                    config: json!({
                        "potential": pot_name, "omega": omega,
                        "dim": mesh.dim(), "ell": mesh.ell(),
                        "r_max": r_max, "n_nodes": n_nodes,
                    }),
                    grid_hash: Some(grid_hash(&mesh)),
                },
                result: ShootResultOut {
                    status: "converged",
                    omega,
                    shoot_param: res.shoot_param,
                    decay_rate: res.decay_rate,
                    expected_decay_rate: expected,
                    residual: res.residual,
                    bisection_steps: res.bisection_steps,
                    profile_csv: "profile.csv".into(),
                },
            };
            let path = write_summary(&out, &summary)?;
            println!(
                "shoot: omega = {omega}: launch = {:.8}, decay = {:.4} (linear {expected:.4}), residual = {:.2e} -> {}",
                res.shoot_param, res.decay_rate, res.residual,
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Boost { common, grid, omega, v } => {
            let (pot, pot_name) = load_potential(&file, &common.potential, "builtin:wref")?;
            let omega = resolve_opt(*omega, &file, "omega")?
                .ok_or_else(|| anyhow!("missing --omega"))?;
            let v = resolve_opt(*v, &file, "v")?.ok_or_else(|| anyhow!("missing --v"))?;
            // Validate the kinematics before paying for the shoot.
            BoostSpec::new(v, omega).map_err(anyhow::Error::from)?;
            let (mesh, r_max, n_nodes) = shoot_grid(&file, grid, &pot, omega)?;
            let shot = shoot(&pot, &mesh, omega)?;
            let wave = lorentz_boost(&shot.profile, omega, v)?;

            // Sample box sized to the profile bulk.
            let umax = shot.profile.max_abs();
            let bulk = shot
                .profile
                .grid()
                .nodes()
                .iter()
                .zip(shot.profile.values())
                .filter(|(_, &u)| u > 0.05 * umax)
                .map(|(rr, _)| *rr)
                .fold(1.0_f64, f64::max);
            let mut points = Vec::new();
            for &t in &[0.1, 0.35] {
                for i in 0..9 {
                    let x1 = -(bulk + 1.0) + 2.0 * (bulk + 1.0) * i as f64 / 8.0;
                    for &w in &[0.0, bulk / 3.0] {
                        points.push((t, [x1, w, w]));
                    }
                }
            }
            let h0 = 0.4;
            let r1 = boost_residual_max(&wave, &pot, h0, &points);
            let r2 = boost_residual_max(&wave, &pot, h0 / 2.0, &points);
            #[derive(Serialize)]
            struct BoostResult {
                status: &'static str,
                spec: BoostSpec,
                dispersion_defect: f64,
                residual_coarse: f64,
                residual_fine: f64,
                residual_order_factor: f64,
            }
            let out = out_dir(&file, &common.out, "boost");
            let summary = Summary {
                task: "boost",
                provenance: Provenance {
                    version: env!("CARGO_PKG_VERSION"),
                    config: json!({
                        "potential": pot_name, "omega": omega, "v": v,
                        "r_max": r_max, "n_nodes": n_nodes, "stencil_step": h0,
                    }),
                    grid_hash: Some(grid_hash(&mesh)),
                },
                result: BoostResult {
                    status: "ok",
                    spec: wave.spec,
                    dispersion_defect: (wave.spec.dispersion() - omega * omega).abs(),
                    residual_coarse: r1,
                    residual_fine: r2,
                    residual_order_factor: r1 / r2,
                },
            };
            let path = write_summary(&out, &summary)?;
            println!(
                "boost: v = {v}: gamma = {:.6}, omega_v = {:.6}, k_v = {:.6}, residual factor = {:.3} -> {}",
                wave.spec.gamma,
                wave.spec.omega_v,
                wave.spec.k_v[0],
                summary.result.residual_order_factor,
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::DemoNonexistence { common, grid, sigma, radii } => {
            let (pot, pot_name) = load_potential(&file, &common.potential, "builtin:wbad")?;
            let dim = resolve(grid.dim, &file, "dim", 3)?;
            let r_max = resolve(grid.r_max, &file, "r_max", 45.0)?;
            let n_nodes = resolve(grid.n_nodes, &file, "n_nodes", 2250)?;
            let sigma = resolve(*sigma, &file, "sigma", 100.0)?;
            let radii_spec = radii
                .clone()
                .or_else(|| file.get_str("radii").map(str::to_string))
                .unwrap_or_else(|| "5,10,20,40".to_string());
            let r_list: Vec<f64> = radii_spec
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| anyhow!("bad radius '{s}': {e}")))
                .collect::<Result<_>>()?;
            let mesh = RadialGrid::new(dim, 0, r_max, n_nodes)?;
            let ctx = FunctionalContext::new(mesh.clone(), pot, 0.0)?;
            let entries = nonexistence_sequence(&ctx, sigma, &r_list)?;
            let out = out_dir(&file, &common.out, "demo-nonexistence");
            std::fs::create_dir_all(&out)?;
            let mut csv = String::from("radius,omega_r,energy,charge\n");
            for e in &entries {
                csv.push_str(&format!("{},{},{},{}\n", e.radius, e.omega_r, e.energy, e.charge));
            }
            std::fs::write(out.join("energies.csv"), csv)?;
            let summary = Summary {
                task: "demo-nonexistence",
                provenance: Provenance {
                    version: env!("CARGO_PKG_VERSION"),
                    config: json!({
                        "potential": pot_name, "sigma": sigma, "radii": r_list,
                        "dim": dim, "r_max": r_max, "n_nodes": n_nodes,
                    }),
                    grid_hash: Some(grid_hash(&mesh)),
                },
                result: &entries,
            };
            let path = write_summary(&out, &summary)?;
            let last = entries.last().map(|e| e.energy).unwrap_or(0.0);
            println!(
                "demo-nonexistence: {} radii at sigma = {sigma}; E falls to {last:.1} -> {}",
                entries.len(),
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Verify { suite, only, out } => {
            let suite = Suite::parse(suite).ok_or_else(|| {
                anyhow!(hylo_core::Error::Config(format!("unknown suite '{suite}' (fast|all)")))
            })?;
            let tol_scale = match std::env::var("HYLO_TOL_SCALE") {
                Ok(s) => s.parse::<f64>().map_err(|e| {
                    anyhow!(hylo_core::Error::Config(format!("bad HYLO_TOL_SCALE: {e}")))
                })?,
                Err(_) => 1.0,
            };
            let only_ids = match only {
                None => Vec::new(),
                Some(spec) => spec
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|e| anyhow!("bad criterion id '{s}': {e}"))
                    })
                    .collect::<Result<_>>()?,
            };
            let cfg = AcceptanceConfig { tol_scale, only: only_ids };
            let outcomes = acceptance::run(suite, &cfg);
            let mut all_ok = true;
            for o in &outcomes {
                all_ok &= o.passed;
                println!(
                    "[{}] {:2} {:<26} ({:6.2} s)  {}",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.id,
                    o.name,
                    o.seconds,
                    o.detail
                );
            }
            #[derive(Serialize)]
            struct VerifyRow<'a> {
                id: usize,
                name: &'a str,
                passed: bool,
                detail: &'a str,
            }
            let rows: Vec<VerifyRow> = outcomes
                .iter()
                .map(|o| VerifyRow { id: o.id, name: &o.name, passed: o.passed, detail: &o.detail })
                .collect();
            let out = out_dir(&file, out, "verify");
            let summary = Summary {
                task: "verify",
                provenance: Provenance {
                    version: env!("CARGO_PKG_VERSION"),
                    config: json!({
                        "suite": if suite == Suite::All { "all" } else { "fast" },
                        "tol_scale": tol_scale,
                    }),
                    grid_hash: None,
                },
                result: rows,
            };
            write_summary(&out, &summary)?;
            println!(
                "verify: {}/{} criteria passed",
                outcomes.iter().filter(|o| o.passed).count(),
                outcomes.len()
            );
            Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn pf(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Mesh for shooting runs: the radius tracks the linear decay length
/// `20/sqrt(m² - ω²)` unless overridden; the cell count keeps `h ≈ 0.01`.
fn shoot_grid(
    file: &FileConfig,
    grid: &GridOpts,
    pot: &PotentialSpec,
    omega: f64,
) -> Result<(Arc<RadialGrid>, f64, usize)> {
    let kappa2 = pot.m2() - omega * omega;
    let default_r = if kappa2 > 0.0 {
        (20.0 / kappa2.sqrt()).clamp(20.0, 120.0)
    } else {
        40.0
    };
    let dim = resolve(grid.dim, file, "dim", 3)?;
    let ell = resolve(grid.ell, file, "ell", 0)?;
    let r_max = resolve(grid.r_max, file, "r_max", default_r)?;
    let n_nodes = resolve(grid.n_nodes, file, "n_nodes", (r_max * 100.0).round() as usize)?;
    Ok((RadialGrid::new(dim, ell, r_max, n_nodes)?, r_max, n_nodes))
}

fn run_minimize(task: &'static str, r: Resolved, sigma: f64) -> Result<ExitCode> {
    let ctx = FunctionalContext::new(r.grid.clone(), r.pot.clone(), 0.0)?;
    let rec = minimize(&ctx, &minimize_config(&r, sigma))?;
    let breakdown = ctx.energy_breakdown(&rec.u, rec.omega)?;
    let am = if r.grid.ell() != 0 {
        Some(angular_momentum(&rec.u, rec.omega)[2])
    } else {
        None
    };
    write_profile(&r.out, "profile.csv", &rec.u)?;
    let summary = Summary {
        task,
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION"),
            config: json!({
                "potential": r.pot_name, "sigma": sigma,
                "dim": r.grid.dim(), "ell": r.grid.ell(),
                "r_max": r.grid.r_max(), "n_nodes": r.grid.n_cells(),
                "tol": r.tol, "max_iters": r.max_iters,
            }),
            grid_hash: Some(grid_hash(&r.grid)),
        },
        result: SolveResult {
            status: "converged",
            energy_breakdown: breakdown,
            angular_momentum_z: am,
            profile_csv: "profile.csv".into(),
            record: rec,
        },
    };
    let path = write_summary(&r.out, &summary)?;
    let rec = &summary.result.record;
    println!(
        "{task}: converged sigma = {sigma}: omega = {:.6}, E = {:.4}, lambda = {:.4}, residual = {:.2e} ({} iters), binding = {} -> {}",
        rec.omega, rec.energy, rec.lambda_ratio, rec.residual, rec.iterations, rec.in_sigma_set,
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ScanRow {
    q: f64,
    #[serde(flatten)]
    entry: ScanEntry,
}

fn run_scan(r: Resolved, sigmas: Vec<f64>, qs: Vec<f64>, jobs: usize) -> Result<ExitCode> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| anyhow!("building worker pool: {e}"))?;

    let rows: Vec<ScanRow> = pool.install(|| -> Result<Vec<ScanRow>> {
        // One context and one c-hat estimate per coupling value.
        let per_q: Vec<(f64, FunctionalContext, f64)> = qs
            .par_iter()
            .map(|&q| -> Result<_> {
                let ctx = FunctionalContext::new(r.grid.clone(), r.pot.clone(), q)?;
                let c_hat = estimate_c_hat(&ctx)?;
                Ok((q, ctx, c_hat))
            })
            .collect::<Result<_>>()?;
        let tasks: Vec<(usize, f64)> = per_q
            .iter()
            .enumerate()
            .flat_map(|(qi, _)| sigmas.iter().map(move |&s| (qi, s)))
            .collect();
        Ok(tasks
            .par_iter()
            .map(|&(qi, sigma)| {
                let (q, ctx, c_hat) = &per_q[qi];
                let cfg = minimize_config(&r, sigma);
                let entry = match minimize_traced(ctx, &cfg, *c_hat) {
                    Ok((rec, _)) => ScanEntry {
                        sigma,
                        status: "converged".into(),
                        omega: Some(rec.omega),
                        lambda_min: Some(rec.lambda_ratio),
                        in_sigma_set: Some(rec.in_sigma_set),
                        residual: Some(rec.residual),
                    },
                    Err(e) => ScanEntry {
                        sigma,
                        status: e.to_string(),
                        omega: None,
                        lambda_min: None,
                        in_sigma_set: None,
                        residual: None,
                    },
                };
                ScanRow { q: *q, entry }
            })
            .collect())
    })?;

    std::fs::create_dir_all(&r.out)?;
    let mut csv = String::from("q,sigma,status,omega,lambda,in_sigma_set,residual\n");
    for row in &rows {
        let e = &row.entry;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.q,
            e.sigma,
            e.status.replace(',', ";"),
            e.omega.map(|x| x.to_string()).unwrap_or_default(),
            e.lambda_min.map(|x| x.to_string()).unwrap_or_default(),
            e.in_sigma_set.map(|x| x.to_string()).unwrap_or_default(),
            e.residual.map(|x| x.to_string()).unwrap_or_default(),
        ));
    }
    std::fs::write(r.out.join("scan.csv"), csv)?;

    let summary = Summary {
        task: "scan-sigma",
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION"),
            config: json!({
                "potential": r.pot_name,
                "sigmas": sigmas, "qs": qs,
                "dim": r.grid.dim(), "ell": r.grid.ell(),
                "r_max": r.grid.r_max(), "n_nodes": r.grid.n_cells(),
                "tol": r.tol, "max_iters": r.max_iters, "jobs": jobs,
            }),
            grid_hash: Some(grid_hash(&r.grid)),
        },
        result: &rows,
    };
    let path = write_summary(&r.out, &summary)?;
    println!(
        "scan-sigma: {} points, {} converged, {} binding -> {}",
        rows.len(),
        rows.iter().filter(|row| row.entry.status == "converged").count(),
        rows.iter().filter(|row| row.entry.in_sigma_set == Some(true)).count(),
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}
