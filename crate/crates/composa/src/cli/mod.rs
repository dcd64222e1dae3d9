//! Command-line front end: `solve`, `compare` and `bench` subcommands over
//! the key-value config format.

pub mod bench;

use crate::baselines::{admm_solve, BaselineError};
use crate::config::{parse_config_file, ConfigError, ConfigMap};
use crate::io::{self, IoError};
use crate::solver::{gsom_solve, SolveReport, Termination};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Io(IoError),
    Solver(crate::solver::SolverError),
    Baseline(BaselineError),
    Usage(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Solver(e) => write!(f, "{e}"),
            CliError::Baseline(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}
impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Io(e)
    }
}
impl From<crate::solver::SolverError> for CliError {
    fn from(e: crate::solver::SolverError) -> Self {
        CliError::Solver(e)
    }
}
impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(IoError::Io(e))
    }
}
impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        CliError::Baseline(e)
    }
}

const USAGE: &str = "\
composa — second-order solver for composite sparse optimization

USAGE:
  composa solve <config> [--out DIR] [--set key=value ...]
  composa compare <config> [--iters N] [--out DIR] [--set key=value ...]
  composa bench <suite> <config> [--repeats N] [--out DIR] [--set key=value ...]

Suites: gamma_sweep | active_set | linsolve | block_jacobi
Exit codes: 0 clean termination, 2 line-search stall, 1 error.";

struct CommonArgs {
    config: PathBuf,
    out: PathBuf,
    overrides: Vec<String>,
    iters: Option<usize>,
    repeats: usize,
}

fn parse_common(args: &[String]) -> Result<CommonArgs, CliError> {
    let mut config = None;
    let mut out = PathBuf::from("out");
    let mut overrides = Vec::new();
    let mut iters = None;
    let mut repeats = 5usize;
    let mut i = 0;
    while i < args.len() {
        match args[i].as_str() {
            "--out" => {
                i += 1;
                out = PathBuf::from(
                    args.get(i)
                        .ok_or_else(|| CliError::Usage("--out requires a directory".into()))?,
                );
            }
            "--set" => {
                i += 1;
                overrides.push(
                    args.get(i)
                        .ok_or_else(|| CliError::Usage("--set requires key=value".into()))?
                        .clone(),
                );
            }
            "--iters" => {
                i += 1;
                iters = Some(
                    args.get(i)
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| CliError::Usage("--iters requires an integer".into()))?,
                );
            }
            "--repeats" => {
                i += 1;
                repeats = args
                    .get(i)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| CliError::Usage("--repeats requires an integer".into()))?;
            }
            other if config.is_none() && !other.starts_with("--") => {
                config = Some(PathBuf::from(other));
            }
            other => {
                return Err(CliError::Usage(format!("unexpected argument '{other}'")));
            }
        }
        i += 1;
    }
    Ok(CommonArgs {
        config: config.ok_or_else(|| CliError::Usage("missing config path".into()))?,
        out,
        overrides,
        iters,
        repeats,
    })
}

/// Entry point used by the binary; returns the process exit code.
pub fn run(args: &[String]) -> i32 {
    let report = |r: Result<i32, CliError>| -> i32 {
        match r {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        }
    };
    match args.first().map(String::as_str) {
        Some("solve") => report(
            parse_common(&args[1..]).and_then(|a| cmd_solve(&a.config, &a.out, &a.overrides)),
        ),
        Some("compare") => report(
            parse_common(&args[1..])
                .and_then(|a| cmd_compare(&a.config, a.iters.unwrap_or(50), &a.out, &a.overrides)),
        ),
        Some("bench") => {
            if args.len() < 2 {
                eprintln!("error: bench requires a suite name\n{USAGE}");
                return 1;
            }
            let suite = args[1].clone();
            report(
                parse_common(&args[2..])
                    .and_then(|a| cmd_bench(&suite, &a.config, a.repeats, &a.out, &a.overrides)),
            )
        }
        _ => {
            eprintln!("{USAGE}");
            1
        }
    }
}

fn load(config_path: &Path, overrides: &[String]) -> Result<ConfigMap, CliError> {
    let mut cfg = parse_config_file(config_path)?;
    cfg.apply_overrides(overrides)?;
    Ok(cfg)
}

/// Writes the standard solve artifacts into `out`.
pub fn write_solve_outputs(out: &Path, report: &SolveReport) -> Result<(), IoError> {
    fs::create_dir_all(out)?;
    io::write_report_json(&out.join("report.json"), report)?;
    io::write_trace_csv(&out.join("trace.csv"), report)?;
    io::write_vector_csv(&out.join("x_final.csv"), "x", &report.x_final)?;
    Ok(())
}

/// Builds the problem from the config, runs the solver, emits report.json,
/// trace.csv and x_final.csv.
pub fn cmd_solve(config_path: &Path, out: &Path, overrides: &[String]) -> Result<i32, CliError> {
    let cfg = load(config_path, overrides)?;
    let (problem, x0) = cfg.build_problem()?;
    let solver_cfg = cfg.build_solver_config()?;
    let report = gsom_solve(&problem, &x0, &solver_cfg)?;
    write_solve_outputs(out, &report)?;
    println!(
        "{}: {} iterations, cost {:.6e} -> {:.6e}, termination {:?}",
        problem.kind(),
        report.iterations,
        report.cost_initial,
        report.cost_final,
        report.termination
    );
    Ok(match report.termination {
        Termination::Stalled => 2,
        _ => 0,
    })
}

/// Runs the solver and the ADMM baseline with a matched iteration budget and
/// writes the side-by-side cost trace plus a summary.
pub fn cmd_compare(
    config_path: &Path,
    iters: usize,
    out: &Path,
    overrides: &[String],
) -> Result<i32, CliError> {
    let cfg = load(config_path, overrides)?;
    let (problem, x0) = cfg.build_problem()?;
    if problem.quadratic_form().is_none() {
        return Err(CliError::Baseline(BaselineError::NonQuadraticSmoothPart));
    }
    let mut solver_cfg = cfg.build_solver_config()?;
    solver_cfg.max_iter = iters;
    let gsom = gsom_solve(&problem, &x0, &solver_cfg)?;
    let rho = cfg.get_f64("admm.rho", 1.0)?;
    let admm_tol = cfg.get_f64("admm.tol", 0.0)?;
    let admm = admm_solve(&problem, rho, admm_tol, iters)?;

    fs::create_dir_all(out)?;
    // cost-per-iteration table padded to the full budget
    let cost_at = |rep: &SolveReport, k: usize| -> f64 {
        if rep.trace.is_empty() {
            return rep.cost_initial;
        }
        let idx = k.min(rep.trace.len() - 1);
        rep.trace[idx].cost
    };
    let mut csv = String::from("iter,cost_gsom,cost_admm\n");
    for k in 0..iters {
        csv.push_str(&format!(
            "{},{:.17e},{:.17e}\n",
            k + 1,
            cost_at(&gsom, k),
            cost_at(&admm, k)
        ));
    }
    fs::write(out.join("compare.csv"), csv).map_err(IoError::Io)?;

    let summary = serde_json::json!({
        "iters": iters,
        "gsom": {
            "cost_final": gsom.cost_final,
            "wall_ms": gsom.wall_ms_total,
            "termination": gsom.termination,
            "residual": gsom.trace.last().map(|t| t.residual),
        },
        "admm": {
            "cost_final": admm.cost_final,
            "wall_ms": admm.wall_ms_total,
            "termination": admm.termination,
            "primal_residual": admm.trace.last().map(|t| t.residual),
        },
    });
    fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&summary).unwrap() + "\n",
    )
    .map_err(IoError::Io)?;
    println!(
        "compare ({} iterations): gsom {:.6e} vs admm {:.6e}",
        iters, gsom.cost_final, admm.cost_final
    );
    Ok(0)
}

/// Runs a measurement suite and writes its CSV table plus a JSON summary.
pub fn cmd_bench(
    suite: &str,
    config_path: &Path,
    repeats: usize,
    out: &Path,
    overrides: &[String],
) -> Result<i32, CliError> {
    let cfg = load(config_path, overrides)?;
    fs::create_dir_all(out).map_err(IoError::Io)?;
    match suite {
        "gamma_sweep" => {
            let grid_n = cfg.get_usize("bench.grid_n", 32)?;
            let gammas = [0.0, 50.0, 500.0, 1000.0];
            let betas = [0.1, 0.5, 0.9];
            let sweep = bench::gamma_sweep(grid_n, &gammas, &betas, 50);
            let mut csv = String::from("gamma");
            for b in &betas {
                csv.push_str(&format!(",beta_{b}"));
            }
            csv.push('\n');
            for (gi, &g) in sweep.gammas.iter().enumerate() {
                csv.push_str(&format!("{g}"));
                for c in &sweep.costs[gi] {
                    csv.push_str(&format!(",{c:.10e}"));
                }
                csv.push('\n');
            }
            fs::write(out.join("gamma_sweep.csv"), csv).map_err(IoError::Io)?;
            let summary = serde_json::json!({
                "grid_n": grid_n, "iters": sweep.iters,
                "gammas": sweep.gammas, "betas": sweep.betas, "costs": sweep.costs,
            });
            fs::write(
                out.join("gamma_sweep.json"),
                serde_json::to_string_pretty(&summary).unwrap() + "\n",
            )
            .map_err(IoError::Io)?;
            println!("gamma_sweep written to {}", out.display());
            Ok(0)
        }
        "active_set" => {
            let grid_n = cfg.get_usize("bench.grid_n", 32)?;
            let b = bench::active_set(grid_n, &[0.5, 0.7, 0.9], 0.3, repeats, 60);
            let csv = format!(
                "mode,mean_s,median_s,samples\nreduced,{:.6e},{:.6e},{}\nfull,{:.6e},{:.6e},{}\n",
                b.reduced_mean,
                b.reduced_median,
                b.samples.len(),
                b.full_mean,
                b.full_median,
                b.samples.len()
            );
            fs::write(out.join("active_set.csv"), csv).map_err(IoError::Io)?;
            let summary = serde_json::json!({
                "grid_n": grid_n,
                "dim": b.dim,
                "reduced_median_s": b.reduced_median,
                "full_median_s": b.full_median,
                "ratio": b.reduced_median / b.full_median,
                "samples": b.samples.iter().map(|s| {
                    serde_json::json!({"reduced_s": s.0, "full_s": s.1, "frozen": s.2})
                }).collect::<Vec<_>>(),
            });
            fs::write(
                out.join("active_set.json"),
                serde_json::to_string_pretty(&summary).unwrap() + "\n",
            )
            .map_err(IoError::Io)?;
            println!(
                "active_set: median reduced {:.3e}s vs full {:.3e}s over {} samples",
                b.reduced_median,
                b.full_median,
                b.samples.len()
            );
            Ok(0)
        }
        "linsolve" => {
            let b = bench::linsolve(&[40, 50, 60], repeats);
            let mut csv = String::from("solver");
            for s in &b.sizes {
                csv.push_str(&format!(",m_{s}"));
            }
            csv.push('\n');
            for (name, cells) in &b.rows {
                csv.push_str(name);
                for (mean, var) in cells {
                    csv.push_str(&format!(",{mean:.6e}±{var:.1e}"));
                }
                csv.push('\n');
            }
            fs::write(out.join("linsolve.csv"), csv).map_err(IoError::Io)?;
            let summary = serde_json::json!({
                "sizes": b.sizes,
                "rows": b.rows.iter().map(|(name, cells)| serde_json::json!({
                    "solver": name,
                    "mean_s": cells.iter().map(|c| c.0).collect::<Vec<_>>(),
                    "variance": cells.iter().map(|c| c.1).collect::<Vec<_>>(),
                })).collect::<Vec<_>>(),
            });
            fs::write(
                out.join("linsolve.json"),
                serde_json::to_string_pretty(&summary).unwrap() + "\n",
            )
            .map_err(IoError::Io)?;
            println!("linsolve table written to {}", out.display());
            Ok(0)
        }
        "block_jacobi" => {
            let grid_n = cfg.get_usize("bench.block_grid_n", 100)?;
            let overlap = cfg.get_f64("linsolve.overlap", 0.2)?;
            let b = bench::block_jacobi_bench(grid_n, &[3, 4], overlap, repeats);
            let mut csv =
                String::from("partitions,max_block_dim,factor_storage_entries,mean_solve_s\n");
            for row in &b.rows {
                let label = if row.partitions == 0 {
                    "-".to_string()
                } else {
                    row.partitions.to_string()
                };
                csv.push_str(&format!(
                    "{label},{},{},{:.6e}\n",
                    row.max_block_dim, row.factor_storage, row.mean_solve_s
                ));
            }
            fs::write(out.join("block_jacobi.csv"), csv).map_err(IoError::Io)?;
            let summary = serde_json::json!({
                "dim": b.dim,
                "overlap": overlap,
                "rows": b.rows.iter().map(|r| serde_json::json!({
                    "partitions": r.partitions,
                    "max_block_dim": r.max_block_dim,
                    "factor_storage_entries": r.factor_storage,
                    "mean_solve_s": r.mean_solve_s,
                    "var_solve_s": r.var_solve_s,
                })).collect::<Vec<_>>(),
            });
            fs::write(
                out.join("block_jacobi.json"),
                serde_json::to_string_pretty(&summary).unwrap() + "\n",
            )
            .map_err(IoError::Io)?;
            println!("block_jacobi table written to {}", out.display());
            Ok(0)
        }
        other => Err(CliError::Usage(format!(
            "unknown bench suite '{other}' (gamma_sweep | active_set | linsolve | block_jacobi)"
        ))),
    }
}
