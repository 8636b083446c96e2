//! The `tsfrac` command line: `solve`, `check` and `compare`.
//!
//! Exit codes are stable: see [`exit`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::conditions::{
    contraction_constant, estimate_constants, existence_beta_search, HypothesisConstants, Sampling,
};
use crate::config::{constants_from_path, ProblemConfig};
use crate::expr::{Bindings, Expr, Role};
use crate::frac::{derivative_profiles, FracOrder};
use crate::nabla::GridFunction;
use crate::output::write_comparison_csv;
use crate::solver::{solve, HistoryVariant, SolveError};
use crate::timescale::Grid;

pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const DIVERGED: i32 = 2;
    pub const EXISTENCE_ONLY: i32 = 3;
    pub const NEITHER: i32 = 4;
}

#[derive(Debug, Parser)]
#[command(
    name = "tsfrac",
    version,
    about = "Impulsive fractional dynamic equations on time scales"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the problem in a config file and write the solution as CSV.
    Solve(SolveArgs),
    /// Evaluate the uniqueness and existence conditions.
    Check(CheckArgs),
    /// Compare Caputo, Riemann–Liouville and shifted-RL derivatives of a function.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Problem config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Suppress the summary.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// CSV destination; overrides `[output] csv`. Without either, CSV goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Grid mesh; overrides `[solver] mesh`.
    #[arg(long)]
    pub mesh: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Constants file; without it the constants are estimated by sampling.
    #[arg(long)]
    pub constants: Option<PathBuf>,
    /// Sampling range for p (and for the argument of phi), as `lo,hi`.
    #[arg(long, value_parser = parse_range, default_value = "0,1")]
    pub p_range: (f64, f64),
    /// Sampling range for h, as `lo,hi`.
    #[arg(long, value_parser = parse_range, default_value = "0,1")]
    pub h_range: (f64, f64),
    /// Lattice points per sampled axis.
    #[arg(long, default_value_t = 33)]
    pub resolution: usize,
    /// Random point pairs per theta sample.
    #[arg(long, default_value_t = 64)]
    pub pairs: usize,
    /// Seed for the random point pairs.
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Function of `theta`.
    #[arg(long)]
    pub function: String,
    /// Order; defaults to the config's `w`.
    #[arg(long)]
    pub w: Option<f64>,
    /// Lower limit; defaults to the start of the time scale.
    #[arg(long)]
    pub rho: Option<f64>,
    /// CSV destination; without it CSV goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Grid mesh; overrides `[solver] mesh`.
    #[arg(long)]
    pub mesh: Option<f64>,
}

fn parse_range(text: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = text
        .split_once(',')
        .ok_or_else(|| format!("expected `lo,hi`, got `{text}`"))?;
    let lo = crate::config::parse_number(lo.trim())?;
    let hi = crate::config::parse_number(hi.trim())?;
    Ok((lo, hi))
}

/// Runs one command, writing reports to `out` and diagnostics to `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, out, err),
        Command::Check(a) => cmd_check(a, out),
        Command::Compare(a) => cmd_compare(a, out),
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            let _ = writeln!(err, "error: {}", failure.message);
            failure.code
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

fn config_error(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: exit::CONFIG,
        message: e.to_string(),
    }
}

fn load(path: &Path) -> Result<ProblemConfig, Failure> {
    ProblemConfig::from_path(path).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| config_error(format!("cannot write {}: {e}", path.display())))
}

fn io_failure(e: impl std::fmt::Display) -> Failure {
    config_error(format!("write failed: {e}"))
}

fn cmd_solve(args: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let mut cfg = load(&args.common.config)?;
    if let Some(mesh) = args.mesh {
        cfg.solver.mesh = mesh;
    }
    let (problem, solver_cfg) = cfg.build().map_err(config_error)?;
    let started = Instant::now();
    let sol = solve(&problem, &solver_cfg).map_err(|e| match e {
        SolveError::Grid(_) | SolveError::InvalidConfig(_) => config_error(e),
        other => Failure {
            code: exit::DIVERGED,
            message: other.to_string(),
        },
    })?;
    let runtime = started.elapsed();

    let csv_path = args.out.clone().or_else(|| cfg.csv.clone());
    let summary: &mut dyn Write = match &csv_path {
        Some(path) => {
            sol.write_csv(create(path)?).map_err(io_failure)?;
            out
        }
        None => {
            sol.write_csv(&mut *out).map_err(io_failure)?;
            err
        }
    };
    if !args.common.quiet {
        let stats = sol.iterations();
        let variant = match sol.history() {
            HistoryVariant::Frozen => "frozen",
            HistoryVariant::Memory => "memory",
        };
        let mut lines = vec![
            format!("nodes            {}", sol.grid().len()),
            format!("history          {variant}"),
            format!("outer iterations {}", stats.outer),
            format!("picard sweeps    {}", stats.picard_sweeps),
            format!("max inner        {}", stats.max_inner),
            format!("p(start)         {:.12}", sol.initial_value()),
            format!("p(end)           {:.12}", sol.final_value()),
            format!("residual         {:.3e}", sol.residual()),
            format!("runtime          {:.3} s", runtime.as_secs_f64()),
        ];
        for j in sol.jumps() {
            lines.push(format!(
                "jump at {:.12}  {:.12} -> {:.12}",
                j.theta, j.p_minus, j.p_plus
            ));
        }
        let ratios = sol.outer_ratios();
        if !ratios.is_empty() {
            let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.4}")).collect();
            lines.push(format!("outer ratios     {}", shown.join(" ")));
        }
        if let Some(path) = &csv_path {
            lines.push(format!("csv              {}", path.display()));
        }
        for l in lines {
            writeln!(summary, "{l}").map_err(io_failure)?;
        }
    }
    Ok(exit::SUCCESS)
}

fn cmd_check(args: &CheckArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = load(&args.common.config)?;
    let (problem, _) = cfg.build().map_err(config_error)?;
    let m = problem.impulses().len();
    let horizon = problem.horizon() - problem.start();

    let (constants, source): (HypothesisConstants, String) = match &args.constants {
        Some(path) => {
            let c = constants_from_path(path)
                .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            (c, format!("file {}", path.display()))
        }
        None => {
            let sampling = Sampling {
                p_range: args.p_range,
                h_range: args.h_range,
                resolution: args.resolution,
                random_pairs: args.pairs,
                seed: args.seed,
            };
            let est = estimate_constants(&problem, &sampling).map_err(config_error)?;
            let source = format!(
                "estimated (p in [{}, {}], h in [{}, {}], resolution {}, {} pairs, {} evaluations); lower bounds, not certificates",
                sampling.p_range.0,
                sampling.p_range.1,
                sampling.h_range.0,
                sampling.h_range.1,
                sampling.resolution,
                sampling.random_pairs,
                est.evaluations
            );
            (est.constants, source)
        }
    };
    constants.validate(m).map_err(config_error)?;

    let w = problem.order();
    let report = contraction_constant(&constants, w, horizon, m);
    let existence = existence_beta_search(&constants, w, horizon, m);
    let code = if report.satisfied {
        exit::SUCCESS
    } else if existence.beta.is_some() {
        exit::EXISTENCE_ONLY
    } else {
        exit::NEITHER
    };

    if !args.common.quiet {
        let verdict = |ok: bool| if ok { "satisfied" } else { "not satisfied" };
        let text = [
            format!("constants: {source}"),
            format!(
                "  K = {:.6e}  G = {:.6e}  A = {:.6e}  F = {:.6e}  E = {:.6e}",
                constants.lipschitz_p,
                constants.lipschitz_h,
                constants.growth_offset,
                constants.growth_p,
                constants.growth_h
            ),
            format!(
                "  M = {:?}  L = {:?}  mu = {:.6e}  H = {:.6e}",
                constants.impulse_bound,
                constants.impulse_lipschitz,
                constants.phi_growth,
                constants.phi_lipschitz
            ),
            format!(
                "horizon T = {horizon}, order w = {}, impulses m = {m}",
                w.value()
            ),
            format!(
                "uniqueness: U = {:.8} = {:.8} (impulses) + {:.8} (phi) + {:.8} (rhs), {}",
                report.u,
                report.impulse_term,
                report.phi_term,
                report.rhs_term,
                verdict(report.satisfied)
            ),
            match report.sigma {
                Some(s) => format!("invariant ball radius sigma = {s:.8}"),
                None => "invariant ball radius sigma: denominator not positive".to_string(),
            },
            match existence.beta {
                Some(b) => format!(
                    "existence: beta = {b:.8} ({:.8} * beta + {:.8} < beta), satisfied",
                    existence.slope, existence.offset
                ),
                None => format!(
                    "existence: slope {:.8} >= 1, no admissible beta",
                    existence.slope
                ),
            },
        ];
        for line in text {
            writeln!(out, "{line}").map_err(io_failure)?;
        }
        writeln!(out).map_err(io_failure)?;
    }
    let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:.16e}"));
    let kv = [
        ("U", format!("{:.16e}", report.u)),
        ("impulse_term", format!("{:.16e}", report.impulse_term)),
        ("phi_term", format!("{:.16e}", report.phi_term)),
        ("rhs_term", format!("{:.16e}", report.rhs_term)),
        ("satisfied", report.satisfied.to_string()),
        ("sigma", opt(report.sigma)),
        ("existence_slope", format!("{:.16e}", existence.slope)),
        ("existence_offset", format!("{:.16e}", existence.offset)),
        ("beta", opt(existence.beta)),
        ("exit_code", code.to_string()),
    ];
    for (k, v) in kv {
        writeln!(out, "{k}={v}").map_err(io_failure)?;
    }
    Ok(code)
}

fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = load(&args.common.config)?;
    let ts = cfg.time_scale().map_err(config_error)?;
    let w = FracOrder::new(args.w.unwrap_or(cfg.order())).map_err(config_error)?;
    let mesh = args.mesh.unwrap_or(cfg.solver.mesh);
    let rho = args.rho.unwrap_or(ts.min());
    let f_expr = Expr::parse(&args.function, Role::Function).map_err(config_error)?;

    let grid = Arc::new(Grid::build(&ts, mesh, &[rho]).map_err(config_error)?);
    let rho_index = grid
        .index_of(ts.snap(rho).map_err(config_error)?)
        .ok_or_else(|| config_error(format!("rho = {rho} is not a grid node")))?;
    let values = grid
        .nodes()
        .iter()
        .map(|&theta| {
            f_expr.eval(&Bindings {
                theta,
                ..Default::default()
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(config_error)?;
    let f = GridFunction::new(Arc::clone(&grid), values).map_err(config_error)?;
    let rows = derivative_profiles(&f, w, rho_index).map_err(config_error)?;
    match &args.out {
        Some(path) => write_comparison_csv(&grid, &rows, create(path)?),
        None => write_comparison_csv(&grid, &rows, &mut *out),
    }
    .map_err(io_failure)?;
    if !args.common.quiet && args.out.is_some() {
        let worst = rows
            .iter()
            .map(|r| (r.caputo - r.caputo_via_rl).abs())
            .fold(0.0, f64::max);
        writeln!(
            out,
            "rows {}  max |caputo - caputo_via_rl| = {worst:.3e}",
            rows.len()
        )
        .map_err(io_failure)?;
    }
    Ok(exit::SUCCESS)
}
