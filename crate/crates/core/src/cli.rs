//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage and configuration errors, 3 for
//! numerical failures.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::drift::{sobolev_seminorm, BandTreatment, DriftId, SeminormOptions};
use crate::error::{Error, Result};
use crate::experiment::{
    compare_grids, persist_comparison, persist_results, run_strong_convergence, ConvergenceRun,
    ErrorNorm, ExperimentConfig, GridChoice,
};
use crate::grid::{GridKind, GridSpec};
use crate::path::{sample_brownian, InitialValue, RngStream};
use crate::quadrature::{quadrature_rate_study, QuadratureStudyConfig, DEFAULT_SUBSTEPS};
use crate::scheme::em_solve;
use crate::transform::{build_zvonkin, DEFAULT_KNOT_SPACING};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "sdelab",
    version,
    about = "Strong-convergence lab for dX = mu(X) dt + dW with irregular drift"
)]
struct Cli {
    /// Worker threads for Monte Carlo loops [default: available parallelism]
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Master seed of all random streams [default: 0]
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,

    /// Directory for output files
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one Euler-Maruyama path and write it as CSV (t,x)
    Simulate(SimulateArgs),
    /// Estimate the strong convergence rate of the EM scheme
    Converge(ConvergeArgs),
    /// Estimate the decay of the weighted quadrature error over n
    Quadrature(QuadratureArgs),
    /// Sobolev-Slobodeckij seminorm of the irregular part of a drift
    Seminorm(SeminormArgs),
    /// Write the tabulated Zvonkin transform as CSV (x,B,phi,phi_prime)
    TransformDump(TransformDumpArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Drift, e.g. sign:2, constant:1, indicator:0:1, holder:0.75:1
    #[arg(long, value_name = "ID")]
    drift: DriftId,
    /// Grid: equi:<n>, quad:<n> or custom:<file>
    #[arg(long, value_name = "GRID")]
    grid: GridSpec,
    /// Time horizon
    #[arg(long = "T", value_name = "T", default_value_t = 1.0)]
    horizon: f64,
    /// Initial value: a number or uniform:<lo>:<hi>
    #[arg(long, value_name = "XI", default_value = "0")]
    xi: InitialValue,
    /// Replication index within the seed's stream family
    #[arg(long, value_name = "R", default_value_t = 0)]
    replication: u64,
    /// Output file [default: stdout, or simulate.csv in --out-dir]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write the driving Brownian path (t,W) to this file
    #[arg(long, value_name = "FILE")]
    brownian_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConvergeArgs {
    /// JSON experiment config; the flags below override its fields
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Drift id
    #[arg(long, value_name = "ID")]
    drift: Option<DriftId>,
    /// Grid family: equi, quad or both
    #[arg(long, value_name = "KIND")]
    grid: Option<GridChoice>,
    /// Comma-separated increasing step counts
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Monte Carlo replications
    #[arg(long, value_name = "R")]
    reps: Option<usize>,
    /// Reference refinement factor m (reference grid has m * max(n) steps)
    #[arg(long, value_name = "M")]
    m: Option<usize>,
    /// Initial value: a number or uniform:<lo>:<hi>
    #[arg(long, value_name = "XI")]
    xi: Option<InitialValue>,
    /// Error norm: max_over_nodes or terminal
    #[arg(long, value_name = "NORM")]
    norm: Option<ErrorNorm>,
    /// Time horizon
    #[arg(long = "T", value_name = "T")]
    horizon: Option<f64>,
}

#[derive(Debug, Args)]
struct QuadratureArgs {
    /// Drift whose irregular part is the integrand b
    #[arg(long, value_name = "ID", default_value = "indicator:0:1")]
    drift: DriftId,
    /// Grid family: equi or quad
    #[arg(long, value_name = "KIND", default_value = "equi")]
    grid: GridKind,
    /// Comma-separated step counts
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "8,16,32,64,128")]
    n_list: Vec<usize>,
    /// Monte Carlo replications
    #[arg(long, value_name = "R", default_value_t = 1000)]
    reps: usize,
    /// Sub-intervals per grid step for the inner time integral
    #[arg(long, value_name = "S", default_value_t = DEFAULT_SUBSTEPS)]
    substeps: usize,
    /// Initial value: a number or uniform:<lo>:<hi>
    #[arg(long, value_name = "XI", default_value = "0")]
    xi: InitialValue,
    /// Time horizon
    #[arg(long = "T", value_name = "T", default_value_t = 1.0)]
    horizon: f64,
    /// Output CSV [default: stdout, or quadrature_<kind>.csv in --out-dir]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SeminormArgs {
    /// Drift whose irregular part is measured, e.g. indicator:0:1
    #[arg(long, value_name = "ID")]
    f: DriftId,
    /// Order kappa in (0, 1)
    #[arg(long, value_name = "KAPPA")]
    kappa: f64,
    /// Half-width R of the truncation box [-R, R] [default: support radius + 10]
    #[arg(long, value_name = "R")]
    radius: Option<f64>,
    /// Number of sample cells [default: 4096]
    #[arg(long, value_name = "N")]
    grid_points: Option<usize>,
}

#[derive(Debug, Args)]
struct TransformDumpArgs {
    /// Drift whose irregular part defines the transform
    #[arg(long, value_name = "ID")]
    drift: DriftId,
    /// Target spacing of the knot table
    #[arg(long, value_name = "H", default_value_t = DEFAULT_KNOT_SPACING)]
    knot_spacing: f64,
    /// Output file [default: stdout, or transform.csv in --out-dir]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Help of the top-level command or of one subcommand, as printed by `--help`.
pub fn help_text(subcommand: Option<&str>) -> Option<String> {
    let mut cmd = Cli::command();
    cmd.build();
    let target = match subcommand {
        None => &mut cmd,
        Some(name) => cmd.find_subcommand_mut(name)?,
    };
    Some(target.render_help().to_string())
}

/// Names of all subcommands.
pub fn subcommands() -> Vec<String> {
    Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_owned())
        .collect()
}

/// Runs the CLI with process stdout and stderr.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the CLI writing to the given streams; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_CONFIG
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };

    // Output is buffered so the command can run inside a dedicated pool.
    let mut buffer = Vec::new();
    let result = match cli.threads {
        Some(0) => Err(Error::invalid("threads", "need at least one thread")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli, &mut buffer)),
            Err(e) => Err(Error::Numerical(format!("cannot start thread pool: {e}"))),
        },
        None => execute(&cli, &mut buffer),
    };
    let _ = out.write_all(&buffer);
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let out_dir = cli.out_dir.as_deref();
    match &cli.command {
        Command::Simulate(a) => simulate(a, seed, out_dir, out),
        Command::Converge(a) => converge(a, cli.seed, out_dir, out),
        Command::Quadrature(a) => quadrature(a, seed, out_dir, out),
        Command::Seminorm(a) => seminorm(a, out),
        Command::TransformDump(a) => transform_dump(a, out_dir, out),
    }
}

/// Explicit file, else `default_name` in the output directory, else stdout.
fn destination(explicit: &Option<PathBuf>, out_dir: Option<&Path>, default_name: &str) -> Option<PathBuf> {
    explicit
        .clone()
        .or_else(|| out_dir.map(|d| d.join(default_name)))
}

fn emit(
    target: Option<PathBuf>,
    out: &mut dyn Write,
    write: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<()> {
    match target {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let mut buf = Vec::new();
            write(&mut buf).map_err(|e| Error::io(&path, e))?;
            fs::write(&path, buf).map_err(|e| Error::io(&path, e))
        }
        None => write(out).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn simulate(a: &SimulateArgs, seed: u64, out_dir: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let drift = a.drift.build()?;
    let grid = a.grid.build(a.horizon)?;
    let stream = RngStream::new(seed, a.replication);
    let xi = a.xi.sample(stream);
    let path = sample_brownian(&grid, stream);
    let em = em_solve(&drift, xi, &path)?;
    emit(destination(&a.out, out_dir, "simulate.csv"), out, |w| em.write_csv(w))?;
    if let Some(p) = &a.brownian_out {
        emit(Some(p.clone()), out, |w| path.write_csv(w))?;
    }
    Ok(())
}

fn converge(a: &ConvergeArgs, seed: Option<u64>, out_dir: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => {
            let drift = a
                .drift
                .clone()
                .ok_or_else(|| Error::invalid("drift", "give --drift or --config"))?;
            let n_list = a
                .n_list
                .clone()
                .ok_or_else(|| Error::invalid("n_list", "give --n-list or --config"))?;
            ExperimentConfig::new(drift, n_list)
        }
    };
    if let Some(d) = &a.drift {
        cfg.drift = d.clone();
    }
    if let Some(g) = a.grid {
        cfg.grid = g;
    }
    if let Some(n) = &a.n_list {
        cfg.n_list = n.clone();
    }
    if let Some(r) = a.reps {
        cfg.replications = r;
    }
    if let Some(m) = a.m {
        cfg.refinement_factor = m;
    }
    if let Some(xi) = a.xi {
        cfg.xi = Some(xi);
    }
    if let Some(norm) = a.norm {
        cfg.error_norm = norm;
    }
    if let Some(t) = a.horizon {
        cfg.horizon = t;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    let cfg = cfg.resolved()?;
    let dir = out_dir.unwrap_or(Path::new("."));
    let io_err = |e| Error::io("<stdout>", e);

    let runs: Vec<ConvergenceRun> = match cfg.grid {
        GridChoice::Both => {
            let cmp = compare_grids(&cfg)?;
            persist_comparison(&cmp, &cfg, dir)?;
            vec![cmp.equidistant, cmp.quadratic]
        }
        choice => {
            let run = run_strong_convergence(&cfg, choice.kinds()[0])?;
            persist_results(&run, &cfg, dir)?;
            vec![run]
        }
    };
    writeln!(out, "grid,n,error,std_error").map_err(io_err)?;
    for run in &runs {
        for p in &run.estimate.points {
            writeln!(out, "{},{},{},{}", run.kind, p.n, p.error, p.std_error).map_err(io_err)?;
        }
    }
    for run in &runs {
        match run.estimate.fit {
            Some(f) => writeln!(
                out,
                "# {}: slope {:.4} (residual se {:.4}, Monte Carlo se {:.4}), reference {}",
                run.kind, f.slope, f.slope_std_error, f.slope_mc_std_error, run.reference
            ),
            None => writeln!(out, "# {}: exact, reference {}", run.kind, run.reference),
        }
        .map_err(io_err)?;
    }
    Ok(())
}

fn quadrature(a: &QuadratureArgs, seed: u64, out_dir: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let cfg = QuadratureStudyConfig {
        drift: a.drift.clone(),
        kind: a.grid,
        n_list: a.n_list.clone(),
        horizon: a.horizon,
        xi: a.xi,
        replications: a.reps,
        substeps: a.substeps,
        master_seed: seed,
    };
    let study = quadrature_rate_study(&cfg)?;
    let target = destination(&a.out, out_dir, &format!("quadrature_{}.csv", a.grid.short_name()));
    let to_file = target.is_some();
    emit(target, out, |w| study.write_csv(w))?;
    if to_file {
        let line = match study.rate.fit {
            Some(f) => format!(
                "{}: slope {:.4} (residual se {:.4}, Monte Carlo se {:.4})",
                study.kind, f.slope, f.slope_std_error, f.slope_mc_std_error
            ),
            None => format!("{}: error functional vanishes", study.kind),
        };
        writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

fn seminorm(a: &SeminormArgs, out: &mut dyn Write) -> Result<()> {
    let spec = a.f.build()?;
    let b = spec.irregular;
    let defaults = SeminormOptions::for_support(b.support)?;
    let radius = a.radius.unwrap_or(defaults.truncation_radius);
    let points = a.grid_points.unwrap_or(defaults.grid_points);
    let est = sobolev_seminorm(|x| b.eval(x), a.kappa, radius, points)?;
    let band = match est.band {
        BandTreatment::Extrapolated { exponent, contribution } => {
            format!("extrapolated (local exponent {exponent:.4}, contribution {contribution:.6e})")
        }
        BandTreatment::Omitted { exponent } => format!(
            "omitted (local exponent {exponent:.4} <= 2 kappa: the seminorm diverges, value is a lower bound)"
        ),
    };
    let io_err = |e| Error::io("<stdout>", e);
    writeln!(out, "value = {}", est.value).map_err(io_err)?;
    writeln!(out, "kappa = {}", est.kappa).map_err(io_err)?;
    writeln!(out, "truncation_radius = {}", est.truncation_radius).map_err(io_err)?;
    writeln!(out, "grid_points = {}", est.grid_points).map_err(io_err)?;
    writeln!(out, "error_indicator = {}", est.error_indicator).map_err(io_err)?;
    writeln!(out, "band = {band}").map_err(io_err)?;
    Ok(())
}

fn transform_dump(a: &TransformDumpArgs, out_dir: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let spec = a.drift.build()?;
    let transform = build_zvonkin(&spec.irregular, a.knot_spacing)?;
    emit(destination(&a.out, out_dir, "transform.csv"), out, |w| transform.write_csv(w))
}
