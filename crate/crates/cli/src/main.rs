//! `despeckle` — speckle simulation, TV restoration and benchmarking.
//!
//! Exit codes: 0 success (and converged, where that applies), 2 usage,
//! 3 I/O failure, 4 restoration hit the iteration cap, 5 numeric failure.
//! stdout carries only machine-readable `key=value` summaries; diagnostics
//! and per-iteration progress go to stderr.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use despeckle_core::bench::{
    lambda_sweep, run_table, write_sweep_csv, SweepSpec, TableImage, TableSpec,
};
use despeckle_core::io::{load_image, save_image, ImageFormat};
use despeckle_core::noise::{apply_speckle, to_log, DEFAULT_CLAMP_FLOOR};
use despeckle_core::solver::{restore_with, write_trace_csv, InitMode, SolverConfig};
use despeckle_core::{Error, ImageGrid, SpeckleModel};

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NO_CONVERGENCE: u8 = 4;
const EXIT_NUMERIC: u8 = 5;

#[derive(Parser)]
#[command(name = "despeckle", version, about = "Total-variation restoration of speckled images")]
struct Cli {
    /// Worker threads for internal parallelism (default: all cores; use 1
    /// for bit-reproducible golden runs)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Suppress per-iteration progress lines on stderr
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Pgm,
    Spkf,
}

impl From<FormatArg> for ImageFormat {
    fn from(f: FormatArg) -> ImageFormat {
        match f {
            FormatArg::Pgm => ImageFormat::PgmP5,
            FormatArg::Spkf => ImageFormat::RawF64,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Observation,
    Zeros,
}

impl From<InitArg> for InitMode {
    fn from(i: InitArg) -> InitMode {
        match i {
            InitArg::Observation => InitMode::Observation,
            InitArg::Zeros => InitMode::Zeros,
        }
    }
}

/// Flags shared by every command that runs the solver.
#[derive(Args)]
struct SolverArgs {
    /// Number of looks M (Gamma shape of the speckle)
    #[arg(long)]
    looks: f64,

    /// Splitting penalty weight (default: 2 * lambda)
    #[arg(long)]
    tau: Option<f64>,

    /// Iterate initialization
    #[arg(long, value_enum, default_value = "observation")]
    init: InitArg,

    /// Outer iteration cap
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,

    /// Relative-change stopping threshold (squared norms)
    #[arg(long, default_value_t = 1e-4)]
    stop_tol: f64,

    /// Intensity floor applied before the logarithm
    #[arg(long, default_value_t = DEFAULT_CLAMP_FLOOR)]
    clamp_floor: f64,
}

impl SolverArgs {
    fn config(&self, lambda: f64) -> SolverConfig {
        let mut cfg = SolverConfig::new(lambda);
        if let Some(tau) = self.tau {
            cfg.tau = tau;
        }
        cfg.init_mode = self.init.into();
        cfg.max_outer = self.max_iters;
        cfg.stop_tol = self.stop_tol;
        cfg
    }
}

#[derive(Args)]
struct GridArgs {
    /// Explicit comma-separated candidate weights
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,

    /// Log-spaced grid as min,max,count (default: two decades around 1/M)
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,

    /// Golden-section refinement around the best grid point
    #[arg(long)]
    refine: bool,
}

impl GridArgs {
    fn spec(&self, looks: f64) -> Result<SweepSpec, Error> {
        match (&self.lambdas, &self.grid) {
            (Some(lambdas), None) => SweepSpec::from_lambdas(lambdas.clone(), self.refine),
            (None, Some(g)) => {
                if g.len() != 3 {
                    return Err(Error::InvalidParameter {
                        name: "grid",
                        value: g.len() as f64,
                        constraint: "exactly min,max,count",
                    });
                }
                SweepSpec::from_grid(g[0], g[1], g[2] as usize, self.refine)
            }
            (None, None) => {
                let mut spec = SweepSpec::default_for_looks(looks);
                spec.refine = self.refine;
                Ok(spec)
            }
            (Some(_), Some(_)) => Err(Error::InvalidParameter {
                name: "lambdas/grid",
                value: f64::NAN,
                constraint: "given at most once",
            }),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Multiply a clean image by synthetic M-look speckle
    Simulate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        looks: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        /// Optional floor applied to the speckled intensities
        #[arg(long)]
        clamp_floor: Option<f64>,
        /// Force the file format instead of inferring from extensions
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },

    /// Restore a speckled image at a fixed regularization weight
    Restore {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        output: PathBuf,
        /// Write per-iteration diagnostics to this CSV
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[command(flatten)]
        solver: SolverArgs,
    },

    /// Search the regularization weight against a known ground truth
    Sweep {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        noisy: PathBuf,
        /// Write all evaluated points to this CSV
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },

    /// Simulate + sweep over a set of images and look counts; CSV report
    Bench {
        /// Ground-truth images
        #[arg(long, required = true, num_args = 1..)]
        images: Vec<PathBuf>,
        /// Comma-separated look counts
        #[arg(long, value_delimiter = ',', required = true)]
        looks: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        /// Report zero wall time (byte-reproducible output)
        #[arg(long)]
        no_timing: bool,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[command(flatten)]
        grid: GridArgs,
        /// Outer iteration cap per restore
        #[arg(long, default_value_t = 2000)]
        max_iters: usize,
        /// Relative-change stopping threshold
        #[arg(long, default_value_t = 1e-4)]
        stop_tol: f64,
    },

    /// Restore once and emit the per-iteration trace CSV
    Trace {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lambda: f64,
        /// Trace CSV destination
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_err()
        {
            eprintln!("error: thread pool already initialized");
            return ExitCode::from(EXIT_NUMERIC);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_)
        | Error::MalformedHeader(_)
        | Error::TruncatedPayload { .. }
        | Error::UnsupportedMaxval(_) => EXIT_IO,
        Error::InvalidParameter { .. }
        | Error::DimensionMismatch { .. }
        | Error::BufferLength { .. }
        | Error::EmptyGrid => EXIT_USAGE,
        Error::NonFinite { .. }
        | Error::ZeroNormReference
        | Error::DataTermOverflow { .. }
        | Error::SweepExhausted => EXIT_NUMERIC,
    }
}

fn format_for(path: &Path, forced: Option<FormatArg>) -> Result<ImageFormat, Error> {
    if let Some(f) = forced {
        return Ok(f.into());
    }
    ImageFormat::from_path(path).ok_or_else(|| Error::MalformedHeader(format!(
        "cannot infer format of {} (use .pgm/.spkf or --format)",
        path.display()
    )))
}

fn load(path: &Path, forced: Option<FormatArg>) -> Result<ImageGrid, Error> {
    load_image(path, format_for(path, forced)?)
}

fn save(image: &ImageGrid, path: &Path, forced: Option<FormatArg>) -> Result<(), Error> {
    save_image(image, path, format_for(path, forced)?)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Simulate {
            input,
            looks,
            seed,
            output,
            clamp_floor,
            format,
        } => {
            let model = SpeckleModel::new(looks)?;
            let x = load(&input, format)?;
            let noise = model.sample_speckle(x.width(), x.height(), seed);
            let mut y = apply_speckle(&x, &noise)?;
            if let Some(floor) = clamp_floor {
                if !(floor.is_finite() && floor > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "clamp_floor",
                        value: floor,
                        constraint: "positive and finite",
                    });
                }
                y = y.map(|v| v.max(floor));
            }
            save(&y, &output, format)?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Restore {
            input,
            lambda,
            output,
            trace,
            format,
            solver,
        } => {
            let model = SpeckleModel::new(solver.looks)?;
            let y = load(&input, format)?;
            let obs = to_log(&y, solver.clamp_floor)?;
            let cfg = solver.config(lambda);
            let quiet = cli.quiet;
            let result = restore_with(&obs, &model, &cfg, |row| {
                if !quiet {
                    eprintln!(
                        "iter {} objective {} constraint_sq {} rel_change {}",
                        row.iter, row.objective, row.constraint_sq, row.rel_change
                    );
                }
            })?;
            save(&result.x_hat, &output, format)?;
            if let Some(trace_path) = trace {
                let mut w = BufWriter::new(File::create(&trace_path)?);
                write_trace_csv(&result.trace, &mut w)?;
            }
            let last = result.trace.last().expect("at least one iteration");
            println!(
                "iterations={} converged={} rel_change={} objective={}",
                result.iterations, result.converged, last.rel_change, last.objective
            );
            Ok(if result.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NO_CONVERGENCE)
            })
        }

        Command::Sweep {
            truth,
            noisy,
            output,
            format,
            grid,
            solver,
        } => {
            let model = SpeckleModel::new(solver.looks)?;
            let x_true = load(&truth, format)?;
            let y = load(&noisy, format)?;
            let spec = grid.spec(solver.looks)?;
            let template = solver.config(1.0);
            let result = lambda_sweep(&x_true, &y, &model, &template, &spec)?;
            if let Some(path) = output {
                let mut w = BufWriter::new(File::create(&path)?);
                write_sweep_csv(&result.points, &mut w)?;
            }
            println!(
                "best_lambda={} err={} iterations={} converged={}",
                result.best.lambda,
                result.best.err.unwrap_or(f64::NAN),
                result.best.iterations,
                result.best.converged
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Bench {
            images,
            looks,
            seed,
            output,
            no_timing,
            format,
            grid,
            max_iters,
            stop_tol,
        } => {
            // per-row error entries for unreadable files, never a hard stop
            let mut table = Vec::new();
            let mut missing = Vec::new();
            for path in &images {
                let id = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                match load(path, format) {
                    Ok(image) => table.push(TableImage { id, image }),
                    Err(err) => {
                        eprintln!("error: {}: {err}", path.display());
                        missing.push(id);
                    }
                }
            }
            let looks_for_grid = looks.first().copied().unwrap_or(1.0);
            let mut template = SolverConfig::new(1.0);
            template.max_outer = max_iters;
            template.stop_tol = stop_tol;
            let spec = TableSpec {
                sweep: grid.spec(looks_for_grid)?,
                base_seed: seed,
                include_timing: !no_timing,
            };
            let mut w = BufWriter::new(File::create(&output)?);
            let rows = run_table(&table, &looks, &template, &spec, &mut w)?;
            for id in &missing {
                for &m in &looks {
                    writeln!(w, "{id},{m},NaN,NaN,0,0.000,0")?;
                }
            }
            w.flush()?;
            println!("rows={} output={}", rows.len(), output.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::Trace {
            input,
            lambda,
            output,
            format,
            solver,
        } => {
            let model = SpeckleModel::new(solver.looks)?;
            let y = load(&input, format)?;
            let obs = to_log(&y, solver.clamp_floor)?;
            let cfg = solver.config(lambda);
            let quiet = cli.quiet;
            let result = restore_with(&obs, &model, &cfg, |row| {
                if !quiet {
                    eprintln!(
                        "iter {} objective {} constraint_sq {} rel_change {}",
                        row.iter, row.objective, row.constraint_sq, row.rel_change
                    );
                }
            })?;
            let mut w = BufWriter::new(File::create(&output)?);
            write_trace_csv(&result.trace, &mut w)?;
            let first = result.trace.first().expect("at least one iteration");
            let last = result.trace.last().expect("at least one iteration");
            println!(
                "iterations={} converged={} constraint_first={} constraint_last={}",
                result.iterations, result.converged, first.constraint_sq, last.constraint_sq
            );
            Ok(if result.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NO_CONVERGENCE)
            })
        }
    }
}
