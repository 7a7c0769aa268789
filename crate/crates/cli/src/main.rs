use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use postmatch_cli::config::parse_config;
use postmatch_cli::run::{run_convergence, run_sweep, run_validate, CliError, OutputFormat, Overrides};
use postmatch_cli::RunConfig;

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Touchstone,
    Both,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Touchstone => OutputFormat::Touchstone,
            FormatArg::Both => OutputFormat::Both,
        }
    }
}

/// Scattering analysis of conducting cylindrical posts in rectangular
/// waveguide: generalized S-matrices by local-basis mode matching, cascaded
/// over multi-post structures and swept in frequency.
#[derive(Parser)]
#[command(name = "postmatch", version)]
struct Cli {
    /// Worker threads for the sweep (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured frequency sweep; write CSV and optional Touchstone.
    Sweep {
        /// Configuration file (TOML).
        config: PathBuf,
        /// Override output.csv from the config.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Override output.touchstone from the config.
        #[arg(long)]
        touchstone: Option<PathBuf>,
        /// Which files to write (default: csv, or both when a Touchstone
        /// path is configured).
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Override the post-wall quadrature order.
        #[arg(long)]
        quadrature_order: Option<usize>,
    },
    /// Sweep at several mode counts and report convergence deltas.
    Converge {
        config: PathBuf,
        /// Ascending mode counts, e.g. --modes 40,50,60,70
        #[arg(long, value_delimiter = ',', required = true)]
        modes: Vec<usize>,
        /// Convergence threshold on max |dS21| in dB.
        #[arg(long, default_value_t = 0.1)]
        threshold_db: f64,
        #[arg(long)]
        quadrature_order: Option<usize>,
    },
    /// Cross-check the projection solver against the collocation oracle.
    Validate {
        config: PathBuf,
        /// Number of comparison frequencies across the sweep range.
        #[arg(long, default_value_t = 5)]
        frequencies: usize,
        /// Pass/fail tolerance on fundamental-mode |S11|, |S21|.
        #[arg(long, default_value_t = 1e-2)]
        tolerance: f64,
        #[arg(long)]
        quadrature_order: Option<usize>,
    },
}

fn load_config(path: &PathBuf) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_config(&text)?)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sweep {
            config,
            output,
            touchstone,
            format,
            quadrature_order,
        } => {
            let cfg = load_config(&config)?;
            let over = Overrides {
                output,
                touchstone,
                format: format.map(Into::into),
                quadrature_order,
            };
            let art = run_sweep(&cfg, &over)?;
            if let Some(csv) = &art.csv_path {
                println!(
                    "wrote {} ({} points, {} not solved)",
                    csv.display(),
                    art.points,
                    art.failed_points
                );
            }
            if let Some(ts) = art.touchstone_path {
                println!("wrote {}", ts.display());
            }
            Ok(())
        }
        Command::Converge {
            config,
            modes,
            threshold_db,
            quadrature_order,
        } => {
            let cfg = load_config(&config)?;
            let report = run_convergence(&cfg, &modes, threshold_db, quadrature_order)?;
            print!("{}", report.render_text());
            Ok(())
        }
        Command::Validate {
            config,
            frequencies,
            tolerance,
            quadrature_order,
        } => {
            let cfg = load_config(&config)?;
            let report = run_validate(&cfg, frequencies, tolerance, quadrature_order)?;
            print!("{}", report.render_text());
            if report.pass() {
                Ok(())
            } else {
                Err(CliError::Solver(postmatch::Error::InvalidInput(format!(
                    "solver cross-check failed: max delta {:.3e} exceeds tolerance {:.1e}",
                    report.max_delta(),
                    report.tolerance
                ))))
            }
        }
    }
}

fn run_with_threads(cli: Cli) -> Result<(), CliError> {
    #[cfg(feature = "parallel")]
    {
        if cli.threads > 0 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cli.threads)
                .build()
                .map_err(|e| CliError::Io(std::io::Error::other(format!("thread pool: {e}"))))?;
            return pool.install(|| dispatch(cli));
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        if cli.threads > 1 {
            eprintln!("note: built without the parallel feature; --threads ignored");
        }
    }
    dispatch(cli)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_with_threads(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
