use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use moi_core::experiment::{run, Command, ConfigError, ExperimentConfig, ReportFormat, ReportWriter, RunError};
use moi_core::funcmodel::FunctionSpec;
use moi_core::Error;

const EXIT_FAILED_ROWS: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "moi", version, about = "Seeded checks of multiple operator integral identities")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Divided-difference identities
    Ddiff(Opts),
    /// Tensor-product and kernel algebra checks
    Moi(Opts),
    /// Derivatives of t -> f(A+tK) against finite differences
    Derivative(Opts),
    /// Perturbation formula for a change of one spectrum
    Perturb(Opts),
    /// Taylor remainder identities and normalized sizes
    Taylor(Opts),
    /// Grid-halving continuity sweeps of the k-th derivative
    Continuity(Opts),
    /// Boundedness ratio statistics
    Ratio(Opts),
    /// All of the above
    Suite(Opts),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct Opts {
    /// JSON config file; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
    /// Schatten exponents, comma separated
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    /// Function as kind:params, e.g. exp:1 or poly:1,0,0
    #[arg(long)]
    function: Option<FunctionSpec>,
    #[arg(long)]
    trials: Option<usize>,
    /// Restrict slot-indexed checks to one slot
    #[arg(long)]
    slot: Option<usize>,
    /// Finite-difference step override
    #[arg(long)]
    step: Option<f64>,
    /// Coarse interval count of the continuity grid
    #[arg(long)]
    grid: Option<usize>,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

impl Opts {
    fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
                ExperimentConfig::from_json(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.dim {
            cfg.dim = v;
        }
        if let Some(v) = self.order {
            cfg.order = v;
        }
        if let Some(v) = &self.p {
            cfg.p_values = v.clone();
        }
        if let Some(v) = &self.function {
            cfg.function = v.clone();
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if self.slot.is_some() {
            cfg.slot = self.slot;
        }
        if self.step.is_some() {
            cfg.step = self.step;
        }
        if self.grid.is_some() {
            cfg.grid = self.grid;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(command: Command, opts: &Opts) -> ExitCode {
    let cfg = match opts.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let out: Box<dyn Write> = match &opts.out {
        Some(path) => match File::create(path) {
            Ok(f) => Box::new(BufWriter::new(f)),
            Err(e) => {
                eprintln!("error: cannot create {}: {e}", path.display());
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => Box::new(io::stdout().lock()),
    };
    let format = match opts.format {
        Format::Csv => ReportFormat::Csv,
        Format::Json => ReportFormat::Json,
    };
    let result = ReportWriter::new(format, out, &cfg)
        .map_err(RunError::from)
        .and_then(|mut w| {
            let summary = run(command, &cfg, &mut w)?;
            w.finish()?;
            Ok(summary)
        });
    match result {
        Ok(s) if s.all_passed() => ExitCode::SUCCESS,
        Ok(s) => {
            eprintln!("{} of {} rows failed", s.failed, s.rows);
            ExitCode::from(EXIT_FAILED_ROWS)
        }
        Err(RunError::Numeric(e @ Error::NonConvergence { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_NONCONVERGENCE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = match &cli.command {
        Sub::Ddiff(o) => (Command::Ddiff, o),
        Sub::Moi(o) => (Command::Moi, o),
        Sub::Derivative(o) => (Command::Derivative, o),
        Sub::Perturb(o) => (Command::Perturb, o),
        Sub::Taylor(o) => (Command::Taylor, o),
        Sub::Continuity(o) => (Command::Continuity, o),
        Sub::Ratio(o) => (Command::Ratio, o),
        Sub::Suite(o) => (Command::Suite, o),
    };
    execute(command, opts)
}
