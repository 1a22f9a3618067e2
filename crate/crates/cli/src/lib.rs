//! The `noisestab` command line: argument parsing, run configuration and the
//! five commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod family;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use noisestab::bounds::{BoundId, Clock};
use noisestab::junta::Rounding;

pub use commands::{execute, Output};
pub use config::RunConfig;
pub use error::CliError;

use config::{BoundConfig, FunctionSpec, GridSpec, ModelSpec};

#[derive(Debug, Parser)]
#[command(name = "noisestab", version, about = "Noise stability, influences and semigroup bounds on small models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-coordinate influences `‖D_i f‖_r` (geometric influences for boxes).
    Influences {
        #[command(flatten)]
        common: Common,
        /// Norm exponent.
        #[arg(long)]
        r: Option<f64>,
    },
    /// Noise stability over a grid of noise rates.
    Stability {
        #[command(flatten)]
        common: Common,
        /// Add a Monte Carlo column with this many samples.
        #[arg(long, value_name = "SAMPLES")]
        mc: Option<usize>,
    },
    /// Checks a bound against exact left-hand sides.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bound: BoundArgs,
    },
    /// Spectral gap and log-Sobolev constant of the model.
    Constants {
        #[command(flatten)]
        common: Common,
    },
    /// Junta approximation, or with `--epsilon` the smallest junta within ε.
    Junta {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t: Option<f64>,
        /// Influence threshold.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// `nearest` or `none`.
        #[arg(long, value_parser = parse_rounding)]
        rounding: Option<Rounding>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// cube:n=..,p=.. | torus:m=..,n=.. | symmetric:n=.. | gaussian:n=..,degree=..
    #[arg(long)]
    pub model: Option<ModelSpec>,
    /// Function descriptor; repeat for a family.
    #[arg(long = "fn", value_name = "FUNCTION")]
    pub functions: Vec<FunctionSpec>,
    /// `default`, `log:lo:hi:points` or a comma-separated list.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a CSV table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub bound: Option<BoundId>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub constant: Option<f64>,
    #[arg(long)]
    pub exponent: Option<f64>,
    /// `time` or `noise`: how grid values are read.
    #[arg(long, value_parser = parse_clock)]
    pub clock: Option<Clock>,
}

fn parse_rounding(s: &str) -> Result<Rounding, String> {
    match s {
        "nearest" => Ok(Rounding::Nearest),
        "none" => Ok(Rounding::None),
        _ => Err(format!("expected nearest or none, not `{s}`")),
    }
}

fn parse_clock(s: &str) -> Result<Clock, String> {
    match s {
        "time" => Ok(Clock::Time),
        "noise" => Ok(Clock::Noise),
        _ => Err(format!("expected time or noise, not `{s}`")),
    }
}

impl Common {
    /// The config file, if any, with these flags applied on top.
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(model) = self.model {
            config.model = Some(model);
        }
        if !self.functions.is_empty() {
            config.functions = self.functions.clone();
        }
        if let Some(grid) = &self.grid {
            config.grid = Some(GridSpec::Text(grid.clone()));
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.out = Some(out.clone());
        }
        if let Some(csv) = &self.csv {
            config.csv = Some(csv.clone());
        }
        Ok(config)
    }
}

impl BoundArgs {
    fn apply(&self, config: &mut RunConfig) -> Result<(), CliError> {
        if let Some(id) = self.bound {
            if config.bound.as_ref().map(|b| b.bound) != Some(id) {
                config.bound = Some(BoundConfig::new(id));
            }
        }
        let any = self.rho.is_some()
            || self.lambda.is_some()
            || self.c.is_some()
            || self.constant.is_some()
            || self.exponent.is_some()
            || self.clock.is_some();
        if let Some(r) = self.r {
            config.r = Some(r);
        }
        let Some(bound) = config.bound.as_mut() else {
            return if any { Err(error::usage("bound parameters need --bound")) } else { Ok(()) };
        };
        bound.rho = self.rho.or(bound.rho);
        bound.lambda = self.lambda.or(bound.lambda);
        bound.c = self.c.or(bound.c);
        bound.constant = self.constant.or(bound.constant);
        bound.exponent = self.exponent.or(bound.exponent);
        bound.clock = self.clock.unwrap_or(bound.clock);
        Ok(())
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Influences { .. } => "influences",
            Command::Stability { .. } => "stability",
            Command::Verify { .. } => "verify",
            Command::Constants { .. } => "constants",
            Command::Junta { .. } => "junta",
        }
    }

    /// The effective configuration: config file, then flags.
    pub fn config(&self) -> Result<RunConfig, CliError> {
        match self {
            Command::Influences { common, r } => {
                let mut config = common.resolve()?;
                config.r = r.or(config.r);
                Ok(config)
            }
            Command::Stability { common, mc } => {
                let mut config = common.resolve()?;
                config.mc_samples = mc.or(config.mc_samples);
                Ok(config)
            }
            Command::Verify { common, bound } => {
                let mut config = common.resolve()?;
                bound.apply(&mut config)?;
                Ok(config)
            }
            Command::Constants { common } => common.resolve(),
            Command::Junta { common, t, eta, epsilon, rounding } => {
                let mut config = common.resolve()?;
                config.t = t.or(config.t);
                config.eta = eta.or(config.eta);
                config.epsilon = epsilon.or(config.epsilon);
                config.rounding = rounding.or(config.rounding);
                Ok(config)
            }
        }
    }
}

/// Runs `cli` and writes its outputs; returns whether every check passed.
pub fn run(cli: &Cli) -> Result<bool, CliError> {
    let config = cli.command.config()?;
    let output = execute(cli.command.name(), &config)?;
    output.write(&config)?;
    Ok(output.passed)
}
