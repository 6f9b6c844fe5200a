//! Command-line front end for the `patchvm` simulator.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime or
//! numerical error.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use patchvm::Variant;

use crate::commands::FitOptions;
use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "patchvm", version, about = "Minimizing voltage of sphere-plane patch potentials")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags accepted by every subcommand. All values are SI.
#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; defaults apply to omitted fields.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a patch map and write patches.json.
    Gen,
    /// Sweep the minimizing voltage over the distance grid.
    Sweep {
        /// Read the map from a patches file instead of generating it.
        #[arg(long, value_name = "PATH")]
        map: Option<PathBuf>,
    },
    /// Ensemble statistics over homogeneous realizations.
    Ensemble {
        /// Realizations, overriding the config.
        #[arg(long, value_name = "N")]
        n_real: Option<usize>,
    },
    /// Fit a + b ln d to a curve CSV or an external `d_m,vm_V` dataset.
    Fit {
        input: PathBuf,
        /// Curve column to fit; ignored for external datasets.
        #[arg(long, value_enum, default_value_t = VariantArg::Energy)]
        variant: VariantArg,
        /// Lower window edge in meters.
        #[arg(long, value_name = "M")]
        d_lo: Option<f64>,
        /// Upper window edge in meters.
        #[arg(long, value_name = "M")]
        d_hi: Option<f64>,
    },
    /// Tabulate applicability flags and regimes over the distance grid.
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Energy,
    Force,
    Analytic,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Energy => Variant::Energy,
            VariantArg::Force => Variant::Force,
            VariantArg::Analytic => Variant::Analytic,
        }
    }
}

/// Failure with its exit code.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Runtime(e) => e,
        }
    }

    /// Invalid parameters reported by the core count as configuration
    /// errors; everything else is a runtime error.
    fn classify(err: anyhow::Error) -> Self {
        match err.downcast_ref::<patchvm::Error>() {
            Some(patchvm::Error::Config(_) | patchvm::Error::Domain(_)) => Failure::Config(err),
            _ => Failure::Runtime(err),
        }
    }
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path).map_err(Failure::Config)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.common.out {
        cfg.out.clone_from(out);
    }
    if let Command::Ensemble { n_real: Some(n) } = cli.command {
        cfg.n_real = n;
    }
    cfg.validate().map_err(Failure::Config)?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = resolve_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.threads)
        .build()
        .map_err(|e| Failure::Runtime(e.into()))?;
    pool.install(|| match &cli.command {
        Command::Gen => commands::gen(&cfg),
        Command::Sweep { map } => commands::sweep_cmd(&cfg, map.as_deref()),
        Command::Ensemble { .. } => commands::ensemble(&cfg),
        Command::Fit { input, variant, d_lo, d_hi } => {
            commands::fit(&cfg, input, FitOptions { variant: (*variant).into(), d_lo: *d_lo, d_hi: *d_hi })
        }
        Command::Validate => commands::validate(&cfg),
    })
    .map_err(Failure::classify)
}
