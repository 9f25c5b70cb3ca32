use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{FactorMode, SeKind};

#[derive(Debug, Parser)]
#[command(name = "panelcap", version, about = "Capacity factors, panel regressions and country clusters from a country-year panel")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Pipeline config (TOML); the built-in default layout is used when omitted
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Input panel CSV, overriding the config
    #[arg(long, global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Output directory, overriding the config
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for clustering (and for `synth`)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<FactorMode>,
    #[arg(long, global = true)]
    pub no_controls: bool,
    #[arg(long, global = true)]
    pub no_year_dummies: bool,
    #[arg(long, global = true, value_enum)]
    pub se: Option<SeKind>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Validate the input panel and write descriptive statistics
    Ingest,
    /// Factor analyses: loadings, KMO, scree plots and scores
    Factors,
    /// Pooled OLS, random and fixed effects side by side, plus specification tests
    Regress,
    /// K-means on window means of the clustering factors, with elbow diagnostics
    Cluster,
    /// The robustness grid of regression tables
    Sensitivity,
    /// All tables in one markdown document
    Report,
    /// Every stage, writing all artifacts
    Run,
    /// Write a synthetic panel with the reference layout
    Synth {
        /// Destination CSV
        path: PathBuf,
        #[arg(long, default_value_t = 82)]
        countries: usize,
    },
    /// Write the default config
    InitConfig {
        /// Destination TOML file
        path: PathBuf,
    },
}
