//! Batch pipeline over a country-year panel: ingest → factors → regress →
//! cluster → sensitivity → report.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod stages;

use std::path::Path;

use panelcap_core::synth::{gen_reference_panel, ReferencePlan};

use cli::{Cli, Command, GlobalArgs};
use config::PipelineConfig;
use error::Result;
use output::{write_atomic, Artifact, OutputDir};
use stages::RegressOptions;

pub const DEFAULT_SYNTH_SEED: u64 = 20240;

/// Config after applying command-line overrides.
pub fn resolve_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(i) = &g.input {
        cfg.input = i.clone();
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = g.seed {
        cfg.clustering.seed = s;
    }
    if let Some(m) = g.mode {
        cfg.estimation.mode = m;
    }
    if let Some(se) = g.se {
        cfg.estimation.se = se;
    }
    if g.no_controls {
        cfg.estimation.controls = false;
    }
    if g.no_year_dummies {
        cfg.estimation.year_dummies = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes a reference-shaped synthetic panel as CSV.
pub fn write_synth(path: &Path, seed: u64, countries: usize) -> Result<()> {
    let mut plan = ReferencePlan::new(seed);
    plan.spec.n_countries = countries;
    let panel = gen_reference_panel(&plan);
    let mut buf = Vec::new();
    panelcap_core::panel::write_csv(&panel.data, &mut buf)?;
    write_atomic(path, &buf)
}

fn emit(cfg: &PipelineConfig, artifacts: &[Artifact]) -> Result<Vec<String>> {
    let mut out = OutputDir::new(&cfg.output_dir);
    out.write_all(artifacts)?;
    for p in out.written() {
        log::info!("wrote {p}");
    }
    out.finish()
}

/// Runs one subcommand. Returns the manifest entries after the run.
pub fn execute(cli: &Cli) -> Result<Vec<String>> {
    let g = &cli.global;
    match &cli.command {
        Command::Synth { path, countries } => {
            write_synth(path, g.seed.unwrap_or(DEFAULT_SYNTH_SEED), *countries)?;
            return Ok(vec![path.display().to_string()]);
        }
        Command::InitConfig { path } => {
            let mut cfg = PipelineConfig::default();
            if let Some(i) = &g.input {
                cfg.input = i.clone();
            }
            write_atomic(path, cfg.to_toml().as_bytes())?;
            return Ok(vec![path.display().to_string()]);
        }
        _ => {}
    }

    let cfg = resolve_config(g)?;
    let seed = cfg.clustering.seed;
    let artifacts = match &cli.command {
        Command::Ingest => stages::ingest_artifacts(&stages::load(&cfg)?),
        Command::Factors => {
            let p = stages::load(&cfg)?;
            let f = stages::run_factors(&cfg, &p, cfg.estimation.mode)?;
            stages::factor_artifacts(&f, &p)?
        }
        Command::Regress => {
            let p = stages::load(&cfg)?;
            let f = stages::run_factors(&cfg, &p, cfg.estimation.mode)?;
            let title = "Capacity factors and GDP per capita";
            let r = stages::regress(&cfg, &f.data, f.factor_names(), RegressOptions::from_config(&cfg), title)?;
            let tests = stages::diagnostics(&r, &f.data);
            stages::regress_artifacts(&r, &tests)
        }
        Command::Cluster => {
            let p = stages::load(&cfg)?;
            let f = stages::run_factors(&cfg, &p, config::FactorMode::Cfa)?;
            stages::cluster_artifacts(&stages::cluster(&cfg, &f, seed)?)
        }
        Command::Sensitivity => {
            let p = stages::load(&cfg)?;
            let cfa = stages::run_factors(&cfg, &p, config::FactorMode::Cfa)?;
            stages::sensitivity_artifacts(&stages::sensitivity(&cfg, &p, &cfa, None)?)
        }
        Command::Report => {
            let run = stages::run_all(&cfg, seed)?;
            vec![Artifact::new("report.md", stages::report_markdown(&run))]
        }
        Command::Run => stages::all_artifacts(&stages::run_all(&cfg, seed)?)?,
        Command::Synth { .. } | Command::InitConfig { .. } => unreachable!(),
    };
    emit(&cfg, &artifacts)
}

