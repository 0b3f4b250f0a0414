//! Batch harness for surrogate uncertainty studies.
//!
//! A run is a directory filled stage by stage: `generate` (design and simulator outputs),
//! `pca` (curve reduction, optional), `train` (one model per response), `uq` (test-set
//! predictive distributions and coverage) and `report` (tidy tables across methods).
//! Every stage reads the same JSON [`RunConfig`](config::RunConfig); randomness fans out
//! from its master `seed` by stage label, so stages can be rerun independently.

pub mod config;
pub mod error;
pub mod generate;
pub mod layout;
pub mod reduce;
pub mod report;
pub mod train;
pub mod uq;

use std::path::{Path, PathBuf};

pub use config::RunConfig;
pub use error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Generate,
    Pca,
    Train,
    Uq,
    Report,
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub force: bool,
}

/// Load a config and apply overrides.
pub fn load_config(path: &Path, o: &Overrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = &o.out {
        cfg.output_dir = Some(out.clone());
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    cfg.output_dir()?;
    Ok(cfg)
}

pub fn run_stage(stage: Stage, cfg: &RunConfig, force: bool) -> Result<()> {
    match stage {
        Stage::Generate => generate::cmd_generate(cfg, force).map(drop),
        Stage::Pca => reduce::cmd_pca(cfg, force).map(drop),
        Stage::Train => train::cmd_train(cfg, force).map(drop),
        Stage::Uq => uq::cmd_uq(cfg, force).map(drop),
        Stage::Report => report::cmd_report(cfg).map(drop),
    }
}

/// generate → [pca] → train → uq → report.
pub fn run_pipeline(cfg: &RunConfig, force: bool) -> Result<()> {
    run_stage(Stage::Generate, cfg, force)?;
    if cfg.pca.enabled {
        run_stage(Stage::Pca, cfg, force)?;
    }
    for stage in [Stage::Train, Stage::Uq, Stage::Report] {
        run_stage(stage, cfg, force)?;
    }
    Ok(())
}
