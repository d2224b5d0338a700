use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::read_json;
use crate::synth::SuiteConfig;

/// Solver hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub t0: f64,
    pub eta: f64,
    pub steps: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            t0: 0.3,
            eta: 1.05,
            steps: 10_000,
        }
    }
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub suite: SuiteConfig,
    pub fit: FitSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 20 x 5 cylinder, m = 1000, 10000 steps.
    FullScale,
    /// 10 x 3 cylinder, m = 200, 2000 steps.
    DeskScale,
}

impl Preset {
    pub fn config(self) -> RunConfig {
        match self {
            Preset::FullScale => RunConfig::default(),
            Preset::DeskScale => RunConfig {
                suite: SuiteConfig::desk_scale(),
                fit: FitSettings {
                    steps: 2000,
                    ..FitSettings::default()
                },
            },
        }
    }
}

pub fn load_run_config(path: Option<&Path>, preset: Option<Preset>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match (path, preset) {
        (Some(p), _) => read_json(p)?,
        (None, Some(preset)) => preset.config(),
        (None, None) => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.suite.seed = s;
    }
    Ok(cfg)
}
