//! Run configuration: everything a reproducible run needs, as one TOML file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::expert::{BcConfig, GenerateConfig};
use crate::flightsim::{OpponentMode, SimConfig};
use crate::rl::{LambdaMode, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub mode: OpponentMode,
    pub out_dir: PathBuf,
    /// Training seeds; single-run commands use the first.
    pub seeds: Vec<u64>,
    pub sim: SimConfig,
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub expert: GenerateConfig,
    pub bc: BcConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: OpponentMode::Straight,
            out_dir: PathBuf::from("runs/default"),
            seeds: vec![0, 1, 2, 3],
            sim: SimConfig::default(),
            env: EnvConfig::default(),
            train: TrainConfig::default(),
            expert: GenerateConfig::default(),
            bc: BcConfig::default(),
        }
    }
}

/// Hidden widths used by the desk preset for every network.
pub const DESK_HIDDEN: [usize; 2] = [64, 64];

impl RunConfig {
    /// Reduced-scale setup that trains in minutes on one CPU core: 600-step
    /// horizon, closer spawns and smaller networks.
    pub fn desk() -> Self {
        let mut cfg = RunConfig {
            out_dir: PathBuf::from("runs/desk"),
            seeds: vec![0, 1, 2],
            ..Default::default()
        };
        cfg.sim.spawn_shell = (3500.0, 4500.0);
        cfg.env = cfg.env.with_horizon(600);
        cfg.train.hidden = DESK_HIDDEN.to_vec();
        // Small critics trained briefly are jagged; smoothing the target
        // action keeps the actor from exploiting their spikes.
        cfg.train.target_smoothing = true;
        cfg.train.max_episodes = 150;
        cfg.train.eval_every = 25;
        cfg.train.eval_episodes = 50;
        cfg.bc.hidden = DESK_HIDDEN.to_vec();
        cfg.bc.iterations = 20_000;
        cfg
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" | "full" => Ok(RunConfig::default()),
            "desk" => Ok(RunConfig::desk()),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.env.validate()?;
        self.train.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.expert.n_success == 0 {
            return Err(Error::Config("expert.n_success must be positive".into()));
        }
        if self.bc.hidden != self.train.hidden && self.train.scheduler == LambdaMode::Adaptive {
            // The expert network only needs matching input/output sizes, but
            // mismatched widths are almost always a typo.
            return Err(Error::Config(
                "bc.hidden and train.hidden differ; set both to the same widths".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.bc.holdout_fraction) {
            return Err(Error::Config("bc.holdout_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seeds.first().copied().unwrap_or(0)
    }

    pub fn from_toml_str(s: &str, path: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Format {
            path: path.to_string(),
            reason: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Format {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml() {
        for cfg in [RunConfig::default(), RunConfig::desk()] {
            let s = cfg.to_toml_string().unwrap();
            let back = RunConfig::from_toml_str(&s, "mem").unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = RunConfig::from_toml_str("seeds = [7]\n[train]\nbatch_size = 64\n", "mem").unwrap();
        assert_eq!(cfg.seeds, vec![7]);
        assert_eq!(cfg.train.batch_size, 64);
        assert_eq!(cfg.train.gamma, 0.99);
        cfg.validate().unwrap();
    }

    #[test]
    fn presets_validate() {
        RunConfig::default().validate().unwrap();
        RunConfig::desk().validate().unwrap();
        assert!(RunConfig::preset("nope").is_err());
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut cfg = RunConfig::desk();
        cfg.train.tau = 0.0;
        assert!(cfg.validate().unwrap_err().is_config());
        let err = RunConfig::from_toml_str("[train]\nbatch_size = \"x\"\n", "f.toml").unwrap_err();
        assert!(err.is_config());
    }
}
