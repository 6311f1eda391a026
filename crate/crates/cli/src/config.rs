//! TOML configuration. Values resolve as flag, then config file, then the
//! built-in default; the seed additionally falls back to `SDS_SEED`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use sds_core::eval::TournamentConfig;
use sds_core::gen::GenSpec;
use sds_core::reward::RewardConfig;
use sds_core::sandbox::RunnerConfig;
use sds_core::solvers::SaConfig;

pub const SEED_ENV: &str = "SDS_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub generate: GenerateSection,
    pub solve: SolveSection,
    pub sa: SaConfig,
    pub sandbox: SandboxSection,
    pub reward: RewardConfig,
    pub tournament: TournamentConfig,
    pub passk: PassKSection,
    /// Instance families and weights; empty means the built-in mixture.
    pub mixture: Vec<GenSpec>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: None,
            workers: None,
            generate: GenerateSection::default(),
            solve: SolveSection::default(),
            sa: SaConfig::default(),
            sandbox: SandboxSection::default(),
            reward: RewardConfig::default(),
            tournament: TournamentConfig::default(),
            passk: PassKSection::default(),
            mixture: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSection {
    pub count: usize,
}

impl Default for GenerateSection {
    fn default() -> Self {
        GenerateSection { count: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub budget_sec: f64,
}

impl Default for SolveSection {
    fn default() -> Self {
        SolveSection { budget_sec: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandboxSection {
    pub timeout_sec: f64,
    pub runner: RunnerConfig,
}

impl Default for SandboxSection {
    fn default() -> Self {
        SandboxSection { timeout_sec: 5.0, runner: RunnerConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PassKSection {
    pub bootstrap: usize,
    /// Empty means powers of two up to the pool size.
    pub ks: Vec<usize>,
}

impl Default for PassKSection {
    fn default() -> Self {
        PassKSection { bootstrap: 500, ks: Vec::new() }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Config> {
        match path {
            None => Ok(Config::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                Ok(toml::from_str(&text)?)
            }
        }
    }

    pub fn mixture(&self) -> Vec<GenSpec> {
        if self.mixture.is_empty() {
            GenSpec::default_mixture()
        } else {
            self.mixture.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Flag, then config, then `SDS_SEED`, then 0. A malformed `SDS_SEED` is an
/// error rather than silently ignored.
pub fn resolve_seed(flag: Option<u64>, cfg: &Config) -> anyhow::Result<u64> {
    if let Some(s) = flag.or(cfg.seed) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| anyhow::anyhow!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(_) => Ok(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = Config::default();
        let back: Config = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: Config = toml::from_str("seed = 7\n[solve]\nbudget_sec = 1.5\n[sa]\ncooling = 0.995\n").unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.solve.budget_sec, 1.5);
        assert_eq!(cfg.sa.cooling, 0.995);
        assert_eq!(cfg.sa.t0, 1000.0);
        assert_eq!(cfg.sandbox.timeout_sec, 5.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<Config>("bogus = 1").is_err());
    }
}
