use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::RewardWeights;
use crate::cdrl::{Td3Config, TrainSchedule};
use crate::cpdm::CpdmConfig;
use crate::sim::ScenarioConfig;

use super::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Dflt,
    Madrl,
    HMadrl,
    Cdrl,
    Cpdm,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Dflt, Method::Madrl, Method::HMadrl, Method::Cdrl, Method::Cpdm];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dflt => "dflt",
            Method::Madrl => "madrl",
            Method::HMadrl => "h-madrl",
            Method::Cdrl => "cdrl",
            Method::Cpdm => "cpdm",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Dflt => "DFLT",
            Method::Madrl => "MADRL",
            Method::HMadrl => "H-MADRL",
            Method::Cdrl => "CDRL",
            Method::Cpdm => "CPDM",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| HarnessError::Config(format!("unknown method {s:?}; expected one of dflt, madrl, h-madrl, cdrl, cpdm")))
    }
}

/// One experiment campaign: a method (or all of them) over a list of seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// TOML scenario file; when set it replaces the inline `scenario` table.
    /// Relative paths resolve against the experiment file.
    pub scenario_file: Option<PathBuf>,
    pub scenario: ScenarioConfig,
    pub method: Method,
    pub training_days: u32,
    pub evaluation_days: u32,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Days between resume checkpoints; 0 disables them.
    pub checkpoint_days: u32,
    pub reward: RewardWeights,
    pub td3: Td3Config,
    pub schedule: TrainSchedule,
    pub cpdm: CpdmConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario_file: None,
            scenario: ScenarioConfig::default(),
            method: Method::Cpdm,
            training_days: 12,
            evaluation_days: 2,
            seeds: vec![1, 2, 3, 4, 5],
            output_dir: PathBuf::from("runs"),
            checkpoint_days: 1,
            reward: RewardWeights::default(),
            td3: Td3Config::default(),
            schedule: TrainSchedule::default(),
            cpdm: CpdmConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let c: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads an experiment file and resolves its scenario reference.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let mut c = Self::from_toml(&text)?;
        if let Some(f) = &c.scenario_file {
            let f = if f.is_relative() { path.parent().unwrap_or(Path::new(".")).join(f) } else { f.clone() };
            let s = std::fs::read_to_string(&f).map_err(|e| HarnessError::Io(format!("{}: {e}", f.display())))?;
            c.scenario = ScenarioConfig::from_toml(&s)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("experiment config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.training_days == 0 || self.evaluation_days == 0 {
            return Err(HarnessError::Config("training and evaluation need at least one day each".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("no seeds".into()));
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.seeds.len() {
            return Err(HarnessError::Config("duplicate seeds".into()));
        }
        self.scenario.validate()?;
        self.schedule.validate()?;
        if self.schedule.ca_period != self.cpdm.ca_period {
            return Err(HarnessError::Config("schedule.ca_period and cpdm.ca_period differ".into()));
        }
        Ok(())
    }

    pub fn intervals_per_day(&self) -> u64 {
        u64::from(self.scenario.intervals_per_day())
    }

    pub fn training_intervals(&self) -> u64 {
        u64::from(self.training_days) * self.intervals_per_day()
    }

    pub fn evaluation_intervals(&self) -> u64 {
        u64::from(self.evaluation_days) * self.intervals_per_day()
    }

    /// Scenario for one seed; the seed drives mobility and shadowing, so
    /// every method sees the same trajectories.
    pub fn scenario_for(&self, seed: u64) -> ScenarioConfig {
        ScenarioConfig { seed, ..self.scenario.clone() }
    }

    pub fn run_dir(&self, method: Method, seed: u64) -> PathBuf {
        self.output_dir.join(method.name()).join(format!("seed-{seed}"))
    }
}
