use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::induction::{DEFAULT_MAX_STATES, DEFAULT_NODE_BUDGET};
use crate::isa::{IsaConfig, DEFAULT_EPISODE_LEN};
use crate::officeworld::{full_alphabet, TaskKind};
use crate::qrm::QParams;
use crate::traces::Alphabet;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Single or multitask, with or without automaton-potential shaping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setting {
    S,
    #[serde(rename = "S+R")]
    SR,
    M,
    #[serde(rename = "M+R")]
    MR,
}

impl Setting {
    pub const ALL: [Setting; 4] = [Setting::S, Setting::SR, Setting::M, Setting::MR];

    pub fn multitask(self) -> bool {
        matches!(self, Setting::M | Setting::MR)
    }

    pub fn shaping(self) -> bool {
        matches!(self, Setting::SR | Setting::MR)
    }

    pub fn name(self) -> &'static str {
        match self {
            Setting::S => "S",
            Setting::SR => "S+R",
            Setting::M => "M",
            Setting::MR => "M+R",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Setting::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ConfigError::Invalid(format!("unknown setting `{s}` (expected S, S+R, M or M+R)")))
    }
}

/// Grid count and episode budget presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// 10 grids, 2,000 episodes per grid.
    Desk,
    /// 100 grids, 20,000 episodes per grid.
    #[default]
    Paper,
}

impl Scale {
    pub fn num_grids(self) -> usize {
        match self {
            Scale::Desk => 10,
            Scale::Paper => 100,
        }
    }

    pub fn episodes_per_grid(self) -> usize {
        match self {
            Scale::Desk => 2_000,
            Scale::Paper => 20_000,
        }
    }
}

/// `"full"`, `"restricted"` (each task's own observables) or an explicit
/// symbol list shared by every task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphabetChoice {
    Named(String),
    Symbols(Vec<String>),
}

impl Default for AlphabetChoice {
    fn default() -> Self {
        AlphabetChoice::Named("full".into())
    }
}

impl AlphabetChoice {
    pub fn full() -> Self {
        Self::default()
    }

    pub fn restricted() -> Self {
        AlphabetChoice::Named("restricted".into())
    }

    pub fn for_task(&self, task: TaskKind) -> Result<Alphabet, ConfigError> {
        match self {
            AlphabetChoice::Named(n) if n == "full" => Ok(full_alphabet()),
            AlphabetChoice::Named(n) if n == "restricted" => Ok(task.restricted_alphabet()),
            AlphabetChoice::Named(n) => Err(ConfigError::Invalid(format!(
                "alphabet must be \"full\", \"restricted\" or a list of symbols, found \"{n}\""
            ))),
            AlphabetChoice::Symbols(list) => {
                let full = full_alphabet();
                if let Some(bad) = list.iter().find(|s| full.id(s).is_none()) {
                    return Err(ConfigError::Invalid(format!("unknown observable `{bad}`")));
                }
                Alphabet::new(list.iter().cloned()).map_err(|e| ConfigError::Invalid(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub tasks: Vec<TaskKind>,
    pub scale: Scale,
    /// Overrides the scale's grid count.
    pub num_grids: Option<usize>,
    /// Overrides the scale's episode budget.
    pub episodes_per_grid: Option<usize>,
    pub episode_len: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub max_edges_per_pair: usize,
    pub max_states: usize,
    pub node_budget: u64,
    pub seed: u64,
    /// Seed of the random grid set; shared by all runs by default.
    pub grid_seed: u64,
    pub alphabet: AlphabetChoice,
    pub eval_every: usize,
    pub dedupe_runtime_obs: bool,
    /// Keep negative and incomplete counterexamples seen before the first
    /// positive one.
    pub store_before_positive: bool,
    /// Write measured solver wall time; when off the column is zero and
    /// outputs are byte-identical across repeated runs.
    pub record_wall_time: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            setting: Setting::S,
            tasks: vec![TaskKind::Coffee],
            scale: Scale::Paper,
            num_grids: None,
            episodes_per_grid: None,
            episode_len: DEFAULT_EPISODE_LEN,
            alpha: 0.1,
            epsilon: 0.1,
            gamma: 0.99,
            max_edges_per_pair: 1,
            max_states: DEFAULT_MAX_STATES,
            node_budget: DEFAULT_NODE_BUDGET,
            seed: 0,
            grid_seed: 0,
            alphabet: AlphabetChoice::default(),
            eval_every: 100,
            dedupe_runtime_obs: false,
            store_before_positive: false,
            record_wall_time: true,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let c: Self = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn num_grids(&self) -> usize {
        self.num_grids.unwrap_or(self.scale.num_grids())
    }

    pub fn episodes_per_grid(&self) -> usize {
        self.episodes_per_grid.unwrap_or(self.scale.episodes_per_grid())
    }

    pub fn alphabets(&self) -> Result<Vec<(TaskKind, Alphabet)>, ConfigError> {
        self.tasks
            .iter()
            .map(|&t| Ok((t, self.alphabet.for_task(t)?)))
            .collect()
    }

    pub fn isa_config(&self) -> IsaConfig {
        IsaConfig {
            episode_len: self.episode_len,
            params: QParams {
                alpha: self.alpha,
                gamma: self.gamma,
                epsilon: self.epsilon,
            },
            shaping: self.setting.shaping(),
            learn: true,
            max_states: self.max_states,
            max_edges_per_pair: self.max_edges_per_pair,
            node_budget: self.node_budget,
            dedupe_runtime_obs: self.dedupe_runtime_obs,
            store_before_positive: self.store_before_positive,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.tasks.is_empty() {
            return bad("at least one task is required".into());
        }
        let mut sorted = self.tasks.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.tasks.len() {
            return bad("tasks must be distinct".into());
        }
        if self.num_grids() == 0 || self.episode_len == 0 || self.eval_every == 0 {
            return bad("num_grids, episode_len and eval_every must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) || self.alpha == 0.0 {
            return bad(format!("alpha must be in (0, 1], got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must be in [0, 1], got {}", self.epsilon));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must be in [0, 1], got {}", self.gamma));
        }
        if self.max_states < 3 || self.max_edges_per_pair == 0 {
            return bad("max_states must be at least 3 and max_edges_per_pair positive".into());
        }
        self.alphabets()?;
        Ok(())
    }
}
