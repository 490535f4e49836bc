//! Experiment configuration, as read from JSON.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub const SCHEMA: u32 = 1;
pub const DEFAULT_MAX_ROUNDS: u32 = 512;
pub const OUT_DIR_ENV: &str = "IIAB_OUT_DIR";

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Exhaustive,
    Montecarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolSpec>,
    #[serde(default)]
    pub adversary: AdversarySpec,
    #[serde(default)]
    pub oracle: OraclePolicy,
    #[serde(default)]
    pub inputs: InputSpec,
    #[serde(default)]
    pub seeds: SeedSpec,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: u32,
    /// Every processor is expected to decide within `max_rounds`.
    #[serde(default)]
    pub expect_liveness: bool,
    /// Let the adversary see the current round's honest sends.
    #[serde(default = "yes")]
    pub rushing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_max_rounds() -> u32 {
    DEFAULT_MAX_ROUNDS
}

fn yes() -> bool {
    true
}

/// Participation schedules: the canonical explicit form or a generator.
/// Generators without a pinned `seed` draw from the run seed; their horizon is
/// `max_rounds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Explicit {
        horizon: u32,
        rounds: Vec<RoundSpec>,
    },
    Constant {
        online: Vec<u32>,
        #[serde(default)]
        impersonated: Vec<u32>,
    },
    Growing {
        n: u32,
        /// Processor id to the round it becomes impersonated.
        activations: BTreeMap<u32, u32>,
    },
    StabilizingAt {
        n: u32,
        stable_from: u32,
        impersonated: u32,
        #[serde(default)]
        seed: Option<u64>,
    },
    Churn {
        n: u32,
        window: u32,
        #[serde(default)]
        seed: Option<u64>,
    },
    FreshChurn {
        window: u32,
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundSpec {
    pub online: Vec<u32>,
    #[serde(default)]
    pub impersonated: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolSpec {
    Probabilistic,
    Deterministic,
    /// One commit-adopt instance on the simulated no-eq model.
    CommitAdopt,
}

/// Strategies by registry name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    /// Chooses shapes in simulated no-eq rounds.
    #[serde(default = "silent")]
    pub noeq: String,
    /// Injects directly in native IIAB rounds.
    #[serde(default = "silent")]
    pub native: String,
    #[serde(default = "self_leaders")]
    pub leaders: String,
}

fn silent() -> String {
    "silent".into()
}

fn self_leaders() -> String {
    "self".into()
}

impl Default for AdversarySpec {
    fn default() -> Self {
        AdversarySpec {
            noeq: silent(),
            native: silent(),
            leaders: self_leaders(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OraclePolicy {
    #[default]
    Honest,
    Disabled,
    AlwaysSucceed,
    AlwaysFail,
}

/// Input values are UTF-8 strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    Unanimous(String),
    /// Processor `p_i` gets `values[(i-1) mod len]`.
    Alternating(Vec<String>),
    /// Drawn per processor from the run seed.
    Random(Vec<String>),
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec::Alternating(vec!["0".into(), "1".into()])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum SeedSpec {
    List { list: Vec<u64> },
    Range {
        count: u64,
        #[serde(default)]
        base: u64,
    },
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Range { count: 1, base: 0 }
    }
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List { list } => list.clone(),
            SeedSpec::Range { count, base } => (*base..base + count).collect(),
        }
    }
}

/// Exhaustive tasks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    /// Every two-round schedule with at most one impersonated processor per
    /// round, every input assignment.
    CommitAdopt { n: u32, alphabet: Vec<String> },
    /// Fixed constant participation with the given impersonated processors,
    /// every input assignment.
    CommitAdoptFixed {
        n: u32,
        impersonated: Vec<u32>,
        alphabet: Vec<String>,
    },
    DetConciliator,
    Theorems { max_n: u32, alphabet: Vec<String> },
    SimulationConformance { alphabet: Vec<String> },
    ReductionCrossCheck { alphabet: Vec<String> },
    Example1,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write one trace file per seed (simulate mode).
    #[serde(default = "yes")]
    pub traces: bool,
    /// Record every (round, link, message) in traces.
    #[serde(default = "yes")]
    pub links: bool,
}

fn default_dir() -> PathBuf {
    "iiab-out".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: default_dir(),
            traces: true,
            links: true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema {0}, expected {SCHEMA}")]
    Schema(u32),
    #[error("{0:?} mode needs a `{1}` entry")]
    Missing(Mode, &'static str),
    #[error("unknown {kind} strategy `{name}`")]
    UnknownStrategy { kind: &'static str, name: String },
    #[error("{0}")]
    Invalid(String),
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != SCHEMA {
            return Err(ConfigError::Schema(self.schema));
        }
        match self.mode {
            Mode::Exhaustive => {
                if self.check.is_none() {
                    return Err(ConfigError::Missing(self.mode, "check"));
                }
            }
            Mode::Simulate | Mode::Montecarlo => {
                if self.schedule.is_none() {
                    return Err(ConfigError::Missing(self.mode, "schedule"));
                }
                if self.protocol.is_none() {
                    return Err(ConfigError::Missing(self.mode, "protocol"));
                }
                if self.max_rounds == 0 {
                    return Err(ConfigError::Invalid("max_rounds must be positive".into()));
                }
                let values = match &self.inputs {
                    InputSpec::Unanimous(_) => 1,
                    InputSpec::Alternating(v) | InputSpec::Random(v) => v.len(),
                };
                if values == 0 {
                    return Err(ConfigError::Invalid("inputs need at least one value".into()));
                }
                crate::registry::check_names(&self.adversary)?;
            }
        }
        Ok(())
    }

    /// The output directory, honoring the environment override.
    pub fn out_dir(&self) -> PathBuf {
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output.dir.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_simulate_config() {
        let cfg = ExperimentConfig::from_json(
            r#"{"schema":1,"mode":"simulate","protocol":"probabilistic",
                "schedule":{"constant":{"online":[1,2,3],"impersonated":[3]}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.max_rounds, 512);
        assert_eq!(cfg.seeds.seeds(), vec![0]);
        assert_eq!(cfg.adversary, AdversarySpec::default());
    }

    #[test]
    fn seeds_list_or_range() {
        let s: SeedSpec = serde_json::from_str(r#"{"list":[4,2]}"#).unwrap();
        assert_eq!(s.seeds(), vec![4, 2]);
        let s: SeedSpec = serde_json::from_str(r#"{"count":3,"base":10}"#).unwrap();
        assert_eq!(s.seeds(), vec![10, 11, 12]);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            r#"{"schema":2,"mode":"simulate"}"#,
            r#"{"schema":1,"mode":"exhaustive"}"#,
            r#"{"schema":1,"mode":"simulate","protocol":"deterministic"}"#,
            r#"{"schema":1,"mode":"simulate","protocol":"deterministic","schedule":{"constant":{"online":[1]}},"adversary":{"noeq":"nope"}}"#,
            r#"{"schema":1,"mode":"simulate","typo":1}"#,
        ];
        for text in bad {
            assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig::from_json(
            r#"{"schema":1,"mode":"montecarlo","protocol":"deterministic",
                "schedule":{"stabilizing_at":{"n":5,"stable_from":6,"impersonated":2}},
                "adversary":{"noeq":"balancer","native":"equivocator_split","leaders":"withholder"},
                "inputs":{"random":["a","b"]},"seeds":{"count":10}}"#,
        )
        .unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }
}
