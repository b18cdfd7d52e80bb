//! Run configuration: a flat TOML file with sections mirroring the module
//! configs, overridable by CLI flags. Validation reports every violated
//! field at once.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EncoderConfig;
use crate::nn::JumpingKnowledge;
use crate::rl::QNetConfig;
use crate::util::{fnv1a128, hex128};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Paradigm {
    Ord,
    Simul,
    Pre,
}

impl std::str::FromStr for Paradigm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ord" => Ok(Paradigm::Ord),
            "simul" => Ok(Paradigm::Simul),
            "pre" => Ok(Paradigm::Pre),
            other => Err(Error::InvalidArgument(format!(
                "unknown paradigm {other:?} (expected ord, simul or pre)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub layers: usize,
    pub hidden_dim: usize,
    pub epsilon: f64,
    pub jumping_knowledge: JumpingKnowledge,
    pub head_hidden: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            layers: 4,
            hidden_dim: 64,
            epsilon: 0.0,
            jumping_knowledge: JumpingKnowledge::None,
            head_hidden: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    /// Number of node tuples m.
    pub m: usize,
    /// Tuple order k.
    pub k: usize,
    /// Search steps t per rollout.
    pub t: usize,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the agent-step budget over which epsilon decays linearly.
    pub epsilon_decay_frac: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub sync_rate: u64,
    pub learning_rate: f64,
    pub layers: usize,
    pub hidden_dim: usize,
    pub head_hidden: usize,
    pub tracker_width: usize,
}

impl Default for AgentSection {
    fn default() -> Self {
        AgentSection {
            m: 1,
            k: 2,
            t: 4,
            discount: 0.9,
            epsilon_start: 1.0,
            epsilon_end: 0.0,
            epsilon_decay_frac: 0.5,
            buffer_capacity: 30_000,
            batch_size: 32,
            sync_rate: 150,
            learning_rate: 1e-3,
            layers: 4,
            hidden_dim: 64,
            head_hidden: 64,
            tracker_width: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Environment training epochs (phase 1 of ORD; head epochs of PRE).
    pub epochs: usize,
    /// Agent outer steps (phase 2 of ORD; whole budget of SIMUL).
    pub agent_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Step decay: multiply the environment learning rate by
    /// `lr_decay_factor` every `lr_decay_every` epochs (0 disables).
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub eval_repeats: usize,
    /// Restrict a multi-column node-regression target to one column.
    pub target_column: Option<usize>,
    /// Early stopping patience on validation loss; 0 disables.
    pub early_stop_patience: usize,
    /// Agent checkpoint directory (PRE only).
    pub pre_checkpoint: Option<String>,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            epochs: 500,
            agent_steps: 3000,
            batch_size: 64,
            learning_rate: 1e-3,
            lr_decay_factor: 0.5,
            lr_decay_every: 0,
            eval_repeats: 10,
            target_column: None,
            early_stop_patience: 0,
            pre_checkpoint: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paradigm: Paradigm,
    /// Dataset directory (records.jsonl + manifest.json).
    pub dataset: String,
    /// Run root directory; flag and MAGNN_RUN_ROOT take precedence.
    pub run_root: Option<String>,
    pub model: ModelSection,
    pub agent: AgentSection,
    pub train: TrainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            paradigm: Paradigm::Ord,
            dataset: String::new(),
            run_root: None,
            model: ModelSection::default(),
            agent: AgentSection::default(),
            train: TrainSection::default(),
        }
    }
}

/// CLI flag overrides; `None` keeps the file/default value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paradigm: Option<Paradigm>,
    pub dataset: Option<String>,
    pub run_root: Option<String>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub t: Option<usize>,
    pub epochs: Option<usize>,
    pub agent_steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub eval_repeats: Option<usize>,
    pub target_column: Option<usize>,
    pub pre_checkpoint: Option<String>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.paradigm {
            self.paradigm = v;
        }
        if let Some(v) = &o.dataset {
            self.dataset = v.clone();
        }
        if let Some(v) = &o.run_root {
            self.run_root = Some(v.clone());
        }
        if let Some(v) = o.m {
            self.agent.m = v;
        }
        if let Some(v) = o.k {
            self.agent.k = v;
        }
        if let Some(v) = o.t {
            self.agent.t = v;
        }
        if let Some(v) = o.epochs {
            self.train.epochs = v;
        }
        if let Some(v) = o.agent_steps {
            self.train.agent_steps = v;
        }
        if let Some(v) = o.batch_size {
            self.train.batch_size = v;
        }
        if let Some(v) = o.eval_repeats {
            self.train.eval_repeats = v;
        }
        if let Some(v) = o.target_column {
            self.train.target_column = Some(v);
        }
        if let Some(v) = &o.pre_checkpoint {
            self.train.pre_checkpoint = Some(v.clone());
        }
    }

    /// Checks every field and reports all violations together.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                errs.push(msg.to_string());
            }
        };
        check(!self.dataset.is_empty(), "dataset: must not be empty");
        check(self.model.layers >= 1, "model.layers: must be >= 1");
        check(self.model.hidden_dim >= 1, "model.hidden_dim: must be >= 1");
        check(self.model.head_hidden >= 1, "model.head_hidden: must be >= 1");
        check(self.agent.m >= 1, "agent.m: must be >= 1");
        check(self.agent.k >= 1, "agent.k: must be >= 1");
        if self.paradigm != Paradigm::Pre {
            check(self.agent.t >= 1, "agent.t: must be >= 1 for ord/simul");
        }
        check(
            (0.0..=1.0).contains(&self.agent.discount),
            "agent.discount: must be in [0,1]",
        );
        check(
            (0.0..=1.0).contains(&self.agent.epsilon_start),
            "agent.epsilon_start: must be in [0,1]",
        );
        check(
            (0.0..=1.0).contains(&self.agent.epsilon_end),
            "agent.epsilon_end: must be in [0,1]",
        );
        check(
            self.agent.epsilon_start >= self.agent.epsilon_end,
            "agent.epsilon_start: must be >= agent.epsilon_end",
        );
        check(
            self.agent.epsilon_decay_frac > 0.0 && self.agent.epsilon_decay_frac <= 1.0,
            "agent.epsilon_decay_frac: must be in (0,1]",
        );
        check(self.agent.buffer_capacity >= 1, "agent.buffer_capacity: must be >= 1");
        check(self.agent.batch_size >= 1, "agent.batch_size: must be >= 1");
        check(self.agent.sync_rate >= 1, "agent.sync_rate: must be >= 1");
        check(
            self.agent.learning_rate > 0.0 && self.agent.learning_rate.is_finite(),
            "agent.learning_rate: must be positive and finite",
        );
        check(self.agent.layers >= 1, "agent.layers: must be >= 1");
        check(self.agent.hidden_dim >= 1, "agent.hidden_dim: must be >= 1");
        check(self.agent.head_hidden >= 1, "agent.head_hidden: must be >= 1");
        check(self.agent.tracker_width >= 1, "agent.tracker_width: must be >= 1");
        check(self.train.batch_size >= 1, "train.batch_size: must be >= 1");
        check(
            self.train.learning_rate > 0.0 && self.train.learning_rate.is_finite(),
            "train.learning_rate: must be positive and finite",
        );
        check(
            self.train.lr_decay_factor > 0.0 && self.train.lr_decay_factor <= 1.0,
            "train.lr_decay_factor: must be in (0,1]",
        );
        check(self.train.eval_repeats >= 1, "train.eval_repeats: must be >= 1");
        if self.paradigm == Paradigm::Pre {
            check(
                self.train
                    .pre_checkpoint
                    .as_deref()
                    .map(|s| !s.is_empty())
                    .unwrap_or(false),
                "train.pre_checkpoint: required for the pre paradigm",
            );
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            layers: self.model.layers,
            hidden_dim: self.model.hidden_dim,
            epsilon: self.model.epsilon,
            jumping_knowledge: self.model.jumping_knowledge,
            head_hidden: self.model.head_hidden,
        }
    }

    pub fn qnet_config(&self) -> QNetConfig {
        QNetConfig {
            order: self.agent.k,
            tracker_width: self.agent.tracker_width,
            layers: self.agent.layers,
            hidden_dim: self.agent.hidden_dim,
            epsilon: self.model.epsilon,
            head_hidden: self.agent.head_hidden,
        }
    }

    /// Deterministic hash of the resolved configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex128(fnv1a128(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_defaults() {
        let text = r#"
            seed = 7
            paradigm = "simul"
            dataset = "data/csl"

            [agent]
            m = 2
            k = 3

            [train]
            epochs = 10
        "#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.paradigm, Paradigm::Simul);
        assert_eq!(cfg.agent.m, 2);
        assert_eq!(cfg.agent.k, 3);
        assert_eq!(cfg.agent.t, 4); // default
        assert_eq!(cfg.train.epochs, 10);
        assert_eq!(cfg.model.hidden_dim, 64);

        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_toml_str("dataset = \"x\"\nbogus = 1").is_err());
    }

    #[test]
    fn validation_lists_every_violation() {
        let mut cfg = RunConfig::default();
        cfg.dataset = String::new();
        cfg.agent.m = 0;
        cfg.agent.discount = 1.5;
        cfg.agent.epsilon_start = 0.2;
        cfg.agent.epsilon_end = 0.4;
        cfg.train.eval_repeats = 0;
        match cfg.validate() {
            Err(Error::Config(errs)) => {
                assert!(errs.iter().any(|e| e.starts_with("dataset:")));
                assert!(errs.iter().any(|e| e.starts_with("agent.m:")));
                assert!(errs.iter().any(|e| e.starts_with("agent.discount:")));
                assert!(errs.iter().any(|e| e.starts_with("agent.epsilon_start:")));
                assert!(errs.iter().any(|e| e.starts_with("train.eval_repeats:")));
                assert!(errs.len() >= 5);
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn pre_requires_checkpoint() {
        let mut cfg = RunConfig {
            dataset: "d".into(),
            paradigm: Paradigm::Pre,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.train.pre_checkpoint = Some("runs/agent".into());
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn overrides_and_hash() {
        let mut cfg = RunConfig {
            dataset: "a".into(),
            ..RunConfig::default()
        };
        let h1 = cfg.hash();
        cfg.apply(&Overrides {
            m: Some(3),
            dataset: Some("b".into()),
            ..Overrides::default()
        });
        assert_eq!(cfg.agent.m, 3);
        assert_eq!(cfg.dataset, "b");
        assert_ne!(cfg.hash(), h1);
        assert_eq!(cfg.hash(), cfg.clone().hash());
    }
}
