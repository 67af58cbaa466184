use serde::{Deserialize, Serialize};

use crate::envs::{Physics, Role, ScenarioKind};
use crate::replay::PerConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossFunction {
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Adam,
}

/// The DDQN hyperparameter table, one field per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    pub minibatch_size: usize,
    pub replay_memory_size: usize,
    /// In episodes.
    pub target_network_update_frequency: u64,
    pub discount_factor: f64,
    pub learning_rate: f64,
    pub initial_epsilon: f64,
    pub final_epsilon: f64,
    pub replay_start_size: usize,
    pub total_training_episodes: u64,
    pub total_testing_episodes: u64,
    pub loss_function: LossFunction,
    pub optimizer: Optimizer,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon_per: f64,
    pub annealing_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    /// Which side learns in the main phase.
    pub primary_role: Role,
    pub use_moe: bool,
    pub num_experts: usize,
    pub double_q: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Residual exploration of the frozen opponent in the main phase.
    pub opponent_epsilon: f64,
    /// Fraction of training episodes over which ε decays linearly.
    pub epsilon_decay_fraction: f64,
    pub gradient_steps_per_env_step: usize,
    /// Window of the rolling score.
    pub score_window: usize,
    /// Keep a parameter snapshot every this many episodes; 0 disables.
    pub checkpoint_interval: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub hyperparameters: Hyperparameters,
    pub agent: AgentConfig,
    pub protocol: ProtocolConfig,
    pub physics: Physics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// The published hyperparameter tables.
    Paper,
    /// Scaled down to run on a laptop in minutes.
    Desk,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::InvalidArgument(format!(
                "unknown preset {other:?} (expected paper or desk)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Paper => "paper",
            Preset::Desk => "desk",
        }
    }
}

/// The role trained against the frozen opponent in each scenario.
pub fn default_primary_role(kind: ScenarioKind) -> Role {
    match kind {
        ScenarioKind::SimplePush => Role::Adversary,
        ScenarioKind::SimpleAdversary => Role::Good,
    }
}

impl RunConfig {
    pub fn preset(kind: ScenarioKind, preset: Preset) -> Self {
        let (replay_memory_size, learning_rate) = match kind {
            ScenarioKind::SimplePush => (1_000_000, 0.0001),
            ScenarioKind::SimpleAdversary => (100_000, 0.001),
        };
        let mut hyperparameters = Hyperparameters {
            minibatch_size: 64,
            replay_memory_size,
            target_network_update_frequency: 5,
            discount_factor: 0.999,
            learning_rate,
            initial_epsilon: 1.0,
            final_epsilon: 0.1,
            replay_start_size: 50_000,
            total_training_episodes: 3000,
            total_testing_episodes: 1000,
            loss_function: LossFunction::Mse,
            optimizer: Optimizer::Adam,
            alpha: 0.6,
            beta: 0.4,
            epsilon_per: 0.00001,
            annealing_steps: 1_000_000,
        };
        if preset == Preset::Desk {
            hyperparameters.total_training_episodes = 300;
            hyperparameters.replay_start_size = 1000;
            hyperparameters.replay_memory_size = hyperparameters.replay_memory_size.min(50_000);
            hyperparameters.annealing_steps = 50_000;
        }
        Self {
            scenario: kind,
            seed: 0,
            hyperparameters,
            agent: AgentConfig {
                primary_role: default_primary_role(kind),
                use_moe: true,
                num_experts: 4,
                double_q: true,
            },
            protocol: ProtocolConfig {
                opponent_epsilon: 0.02,
                epsilon_decay_fraction: 0.6,
                gradient_steps_per_env_step: 1,
                score_window: 100,
                checkpoint_interval: 0,
            },
            physics: Physics::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.hyperparameters;
        let invalid = |key: &'static str, reason: String| Err(Error::InvalidConfig { key, reason });
        let nonzero = [
            ("minibatch_size", h.minibatch_size as u64),
            ("replay_memory_size", h.replay_memory_size as u64),
            ("target_network_update_frequency", h.target_network_update_frequency),
            ("total_training_episodes", h.total_training_episodes),
            ("total_testing_episodes", h.total_testing_episodes),
            ("annealing_steps", h.annealing_steps),
            ("num_experts", self.agent.num_experts as u64),
            (
                "gradient_steps_per_env_step",
                self.protocol.gradient_steps_per_env_step as u64,
            ),
            ("score_window", self.protocol.score_window as u64),
        ];
        for (key, v) in nonzero {
            if v == 0 {
                return invalid(key, "must be at least 1".into());
            }
        }
        let unit = [
            ("discount_factor", h.discount_factor),
            ("initial_epsilon", h.initial_epsilon),
            ("final_epsilon", h.final_epsilon),
            ("alpha", h.alpha),
            ("beta", h.beta),
            ("opponent_epsilon", self.protocol.opponent_epsilon),
            ("epsilon_decay_fraction", self.protocol.epsilon_decay_fraction),
        ];
        for (key, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return invalid(key, format!("must lie in [0, 1], got {v}"));
            }
        }
        if !(h.learning_rate > 0.0 && h.learning_rate.is_finite()) {
            return invalid("learning_rate", format!("must be positive, got {}", h.learning_rate));
        }
        if !(h.epsilon_per > 0.0 && h.epsilon_per.is_finite()) {
            return invalid("epsilon_per", format!("must be positive, got {}", h.epsilon_per));
        }
        if h.replay_start_size < h.minibatch_size {
            return invalid(
                "replay_start_size",
                format!(
                    "{} is smaller than minibatch_size {}",
                    h.replay_start_size, h.minibatch_size
                ),
            );
        }
        if h.replay_memory_size < h.minibatch_size {
            return invalid(
                "replay_memory_size",
                format!(
                    "{} is smaller than minibatch_size {}",
                    h.replay_memory_size, h.minibatch_size
                ),
            );
        }
        self.physics.validate()
    }

    pub fn per_config(&self) -> PerConfig {
        let h = &self.hyperparameters;
        PerConfig {
            capacity: h.replay_memory_size,
            alpha: h.alpha,
            beta: h.beta,
            epsilon: h.epsilon_per,
            annealing_steps: h.annealing_steps,
        }
    }

    pub fn epsilon_schedule(&self) -> crate::agents::EpsilonSchedule {
        let h = &self.hyperparameters;
        let horizon = (h.total_training_episodes as f64 * self.protocol.epsilon_decay_fraction).round();
        crate::agents::EpsilonSchedule {
            initial: h.initial_epsilon,
            final_value: h.final_epsilon,
            horizon: horizon as u64,
        }
    }
}
