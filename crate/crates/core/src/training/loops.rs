use crate::agents::{
    select_action, DdqnAgent, MoeQNetwork, MoeShape, Network, QInput, QNetwork,
};
use crate::envs::{self, Action, Role};
use crate::numerics::MlpParams;
use crate::opponent::{OpponentTracker, OPPONENT_FEATURES};
use crate::replay::{PerBuffer, Transition};
use crate::rng::{episode_seed, seeded, stream, Rng};
use crate::{Error, Result};

use super::config::RunConfig;

pub const HIDDEN_1: usize = 64;
pub const HIDDEN_2: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u64,
    /// Undiscounted reward sums over the episode.
    pub reward_good: f64,
    pub reward_adversary: f64,
    pub steps: usize,
    /// ε of the learning side(s) during the episode.
    pub epsilon: f64,
}

/// Parameters kept at a checkpoint interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Number of completed episodes.
    pub episode: u64,
    pub networks: Vec<(Role, Network)>,
}

#[derive(Debug, Clone)]
pub struct AliOutcome {
    pub good: MlpParams,
    pub adversary: MlpParams,
    pub records: Vec<EpisodeRecord>,
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Clone)]
pub struct MainOutcome {
    pub primary: Network,
    pub records: Vec<EpisodeRecord>,
    pub snapshots: Vec<Snapshot>,
}

/// One side of an episode.
trait Actor {
    fn act(&mut self, obs: &[f64], opponent: &[f64; OPPONENT_FEATURES], epsilon: f64)
        -> Result<Action>;

    fn learn(&mut self, transition: Transition, episode: u64) -> Result<()>;
}

struct Learner<N> {
    role: Role,
    agent: DdqnAgent<N>,
    buffer: PerBuffer,
    explore: Rng,
    replay: Rng,
    env_steps: u64,
    minibatch_size: usize,
    replay_start_size: usize,
    gradient_steps: usize,
}

impl<N: QNetwork> Learner<N> {
    fn new(role: Role, net: N, config: &RunConfig, explore: Rng, replay: Rng) -> Result<Self> {
        let h = &config.hyperparameters;
        Ok(Self {
            role,
            agent: DdqnAgent::new(net, h.discount_factor, h.learning_rate, config.agent.double_q)?,
            buffer: PerBuffer::new(config.per_config())?,
            explore,
            replay,
            env_steps: 0,
            minibatch_size: h.minibatch_size,
            replay_start_size: h.replay_start_size,
            gradient_steps: config.protocol.gradient_steps_per_env_step,
        })
    }

    fn diagnose(&self, episode: u64, err: Error) -> Error {
        match err {
            Error::NonFinite(what) => Error::NonFinite(format!(
                "{what} ({} agent, episode {episode}, env step {}, update {})",
                self.role,
                self.env_steps,
                self.agent.updates()
            )),
            other => other,
        }
    }
}

impl<N: QNetwork> Actor for Learner<N> {
    fn act(
        &mut self,
        obs: &[f64],
        opponent: &[f64; OPPONENT_FEATURES],
        epsilon: f64,
    ) -> Result<Action> {
        let q = self.agent.q_values(QInput { obs, opponent })?;
        Ok(select_action(&q, epsilon, &mut self.explore))
    }

    fn learn(&mut self, transition: Transition, episode: u64) -> Result<()> {
        self.buffer.push(transition);
        self.env_steps += 1;
        if self.buffer.len() < self.replay_start_size {
            return Ok(());
        }
        for _ in 0..self.gradient_steps {
            self.buffer.anneal_beta(self.env_steps);
            let batch = self.buffer.sample(self.minibatch_size, &mut self.replay)?;
            let refs: Vec<&Transition> = batch.transitions.iter().collect();
            let report = self
                .agent
                .train_step(&refs, Some(&batch.weights))
                .map_err(|e| self.diagnose(episode, e))?;
            if !report.loss.is_finite() {
                let err = Error::NonFinite(format!("loss {}", report.loss));
                return Err(self.diagnose(episode, err));
            }
            self.buffer
                .update_priorities(&batch.indices, &report.td_errors)
                .map_err(|e| self.diagnose(episode, e))?;
        }
        Ok(())
    }
}

/// A fixed policy that never learns.
struct Frozen<'a> {
    net: &'a Network,
    rng: Rng,
}

impl Actor for Frozen<'_> {
    fn act(
        &mut self,
        obs: &[f64],
        opponent: &[f64; OPPONENT_FEATURES],
        epsilon: f64,
    ) -> Result<Action> {
        let q = self.net.q_values(QInput { obs, opponent })?;
        Ok(select_action(&q, epsilon, &mut self.rng))
    }

    fn learn(&mut self, _: Transition, _: u64) -> Result<()> {
        Ok(())
    }
}

/// Plays one episode. Each side's tracker watches the other side's actions.
#[allow(clippy::too_many_arguments)]
fn run_episode(
    config: &RunConfig,
    salt: u64,
    episode: u64,
    good: &mut dyn Actor,
    adversary: &mut dyn Actor,
    eps_good: f64,
    eps_adversary: f64,
) -> Result<(f64, f64, usize)> {
    let mut state = envs::reset(config.scenario, episode_seed(config.seed, salt, episode));
    let (mut obs_good, mut obs_adv) = envs::observe(&state);
    let mut sees_adversary = OpponentTracker::new();
    let mut sees_good = OpponentTracker::new();
    let (mut sum_good, mut sum_adv) = (0.0, 0.0);
    let mut steps = 0;
    loop {
        let feat_good = sees_adversary.features();
        let feat_adv = sees_good.features();
        let a_good = good.act(&obs_good, &feat_good, eps_good)?;
        let a_adv = adversary.act(&obs_adv, &feat_adv, eps_adversary)?;
        let out = envs::step(&state, &config.physics, a_good, a_adv)?;
        sees_adversary.update(a_adv);
        sees_good.update(a_good);
        steps += 1;
        sum_good += out.reward_good;
        sum_adv += out.reward_adversary;

        good.learn(
            Transition {
                state: obs_good,
                action: a_good,
                reward: out.reward_good,
                next_state: out.good_obs.clone(),
                done: out.done,
                opponent_action: a_adv,
                opponent_features: feat_good,
                next_opponent_features: sees_adversary.features(),
            },
            episode,
        )?;
        adversary.learn(
            Transition {
                state: obs_adv,
                action: a_adv,
                reward: out.reward_adversary,
                next_state: out.adversary_obs.clone(),
                done: out.done,
                opponent_action: a_good,
                opponent_features: feat_adv,
                next_opponent_features: sees_good.features(),
            },
            episode,
        )?;
        if out.done {
            break;
        }
        state = out.state;
        obs_good = out.good_obs;
        obs_adv = out.adversary_obs;
    }
    Ok((sum_good, sum_adv, steps))
}

fn is_sync_episode(config: &RunConfig, episode: u64) -> bool {
    (episode + 1).is_multiple_of(config.hyperparameters.target_network_update_frequency)
}

fn is_snapshot_episode(config: &RunConfig, episode: u64) -> bool {
    let interval = config.protocol.checkpoint_interval;
    interval > 0 && (episode + 1).is_multiple_of(interval)
}

fn plain_network(config: &RunConfig, role: Role, init_stream: u64) -> MlpParams {
    let mut rng = seeded(config.seed, init_stream);
    MlpParams::new(
        config.scenario.obs_dim(role),
        HIDDEN_1,
        HIDDEN_2,
        Action::COUNT,
        &mut rng,
    )
}

/// Adversarial learning initialization: two freshly initialized plain DDQN
/// agents learn against each other from scratch. `use_moe` is ignored; both
/// sides are always plain networks.
pub fn run_ali(config: &RunConfig) -> Result<AliOutcome> {
    config.validate()?;
    let mut good = Learner::new(
        Role::Good,
        plain_network(config, Role::Good, stream::INIT_GOOD),
        config,
        seeded(config.seed, stream::EXPLORE_GOOD),
        seeded(config.seed, stream::REPLAY_GOOD),
    )?;
    let mut adversary = Learner::new(
        Role::Adversary,
        plain_network(config, Role::Adversary, stream::INIT_ADVERSARY),
        config,
        seeded(config.seed, stream::EXPLORE_ADVERSARY),
        seeded(config.seed, stream::REPLAY_ADVERSARY),
    )?;
    let schedule = config.epsilon_schedule();
    let episodes = config.hyperparameters.total_training_episodes;
    let mut records = Vec::with_capacity(episodes as usize);
    let mut snapshots = Vec::new();
    for episode in 0..episodes {
        let eps = schedule.value(episode);
        let (reward_good, reward_adversary, steps) =
            run_episode(config, stream::ENV, episode, &mut good, &mut adversary, eps, eps)?;
        if is_sync_episode(config, episode) {
            good.agent.sync_target();
            adversary.agent.sync_target();
        }
        records.push(EpisodeRecord {
            episode,
            reward_good,
            reward_adversary,
            steps,
            epsilon: eps,
        });
        if is_snapshot_episode(config, episode) {
            snapshots.push(Snapshot {
                episode: episode + 1,
                networks: vec![
                    (Role::Good, Network::Plain(good.agent.online.clone())),
                    (Role::Adversary, Network::Plain(adversary.agent.online.clone())),
                ],
            });
        }
    }
    Ok(AliOutcome {
        good: good.agent.online,
        adversary: adversary.agent.online,
        records,
        snapshots,
    })
}

fn check_opponent(config: &RunConfig, opponent: &Network) -> Result<()> {
    let role = config.agent.primary_role.other();
    let expected = config.scenario.obs_dim(role);
    if opponent.obs_dim() != expected {
        return Err(Error::shape(
            "network input dimension",
            format!("{expected} for the {role} on {}", config.scenario),
            opponent.obs_dim(),
        ));
    }
    Ok(())
}

/// Trains a freshly initialized primary agent (MOE when `use_moe`) against
/// a frozen opponent.
pub fn train_vs_fixed(config: &RunConfig, opponent: &Network) -> Result<MainOutcome> {
    config.validate()?;
    check_opponent(config, opponent)?;
    let role = config.agent.primary_role;
    if config.agent.use_moe {
        let mut rng = seeded(config.seed, stream::INIT_PRIMARY);
        let shape = MoeShape::new(config.scenario.obs_dim(role), config.agent.num_experts);
        let net = MoeQNetwork::new(shape, &mut rng)?;
        train_primary(config, net, opponent, Network::Moe)
    } else {
        let net = plain_network(config, role, stream::INIT_PRIMARY);
        train_primary(config, net, opponent, Network::Plain)
    }
}

fn train_primary<N: QNetwork>(
    config: &RunConfig,
    net: N,
    opponent: &Network,
    wrap: fn(N) -> Network,
) -> Result<MainOutcome> {
    let role = config.agent.primary_role;
    let mut primary = Learner::new(
        role,
        net,
        config,
        seeded(config.seed, stream::EXPLORE_PRIMARY),
        seeded(config.seed, stream::REPLAY_PRIMARY),
    )?;
    let mut frozen = Frozen {
        net: opponent,
        rng: seeded(config.seed, stream::EXPLORE_FROZEN),
    };
    let opp_eps = config.protocol.opponent_epsilon;
    let schedule = config.epsilon_schedule();
    let episodes = config.hyperparameters.total_training_episodes;
    let mut records = Vec::with_capacity(episodes as usize);
    let mut snapshots = Vec::new();
    for episode in 0..episodes {
        let eps = schedule.value(episode);
        let (reward_good, reward_adversary, steps) = match role {
            Role::Good => run_episode(
                config,
                stream::ENV,
                episode,
                &mut primary,
                &mut frozen,
                eps,
                opp_eps,
            )?,
            Role::Adversary => run_episode(
                config,
                stream::ENV,
                episode,
                &mut frozen,
                &mut primary,
                opp_eps,
                eps,
            )?,
        };
        if is_sync_episode(config, episode) {
            primary.agent.sync_target();
        }
        records.push(EpisodeRecord {
            episode,
            reward_good,
            reward_adversary,
            steps,
            epsilon: eps,
        });
        if is_snapshot_episode(config, episode) {
            snapshots.push(Snapshot {
                episode: episode + 1,
                networks: vec![(role, wrap(primary.agent.online.clone()))],
            });
        }
    }
    Ok(MainOutcome {
        primary: wrap(primary.agent.online),
        records,
        snapshots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalStats {
    pub mean: f64,
    pub max: f64,
    pub episodes: u64,
}

impl EvalStats {
    pub fn from_rewards(rewards: &[f64]) -> Result<Self> {
        if rewards.is_empty() {
            return Err(Error::Empty("evaluation rewards"));
        }
        let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
        let max = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            mean,
            max,
            episodes: rewards.len() as u64,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub good: EvalStats,
    pub adversary: EvalStats,
    pub rewards_good: Vec<f64>,
    pub rewards_adversary: Vec<f64>,
}

/// Greedy test play (ε = 0 on both sides) for `total_testing_episodes`
/// episodes, each seeded from the run seed and its index.
pub fn evaluate(good: &Network, adversary: &Network, config: &RunConfig) -> Result<Evaluation> {
    config.validate()?;
    for (role, net) in [(Role::Good, good), (Role::Adversary, adversary)] {
        let expected = config.scenario.obs_dim(role);
        if net.obs_dim() != expected {
            return Err(Error::shape(
                "network input dimension",
                format!("{expected} for the {role} on {}", config.scenario),
                net.obs_dim(),
            ));
        }
    }
    let mut good_actor = Frozen {
        net: good,
        rng: seeded(config.seed, stream::EVAL),
    };
    let mut adv_actor = Frozen {
        net: adversary,
        rng: seeded(config.seed, stream::EVAL),
    };
    let n = config.hyperparameters.total_testing_episodes;
    let mut rewards_good = Vec::with_capacity(n as usize);
    let mut rewards_adversary = Vec::with_capacity(n as usize);
    for episode in 0..n {
        let (g, a, _) = run_episode(
            config,
            stream::EVAL,
            episode,
            &mut good_actor,
            &mut adv_actor,
            0.0,
            0.0,
        )?;
        rewards_good.push(g);
        rewards_adversary.push(a);
    }
    Ok(Evaluation {
        good: EvalStats::from_rewards(&rewards_good)?,
        adversary: EvalStats::from_rewards(&rewards_adversary)?,
        rewards_good,
        rewards_adversary,
    })
}
