//! Simple Push and Simple Adversary particle scenarios.
//!
//! Two point-mass agents (a good agent and an adversary) move on the plane
//! under a damped, speed-limited integrator. There are no contact forces and
//! positions are never clipped. Rewards are plain Euclidean distances
//! evaluated on the post-move state.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Rng as RunRng};
use crate::{Error, Result};

pub type Vec2 = [f64; 2];
pub type Rgb = [f64; 3];

pub const GOAL_COLOR: Rgb = [0.25, 0.75, 0.25];
pub const DECOY_COLOR: Rgb = [0.75, 0.25, 0.25];

pub const PUSH_GOOD_OBS: usize = 19;
pub const PUSH_ADVERSARY_OBS: usize = 8;
pub const ADV_GOOD_OBS: usize = 6;
pub const ADV_ADVERSARY_OBS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    SimplePush,
    SimpleAdversary,
}

impl ScenarioKind {
    pub fn landmark_count(self) -> usize {
        match self {
            ScenarioKind::SimplePush => 2,
            ScenarioKind::SimpleAdversary => 1,
        }
    }

    /// Observation lengths `(good agent, adversary)`.
    pub fn obs_dims(self) -> (usize, usize) {
        match self {
            ScenarioKind::SimplePush => (PUSH_GOOD_OBS, PUSH_ADVERSARY_OBS),
            ScenarioKind::SimpleAdversary => (ADV_GOOD_OBS, ADV_ADVERSARY_OBS),
        }
    }

    pub fn obs_dim(self, role: Role) -> usize {
        let (good, adv) = self.obs_dims();
        match role {
            Role::Good => good,
            Role::Adversary => adv,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::SimplePush => "simple_push",
            ScenarioKind::SimpleAdversary => "simple_adversary",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "simple_push" => Some(ScenarioKind::SimplePush),
            "simple_adversary" => Some(ScenarioKind::SimpleAdversary),
            _ => None,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which of the two bodies an agent controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Good,
    Adversary,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::Good => Role::Adversary,
            Role::Adversary => Role::Good,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Good => "good",
            Role::Adversary => "adversary",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "good" => Some(Role::Good),
            "adversary" => Some(Role::Adversary),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Discrete move: 0 no-op, 1 left, 2 right, 3 down, 4 up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action(u8);

impl Action {
    pub const COUNT: usize = 5;
    pub const NOOP: Action = Action(0);
    pub const LEFT: Action = Action(1);
    pub const RIGHT: Action = Action(2);
    pub const DOWN: Action = Action(3);
    pub const UP: Action = Action(4);

    pub fn new(index: usize) -> Result<Self> {
        if index < Self::COUNT {
            Ok(Action(index as u8))
        } else {
            Err(Error::InvalidArgument(format!("action index {index} >= 5")))
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Unit direction of the applied force.
    pub fn direction(self) -> Vec2 {
        match self.0 {
            1 => [-1.0, 0.0],
            2 => [1.0, 0.0],
            3 => [0.0, -1.0],
            4 => [0.0, 1.0],
            _ => [0.0, 0.0],
        }
    }
}

/// Integrator constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub dt: f64,
    pub damping: f64,
    pub accel: f64,
    pub max_speed: f64,
    pub episode_length: usize,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            dt: 0.1,
            damping: 0.25,
            accel: 5.0,
            max_speed: 1.0,
            episode_length: 25,
        }
    }
}

impl Physics {
    pub fn validate(&self) -> Result<()> {
        let positive = |key, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig {
                    key,
                    reason: format!("must be positive, got {v}"),
                })
            }
        };
        positive("dt", self.dt)?;
        positive("accel", self.accel)?;
        positive("max_speed", self.max_speed)?;
        if !(0.0..=1.0).contains(&self.damping) {
            return Err(Error::InvalidConfig {
                key: "damping",
                reason: format!("must lie in [0, 1], got {}", self.damping),
            });
        }
        if self.episode_length == 0 {
            return Err(Error::InvalidConfig {
                key: "episode_length",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub kind: ScenarioKind,
    pub agent_pos: Vec2,
    pub agent_vel: Vec2,
    pub adversary_pos: Vec2,
    pub adversary_vel: Vec2,
    pub landmarks: Vec<Vec2>,
    pub landmark_colors: Vec<Rgb>,
    pub goal_index: usize,
    pub step_count: usize,
}

impl WorldState {
    pub fn goal(&self) -> Vec2 {
        self.landmarks[self.goal_index]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: WorldState,
    pub good_obs: Vec<f64>,
    pub adversary_obs: Vec<f64>,
    pub reward_good: f64,
    pub reward_adversary: f64,
    pub done: bool,
}

/// Fresh episode: every body uniform in `[-1, 1]²`, zero velocities.
pub fn reset(kind: ScenarioKind, seed: u64) -> WorldState {
    let mut rng = rng::seeded(seed, rng::stream::ENV);
    reset_with(kind, &mut rng)
}

pub fn reset_with(kind: ScenarioKind, rng: &mut RunRng) -> WorldState {
    let mut point = || -> Vec2 { [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)] };
    let agent_pos = point();
    let adversary_pos = point();
    let landmarks: Vec<Vec2> = (0..kind.landmark_count()).map(|_| point()).collect();
    let goal_index = match kind {
        ScenarioKind::SimplePush => rng.gen_range(0..landmarks.len()),
        ScenarioKind::SimpleAdversary => 0,
    };
    let landmark_colors = (0..landmarks.len())
        .map(|i| if i == goal_index { GOAL_COLOR } else { DECOY_COLOR })
        .collect();
    WorldState {
        kind,
        agent_pos,
        agent_vel: [0.0; 2],
        adversary_pos,
        adversary_vel: [0.0; 2],
        landmarks,
        landmark_colors,
        goal_index,
        step_count: 0,
    }
}

fn integrate(pos: Vec2, vel: Vec2, action: Action, physics: &Physics) -> (Vec2, Vec2) {
    let dir = action.direction();
    let mut v = [0.0; 2];
    for k in 0..2 {
        v[k] = vel[k] * (1.0 - physics.damping) + dir[k] * physics.accel * physics.dt;
    }
    let speed = norm(v);
    if speed > physics.max_speed {
        let s = physics.max_speed / speed;
        v = [v[0] * s, v[1] * s];
    }
    let p = [pos[0] + v[0] * physics.dt, pos[1] + v[1] * physics.dt];
    (p, v)
}

/// Advances both bodies one tick and scores the resulting state.
pub fn step(
    state: &WorldState,
    physics: &Physics,
    good: Action,
    adversary: Action,
) -> Result<StepOutcome> {
    if state.step_count >= physics.episode_length {
        return Err(Error::EpisodeFinished(state.step_count));
    }
    let mut next = state.clone();
    (next.agent_pos, next.agent_vel) = integrate(state.agent_pos, state.agent_vel, good, physics);
    (next.adversary_pos, next.adversary_vel) =
        integrate(state.adversary_pos, state.adversary_vel, adversary, physics);
    next.step_count += 1;

    let (good_obs, adversary_obs) = observe(&next);
    let (reward_good, reward_adversary) = rewards(&next);
    let done = next.step_count == physics.episode_length;
    Ok(StepOutcome {
        state: next,
        good_obs,
        adversary_obs,
        reward_good,
        reward_adversary,
        done,
    })
}

/// Observations `(good agent, adversary)` for the state's scenario.
pub fn observe(state: &WorldState) -> (Vec<f64>, Vec<f64>) {
    let built = match state.kind {
        ScenarioKind::SimplePush => (observe_push_good(state), observe_push_adversary(state)),
        ScenarioKind::SimpleAdversary => (observe_adv_good(state), observe_adv_adversary(state)),
    };
    match built {
        (Ok(g), Ok(a)) => (g, a),
        _ => unreachable!("builders match the state's own scenario"),
    }
}

pub fn rewards(state: &WorldState) -> (f64, f64) {
    match state.kind {
        ScenarioKind::SimplePush => reward_push(state),
        ScenarioKind::SimpleAdversary => reward_adversary_scenario(state),
    }
}

fn require(state: &WorldState, kind: ScenarioKind, builder: &'static str) -> Result<()> {
    if state.kind == kind {
        Ok(())
    } else {
        Err(Error::WrongScenario {
            builder,
            expected: kind,
            actual: state.kind,
        })
    }
}

fn rel(to: Vec2, from: Vec2) -> Vec2 {
    [to[0] - from[0], to[1] - from[1]]
}

fn norm(v: Vec2) -> f64 {
    v[0].hypot(v[1])
}

fn dist(a: Vec2, b: Vec2) -> f64 {
    norm(rel(a, b))
}

/// Velocity (2), goal offset (2), goal color (3), both landmark offsets (4),
/// both landmark colors (6), adversary offset (2).
pub fn observe_push_good(state: &WorldState) -> Result<Vec<f64>> {
    require(state, ScenarioKind::SimplePush, "observe_push_good")?;
    let me = state.agent_pos;
    let mut obs = Vec::with_capacity(PUSH_GOOD_OBS);
    obs.extend(state.agent_vel);
    obs.extend(rel(state.goal(), me));
    obs.extend(state.landmark_colors[state.goal_index]);
    for &l in &state.landmarks {
        obs.extend(rel(l, me));
    }
    for c in &state.landmark_colors {
        obs.extend(c);
    }
    obs.extend(rel(state.adversary_pos, me));
    debug_assert_eq!(obs.len(), PUSH_GOOD_OBS);
    Ok(obs)
}

/// Velocity (2), both landmark offsets (4), good agent offset (2).
pub fn observe_push_adversary(state: &WorldState) -> Result<Vec<f64>> {
    require(state, ScenarioKind::SimplePush, "observe_push_adversary")?;
    let me = state.adversary_pos;
    let mut obs = Vec::with_capacity(PUSH_ADVERSARY_OBS);
    obs.extend(state.adversary_vel);
    for &l in &state.landmarks {
        obs.extend(rel(l, me));
    }
    obs.extend(rel(state.agent_pos, me));
    debug_assert_eq!(obs.len(), PUSH_ADVERSARY_OBS);
    Ok(obs)
}

/// Absolute position (2), goal offset (2), adversary offset (2).
pub fn observe_adv_good(state: &WorldState) -> Result<Vec<f64>> {
    require(state, ScenarioKind::SimpleAdversary, "observe_adv_good")?;
    let me = state.agent_pos;
    let mut obs = Vec::with_capacity(ADV_GOOD_OBS);
    obs.extend(me);
    obs.extend(rel(state.goal(), me));
    obs.extend(rel(state.adversary_pos, me));
    Ok(obs)
}

/// Landmark offset (2), good agent offset (2).
pub fn observe_adv_adversary(state: &WorldState) -> Result<Vec<f64>> {
    require(state, ScenarioKind::SimpleAdversary, "observe_adv_adversary")?;
    let me = state.adversary_pos;
    let mut obs = Vec::with_capacity(ADV_ADVERSARY_OBS);
    obs.extend(rel(state.landmarks[0], me));
    obs.extend(rel(state.agent_pos, me));
    Ok(obs)
}

/// `(−d_good, d_good − d_adv)` with distances to the goal landmark.
pub fn reward_push(state: &WorldState) -> (f64, f64) {
    let goal = state.goal();
    let d_good = dist(state.agent_pos, goal);
    let d_adv = dist(state.adversary_pos, goal);
    (-d_good, -d_adv + d_good)
}

/// `(d_adv − d_good, −d_adv)` with distances to the single landmark.
pub fn reward_adversary_scenario(state: &WorldState) -> (f64, f64) {
    let goal = state.goal();
    let d_good = dist(state.agent_pos, goal);
    let d_adv = dist(state.adversary_pos, goal);
    (-d_good + d_adv, -d_adv)
}
