//! Q-learning agents: tabular reference, feed-forward DDQN and the
//! mixture-of-experts opponent-modeling network.

mod ddqn;
mod moe;
mod network;
mod policy;
mod qnet;
mod tabular;

pub use ddqn::{ddqn_target, DdqnAgent, TrainReport};
pub use moe::{
    moe_backward, moe_finite_diff_check, moe_forward, Expert, MoeCache, MoeQNetwork, MoeShape,
    EXPERT_HIDDEN, GATE_HIDDEN, OPPONENT_HIDDEN, STATE_HIDDEN,
};
pub use network::{AgentKind, Network};
pub use policy::{argmax, select_action, EpsilonSchedule};
pub use qnet::{QInput, QNetwork};
pub use tabular::{tabular_q_update, QTable};
