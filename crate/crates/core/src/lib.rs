//! Opponent modeling for two-player particle games.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense matrices, a two-hidden-layer ReLU MLP with hand-written
//!   backprop, softmax, weighted MSE and Adam. All arithmetic is `f64`.
//! - [`envs`]: the Simple Push and Simple Adversary particle scenarios.
//! - [`replay`]: proportional prioritized replay on a sum tree.
//! - [`opponent`]: per-episode opponent action statistics (6-dim features).
//! - [`agents`]: tabular Q-learning, ε-greedy control, Double-DQN and the
//!   mixture-of-experts Q-network whose gate is driven only by opponent features.
//! - [`training`]: adversarial self-play initialisation, training against a
//!   frozen opponent, and greedy evaluation.
//!
//! Every random draw is taken from a seeded ChaCha stream, so a run is fully
//! determined by its configuration.

pub mod agents;
pub mod envs;
mod error;
pub mod numerics;
pub mod opponent;
pub mod replay;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
