//! Proportional prioritized experience replay.
//!
//! Priorities are `(|δ| + ε)^α`; sampling is stratified over the total
//! priority mass and importance weights `(N·P_i)^(−β)` are normalised by the
//! batch maximum. β is annealed linearly towards 1 by the training loop.

mod sum_tree;

use rand::Rng;

pub use sum_tree::SumTree;

use crate::envs::Action;
use crate::opponent::OPPONENT_FEATURES;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    pub opponent_action: Action,
    pub opponent_features: [f64; OPPONENT_FEATURES],
    pub next_opponent_features: [f64; OPPONENT_FEATURES],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerConfig {
    pub capacity: usize,
    pub alpha: f64,
    /// Initial importance exponent; annealed to 1.0.
    pub beta: f64,
    pub epsilon: f64,
    pub annealing_steps: u64,
}

/// Where a sampled transition lives, plus the write stamp used to detect
/// slots overwritten between `sample` and `update_priorities`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplayIndex {
    pub slot: usize,
    stamp: u64,
}

#[derive(Debug, Clone)]
pub struct SampledBatch {
    pub transitions: Vec<Transition>,
    pub indices: Vec<ReplayIndex>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PerBuffer {
    config: PerConfig,
    tree: SumTree,
    slots: Vec<Transition>,
    stamps: Vec<u64>,
    cursor: usize,
    pushes: u64,
    beta: f64,
    max_priority: f64,
}

impl PerBuffer {
    pub fn new(config: PerConfig) -> Result<Self> {
        if config.capacity == 0 {
            return Err(Error::InvalidConfig {
                key: "replay_memory_size",
                reason: "must be at least 1".into(),
            });
        }
        if !(config.alpha >= 0.0 && config.alpha.is_finite()) {
            return Err(Error::InvalidConfig {
                key: "alpha",
                reason: format!("must be non-negative, got {}", config.alpha),
            });
        }
        if !(0.0..=1.0).contains(&config.beta) {
            return Err(Error::InvalidConfig {
                key: "beta",
                reason: format!("must lie in [0, 1], got {}", config.beta),
            });
        }
        if !(config.epsilon >= 0.0 && config.epsilon.is_finite()) {
            return Err(Error::InvalidConfig {
                key: "epsilon_per",
                reason: format!("must be non-negative, got {}", config.epsilon),
            });
        }
        if config.annealing_steps == 0 {
            return Err(Error::InvalidConfig {
                key: "annealing_steps",
                reason: "must be at least 1".into(),
            });
        }
        Ok(Self {
            config,
            tree: SumTree::new(config.capacity),
            slots: Vec::with_capacity(config.capacity.min(1 << 16)),
            stamps: Vec::with_capacity(config.capacity.min(1 << 16)),
            cursor: 0,
            pushes: 0,
            beta: config.beta,
            max_priority: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.config.capacity
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    pub fn get(&self, slot: usize) -> Option<&Transition> {
        self.slots.get(slot)
    }

    /// Stored transitions, oldest first.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.len() < self.capacity() { 0 } else { self.cursor };
        self.slots[split..].iter().chain(&self.slots[..split])
    }

    /// Exact sampling probability of a stored slot.
    pub fn probability(&self, slot: usize) -> f64 {
        self.tree.leaf(slot) / self.tree.total()
    }

    /// Stores `t` at maximal priority, overwriting the oldest slot when full.
    pub fn push(&mut self, t: Transition) {
        debug_assert_eq!(t.state.len(), t.next_state.len());
        let slot = self.cursor;
        if slot == self.slots.len() {
            self.slots.push(t);
            self.stamps.push(self.pushes);
        } else {
            self.slots[slot] = t;
            self.stamps[slot] = self.pushes;
        }
        self.pushes += 1;
        self.cursor = (self.cursor + 1) % self.config.capacity;
        let p = self.max_priority.powf(self.config.alpha);
        self.tree
            .set(slot, p)
            .expect("max priority is finite and non-negative");
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<SampledBatch> {
        if batch_size == 0 || self.len() < batch_size {
            return Err(Error::InsufficientSamples {
                available: self.len(),
                requested: batch_size,
            });
        }
        let total = self.tree.total();
        let segment = total / batch_size as f64;
        let n = self.len() as f64;
        let mut transitions = Vec::with_capacity(batch_size);
        let mut indices = Vec::with_capacity(batch_size);
        let mut weights = Vec::with_capacity(batch_size);
        for j in 0..batch_size {
            let mass = segment * (j as f64 + rng.gen::<f64>());
            let slot = self.tree.find(mass).min(self.len() - 1);
            let p = self.tree.leaf(slot) / total;
            transitions.push(self.slots[slot].clone());
            indices.push(ReplayIndex {
                slot,
                stamp: self.stamps[slot],
            });
            weights.push((n * p).powf(-self.beta));
        }
        let max_w = weights.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
        weights.iter_mut().for_each(|w| *w /= max_w);
        Ok(SampledBatch {
            transitions,
            indices,
            weights,
        })
    }

    /// Sets `leaf_i = (|δ_i| + ε)^α` for each sampled index.
    pub fn update_priorities(&mut self, indices: &[ReplayIndex], td_errors: &[f64]) -> Result<()> {
        if indices.len() != td_errors.len() {
            return Err(Error::shape(
                "update_priorities",
                indices.len(),
                td_errors.len(),
            ));
        }
        for (idx, &delta) in indices.iter().zip(td_errors) {
            if idx.slot >= self.len() {
                return Err(Error::InvalidIndex(idx.slot));
            }
            if self.stamps[idx.slot] != idx.stamp {
                return Err(Error::StaleIndex(idx.slot));
            }
            if !delta.is_finite() {
                return Err(Error::NonFinite(format!("TD error for slot {}", idx.slot)));
            }
        }
        for (idx, &delta) in indices.iter().zip(td_errors) {
            let raw = delta.abs() + self.config.epsilon;
            self.max_priority = self.max_priority.max(raw);
            self.tree.set(idx.slot, raw.powf(self.config.alpha))?;
        }
        Ok(())
    }

    /// `β = min(1, β_0 + (1 − β_0) · step / annealing_steps)`.
    pub fn anneal_beta(&mut self, global_step: u64) {
        let frac = global_step as f64 / self.config.annealing_steps as f64;
        self.beta = (self.config.beta + (1.0 - self.config.beta) * frac).min(1.0);
    }
}
