use super::policy::argmax;
use super::qnet::{QInput, QNetwork};
use crate::numerics::weighted_mse;
use crate::replay::Transition;
use crate::{Error, Result};

/// Bootstrap target for one transition.
///
/// With `double_q` the online network picks the next action and the target
/// network scores it; otherwise the target network does both.
pub fn ddqn_target(
    reward: f64,
    done: bool,
    gamma: f64,
    next_q_online: &[f64],
    next_q_target: &[f64],
    double_q: bool,
) -> f64 {
    if done {
        return reward;
    }
    let a = if double_q {
        argmax(next_q_online)
    } else {
        argmax(next_q_target)
    };
    reward + gamma * next_q_target[a]
}

/// Online and target network plus the update rule.
#[derive(Debug, Clone)]
pub struct DdqnAgent<N> {
    pub online: N,
    pub target: N,
    pub gamma: f64,
    pub learning_rate: f64,
    pub double_q: bool,
    updates: u64,
}

/// Result of one gradient step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub loss: f64,
    /// `target − prediction` for each transition in the batch.
    pub td_errors: Vec<f64>,
}

impl<N: QNetwork> DdqnAgent<N> {
    pub fn new(online: N, gamma: f64, learning_rate: f64, double_q: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidConfig {
                key: "discount_factor",
                reason: format!("{gamma} not in [0, 1]"),
            });
        }
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidConfig {
                key: "learning_rate",
                reason: format!("{learning_rate} is not positive"),
            });
        }
        Ok(Self {
            target: online.clone(),
            online,
            gamma,
            learning_rate,
            double_q,
            updates: 0,
        })
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn q_values(&self, input: QInput<'_>) -> Result<Vec<f64>> {
        self.online.q_values(input)
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }

    /// Bootstrap target for a stored transition.
    pub fn target_for(&self, t: &Transition) -> Result<f64> {
        if t.done {
            return Ok(t.reward);
        }
        let next = QInput {
            obs: &t.next_state,
            opponent: &t.next_opponent_features,
        };
        let q_target = self.target.q_values(next)?;
        let q_online = if self.double_q {
            self.online.q_values(next)?
        } else {
            Vec::new()
        };
        Ok(ddqn_target(
            t.reward,
            false,
            self.gamma,
            &q_online,
            &q_target,
            self.double_q,
        ))
    }

    /// One Adam step on the importance-weighted squared TD error of the taken
    /// actions. `weights` of `None` means uniform weights of 1.
    pub fn train_step(&mut self, batch: &[&Transition], weights: Option<&[f64]>) -> Result<TrainReport> {
        if batch.is_empty() {
            return Err(Error::Empty("training batch"));
        }
        let mut preds = Vec::with_capacity(batch.len());
        let mut caches = Vec::with_capacity(batch.len());
        let mut targets = Vec::with_capacity(batch.len());
        for t in batch {
            let input = QInput {
                obs: &t.state,
                opponent: &t.opponent_features,
            };
            let (q, cache) = self.online.forward(input)?;
            preds.push(q[t.action.index()]);
            caches.push(cache);
            targets.push(self.target_for(t)?);
        }
        let (loss, grad) = weighted_mse(&preds, &targets, weights)?;
        let mut grads = self.online.zero_grads();
        let mut dq = [0.0; crate::envs::Action::COUNT];
        for ((t, cache), g) in batch.iter().zip(&caches).zip(&grad) {
            if *g == 0.0 {
                continue;
            }
            dq.fill(0.0);
            dq[t.action.index()] = *g;
            self.online.backward_acc(cache, &dq, &mut grads)?;
        }
        self.online.adam_step(&grads, self.learning_rate)?;
        self.updates += 1;
        let td_errors = targets.iter().zip(&preds).map(|(y, p)| y - p).collect();
        Ok(TrainReport { loss, td_errors })
    }
}
