use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Action;

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy over five Q-values.
pub fn select_action<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> Action {
    debug_assert_eq!(q_values.len(), Action::COUNT);
    let explore = epsilon > 0.0 && rng.gen::<f64>() < epsilon;
    let index = if explore {
        rng.gen_range(0..Action::COUNT)
    } else {
        argmax(q_values)
    };
    Action::new(index).expect("index below Action::COUNT")
}

/// Linear decay from `initial` to `final_value` over `horizon` episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub final_value: f64,
    pub horizon: u64,
}

impl EpsilonSchedule {
    pub fn value(&self, episode: u64) -> f64 {
        if self.horizon == 0 || episode >= self.horizon {
            return self.final_value;
        }
        let frac = episode as f64 / self.horizon as f64;
        self.initial + (self.final_value - self.initial) * frac
    }
}
