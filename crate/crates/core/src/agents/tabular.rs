use crate::{Error, Result};

/// Dense `|S| × |A|` action-value table.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max_value(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One Q-learning step: `Q(s,a) ← (1−α) Q(s,a) + α (r + γ max_a' Q(s',a'))`.
pub fn tabular_q_update(
    table: &mut QTable,
    s: usize,
    a: usize,
    r: f64,
    s_next: usize,
    alpha: f64,
    gamma: f64,
) -> Result<()> {
    if s >= table.n_states || s_next >= table.n_states {
        return Err(Error::InvalidArgument(format!(
            "state index out of range: {s} / {s_next} with {} states",
            table.n_states
        )));
    }
    if a >= table.n_actions {
        return Err(Error::InvalidArgument(format!(
            "action index {a} with {} actions",
            table.n_actions
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("step size {alpha} not in (0, 1]")));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("discount {gamma} not in [0, 1]")));
    }
    let td_target = r + gamma * table.max_value(s_next);
    let updated = (1.0 - alpha) * table.get(s, a) + alpha * td_target;
    table.set(s, a, updated);
    Ok(())
}
