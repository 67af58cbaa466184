//! Opponent action statistics for the mixture-of-experts gate.

use crate::envs::Action;

pub const OPPONENT_FEATURES: usize = 6;

/// Per-episode counts of the opponent's actions plus its most recent one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpponentTracker {
    counts: [u32; Action::COUNT],
    total: u32,
    last_action: Option<Action>,
}

impl OpponentTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, action: Action) {
        self.counts[action.index()] += 1;
        self.total += 1;
        self.last_action = Some(action);
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn counts(&self) -> [u32; Action::COUNT] {
        self.counts
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn last_action(&self) -> Option<Action> {
        self.last_action
    }

    /// `[N_1/N, .., N_5/N, last/4]`; before any observation the frequencies
    /// are uniform (0.2) and the last-action slot is 0.5.
    pub fn features(&self) -> [f64; OPPONENT_FEATURES] {
        let mut out = [0.2, 0.2, 0.2, 0.2, 0.2, 0.5];
        if self.total > 0 {
            let n = f64::from(self.total);
            for (slot, &c) in out.iter_mut().zip(&self.counts) {
                *slot = f64::from(c) / n;
            }
        }
        if let Some(a) = self.last_action {
            out[5] = a.index() as f64 / 4.0;
        }
        out
    }
}
