//! The two-phase training protocol and its scoring.
//!
//! Phase one ([`run_ali`]) lets two plain DDQN agents learn against each
//! other. Phase two ([`train_vs_fixed`]) freezes one of them and trains a
//! fresh primary agent, optionally with the opponent-gated mixture of experts,
//! against it. [`evaluate`] then plays greedy test episodes.

mod config;
mod loops;

pub use config::{
    default_primary_role, AgentConfig, Hyperparameters, LossFunction, Optimizer, Preset,
    ProtocolConfig, RunConfig,
};
pub use loops::{
    evaluate, run_ali, train_vs_fixed, AliOutcome, EpisodeRecord, EvalStats, Evaluation,
    MainOutcome, Snapshot, HIDDEN_1, HIDDEN_2,
};

use std::fmt::Write;

use crate::{Error, Result};

pub const METRICS_HEADER: &str =
    "episode,reward_good,reward_adv,rolling_score_good,rolling_score_adv,epsilon";

/// Element `i` is the mean of `rewards[max(0, i + 1 - window) ..= i]`.
pub fn rolling_score(rewards: &[f64], window: usize) -> Result<Vec<f64>> {
    if rewards.is_empty() {
        return Err(Error::Empty("rolling_score rewards"));
    }
    if window == 0 {
        return Err(Error::InvalidArgument("rolling window must be at least 1".into()));
    }
    Ok((0..rewards.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let slice = &rewards[lo..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect())
}

/// Per-episode metrics as CSV text, header included.
pub fn metrics_csv(records: &[EpisodeRecord], window: usize) -> Result<String> {
    let good: Vec<f64> = records.iter().map(|r| r.reward_good).collect();
    let adv: Vec<f64> = records.iter().map(|r| r.reward_adversary).collect();
    let rolling_good = rolling_score(&good, window)?;
    let rolling_adv = rolling_score(&adv, window)?;
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for (i, r) in records.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.episode, r.reward_good, r.reward_adversary, rolling_good[i], rolling_adv[i], r.epsilon
        )
        .expect("writing to a String");
    }
    Ok(out)
}
