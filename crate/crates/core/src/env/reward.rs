//! Interference penalty and shaped per-agent reward.

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::metrics::{BeamAssignment, CrossGains, LinkBudget};

/// Own rate, penalty and the combined reward of one agent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardBreakdown {
    pub own_rate: f64,
    pub penalty: f64,
    pub reward: f64,
}

/// Rate that every other stream would gain if stream `source` stopped
/// interfering, summed over other users' streams and the same user's
/// other streams.
pub fn penalty_from_gains(gains: &CrossGains, source: usize) -> f64 {
    let total = gains.budget().total_streams();
    (0..total).filter(|&v| v != source).map(|v| gains.stream_rate_without(v, source) - gains.stream_rate(v)).sum()
}

pub fn penalty(
    k: usize,
    n: usize,
    assignment: &BeamAssignment,
    channels: &ChannelRealization,
    budget: &LinkBudget,
) -> Result<f64> {
    let gains = CrossGains::compute(assignment, channels, budget)?;
    Ok(penalty_from_gains(&gains, budget.index(k, n)))
}

pub fn reward_from_gains(gains: &CrossGains, source: usize, lambda: f64) -> RewardBreakdown {
    let own_rate = gains.stream_rate(source);
    let penalty = penalty_from_gains(gains, source);
    RewardBreakdown { own_rate, penalty, reward: own_rate - lambda * penalty }
}

/// `r = G - lambda * P` for stream `(k, n)`.
pub fn reward(
    k: usize,
    n: usize,
    assignment: &BeamAssignment,
    channels: &ChannelRealization,
    budget: &LinkBudget,
    lambda: f64,
) -> Result<RewardBreakdown> {
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("penalty weight must be >= 0, got {lambda}")));
    }
    let gains = CrossGains::compute(assignment, channels, budget)?;
    Ok(reward_from_gains(&gains, budget.index(k, n), lambda))
}
