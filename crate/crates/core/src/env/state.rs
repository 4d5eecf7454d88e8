//! Delayed-feedback observations.
//!
//! The state of agent `(k, n)` at slot `t` is assembled only from slots
//! `t-1` and `t-2` (plus the beams of `t-3` replayed on the channel of
//! `t-2`). Layout, `D = 10 K Ns + 3` entries:
//!
//! | index | meaning (all at `t-1` unless noted) |
//! |-------|--------------------------------------|
//! | 0 | own gain `|w^H H p|^2` |
//! | 1 | precoder index `U` |
//! | 2 | combiner index `V` |
//! | 3 | own rate `G` |
//! | 4 | interference plus noise |
//! | 5 + 4(u-1) + 0 | `sum_{i!=n} |w(t-u)^H H(t-u) p_{k,i}(t-u)|^2` |
//! | 5 + 4(u-1) + 1 | same, beams of `t-1-u` on `H(t-u)` |
//! | 5 + 4(u-1) + 2 | `sum_{j!=k,i} |w(t-u)^H H(t-u) p_{j,i}(t-u)|^2` |
//! | 5 + 4(u-1) + 3 | same, beams of `t-1-u` on `H(t-u)` |
//! | 13 + 10 m + 5(u-1) + {0..4} | other agent `m`: `U`, `V`, `G`, own received power, power it receives from `(k, n)` at `t-u` |
//!
//! with `u` in `{1, 2}` and other agents in k-major order skipping `(k, n)`.

use std::collections::VecDeque;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::metrics::{BeamAssignment, CrossGains, LinkBudget, RateReport};

/// Slots of feedback kept; enough for `t-1`, `t-2` and the beams of `t-3`.
pub const HISTORY_DEPTH: usize = 3;

/// Number of completed slots needed before a state can be built.
pub const WARMUP_SLOTS: usize = 3;

pub const DESIRED_LEN: usize = 5;
pub const INTERFERENCE_LEN: usize = 8;
pub const PER_OTHER_AGENT_LEN: usize = 10;

pub fn state_len(users: usize, streams_per_user: usize) -> usize {
    10 * users * streams_per_user + 3
}

/// Everything fed back about one transmitted slot.
#[derive(Clone, Debug)]
pub struct SlotRecord {
    pub slot: u64,
    pub channel: ChannelRealization,
    pub assignment: BeamAssignment,
    /// `(U, V)` codebook indices per stream, `(0, 0)` for non-codebook beams.
    pub indices: Vec<(usize, usize)>,
    /// This slot's beams on this slot's channel.
    pub gains: CrossGains,
    /// Previous slot's beams on this slot's channel, if there was one.
    pub stale: Option<CrossGains>,
    pub report: RateReport,
}

/// Ring buffer of the last [`HISTORY_DEPTH`] slots, newest first.
#[derive(Clone, Debug, Default)]
pub struct SlotHistory {
    slots: VecDeque<SlotRecord>,
}

impl SlotHistory {
    pub fn new() -> Self {
        Self { slots: VecDeque::with_capacity(HISTORY_DEPTH) }
    }

    /// Records a completed slot. Fills `stale` from the previous record.
    pub fn push(
        &mut self,
        channel: ChannelRealization,
        assignment: BeamAssignment,
        indices: Vec<(usize, usize)>,
        budget: &LinkBudget,
    ) -> Result<&SlotRecord> {
        let gains = CrossGains::compute(&assignment, &channel, budget)?;
        let stale = match self.slots.front() {
            Some(prev) => Some(CrossGains::compute(&prev.assignment, &channel, budget)?),
            None => None,
        };
        let report = gains.rate_report();
        if self.slots.len() == HISTORY_DEPTH {
            self.slots.pop_back();
        }
        self.slots.push_front(SlotRecord { slot: channel.slot, channel, assignment, indices, gains, stale, report });
        Ok(&self.slots[0])
    }

    /// Drops all feedback (after a reschedule).
    pub fn clear(&mut self) {
        self.slots.clear();
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Record `t - lag` where lag 1 is the most recent slot.
    pub fn lagged(&self, lag: usize) -> Option<&SlotRecord> {
        lag.checked_sub(1).and_then(|i| self.slots.get(i))
    }

    pub fn latest(&self) -> Option<&SlotRecord> {
        self.slots.front()
    }

    pub fn is_ready(&self) -> bool {
        self.slots.len() >= 2 && self.slots.iter().take(2).all(|r| r.stale.is_some())
    }
}

/// Raw observation vector of one agent.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentState(pub Vec<f64>);

impl AgentState {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Semantic class of one state entry; drives normalisation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureKind {
    /// `|w^H H p|^2` without the per-stream power factor.
    Gain,
    /// Received power in watts.
    Power,
    /// Rate in bits/s/Hz.
    Rate,
    TxIndex,
    RxIndex,
}

/// Kinds of every entry of the state layout.
pub fn feature_kinds(users: usize, streams_per_user: usize) -> Vec<FeatureKind> {
    use FeatureKind::*;
    let mut kinds = vec![Gain, TxIndex, RxIndex, Rate, Power];
    kinds.extend(std::iter::repeat_n(Gain, INTERFERENCE_LEN));
    for _ in 0..users * streams_per_user - 1 {
        for _ in 0..2 {
            kinds.extend([TxIndex, RxIndex, Rate, Power, Power]);
        }
    }
    kinds
}

fn own_stream_sum(g: &CrossGains, v: usize, budget: &LinkBudget) -> (f64, f64) {
    let ns = budget.streams_per_user;
    let (k, _) = budget.owner(v);
    let mut inter = 0.0;
    let mut multi = 0.0;
    for s in 0..budget.total_streams() {
        if s == v {
            continue;
        }
        if s / ns == k {
            inter += g.gain(v, s);
        } else {
            multi += g.gain(v, s);
        }
    }
    (inter, multi)
}

/// Builds the state of agent `(k, n)` from the feedback history.
pub fn build_state(k: usize, n: usize, history: &SlotHistory, budget: &LinkBudget) -> Result<AgentState> {
    if !history.is_ready() {
        return Err(Error::NotReady(format!(
            "state needs {WARMUP_SLOTS} completed slots of feedback, have {}",
            history.len()
        )));
    }
    if k >= budget.users || n >= budget.streams_per_user {
        return Err(Error::Index { index: budget.index(k, n), size: budget.total_streams() });
    }
    let me = budget.index(k, n);
    let total = budget.total_streams();
    let prev = history.lagged(1).expect("ready history has t-1");
    let mut out = Vec::with_capacity(state_len(budget.users, budget.streams_per_user));

    let (u_idx, v_idx) = prev.indices[me];
    out.push(prev.gains.gain(me, me));
    out.push(u_idx as f64);
    out.push(v_idx as f64);
    out.push(prev.report.per_stream[me]);
    out.push(prev.gains.interference_plus_noise(me));

    for lag in 1..=2 {
        let rec = history.lagged(lag).expect("ready history has t-2");
        let stale = rec.stale.as_ref().expect("ready history has stale gains");
        let (fresh_inter, fresh_multi) = own_stream_sum(&rec.gains, me, budget);
        let (stale_inter, stale_multi) = own_stream_sum(stale, me, budget);
        out.extend([fresh_inter, stale_inter, fresh_multi, stale_multi]);
    }

    for other in (0..total).filter(|&s| s != me) {
        for lag in 1..=2 {
            let rec = history.lagged(lag).expect("ready history has t-2");
            let (u, v) = rec.indices[other];
            out.extend([
                u as f64,
                v as f64,
                rec.report.per_stream[other],
                rec.gains.power(other, other),
                rec.gains.power(other, me),
            ]);
        }
    }
    debug_assert_eq!(out.len(), state_len(budget.users, budget.streams_per_user));
    Ok(AgentState(out))
}

/// Maps raw states to network inputs.
///
/// Gains and powers are expressed in noise units and compressed with
/// `log10(1 + x)`; codebook indices are scaled to `[0, 1]`; rates pass
/// through. With `enabled = false` the raw vector is used unchanged.
#[derive(Clone, Debug)]
pub struct StateEncoder {
    kinds: Vec<FeatureKind>,
    gain_scale: f64,
    power_scale: f64,
    tx_scale: f64,
    rx_scale: f64,
    enabled: bool,
}

impl StateEncoder {
    pub fn new(budget: &LinkBudget, s_t: usize, s_r: usize, enabled: bool) -> Self {
        let idx_scale = |s: usize| if s > 1 { 1.0 / (s - 1) as f64 } else { 0.0 };
        Self {
            kinds: feature_kinds(budget.users, budget.streams_per_user),
            gain_scale: budget.stream_power() / budget.noise_w,
            power_scale: 1.0 / budget.noise_w,
            tx_scale: idx_scale(s_t),
            rx_scale: idx_scale(s_r),
            enabled,
        }
    }

    pub fn dim(&self) -> usize {
        self.kinds.len()
    }

    pub fn encode(&self, state: &AgentState) -> Vec<f64> {
        debug_assert_eq!(state.len(), self.kinds.len());
        if !self.enabled {
            return state.0.clone();
        }
        state
            .0
            .iter()
            .zip(&self.kinds)
            .map(|(&x, kind)| match kind {
                FeatureKind::Gain => (x * self.gain_scale).ln_1p() / std::f64::consts::LN_10,
                FeatureKind::Power => (x * self.power_scale).ln_1p() / std::f64::consts::LN_10,
                FeatureKind::Rate => x,
                FeatureKind::TxIndex => x * self.tx_scale,
                FeatureKind::RxIndex => x * self.rx_scale,
            })
            .collect()
    }
}
