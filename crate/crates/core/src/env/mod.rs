//! The slot-level decision process seen by the learning agents.
//!
//! Timing of one [`Env::step`]: the agents have already chosen actions from
//! states built on `t-1`/`t-2` feedback; the channel then ages by one slot,
//! the chosen beams meet the fresh channel, rewards and rates are evaluated
//! on it, and the slot is appended to the feedback history from which the
//! next states are built.

mod reward;
mod state;

pub use reward::{penalty, penalty_from_gains, reward, reward_from_gains, RewardBreakdown};
pub use state::{
    build_state, feature_kinds, state_len, AgentState, FeatureKind, SlotHistory, SlotRecord, StateEncoder, DESIRED_LEN,
    HISTORY_DEPTH, INTERFERENCE_LEN, PER_OTHER_AGENT_LEN, WARMUP_SLOTS,
};

use crate::channel::{ChannelParams, ChannelProcess, ChannelRealization};
use crate::codebook::BeamCodebooks;
use crate::error::{Error, Result};
use crate::metrics::{Beam, BeamAssignment, LinkBudget, RateReport};
use crate::numerics::RngStream;

/// Result of one slot.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub slot: u64,
    pub rewards: Vec<RewardBreakdown>,
    pub report: RateReport,
    /// States for the next slot, once enough feedback has accumulated.
    pub next_states: Option<Vec<AgentState>>,
}

#[derive(Clone, Debug)]
pub struct EnvConfig {
    pub channel: ChannelParams,
    pub budget: LinkBudget,
    pub codebooks: BeamCodebooks,
    /// Penalty weight in the reward.
    pub lambda: f64,
}

#[derive(Clone, Debug)]
pub struct Env {
    budget: LinkBudget,
    codebooks: BeamCodebooks,
    lambda: f64,
    channel: ChannelProcess,
    history: SlotHistory,
}

impl Env {
    pub fn new(config: EnvConfig, rng: &RngStream) -> Result<Self> {
        let EnvConfig { channel, budget, codebooks, lambda } = config;
        if channel.users != budget.users {
            return Err(Error::Config("channel and link budget disagree on the user count".into()));
        }
        if codebooks.tx.antennas() != channel.tx_antennas || codebooks.rx.antennas() != channel.rx_antennas {
            return Err(Error::Config("codebook antenna counts do not match the channel".into()));
        }
        if !(lambda >= 0.0) {
            return Err(Error::Config(format!("penalty weight must be >= 0, got {lambda}")));
        }
        let channel = ChannelProcess::new(channel, &rng.substream("channel"))?;
        Ok(Self { budget, codebooks, lambda, channel, history: SlotHistory::new() })
    }

    pub fn budget(&self) -> &LinkBudget {
        &self.budget
    }

    pub fn codebooks(&self) -> &BeamCodebooks {
        &self.codebooks
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn agents(&self) -> usize {
        self.budget.total_streams()
    }

    pub fn state_dim(&self) -> usize {
        state_len(self.budget.users, self.budget.streams_per_user)
    }

    pub fn channel(&self) -> &ChannelProcess {
        &self.channel
    }

    /// Channel of the most recent slot.
    pub fn current_channel(&self) -> &ChannelRealization {
        self.channel.current()
    }

    pub fn history(&self) -> &SlotHistory {
        &self.history
    }

    pub fn is_ready(&self) -> bool {
        self.history.is_ready()
    }

    pub fn state(&self, k: usize, n: usize) -> Result<AgentState> {
        build_state(k, n, &self.history, &self.budget)
    }

    /// States of every agent in k-major, n-minor order.
    pub fn states(&self) -> Result<Vec<AgentState>> {
        (0..self.agents())
            .map(|s| {
                let (k, n) = self.budget.owner(s);
                self.state(k, n)
            })
            .collect()
    }

    /// Resolves codebook actions into beams.
    pub fn assignment_for(&self, actions: &[usize]) -> Result<(BeamAssignment, Vec<(usize, usize)>)> {
        if actions.len() != self.agents() {
            return Err(Error::Incomplete(format!("{} actions for {} agents", actions.len(), self.agents())));
        }
        let space = self.codebooks.space();
        let mut beams = Vec::with_capacity(actions.len());
        let mut indices = Vec::with_capacity(actions.len());
        for &a in actions {
            let (u, v) = space.split(a)?;
            beams.push(Beam { precoder: self.codebooks.tx.codeword(u), combiner: self.codebooks.rx.codeword(v) });
            indices.push((u, v));
        }
        Ok((BeamAssignment::new(self.budget.users, self.budget.streams_per_user, beams)?, indices))
    }

    /// Transmits one slot with codebook actions.
    pub fn step(&mut self, actions: &[usize]) -> Result<StepOutcome> {
        let (assignment, indices) = self.assignment_for(actions)?;
        self.step_with(assignment, indices)
    }

    /// Transmits one slot with arbitrary beams; `indices` are the codebook
    /// indices reported in later states.
    pub fn step_with(&mut self, assignment: BeamAssignment, indices: Vec<(usize, usize)>) -> Result<StepOutcome> {
        if indices.len() != self.agents() {
            return Err(Error::Incomplete(format!("{} index pairs for {} agents", indices.len(), self.agents())));
        }
        let channel = self.channel.advance()?.clone();
        self.finish_slot(channel, assignment, indices)
    }

    /// Advances the channel, then lets `choose` pick beams knowing the new
    /// channel and the previous one. Used by genie and stale-CSI baselines.
    /// If `choose` fails the slot is lost: the channel has still moved on.
    pub fn step_informed<F>(&mut self, choose: F) -> Result<StepOutcome>
    where
        F: FnOnce(&ChannelRealization, &ChannelRealization) -> Result<(BeamAssignment, Vec<(usize, usize)>)>,
    {
        let prev = self.channel.current().clone();
        let channel = self.channel.advance()?.clone();
        let (assignment, indices) = choose(&channel, &prev)?;
        if indices.len() != self.agents() {
            return Err(Error::Incomplete(format!("{} index pairs for {} agents", indices.len(), self.agents())));
        }
        self.finish_slot(channel, assignment, indices)
    }

    fn finish_slot(
        &mut self,
        channel: ChannelRealization,
        assignment: BeamAssignment,
        indices: Vec<(usize, usize)>,
    ) -> Result<StepOutcome> {
        let slot = channel.slot;
        let record = self.history.push(channel, assignment, indices, &self.budget)?;
        let rewards =
            (0..self.budget.total_streams()).map(|s| reward_from_gains(&record.gains, s, self.lambda)).collect();
        let report = record.report.clone();
        let next_states = if self.history.is_ready() { Some(self.states()?) } else { None };
        Ok(StepOutcome { slot, rewards, report, next_states })
    }

    /// Redraws every user's geometry, shadowing and gains and discards the
    /// feedback history. Learned weights are the caller's business.
    pub fn reschedule(&mut self) -> Result<()> {
        self.channel.reschedule()?;
        self.history.clear();
        Ok(())
    }
}
