//! Multi-agent training topologies.
//!
//! Every stream `(k, n)` is an agent that observes its own state and picks a
//! joint precoder/combiner action. The topologies differ only in who owns the
//! trained network and replay pool an agent acts with and feeds:
//!
//! * [`Topology::PerStream`] one pair and pool per stream,
//! * [`Topology::Central`] one pair and pool shared by all streams,
//! * [`Topology::PerUser`] one pair and pool per user, shared by its streams.
//!
//! Owners are numbered so that topologies which coincide (one stream per
//! user, or a single user) also draw identical random numbers.

use serde::{Deserialize, Serialize};

use crate::dqn::{act, argmax, Batch, Experience, Mlp, QNetworkPair, ReplayBuffer, Schedules};
use crate::env::{Env, StateEncoder};
use crate::error::{Error, Result};
use crate::numerics::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    PerStream,
    Central,
    PerUser,
}

impl Topology {
    pub fn name(self) -> &'static str {
        match self {
            Topology::PerStream => "ddrl",
            Topology::Central => "cdrl",
            Topology::PerUser => "pdrl",
        }
    }

    pub fn owners(self, users: usize, streams_per_user: usize) -> usize {
        match self {
            Topology::PerStream => users * streams_per_user,
            Topology::Central => 1,
            Topology::PerUser => users,
        }
    }

    /// Owner of stream index `s`.
    pub fn owner_of(self, s: usize, streams_per_user: usize) -> usize {
        match self {
            Topology::PerStream => s,
            Topology::Central => 0,
            Topology::PerUser => s / streams_per_user,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
    pub topology: Topology,
    pub hidden: Vec<usize>,
    pub replay_capacity: usize,
    /// Slots of random exploration before the first gradient step.
    pub warmup_slots: u64,
    pub batch_size: usize,
    pub sync_every: u64,
    pub gamma: f64,
    pub schedules: Schedules,
    pub updates_per_slot: usize,
    /// Compress states before they reach the networks.
    pub normalize_state: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            topology: Topology::PerStream,
            hidden: vec![256, 256],
            replay_capacity: 1000,
            warmup_slots: 200,
            batch_size: 32,
            sync_every: 120,
            gamma: 0.1,
            schedules: Schedules::default(),
            updates_per_slot: 1,
            normalize_state: true,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        if self.batch_size == 0 || self.batch_size > self.replay_capacity {
            return Err(Error::Config(format!(
                "minibatch size {} must be in 1..={}",
                self.batch_size, self.replay_capacity
            )));
        }
        if self.sync_every == 0 || self.updates_per_slot == 0 {
            return Err(Error::Config("sync period and updates per slot must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("discount {} outside [0, 1]", self.gamma)));
        }
        self.schedules.validate()
    }
}

/// One slot of training.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotLog {
    pub slot: u64,
    pub rewards: Vec<f64>,
    pub penalties: Vec<f64>,
    pub per_user: Vec<f64>,
    pub average: f64,
    pub epsilon: f64,
    pub lr: f64,
    /// Gradient steps taken in this slot, over all owners.
    pub updates: usize,
}

#[derive(Clone, Debug)]
struct Owner {
    pair: QNetworkPair,
    pool: ReplayBuffer,
    rng: RngStream,
}

/// Drives one environment with one topology.
#[derive(Clone, Debug)]
pub struct Trainer {
    config: TrainerConfig,
    env: Env,
    encoder: StateEncoder,
    owners: Vec<Owner>,
    act_rngs: Vec<RngStream>,
    /// Encoded states for the coming slot, when the history allows.
    states: Option<Vec<Vec<f64>>>,
    slot: u64,
    lr: f64,
}

impl Trainer {
    pub fn new(env: Env, config: TrainerConfig, rng: &RngStream) -> Result<Self> {
        config.validate()?;
        let budget = *env.budget();
        let space = env.codebooks().space();
        let encoder = StateEncoder::new(&budget, space.s_t, space.s_r, config.normalize_state);
        let mut dims = vec![env.state_dim()];
        dims.extend(&config.hidden);
        dims.push(space.size());
        let owners = (0..config.topology.owners(budget.users, budget.streams_per_user))
            .map(|i| {
                let net = Mlp::xavier(&dims, &mut rng.substream(&format!("net-{i}")))?;
                Ok(Owner {
                    pair: QNetworkPair::new(net, config.sync_every)?,
                    pool: ReplayBuffer::new(config.replay_capacity)?,
                    rng: rng.substream(&format!("owner-{i}")),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let act_rngs = (0..env.agents()).map(|s| rng.substream(&format!("act-{s}"))).collect();
        let lr = config.schedules.lr_start;
        Ok(Self { config, env, encoder, owners, act_rngs, states: None, slot: 0, lr })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn topology(&self) -> Topology {
        self.config.topology
    }

    pub fn owner_of(&self, s: usize) -> usize {
        self.config.topology.owner_of(s, self.env.budget().streams_per_user)
    }

    pub fn num_owners(&self) -> usize {
        self.owners.len()
    }

    /// The network agent `s` acts with.
    pub fn inference_net(&self, s: usize) -> &Mlp {
        &self.owners[self.owner_of(s)].pair.online
    }

    pub fn pair(&self, owner: usize) -> &QNetworkPair {
        &self.owners[owner].pair
    }

    pub fn pool(&self, owner: usize) -> &ReplayBuffer {
        &self.owners[owner].pool
    }

    pub fn total_updates(&self) -> u64 {
        self.owners.iter().map(|o| o.pair.updates()).sum()
    }

    /// Slots completed so far.
    pub fn slot(&self) -> u64 {
        self.slot
    }

    fn learning(&self) -> bool {
        self.slot >= self.config.warmup_slots
    }

    /// Learning-phase slot counter that drives the schedules.
    fn phase_slot(&self) -> u64 {
        self.slot - self.config.warmup_slots
    }

    /// Current exploration rate.
    pub fn epsilon(&self) -> f64 {
        if self.learning() {
            self.config.schedules.epsilon(self.phase_slot())
        } else {
            1.0
        }
    }

    /// Actions every agent would take with exploration off. Draws no random
    /// numbers and does not advance the environment.
    pub fn greedy_actions(&self) -> Result<Vec<usize>> {
        let states =
            self.states.as_ref().ok_or_else(|| Error::NotReady("no states since the last (re)schedule".into()))?;
        states.iter().enumerate().map(|(s, state)| Ok(argmax(&self.inference_net(s).forward(state)?))).collect()
    }

    /// Runs one slot: act, transmit, store, learn.
    pub fn step(&mut self) -> Result<SlotLog> {
        let eps = self.epsilon();
        let size = self.env.codebooks().space().size();
        let mut actions = Vec::with_capacity(self.env.agents());
        for s in 0..self.env.agents() {
            let a = match &self.states {
                Some(states) if self.learning() => {
                    let net = &self.owners[self.owner_of(s)].pair.online;
                    act(net, &states[s], eps, &mut self.act_rngs[s])?
                }
                _ => self.act_rngs[s].below(size),
            };
            actions.push(a);
        }

        let outcome = self.env.step(&actions)?;
        let next = outcome.next_states.as_ref().map(|raw| raw.iter().map(|x| self.encoder.encode(x)).collect::<Vec<_>>());
        if let (Some(states), Some(next_states)) = (self.states.take(), next.as_ref()) {
            for (s, (state, next_state)) in states.into_iter().zip(next_states).enumerate() {
                let owner = self.owner_of(s);
                self.owners[owner].pool.push(Experience {
                    state,
                    action: actions[s],
                    reward: outcome.rewards[s].reward,
                    next_state: next_state.clone(),
                });
            }
        }
        self.states = next;

        let mut updates = 0;
        let lr = self.lr;
        if self.learning() {
            let cfg = &self.config;
            for owner in &mut self.owners {
                if owner.pool.len() < cfg.batch_size {
                    continue;
                }
                for _ in 0..cfg.updates_per_slot {
                    let batch = Batch::from_experiences(&owner.pool.sample(cfg.batch_size, &mut owner.rng)?)?;
                    owner.pair.train(&batch, cfg.gamma, lr)?;
                    updates += 1;
                }
            }
            self.lr = self.config.schedules.next_learning_rate(self.lr, self.phase_slot() + 1);
        }

        let log = SlotLog {
            slot: outcome.slot,
            rewards: outcome.rewards.iter().map(|r| r.reward).collect(),
            penalties: outcome.rewards.iter().map(|r| r.penalty).collect(),
            per_user: outcome.report.per_user.clone(),
            average: outcome.report.average,
            epsilon: eps,
            lr: if self.learning() { lr } else { 0.0 },
            updates,
        };
        self.slot += 1;
        Ok(log)
    }

    pub fn run(&mut self, slots: u64) -> Result<Vec<SlotLog>> {
        (0..slots).map(|_| self.step()).collect()
    }

    /// New geometry for every user; networks, pools and schedules carry on.
    pub fn reschedule(&mut self) -> Result<()> {
        self.env.reschedule()?;
        self.states = None;
        Ok(())
    }
}

fn run_topology(
    env: Env,
    mut config: TrainerConfig,
    topology: Topology,
    rng: &RngStream,
    slots: u64,
) -> Result<Vec<SlotLog>> {
    config.topology = topology;
    Trainer::new(env, config, rng)?.run(slots)
}

/// Per-stream networks and pools.
pub fn run_ddrl(env: Env, config: TrainerConfig, rng: &RngStream, slots: u64) -> Result<Vec<SlotLog>> {
    run_topology(env, config, Topology::PerStream, rng, slots)
}

/// One central network and pool; every agent acts with the central weights.
pub fn run_cdrl(env: Env, config: TrainerConfig, rng: &RngStream, slots: u64) -> Result<Vec<SlotLog>> {
    run_topology(env, config, Topology::Central, rng, slots)
}

/// One network and pool per user, shared by its streams.
pub fn run_pdrl(env: Env, config: TrainerConfig, rng: &RngStream, slots: u64) -> Result<Vec<SlotLog>> {
    run_topology(env, config, Topology::PerUser, rng, slots)
}
