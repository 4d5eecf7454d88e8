//! Multi-agent deep Q-learning beam selection for multi-user massive-MIMO
//! downlink under channel aging.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: complex matrices, J0, seeded random substreams.
//! * [`channel`]: aged multipath channel with Gauss-Markov path gains.
//! * [`codebook`]: beamsteering codebooks and the joint action space.
//! * [`metrics`]: received power, interference, SINR and rates.
//! * [`env`]: delayed-feedback MDP with states, penalties and rewards.
//! * [`dqn`]: multilayer perceptron, Adam, replay buffer, schedules.
//! * [`agents`]: per-stream, central and per-user training topologies.
//! * [`baselines`]: zero-forcing, sample-and-hold, greedy and random.
//! * [`harness`]: configuration, experiment runs, statistics and CSV.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod baselines;
pub mod channel;
pub mod codebook;
pub mod dqn;
pub mod env;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod numerics;

pub use error::{Error, Result};
