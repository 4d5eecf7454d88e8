#![allow(dead_code)]

use mimo_drl::baselines::random_actions;
use mimo_drl::channel::ChannelRealization;
use mimo_drl::env::Env;
use mimo_drl::harness::{build_env, ExperimentConfig};
use mimo_drl::metrics::{rate_report, BeamAssignment, LinkBudget};
use mimo_drl::numerics::{CMatrix, RngStream};

/// Small system with the given shape and a 4x2 codebook.
pub fn small_config(tx: usize, rx: usize, users: usize, streams: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk();
    cfg.system.tx_antennas = tx;
    cfg.system.rx_antennas = rx;
    cfg.system.users = users;
    cfg.system.streams_per_user = streams;
    cfg.codebook.tx_codewords = 4;
    cfg.codebook.rx_codewords = 2.min(rx.max(1));
    cfg
}

/// Env advanced `slots` slots with random codebook actions.
pub fn random_walk(cfg: &ExperimentConfig, seed: u64, slots: usize) -> Env {
    let mut env = build_env(cfg, seed).expect("env");
    let mut rng = RngStream::new(seed, "test/walk");
    for _ in 0..slots {
        let a = random_actions(&mut rng, env.codebooks(), env.agents());
        env.step(&a).expect("step");
    }
    env
}

/// Penalty by brute force: switch the source precoder off and recompute
/// every other stream's rate from scratch.
pub fn zero_out_penalty(
    assignment: &BeamAssignment,
    channels: &ChannelRealization,
    budget: &LinkBudget,
    source: usize,
) -> f64 {
    let with = rate_report(assignment, channels, budget).expect("rates").per_stream;
    let mut silenced = assignment.clone();
    let p = &mut silenced.beams_mut()[source].precoder;
    *p = CMatrix::zeros(p.rows(), p.cols());
    let without = rate_report(&silenced, channels, budget).expect("rates").per_stream;
    (0..with.len()).filter(|&v| v != source).map(|v| without[v] - with[v]).sum()
}
