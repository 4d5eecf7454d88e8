use crate::agents::Trainer;
use crate::baselines::{greedy_beam_selection, random_actions, sah, zf_pcsi};
use crate::env::{Env, StepOutcome};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Policy};
use crate::harness::stats::moving_average;
use crate::numerics::RngStream;

/// One slot of one policy.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRow {
    pub seed: u64,
    pub policy: Policy,
    /// Zero-based slot within the run.
    pub slot: u64,
    /// Number of reschedules so far.
    pub epoch: u32,
    /// The policy could not act (singular zero-forcing problem).
    pub singular: bool,
    pub average_rate: f64,
    pub user_rates: Vec<f64>,
    pub rewards: Vec<f64>,
    pub penalties: Vec<f64>,
    pub epsilon: Option<f64>,
    pub lr: Option<f64>,
    /// Greedy only: average rate after the first coordinate sweep.
    pub greedy_one_pass: Option<f64>,
}

/// Rows of a whole experiment with the widths needed for a fixed header.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub users: usize,
    pub streams: usize,
    pub rows: Vec<RunRow>,
}

impl RunRecord {
    pub fn new(users: usize, streams: usize) -> Self {
        Self { users, streams, rows: Vec::new() }
    }

    /// Rows of one `(seed, policy)` run, in slot order.
    pub fn series(&self, seed: u64, policy: Policy) -> impl Iterator<Item = &RunRow> {
        self.rows.iter().filter(move |r| r.seed == seed && r.policy == policy)
    }

    /// Distinct `(seed, policy)` pairs in first-appearance order.
    pub fn runs(&self) -> Vec<(u64, Policy)> {
        let mut out: Vec<(u64, Policy)> = Vec::new();
        for r in &self.rows {
            if !out.contains(&(r.seed, r.policy)) {
                out.push((r.seed, r.policy));
            }
        }
        out
    }

    pub fn summaries(&self, window: usize) -> Vec<RunSummary> {
        self.runs()
            .into_iter()
            .map(|(seed, policy)| {
                let rows: Vec<&RunRow> = self.series(seed, policy).collect();
                let rates: Vec<f64> = rows.iter().map(|r| r.average_rate).collect();
                RunSummary {
                    seed,
                    policy,
                    slots: rows.len(),
                    singular_slots: rows.iter().filter(|r| r.singular).count(),
                    mean_rate: rates.iter().sum::<f64>() / rates.len() as f64,
                    final_moving_average: moving_average(&rates, window).last().copied().unwrap_or(0.0),
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub policy: Policy,
    pub slots: usize,
    pub singular_slots: usize,
    pub mean_rate: f64,
    pub final_moving_average: f64,
}

impl RunSummary {
    pub fn all_singular(&self) -> bool {
        self.slots > 0 && self.singular_slots == self.slots
    }
}

/// Environment for `seed`. Every policy gets its own copy built from the
/// same seed; the channel never depends on actions, so all of them see the
/// same channel sequence.
pub fn build_env(config: &ExperimentConfig, seed: u64) -> Result<Env> {
    Env::new(config.env_config()?, &RngStream::new(seed, "env"))
}

fn outcome_row(seed: u64, policy: Policy, slot: u64, epoch: u32, out: &StepOutcome) -> RunRow {
    RunRow {
        seed,
        policy,
        slot,
        epoch,
        singular: false,
        average_rate: out.report.average,
        user_rates: out.report.per_user.clone(),
        rewards: out.rewards.iter().map(|r| r.reward).collect(),
        penalties: out.rewards.iter().map(|r| r.penalty).collect(),
        epsilon: None,
        lr: None,
        greedy_one_pass: None,
    }
}

/// Runs one policy for one seed.
pub fn run_policy(config: &ExperimentConfig, seed: u64, policy: Policy) -> Result<Vec<RunRow>> {
    let env = build_env(config, seed)?;
    let users = config.system.users;
    let streams = users * config.system.streams_per_user;
    let mut rows = Vec::with_capacity(config.slots as usize);
    let reschedule_at = |t: u64| t > 0 && config.reschedule_slots.contains(&t);

    if let Some(topology) = policy.topology() {
        let mut trainer = Trainer::new(env, config.trainer_config(topology), &RngStream::new(seed, "agents"))?;
        for t in 0..config.slots {
            if reschedule_at(t) {
                trainer.reschedule()?;
            }
            let log = trainer.step()?;
            rows.push(RunRow {
                seed,
                policy,
                slot: t,
                epoch: trainer.env().channel().epoch(),
                singular: false,
                average_rate: log.average,
                user_rates: log.per_user,
                rewards: log.rewards,
                penalties: log.penalties,
                epsilon: Some(log.epsilon),
                lr: Some(log.lr),
                greedy_one_pass: None,
            });
        }
        return Ok(rows);
    }

    let mut env = env;
    let budget = *env.budget();
    let codebooks = env.codebooks().clone();
    let mut rng = RngStream::new(seed, "policy/random");
    let no_indices = vec![(0, 0); streams];
    for t in 0..config.slots {
        if reschedule_at(t) {
            env.reschedule()?;
        }
        let mut one_pass = None;
        let outcome = match policy {
            Policy::Random => {
                let actions = random_actions(&mut rng, &codebooks, streams);
                env.step(&actions)
            }
            Policy::ZfPcsi => env.step_informed(|now, _| Ok((zf_pcsi(now, &budget)?, no_indices.clone()))),
            Policy::Sah => env.step_informed(|_, prev| Ok((sah(prev, &budget)?, no_indices.clone()))),
            Policy::Greedy => env.step_informed(|now, _| {
                let g = greedy_beam_selection(now, &codebooks, &budget)?;
                one_pass = Some(g.one_pass_sum_rate / users as f64);
                let space = codebooks.space();
                let indices = g.actions.iter().map(|&a| space.split(a)).collect::<Result<Vec<_>>>()?;
                Ok((g.assignment, indices))
            }),
            Policy::Ddrl | Policy::Cdrl | Policy::Pdrl => unreachable!("learning policies handled above"),
        };
        let epoch = env.channel().epoch();
        match outcome {
            Ok(out) => {
                let mut row = outcome_row(seed, policy, t, epoch, &out);
                row.greedy_one_pass = one_pass;
                rows.push(row);
            }
            Err(Error::Singular(_)) => rows.push(RunRow {
                seed,
                policy,
                slot: t,
                epoch,
                singular: true,
                average_rate: 0.0,
                user_rates: vec![0.0; users],
                rewards: vec![0.0; streams],
                penalties: vec![0.0; streams],
                epsilon: None,
                lr: None,
                greedy_one_pass: None,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

/// Runs every configured policy for every seed. With `parallel`, the
/// `(seed, policy)` jobs run on separate threads; results are merged in the
/// same order either way, so the output does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig, parallel: bool) -> Result<RunRecord> {
    config.validate()?;
    let jobs: Vec<(u64, Policy)> =
        config.seeds.iter().flat_map(|&s| config.policies.iter().map(move |&p| (s, p))).collect();
    let results: Vec<Result<Vec<RunRow>>> = if parallel && jobs.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> =
                jobs.iter().map(|&(seed, policy)| scope.spawn(move || run_policy(config, seed, policy))).collect();
            handles.into_iter().map(|h| h.join().expect("experiment job panicked")).collect()
        })
    } else {
        jobs.iter().map(|&(seed, policy)| run_policy(config, seed, policy)).collect()
    };
    let mut record = RunRecord::new(config.system.users, config.system.users * config.system.streams_per_user);
    for rows in results {
        record.rows.extend(rows?);
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::desk();
        cfg.slots = 60;
        cfg.learning.hidden = vec![16, 16];
        cfg.learning.warmup_slots = 20;
        cfg.learning.batch_size = 8;
        cfg.moving_average_window = 10;
        cfg
    }

    #[test]
    fn random_rows() {
        let cfg = ExperimentConfig { slots: 10, policies: vec![Policy::Random], ..tiny() };
        let rec = run_experiment(&cfg, false).unwrap();
        assert_eq!(rec.rows.len(), 10);
        assert!(rec.rows.iter().all(|r| r.average_rate >= 0.0 && r.user_rates.iter().all(|&u| u >= 0.0)));
        assert_eq!(rec.rows.iter().map(|r| r.slot).collect::<Vec<_>>(), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn policies_share_channels() {
        let cfg = tiny();
        let mut a = build_env(&cfg, 3).unwrap();
        let mut b = build_env(&cfg, 3).unwrap();
        for t in 0..30 {
            a.step(&[t % 16, 3]).unwrap();
            b.step_informed(|now, _| Ok((zf_pcsi(now, &b_budget(&cfg))?, vec![(0, 0); 2]))).unwrap();
            assert_eq!(a.current_channel(), b.current_channel());
        }
    }

    fn b_budget(cfg: &ExperimentConfig) -> crate::metrics::LinkBudget {
        cfg.budget().unwrap()
    }

    #[test]
    fn reschedule_changes_geometry_there() {
        let cfg =
            ExperimentConfig { reschedule_slots: vec![50], policies: vec![Policy::Random, Policy::Ddrl], ..tiny() };
        let rec = run_experiment(&cfg, false).unwrap();
        for p in [Policy::Random, Policy::Ddrl] {
            let epochs: Vec<u32> = rec.series(cfg.seeds[0], p).map(|r| r.epoch).collect();
            assert!(epochs[..50].iter().all(|&e| e == 0));
            assert!(epochs[50..].iter().all(|&e| e == 1));
        }
    }

    #[test]
    fn all_policies_run() {
        let cfg = ExperimentConfig { policies: Policy::ALL.to_vec(), seeds: vec![1, 2], ..tiny() };
        let rec = run_experiment(&cfg, false).unwrap();
        assert_eq!(rec.rows.len(), 2 * 7 * 60);
        let sums = rec.summaries(10);
        assert_eq!(sums.len(), 14);
        assert!(sums.iter().all(|s| s.slots == 60 && !s.all_singular()));
        let greedy: Vec<&RunRow> = rec.series(1, Policy::Greedy).collect();
        assert!(greedy.iter().all(|r| r.greedy_one_pass.unwrap() <= r.average_rate + 1e-12));
        let ddrl: Vec<&RunRow> = rec.series(1, Policy::Ddrl).collect();
        assert!(ddrl.iter().all(|r| r.epsilon.is_some() && r.lr.is_some()));
    }

    #[test]
    fn parallel_matches_sequential() {
        let cfg =
            ExperimentConfig { policies: vec![Policy::Ddrl, Policy::Random, Policy::Sah], seeds: vec![4, 5], ..tiny() };
        assert_eq!(run_experiment(&cfg, true).unwrap(), run_experiment(&cfg, false).unwrap());
    }

    #[test]
    fn singular_slots_are_recorded() {
        // A channel attenuated to exactly zero leaves nothing to invert.
        let mut cfg =
            ExperimentConfig { policies: vec![Policy::ZfPcsi, Policy::Sah, Policy::Random], slots: 5, ..tiny() };
        cfg.system.reference_loss_db = 5000.0;
        let rec = run_experiment(&cfg, false).unwrap();
        assert_eq!(rec.rows.len(), 15);
        let sums = rec.summaries(10);
        assert!(sums[0].all_singular() && sums[1].all_singular());
        assert!(!sums[2].all_singular());
        assert!(rec.rows.iter().all(|r| r.average_rate == 0.0));
    }
}
