use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{Topology, TrainerConfig};
use crate::baselines::BaselineKind;
use crate::channel::{jakes_rho, ChannelParams};
use crate::codebook::BeamCodebooks;
use crate::dqn::{LrDecay, Schedules};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::metrics::{dbm_to_watts, LinkBudget};

/// A transmission strategy evaluated by the harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Ddrl,
    Cdrl,
    Pdrl,
    ZfPcsi,
    Sah,
    Random,
    Greedy,
}

impl Policy {
    pub const ALL: [Policy; 7] =
        [Policy::Ddrl, Policy::Cdrl, Policy::Pdrl, Policy::ZfPcsi, Policy::Sah, Policy::Random, Policy::Greedy];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Ddrl => "ddrl",
            Policy::Cdrl => "cdrl",
            Policy::Pdrl => "pdrl",
            Policy::ZfPcsi => "zf_pcsi",
            Policy::Sah => "sah",
            Policy::Random => "random",
            Policy::Greedy => "greedy",
        }
    }

    pub fn topology(self) -> Option<Topology> {
        match self {
            Policy::Ddrl => Some(Topology::PerStream),
            Policy::Cdrl => Some(Topology::Central),
            Policy::Pdrl => Some(Topology::PerUser),
            _ => None,
        }
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            Policy::ZfPcsi => Some(BaselineKind::ZfPcsi),
            Policy::Sah => Some(BaselineKind::Sah),
            Policy::Random => Some(BaselineKind::Random),
            Policy::Greedy => Some(BaselineKind::Greedy),
            _ => None,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| Error::Config(format!("unknown policy `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub users: usize,
    pub streams_per_user: usize,
    pub paths: usize,
    pub power_dbm: f64,
    pub noise_dbm: f64,
    pub distance_m: f64,
    pub reference_distance_m: f64,
    pub reference_loss_db: f64,
    pub path_loss_exponent: f64,
    pub shadowing_std_db: f64,
    pub doppler_hz: f64,
    pub slot_duration_s: f64,
    /// Temporal correlation used unless `rho_from_jakes` is set.
    pub rho: f64,
    pub rho_from_jakes: bool,
    pub spread_aoa_deg: f64,
    pub spread_aod_deg: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            tx_antennas: 32,
            rx_antennas: 4,
            users: 4,
            streams_per_user: 2,
            paths: 20,
            power_dbm: 20.0,
            noise_dbm: -114.0,
            distance_m: 10.0,
            reference_distance_m: 1.0,
            reference_loss_db: 68.0,
            path_loss_exponent: 1.7,
            shadowing_std_db: 1.8,
            doppler_hz: 800.0,
            slot_duration_s: 1e-3,
            rho: 0.6514,
            rho_from_jakes: false,
            spread_aoa_deg: 10.0,
            spread_aod_deg: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodebookConfig {
    pub tx_codewords: usize,
    pub rx_codewords: usize,
    pub phases: usize,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        Self { tx_codewords: 32, rx_codewords: 4, phases: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    pub hidden: Vec<usize>,
    pub replay_capacity: usize,
    pub warmup_slots: u64,
    pub batch_size: usize,
    pub sync_every_steps: u64,
    pub gamma: f64,
    pub penalty_weight: f64,
    pub eps_start: f64,
    pub eps_min: f64,
    pub eps_decay_per_slot: f64,
    pub lr_start: f64,
    pub lr_decay: f64,
    pub lr_schedule: LrDecay,
    pub updates_per_slot: usize,
    pub normalize_state: bool,
}

impl Default for LearningConfig {
    fn default() -> Self {
        let t = TrainerConfig::default();
        let s = t.schedules;
        Self {
            hidden: t.hidden,
            replay_capacity: t.replay_capacity,
            warmup_slots: t.warmup_slots,
            batch_size: t.batch_size,
            sync_every_steps: t.sync_every,
            gamma: t.gamma,
            penalty_weight: 1.0,
            eps_start: s.eps_start,
            eps_min: s.eps_min,
            eps_decay_per_slot: s.eps_decay,
            lr_start: s.lr_start,
            lr_decay: s.lr_decay,
            lr_schedule: s.lr_law,
            updates_per_slot: t.updates_per_slot,
            normalize_state: t.normalize_state,
        }
    }
}

/// Everything one experiment needs. Empty TOML gives the full-scale setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub slots: u64,
    /// Slots before which every user's geometry is redrawn.
    pub reschedule_slots: Vec<u64>,
    pub moving_average_window: usize,
    pub policies: Vec<Policy>,
    pub system: SystemConfig,
    pub codebook: CodebookConfig,
    pub learning: LearningConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1],
            slots: 20_000,
            reschedule_slots: Vec::new(),
            moving_average_window: 500,
            policies: vec![Policy::Ddrl, Policy::Cdrl, Policy::ZfPcsi, Policy::Sah, Policy::Random],
            system: SystemConfig::default(),
            codebook: CodebookConfig::default(),
            learning: LearningConfig::default(),
        }
    }
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::Config(format!("{name}: must be positive")));
    }
    Ok(())
}

fn finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::Config(format!("{name}: must be finite, got {v}")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Small setup for quick runs: 8x2 antennas, two single-stream users,
    /// an 8x2 codebook. Training uses a smaller step size with inverse-time
    /// decay; the full-scale recurrence stops learning within a few hundred
    /// slots.
    pub fn desk() -> Self {
        Self {
            policies: vec![Policy::Ddrl, Policy::Greedy, Policy::Sah, Policy::Random],
            system: SystemConfig {
                tx_antennas: 8,
                rx_antennas: 2,
                users: 2,
                streams_per_user: 1,
                rho: 0.65,
                ..SystemConfig::default()
            },
            codebook: CodebookConfig { tx_codewords: 8, rx_codewords: 2, phases: 4 },
            learning: LearningConfig { lr_start: 2e-4, lr_schedule: LrDecay::InverseTime, ..LearningConfig::default() },
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        positive("system.tx_antennas", s.tx_antennas)?;
        positive("system.rx_antennas", s.rx_antennas)?;
        positive("system.users", s.users)?;
        positive("system.streams_per_user", s.streams_per_user)?;
        positive("system.paths", s.paths)?;
        if s.tx_antennas < s.users * s.streams_per_user {
            return Err(Error::Config(format!(
                "system.tx_antennas: {} antennas cannot serve {} users x {} streams",
                s.tx_antennas, s.users, s.streams_per_user
            )));
        }
        if s.rx_antennas < s.streams_per_user {
            return Err(Error::Config(format!(
                "system.rx_antennas: {} antennas cannot receive {} streams",
                s.rx_antennas, s.streams_per_user
            )));
        }
        for (name, v) in [
            ("system.power_dbm", s.power_dbm),
            ("system.noise_dbm", s.noise_dbm),
            ("system.reference_loss_db", s.reference_loss_db),
            ("system.path_loss_exponent", s.path_loss_exponent),
        ] {
            finite(name, v)?;
        }
        for (name, v) in [("system.distance_m", s.distance_m), ("system.reference_distance_m", s.reference_distance_m)]
        {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name}: must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("system.shadowing_std_db", s.shadowing_std_db),
            ("system.spread_aoa_deg", s.spread_aoa_deg),
            ("system.spread_aod_deg", s.spread_aod_deg),
            ("system.doppler_hz", s.doppler_hz),
            ("system.slot_duration_s", s.slot_duration_s),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name}: must be >= 0, got {v}")));
            }
        }
        if !(-1.0..=1.0).contains(&s.rho) {
            return Err(Error::Config(format!("system.rho: must lie in [-1, 1], got {}", s.rho)));
        }
        let c = &self.codebook;
        positive("codebook.tx_codewords", c.tx_codewords)?;
        positive("codebook.rx_codewords", c.rx_codewords)?;
        positive("codebook.phases", c.phases)?;
        positive("moving_average_window", self.moving_average_window)?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds: at least one seed is required".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("policies: at least one policy is required".into()));
        }
        if self.policies.contains(&Policy::Greedy)
            && c.tx_codewords * c.rx_codewords > crate::baselines::GREEDY_MAX_ACTIONS
        {
            return Err(Error::Config(format!(
                "policies: greedy search over {} actions exceeds {}",
                c.tx_codewords * c.rx_codewords,
                crate::baselines::GREEDY_MAX_ACTIONS
            )));
        }
        if let Err(e) = self.trainer_config(Topology::PerStream).validate() {
            let msg = match e {
                Error::Config(m) => m,
                other => other.to_string(),
            };
            return Err(Error::Config(format!("learning: {msg}")));
        }
        if !(self.learning.penalty_weight >= 0.0) {
            return Err(Error::Config("learning.penalty_weight: must be >= 0".into()));
        }
        self.rho()?;
        Ok(())
    }

    /// The correlation actually used by the channel.
    pub fn rho(&self) -> Result<f64> {
        if self.system.rho_from_jakes {
            jakes_rho(self.system.doppler_hz, self.system.slot_duration_s)
                .map_err(|e| Error::Config(format!("system.doppler_hz: {e}")))
        } else {
            Ok(self.system.rho)
        }
    }

    pub fn budget(&self) -> Result<LinkBudget> {
        let s = &self.system;
        LinkBudget::new(dbm_to_watts(s.power_dbm), dbm_to_watts(s.noise_dbm), s.users, s.streams_per_user)
    }

    pub fn channel_params(&self) -> Result<ChannelParams> {
        let s = &self.system;
        Ok(ChannelParams {
            tx_antennas: s.tx_antennas,
            rx_antennas: s.rx_antennas,
            users: s.users,
            paths: s.paths,
            rho: self.rho()?,
            distance_m: s.distance_m,
            reference_distance_m: s.reference_distance_m,
            reference_loss_db: s.reference_loss_db,
            path_loss_exponent: s.path_loss_exponent,
            shadowing_std_db: s.shadowing_std_db,
            spread_aoa: s.spread_aoa_deg.to_radians(),
            spread_aod: s.spread_aod_deg.to_radians(),
        })
    }

    pub fn codebooks(&self) -> Result<BeamCodebooks> {
        let c = &self.codebook;
        BeamCodebooks::new(self.system.tx_antennas, self.system.rx_antennas, c.tx_codewords, c.rx_codewords, c.phases)
    }

    pub fn env_config(&self) -> Result<EnvConfig> {
        Ok(EnvConfig {
            channel: self.channel_params()?,
            budget: self.budget()?,
            codebooks: self.codebooks()?,
            lambda: self.learning.penalty_weight,
        })
    }

    pub fn trainer_config(&self, topology: Topology) -> TrainerConfig {
        let l = &self.learning;
        TrainerConfig {
            topology,
            hidden: l.hidden.clone(),
            replay_capacity: l.replay_capacity,
            warmup_slots: l.warmup_slots,
            batch_size: l.batch_size,
            sync_every: l.sync_every_steps,
            gamma: l.gamma,
            schedules: Schedules {
                eps_start: l.eps_start,
                eps_min: l.eps_min,
                eps_decay: l.eps_decay_per_slot,
                lr_start: l.lr_start,
                lr_decay: l.lr_decay,
                lr_law: l.lr_schedule,
            },
            updates_per_slot: l.updates_per_slot,
            normalize_state: l.normalize_state,
        }
    }
}

/// Reads and validates a TOML experiment file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn save_config(config: &ExperimentConfig, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, config.to_toml()?)?;
    Ok(())
}
