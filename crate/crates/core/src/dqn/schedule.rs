use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning-rate decay law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrDecay {
    /// `a(t) = a(t-1) / (1 + d t)`.
    Recurrence,
    /// `a(t) = a0 / (1 + d t)`.
    InverseTime,
    Constant,
}

/// Exploration and learning-rate schedules over the slot counter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedules {
    pub eps_start: f64,
    pub eps_min: f64,
    pub eps_decay: f64,
    pub lr_start: f64,
    pub lr_decay: f64,
    pub lr_law: LrDecay,
}

impl Default for Schedules {
    fn default() -> Self {
        Self {
            eps_start: 0.7,
            eps_min: 0.001,
            eps_decay: 1e-4,
            lr_start: 5e-3,
            lr_decay: 1e-4,
            lr_law: LrDecay::Recurrence,
        }
    }
}

impl Schedules {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=self.eps_start).contains(&self.eps_min) {
            return Err(Error::Config(format!(
                "need 0 <= eps_min <= eps_start <= 1, got {} and {}",
                self.eps_min, self.eps_start
            )));
        }
        if !(self.eps_decay >= 0.0) || !(self.lr_decay >= 0.0) {
            return Err(Error::Config("decay rates must be >= 0".into()));
        }
        if !(self.lr_start > 0.0) || !self.lr_start.is_finite() {
            return Err(Error::Config(format!("initial learning rate must be positive, got {}", self.lr_start)));
        }
        Ok(())
    }

    /// `max(eps_min, eps_start exp(-eps_decay t))`.
    pub fn epsilon(&self, t: u64) -> f64 {
        (self.eps_start * (-self.eps_decay * t as f64).exp()).max(self.eps_min)
    }

    /// Learning rate at slot `t`, evaluated from scratch.
    pub fn learning_rate(&self, t: u64) -> f64 {
        let mut lr = self.lr_start;
        match self.lr_law {
            LrDecay::Recurrence => {
                for i in 1..=t {
                    lr = self.next_learning_rate(lr, i);
                }
            }
            LrDecay::InverseTime => lr = self.lr_start / (1.0 + self.lr_decay * t as f64),
            LrDecay::Constant => {}
        }
        lr
    }

    /// Learning rate at slot `t` given the value at `t - 1`.
    pub fn next_learning_rate(&self, prev: f64, t: u64) -> f64 {
        match self.lr_law {
            LrDecay::Recurrence => prev / (1.0 + self.lr_decay * t as f64),
            LrDecay::InverseTime => self.lr_start / (1.0 + self.lr_decay * t as f64),
            LrDecay::Constant => self.lr_start,
        }
    }

    pub fn values(&self, t: u64) -> (f64, f64) {
        (self.epsilon(t), self.learning_rate(t))
    }
}
