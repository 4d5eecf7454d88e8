//! Deep Q-network core: network, optimizer, replay pool, schedules.

mod adam;
mod mlp;
mod replay;
mod schedule;

pub use adam::AdamState;
pub use mlp::{flatten, Gradients, Layer, Mlp};
pub use replay::{Experience, ReplayBuffer};
pub use schedule::{LrDecay, Schedules};

use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Index of the largest value, lowest index on ties.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy action. No random draw is made when `eps == 0`.
pub fn act(net: &Mlp, state: &[f64], eps: f64, rng: &mut RngStream) -> Result<usize> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Domain(format!("exploration rate {eps} outside [0, 1]")));
    }
    if eps > 0.0 && rng.uniform() < eps {
        return Ok(rng.below(net.output_dim()));
    }
    Ok(argmax(&net.forward(state)?))
}

/// A minibatch in matrix form.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_states: Array2<f64>,
}

impl Batch {
    pub fn from_experiences(items: &[&Experience]) -> Result<Self> {
        let Some(first) = items.first() else {
            return Err(Error::Shape("empty minibatch".into()));
        };
        let dim = first.state.len();
        let rows = |f: fn(&Experience) -> &Vec<f64>| -> Result<Array2<f64>> {
            let mut flat = Vec::with_capacity(items.len() * dim);
            for e in items {
                let v = f(e);
                if v.len() != dim {
                    return Err(Error::Shape(format!("experience state of length {} in a batch of {dim}", v.len())));
                }
                flat.extend_from_slice(v);
            }
            Ok(Array2::from_shape_vec((items.len(), dim), flat).expect("length checked"))
        };
        Ok(Self {
            states: rows(|e| &e.state)?,
            actions: items.iter().map(|e| e.action).collect(),
            rewards: items.iter().map(|e| e.reward).collect(),
            next_states: rows(|e| &e.next_state)?,
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// `r + gamma * max_a' q(s', a'; target)`.
pub fn td_targets(batch: &Batch, target: &Mlp, gamma: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Domain(format!("discount {gamma} outside [0, 1]")));
    }
    if gamma == 0.0 {
        return Ok(batch.rewards.clone());
    }
    let q_next = target.forward_batch(batch.next_states.view())?;
    Ok(batch
        .rewards
        .iter()
        .zip(q_next.outer_iter())
        .map(|(&r, row)| r + gamma * row.fold(f64::NEG_INFINITY, |m, &x| m.max(x)))
        .collect())
}

/// Trained network, its target copy and optimizer state.
#[derive(Clone, Debug)]
pub struct QNetworkPair {
    pub online: Mlp,
    pub target: Mlp,
    adam: AdamState,
    updates: u64,
    sync_every: u64,
}

impl QNetworkPair {
    pub fn new(online: Mlp, sync_every: u64) -> Result<Self> {
        if sync_every == 0 {
            return Err(Error::Config("target sync period must be positive".into()));
        }
        Ok(Self { target: online.clone(), adam: AdamState::new(&online), online, updates: 0, sync_every })
    }

    /// Number of gradient steps taken so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn sync_target(&mut self) {
        self.target.copy_from(&self.online);
    }

    /// One gradient step on `batch`; returns the loss before the step.
    /// The target copy is refreshed after every `sync_every`-th step.
    pub fn train(&mut self, batch: &Batch, gamma: f64, lr: f64) -> Result<f64> {
        let targets = td_targets(batch, &self.target, gamma)?;
        let (loss, grads) = self.online.loss_and_grads(batch.states.view(), &batch.actions, &targets)?;
        self.adam.step(&mut self.online, &grads, lr);
        self.updates += 1;
        if self.updates.is_multiple_of(self.sync_every) {
            self.sync_target();
        }
        Ok(loss)
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"MDRLQNET";
const CHECKPOINT_VERSION: u32 = 1;

/// Writes layer widths and parameters as little-endian binary.
pub fn save_checkpoint<W: Write>(net: &Mlp, mut out: W) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let dims = net.dims();
    out.write_all(&(dims.len() as u32).to_le_bytes())?;
    for d in dims {
        out.write_all(&(d as u64).to_le_bytes())?;
    }
    for p in net.flat_params() {
        out.write_all(&p.to_bits().to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint<R: Read>(mut input: R) -> Result<Mlp> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a network checkpoint".into()));
    }
    let version = read_u32(&mut input)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let n = read_u32(&mut input)? as usize;
    if !(2..=64).contains(&n) {
        return Err(Error::Format(format!("implausible layer count {n}")));
    }
    let mut dims = Vec::with_capacity(n);
    for _ in 0..n {
        let mut b = [0u8; 8];
        input.read_exact(&mut b)?;
        let d = u64::from_le_bytes(b);
        if d == 0 || d > 1 << 24 {
            return Err(Error::Format(format!("implausible layer width {d}")));
        }
        dims.push(d as usize);
    }
    let mut net = Mlp::zeros(&dims)?;
    for i in 0..net.num_params() {
        let mut b = [0u8; 8];
        input.read_exact(&mut b)?;
        *net.param_mut(i).expect("index below num_params") = f64::from_bits(u64::from_le_bytes(b));
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok(net)
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
