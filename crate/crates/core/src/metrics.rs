//! Received power, interference, SINR and Shannon rates for one slot.
//!
//! Streams are addressed by `(user k, stream n)` and stored flat at index
//! `k * streams_per_user + n`. The per-stream transmit power is
//! `P / (K * Ns)` and the noise term is `||w||^2 sigma^2`.

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::numerics::{CMatrix, Complex};

/// Transmit power and noise in linear units plus the stream layout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkBudget {
    pub power_w: f64,
    pub noise_w: f64,
    pub users: usize,
    pub streams_per_user: usize,
}

impl LinkBudget {
    pub fn new(power_w: f64, noise_w: f64, users: usize, streams_per_user: usize) -> Result<Self> {
        if !(power_w > 0.0) || !(noise_w > 0.0) {
            return Err(Error::Domain("transmit power and noise must be positive".into()));
        }
        if users == 0 || streams_per_user == 0 {
            return Err(Error::Domain("need at least one user and one stream".into()));
        }
        Ok(Self { power_w, noise_w, users, streams_per_user })
    }

    /// `P / (K Ns)`.
    pub fn stream_power(&self) -> f64 {
        self.power_w / self.total_streams() as f64
    }

    pub fn total_streams(&self) -> usize {
        self.users * self.streams_per_user
    }

    pub fn index(&self, k: usize, n: usize) -> usize {
        k * self.streams_per_user + n
    }

    pub fn owner(&self, s: usize) -> (usize, usize) {
        (s / self.streams_per_user, s % self.streams_per_user)
    }
}

/// `dBm -> W`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Precoder (`M x 1`) and combiner (`N x 1`) of one stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Beam {
    pub precoder: CMatrix,
    pub combiner: CMatrix,
}

/// Beams for every stream of every user at one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamAssignment {
    users: usize,
    streams_per_user: usize,
    beams: Vec<Beam>,
}

impl BeamAssignment {
    /// `beams` in k-major, n-minor order; exactly `users * streams_per_user`.
    pub fn new(users: usize, streams_per_user: usize, beams: Vec<Beam>) -> Result<Self> {
        if beams.len() != users * streams_per_user {
            return Err(Error::Incomplete(format!(
                "{} beams supplied for {users} users x {streams_per_user} streams",
                beams.len()
            )));
        }
        Ok(Self { users, streams_per_user, beams })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn streams_per_user(&self) -> usize {
        self.streams_per_user
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn beam(&self, k: usize, n: usize) -> &Beam {
        &self.beams[k * self.streams_per_user + n]
    }

    pub fn beams(&self) -> &[Beam] {
        &self.beams
    }

    pub fn beams_mut(&mut self) -> &mut [Beam] {
        &mut self.beams
    }

    pub fn precoder(&self, k: usize, n: usize) -> &CMatrix {
        &self.beam(k, n).precoder
    }

    pub fn combiner(&self, k: usize, n: usize) -> &CMatrix {
        &self.beam(k, n).combiner
    }

    /// Whether every precoder and combiner has unit norm within `tol`.
    pub fn is_unit_norm(&self, tol: f64) -> bool {
        self.beams.iter().all(|b| (b.precoder.norm() - 1.0).abs() <= tol && (b.combiner.norm() - 1.0).abs() <= tol)
    }

    fn check_budget(&self, budget: &LinkBudget) -> Result<()> {
        if self.users != budget.users || self.streams_per_user != budget.streams_per_user {
            return Err(Error::Incomplete(format!(
                "assignment covers {}x{} streams, link budget expects {}x{}",
                self.users, self.streams_per_user, budget.users, budget.streams_per_user
            )));
        }
        Ok(())
    }
}

/// Per-stream rates `G`, per-user sums `R_k` and their aggregate.
#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub per_stream: Vec<f64>,
    pub per_user: Vec<f64>,
    pub average: f64,
    pub sum: f64,
}

impl RateReport {
    fn from_streams(per_stream: Vec<f64>, streams_per_user: usize) -> Self {
        let per_user: Vec<f64> = per_stream.chunks(streams_per_user).map(|c| c.iter().sum()).collect();
        let sum: f64 = per_user.iter().sum();
        let average = sum / per_user.len() as f64;
        Self { per_stream, per_user, average, sum }
    }

    /// All-zero report, used for slots where a policy could not act.
    pub fn zero(users: usize, streams_per_user: usize) -> Self {
        Self::from_streams(vec![0.0; users * streams_per_user], streams_per_user)
    }
}

/// `w^H H p`.
fn effective_gain(w: &CMatrix, h: &CMatrix, p: &CMatrix) -> Complex {
    let (n, m) = h.shape();
    let mut acc = Complex::new(0.0, 0.0);
    let ws = w.as_slice();
    let ps = p.as_slice();
    for r in 0..n {
        let row = h.row(r);
        let hp: Complex = row.iter().zip(ps).map(|(a, b)| a * b).sum();
        acc += ws[r].conj() * hp;
    }
    debug_assert_eq!(ps.len(), m);
    acc
}

fn check_shapes(w: &CMatrix, h: &CMatrix, p: &CMatrix) -> Result<()> {
    let (n, m) = h.shape();
    if w.shape() != (n, 1) || p.shape() != (m, 1) {
        return Err(Error::Shape(format!(
            "combiner {:?} / channel {:?} / precoder {:?} do not chain",
            w.shape(),
            h.shape(),
            p.shape()
        )));
    }
    Ok(())
}

/// `(P / K Ns) |w^H H p|^2`.
pub fn received_power(w: &CMatrix, h: &CMatrix, p: &CMatrix, budget: &LinkBudget) -> Result<f64> {
    check_shapes(w, h, p)?;
    Ok(budget.stream_power() * effective_gain(w, h, p).norm_sqr())
}

/// Interference at stream `(k, n)` from user `k`'s other streams.
pub fn inter_stream_interference(
    k: usize,
    n: usize,
    assignment: &BeamAssignment,
    h_k: &CMatrix,
    budget: &LinkBudget,
) -> Result<f64> {
    assignment.check_budget(budget)?;
    let w = assignment.combiner(k, n);
    let mut acc = 0.0;
    for i in (0..assignment.streams_per_user).filter(|&i| i != n) {
        acc += received_power(w, h_k, assignment.precoder(k, i), budget)?;
    }
    Ok(acc)
}

/// Interference at stream `(k, n)` from every stream of every other user.
pub fn multi_user_interference(
    k: usize,
    n: usize,
    assignment: &BeamAssignment,
    h_k: &CMatrix,
    budget: &LinkBudget,
) -> Result<f64> {
    assignment.check_budget(budget)?;
    let w = assignment.combiner(k, n);
    let mut acc = 0.0;
    for j in (0..assignment.users).filter(|&j| j != k) {
        for i in 0..assignment.streams_per_user {
            acc += received_power(w, h_k, assignment.precoder(j, i), budget)?;
        }
    }
    Ok(acc)
}

pub fn sinr(k: usize, n: usize, assignment: &BeamAssignment, h_k: &CMatrix, budget: &LinkBudget) -> Result<f64> {
    let beam = assignment.beam(k, n);
    let signal = received_power(&beam.combiner, h_k, &beam.precoder, budget)?;
    let inter = inter_stream_interference(k, n, assignment, h_k, budget)?;
    let multi = multi_user_interference(k, n, assignment, h_k, budget)?;
    Ok(signal / (inter + multi + beam.combiner.norm_sqr() * budget.noise_w))
}

/// Shannon rate `log2(1 + sinr)` in bits/s/Hz.
pub fn stream_rate(sinr_value: f64) -> Result<f64> {
    if !(sinr_value >= 0.0) {
        return Err(Error::Domain(format!("SINR must be non-negative, got {sinr_value}")));
    }
    Ok((1.0 + sinr_value).log2())
}

/// Rates of every stream under `assignment` on `channels`.
pub fn rate_report(
    assignment: &BeamAssignment,
    channels: &ChannelRealization,
    budget: &LinkBudget,
) -> Result<RateReport> {
    Ok(CrossGains::compute(assignment, channels, budget)?.rate_report())
}

/// Every `|w_v^H H_{user(v)} p_s|^2` for victim stream `v` and source `s`.
///
/// All per-slot quantities (SINR, rates, penalties, state features) are
/// sums over this table, so it is computed once per slot.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossGains {
    budget: LinkBudget,
    /// Row-major `[victim][source]`, without the power factor.
    gains: Vec<f64>,
    combiner_norm_sqr: Vec<f64>,
}

impl CrossGains {
    pub fn compute(assignment: &BeamAssignment, channels: &ChannelRealization, budget: &LinkBudget) -> Result<Self> {
        assignment.check_budget(budget)?;
        if channels.users() != budget.users {
            return Err(Error::Incomplete(format!("{} channel matrices for {} users", channels.users(), budget.users)));
        }
        let total = budget.total_streams();
        let mut gains = Vec::with_capacity(total * total);
        let mut combiner_norm_sqr = Vec::with_capacity(total);
        for v in 0..total {
            let (k, _) = budget.owner(v);
            let h = channels.user(k);
            let w = &assignment.beams()[v].combiner;
            combiner_norm_sqr.push(w.norm_sqr());
            // Effective row w^H H, then inner products with every precoder.
            let (n_rx, m) = h.shape();
            if w.shape() != (n_rx, 1) {
                return Err(Error::Shape(format!("combiner {:?} vs channel {:?}", w.shape(), h.shape())));
            }
            let mut row = vec![Complex::new(0.0, 0.0); m];
            for (r, wr) in w.as_slice().iter().enumerate() {
                let wc = wr.conj();
                for (acc, hv) in row.iter_mut().zip(h.row(r)) {
                    *acc += wc * hv;
                }
            }
            for beam in assignment.beams() {
                let p = beam.precoder.as_slice();
                if p.len() != m || beam.precoder.cols() != 1 {
                    return Err(Error::Shape(format!(
                        "precoder {:?} vs channel {:?}",
                        beam.precoder.shape(),
                        h.shape()
                    )));
                }
                let g: Complex = row.iter().zip(p).map(|(a, b)| a * b).sum();
                gains.push(g.norm_sqr());
            }
        }
        Ok(Self { budget: *budget, gains, combiner_norm_sqr })
    }

    pub fn budget(&self) -> &LinkBudget {
        &self.budget
    }

    /// Raw gain `|w_v^H H p_s|^2`, no power factor.
    #[inline]
    pub fn gain(&self, victim: usize, source: usize) -> f64 {
        self.gains[victim * self.budget.total_streams() + source]
    }

    /// Received power at `victim` from `source`.
    #[inline]
    pub fn power(&self, victim: usize, source: usize) -> f64 {
        self.budget.stream_power() * self.gain(victim, source)
    }

    pub fn signal(&self, v: usize) -> f64 {
        self.power(v, v)
    }

    pub fn inter_stream(&self, v: usize) -> f64 {
        let ns = self.budget.streams_per_user;
        let (k, _) = self.budget.owner(v);
        (k * ns..(k + 1) * ns).filter(|&s| s != v).map(|s| self.power(v, s)).sum()
    }

    pub fn multi_user(&self, v: usize) -> f64 {
        let ns = self.budget.streams_per_user;
        let (k, _) = self.budget.owner(v);
        (0..self.budget.total_streams()).filter(|&s| s / ns != k).map(|s| self.power(v, s)).sum()
    }

    pub fn noise(&self, v: usize) -> f64 {
        self.combiner_norm_sqr[v] * self.budget.noise_w
    }

    /// Interference plus noise at `v`.
    pub fn interference_plus_noise(&self, v: usize) -> f64 {
        self.inter_stream(v) + self.multi_user(v) + self.noise(v)
    }

    pub fn sinr(&self, v: usize) -> f64 {
        self.signal(v) / self.interference_plus_noise(v)
    }

    pub fn stream_rate(&self, v: usize) -> f64 {
        (1.0 + self.sinr(v)).log2()
    }

    /// Rate of `v` if stream `removed` did not transmit. `removed != v`.
    pub fn stream_rate_without(&self, v: usize, removed: usize) -> f64 {
        let interference: f64 =
            (0..self.budget.total_streams()).filter(|&s| s != v && s != removed).map(|s| self.power(v, s)).sum();
        (1.0 + self.signal(v) / (interference + self.noise(v))).log2()
    }

    pub fn rate_report(&self) -> RateReport {
        let per_stream = (0..self.budget.total_streams()).map(|v| self.stream_rate(v)).collect();
        RateReport::from_streams(per_stream, self.budget.streams_per_user)
    }
}
