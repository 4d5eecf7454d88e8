//! Aged multipath channel: per-path complex gains follow a first-order
//! Gauss-Markov process, angles stay fixed between reschedules, and the
//! per-user matrix is the normalised sum of rank-one ULA path components.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{bessel_j0, cgauss, CMatrix, Complex, RngStream};

/// Mean angles and angular spreads of one user's scatterers.
#[derive(Clone, Debug, PartialEq)]
pub struct UserGeometry {
    pub distance_m: f64,
    /// Mean angle of arrival per path, radians.
    pub mean_aoa: Vec<f64>,
    /// Mean angle of departure per path, radians.
    pub mean_aod: Vec<f64>,
    pub spread_aoa: f64,
    pub spread_aod: f64,
}

impl UserGeometry {
    fn validate(&self, paths: usize) -> Result<()> {
        if !(self.distance_m > 0.0) {
            return Err(Error::Domain(format!("distance must be positive, got {}", self.distance_m)));
        }
        if !(self.spread_aoa >= 0.0 && self.spread_aod >= 0.0) {
            return Err(Error::Domain("angular spreads must be non-negative".into()));
        }
        if self.mean_aoa.len() != paths || self.mean_aod.len() != paths {
            return Err(Error::Shape(format!(
                "geometry lists {} AoA / {} AoD means for {paths} paths",
                self.mean_aoa.len(),
                self.mean_aod.len()
            )));
        }
        Ok(())
    }
}

/// Hidden per-path state of one user.
#[derive(Clone, Debug, PartialEq)]
pub struct PathState {
    pub alphas: Vec<Complex>,
    pub aoas: Vec<f64>,
    pub aods: Vec<f64>,
}

impl PathState {
    pub fn paths(&self) -> usize {
        self.alphas.len()
    }
}

/// Large-scale fading of one user, in dB of loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LargeScale {
    /// Path loss plus shadowing.
    pub eta_db: f64,
    /// The log-normal shadowing part of `eta_db`.
    pub shadow_db: f64,
}

impl LargeScale {
    /// Linear power gain `10^(-eta_db / 10)`.
    pub fn gain(&self) -> f64 {
        10f64.powf(-self.eta_db / 10.0)
    }
}

/// Per-user `N x M` channel matrices at one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub slot: u64,
    pub per_user: Vec<CMatrix>,
}

impl ChannelRealization {
    pub fn users(&self) -> usize {
        self.per_user.len()
    }

    pub fn user(&self, k: usize) -> &CMatrix {
        &self.per_user[k]
    }
}

/// Temporal correlation of Jakes' model, `J0(2 pi f_d dt)`.
pub fn jakes_rho(f_d_max: f64, delta_t: f64) -> Result<f64> {
    if !(f_d_max >= 0.0) {
        return Err(Error::Domain(format!("Doppler frequency must be >= 0, got {f_d_max}")));
    }
    if !(delta_t > 0.0) {
        return Err(Error::Domain(format!("slot interval must be > 0, got {delta_t}")));
    }
    bessel_j0(2.0 * PI * f_d_max * delta_t)
}

/// Half-wavelength ULA steering vector, unit norm.
fn steering(antennas: usize, phi: f64) -> CMatrix {
    let norm = 1.0 / (antennas as f64).sqrt();
    let step = PI * phi.cos();
    CMatrix::column((0..antennas).map(|p| Complex::from_polar(norm, step * p as f64)).collect())
}

/// Transmit-side (`M x 1`) steering vector for departure angle `phi_d`.
pub fn steering_tx(m: usize, phi_d: f64) -> Result<CMatrix> {
    if m == 0 {
        return Err(Error::Domain("antenna count must be >= 1".into()));
    }
    Ok(steering(m, phi_d))
}

/// Receive-side (`N x 1`) steering vector for arrival angle `phi_a`.
pub fn steering_rx(n: usize, phi_a: f64) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::Domain("antenna count must be >= 1".into()));
    }
    Ok(steering(n, phi_a))
}

/// Log-distance path loss in dB.
pub fn path_loss_db(d: f64, d0: f64, l0_db: f64, omega: f64) -> Result<f64> {
    if !(d0 > 0.0) || !(d >= d0) {
        return Err(Error::Domain(format!("path loss needs d >= d0 > 0, got d={d}, d0={d0}")));
    }
    Ok(l0_db + 10.0 * omega * (d / d0).log10())
}

/// Draws the initial path state: unit-power gains and angles uniform
/// within each mean angle's spread.
pub fn init_user(rng: &mut RngStream, geometry: &UserGeometry, paths: usize) -> Result<PathState> {
    if paths == 0 {
        return Err(Error::Domain("path count must be >= 1".into()));
    }
    geometry.validate(paths)?;
    let spread = |mean: f64, width: f64, rng: &mut RngStream| {
        if width == 0.0 {
            mean
        } else {
            rng.uniform_range(mean - width / 2.0, mean + width / 2.0)
        }
    };
    let alphas = (0..paths).map(|_| cgauss(rng)).collect();
    let aoas = geometry.mean_aoa.iter().map(|&m| spread(m, geometry.spread_aoa, rng)).collect();
    let aods = geometry.mean_aod.iter().map(|&m| spread(m, geometry.spread_aod, rng)).collect();
    Ok(PathState { alphas, aoas, aods })
}

/// One Gauss-Markov slot: `alpha' = rho alpha + sqrt(1 - rho^2) e`.
pub fn evolve(state: &PathState, rho: f64, rng: &mut RngStream) -> Result<PathState> {
    let mut next = state.clone();
    evolve_in_place(&mut next, rho, rng)?;
    Ok(next)
}

pub(crate) fn evolve_in_place(state: &mut PathState, rho: f64, rng: &mut RngStream) -> Result<()> {
    if !(rho.abs() <= 1.0) {
        return Err(Error::Domain(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    let innovation = (1.0 - rho * rho).max(0.0).sqrt();
    for a in &mut state.alphas {
        // The innovation is drawn even at rho = 1 so the stream position
        // does not depend on rho.
        let e = cgauss(rng);
        *a = *a * rho + e * innovation;
    }
    Ok(())
}

/// `H = sqrt(eta M N / L) * sum_l alpha_l u_l v_l^H` as an `N x M` matrix.
pub fn assemble(state: &PathState, large: &LargeScale, m: usize, n: usize) -> Result<CMatrix> {
    let paths = state.paths();
    if paths == 0 || state.aoas.len() != paths || state.aods.len() != paths {
        return Err(Error::Shape("path state lists disagree in length".into()));
    }
    let scale = (large.gain() * (m * n) as f64 / paths as f64).sqrt();
    let mut h = CMatrix::zeros(n, m);
    for l in 0..paths {
        let u = steering_rx(n, state.aoas[l])?;
        let v = steering_tx(m, state.aods[l])?;
        let a = state.alphas[l] * scale;
        let out = h.as_mut_slice();
        for r in 0..n {
            let ur = a * u.get(r, 0);
            for c in 0..m {
                out[r * m + c] += ur * v.get(c, 0).conj();
            }
        }
    }
    Ok(h)
}

/// Static parameters of the channel process.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelParams {
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub users: usize,
    pub paths: usize,
    pub rho: f64,
    pub distance_m: f64,
    pub reference_distance_m: f64,
    pub reference_loss_db: f64,
    pub path_loss_exponent: f64,
    pub shadowing_std_db: f64,
    pub spread_aoa: f64,
    pub spread_aod: f64,
}

#[derive(Clone, Debug)]
struct UserLink {
    geometry: UserGeometry,
    large: LargeScale,
    paths: PathState,
}

/// Time-evolving multi-user channel.
///
/// All randomness comes from the process's own substreams, so two processes
/// built from the same seed and parameters produce bit-identical channel
/// sequences regardless of which policy consumes them.
#[derive(Clone, Debug)]
pub struct ChannelProcess {
    params: ChannelParams,
    geometry_rng: RngStream,
    fading_rng: Vec<RngStream>,
    links: Vec<UserLink>,
    current: ChannelRealization,
    epoch: u32,
}

impl ChannelProcess {
    pub fn new(params: ChannelParams, rng: &RngStream) -> Result<Self> {
        if params.users == 0 || params.tx_antennas == 0 || params.rx_antennas == 0 || params.paths == 0 {
            return Err(Error::Config("channel dimensions must all be >= 1".into()));
        }
        if !(params.rho.abs() <= 1.0) {
            return Err(Error::Config(format!("rho must lie in [-1, 1], got {}", params.rho)));
        }
        let geometry_rng = rng.substream("geometry");
        let fading_rng = (0..params.users).map(|k| rng.substream(&format!("fading-{k}"))).collect();
        let mut process = Self {
            params,
            geometry_rng,
            fading_rng,
            links: Vec::new(),
            current: ChannelRealization { slot: 0, per_user: Vec::new() },
            epoch: 0,
        };
        process.draw_links()?;
        process.current = process.realize(0)?;
        Ok(process)
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn current(&self) -> &ChannelRealization {
        &self.current
    }

    /// Number of reschedules so far.
    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn geometry(&self, k: usize) -> &UserGeometry {
        &self.links[k].geometry
    }

    pub fn large_scale(&self, k: usize) -> LargeScale {
        self.links[k].large
    }

    pub fn path_state(&self, k: usize) -> &PathState {
        &self.links[k].paths
    }

    /// Evolves every user's gains by one slot and returns the new channel.
    pub fn advance(&mut self) -> Result<&ChannelRealization> {
        let rho = self.params.rho;
        for (link, rng) in self.links.iter_mut().zip(&mut self.fading_rng) {
            evolve_in_place(&mut link.paths, rho, rng)?;
        }
        let slot = self.current.slot + 1;
        self.current = self.realize(slot)?;
        Ok(&self.current)
    }

    /// Redraws geometry, shadowing and gains for every user. The slot
    /// counter keeps running; the current realization is replaced in place.
    pub fn reschedule(&mut self) -> Result<()> {
        self.epoch += 1;
        self.draw_links()?;
        self.current = self.realize(self.current.slot)?;
        Ok(())
    }

    fn draw_links(&mut self) -> Result<()> {
        let p = &self.params;
        let loss = path_loss_db(p.distance_m, p.reference_distance_m, p.reference_loss_db, p.path_loss_exponent)?;
        let mut links = Vec::with_capacity(p.users);
        for k in 0..p.users {
            let g = &mut self.geometry_rng;
            let theta_a = g.uniform_range(0.0, 2.0 * PI);
            let theta_d = g.uniform_range(0.0, 2.0 * PI);
            let shadow_db = p.shadowing_std_db * g.standard_normal();
            let geometry = UserGeometry {
                distance_m: p.distance_m,
                mean_aoa: vec![theta_a; p.paths],
                mean_aod: vec![theta_d; p.paths],
                spread_aoa: p.spread_aoa,
                spread_aod: p.spread_aod,
            };
            let paths = init_user(&mut self.fading_rng[k], &geometry, p.paths)?;
            links.push(UserLink { geometry, large: LargeScale { eta_db: loss + shadow_db, shadow_db }, paths });
        }
        self.links = links;
        Ok(())
    }

    fn realize(&self, slot: u64) -> Result<ChannelRealization> {
        let p = &self.params;
        let per_user = self
            .links
            .iter()
            .map(|link| assemble(&link.paths, &link.large, p.tx_antennas, p.rx_antennas))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChannelRealization { slot, per_user })
    }
}
