//! Ground-truth channel generation.
//!
//! The BS→IRS link `g`, the IRS→user link `h_r` and the direct BS→user link
//! `h_d` are Rician: a deterministic line-of-sight part mixed with a complex
//! Gaussian scattered part,
//!
//! ```text
//! g = sqrt(β/(1+β)) · sqrt(η) · b(ω, ψ) + sqrt(1/(1+β)) · sqrt(η) · g̃,   g̃ ~ CN(0, I)
//! ```
//!
//! with path loss `η = C0 · d^-α` and the planar-array steering vector
//! `b(ω, ψ) = a_Nx(cos ω sin ψ) ⊗ a_Nz(cos ψ)`. The link quantities are then
//! folded into the equivalent channel `h̄ = sqrt(p0) · [g^H diag(h_r), h_d]^H`,
//! whose lift `h̄ h̄^H` is what the estimators recover.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::numerics::HermitianMatrix;
use crate::rng::complex_normal;

pub type Point3 = [f64; 3];

/// Rician factors at or above this are treated as pure line of sight.
pub const PURE_LOS_RICIAN_FACTOR: f64 = 1e12;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Line-of-sight structure for the links where it is not pinned down by the
/// BS-IRS geometry alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LosModel {
    /// Planar-array steering vector from the link geometry (scalar links: 1).
    Steering,
    /// Unit-modulus entries with i.i.d. uniform phases.
    RandomPhase,
}

impl LosModel {
    pub fn as_str(self) -> &'static str {
        match self {
            LosModel::Steering => "steering",
            LosModel::RandomPhase => "random-phase",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "steering" => Some(LosModel::Steering),
            "random-phase" => Some(LosModel::RandomPhase),
            _ => None,
        }
    }
}

/// Per-link large-scale parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Gain at the 1 m reference distance, dB.
    pub c0_db: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Rician factor (linear).
    pub beta: f64,
}

/// Axis-aligned box the user is dropped in uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub min: Point3,
    pub max: Point3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub bs_position: Point3,
    pub irs_position: Point3,
    pub user_region: Region,
    pub n_x: usize,
    pub n_z: usize,
    pub bs_user: LinkParams,
    pub bs_irs: LinkParams,
    pub irs_user: LinkParams,
    /// Transmit power, watts.
    pub p0: f64,
    /// Noise power, watts.
    pub sigma2: f64,
    pub irs_user_los: LosModel,
    pub bs_user_los: LosModel,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            bs_position: [50.0, -200.0, 20.0],
            irs_position: [-2.0, -1.0, 0.0],
            user_region: Region { min: [0.0, 0.0, 0.0], max: [10.0, 10.0, 0.0] },
            n_x: 8,
            n_z: 8,
            bs_user: LinkParams { c0_db: -33.0, alpha: 3.7, beta: 0.0 },
            bs_irs: LinkParams { c0_db: -30.0, alpha: 2.0, beta: 10.0 },
            irs_user: LinkParams { c0_db: -30.0, alpha: 2.0, beta: 1.0 },
            p0: dbm_to_watts(30.0),
            sigma2: dbm_to_watts(-90.0),
            irs_user_los: LosModel::Steering,
            bs_user_los: LosModel::RandomPhase,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Default geometry with a smaller IRS.
    pub fn with_irs(n_x: usize, n_z: usize) -> Self {
        Self { n_x, n_z, ..Self::default() }
    }

    pub fn n_irs(&self) -> usize {
        self.n_x * self.n_z
    }

    /// Dimension of the equivalent channel, `N_irs + 1`.
    pub fn dim(&self) -> usize {
        self.n_irs() + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 || self.n_z == 0 {
            return Err(invalid("IRS grid dimensions must be at least 1"));
        }
        for (name, link) in [("bu", &self.bs_user), ("bi", &self.bs_irs), ("iu", &self.irs_user)] {
            if !(link.alpha > 0.0) {
                return Err(invalid(format!("alpha_{name} must be positive")));
            }
            if !(link.beta >= 0.0) {
                return Err(invalid(format!("beta_{name} must be non-negative")));
            }
            if !link.c0_db.is_finite() {
                return Err(invalid(format!("c0_{name} must be finite")));
            }
        }
        if !(self.p0 > 0.0 && self.p0.is_finite()) {
            return Err(invalid("p0 must be positive"));
        }
        if !(self.sigma2 >= 0.0) {
            return Err(invalid("sigma2 must be non-negative"));
        }
        for k in 0..3 {
            if !(self.user_region.min[k] <= self.user_region.max[k]) {
                return Err(invalid("user region min must not exceed max"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// BS→IRS, one entry per IRS element.
    pub g: Vec<Complex64>,
    /// IRS→user.
    pub h_r: Vec<Complex64>,
    /// BS→user.
    pub h_d: Complex64,
    /// Equivalent channel, `N_irs + 1` entries, units of sqrt(W).
    pub h_bar: Vec<Complex64>,
    pub user_position: Point3,
}

impl ChannelRealization {
    /// Assembles `h̄` from the link channels.
    pub fn from_links(g: Vec<Complex64>, h_r: Vec<Complex64>, h_d: Complex64, p0: f64, user_position: Point3) -> Self {
        let h_bar = equivalent_channel(&g, &h_r, h_d, p0);
        Self { g, h_r, h_d, h_bar, user_position }
    }

    pub fn dim(&self) -> usize {
        self.h_bar.len()
    }

    /// `H̄ = h̄ h̄^H`.
    pub fn autocorrelation(&self) -> HermitianMatrix {
        HermitianMatrix::outer(&self.h_bar)
    }
}

/// `sqrt(p0) · [g^H diag(h_r), h_d]^H`: entries `sqrt(p0)·g_n·conj(h_{r,n})`, then `sqrt(p0)·conj(h_d)`.
pub fn equivalent_channel(g: &[Complex64], h_r: &[Complex64], h_d: Complex64, p0: f64) -> Vec<Complex64> {
    let s = p0.sqrt();
    g.iter().zip(h_r).map(|(gn, hn)| (gn.conj() * hn).conj() * s).chain(std::iter::once(h_d.conj() * s)).collect()
}

/// `a(φ)`: entry `k` is `exp(jπkφ)`.
pub fn steering_vector(phi: f64, length: usize) -> Result<Vec<Complex64>> {
    if length == 0 {
        return Err(invalid("steering vector length must be at least 1"));
    }
    Ok((0..length).map(|k| Complex64::from_polar(1.0, std::f64::consts::PI * k as f64 * phi)).collect())
}

/// `a_Nx(cos ω sin ψ) ⊗ a_Nz(cos ψ)`.
pub fn irs_steering(omega: f64, psi: f64, n_x: usize, n_z: usize) -> Result<Vec<Complex64>> {
    let ax = steering_vector(omega.cos() * psi.sin(), n_x)?;
    let az = steering_vector(psi.cos(), n_z)?;
    Ok(ax.iter().flat_map(|x| az.iter().map(move |z| x * z)).collect())
}

/// `10^(C0/10) · d^-α`.
pub fn path_loss(c0_db: f64, alpha: f64, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(invalid(format!("distance must be positive, got {d}")));
    }
    Ok(db_to_linear(c0_db) * d.powf(-alpha))
}

fn distance(a: Point3, b: Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Azimuth and elevation, both in `[0, π]`, of the direction from the IRS
/// towards `remote`. The elevation is measured from the IRS z axis and the
/// azimuth from its x axis, matching the steering-vector convention.
pub fn arrival_angles(irs: Point3, remote: Point3) -> Result<(f64, f64)> {
    let d = distance(irs, remote);
    if !(d > 0.0) {
        return Err(invalid("IRS coincides with the remote node"));
    }
    let u = [(remote[0] - irs[0]) / d, (remote[1] - irs[1]) / d, (remote[2] - irs[2]) / d];
    let psi = u[2].clamp(-1.0, 1.0).acos();
    let sin_psi = psi.sin();
    let omega = if sin_psi > 0.0 { (u[0] / sin_psi).clamp(-1.0, 1.0).acos() } else { std::f64::consts::FRAC_PI_2 };
    Ok((omega, psi))
}

fn rician_weights(beta: f64) -> (f64, f64) {
    if beta.is_infinite() {
        (1.0, 0.0)
    } else {
        ((beta / (1.0 + beta)).sqrt(), (1.0 / (1.0 + beta)).sqrt())
    }
}

/// Mixes a unit-power LoS pattern with fresh CN(0, 1) scattering, scaled by `sqrt(η)`.
fn rician_vector<R: Rng + ?Sized>(los: &[Complex64], eta: f64, beta: f64, rng: &mut R) -> Vec<Complex64> {
    let (w_los, w_nlos) = rician_weights(beta);
    let amp = eta.sqrt();
    los.iter()
        .map(|&l| {
            let scatter = complex_normal(rng);
            (l * w_los + scatter * w_nlos) * amp
        })
        .collect()
}

fn random_phases<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)).collect()
}

/// Draws one user drop and its channels. Deterministic given the generator state.
pub fn sample_channel<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<ChannelRealization> {
    config.validate()?;
    let Region { min, max } = config.user_region;
    let mut user = [0.0; 3];
    for k in 0..3 {
        let u: f64 = rng.random();
        user[k] = min[k] + (max[k] - min[k]) * u;
    }

    let d_bi = distance(config.bs_position, config.irs_position);
    let d_iu = distance(config.irs_position, user);
    let d_bu = distance(config.bs_position, user);
    let (omega_bi, psi_bi) = arrival_angles(config.irs_position, config.bs_position)?;
    let eta_bi = path_loss(config.bs_irs.c0_db, config.bs_irs.alpha, d_bi)?;
    let eta_iu = path_loss(config.irs_user.c0_db, config.irs_user.alpha, d_iu)?;
    let eta_bu = path_loss(config.bs_user.c0_db, config.bs_user.alpha, d_bu)?;

    let n_irs = config.n_irs();
    let los_bi = irs_steering(omega_bi, psi_bi, config.n_x, config.n_z)?;
    let g = rician_vector(&los_bi, eta_bi, config.bs_irs.beta, rng);

    let los_iu = match config.irs_user_los {
        LosModel::Steering => {
            let (omega, psi) = arrival_angles(config.irs_position, user)?;
            irs_steering(omega, psi, config.n_x, config.n_z)?
        }
        LosModel::RandomPhase => random_phases(n_irs, rng),
    };
    let h_r = rician_vector(&los_iu, eta_iu, config.irs_user.beta, rng);

    let los_bu = match config.bs_user_los {
        LosModel::Steering => vec![Complex64::new(1.0, 0.0)],
        LosModel::RandomPhase => random_phases(1, rng),
    };
    let h_d = rician_vector(&los_bu, eta_bu, config.bs_user.beta, rng)[0];

    Ok(ChannelRealization::from_links(g, h_r, h_d, config.p0, user))
}
