//! Air-to-ground link model and packet-collection reward.
//!
//! A GUE is covered when its SNR towards the UABS reaches the threshold.
//! The SNR follows a log-distance path loss with an extra loss term that
//! depends on whether the link is line-of-sight, and the LoS probability is
//! a logistic function of the elevation angle.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::geom::Vec2;

/// How a link's LoS condition is realized at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkMode {
    /// Independent Bernoulli draw per GUE and step.
    Sampled,
    /// Deterministic excess loss averaged over the LoS probability.
    Expected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Logistic offset of the LoS curve.
    pub alpha: f64,
    /// Logistic slope, per degree.
    pub beta: f64,
    pub eta_los_db: f64,
    pub eta_nlos_db: f64,
    pub fc_mhz: f64,
    pub ptx_dbm: f64,
    pub gtx_db: f64,
    pub grx_db: f64,
    pub pnoise_dbm: f64,
    pub snr_th_db: f64,
    pub link_mode: LinkMode,
}

/// Urban-environment LoS constants shipped as defaults.
pub const URBAN_ALPHA: f64 = 9.61;
pub const URBAN_BETA: f64 = 0.16;
pub const URBAN_ETA_LOS_DB: f64 = 1.0;
pub const URBAN_ETA_NLOS_DB: f64 = 20.0;

/// 3-D LoS coverage radius the toy preset is calibrated to.
pub const TOY_COVERAGE_RADIUS_M: f64 = 15.0;

impl ChannelParams {
    /// Urban scenario: 30 GHz, 20 dBm transmit power, -10 dB threshold.
    pub fn urban() -> Self {
        ChannelParams {
            alpha: URBAN_ALPHA,
            beta: URBAN_BETA,
            eta_los_db: URBAN_ETA_LOS_DB,
            eta_nlos_db: URBAN_ETA_NLOS_DB,
            fc_mhz: 30_000.0,
            ptx_dbm: 20.0,
            gtx_db: 0.0,
            grx_db: 0.0,
            pnoise_dbm: -100.0,
            snr_th_db: -10.0,
            link_mode: LinkMode::Sampled,
        }
    }

    /// Toy scenario: 0 dBm transmit power with the threshold set so that a
    /// LoS link is covered up to [`TOY_COVERAGE_RADIUS_M`] of slant range.
    ///
    /// The nominal 50 dB threshold for this scenario leaves a sub-meter
    /// coverage radius, so it is replaced here.
    pub fn toy() -> Self {
        let mut p = ChannelParams {
            ptx_dbm: 0.0,
            ..ChannelParams::urban()
        };
        p.snr_th_db = p.snr_threshold_for_los_radius(TOY_COVERAGE_RADIUS_M);
        p
    }

    /// SNR of a LoS link at slant distance `radius_m`; using it as the
    /// threshold makes `radius_m` the LoS coverage radius.
    pub fn snr_threshold_for_los_radius(&self, radius_m: f64) -> f64 {
        let loss = path_loss_db(self.fc_mhz, radius_m, self.eta_los_db)
            .unwrap_or(f64::NEG_INFINITY);
        snr_db(self, loss)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let ok = self.alpha > 0.0
            && self.beta > 0.0
            && self.fc_mhz > 0.0
            && self.eta_los_db >= 0.0
            && self.eta_nlos_db >= self.eta_los_db;
        if ok {
            Ok(())
        } else {
            Err(ChannelError::InvalidParams)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RewardParams {
    /// Maximum packets the UABS can receive in one step.
    pub c_max: u32,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams { c_max: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelError {
    NonPositiveDistance(f64),
    InvalidParams,
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelError::NonPositiveDistance(d) => {
                write!(f, "path loss needs a positive distance, got {d}")
            }
            ChannelError::InvalidParams => f.write_str(
                "channel parameters need alpha, beta, fc > 0 and eta_nlos >= eta_los >= 0",
            ),
        }
    }
}

/// Elevation of the GUE-to-UABS ray in degrees.
pub fn elevation_angle_deg(uabs: Vec2, altitude_m: f64, gue: Vec2) -> f64 {
    let horizontal = uabs.distance(gue);
    if horizontal == 0.0 {
        return 90.0;
    }
    libm::atan(altitude_m / horizontal) * (180.0 / PI)
}

pub fn p_los(theta_deg: f64, p: &ChannelParams) -> f64 {
    1.0 / (1.0 + p.alpha * libm::exp(-p.beta * (theta_deg - p.alpha)))
}

/// Path loss in dB for carrier `fc_mhz` over `d_m` meters with excess loss `eta_db`.
pub fn path_loss_db(fc_mhz: f64, d_m: f64, eta_db: f64) -> Result<f64, ChannelError> {
    if d_m.is_nan() || d_m <= 0.0 {
        return Err(ChannelError::NonPositiveDistance(d_m));
    }
    Ok(20.0 * libm::log10(fc_mhz) + 20.0 * libm::log10(d_m) - 27.55 + eta_db)
}

pub fn snr_db(p: &ChannelParams, loss_db: f64) -> f64 {
    (p.ptx_dbm + p.gtx_db + p.grx_db - loss_db) - p.pnoise_dbm
}

/// Inclusive threshold test.
pub fn covered(snr_db: f64, snr_th_db: f64) -> bool {
    snr_db >= snr_th_db
}

/// Realized propagation condition of one link at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkDraw {
    Los,
    Nlos,
    /// Probability-weighted excess loss in dB.
    Expected(f64),
}

impl LinkDraw {
    pub fn excess_loss_db(self, p: &ChannelParams) -> f64 {
        match self {
            LinkDraw::Los => p.eta_los_db,
            LinkDraw::Nlos => p.eta_nlos_db,
            LinkDraw::Expected(eta) => eta,
        }
    }
}

/// Draws (or averages) the link condition. Expected mode consumes no randomness.
pub fn link_state<R: Rng + ?Sized>(rng: &mut R, p_los_value: f64, p: &ChannelParams) -> LinkDraw {
    match p.link_mode {
        LinkMode::Sampled => {
            if rng.gen::<f64>() < p_los_value {
                LinkDraw::Los
            } else {
                LinkDraw::Nlos
            }
        }
        LinkMode::Expected => LinkDraw::Expected(
            p_los_value * p.eta_los_db + (1.0 - p_los_value) * p.eta_nlos_db,
        ),
    }
}

/// Full link budget for one GUE: elevation, LoS draw, path loss over the
/// 3-D slant distance, SNR. Returns the SNR in dB.
pub fn link_snr_db<R: Rng + ?Sized>(
    rng: &mut R,
    uabs: Vec2,
    altitude_m: f64,
    gue: Vec2,
    p: &ChannelParams,
) -> f64 {
    let theta = elevation_angle_deg(uabs, altitude_m, gue);
    let link = link_state(rng, p_los(theta, p), p);
    let slant = libm::sqrt(uabs.distance_sq(gue) + altitude_m * altitude_m);
    // altitude > 0 keeps the slant distance positive
    let loss = path_loss_db(p.fc_mhz, slant, link.excess_loss_db(p)).unwrap_or(f64::INFINITY);
    snr_db(p, loss)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collection {
    pub reward: u32,
    /// Served GUE indices, ascending.
    pub served: Vec<usize>,
}

/// Caps the collected packets at `c_max`, picking a uniform random subset on
/// overflow. `eligible` lists GUEs that have a packet and are covered.
pub fn collect_reward<R: Rng + ?Sized>(
    eligible: &[usize],
    rew: &RewardParams,
    rng: &mut R,
) -> Collection {
    let cap = rew.c_max as usize;
    let mut served: Vec<usize> = eligible.to_vec();
    if served.len() > cap {
        served.partial_shuffle(rng, cap);
        served.truncate(cap);
    }
    served.sort_unstable();
    Collection {
        reward: served.len() as u32,
        served,
    }
}
