//! Urban-microcell street-canyon propagation at mmWave, SINR and rate.
//!
//! Path loss follows the 3GPP UMi street-canyon model: a LoS law with a
//! breakpoint, and an NLoS law floored by the LoS value. Buildings on the
//! direct path add a fixed loss per wall plus a per-meter indoor loss, and a
//! log-normal shadowing term is drawn once per link.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{BuildingMap, Position};
use crate::{Error, Result, Scalar};

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Thermal noise density at 290 K, dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;
/// Distances below this are evaluated at the floor in [`link_budget`].
pub const MIN_MODEL_DISTANCE_M: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub carrier_ghz: f64,
    /// Bandwidth of one band, Hz.
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub tx_gain_db: f64,
    pub rx_gain_db: f64,
    pub noise_figure_db: f64,
    pub shadowing_sigma_los_db: f64,
    pub shadowing_sigma_nlos_db: f64,
    /// Loss per wall crossed, dB.
    pub wall_loss_db: f64,
    pub indoor_loss_db_per_m: f64,
    /// Spectral-efficiency cap, bit/s/Hz.
    pub se_max: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            carrier_ghz: 28.0,
            bandwidth_hz: 400e6,
            tx_power_dbm: 30.0,
            tx_gain_db: 10.0,
            rx_gain_db: 10.0,
            noise_figure_db: 7.0,
            shadowing_sigma_los_db: 4.0,
            shadowing_sigma_nlos_db: 7.82,
            wall_loss_db: 20.0,
            indoor_loss_db_per_m: 0.5,
            se_max: 7.8,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("carrier_ghz", self.carrier_ghz > 0.0),
            ("bandwidth_hz", self.bandwidth_hz > 0.0),
            ("shadowing_sigma_los_db", self.shadowing_sigma_los_db >= 0.0),
            ("shadowing_sigma_nlos_db", self.shadowing_sigma_nlos_db >= 0.0),
            ("wall_loss_db", self.wall_loss_db >= 0.0),
            ("indoor_loss_db_per_m", self.indoor_loss_db_per_m >= 0.0),
            ("se_max", self.se_max > 0.0),
            ("tx_power_dbm", self.tx_power_dbm.is_finite()),
            ("tx_gain_db", self.tx_gain_db.is_finite()),
            ("rx_gain_db", self.rx_gain_db.is_finite()),
            ("noise_figure_db", self.noise_figure_db.is_finite()),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::invalid(name, "out of range"));
            }
        }
        Ok(())
    }

    pub fn noise_dbm(&self) -> f64 {
        THERMAL_NOISE_DBM_HZ + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }

    pub fn penetration_loss(&self, wall_crossings: u32, indoor_distance_m: f64) -> f64 {
        penetration_loss(wall_crossings, indoor_distance_m, self.wall_loss_db, self.indoor_loss_db_per_m)
    }

    pub fn sinr_db(&self, serving_rx_dbm: f64, interferer_rx_dbm: &[f64]) -> f64 {
        sinr_db(serving_rx_dbm, interferer_rx_dbm, self.noise_dbm())
    }

    pub fn achievable_rate(&self, sinr_db: f64) -> f64 {
        shannon_rate(sinr_db, self.bandwidth_hz, self.se_max)
    }

    /// Peak rate of one band, bits/s.
    pub fn max_rate(&self) -> f64 {
        self.bandwidth_hz * self.se_max
    }
}

fn check_distance<T: Scalar>(d: T) -> Result<()> {
    if d > T::zero() && d.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("d3d", "distance must be positive"))
    }
}

/// UMi LoS path loss below the breakpoint, dB.
pub fn pathloss_los<T: Scalar>(d3d: T, fc_ghz: T) -> Result<T> {
    check_distance(d3d)?;
    Ok(T::lit(32.4) + T::lit(21.0) * d3d.log10() + T::lit(20.0) * fc_ghz.log10())
}

/// UMi NLoS path loss, floored by the LoS law, dB.
pub fn pathloss_nlos<T: Scalar>(d3d: T, fc_ghz: T) -> Result<T> {
    let los = pathloss_los(d3d, fc_ghz)?;
    let nlos = T::lit(32.4) + T::lit(31.9) * d3d.log10() + T::lit(20.0) * fc_ghz.log10();
    Ok(los.max(nlos))
}

/// Free-space path loss, dB.
pub fn pathloss_free_space<T: Scalar>(d3d: T, fc_ghz: T) -> Result<T> {
    check_distance(d3d)?;
    let c = T::lit(SPEED_OF_LIGHT);
    let four_pi = T::lit(4.0) * T::PI();
    let lambda = c / (fc_ghz * T::lit(1e9));
    Ok(T::lit(20.0) * (four_pi * d3d / lambda).log10())
}

/// Breakpoint distance with a 1 m effective environment height, meters.
pub fn breakpoint_distance<T: Scalar>(fc_ghz: T, h_bs: T, h_ut: T) -> T {
    let one = T::one();
    T::lit(4.0) * (h_bs - one) * (h_ut - one) * fc_ghz * T::lit(1e9) / T::lit(SPEED_OF_LIGHT)
}

/// UMi street-canyon LoS path loss including the post-breakpoint law.
pub fn umi_los<T: Scalar>(d2d: T, d3d: T, fc_ghz: T, h_bs: T, h_ut: T) -> Result<T> {
    let bp = breakpoint_distance(fc_ghz, h_bs, h_ut);
    if bp <= T::zero() || d2d <= bp {
        return pathloss_los(d3d, fc_ghz);
    }
    check_distance(d3d)?;
    let dh = h_bs - h_ut;
    Ok(T::lit(32.4) + T::lit(40.0) * d3d.log10() + T::lit(20.0) * fc_ghz.log10()
        - T::lit(9.5) * (bp * bp + dh * dh).log10())
}

/// UMi NLoS path loss (32.4 + 31.9 log10 d law), floored by [`umi_los`].
pub fn umi_nlos<T: Scalar>(d2d: T, d3d: T, fc_ghz: T, h_bs: T, h_ut: T) -> Result<T> {
    let los = umi_los(d2d, d3d, fc_ghz, h_bs, h_ut)?;
    Ok(los.max(pathloss_nlos(d3d, fc_ghz)?))
}

pub fn penetration_loss<T: Scalar>(wall_crossings: u32, indoor_distance_m: T, wall_loss_db: T, indoor_loss_db_per_m: T) -> T {
    T::lit(wall_crossings as f64) * wall_loss_db + indoor_distance_m * indoor_loss_db_per_m
}

pub fn db_to_linear<T: Scalar>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

pub fn linear_to_db<T: Scalar>(lin: T) -> T {
    T::lit(10.0) * lin.log10()
}

/// SINR in dB from powers in dBm.
pub fn sinr_db<T: Scalar>(serving_rx_dbm: T, interferer_rx_dbm: &[T], noise_dbm: T) -> T {
    let denom = interferer_rx_dbm
        .iter()
        .fold(db_to_linear(noise_dbm), |acc, &i| acc + db_to_linear(i));
    linear_to_db(db_to_linear(serving_rx_dbm) / denom)
}

/// Shannon rate capped at `se_max`, bits/s.
pub fn shannon_rate<T: Scalar>(sinr_db: T, bandwidth_hz: T, se_max: T) -> T {
    shannon_rate_linear(db_to_linear(sinr_db), bandwidth_hz, se_max)
}

/// As [`shannon_rate`] with a linear SINR.
pub fn shannon_rate_linear<T: Scalar>(sinr: T, bandwidth_hz: T, se_max: T) -> T {
    let se = (T::one() + sinr).log2();
    bandwidth_hz * se.min(se_max).max(T::zero())
}

/// Static state of one (base station, user, band) link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkState {
    pub distance_3d_m: f64,
    pub pathloss_db: f64,
    pub shadowing_db: f64,
    pub los: bool,
    pub penetration_db: f64,
    pub rx_dbm: f64,
    /// Interference-free SNR.
    pub sinr_db: f64,
    /// Rate at [`LinkState::sinr_db`].
    pub rate_bps: f64,
}

/// Link budget between `bs` and `user`, shadowing drawn from `rng`.
///
/// One normal draw is always consumed, whether or not the sigma is zero.
pub fn link_budget<R: Rng + ?Sized>(
    bs: &Position<f64>,
    user: &Position<f64>,
    map: &BuildingMap<f64>,
    cfg: &ChannelConfig,
    rng: &mut R,
) -> LinkState {
    let d2d = bs.distance_2d(user).max(MIN_MODEL_DISTANCE_M);
    let d3d = bs.distance_3d(user).max(MIN_MODEL_DISTANCE_M);
    let profile = map.path_profile(bs.xy, user.xy);
    let los = profile.wall_crossings == 0;
    let (h_bs, h_ut) = (bs.height.max(user.height), bs.height.min(user.height));
    let pathloss_db = if los {
        umi_los(d2d, d3d, cfg.carrier_ghz, h_bs, h_ut)
    } else {
        umi_nlos(d2d, d3d, cfg.carrier_ghz, h_bs, h_ut)
    }
    .expect("distance floored above zero");
    let sigma = if los { cfg.shadowing_sigma_los_db } else { cfg.shadowing_sigma_nlos_db };
    let z: f64 = rng.sample(rand_distr::StandardNormal);
    let shadowing_db = z * sigma;
    let penetration_db = cfg.penetration_loss(profile.wall_crossings, profile.indoor_distance);
    let rx_dbm = cfg.tx_power_dbm + cfg.tx_gain_db + cfg.rx_gain_db - pathloss_db - penetration_db - shadowing_db;
    let sinr_db = cfg.sinr_db(rx_dbm, &[]);
    LinkState {
        distance_3d_m: d3d,
        pathloss_db,
        shadowing_db,
        los,
        penetration_db,
        rx_dbm,
        sinr_db,
        rate_bps: cfg.achievable_rate(sinr_db),
    }
}
