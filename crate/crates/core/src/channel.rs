//! Optical channel efficiencies for the downlink, uplink and inter-satellite
//! links.
//!
//! Altitudes inside the turbulence integrals are in metres; link distances
//! elsewhere are in km.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::geometry::Topocentric;

const C_LIGHT_M_S: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("elevation {0} deg must be positive")]
    BadElevation(f64),
    #[error("turbulence integral did not converge (relative change {0:e})")]
    Integration(f64),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalTerminal {
    pub aperture_diameter_m: f64,
    pub wavelength_m: f64,
    pub optical_coupling: f64,
    pub tx_gain_efficiency: f64,
    /// Only used when the terminal transmits the uplink.
    pub uplink_beam_waist_m: f64,
}

impl OpticalTerminal {
    pub fn ground_station() -> Self {
        OpticalTerminal {
            aperture_diameter_m: 1.0,
            wavelength_m: 1550e-9,
            optical_coupling: ETA_0_DEFAULT,
            tx_gain_efficiency: TX_GAIN_EFFICIENCY_DEFAULT,
            uplink_beam_waist_m: 0.15,
        }
    }

    pub fn satellite() -> Self {
        OpticalTerminal { aperture_diameter_m: 0.5, ..Self::ground_station() }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.aperture_diameter_m > 0.0) || !(self.wavelength_m > 0.0) {
            return Err(ChannelError::Parameter("aperture and wavelength must be positive".into()));
        }
        if !(self.optical_coupling > 0.0 && self.optical_coupling <= 1.0) {
            return Err(ChannelError::Parameter("optical_coupling must lie in (0, 1]".into()));
        }
        if !(self.tx_gain_efficiency > 0.0 && self.tx_gain_efficiency <= 1.0) {
            return Err(ChannelError::Parameter("tx_gain_efficiency must lie in (0, 1]".into()));
        }
        if !(self.uplink_beam_waist_m > 0.0) {
            return Err(ChannelError::Parameter("uplink_beam_waist_m must be positive".into()));
        }
        Ok(())
    }

    /// Ideal gain of a uniformly illuminated circular aperture, (pi D / lambda)^2.
    pub fn aperture_gain(&self) -> f64 {
        (PI * self.aperture_diameter_m / self.wavelength_m).powi(2)
    }
}

/// Peak gain fraction of an optimally truncated Gaussian illumination, also
/// used as the single-mode coupling ceiling.
pub const TX_GAIN_EFFICIENCY_DEFAULT: f64 = 0.8145;
pub const ETA_0_DEFAULT: f64 = 0.8145;
/// Zenith transmission that puts the reference downlink at 12.3 dB overhead
/// for a 500 km orbit.
pub const ETA_ATM_ZENITH_DEFAULT: f64 = 0.690_130_049_482_174_5;

/// Hufnagel-Valley profile
/// `0.00594 (v/27)^2 (1e-5 h)^10 e^{-h/1000} + 2.7e-16 e^{-h/1500} + A e^{-h/100}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurbulenceProfile {
    pub hv_a: f64,
    pub hv_wind_rms_m_s: f64,
    #[serde(default)]
    pub label: String,
}

/// Constants solved by [`TurbulenceProfile::calibrate_hv`] for HV 10-10.
pub const HV10_10_A: f64 = 2.290_148_174_883_502_5e-15;
pub const HV10_10_WIND: f64 = 14.346_798_191_372_372;

impl TurbulenceProfile {
    pub fn hv10_10() -> Self {
        TurbulenceProfile { hv_a: HV10_10_A, hv_wind_rms_m_s: HV10_10_WIND, label: "HV10-10".into() }
    }

    pub fn vacuum() -> Self {
        TurbulenceProfile { hv_a: 0.0, hv_wind_rms_m_s: 1.0, label: "vacuum".into() }
    }

    pub fn is_vacuum(&self) -> bool {
        self.label == "vacuum"
    }

    pub fn cn2(&self, h: f64) -> f64 {
        if self.is_vacuum() {
            return 0.0;
        }
        let v = self.hv_wind_rms_m_s / 27.0;
        0.005_94 * v * v * (1e-5 * h).powi(10) * (-h / 1000.0).exp()
            + 2.7e-16 * (-h / 1500.0).exp()
            + self.hv_a * (-h / 100.0).exp()
    }

    /// Zenith Fried parameter, m.
    pub fn r0_zenith(&self, lambda: f64) -> Result<f64, ChannelError> {
        let m0 = checked_integral(|h| self.cn2(h))?;
        Ok(r0_from_moment(m0, lambda, 1.0))
    }

    /// Zenith isoplanatic angle, rad.
    pub fn isoplanatic_angle_zenith(&self, lambda: f64) -> Result<f64, ChannelError> {
        let k = 2.0 * PI / lambda;
        let m = checked_integral(|h| self.cn2(h) * h.powf(5.0 / 3.0))?;
        Ok((2.914 * k * k * m).powf(-0.6))
    }

    /// Solves (A, v) so that the zenith Fried parameter and isoplanatic angle
    /// at `lambda` hit the targets.
    pub fn calibrate_hv(r0_target: f64, theta0_target: f64, lambda: f64) -> Result<Self, ChannelError> {
        let a_for = |v: f64| -> Result<f64, ChannelError> {
            // r0 falls monotonically with A
            let f = |ln_a: f64| -> Result<f64, ChannelError> {
                let p = TurbulenceProfile { hv_a: ln_a.exp(), hv_wind_rms_m_s: v, label: String::new() };
                Ok(p.r0_zenith(lambda)?.ln() - r0_target.ln())
            };
            bisect(f, (1e-20f64).ln(), (1e-10f64).ln(), 1e-14)?.map(f64::exp).ok_or_else(|| {
                ChannelError::Calibration(format!("no ground strength gives r0 = {r0_target} m at v = {v}"))
            })
        };
        let g = |v: f64| -> Result<f64, ChannelError> {
            let p = TurbulenceProfile { hv_a: a_for(v)?, hv_wind_rms_m_s: v, label: String::new() };
            Ok(p.isoplanatic_angle_zenith(lambda)?.ln() - theta0_target.ln())
        };
        let v = bisect(g, 1.0, 28.0, 1e-13)?
            .ok_or_else(|| ChannelError::Calibration("isoplanatic angle target not bracketed".into()))?;
        Ok(TurbulenceProfile { hv_a: a_for(v)?, hv_wind_rms_m_s: v, label: "calibrated".into() })
    }
}

fn bisect<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<Option<f64>, ChannelError>
where
    F: Fn(f64) -> Result<f64, ChannelError>,
{
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo.signum() == fhi.signum() {
        return Ok(None);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= tol * mid.abs().max(1.0) {
            break;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindModel {
    pub v_ground_m_s: f64,
    pub v_tropopause_peak_m_s: f64,
    pub h_peak_km: f64,
    pub h_scale_km: f64,
}

impl Default for WindModel {
    fn default() -> Self {
        WindModel { v_ground_m_s: 5.0, v_tropopause_peak_m_s: 20.0, h_peak_km: 9.4, h_scale_km: 4.8 }
    }
}

impl WindModel {
    /// Wind speed at altitude `h` (m) with an added slew term `slew * h`.
    pub fn speed(&self, h: f64, slew_rad_s: f64) -> f64 {
        let x = (h - 1e3 * self.h_peak_km) / (1e3 * self.h_scale_km);
        self.v_ground_m_s + slew_rad_s * h + self.v_tropopause_peak_m_s * (-x * x).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AoConfig {
    pub n_max: u32,
    pub z_max: u32,
    pub correction_bandwidth_hz: f64,
    pub lgs_altitude_km: f64,
}

impl Default for AoConfig {
    fn default() -> Self {
        AoConfig { n_max: 12, z_max: 36, correction_bandwidth_hz: 50.0, lgs_altitude_km: 18.0 }
    }
}

/// How the downlink adaptive-optics loop's finite bandwidth is charged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DownlinkTemporal {
    /// Modal product only.
    Off,
    /// Greenwood frequency of the wind profile alone, evaluated at a fixed
    /// reference wavelength.
    Reference { wavelength_m: f64 },
    /// Greenwood frequency at the signal wavelength including the slew term.
    Physical,
}

impl Default for DownlinkTemporal {
    fn default() -> Self {
        DownlinkTemporal::Reference { wavelength_m: 500e-9 }
    }
}

/// Tip-tilt sensing for the uplink: the tilt is measured on the downlink
/// beacon through an aperture of `sensor_aperture_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UplinkTilt {
    pub sensor_aperture_m: f64,
    pub beacon_snr: f64,
}

impl Default for UplinkTilt {
    fn default() -> Self {
        UplinkTilt { sensor_aperture_m: 1.0, beacon_snr: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelSample {
    pub eta_coll: f64,
    pub eta_coll_ff: f64,
    pub eta_atm: f64,
    /// eta_0 * eta_ao (downlink); 1 otherwise.
    pub eta_smf: f64,
    pub eta_ao: f64,
    pub eta_bwb: f64,
    pub eta_0: f64,
    pub eta_total: f64,
    pub g_tx: f64,
    pub g_rx: f64,
    pub eta_fs: f64,
}

impl ChannelSample {
    pub fn loss_db(&self) -> f64 {
        to_db(self.eta_total)
    }
}

/// Loss in dB of an efficiency.
pub fn to_db(eta: f64) -> f64 {
    -10.0 * eta.log10()
}

pub fn from_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Far-field collection efficiency of the gain formula and its near-field
/// correction `1 - exp(-ff)`.
pub fn collection_efficiency(tx: &OpticalTerminal, rx: &OpticalTerminal, l_km: f64) -> (f64, f64) {
    let (ff, _, _, _) = collection_terms(tx, rx, l_km);
    (near_field(ff), ff)
}

fn collection_terms(tx: &OpticalTerminal, rx: &OpticalTerminal, l_km: f64) -> (f64, f64, f64, f64) {
    let g_tx = tx.tx_gain_efficiency * tx.aperture_gain();
    let g_rx = rx.aperture_gain();
    let eta_fs = (tx.wavelength_m / (4.0 * PI * l_km * 1e3)).powi(2);
    (g_tx * g_rx * eta_fs, g_tx, g_rx, eta_fs)
}

fn near_field(ff: f64) -> f64 {
    -(-ff).exp_m1()
}

/// Gaussian beam radius (1/e^2 intensity) after `l_m` metres.
pub fn gaussian_beam_radius(w0: f64, lambda: f64, l_m: f64) -> f64 {
    let z_r = PI * w0 * w0 / lambda;
    w0 * (1.0 + (l_m / z_r).powi(2)).sqrt()
}

/// Fraction of a Gaussian beam of radius `w` falling into a centred circular
/// aperture, in far-field form D^2 / (2 w^2) and with the exact correction.
pub fn gaussian_collection(w: f64, d_rx: f64) -> (f64, f64) {
    let ff = d_rx * d_rx / (2.0 * w * w);
    (near_field(ff), ff)
}

pub fn atmospheric_transmission(theta_deg: f64, eta_zen: f64) -> Result<f64, ChannelError> {
    if !(theta_deg > 0.0) || theta_deg > 90.0 {
        return Err(ChannelError::BadElevation(theta_deg));
    }
    if theta_deg == 90.0 {
        return Ok(eta_zen);
    }
    Ok(eta_zen.powf(1.0 / theta_deg.to_radians().sin()))
}

pub fn strehl(sigma2: f64) -> f64 {
    (-sigma2).exp()
}

// ---- quadrature ----------------------------------------------------------

const GL_ORDER: usize = 24;
const BREAKS_M: [f64; 13] = [
    0.0, 100.0, 300.0, 700.0, 1500.0, 3000.0, 6000.0, 10_000.0, 15_000.0, 20_000.0, 30_000.0, 50_000.0, 100_000.0,
];

fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = GL_ORDER;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        (x, w)
    })
}

fn integrate_split<F: Fn(f64) -> f64>(f: &F, sub: usize, top: f64) -> f64 {
    let (x, w) = gauss_legendre();
    let mut total = 0.0;
    for pair in BREAKS_M.windows(2) {
        let (a0, b0) = (pair[0], pair[1].min(top));
        if b0 <= a0 {
            break;
        }
        let hseg = (b0 - a0) / sub as f64;
        for s in 0..sub {
            let a = a0 + s as f64 * hseg;
            let half = 0.5 * hseg;
            let mid = a + half;
            let mut acc = 0.0;
            for (xi, wi) in x.iter().zip(w) {
                acc += wi * f(mid + half * xi);
            }
            total += acc * half;
        }
    }
    total
}

/// Integral over altitude 0..100 km (m).
pub fn altitude_integral<F: Fn(f64) -> f64>(f: F) -> f64 {
    integrate_split(&f, 1, f64::INFINITY)
}

/// Integral with a refinement check; fails when doubling the panel count moves
/// the result by more than 1e-9 relative.
pub fn checked_integral<F: Fn(f64) -> f64>(f: F) -> Result<f64, ChannelError> {
    checked_integral_to(f, f64::INFINITY)
}

fn checked_integral_to<F: Fn(f64) -> f64>(f: F, top: f64) -> Result<f64, ChannelError> {
    let coarse = integrate_split(&f, 1, top);
    let fine = integrate_split(&f, 2, top);
    if !fine.is_finite() {
        return Err(ChannelError::Integration(f64::INFINITY));
    }
    let rel = if fine == 0.0 { (coarse - fine).abs() } else { ((coarse - fine) / fine).abs() };
    if rel > 1e-9 {
        return Err(ChannelError::Integration(rel));
    }
    Ok(fine)
}

fn r0_from_moment(m0: f64, lambda: f64, sec_zeta: f64) -> f64 {
    let k = 2.0 * PI / lambda;
    (0.423 * k * k * sec_zeta * m0).powf(-0.6)
}

fn sec_zeta(theta_deg: f64) -> f64 {
    1.0 / theta_deg.to_radians().sin()
}

pub fn fried_parameter(theta_deg: f64, lambda: f64, profile: &TurbulenceProfile) -> Result<f64, ChannelError> {
    if !(theta_deg > 0.0) {
        return Err(ChannelError::BadElevation(theta_deg));
    }
    let m0 = checked_integral(|h| profile.cn2(h))?;
    Ok(r0_from_moment(m0, lambda, sec_zeta(theta_deg)))
}

/// Greenwood frequency (Hz) along a slant path.
pub fn greenwood_frequency(
    theta_deg: f64,
    lambda: f64,
    profile: &TurbulenceProfile,
    wind: &WindModel,
    slew: f64,
) -> f64 {
    let k = 2.0 * PI / lambda;
    let m = altitude_integral(|h| profile.cn2(h) * wind.speed(h, slew).powf(5.0 / 3.0));
    (0.102 * k * k * sec_zeta(theta_deg) * m).powf(0.6)
}

/// Tyler tilt frequency (Hz) for aperture `d`.
pub fn tyler_frequency(
    theta_deg: f64,
    lambda: f64,
    d: f64,
    profile: &TurbulenceProfile,
    wind: &WindModel,
    slew: f64,
) -> f64 {
    let m = altitude_integral(|h| profile.cn2(h) * wind.speed(h, slew).powi(2));
    0.368 * d.powf(-1.0 / 6.0) / lambda * sec_zeta(theta_deg).sqrt() * m.sqrt()
}

// ---- adaptive optics -----------------------------------------------------

const NOLL_TABLE_LEN: usize = 6000;

/// Per-mode Kolmogorov variance of radial order n >= 1 in units of (D/r0)^(5/3).
pub fn zernike_mode_variance(n: u32) -> f64 {
    assert!(n >= 1, "radial order 0 is piston");
    let nf = n as f64;
    let ln = (8.0 / 3.0) * PI.ln() + ln_gamma(14.0 / 3.0) + ln_gamma(nf - 5.0 / 6.0)
        - 2.0 * ln_gamma(17.0 / 6.0)
        - ln_gamma(nf + 23.0 / 6.0);
    0.0072 * (nf + 1.0) * ln.exp()
}

struct NollTable {
    c: Vec<f64>,
    /// suffix[n] = sum_{m >= n} (m+1) c_m, including an asymptotic tail.
    suffix: Vec<f64>,
}

fn noll_table() -> &'static NollTable {
    static T: OnceLock<NollTable> = OnceLock::new();
    T.get_or_init(|| {
        let mut c = vec![0.0; NOLL_TABLE_LEN + 1];
        for (n, slot) in c.iter_mut().enumerate().skip(1) {
            *slot = zernike_mode_variance(n as u32);
        }
        // (n+1) c_n ~ K n^{-8/3}; tail sum ~ K N^{-5/3} / (5/3)
        let nl = NOLL_TABLE_LEN as f64;
        let k = (nl + 1.0) * c[NOLL_TABLE_LEN] * nl.powf(8.0 / 3.0);
        let tail = k * (nl + 0.5).powf(-5.0 / 3.0) / (5.0 / 3.0);
        let mut suffix = vec![0.0; NOLL_TABLE_LEN + 2];
        suffix[NOLL_TABLE_LEN + 1] = tail;
        for n in (1..=NOLL_TABLE_LEN).rev() {
            suffix[n] = suffix[n + 1] + (n as f64 + 1.0) * c[n];
        }
        NollTable { c, suffix }
    })
}

/// Mean single-mode coupling after correcting radial orders 1..=n_max:
/// prod_{n > n_max} (1 + 2 var_n)^{-(n+1)/2}, times exp(-(f_G/f_c)^{5/3}).
pub fn ao_residual_coupling(d: f64, r0: f64, n_max: u32, fg_over_fc: f64) -> f64 {
    let x = (d / r0).powf(5.0 / 3.0);
    let t = noll_table();
    let mut log_eta = 0.0;
    let mut n = (n_max as usize + 1).max(1);
    while n <= NOLL_TABLE_LEN {
        let y = 2.0 * t.c[n] * x;
        if y < 1e-7 {
            // ln(1+y) = y to within y/2 relative
            log_eta -= x * t.suffix[n];
            break;
        }
        log_eta -= 0.5 * (n as f64 + 1.0) * y.ln_1p();
        n += 1;
    }
    if n > NOLL_TABLE_LEN {
        log_eta -= x * t.suffix[NOLL_TABLE_LEN + 1];
    }
    (log_eta - fg_over_fc.powf(5.0 / 3.0)).exp()
}

// ---- link model ----------------------------------------------------------

/// Elevation-independent turbulence moments, computed once per model.
#[derive(Debug, Clone, Copy)]
struct Moments {
    m0: f64,
    greenwood_wind_only: f64,
    cone: f64,
    m2: f64,
}

/// Everything needed to evaluate the three link types.
#[derive(Debug, Clone)]
pub struct LinkModel {
    pub ground: OpticalTerminal,
    pub satellite: OpticalTerminal,
    pub profile: TurbulenceProfile,
    pub wind: WindModel,
    pub ao: AoConfig,
    pub eta_atm_zenith: f64,
    pub dl_temporal: DownlinkTemporal,
    pub ul_tilt: UplinkTilt,
    moments: Moments,
}

/// Intermediate uplink quantities, for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UplinkBreakdown {
    pub r0: f64,
    pub sigma2_fit: f64,
    pub sigma2_temporal: f64,
    pub sigma2_cone: f64,
    pub strehl: f64,
    pub w_diff: f64,
    pub w_st: f64,
    /// Residual wander variance, rad^2 (both axes).
    pub beta2: f64,
    pub eta_bw_diff: f64,
    pub eta_bw_st: f64,
    pub eta_bwb: f64,
}

impl LinkModel {
    pub fn new(
        ground: OpticalTerminal,
        satellite: OpticalTerminal,
        profile: TurbulenceProfile,
        wind: WindModel,
        ao: AoConfig,
        eta_atm_zenith: f64,
    ) -> Result<Self, ChannelError> {
        ground.validate()?;
        satellite.validate()?;
        if !(eta_atm_zenith > 0.0 && eta_atm_zenith <= 1.0) {
            return Err(ChannelError::Parameter("eta_atm_zenith must lie in (0, 1]".into()));
        }
        if !(ao.correction_bandwidth_hz > 0.0) || ao.z_max < 1 || !(ao.lgs_altitude_km > 0.0) {
            return Err(ChannelError::Parameter("AO bandwidth, Z_max and LGS altitude must be positive".into()));
        }
        if !(profile.hv_a >= 0.0) || !(profile.hv_wind_rms_m_s > 0.0) {
            return Err(ChannelError::Parameter("HV strength must be >= 0 and wind rms > 0".into()));
        }
        let moments = Self::moments(&profile, &wind, &ao)?;
        Ok(LinkModel {
            ground,
            satellite,
            profile,
            wind,
            ao,
            eta_atm_zenith,
            dl_temporal: DownlinkTemporal::default(),
            ul_tilt: UplinkTilt::default(),
            moments,
        })
    }

    /// Table defaults with the given zenith transmission.
    pub fn reference(eta_atm_zenith: f64) -> Self {
        Self::new(
            OpticalTerminal::ground_station(),
            OpticalTerminal::satellite(),
            TurbulenceProfile::hv10_10(),
            WindModel::default(),
            AoConfig::default(),
            eta_atm_zenith,
        )
        .expect("reference link model is valid")
    }

    pub fn with_dl_temporal(mut self, t: DownlinkTemporal) -> Self {
        self.dl_temporal = t;
        self
    }

    pub fn with_ul_tilt(mut self, t: UplinkTilt) -> Self {
        self.ul_tilt = t;
        self
    }

    fn moments(p: &TurbulenceProfile, wind: &WindModel, ao: &AoConfig) -> Result<Moments, ChannelError> {
        let h_lgs = ao.lgs_altitude_km * 1e3;
        Ok(Moments {
            m0: checked_integral(|h| p.cn2(h))?,
            greenwood_wind_only: checked_integral(|h| p.cn2(h) * wind.speed(h, 0.0).powf(5.0 / 3.0))?,
            cone: checked_integral_to(|h| (h / h_lgs).powf(5.0 / 3.0) * p.cn2(h), h_lgs)?,
            m2: checked_integral(|h| p.cn2(h) * h * h)?,
        })
    }

    fn r0(&self, theta: f64, lambda: f64) -> f64 {
        if self.moments.m0 == 0.0 {
            return f64::INFINITY;
        }
        r0_from_moment(self.moments.m0, lambda, sec_zeta(theta))
    }

    fn dl_greenwood(&self, geom: &Topocentric) -> f64 {
        match self.dl_temporal {
            DownlinkTemporal::Off => 0.0,
            DownlinkTemporal::Reference { wavelength_m } => {
                let k = 2.0 * PI / wavelength_m;
                (0.102 * k * k * sec_zeta(geom.elevation) * self.moments.greenwood_wind_only).powf(0.6)
            }
            DownlinkTemporal::Physical => greenwood_frequency(
                geom.elevation,
                self.ground.wavelength_m,
                &self.profile,
                &self.wind,
                geom.los_rate,
            ),
        }
    }

    pub fn downlink(&self, geom: &Topocentric) -> Result<ChannelSample, ChannelError> {
        let tx = &self.satellite;
        let rx = &self.ground;
        let (ff, g_tx, g_rx, eta_fs) = collection_terms(tx, rx, geom.slant_range);
        let eta_coll = near_field(ff);
        let eta_atm = atmospheric_transmission(geom.elevation, self.eta_atm_zenith)?;
        let r0 = self.r0(geom.elevation, rx.wavelength_m);
        let fg = self.dl_greenwood(geom);
        let eta_ao = ao_residual_coupling(rx.aperture_diameter_m, r0, self.ao.n_max, fg / self.ao.correction_bandwidth_hz);
        let eta_0 = rx.optical_coupling;
        let eta_smf = eta_0 * eta_ao;
        Ok(ChannelSample {
            eta_coll,
            eta_coll_ff: ff,
            eta_atm,
            eta_smf,
            eta_ao,
            eta_bwb: 1.0,
            eta_0,
            eta_total: eta_coll * eta_atm * eta_smf,
            g_tx,
            g_rx,
            eta_fs,
        })
    }

    pub fn uplink_breakdown(&self, geom: &Topocentric) -> Result<UplinkBreakdown, ChannelError> {
        let tx = &self.ground;
        let lambda = tx.wavelength_m;
        let l_m = geom.slant_range * 1e3;
        let w0 = tx.uplink_beam_waist_m;
        let w_diff = gaussian_beam_radius(w0, lambda, l_m);
        let theta = geom.elevation;
        if self.moments.m0 == 0.0 {
            return Ok(UplinkBreakdown {
                r0: f64::INFINITY,
                sigma2_fit: 0.0,
                sigma2_temporal: 0.0,
                sigma2_cone: 0.0,
                strehl: 1.0,
                w_diff,
                w_st: w_diff,
                beta2: 0.0,
                eta_bw_diff: 1.0,
                eta_bw_st: 1.0,
                eta_bwb: 1.0,
            });
        }
        let sz = sec_zeta(theta);
        let r0 = self.r0(theta, lambda);
        let d_up = 2.0 * w0;

        // higher-order residual of the laser-guide-star loop
        let sigma2_fit = 0.2944 * (self.ao.z_max as f64).powf(-(3f64.sqrt()) / 2.0) * (d_up / r0).powf(5.0 / 3.0);
        let fg = greenwood_frequency(theta, lambda, &self.profile, &self.wind, geom.los_rate);
        let sigma2_temporal = (fg / self.ao.correction_bandwidth_hz).powf(5.0 / 3.0);
        let d0 = lambda.powf(1.2) * (1.0 / sz).powf(0.6) * (19.77 * self.moments.cone).powf(-0.6);
        let sigma2_cone = (d_up / d0).powf(5.0 / 3.0);
        let s = strehl(sigma2_fit + sigma2_temporal + sigma2_cone);

        // short-term broadening
        let ratio = d_up / r0;
        let yura = (1.0 - 0.62 * ratio.powf(-1.0 / 3.0)).max(0.0).powf(1.2);
        let w_st = w_diff * (1.0 + ratio * ratio * yura).sqrt();

        // residual tilt, both axes, rad^2
        let dt = self.ul_tilt.sensor_aperture_m;
        let f_t = tyler_frequency(theta, lambda, dt, &self.profile, &self.wind, geom.los_rate);
        let s_delay = 2.0 * (f_t / self.ao.correction_bandwidth_hz * lambda / dt).powi(2);
        let point_ahead = 2.0 * geom.los_rate * l_m / C_LIGHT_M_S;
        let full_tilt = 6.08 * dt.powf(-1.0 / 3.0) * sz * self.moments.m0;
        let s_aniso = (6.08 * dt.powf(-1.0 / 3.0) * sz * (point_ahead * sz / dt).powi(2) * self.moments.m2)
            .min(2.0 * full_tilt);
        let s_snr = 2.0 * ((3.0 * PI / 16.0) * lambda / dt / self.ul_tilt.beacon_snr).powi(2);
        let s_centroid = 2.0 * 0.0122 * (dt / r0).powf(5.0 / 3.0) * (lambda / dt).powi(2);
        let beta2 = s_delay + s_aniso + s_snr + s_centroid;

        let th_diff = w_diff / l_m;
        let th_st = w_st / l_m;
        let eta_bw_diff = (-beta2 / (th_diff * th_diff)).exp();
        let eta_bw_st = (-beta2 / (th_st * th_st)).exp();
        let eta_bwb = s * eta_bw_diff + (1.0 - s) * (w_diff / w_st).powi(2) * eta_bw_st;
        Ok(UplinkBreakdown {
            r0,
            sigma2_fit,
            sigma2_temporal,
            sigma2_cone,
            strehl: s,
            w_diff,
            w_st,
            beta2,
            eta_bw_diff,
            eta_bw_st,
            eta_bwb,
        })
    }

    pub fn uplink(&self, geom: &Topocentric) -> Result<ChannelSample, ChannelError> {
        let tx = &self.ground;
        let rx = &self.satellite;
        let b = self.uplink_breakdown(geom)?;
        let (eta_coll, ff) = gaussian_collection(b.w_diff, rx.aperture_diameter_m);
        let eta_atm = atmospheric_transmission(geom.elevation, self.eta_atm_zenith)?;
        let eta_0 = rx.optical_coupling;
        let l_m = geom.slant_range * 1e3;
        let eta_fs = (tx.wavelength_m / (4.0 * PI * l_m)).powi(2);
        let g_rx = rx.aperture_gain();
        Ok(ChannelSample {
            eta_coll,
            eta_coll_ff: ff,
            eta_atm,
            eta_smf: 1.0,
            eta_ao: 1.0,
            eta_bwb: b.eta_bwb,
            eta_0,
            eta_total: eta_coll * eta_atm * b.eta_bwb * eta_0,
            g_tx: ff / (g_rx * eta_fs),
            g_rx,
            eta_fs,
        })
    }

    pub fn intersat(&self, l_km: f64) -> ChannelSample {
        let (ff, g_tx, g_rx, eta_fs) = collection_terms(&self.satellite, &self.satellite, l_km);
        let eta_coll = near_field(ff);
        let eta_0 = self.satellite.optical_coupling;
        ChannelSample {
            eta_coll,
            eta_coll_ff: ff,
            eta_atm: 1.0,
            eta_smf: 1.0,
            eta_ao: 1.0,
            eta_bwb: 1.0,
            eta_0,
            eta_total: eta_coll * eta_0,
            g_tx,
            g_rx,
            eta_fs,
        }
    }

    /// Zenith transmission that makes the downlink budget at `geom` equal
    /// `target_db`. Exact because the atmosphere enters linearly at zenith.
    pub fn calibrate_eta_zenith(&self, geom: &Topocentric, target_db: f64) -> Result<f64, ChannelError> {
        let mut probe = self.clone();
        probe.eta_atm_zenith = 1.0;
        let dl = probe.downlink(geom)?;
        let rest = dl.eta_total / dl.eta_atm;
        let s = geom.elevation.to_radians().sin();
        let eta = (from_db(target_db) / rest).powf(s);
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(ChannelError::Calibration(format!(
                "downlink budget without atmosphere is {:.3} dB, above the {target_db} dB target",
                to_db(rest)
            )));
        }
        Ok(eta)
    }
}
