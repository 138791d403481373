//! TOML scenario files.
//!
//! Every key carries its unit in the name. Missing keys fall back to the
//! reference parameter tables and each fallback is logged with the table it
//! came from. Unknown keys are rejected.

use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{
    AoConfig, DownlinkTemporal, LinkModel, OpticalTerminal, TurbulenceProfile, UplinkTilt, WindModel,
    ETA_ATM_ZENITH_DEFAULT,
};
use crate::engine::{CampaignConfig, ConstellationSpec, OptimizerConfig, Scenario};
use crate::orbit::{EarthShape, EpochClock, GravityModel, GroundStation, KeplerElements, R_EARTH};
use crate::swap::{Architecture, CutoffSearch, DeviceParams, MemoryParams, Objective};

const TABLE_LINK: &str = "Communication link parameters";
const TABLE_REPEATER: &str = "Quantum repeater parameters";
const TABLE_ORBIT: &str = "Orbit simulation parameters";
const TABLE_REPO: &str = "repository default";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("missing required keys: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("{}{path}: {msg}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Range { path: String, line: Option<usize>, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Pass,
    Sweep,
    Annual,
    SwapBench,
}

impl RunMode {
    pub fn label(&self) -> &'static str {
        match self {
            RunMode::Pass => "pass",
            RunMode::Sweep => "sweep",
            RunMode::Annual => "annual",
            RunMode::SwapBench => "swap-bench",
        }
    }
}

// ---- raw document ----------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub architecture: Option<Architecture>,
    #[serde(default)]
    pub run: RunDoc,
    pub stations: Option<StationsDoc>,
    pub constellation: Option<ConstellationDoc>,
    #[serde(default)]
    pub link: LinkDoc,
    #[serde(default)]
    pub repeater: RepeaterDoc,
    #[serde(default)]
    pub orbit: OrbitDoc,
    #[serde(default)]
    pub sweep: SweepDoc,
    #[serde(default)]
    pub annual: AnnualDoc,
    #[serde(default)]
    pub bench: BenchDoc,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDoc {
    pub mode: Option<RunMode>,
    pub step_s: Option<f64>,
    pub seed: Option<u64>,
    pub night_only: Option<bool>,
    pub half_window_s: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationDoc {
    pub name: Option<String>,
    pub lat_deg: f64,
    pub lon_deg: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationsDoc {
    pub alice: Option<StationDoc>,
    pub bob: Option<StationDoc>,
    pub shape: Option<EarthShape>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstellationKind {
    Aligned,
    Elements,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatelliteDoc {
    pub altitude_km: f64,
    pub e: f64,
    pub i_deg: f64,
    pub raan_deg: f64,
    pub argp_deg: f64,
    pub true_anomaly_deg: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationDoc {
    pub kind: Option<ConstellationKind>,
    pub altitude_km: Option<f64>,
    pub ratio: Option<f64>,
    pub alignment_s: Option<f64>,
    pub delta_lambda_deg: Option<f64>,
    pub satellites: Option<Vec<SatelliteDoc>>,
    /// Indices of (outer A, central, outer B) in `satellites`.
    pub roles: Option<[usize; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalDoc {
    pub aperture_m: Option<f64>,
    pub wavelength_nm: Option<f64>,
    pub optical_coupling: Option<f64>,
    pub tx_gain_efficiency: Option<f64>,
    pub beam_waist_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurbulenceDoc {
    /// `hv10_10`, `vacuum` or `custom`.
    pub profile: Option<String>,
    pub hv_a: Option<f64>,
    pub hv_wind_m_s: Option<f64>,
    /// Calibrate `hv_a` and the rms wind to these zenith values at 500 nm.
    pub r0_m: Option<f64>,
    pub theta0_urad: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindDoc {
    pub v_ground_m_s: Option<f64>,
    pub v_peak_m_s: Option<f64>,
    pub h_peak_km: Option<f64>,
    pub h_scale_km: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AoDoc {
    pub n_max: Option<u32>,
    pub z_max: Option<u32>,
    pub bandwidth_hz: Option<f64>,
    pub lgs_altitude_km: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DlTemporalDoc {
    /// `off`, `reference` or `physical`.
    pub mode: Option<String>,
    pub wavelength_nm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UlTiltDoc {
    pub sensor_aperture_m: Option<f64>,
    pub beacon_snr: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub eta_atm_zenith: Option<f64>,
    pub theta_min_deg: Option<f64>,
    pub grazing_altitude_km: Option<f64>,
    #[serde(default)]
    pub ground: TerminalDoc,
    #[serde(default)]
    pub satellite: TerminalDoc,
    #[serde(default)]
    pub turbulence: TurbulenceDoc,
    #[serde(default)]
    pub wind: WindDoc,
    #[serde(default)]
    pub ao: AoDoc,
    #[serde(default)]
    pub dl_temporal: DlTemporalDoc,
    #[serde(default)]
    pub ul_tilt: UlTiltDoc,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryDoc {
    pub tau_ms: Option<f64>,
    pub coherence_ms: Option<f64>,
    pub eta_ret: Option<f64>,
    pub eta_plus: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerDoc {
    pub objective: Option<Objective>,
    pub max_cutoff_bins: Option<u64>,
    pub grid_points: Option<usize>,
    pub research_every: Option<usize>,
    pub per_pass: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepeaterDoc {
    pub rate_mhz: Option<f64>,
    pub eta_eps: Option<f64>,
    pub eta_spd: Option<f64>,
    pub eta_qnd: Option<f64>,
    pub eta_bsm: Option<f64>,
    #[serde(default)]
    pub memory: MemoryDoc,
    /// Overrides for memory B; unset keys follow `memory`.
    pub memory_b: Option<MemoryDoc>,
    #[serde(default)]
    pub optimizer: OptimizerDoc,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitDoc {
    /// `j2` or `keplerian`.
    pub gravity: Option<String>,
    pub integrator_step_s: Option<f64>,
    /// UTC, `YYYY-MM-DDTHH:MM:SS`.
    pub epoch_utc: Option<String>,
    pub night_threshold_deg: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDoc {
    pub altitudes_km: Option<Vec<f64>>,
    pub ratios: Option<Vec<f64>>,
    pub half_window_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnualDoc {
    pub duration_days: Option<f64>,
    pub coarse_step_s: Option<f64>,
    pub margin_deg: Option<f64>,
    /// Longitude shifts for the single-pass comparison; empty to skip.
    pub delta_lambda_deg: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchDoc {
    pub n_bins: Option<u64>,
    pub eta: Option<Vec<f64>>,
    pub d_rt_bins: Option<Vec<u64>>,
    pub d_cut_a_bins: Option<u64>,
    pub d_cut_b_bins: Option<u64>,
    /// Memory in bins: 1/e decay and coherence lengths.
    pub tau_bins: Option<f64>,
    pub coherence_bins: Option<f64>,
    pub eta_ret: Option<f64>,
    pub eta_plus: Option<f64>,
    pub batches: Option<u32>,
}

// ---- resolved run ----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSettings {
    pub altitudes_km: Vec<f64>,
    pub ratios: Vec<f64>,
    pub half_window_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnualSettings {
    pub duration_days: f64,
    pub coarse_step_s: f64,
    pub margin_deg: f64,
    pub delta_lambda_deg: Vec<f64>,
}

impl AnnualSettings {
    pub fn campaign(&self, keep_records: bool) -> CampaignConfig {
        CampaignConfig {
            duration_s: self.duration_days * 86_400.0,
            coarse_step_s: self.coarse_step_s,
            margin_deg: self.margin_deg,
            keep_records,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSettings {
    pub n_bins: u64,
    pub eta: Vec<f64>,
    pub d_rt_bins: Vec<u64>,
    pub d_cut_a_bins: u64,
    pub d_cut_b_bins: u64,
    pub tau_bins: f64,
    pub coherence_bins: f64,
    pub eta_ret: f64,
    pub eta_plus: f64,
    pub batches: u32,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: RunMode,
    pub seed: u64,
    pub half_window_s: f64,
    pub scenario: Scenario,
    pub sweep: SweepSettings,
    pub annual: AnnualSettings,
    pub bench: BenchSettings,
    /// `key = value (source)` for every resolved setting, in document order.
    pub resolved: Vec<(String, String, String)>,
}

/// Tracks defaults and locates keys in the source for diagnostics.
struct Resolver<'a> {
    src: &'a str,
    resolved: Vec<(String, String, String)>,
}

impl<'a> Resolver<'a> {
    fn take<T: Copy + std::fmt::Display>(&mut self, path: &str, v: Option<T>, default: T, table: &str) -> T {
        match v {
            Some(x) => {
                self.resolved.push((path.into(), x.to_string(), "config".into()));
                x
            }
            None => {
                log::info!("default {path} = {default} ({table})");
                self.resolved.push((path.into(), default.to_string(), table.into()));
                default
            }
        }
    }

    fn take_vec<T: Clone + std::fmt::Debug>(&mut self, path: &str, v: Option<Vec<T>>, default: Vec<T>, table: &str) -> Vec<T> {
        let (x, src) = match v {
            Some(x) => (x, "config"),
            None => {
                log::info!("default {path} = {default:?} ({table})");
                (default, table)
            }
        };
        self.resolved.push((path.into(), format!("{x:?}"), src.into()));
        x
    }

    fn range(&self, path: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::Range { path: path.into(), line: locate(self.src, path), msg: msg.into() }
    }

    fn check(&self, path: &str, ok: bool, msg: &str) -> Result<(), ConfigError> {
        if ok {
            Ok(())
        } else {
            Err(self.range(path, msg))
        }
    }

    fn prob(&self, path: &str, v: f64) -> Result<(), ConfigError> {
        self.check(path, (0.0..=1.0).contains(&v), "must lie in [0, 1]")
    }

    fn positive(&self, path: &str, v: f64) -> Result<(), ConfigError> {
        self.check(path, v > 0.0 && v.is_finite(), "must be positive and finite")
    }
}

/// 1-based line of `a.b.key` (or `a.b.key[i].field`) in a TOML source.
/// Heuristic: finds the `[a.b]` header (or `[[a.b.key]]` blocks) and the first
/// `key =` line after it.
pub fn locate(src: &str, path: &str) -> Option<usize> {
    let clean: String = path.chars().filter(|c| !matches!(c, '[' | ']')).collect();
    let mut parts: Vec<&str> = clean.split('.').collect();
    // array index `satellites[2]` became `satellites2`; strip digits
    let idx = path.find('[').and_then(|s| path[s + 1..].split(']').next()).and_then(|n| n.parse::<usize>().ok());
    let key = parts.pop()?.to_string();
    let lines: Vec<&str> = src.lines().collect();
    let header = |l: &str| -> Option<String> {
        let t = l.trim();
        if t.starts_with('[') {
            Some(t.trim_matches(|c| c == '[' || c == ']').trim().to_string())
        } else {
            None
        }
    };
    let key_line = |from: usize, k: &str| -> Option<usize> {
        for (j, l) in lines.iter().enumerate().skip(from) {
            if j > from && header(l).is_some() {
                return None;
            }
            let t = l.trim_start();
            if let Some(rest) = t.strip_prefix(k) {
                if rest.trim_start().starts_with('=') {
                    return Some(j + 1);
                }
            }
        }
        None
    };
    if let Some(i) = idx {
        // [[parent.array]] blocks
        let arr: String = parts.iter().map(|p| p.trim_end_matches(char::is_numeric)).collect::<Vec<_>>().join(".");
        let mut seen = 0;
        for (j, l) in lines.iter().enumerate() {
            if l.trim().starts_with("[[") && header(l).as_deref() == Some(arr.as_str()) {
                if seen == i {
                    return key_line(j, &key);
                }
                seen += 1;
            }
        }
        return None;
    }
    let table = parts.join(".");
    if table.is_empty() {
        return key_line(0, &key);
    }
    for (j, l) in lines.iter().enumerate() {
        if !l.trim().starts_with("[[") && header(l).as_deref() == Some(table.as_str()) {
            return key_line(j, &key);
        }
    }
    None
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let src = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_str(&src)
}

pub fn parse_str(src: &str) -> Result<RunConfig, ConfigError> {
    let doc: ConfigDocument = toml::from_str(src).map_err(|e| ConfigError::Parse(e.to_string()))?;
    resolve(doc, src)
}

fn terminal(r: &mut Resolver, prefix: &str, d: &TerminalDoc, base: OpticalTerminal, what: &str) -> Result<OpticalTerminal, ConfigError> {
    let p = |k: &str| format!("{prefix}.{k}");
    let t = OpticalTerminal {
        aperture_diameter_m: r.take(&p("aperture_m"), d.aperture_m, base.aperture_diameter_m, TABLE_LINK),
        wavelength_m: 1e-9 * r.take(&p("wavelength_nm"), d.wavelength_nm, base.wavelength_m * 1e9, TABLE_LINK),
        optical_coupling: r.take(&p("optical_coupling"), d.optical_coupling, base.optical_coupling, TABLE_REPO),
        tx_gain_efficiency: r.take(&p("tx_gain_efficiency"), d.tx_gain_efficiency, base.tx_gain_efficiency, TABLE_REPO),
        uplink_beam_waist_m: r.take(&p("beam_waist_m"), d.beam_waist_m, base.uplink_beam_waist_m, TABLE_LINK),
    };
    r.positive(&p("aperture_m"), t.aperture_diameter_m)?;
    r.positive(&p("wavelength_nm"), t.wavelength_m)?;
    r.check(&p("optical_coupling"), t.optical_coupling > 0.0 && t.optical_coupling <= 1.0, "must lie in (0, 1]")?;
    r.check(&p("tx_gain_efficiency"), t.tx_gain_efficiency > 0.0 && t.tx_gain_efficiency <= 1.0, "must lie in (0, 1]")?;
    r.positive(&p("beam_waist_m"), t.uplink_beam_waist_m)?;
    log::debug!("{what} terminal resolved");
    Ok(t)
}

fn memory(r: &mut Resolver, prefix: &str, d: &MemoryDoc, base: MemoryParams, table: &str) -> Result<MemoryParams, ConfigError> {
    let p = |k: &str| format!("{prefix}.{k}");
    let m = MemoryParams {
        tau_s: 1e-3 * r.take(&p("tau_ms"), d.tau_ms, base.tau_s * 1e3, table),
        t_coh_s: 1e-3 * r.take(&p("coherence_ms"), d.coherence_ms, base.t_coh_s * 1e3, table),
        eta_ret: r.take(&p("eta_ret"), d.eta_ret, base.eta_ret, table),
        eta_plus: r.take(&p("eta_plus"), d.eta_plus, base.eta_plus, TABLE_REPO),
    };
    r.check(&p("tau_ms"), m.tau_s > 0.0, "must be positive (inf disables decay)")?;
    r.check(&p("coherence_ms"), m.t_coh_s > 0.0, "must be positive (inf disables dephasing)")?;
    r.prob(&p("eta_ret"), m.eta_ret)?;
    r.prob(&p("eta_plus"), m.eta_plus)?;
    Ok(m)
}

fn resolve(doc: ConfigDocument, src: &str) -> Result<RunConfig, ConfigError> {
    let mut missing = Vec::new();
    if doc.architecture.is_none() {
        missing.push("architecture".to_string());
    }
    match &doc.stations {
        None => missing.extend(["stations.alice".to_string(), "stations.bob".to_string()]),
        Some(s) => {
            if s.alice.is_none() {
                missing.push("stations.alice".into());
            }
            if s.bob.is_none() {
                missing.push("stations.bob".into());
            }
        }
    }
    if doc.constellation.as_ref().and_then(|c| c.kind).is_none() {
        missing.push("constellation.kind".into());
    }
    if !missing.is_empty() {
        return Err(ConfigError::Missing(missing));
    }
    let mut r = Resolver { src, resolved: Vec::new() };
    let architecture = doc.architecture.unwrap();
    r.resolved.push(("architecture".into(), architecture.label().into(), "config".into()));

    // run
    let mode = r.take("run.mode", doc.run.mode.map(|m| m.label()), "pass", TABLE_REPO);
    let mode = match mode {
        "sweep" => RunMode::Sweep,
        "annual" => RunMode::Annual,
        "swap-bench" => RunMode::SwapBench,
        _ => RunMode::Pass,
    };
    let step_s = r.take("run.step_s", doc.run.step_s, 1.0, TABLE_ORBIT);
    r.positive("run.step_s", step_s)?;
    let seed = r.take("run.seed", doc.run.seed, 1, TABLE_REPO);
    let night_only = r.take("run.night_only", doc.run.night_only, false, TABLE_REPO);
    let half_window_s = r.take("run.half_window_s", doc.run.half_window_s, 1000.0, TABLE_REPO);
    r.positive("run.half_window_s", half_window_s)?;

    // stations
    let st = doc.stations.unwrap();
    let mut station = |key: &str, d: StationDoc| -> Result<GroundStation, ConfigError> {
        let path = format!("stations.{key}");
        if !(-90.0..=90.0).contains(&d.lat_deg) {
            return Err(r.range(&format!("{path}.lat_deg"), "must lie in [-90, 90]"));
        }
        if !d.lon_deg.is_finite() {
            return Err(r.range(&format!("{path}.lon_deg"), "must be finite"));
        }
        let name = d.name.unwrap_or_else(|| key.to_string());
        r.resolved.push((path, format!("{name} ({}, {})", d.lat_deg, d.lon_deg), "config".into()));
        Ok(GroundStation::new(&name, d.lat_deg, d.lon_deg))
    };
    let alice = station("alice", st.alice.unwrap())?;
    let bob = station("bob", st.bob.unwrap())?;
    let shape = st.shape.unwrap_or_default();
    r.resolved.push(("stations.shape".into(), format!("{shape:?}").to_lowercase(), "config".into()));

    // orbit
    let gravity_name = r.take("orbit.gravity", doc.orbit.gravity.as_deref(), "j2", TABLE_ORBIT);
    let gravity = match gravity_name {
        "j2" => GravityModel::j2(),
        "keplerian" => GravityModel::keplerian(),
        other => return Err(r.range("orbit.gravity", format!("unknown model {other:?}; expected j2 or keplerian"))),
    };
    let integrator_step_s = r.take("orbit.integrator_step_s", doc.orbit.integrator_step_s, 1.0, TABLE_ORBIT);
    r.positive("orbit.integrator_step_s", integrator_step_s)?;
    let epoch_s = r.take("orbit.epoch_utc", doc.orbit.epoch_utc.as_deref(), "2020-01-01T02:00:00", TABLE_ORBIT);
    let epoch = NaiveDateTime::parse_from_str(epoch_s, "%Y-%m-%dT%H:%M:%S")
        .map_err(|e| r.range("orbit.epoch_utc", format!("expected YYYY-MM-DDTHH:MM:SS ({e})")))?;
    let night_threshold_deg = r.take("orbit.night_threshold_deg", doc.orbit.night_threshold_deg, -6.0, TABLE_REPO);

    // constellation
    let c = doc.constellation.unwrap();
    let kind = c.kind.unwrap();
    let delta_lambda_deg = r.take("constellation.delta_lambda_deg", c.delta_lambda_deg, 0.0, TABLE_REPO);
    let constellation = match kind {
        ConstellationKind::Aligned => {
            if c.satellites.is_some() || c.roles.is_some() {
                return Err(r.range("constellation.satellites", "not allowed with kind = \"aligned\""));
            }
            let altitude_km = r.take("constellation.altitude_km", c.altitude_km, 500.0, TABLE_ORBIT);
            r.positive("constellation.altitude_km", altitude_km)?;
            let ratio = r.take("constellation.ratio", c.ratio, 1.0, TABLE_ORBIT);
            r.positive("constellation.ratio", ratio)?;
            let alignment_s = r.take("constellation.alignment_s", c.alignment_s, 0.0, TABLE_REPO);
            ConstellationSpec::Aligned { altitude_km, ratio, alignment_s }
        }
        ConstellationKind::Elements => {
            for k in ["altitude_km", "ratio", "alignment_s"] {
                let set = match k {
                    "altitude_km" => c.altitude_km.is_some(),
                    "ratio" => c.ratio.is_some(),
                    _ => c.alignment_s.is_some(),
                };
                if set {
                    return Err(r.range(&format!("constellation.{k}"), "only allowed with kind = \"aligned\""));
                }
            }
            let sats = c.satellites.ok_or_else(|| ConfigError::Missing(vec!["constellation.satellites".into()]))?;
            if sats.len() != 3 {
                return Err(r.range("constellation.satellites", format!("expected 3 satellites, got {}", sats.len())));
            }
            let mut els = [KeplerElements::circular(500.0, 0.0, 0.0, 0.0); 3];
            for (k, s) in sats.iter().enumerate() {
                let p = |f: &str| format!("constellation.satellites[{k}].{f}");
                r.check(&p("e"), (0.0..1.0).contains(&s.e), "eccentricity must lie in [0, 1)")?;
                r.positive(&p("altitude_km"), s.altitude_km)?;
                r.check(&p("i_deg"), (0.0..=180.0).contains(&s.i_deg), "must lie in [0, 180]")?;
                for (f, v) in [("raan_deg", s.raan_deg), ("argp_deg", s.argp_deg), ("true_anomaly_deg", s.true_anomaly_deg)] {
                    r.check(&p(f), v.is_finite(), "must be finite")?;
                }
                els[k] = KeplerElements {
                    a: R_EARTH + s.altitude_km,
                    e: s.e,
                    i: s.i_deg,
                    raan: s.raan_deg,
                    argp: s.argp_deg,
                    true_anomaly: s.true_anomaly_deg,
                };
                r.resolved.push((format!("constellation.satellites[{k}]"), format!("{:?}", els[k]), "config".into()));
            }
            let roles = c.roles.unwrap_or([0, 1, 2]);
            let mut sorted = roles;
            sorted.sort_unstable();
            r.check("constellation.roles", sorted == [0, 1, 2], "must be a permutation of 0, 1, 2")?;
            r.resolved.push(("constellation.roles".into(), format!("{roles:?}"), "config".into()));
            ConstellationSpec::Elements { satellites: els, roles }
        }
    };

    // link
    let l = &doc.link;
    let eta_atm_zenith = r.take("link.eta_atm_zenith", l.eta_atm_zenith, ETA_ATM_ZENITH_DEFAULT, TABLE_REPO);
    r.check("link.eta_atm_zenith", eta_atm_zenith > 0.0 && eta_atm_zenith <= 1.0, "must lie in (0, 1]")?;
    let theta_min_deg = r.take("link.theta_min_deg", l.theta_min_deg, 20.0, TABLE_LINK);
    r.check("link.theta_min_deg", theta_min_deg > 0.0 && theta_min_deg < 90.0, "must lie in (0, 90)")?;
    let grazing_altitude_km = r.take("link.grazing_altitude_km", l.grazing_altitude_km, 20.0, TABLE_REPO);
    r.check("link.grazing_altitude_km", grazing_altitude_km >= 0.0, "must be non-negative")?;
    let ground = terminal(&mut r, "link.ground", &l.ground, OpticalTerminal::ground_station(), "ground")?;
    let satellite = terminal(&mut r, "link.satellite", &l.satellite, OpticalTerminal::satellite(), "satellite")?;

    let t = &l.turbulence;
    let profile_name = r.take("link.turbulence.profile", t.profile.as_deref(), "hv10_10", TABLE_LINK);
    let profile = match profile_name {
        "hv10_10" => {
            if let (Some(r0), Some(th)) = (t.r0_m, t.theta0_urad) {
                r.positive("link.turbulence.r0_m", r0)?;
                r.positive("link.turbulence.theta0_urad", th)?;
                TurbulenceProfile::calibrate_hv(r0, th * 1e-6, 500e-9)
                    .map_err(|e| r.range("link.turbulence.r0_m", e.to_string()))?
            } else {
                TurbulenceProfile::hv10_10()
            }
        }
        "vacuum" => TurbulenceProfile::vacuum(),
        "custom" => {
            let a = t.hv_a.ok_or_else(|| ConfigError::Missing(vec!["link.turbulence.hv_a".into()]))?;
            let v = t.hv_wind_m_s.ok_or_else(|| ConfigError::Missing(vec!["link.turbulence.hv_wind_m_s".into()]))?;
            r.check("link.turbulence.hv_a", a >= 0.0, "must be non-negative")?;
            r.positive("link.turbulence.hv_wind_m_s", v)?;
            TurbulenceProfile { hv_a: a, hv_wind_rms_m_s: v, label: "custom".into() }
        }
        other => {
            return Err(r.range("link.turbulence.profile", format!("unknown profile {other:?}; expected hv10_10, vacuum or custom")))
        }
    };
    r.resolved.push(("link.turbulence.hv_a".into(), format!("{:e}", profile.hv_a), "resolved".into()));
    r.resolved.push(("link.turbulence.hv_wind_m_s".into(), format!("{}", profile.hv_wind_rms_m_s), "resolved".into()));

    let wd = WindModel::default();
    let wind = WindModel {
        v_ground_m_s: r.take("link.wind.v_ground_m_s", l.wind.v_ground_m_s, wd.v_ground_m_s, TABLE_REPO),
        v_tropopause_peak_m_s: r.take("link.wind.v_peak_m_s", l.wind.v_peak_m_s, wd.v_tropopause_peak_m_s, TABLE_REPO),
        h_peak_km: r.take("link.wind.h_peak_km", l.wind.h_peak_km, wd.h_peak_km, TABLE_REPO),
        h_scale_km: r.take("link.wind.h_scale_km", l.wind.h_scale_km, wd.h_scale_km, TABLE_REPO),
    };
    r.check("link.wind.v_ground_m_s", wind.v_ground_m_s >= 0.0, "must be non-negative")?;
    r.check("link.wind.v_peak_m_s", wind.v_tropopause_peak_m_s >= 0.0, "must be non-negative")?;
    r.positive("link.wind.h_scale_km", wind.h_scale_km)?;

    let ad = AoConfig::default();
    let ao = AoConfig {
        n_max: r.take("link.ao.n_max", l.ao.n_max, ad.n_max, TABLE_LINK),
        z_max: r.take("link.ao.z_max", l.ao.z_max, ad.z_max, TABLE_LINK),
        correction_bandwidth_hz: r.take("link.ao.bandwidth_hz", l.ao.bandwidth_hz, ad.correction_bandwidth_hz, TABLE_LINK),
        lgs_altitude_km: r.take("link.ao.lgs_altitude_km", l.ao.lgs_altitude_km, ad.lgs_altitude_km, TABLE_LINK),
    };
    r.check("link.ao.z_max", ao.z_max >= 1, "must be at least 1")?;
    r.positive("link.ao.bandwidth_hz", ao.correction_bandwidth_hz)?;
    r.positive("link.ao.lgs_altitude_km", ao.lgs_altitude_km)?;

    let dl_mode = r.take("link.dl_temporal.mode", l.dl_temporal.mode.as_deref(), "reference", TABLE_REPO);
    let dl_temporal = match dl_mode {
        "off" => DownlinkTemporal::Off,
        "physical" => DownlinkTemporal::Physical,
        "reference" => {
            let nm = r.take("link.dl_temporal.wavelength_nm", l.dl_temporal.wavelength_nm, 500.0, TABLE_REPO);
            r.positive("link.dl_temporal.wavelength_nm", nm)?;
            DownlinkTemporal::Reference { wavelength_m: nm * 1e-9 }
        }
        other => {
            return Err(r.range("link.dl_temporal.mode", format!("unknown mode {other:?}; expected off, reference or physical")))
        }
    };
    let td = UplinkTilt::default();
    let ul_tilt = UplinkTilt {
        sensor_aperture_m: r.take("link.ul_tilt.sensor_aperture_m", l.ul_tilt.sensor_aperture_m, td.sensor_aperture_m, TABLE_REPO),
        beacon_snr: r.take("link.ul_tilt.beacon_snr", l.ul_tilt.beacon_snr, td.beacon_snr, TABLE_REPO),
    };
    r.positive("link.ul_tilt.sensor_aperture_m", ul_tilt.sensor_aperture_m)?;
    r.positive("link.ul_tilt.beacon_snr", ul_tilt.beacon_snr)?;

    let link = LinkModel::new(ground, satellite, profile, wind, ao, eta_atm_zenith)
        .map_err(|e| r.range("link", e.to_string()))?
        .with_dl_temporal(dl_temporal)
        .with_ul_tilt(ul_tilt);

    // repeater
    let rp = &doc.repeater;
    let dd = DeviceParams::default();
    let device = DeviceParams {
        rate_hz: 1e6 * r.take("repeater.rate_mhz", rp.rate_mhz, dd.rate_hz * 1e-6, TABLE_REPEATER),
        eta_eps: r.take("repeater.eta_eps", rp.eta_eps, dd.eta_eps, TABLE_REPEATER),
        eta_spd: r.take("repeater.eta_spd", rp.eta_spd, dd.eta_spd, TABLE_REPEATER),
        eta_qnd: r.take("repeater.eta_qnd", rp.eta_qnd, dd.eta_qnd, TABLE_REPEATER),
        eta_bsm: r.take("repeater.eta_bsm", rp.eta_bsm, dd.eta_bsm, TABLE_REPEATER),
    };
    r.positive("repeater.rate_mhz", device.rate_hz)?;
    for (k, v) in [("eta_eps", device.eta_eps), ("eta_spd", device.eta_spd), ("eta_qnd", device.eta_qnd)] {
        r.prob(&format!("repeater.{k}"), v)?;
    }
    r.check("repeater.eta_bsm", (0.0..=0.5).contains(&device.eta_bsm), "must lie in [0, 0.5]")?;
    let mem_default = MemoryParams { tau_s: 0.1, t_coh_s: 0.06, eta_ret: 0.1, eta_plus: 1.0 };
    let memory_a = memory(&mut r, "repeater.memory", &rp.memory, mem_default, TABLE_REPEATER)?;
    let memory_b = match &rp.memory_b {
        Some(mb) => memory(&mut r, "repeater.memory_b", mb, memory_a, "repeater.memory")?,
        None => memory_a,
    };
    let od = OptimizerConfig::default();
    let o = &rp.optimizer;
    let objective = o.objective.unwrap_or_default();
    r.resolved.push(("repeater.optimizer.objective".into(), format!("{objective:?}").to_lowercase(), "config".into()));
    let optimizer = OptimizerConfig {
        search: CutoffSearch {
            objective,
            max_cutoff: r.take("repeater.optimizer.max_cutoff_bins", o.max_cutoff_bins, od.search.max_cutoff, TABLE_REPO),
            grid_points: r.take("repeater.optimizer.grid_points", o.grid_points, od.search.grid_points, TABLE_REPO),
        },
        research_every: r.take("repeater.optimizer.research_every", o.research_every, od.research_every, TABLE_REPO),
        per_pass: r.take("repeater.optimizer.per_pass", o.per_pass, od.per_pass, TABLE_REPO),
    };
    r.check("repeater.optimizer.max_cutoff_bins", optimizer.search.max_cutoff >= 1, "must be at least 1")?;
    r.check("repeater.optimizer.grid_points", optimizer.search.grid_points >= 2, "must be at least 2")?;
    r.check("repeater.optimizer.research_every", optimizer.research_every >= 1, "must be at least 1")?;

    // sweep
    let s = &doc.sweep;
    let sweep = SweepSettings {
        altitudes_km: r.take_vec("sweep.altitudes_km", s.altitudes_km.clone(), vec![500.0, 750.0, 1000.0], TABLE_REPO),
        ratios: r.take_vec("sweep.ratios", s.ratios.clone(), vec![0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 1.0, 1.05, 1.2], TABLE_REPO),
        half_window_s: r.take("sweep.half_window_s", s.half_window_s, 1200.0, TABLE_REPO),
    };
    r.check("sweep.altitudes_km", !sweep.altitudes_km.is_empty() && sweep.altitudes_km.iter().all(|&h| h > 0.0), "must be a non-empty list of positive values")?;
    r.check("sweep.ratios", !sweep.ratios.is_empty() && sweep.ratios.iter().all(|&x| x > 0.0), "must be a non-empty list of positive values")?;
    r.positive("sweep.half_window_s", sweep.half_window_s)?;

    // annual
    let a = &doc.annual;
    let annual = AnnualSettings {
        duration_days: r.take("annual.duration_days", a.duration_days, 365.0, TABLE_ORBIT),
        coarse_step_s: r.take("annual.coarse_step_s", a.coarse_step_s, 10.0, TABLE_REPO),
        margin_deg: r.take("annual.margin_deg", a.margin_deg, 5.0, TABLE_REPO),
        delta_lambda_deg: r.take_vec("annual.delta_lambda_deg", a.delta_lambda_deg.clone(), vec![], TABLE_REPO),
    };
    r.positive("annual.duration_days", annual.duration_days)?;
    r.check("annual.coarse_step_s", annual.coarse_step_s >= step_s, "must be at least run.step_s")?;
    r.check("annual.margin_deg", annual.margin_deg >= 0.0, "must be non-negative")?;

    // bench
    let b = &doc.bench;
    let bench = BenchSettings {
        n_bins: r.take("bench.n_bins", b.n_bins, 10_000_000, TABLE_REPO),
        eta: r.take_vec("bench.eta", b.eta.clone(), vec![1e-3, 10f64.powf(-2.5), 1e-2, 10f64.powf(-1.5), 1e-1], TABLE_REPO),
        d_rt_bins: r.take_vec("bench.d_rt_bins", b.d_rt_bins.clone(), vec![0, 1000, 10000], TABLE_REPO),
        d_cut_a_bins: r.take("bench.d_cut_a_bins", b.d_cut_a_bins, 2000, TABLE_REPO),
        d_cut_b_bins: r.take("bench.d_cut_b_bins", b.d_cut_b_bins, 3000, TABLE_REPO),
        tau_bins: r.take("bench.tau_bins", b.tau_bins, 3e4, TABLE_REPO),
        coherence_bins: r.take("bench.coherence_bins", b.coherence_bins, 2e4, TABLE_REPO),
        eta_ret: r.take("bench.eta_ret", b.eta_ret, 0.5, TABLE_REPO),
        eta_plus: r.take("bench.eta_plus", b.eta_plus, 0.95, TABLE_REPO),
        batches: r.take("bench.batches", b.batches, 100, TABLE_REPO),
    };
    r.check("bench.n_bins", bench.n_bins >= 1, "must be at least 1")?;
    r.check("bench.eta", !bench.eta.is_empty() && bench.eta.iter().all(|&x| (0.0..=1.0).contains(&x)), "must be a non-empty list in [0, 1]")?;
    r.check("bench.d_rt_bins", !bench.d_rt_bins.is_empty(), "must be non-empty")?;
    r.positive("bench.tau_bins", bench.tau_bins)?;
    r.positive("bench.coherence_bins", bench.coherence_bins)?;
    r.prob("bench.eta_ret", bench.eta_ret)?;
    r.prob("bench.eta_plus", bench.eta_plus)?;
    r.check("bench.batches", bench.batches >= 2, "must be at least 2")?;

    let scenario = Scenario {
        architecture,
        alice,
        bob,
        earth_shape: shape,
        constellation,
        delta_lambda_deg,
        gravity,
        clock: EpochClock::new(epoch),
        integrator_step_s,
        link,
        device,
        memory_a,
        memory_b,
        theta_min_deg,
        grazing_altitude_km,
        night_threshold_deg,
        night_only,
        step_s,
        optimizer,
    };
    scenario.validate().map_err(|e| r.range("scenario", e.to_string()))?;
    Ok(RunConfig { mode, seed, half_window_s, scenario, sweep, annual, bench, resolved: r.resolved })
}
