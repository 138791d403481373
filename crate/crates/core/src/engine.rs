//! Scenario orchestration: constellation construction, per-step evaluation,
//! single passes, parameter sweeps and year-long campaigns.

use serde::Serialize;
use thiserror::Error;

use crate::channel::{ChannelError, ChannelSample, LinkModel};
use crate::geometry::{line_of_sight, topocentric, Topocentric};
use crate::orbit::{
    advance, cartesian_to_kepler, is_night, kepler_to_cartesian, rk4_step, site_state, EarthShape, EpochClock,
    GravityModel, GroundStation, KeplerElements, OrbitError, StateVector, Vec3,
};
use crate::swap::{
    optimize_cutoffs, optimize_cutoffs_from, optimize_cutoffs_joint, to_bins, Architecture, BinMemory, BsmRates,
    CutoffSearch, DeviceParams, MemoryParams, SwapKernel,
};

/// Speed of light, km/s.
pub const C_KM_S: f64 = 299_792.458;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("infeasible constellation: {0}")]
    Infeasible(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstellationSpec {
    /// Co-planar circular constellation aligned over both stations at
    /// `alignment_s`; the outer satellites are `ratio` times the stations'
    /// separation apart.
    Aligned { altitude_km: f64, ratio: f64, alignment_s: f64 },
    /// Explicit elements at the scenario epoch. `roles` gives the indices of
    /// (outer A, central, outer B).
    Elements { satellites: [KeplerElements; 3], roles: [usize; 3] },
}

/// Satellite states ordered (outer A, central, outer B).
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub states: [StateVector; 3],
    pub elements: [KeplerElements; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub search: CutoffSearch,
    pub research_every: usize,
    /// One cutoff pair per pass instead of per step.
    pub per_pass: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { search: CutoffSearch::default(), research_every: 30, per_pass: false }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub architecture: Architecture,
    pub alice: GroundStation,
    pub bob: GroundStation,
    pub earth_shape: EarthShape,
    pub constellation: ConstellationSpec,
    /// Joint RAAN rotation of all three satellites, deg.
    pub delta_lambda_deg: f64,
    pub gravity: GravityModel,
    pub clock: EpochClock,
    pub integrator_step_s: f64,
    pub link: LinkModel,
    pub device: DeviceParams,
    pub memory_a: MemoryParams,
    pub memory_b: MemoryParams,
    pub theta_min_deg: f64,
    pub grazing_altitude_km: f64,
    pub night_threshold_deg: f64,
    pub night_only: bool,
    pub step_s: f64,
    pub optimizer: OptimizerConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Invalid(m));
        if !(self.theta_min_deg > 0.0 && self.theta_min_deg < 90.0) {
            return bad(format!("theta_min_deg = {} must lie in (0, 90)", self.theta_min_deg));
        }
        if !(self.step_s > 0.0) || !self.step_s.is_finite() {
            return bad(format!("step_s = {} must be positive", self.step_s));
        }
        if !(self.integrator_step_s > 0.0) {
            return bad("integrator_step_s must be positive".into());
        }
        if !(self.grazing_altitude_km >= 0.0) {
            return bad("grazing_altitude_km must be non-negative".into());
        }
        self.device.validate().map_err(EngineError::Invalid)?;
        self.memory_a.validate().map_err(|m| EngineError::Invalid(format!("memory A: {m}")))?;
        self.memory_b.validate().map_err(|m| EngineError::Invalid(format!("memory B: {m}")))?;
        if let ConstellationSpec::Elements { satellites, roles } = &self.constellation {
            let mut seen = [false; 3];
            for &r in roles {
                if r > 2 || seen[r] {
                    return bad(format!("roles {roles:?} must be a permutation of 0, 1, 2"));
                }
                seen[r] = true;
            }
            for el in satellites {
                el.validate()?;
            }
        }
        if let ConstellationSpec::Aligned { altitude_km, ratio, .. } = &self.constellation {
            if !(*altitude_km > 0.0) {
                return bad("altitude_km must be positive".into());
            }
            if !(*ratio > 0.0) {
                return bad("ratio must be positive".into());
            }
        }
        Ok(())
    }

    fn bin_memories(&self) -> (BinMemory, BinMemory) {
        (self.memory_a.in_bins(self.device.rate_hz), self.memory_b.in_bins(self.device.rate_hz))
    }

    /// Epoch of the constellation's initial states.
    pub fn constellation_epoch(&self) -> f64 {
        match self.constellation {
            ConstellationSpec::Aligned { alignment_s, .. } => alignment_s,
            ConstellationSpec::Elements { .. } => 0.0,
        }
    }
}

fn rotate_z(v: &Vec3, deg: f64) -> Vec3 {
    let (s, c) = deg.to_radians().sin_cos();
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

/// Point on the station's local vertical at geocentric radius `a`.
fn zenith_point(site_pos: &Vec3, up: &Vec3, a: f64) -> Vec3 {
    let pn = site_pos.dot(up);
    let s = -pn + (pn * pn - site_pos.norm_squared() + a * a).sqrt();
    site_pos + s * up
}

pub fn build_constellation(sc: &Scenario) -> Result<Constellation, EngineError> {
    let g = &sc.gravity;
    let mut states = match &sc.constellation {
        ConstellationSpec::Aligned { altitude_km, ratio, alignment_s } => {
            let a = g.r_e + altitude_km;
            let t = *alignment_s;
            let sa = site_state(&sc.alice, &sc.clock, t, sc.earth_shape);
            let sb = site_state(&sc.bob, &sc.clock, t, sc.earth_shape);
            let pa = zenith_point(&sa.pos, &sa.up, a).normalize();
            let pb = zenith_point(&sb.pos, &sb.up, a).normalize();
            let mut h = pa.cross(&pb);
            if h.norm() < 1e-9 {
                return Err(EngineError::Infeasible(
                    "stations are coincident or antipodal; no unique orbital plane".into(),
                ));
            }
            h = h.normalize();
            if h.z < 0.0 {
                h = -h;
            }
            let m = (pa + pb).normalize();
            let along = h.cross(&m);
            let phi = |p: &Vec3| p.dot(&along).atan2(p.dot(&m));
            let v = (g.mu / a).sqrt();
            let place = |ang: f64| {
                let rhat = ang.cos() * m + ang.sin() * along;
                StateVector::new(a * rhat, v * h.cross(&rhat), t)
            };
            [place(ratio * phi(&pa)), place(0.0), place(ratio * phi(&pb))]
        }
        ConstellationSpec::Elements { satellites, roles } => {
            let mut out = [StateVector::new(Vec3::zeros(), Vec3::zeros(), 0.0); 3];
            for (slot, &idx) in roles.iter().enumerate() {
                out[slot] = kepler_to_cartesian(&satellites[idx], g)?;
            }
            out
        }
    };
    if sc.delta_lambda_deg != 0.0 {
        for s in states.iter_mut() {
            s.r = rotate_z(&s.r, sc.delta_lambda_deg);
            s.v = rotate_z(&s.v, sc.delta_lambda_deg);
        }
    }
    let elements = [
        cartesian_to_kepler(&states[0], g)?,
        cartesian_to_kepler(&states[1], g)?,
        cartesian_to_kepler(&states[2], g)?,
    ];
    Ok(Constellation { states, elements })
}

/// States of the three satellites at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub sats: [StateVector; 3],
}

/// Samples at `t0 + k * step` for `k = 0..n`, integrated from the
/// constellation epoch in both directions as needed.
pub fn sample_window(sc: &Scenario, c: &Constellation, t0: f64, n: usize) -> Result<Vec<Sample>, EngineError> {
    let g = &sc.gravity;
    let h = sc.integrator_step_s.min(sc.step_s);
    let mut cur = c.states;
    for s in cur.iter_mut() {
        *s = advance(s, g, t0, h)?;
    }
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let t = t0 + k as f64 * sc.step_s;
        if k > 0 {
            for s in cur.iter_mut() {
                *s = advance(s, g, t, h)?;
            }
        }
        out.push(Sample { t, sats: cur });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: f64,
    pub theta_a: f64,
    pub theta_b: f64,
    pub l_a: f64,
    pub l_b: f64,
    pub l_is_a: f64,
    pub l_is_b: f64,
    pub los_a: bool,
    pub los_b: bool,
    /// All links required by the architecture are available.
    pub linked: bool,
    #[serde(skip)]
    pub ground_a: Option<ChannelSample>,
    #[serde(skip)]
    pub ground_b: Option<ChannelSample>,
    #[serde(skip)]
    pub is_a: Option<ChannelSample>,
    #[serde(skip)]
    pub is_b: Option<ChannelSample>,
    pub eta_a: f64,
    pub eta_b: f64,
    pub trt_a_s: f64,
    pub trt_b_s: f64,
    pub d_cut_a: u64,
    pub d_cut_b: u64,
    /// Hz.
    pub rates: BsmRates,
    pub night: bool,
}

/// Geometry of one sample before any channel evaluation.
#[derive(Debug, Clone, Copy)]
struct StepGeometry {
    topo_a: Topocentric,
    topo_b: Topocentric,
    l_is_a: f64,
    l_is_b: f64,
    los_a: bool,
    los_b: bool,
    night: bool,
}

/// Link inputs of one step, as consumed by the rate stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLinks {
    pub eta_ground: [f64; 2],
    pub eta_is: [f64; 2],
    pub l_ground_km: [f64; 2],
    pub l_is_km: [f64; 2],
}

/// Round-trip times (s) for the architecture.
pub fn round_trip_times(arch: Architecture, l_ground_km: [f64; 2], l_is_km: [f64; 2]) -> (f64, f64) {
    let l = match arch {
        Architecture::Downlink => l_ground_km,
        Architecture::Uplink => l_is_km,
    };
    (2.0 * l[0] / C_KM_S, 2.0 * l[1] / C_KM_S)
}

/// Kernel for one step's links: link probabilities and round trips in bins.
pub fn step_kernel(
    arch: Architecture,
    links: &StepLinks,
    dev: &DeviceParams,
    mem_a: BinMemory,
    mem_b: BinMemory,
) -> (SwapKernel, f64, f64) {
    let eta_a = crate::swap::link_success(links.eta_ground[0], links.eta_is[0], dev, arch);
    let eta_b = crate::swap::link_success(links.eta_ground[1], links.eta_is[1], dev, arch);
    let (ta, tb) = round_trip_times(arch, links.l_ground_km, links.l_is_km);
    let k = SwapKernel::new(eta_a, eta_b, to_bins(ta, dev.rate_hz), to_bins(tb, dev.rate_hz), mem_a, mem_b);
    (k, ta, tb)
}

pub struct Evaluator<'a> {
    sc: &'a Scenario,
    mem_a: BinMemory,
    mem_b: BinMemory,
}

impl<'a> Evaluator<'a> {
    pub fn new(sc: &'a Scenario) -> Self {
        let (mem_a, mem_b) = sc.bin_memories();
        Evaluator { sc, mem_a, mem_b }
    }

    fn geometry(&self, s: &Sample) -> StepGeometry {
        let sc = self.sc;
        let site_a = site_state(&sc.alice, &sc.clock, s.t, sc.earth_shape);
        let site_b = site_state(&sc.bob, &sc.clock, s.t, sc.earth_shape);
        let [sa, scen, sb] = &s.sats;
        StepGeometry {
            topo_a: topocentric(&site_a, sa),
            topo_b: topocentric(&site_b, sb),
            l_is_a: (sa.r - scen.r).norm(),
            l_is_b: (sb.r - scen.r).norm(),
            los_a: line_of_sight(&sa.r, &scen.r, sc.grazing_altitude_km),
            los_b: line_of_sight(&sb.r, &scen.r, sc.grazing_altitude_km),
            night: is_night(&sc.alice, &sc.clock, s.t, sc.night_threshold_deg, sc.earth_shape)
                && is_night(&sc.bob, &sc.clock, s.t, sc.night_threshold_deg, sc.earth_shape),
        }
    }

    fn elevation_ok(&self, g: &StepGeometry) -> bool {
        g.topo_a.elevation >= self.sc.theta_min_deg && g.topo_b.elevation >= self.sc.theta_min_deg
    }

    fn ground_channel(&self, topo: &Topocentric) -> Result<ChannelSample, ChannelError> {
        match self.sc.architecture {
            Architecture::Downlink => self.sc.link.downlink(topo),
            Architecture::Uplink => self.sc.link.uplink(topo),
        }
    }

    fn blank(&self, t: f64, g: &StepGeometry) -> StepRecord {
        StepRecord {
            t,
            theta_a: g.topo_a.elevation,
            theta_b: g.topo_b.elevation,
            l_a: g.topo_a.slant_range,
            l_b: g.topo_b.slant_range,
            l_is_a: g.l_is_a,
            l_is_b: g.l_is_b,
            los_a: g.los_a,
            los_b: g.los_b,
            linked: false,
            ground_a: None,
            ground_b: None,
            is_a: None,
            is_b: None,
            eta_a: 0.0,
            eta_b: 0.0,
            trt_a_s: 0.0,
            trt_b_s: 0.0,
            d_cut_a: 0,
            d_cut_b: 0,
            rates: BsmRates::default(),
            night: g.night,
        }
    }

    /// Evaluates a contiguous run of samples. Rates are zero on every step
    /// whose links are not all available. With `truncate_on_los`, a failed
    /// inter-satellite line of sight ends the current elevation window: the
    /// rest of it is reported unlinked.
    pub fn evaluate(&self, samples: &[Sample], truncate_on_los: bool) -> Result<Vec<StepRecord>, EngineError> {
        let sc = self.sc;
        let mut recs = Vec::with_capacity(samples.len());
        let mut kernels: Vec<Option<SwapKernel>> = Vec::with_capacity(samples.len());
        let mut blocked = false;
        for s in samples {
            let g = self.geometry(s);
            let mut rec = self.blank(s.t, &g);
            let elev = self.elevation_ok(&g);
            if !elev {
                blocked = false;
            }
            let los = g.los_a && g.los_b;
            if elev && !los && truncate_on_los {
                blocked = true;
            }
            let day_excluded = sc.night_only && !g.night;
            if elev && los && !blocked && !day_excluded {
                let ga = self.ground_channel(&g.topo_a)?;
                let gb = self.ground_channel(&g.topo_b)?;
                let ia = sc.link.intersat(g.l_is_a);
                let ib = sc.link.intersat(g.l_is_b);
                let links = StepLinks {
                    eta_ground: [ga.eta_total, gb.eta_total],
                    eta_is: [ia.eta_total, ib.eta_total],
                    l_ground_km: [g.topo_a.slant_range, g.topo_b.slant_range],
                    l_is_km: [g.l_is_a, g.l_is_b],
                };
                let (k, ta, tb) = step_kernel(sc.architecture, &links, &sc.device, self.mem_a, self.mem_b);
                rec.linked = true;
                rec.ground_a = Some(ga);
                rec.ground_b = Some(gb);
                rec.is_a = Some(ia);
                rec.is_b = Some(ib);
                rec.eta_a = k.eta_a;
                rec.eta_b = k.eta_b;
                rec.trt_a_s = ta;
                rec.trt_b_s = tb;
                kernels.push(Some(k));
            } else {
                kernels.push(None);
            }
            recs.push(rec);
        }
        self.assign_cutoffs(&mut recs, &kernels);
        Ok(recs)
    }

    fn assign_cutoffs(&self, recs: &mut [StepRecord], kernels: &[Option<SwapKernel>]) {
        let opt = &self.sc.optimizer;
        let rate = self.sc.device.rate_hz;
        if opt.per_pass {
            // one pair per contiguous linked run
            let mut i = 0;
            while i < kernels.len() {
                if kernels[i].is_none() {
                    i += 1;
                    continue;
                }
                let j = (i..kernels.len()).find(|&j| kernels[j].is_none()).unwrap_or(kernels.len());
                let ks: Vec<SwapKernel> = kernels[i..j].iter().map(|k| k.unwrap()).collect();
                let w = vec![1.0; ks.len()];
                let (da, db) = optimize_cutoffs_joint(&ks, &w, &opt.search);
                for (r, k) in recs[i..j].iter_mut().zip(&ks) {
                    r.d_cut_a = da;
                    r.d_cut_b = db;
                    r.rates = k.rates(da, db).scaled(rate);
                }
                i = j;
            }
            return;
        }
        let mut prev: Option<(u64, u64)> = None;
        let mut since_full = 0usize;
        for (r, k) in recs.iter_mut().zip(kernels) {
            let Some(k) = k else {
                prev = None;
                continue;
            };
            let c = match prev {
                Some(p) if since_full < opt.research_every => {
                    since_full += 1;
                    optimize_cutoffs_from(k, &opt.search, p)
                }
                _ => {
                    since_full = 1;
                    optimize_cutoffs(k, &opt.search)
                }
            };
            prev = Some((c.d_cut_a, c.d_cut_b));
            r.d_cut_a = c.d_cut_a;
            r.d_cut_b = c.d_cut_b;
            r.rates = c.rates.scaled(rate);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassSummary {
    pub t_start: f64,
    pub t_end: f64,
    pub duration_s: f64,
    pub max_elevation_a: f64,
    pub max_elevation_b: f64,
    /// Peak rates, Hz.
    pub peak: BsmRates,
    /// Expected counts over the pass.
    pub totals: BsmRates,
    pub night: bool,
    pub truncated: bool,
}

/// Quasi-static integration: each linked step contributes rate x step.
pub fn summarize(records: &[StepRecord], step_s: f64) -> Option<PassSummary> {
    let linked: Vec<&StepRecord> = records.iter().filter(|r| r.linked).collect();
    let first = linked.first()?;
    let last = linked.last()?;
    let mut peak = BsmRates::default();
    let mut tot = BsmRates::default();
    for r in &linked {
        let x = &r.rates;
        peak.attempted = peak.attempted.max(x.attempted);
        peak.successful = peak.successful.max(x.successful);
        peak.correct = peak.correct.max(x.correct);
        peak.erroneous = peak.erroneous.max(x.erroneous);
        peak.secure = peak.secure.max(x.secure);
        peak.qber_x = peak.qber_x.max(x.qber_x);
        tot.attempted += x.attempted * step_s;
        tot.successful += x.successful * step_s;
        tot.correct += x.correct * step_s;
        tot.erroneous += x.erroneous * step_s;
        tot.secure += x.secure * step_s;
    }
    tot.qber_x = if tot.successful > 0.0 { tot.erroneous / tot.successful } else { 0.0 };
    let maxe = |f: fn(&StepRecord) -> f64| linked.iter().map(|r| f(r)).fold(f64::NEG_INFINITY, f64::max);
    Some(PassSummary {
        t_start: first.t,
        t_end: last.t + step_s,
        duration_s: linked.len() as f64 * step_s,
        max_elevation_a: maxe(|r| r.theta_a),
        max_elevation_b: maxe(|r| r.theta_b),
        peak,
        totals: tot,
        night: linked.iter().all(|r| r.night),
        truncated: false,
    })
}

#[derive(Debug, Clone)]
pub struct PassResult {
    pub constellation: Constellation,
    pub records: Vec<StepRecord>,
    pub summary: Option<PassSummary>,
}

/// Evaluates `[t0, t0 + span)` around the constellation epoch.
pub fn simulate_window(sc: &Scenario, t0: f64, span_s: f64) -> Result<PassResult, EngineError> {
    sc.validate()?;
    let c = build_constellation(sc)?;
    let n = (span_s / sc.step_s).round() as usize;
    let samples = sample_window(sc, &c, t0, n)?;
    let records = Evaluator::new(sc).evaluate(&samples, true)?;
    let summary = summarize(&records, sc.step_s);
    Ok(PassResult { constellation: c, records, summary })
}

/// A pass centred on the constellation epoch, `half_window_s` either side.
pub fn simulate_pass(sc: &Scenario, half_window_s: f64) -> Result<PassResult, EngineError> {
    let t_mid = sc.constellation_epoch();
    simulate_window(sc, t_mid - half_window_s, 2.0 * half_window_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Infeasibility {
    /// The two ground links never reach the minimum elevation together.
    GroundElevation,
    /// Ground elevation is met but an inter-satellite link is occluded.
    IntersatOcclusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepCell {
    pub altitude_km: f64,
    pub ratio: f64,
    pub secure_total: f64,
    pub duration_s: f64,
    pub infeasible: Option<Infeasibility>,
}

/// Per-pass secure totals over altitude x ratio, rebuilding an aligned
/// constellation for each cell.
pub fn sweep(sc: &Scenario, altitudes_km: &[f64], ratios: &[f64], half_window_s: f64) -> Result<Vec<SweepCell>, EngineError> {
    if altitudes_km.is_empty() || ratios.is_empty() {
        return Err(EngineError::Invalid("sweep needs at least one altitude and one ratio".into()));
    }
    let alignment_s = sc.constellation_epoch();
    let mut out = Vec::new();
    for &h in altitudes_km {
        for &r in ratios {
            let mut cell_sc = sc.clone();
            cell_sc.constellation = ConstellationSpec::Aligned { altitude_km: h, ratio: r, alignment_s };
            let res = simulate_pass(&cell_sc, half_window_s)?;
            let infeasible = match res.summary {
                Some(_) => None,
                None => {
                    let elev_only = res
                        .records
                        .iter()
                        .any(|x| x.theta_a >= sc.theta_min_deg && x.theta_b >= sc.theta_min_deg);
                    Some(if elev_only { Infeasibility::IntersatOcclusion } else { Infeasibility::GroundElevation })
                }
            };
            let (secure_total, duration_s) = res.summary.map(|s| (s.totals.secure, s.duration_s)).unwrap_or((0.0, 0.0));
            out.push(SweepCell { altitude_km: h, ratio: r, secure_total, duration_s, infeasible });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CampaignConfig {
    pub duration_s: f64,
    pub coarse_step_s: f64,
    pub margin_deg: f64,
    /// Keep per-step records of every pass.
    pub keep_records: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig { duration_s: 365.0 * 86_400.0, coarse_step_s: 10.0, margin_deg: 5.0, keep_records: false }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CampaignResult {
    pub passes: Vec<PassSummary>,
    pub records: Vec<StepRecord>,
    pub total: BsmRates,
    pub night_total: BsmRates,
    pub duration_s: f64,
}

impl CampaignResult {
    fn add(&mut self, p: PassSummary) {
        let acc = |t: &mut BsmRates, x: &BsmRates| {
            t.attempted += x.attempted;
            t.successful += x.successful;
            t.correct += x.correct;
            t.erroneous += x.erroneous;
            t.secure += x.secure;
            t.qber_x = if t.successful > 0.0 { t.erroneous / t.successful } else { 0.0 };
        };
        acc(&mut self.total, &p.totals);
        if p.night {
            acc(&mut self.night_total, &p.totals);
        }
        self.passes.push(p);
    }

    /// (pass end time, cumulative night secure, cumulative total secure).
    pub fn cumulative_secure(&self) -> Vec<(f64, f64, f64)> {
        let mut night = 0.0;
        let mut all = 0.0;
        self.passes
            .iter()
            .map(|p| {
                all += p.totals.secure;
                if p.night {
                    night += p.totals.secure;
                }
                (p.t_end, night, all)
            })
            .collect()
    }

    pub fn peak_secure(&self, night_only: bool) -> f64 {
        self.passes.iter().filter(|p| p.night || !night_only).map(|p| p.peak.secure).fold(0.0, f64::max)
    }
}

/// Splits evaluated records into passes: maximal runs where both ground
/// elevations meet the threshold, with counts only from linked steps.
fn passes_in(records: &[StepRecord], theta_min: f64, step_s: f64) -> Vec<(PassSummary, std::ops::Range<usize>)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let up = |r: &StepRecord| r.theta_a >= theta_min && r.theta_b >= theta_min;
        if !up(&records[i]) {
            i += 1;
            continue;
        }
        let j = (i..records.len()).find(|&j| !up(&records[j])).unwrap_or(records.len());
        let seg = &records[i..j];
        if let Some(mut s) = summarize(seg, step_s) {
            s.truncated = seg.iter().any(|r| !(r.los_a && r.los_b));
            out.push((s, i..j));
        }
        i = j;
    }
    out
}

struct Propagator<'a> {
    g: &'a GravityModel,
    h: f64,
    cur: [StateVector; 3],
}

impl Propagator<'_> {
    fn step(&mut self) -> Result<(), EngineError> {
        for s in self.cur.iter_mut() {
            let t = s.epoch + self.h;
            *s = rk4_step(s, self.g, self.h);
            s.epoch = t;
            let rn = s.r.norm();
            if rn < self.g.r_e {
                return Err(OrbitError::Impact { t, r: rn }.into());
            }
        }
        Ok(())
    }
}

/// Year-long (or any span) campaign with two-resolution stepping: the
/// trajectory is integrated continuously at the fine step; every coarse step
/// both ground elevations are checked against `theta_min - margin`, and only
/// fine samples around successful checks are evaluated.
pub fn annual_campaign(sc: &Scenario, cfg: &CampaignConfig) -> Result<CampaignResult, EngineError> {
    sc.validate()?;
    let c = build_constellation(sc)?;
    let t_begin = sc.constellation_epoch();
    let fine = sc.step_s;
    let ratio = (cfg.coarse_step_s / fine).round().max(1.0) as usize;
    let n_total = (cfg.duration_s / fine).round() as usize;
    let ev = Evaluator::new(sc);
    let mut prop = Propagator { g: &sc.gravity, h: fine, cur: c.states };
    for s in prop.cur.iter_mut() {
        s.epoch = t_begin;
    }
    let mut result = CampaignResult { duration_s: cfg.duration_s, ..Default::default() };
    let mut ring: std::collections::VecDeque<Sample> = std::collections::VecDeque::with_capacity(ratio + 1);
    let mut segment: Vec<Sample> = Vec::new();
    let mut active = false;
    let level = sc.theta_min_deg - cfg.margin_deg;

    let flush = |segment: &mut Vec<Sample>, result: &mut CampaignResult| -> Result<(), EngineError> {
        if segment.is_empty() {
            return Ok(());
        }
        let recs = ev.evaluate(segment, true)?;
        for (p, range) in passes_in(&recs, sc.theta_min_deg, fine) {
            if cfg.keep_records {
                result.records.extend_from_slice(&recs[range]);
            }
            result.add(p);
        }
        segment.clear();
        Ok(())
    };

    for k in 0..=n_total {
        if k > 0 {
            prop.step()?;
        }
        let t = t_begin + k as f64 * fine;
        let sample = Sample { t, sats: prop.cur };
        if ring.len() == ratio {
            ring.pop_front();
        }
        ring.push_back(sample);
        if active {
            segment.push(sample);
        }
        if k % ratio == 0 {
            let site_a = site_state(&sc.alice, &sc.clock, t, sc.earth_shape);
            let site_b = site_state(&sc.bob, &sc.clock, t, sc.earth_shape);
            let up = topocentric(&site_a, &sample.sats[0]).elevation >= level
                && topocentric(&site_b, &sample.sats[2]).elevation >= level;
            match (active, up) {
                (false, true) => {
                    // backfill the fine samples since the last coarse check
                    segment.extend(ring.iter().copied());
                    active = true;
                }
                (true, false) => {
                    flush(&mut segment, &mut result)?;
                    active = false;
                }
                _ => {}
            }
        }
    }
    flush(&mut segment, &mut result)?;
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaLambdaPoint {
    pub delta_lambda_deg: f64,
    pub secure_total: f64,
    pub duration_s: f64,
}

/// Secure total and duration of the first pass after the constellation
/// epoch, repeated with all RAANs rotated by each `deltas` value. The first
/// pass found without rotation fixes the evaluation window for the others.
pub fn delta_lambda_study(sc: &Scenario, deltas: &[f64], search_s: f64, margin_s: f64) -> Result<Vec<DeltaLambdaPoint>, EngineError> {
    let mut base = sc.clone();
    base.delta_lambda_deg = 0.0;
    let probe = annual_campaign(&base, &CampaignConfig { duration_s: search_s, ..Default::default() })?;
    let first = probe
        .passes
        .first()
        .ok_or_else(|| EngineError::Infeasible(format!("no pass within {search_s} s of the epoch")))?;
    let t0 = first.t_start - margin_s;
    let span = first.t_end - first.t_start + 2.0 * margin_s;
    let mut out = Vec::new();
    for &d in deltas {
        let mut s = sc.clone();
        s.delta_lambda_deg = d;
        let res = simulate_window(&s, t0, span)?;
        let best = passes_in(&res.records, s.theta_min_deg, s.step_s)
            .into_iter()
            .map(|(p, _)| p)
            .max_by(|a, b| a.totals.secure.total_cmp(&b.totals.secure));
        out.push(DeltaLambdaPoint {
            delta_lambda_deg: d,
            secure_total: best.map(|p| p.totals.secure).unwrap_or(0.0),
            duration_s: best.map(|p| p.duration_s).unwrap_or(0.0),
        });
    }
    Ok(out)
}

/// Station and constellation presets used by the shipped configurations.
pub mod presets {
    use super::*;
    use crate::channel::{DownlinkTemporal, ETA_ATM_ZENITH_DEFAULT};
    use crate::orbit::R_EARTH;
    use chrono::NaiveDate;

    pub fn new_york() -> GroundStation {
        GroundStation::new("New York City", 40.7128, -74.0060)
    }

    pub fn berlin() -> GroundStation {
        GroundStation::new("Berlin", 52.52, 13.405)
    }

    pub fn madrid() -> GroundStation {
        GroundStation::new("Madrid", 40.4168, -3.7038)
    }

    pub fn initial_epoch() -> EpochClock {
        EpochClock::new(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(2, 0, 0).unwrap())
    }

    fn el(h: f64, e: f64, i: f64, raan: f64, argp: f64, f: f64) -> KeplerElements {
        KeplerElements { a: R_EARTH + h, e, i, raan, argp, true_anomaly: f }
    }

    /// Constant inter-satellite distance configuration, satellites 1..3.
    pub fn constant_separation_elements() -> [KeplerElements; 3] {
        [
            el(500.0, 0.0, 56.70, 28.10, 0.0, 317.0),
            el(505.44, 8.18e-4, 56.7149, 28.0894, 353.6335, 352.1689),
            el(505.39, 9.58e-4, 56.7147, 28.0885, 32.9083, 341.7007),
        ]
    }

    /// Sun-synchronous configuration, satellites 1..3.
    pub fn sso_elements() -> [KeplerElements; 3] {
        [
            el(500.0, 0.0, 97.4055, 68.50, 0.0, 308.0),
            el(504.31, 17e-4, 97.3974, 114.1435, 176.0524, 145.1230),
            el(503.85, 4.07e-4, 97.3919, 159.2328, 22.0563, 297.7079),
        ]
    }

    /// Intercontinental downlink zenith pass at 500 km with table defaults.
    pub fn ic_zenith(arch: Architecture) -> Scenario {
        Scenario {
            architecture: arch,
            alice: new_york(),
            bob: berlin(),
            earth_shape: EarthShape::Wgs84,
            constellation: ConstellationSpec::Aligned { altitude_km: 500.0, ratio: 1.0, alignment_s: 0.0 },
            delta_lambda_deg: 0.0,
            gravity: GravityModel::j2(),
            clock: initial_epoch(),
            integrator_step_s: 1.0,
            link: LinkModel::reference(ETA_ATM_ZENITH_DEFAULT).with_dl_temporal(DownlinkTemporal::default()),
            device: DeviceParams::default(),
            memory_a: table_memory(),
            memory_b: table_memory(),
            theta_min_deg: 20.0,
            grazing_altitude_km: 20.0,
            night_threshold_deg: -6.0,
            night_only: false,
            step_s: 1.0,
            optimizer: OptimizerConfig::default(),
        }
    }

    pub fn eu_zenith() -> Scenario {
        Scenario { alice: madrid(), bob: berlin(), ..ic_zenith(Architecture::Downlink) }
    }

    pub fn table_memory() -> MemoryParams {
        MemoryParams { tau_s: 0.1, t_coh_s: 0.06, eta_ret: 0.1, eta_plus: 1.0 }
    }

    pub fn constant_separation() -> Scenario {
        Scenario {
            constellation: ConstellationSpec::Elements { satellites: constant_separation_elements(), roles: [0, 1, 2] },
            ..ic_zenith(Architecture::Downlink)
        }
    }

    pub fn sso() -> Scenario {
        Scenario {
            constellation: ConstellationSpec::Elements { satellites: sso_elements(), roles: [0, 1, 2] },
            ..ic_zenith(Architecture::Downlink)
        }
    }
}
