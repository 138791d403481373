//! Closed-form BSM counts for memory-assisted swapping on discrete time bins,
//! and cutoff optimisation.
//!
//! All counts are per trial (per time bin); multiply by the repetition rate
//! for Hz.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryParams {
    /// Decay time, s. `inf` disables decay exactly.
    pub tau_s: f64,
    /// Coherence time, s. `inf` disables dephasing exactly.
    pub t_coh_s: f64,
    pub eta_ret: f64,
    pub eta_plus: f64,
}

impl MemoryParams {
    pub fn ideal() -> Self {
        MemoryParams { tau_s: f64::INFINITY, t_coh_s: f64::INFINITY, eta_ret: 1.0, eta_plus: 1.0 }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.tau_s > 0.0) {
            return Err("tau_s must be positive".into());
        }
        if !(self.t_coh_s > 0.0) {
            return Err("t_coh_s must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.eta_ret) {
            return Err("eta_ret must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.eta_plus) {
            return Err("eta_plus must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn in_bins(&self, rate_hz: f64) -> BinMemory {
        let per_bin = |t: f64| if t.is_infinite() { 0.0 } else { -1.0 / (t * rate_hz) };
        BinMemory { ln_p: per_bin(self.tau_s), ln_coh: per_bin(self.t_coh_s), eta_ret: self.eta_ret, eta_plus: self.eta_plus }
    }
}

/// Memory parameters expressed per time bin: `ln_p = ln p = -1/(tau R)` and
/// `ln_coh` the same for the coherence time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinMemory {
    pub ln_p: f64,
    pub ln_coh: f64,
    pub eta_ret: f64,
    pub eta_plus: f64,
}

impl BinMemory {
    pub fn ideal() -> Self {
        BinMemory { ln_p: 0.0, ln_coh: 0.0, eta_ret: 1.0, eta_plus: 1.0 }
    }

    pub fn p(&self) -> f64 {
        self.ln_p.exp()
    }

    pub fn coh(&self) -> f64 {
        self.ln_coh.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    pub eta_eps: f64,
    pub eta_spd: f64,
    pub eta_qnd: f64,
    pub eta_bsm: f64,
    pub rate_hz: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams { eta_eps: 0.2, eta_spd: 0.95, eta_qnd: 0.8, eta_bsm: 0.5, rate_hz: 90e6 }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("eta_eps", self.eta_eps),
            ("eta_spd", self.eta_spd),
            ("eta_qnd", self.eta_qnd),
            ("eta_bsm", self.eta_bsm),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.eta_bsm > 0.5 {
            return Err("eta_bsm above 0.5 is not reachable with linear optics".into());
        }
        if !(self.rate_hz > 0.0) || !self.rate_hz.is_finite() {
            return Err("rate_hz must be positive".into());
        }
        Ok(())
    }

    /// Device factor multiplying the ground and inter-satellite channels.
    pub fn factor(&self, arch: Architecture) -> f64 {
        match arch {
            Architecture::Downlink => self.eta_eps * self.eta_spd * self.eta_qnd,
            Architecture::Uplink => self.eta_eps * self.eta_spd * self.eta_spd * self.eta_bsm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "dl", alias = "downlink")]
    Downlink,
    #[serde(rename = "ul", alias = "uplink")]
    Uplink,
}

impl Architecture {
    pub fn label(&self) -> &'static str {
        match self {
            Architecture::Downlink => "dl",
            Architecture::Uplink => "ul",
        }
    }
}

/// Per-trial success probability of one elementary link.
pub fn link_success(eta_ground: f64, eta_is: f64, dev: &DeviceParams, arch: Architecture) -> f64 {
    eta_ground * eta_is * dev.factor(arch)
}

/// Converts a duration to whole bins, rounding down.
pub fn to_bins(t_s: f64, rate_hz: f64) -> u64 {
    let b = (t_s * rate_hz).floor();
    if b <= 0.0 {
        0
    } else {
        b as u64
    }
}

/// `sum_{k=0}^{d-1} x^k` given `ln x <= 0`.
pub fn geometric_sum(ln_x: f64, d: u64) -> f64 {
    if d == 0 {
        return 0.0;
    }
    if ln_x == 0.0 {
        return d as f64;
    }
    if ln_x == f64::NEG_INFINITY {
        return 1.0;
    }
    (d as f64 * ln_x).exp_m1() / ln_x.exp_m1()
}

/// `ln(1 - eta_a) + ln(1 - eta_b)`: log-probability of an empty bin.
fn ln_idle(eta_a: f64, eta_b: f64) -> f64 {
    (-eta_a).ln_1p() + (-eta_b).ln_1p()
}

/// Probabilities that a lone A (B) herald occurred within the last `d_a`
/// (`d_b`) bins with every bin since then empty.
pub fn p_event(eta_a: f64, eta_b: f64, d_a: u64, d_b: u64) -> (f64, f64) {
    let lq = ln_idle(eta_a, eta_b);
    (eta_a * (1.0 - eta_b) * geometric_sum(lq, d_a), (1.0 - eta_a) * eta_b * geometric_sum(lq, d_b))
}

/// Per-trial link state for one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub eta_a: f64,
    pub eta_b: f64,
    pub d_rt_a: u64,
    pub d_rt_b: u64,
    pub d_cut_a: u64,
    pub d_cut_b: u64,
}

impl LinkState {
    pub fn swapped(&self) -> Self {
        LinkState {
            eta_a: self.eta_b,
            eta_b: self.eta_a,
            d_rt_a: self.d_rt_b,
            d_rt_b: self.d_rt_a,
            d_cut_a: self.d_cut_b,
            d_cut_b: self.d_cut_a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BsmRates {
    pub attempted: f64,
    pub successful: f64,
    pub correct: f64,
    pub erroneous: f64,
    pub secure: f64,
    pub qber_x: f64,
}

impl BsmRates {
    pub fn scaled(&self, k: f64) -> BsmRates {
        BsmRates {
            attempted: self.attempted * k,
            successful: self.successful * k,
            correct: self.correct * k,
            erroneous: self.erroneous * k,
            secure: self.secure * k,
            qber_x: self.qber_x,
        }
    }

    pub fn objective(&self, o: Objective) -> f64 {
        match o {
            Objective::Secure => self.secure,
            Objective::Correct => self.correct,
            Objective::Successful => self.successful,
            Objective::Attempted => self.attempted,
        }
    }
}

pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Secure fraction of `n_succ` given `n_err` erroneous results.
pub fn secure(n_succ: f64, n_err: f64) -> f64 {
    if n_succ <= 0.0 {
        return 0.0;
    }
    let e = (n_err / n_succ).clamp(0.0, 1.0);
    if e >= 0.5 {
        return 0.0;
    }
    (n_succ * (1.0 - binary_entropy(e))).max(0.0)
}

/// Cutoff-independent pieces of the rate formulas for one time step.
#[derive(Debug, Clone, Copy)]
pub struct SwapKernel {
    pub eta_a: f64,
    pub eta_b: f64,
    pub d_rt_a: u64,
    pub d_rt_b: u64,
    mem_a: BinMemory,
    mem_b: BinMemory,
    ln_q: f64,
    w_ab: f64,
    w_a: f64,
    w_b: f64,
    // retrieval of a photon stored only for its round trip
    r_a: f64,
    r_b: f64,
    // flip-correlation factor for the same
    c_a: f64,
    c_b: f64,
}

impl SwapKernel {
    pub fn new(eta_a: f64, eta_b: f64, d_rt_a: u64, d_rt_b: u64, mem_a: BinMemory, mem_b: BinMemory) -> Self {
        let pw = |ln: f64, d: u64| if ln == 0.0 { 1.0 } else { (ln * d as f64).exp() };
        SwapKernel {
            eta_a,
            eta_b,
            d_rt_a,
            d_rt_b,
            mem_a,
            mem_b,
            ln_q: ln_idle(eta_a, eta_b),
            w_ab: eta_a * eta_b,
            w_a: eta_a * (1.0 - eta_b),
            w_b: (1.0 - eta_a) * eta_b,
            r_a: mem_a.eta_ret * pw(mem_a.ln_p, d_rt_a),
            r_b: mem_b.eta_ret * pw(mem_b.ln_p, d_rt_b),
            c_a: mem_a.eta_plus * pw(mem_a.ln_coh, d_rt_a),
            c_b: mem_b.eta_plus * pw(mem_b.ln_coh, d_rt_b),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.eta_a == self.eta_b && self.d_rt_a == self.d_rt_b && self.mem_a == self.mem_b
    }

    pub fn from_state(s: &LinkState, mem_a: BinMemory, mem_b: BinMemory) -> Self {
        Self::new(s.eta_a, s.eta_b, s.d_rt_a, s.d_rt_b, mem_a, mem_b)
    }

    pub fn rates(&self, d_a: u64, d_b: u64) -> BsmRates {
        let lq = self.ln_q;
        let p_a = self.w_a * geometric_sum(lq, d_a);
        let p_b = self.w_b * geometric_sum(lq, d_b);
        let denom = 1.0 - p_a * p_b;
        // a lone A herald finds a waiting B photon, and vice versa
        let bsm_a = (1.0 - p_a) * p_b / denom;
        let bsm_b = p_a * (1.0 - p_b) / denom;
        let attempted = self.w_ab + self.w_a * bsm_a + self.w_b * bsm_b;

        let ma = &self.mem_a;
        let mb = &self.mem_b;
        let ok_a = self.w_a * self.r_a * geometric_sum(lq + ma.ln_p, d_a);
        let ok_b = self.w_b * self.r_b * geometric_sum(lq + mb.ln_p, d_b);
        let successful =
            self.w_ab * self.r_a * self.r_b + self.w_a * ok_b * self.r_a * (1.0 - bsm_b) + self.w_b * ok_a * self.r_b * (1.0 - bsm_a);

        let dp_a = self.w_a * self.r_a * self.c_a * geometric_sum(lq + ma.ln_p + ma.ln_coh, d_a);
        let dp_b = self.w_b * self.r_b * self.c_b * geometric_sum(lq + mb.ln_p + mb.ln_coh, d_b);
        let delta = self.w_ab * self.r_a * self.r_b * self.c_a * self.c_b
            + self.w_a * dp_b * self.r_a * self.c_a * (1.0 - bsm_b)
            + self.w_b * dp_a * self.r_b * self.c_b * (1.0 - bsm_a);

        let correct = 0.5 * (successful + delta);
        let erroneous = 0.5 * (successful - delta);
        let qber_x = if successful > 0.0 { erroneous / successful } else { 0.0 };
        BsmRates { attempted, successful, correct, erroneous, secure: secure(successful, erroneous), qber_x }
    }
}

/// Rates per trial for a fully specified link state.
pub fn bsm_rates(state: &LinkState, mem_a: &BinMemory, mem_b: &BinMemory) -> BsmRates {
    SwapKernel::from_state(state, *mem_a, *mem_b).rates(state.d_cut_a, state.d_cut_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[default]
    Secure,
    Correct,
    Successful,
    Attempted,
}

/// Search box and grid resolution of the cutoff optimiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSearch {
    pub objective: Objective,
    pub max_cutoff: u64,
    pub grid_points: usize,
}

impl Default for CutoffSearch {
    fn default() -> Self {
        CutoffSearch { objective: Objective::Secure, max_cutoff: 1_000_000_000, grid_points: 60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffChoice {
    pub d_cut_a: u64,
    pub d_cut_b: u64,
    pub value: f64,
    pub rates: BsmRates,
}

/// `{0} ∪` log-spaced integers in `[1, max]`.
pub fn log_grid(max: u64, points: usize) -> Vec<u64> {
    let mut g = vec![0u64];
    if max == 0 || points < 2 {
        return g;
    }
    let n = points - 1;
    let lmax = (max as f64).ln();
    for k in 0..n {
        let x = if n == 1 { lmax } else { lmax * k as f64 / (n - 1) as f64 };
        let v = (x.exp().round() as u64).clamp(1, max);
        if *g.last().unwrap() != v {
            g.push(v);
        }
    }
    if *g.last().unwrap() != max {
        g.push(max);
    }
    g
}

/// Deterministic comparison: larger value wins, ties go to the smaller cutoffs.
fn better(v: f64, a: (u64, u64), best_v: f64, best: (u64, u64)) -> bool {
    if v > best_v {
        return true;
    }
    v == best_v && (a.0 + a.1, a.0) < (best.0 + best.1, best.0)
}

struct Searcher<F: Fn(u64, u64) -> f64> {
    f: F,
    max: u64,
}

impl<F: Fn(u64, u64) -> f64> Searcher<F> {
    fn grid(&self, points: usize) -> ((u64, u64), f64) {
        let g = log_grid(self.max, points);
        let mut best = (0, 0);
        let mut best_v = f64::NEG_INFINITY;
        for &a in &g {
            for &b in &g {
                let v = (self.f)(a, b);
                if better(v, (a, b), best_v, best) {
                    best_v = v;
                    best = (a, b);
                }
            }
        }
        (best, best_v)
    }

    /// Compass search with step halving down to one bin, then a final
    /// exhaustive check of the 5x5 neighbourhood.
    fn refine(&self, start: (u64, u64), start_v: f64, step0: u64) -> ((u64, u64), f64) {
        let mut best = start;
        let mut best_v = start_v;
        let mut step = step0.max(1);
        let moves: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)];
        let shift = |x: u64, s: i64, step: u64| -> Option<u64> {
            let y = x as i128 + s as i128 * step as i128;
            if y < 0 || y > self.max as i128 {
                None
            } else {
                Some(y as u64)
            }
        };
        let mut guard = 0;
        loop {
            let mut moved = false;
            for (sa, sb) in moves {
                if let (Some(a), Some(b)) = (shift(best.0, sa, step), shift(best.1, sb, step)) {
                    let v = (self.f)(a, b);
                    if better(v, (a, b), best_v, best) {
                        best_v = v;
                        best = (a, b);
                        moved = true;
                    }
                }
            }
            guard += 1;
            if guard > 10_000 {
                break;
            }
            if !moved {
                if step == 1 {
                    break;
                }
                step = step.div_ceil(2);
            }
        }
        for da in -2i64..=2 {
            for db in -2i64..=2 {
                if let (Some(a), Some(b)) = (shift(best.0, da, 1), shift(best.1, db, 1)) {
                    let v = (self.f)(a, b);
                    if better(v, (a, b), best_v, best) {
                        best_v = v;
                        best = (a, b);
                    }
                }
            }
        }
        (best, best_v)
    }

    fn full(&self, points: usize) -> ((u64, u64), f64) {
        let (p, v) = self.grid(points);
        // half the local grid spacing
        let ratio = (self.max as f64).powf(1.0 / (points.max(3) - 2) as f64);
        let step = ((p.0.max(p.1).max(1) as f64) * (ratio - 1.0) / 2.0).ceil() as u64;
        self.refine(p, v, step.max(1))
    }
}

fn choice(k: &SwapKernel, p: (u64, u64), value: f64) -> CutoffChoice {
    CutoffChoice { d_cut_a: p.0, d_cut_b: p.1, value, rates: k.rates(p.0, p.1) }
}

/// Maximises the objective over integer effective cutoffs.
///
/// For an A/B-symmetric kernel the optimum is searched on the diagonal
/// first; the diagonal point is kept unless the off-diagonal search beats it
/// by more than rounding noise, so symmetric inputs give equal cutoffs.
pub fn optimize_cutoffs(k: &SwapKernel, search: &CutoffSearch) -> CutoffChoice {
    let s = Searcher { f: |a, b| k.rates(a, b).objective(search.objective), max: search.max_cutoff };
    let (p, v) = s.full(search.grid_points);
    if k.is_symmetric() {
        let (m, vd) = diagonal_search(|d| k.rates(d, d).objective(search.objective), search);
        if vd >= v - 1e-12 * v.abs() {
            return choice(k, (m, m), vd);
        }
    }
    choice(k, p, v)
}

fn diagonal_search<F: Fn(u64) -> f64>(f: F, search: &CutoffSearch) -> (u64, f64) {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    let g = log_grid(search.max_cutoff, search.grid_points);
    for &d in &g {
        let v = f(d);
        if v > best_v {
            best_v = v;
            best = d;
        }
    }
    let mut step = (best / 8).max(1);
    loop {
        let mut moved = false;
        for cand in [best.saturating_sub(step), (best + step).min(search.max_cutoff)] {
            let v = f(cand);
            if v > best_v || (v == best_v && cand < best) {
                best_v = v;
                best = cand;
                moved = true;
            }
        }
        if !moved {
            if step == 1 {
                break;
            }
            step = step.div_ceil(2);
        }
    }
    (best, best_v)
}

/// Local search started from a previous optimum.
pub fn optimize_cutoffs_from(k: &SwapKernel, search: &CutoffSearch, start: (u64, u64)) -> CutoffChoice {
    let s = Searcher { f: |a, b| k.rates(a, b).objective(search.objective), max: search.max_cutoff };
    let start = (start.0.min(search.max_cutoff), start.1.min(search.max_cutoff));
    let v0 = (s.f)(start.0, start.1);
    let step = (start.0.max(start.1) / 4).max(1);
    let (p, v) = s.refine(start, v0, step);
    choice(k, p, v)
}

/// One cutoff pair for a whole sequence of steps, maximising the summed
/// objective weighted by `weights` (typically the step durations).
pub fn optimize_cutoffs_joint(ks: &[SwapKernel], weights: &[f64], search: &CutoffSearch) -> (u64, u64) {
    assert_eq!(ks.len(), weights.len());
    let s = Searcher {
        f: |a, b| ks.iter().zip(weights).map(|(k, w)| w * k.rates(a, b).objective(search.objective)).sum(),
        max: search.max_cutoff,
    };
    s.full(search.grid_points).0
}
